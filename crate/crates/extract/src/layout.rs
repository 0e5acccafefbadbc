//! Groups text spans into reading-order lines.

use crate::interp::TextSpan;
use crate::segment::PositionedLine;

/// Gap between spans (as a fraction of font size) that reads as a space.
const WORD_GAP: f64 = 0.1;
/// Baseline tolerance (fraction of font size) for spans sharing a line.
const BASELINE_TOLERANCE: f64 = 0.5;
/// A page is two-column only if each half has this many distinct baselines.
const MIN_COLUMN_LINES: usize = 3;

/// Builds lines for one page. `page_box` is `[llx lly urx ury]`.
///
/// Two-column heuristic: when both halves of the page hold several lines and
/// almost no span straddles the vertical midline, the left column is read
/// before the right one. Anything else is read as a single column.
pub fn build_lines(page: u32, spans: &[TextSpan], page_box: [f64; 4]) -> Vec<PositionedLine> {
    let spans: Vec<&TextSpan> = spans
        .iter()
        .filter(|s| !s.text.trim().is_empty() && s.y.is_finite() && s.x0.is_finite())
        .collect();
    if spans.is_empty() {
        return Vec::new();
    }
    let mid = (page_box[0] + page_box[2]) / 2.0;
    let two_columns = is_two_column(&spans, mid);
    let mut columns: [Vec<&TextSpan>; 2] = [Vec::new(), Vec::new()];
    for s in spans {
        let col = usize::from(two_columns && s.x0 >= mid);
        columns[col].push(s);
    }
    let mut lines = Vec::new();
    for col in columns.iter_mut() {
        // Stable sort keeps content order for spans on the same baseline.
        col.sort_by(|a, b| b.y.total_cmp(&a.y));
        let mut groups: Vec<Vec<&TextSpan>> = Vec::new();
        for s in col.iter() {
            match groups.last_mut() {
                Some(g)
                    if (g[0].y - s.y).abs()
                        <= BASELINE_TOLERANCE * g[0].size.max(s.size).max(1.0) =>
                {
                    g.push(s)
                }
                _ => groups.push(vec![s]),
            }
        }
        for g in groups {
            lines.push(join_line(page, g));
        }
    }
    lines
}

fn is_two_column(spans: &[&TextSpan], mid: f64) -> bool {
    let mut left = Vec::new();
    let mut right = Vec::new();
    let mut straddling = 0usize;
    for s in spans {
        if s.x1 <= mid {
            left.push(s.y.round() as i64);
        } else if s.x0 >= mid {
            right.push(s.y.round() as i64);
        } else {
            straddling += 1;
        }
    }
    left.sort_unstable();
    left.dedup();
    right.sort_unstable();
    right.dedup();
    left.len() >= MIN_COLUMN_LINES
        && right.len() >= MIN_COLUMN_LINES
        && straddling * 10 <= left.len() + right.len()
}

fn join_line(page: u32, mut spans: Vec<&TextSpan>) -> PositionedLine {
    let y = spans[0].y;
    let height = spans.iter().map(|s| s.size).fold(0.0, f64::max);
    spans.sort_by(|a, b| a.x0.total_cmp(&b.x0));
    let mut text = String::new();
    let mut prev: Option<&TextSpan> = None;
    for s in spans {
        if let Some(p) = prev {
            // Overprinted duplicates (fake bold).
            if (s.x0 - p.x0).abs() < 0.5 && s.text == p.text {
                continue;
            }
            let gap = s.x0 - p.x1;
            let needs_space = gap > WORD_GAP * s.size.max(p.size)
                && !text.ends_with(char::is_whitespace)
                && !s.text.starts_with(char::is_whitespace);
            if needs_space {
                text.push(' ');
            }
        }
        text.push_str(&s.text);
        prev = Some(s);
    }
    PositionedLine {
        page,
        y,
        height,
        text,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span(x0: f64, x1: f64, y: f64, text: &str) -> TextSpan {
        TextSpan {
            x0,
            x1,
            y,
            size: 10.0,
            text: text.into(),
        }
    }

    const LETTER: [f64; 4] = [0.0, 0.0, 612.0, 792.0];

    #[test]
    fn spans_on_one_baseline_join_with_spaces() {
        let spans = vec![span(100.0, 130.0, 700.0, "open"), span(133.0, 170.0, 700.2, "source")];
        let lines = build_lines(1, &spans, LETTER);
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].text, "open source");
    }

    #[test]
    fn adjacent_spans_join_without_space() {
        let spans = vec![span(100.0, 130.0, 700.0, "repro"), span(130.2, 170.0, 700.0, "duce")];
        assert_eq!(build_lines(1, &spans, LETTER)[0].text, "reproduce");
    }

    #[test]
    fn lines_ordered_top_to_bottom() {
        let spans = vec![span(72.0, 200.0, 600.0, "second"), span(72.0, 200.0, 700.0, "first")];
        let lines = build_lines(1, &spans, LETTER);
        assert_eq!(lines[0].text, "first");
        assert_eq!(lines[1].text, "second");
    }

    #[test]
    fn two_columns_read_left_then_right() {
        let mut spans = Vec::new();
        for i in 0..4 {
            let y = 700.0 - 12.0 * i as f64;
            spans.push(span(72.0, 290.0, y, &format!("L{i}")));
            spans.push(span(320.0, 540.0, y, &format!("R{i}")));
        }
        let texts: Vec<String> = build_lines(1, &spans, LETTER)
            .into_iter()
            .map(|l| l.text)
            .collect();
        assert_eq!(texts, ["L0", "L1", "L2", "L3", "R0", "R1", "R2", "R3"]);
    }

    #[test]
    fn single_column_with_midline_words_not_split() {
        let mut spans = Vec::new();
        for i in 0..5 {
            let y = 700.0 - 12.0 * i as f64;
            spans.push(span(72.0, 250.0, y, "left words"));
            spans.push(span(253.0, 350.0, y, "middle"));
            spans.push(span(353.0, 540.0, y, "right words"));
        }
        let lines = build_lines(1, &spans, LETTER);
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0].text, "left words middle right words");
    }
}
