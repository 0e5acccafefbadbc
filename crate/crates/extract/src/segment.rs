//! Paragraph segmentation over positioned lines.

use serde::{Deserialize, Serialize};

/// Vertical gap, relative to the page's reference line spacing, that starts
/// a new paragraph.
pub const PARAGRAPH_GAP_FACTOR: f64 = 1.5;
/// Upper bound on paragraph length in Unicode scalar values.
pub const MAX_PARAGRAPH_CHARS: usize = 8000;
/// Pages with fewer positive line gaps than this use the median line height
/// as the reference spacing instead of the median gap.
pub const MIN_GAPS_FOR_MEDIAN: usize = 3;

/// One line of text with its baseline position.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionedLine {
    /// 1-based page number.
    pub page: u32,
    /// Baseline y in user space (grows upward).
    pub y: f64,
    pub height: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub index: usize,
    pub page: u32,
    pub text: String,
    pub char_len: usize,
}

impl Paragraph {
    pub(crate) fn new(index: usize, page: u32, text: String) -> Self {
        let char_len = text.chars().count();
        Paragraph {
            index,
            page,
            text,
            char_len,
        }
    }
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

/// Reference spacing per page: median positive gap between consecutive
/// lines, or the median line height when there are too few gaps.
fn reference_spacing(lines: &[PositionedLine]) -> Vec<(u32, f64)> {
    let mut out: Vec<(u32, f64)> = Vec::new();
    let mut start = 0;
    while start < lines.len() {
        let page = lines[start].page;
        let end = lines[start..]
            .iter()
            .position(|l| l.page != page)
            .map_or(lines.len(), |p| start + p);
        let page_lines = &lines[start..end];
        let mut gaps: Vec<f64> = page_lines
            .windows(2)
            .map(|w| w[0].y - w[1].y)
            .filter(|g| *g > 0.0)
            .collect();
        let reference = if gaps.len() >= MIN_GAPS_FOR_MEDIAN {
            median(&mut gaps)
        } else {
            let mut heights: Vec<f64> = page_lines.iter().map(|l| l.height).collect();
            median(&mut heights)
        };
        out.push((page, reference.unwrap_or(0.0)));
        start = end;
    }
    out
}

fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Appends a line to paragraph text: a trailing hyphen after a letter joins
/// the next line without a space, otherwise lines are joined by one space.
fn join(acc: &mut String, line: &str) {
    if acc.is_empty() {
        acc.push_str(line);
        return;
    }
    let mut chars = acc.chars().rev();
    let hyphenated = chars.next() == Some('-') && chars.next().is_some_and(char::is_alphabetic);
    if hyphenated {
        acc.pop();
    } else {
        acc.push(' ');
    }
    acc.push_str(line);
}

/// Splits text into pieces of at most `max` chars, preferring whitespace.
pub(crate) fn split_long(text: &str, max: usize) -> Vec<String> {
    let mut pieces = Vec::new();
    let mut rest = text;
    while rest.chars().count() > max {
        let cut = rest
            .char_indices()
            .nth(max)
            .map(|(i, _)| i)
            .unwrap_or(rest.len());
        let head = &rest[..cut];
        let split_at = match head.rfind(' ') {
            Some(i) if i > 0 => i,
            _ => cut,
        };
        pieces.push(rest[..split_at].trim().to_string());
        rest = rest[split_at..].trim_start();
    }
    if !rest.trim().is_empty() {
        pieces.push(rest.trim().to_string());
    }
    pieces.into_iter().filter(|p| !p.is_empty()).collect()
}

/// Groups lines (already in reading order) into paragraphs.
///
/// A paragraph ends when the page changes, when the next line sits more
/// than [`PARAGRAPH_GAP_FACTOR`] times the page's reference spacing below
/// the previous one (or above it, as on a column change), or when appending
/// would exceed [`MAX_PARAGRAPH_CHARS`].
pub fn segment_paragraphs(lines: &[PositionedLine]) -> Vec<Paragraph> {
    let lines: Vec<PositionedLine> = lines
        .iter()
        .filter(|l| !l.text.trim().is_empty())
        .map(|l| PositionedLine {
            text: normalize_ws(&l.text),
            ..l.clone()
        })
        .collect();
    let spacing = reference_spacing(&lines);
    let spacing_for = |page: u32| {
        spacing
            .iter()
            .find(|(p, _)| *p == page)
            .map_or(0.0, |(_, s)| *s)
    };

    let mut out: Vec<Paragraph> = Vec::new();
    let mut current = String::new();
    let mut current_page = 0u32;
    let mut prev: Option<&PositionedLine> = None;

    let flush = |text: &mut String, page: u32, out: &mut Vec<Paragraph>| {
        let t = normalize_ws(text);
        text.clear();
        for piece in split_long(&t, MAX_PARAGRAPH_CHARS) {
            let idx = out.len();
            out.push(Paragraph::new(idx, page, piece));
        }
    };

    for line in &lines {
        let starts_new = match prev {
            None => false,
            Some(p) if p.page != line.page => true,
            Some(p) => {
                let gap = p.y - line.y;
                gap < 0.0 || gap > PARAGRAPH_GAP_FACTOR * spacing_for(line.page)
            }
        };
        let would_overflow = !current.is_empty()
            && current.chars().count() + 1 + line.text.chars().count() > MAX_PARAGRAPH_CHARS;
        if (starts_new || would_overflow) && !current.is_empty() {
            flush(&mut current, current_page, &mut out);
        }
        if current.is_empty() {
            current_page = line.page;
        }
        join(&mut current, &line.text);
        prev = Some(line);
    }
    if !current.is_empty() {
        flush(&mut current, current_page, &mut out);
    }
    out
}
