//! Venue-level availability distributions, Markdown/JSON summaries and SVG
//! charts.

use std::fmt::Write as _;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::digest::ts_format;
use crate::error::{CoreError, Result};
use crate::labels::ArticleAvailability;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub both: u64,
    pub data_only: u64,
    pub code_only: u64,
    pub neither: u64,
}

impl Counts {
    pub fn total(&self) -> u64 {
        self.both + self.data_only + self.code_only + self.neither
    }

    pub fn from_availability(items: &[ArticleAvailability]) -> Self {
        let mut c = Counts::default();
        for a in items {
            match (a.data_public, a.code_public) {
                (true, true) => c.both += 1,
                (true, false) => c.data_only += 1,
                (false, true) => c.code_only += 1,
                (false, false) => c.neither += 1,
            }
        }
        c
    }

    /// (name, count) in chart order.
    pub fn categories(&self) -> [(&'static str, u64); 4] {
        [
            ("both", self.both),
            ("data_only", self.data_only),
            ("code_only", self.code_only),
            ("neither", self.neither),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pct {
    pub both: f64,
    pub data_only: f64,
    pub code_only: f64,
    pub neither: f64,
}

/// Whole-percent strings as they appear in summaries.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Display {
    pub pct_any: String,
    pub pct_code: String,
    pub pct_data: String,
    pub both: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VenueReport {
    pub venue_id: String,
    pub n_sampled: u64,
    pub counts: Counts,
    pub pct: Pct,
    pub pct_any: f64,
    pub pct_code: f64,
    /// Articles with public data (`both + data_only`).
    pub pct_data: f64,
    pub display: Display,
    #[serde(with = "ts_format")]
    pub generated_at: DateTime<Utc>,
    pub inputs_digest: String,
}

/// `100*k/n` rounded half-up to tenths, as an integer count of tenths.
pub fn pct_tenths(k: u64, n: u64) -> u64 {
    assert!(n > 0);
    (2000 * k + n) / (2 * n)
}

/// `100*k/n` rounded half-up to a whole percent.
pub fn pct_whole(k: u64, n: u64) -> u64 {
    assert!(n > 0);
    (200 * k + n) / (2 * n)
}

/// One-decimal percentage value.
pub fn pct_one_decimal(k: u64, n: u64) -> f64 {
    pct_tenths(k, n) as f64 / 10.0
}

/// Whole-percent display; nonzero shares under one percent show as `<1%`.
pub fn display_pct(k: u64, n: u64) -> String {
    if k > 0 && 100 * k < n {
        "<1%".to_string()
    } else {
        format!("{}%", pct_whole(k, n))
    }
}

pub fn build_venue_report(
    availabilities: &[ArticleAvailability],
    venue_id: &str,
    generated_at: DateTime<Utc>,
    inputs_digest: &str,
) -> Result<VenueReport> {
    let counts = Counts::from_availability(availabilities);
    let n = counts.total();
    if n == 0 {
        return Err(CoreError::EmptySample);
    }
    let any = counts.both + counts.data_only + counts.code_only;
    let code = counts.both + counts.code_only;
    let data = counts.both + counts.data_only;
    Ok(VenueReport {
        venue_id: venue_id.to_string(),
        n_sampled: n,
        counts,
        pct: Pct {
            both: pct_one_decimal(counts.both, n),
            data_only: pct_one_decimal(counts.data_only, n),
            code_only: pct_one_decimal(counts.code_only, n),
            neither: pct_one_decimal(counts.neither, n),
        },
        pct_any: pct_one_decimal(any, n),
        pct_code: pct_one_decimal(code, n),
        pct_data: pct_one_decimal(data, n),
        display: Display {
            pct_any: display_pct(any, n),
            pct_code: display_pct(code, n),
            pct_data: display_pct(data, n),
            both: display_pct(counts.both, n),
        },
        generated_at,
        inputs_digest: inputs_digest.to_string(),
    })
}

/// JSON array of reports, sorted by venue.
pub fn render_json(reports: &[VenueReport]) -> Vec<u8> {
    let mut sorted: Vec<&VenueReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.venue_id.cmp(&b.venue_id));
    let mut v = serde_json::to_vec_pretty(&sorted).expect("reports serialize");
    v.push(b'\n');
    v
}

/// Markdown table, one row per venue sorted by venue id, followed by notes.
pub fn render_markdown(reports: &[VenueReport]) -> String {
    let mut sorted: Vec<&VenueReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.venue_id.cmp(&b.venue_id));
    let mut md = String::from("# Data and code availability\n\n");
    md.push_str("| Venue | n | Data or code | Code | Data | Both | Data only | Code only | Neither |\n");
    md.push_str("|---|---:|---:|---:|---:|---:|---:|---:|---:|\n");
    for r in &sorted {
        let c = &r.counts;
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} | {} ({}) | {} ({}) | {} ({}) | {} ({}) |",
            r.venue_id,
            r.n_sampled,
            r.display.pct_any,
            r.display.pct_code,
            r.display.pct_data,
            c.both,
            r.display.both,
            c.data_only,
            display_pct(c.data_only, r.n_sampled),
            c.code_only,
            display_pct(c.code_only, r.n_sampled),
            c.neither,
            display_pct(c.neither, r.n_sampled),
        );
    }
    md.push_str("\nPercentages are rounded half-up to whole percent; nonzero shares below 1% show as <1%.\n");
    for r in &sorted {
        let _ = writeln!(
            md,
            "\n- {}: data or code {:.1}%, code {:.1}%, data {:.1}%, both {:.1}% (shown as {}). Inputs {}.",
            r.venue_id,
            r.pct_any,
            r.pct_code,
            r.pct_data,
            r.pct.both,
            r.display.both,
            &r.inputs_digest[..r.inputs_digest.len().min(16)],
        );
    }
    md
}

const SVG_WIDTH: f64 = 480.0;
const SVG_HEIGHT: f64 = 320.0;
const PLOT_TOP: f64 = 50.0;
const PLOT_BOTTOM: f64 = 270.0;
const BAR_WIDTH: f64 = 70.0;
const BAR_GAP: f64 = 40.0;
const BAR_COLORS: [&str; 4] = ["#1b9e77", "#7570b3", "#d95f02", "#999999"];

fn fmt_coord(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Standalone bar chart of the four categories. The only `rect` elements
/// are the bars, whose heights are proportional to the counts.
pub fn render_distribution_chart(report: &VenueReport) -> Result<String> {
    if report.n_sampled == 0 {
        return Err(CoreError::EmptySample);
    }
    let cats = report.counts.categories();
    let max = cats.iter().map(|c| c.1).max().unwrap_or(0).max(1) as f64;
    let unit = (PLOT_BOTTOM - PLOT_TOP) / max;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif">"#,
        w = SVG_WIDTH,
        h = SVG_HEIGHT
    );
    let title = format!("{} (n={})", report.venue_id, report.n_sampled);
    let _ = writeln!(
        svg,
        r#"  <title>{t}</title>
  <text x="{x}" y="28" text-anchor="middle" font-size="16">{t}</text>"#,
        t = xml_escape(&title),
        x = SVG_WIDTH / 2.0
    );
    let _ = writeln!(
        svg,
        r##"  <line x1="30" y1="{y}" x2="{x2}" y2="{y}" stroke="#333" stroke-width="1"/>"##,
        y = PLOT_BOTTOM,
        x2 = SVG_WIDTH - 30.0
    );
    let left = (SVG_WIDTH - 4.0 * BAR_WIDTH - 3.0 * BAR_GAP) / 2.0;
    for (i, ((name, count), color)) in cats.iter().zip(BAR_COLORS).enumerate() {
        let x = left + i as f64 * (BAR_WIDTH + BAR_GAP);
        let height = *count as f64 * unit;
        let y = PLOT_BOTTOM - height;
        let pct = display_pct(*count, report.n_sampled);
        let _ = writeln!(
            svg,
            r#"  <rect data-category="{name}" data-count="{count}" x="{x}" y="{y}" width="{w}" height="{h}" fill="{color}"/>"#,
            x = fmt_coord(x),
            y = fmt_coord(y),
            w = fmt_coord(BAR_WIDTH),
            h = fmt_coord(height),
        );
        let _ = writeln!(
            svg,
            r#"  <text x="{cx}" y="{ly}" text-anchor="middle" font-size="12">{count} ({pct})</text>
  <text x="{cx}" y="{by}" text-anchor="middle" font-size="12">{label}</text>"#,
            cx = fmt_coord(x + BAR_WIDTH / 2.0),
            ly = fmt_coord(y - 6.0),
            by = fmt_coord(PLOT_BOTTOM + 18.0),
            pct = xml_escape(&pct),
            label = name.replace('_', " "),
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn avail(data: bool, code: bool) -> ArticleAvailability {
        ArticleAvailability {
            article_id: String::new(),
            data_public: data,
            code_public: code,
            labeled_paragraphs: 1,
            unclear_present: false,
        }
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(pct_tenths(1, 8), 125); // 12.5 exactly
        assert_eq!(pct_whole(1, 8), 13); // 12.5 -> 13
        assert_eq!(pct_whole(1, 200), 1); // 0.5 -> 1
        assert_eq!(pct_tenths(1, 3), 333);
        assert_eq!(pct_tenths(2, 3), 667);
    }

    #[test]
    fn display_rule() {
        assert_eq!(display_pct(0, 10), "0%");
        assert_eq!(display_pct(1, 150), "<1%");
        assert_eq!(display_pct(1, 100), "1%");
        assert_eq!(display_pct(10, 10), "100%");
    }

    #[test]
    fn all_neither() {
        let items: Vec<_> = (0..5).map(|_| avail(false, false)).collect();
        let r = build_venue_report(&items, "v", DateTime::<Utc>::UNIX_EPOCH, "d").unwrap();
        assert_eq!(r.counts, Counts { both: 0, data_only: 0, code_only: 0, neither: 5 });
        assert_eq!(r.pct_any, 0.0);
    }

    #[test]
    fn empty_sample_rejected() {
        assert_eq!(
            build_venue_report(&[], "v", DateTime::<Utc>::UNIX_EPOCH, "d").unwrap_err().code(),
            "EMPTY_SAMPLE"
        );
    }

    #[test]
    fn zero_bar_still_labeled() {
        let items = vec![avail(true, true)];
        let r = build_venue_report(&items, "v", DateTime::<Utc>::UNIX_EPOCH, "d").unwrap();
        let svg = render_distribution_chart(&r).unwrap();
        assert_eq!(svg.matches("<rect").count(), 4);
        assert!(svg.contains(r#"data-category="neither" data-count="0""#));
        assert!(svg.contains("0 (0%)"));
        assert!(svg.contains("v (n=1)"));
    }
}
