//! Venue indexes and seeded sampling.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};
use url::Url;

use crate::digest::{format_ts, parse_ts, sha256_hex, ts_format, write_atomic};
use crate::error::{CoreError, Result};
use crate::rng::Xoshiro256StarStar;

pub const INDEX_HEADER: [&str; 7] = [
    "article_id",
    "venue_id",
    "title",
    "year",
    "pdf_url",
    "landing_url",
    "discovered_at",
];

pub const MIN_YEAR: i32 = 2000;
pub const MAX_YEAR: i32 = 2100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VenueConfig {
    pub venue_id: String,
    pub display_name: String,
    pub listing_url_template: String,
    pub page_range: (u32, u32),
    pub entry_rules: Vec<String>,
    #[serde(default)]
    pub min_delay_ms: u64,
    pub year_filter: Option<(i32, i32)>,
}

impl VenueConfig {
    pub fn validate(&self) -> Result<()> {
        let slug_ok = !self.venue_id.is_empty()
            && self
                .venue_id
                .bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-');
        if !slug_ok {
            return Err(CoreError::InvalidConfig(format!(
                "venue_id {:?} must match [a-z0-9-]+",
                self.venue_id
            )));
        }
        if self.page_range.0 > self.page_range.1 {
            return Err(CoreError::InvalidConfig(format!(
                "page_range {:?} is decreasing",
                self.page_range
            )));
        }
        if let Some((lo, hi)) = self.year_filter {
            if lo > hi {
                return Err(CoreError::InvalidConfig(format!("year_filter {lo}..{hi} is decreasing")));
            }
        }
        if !self.listing_url_template.contains("{page}") {
            return Err(CoreError::InvalidConfig(
                "listing_url_template lacks a {page} placeholder".into(),
            ));
        }
        self.compile_rules().map(|_| ())
    }

    pub fn compile_rules(&self) -> Result<Vec<Regex>> {
        self.entry_rules
            .iter()
            .enumerate()
            .map(|(index, src)| {
                let re = Regex::new(src).map_err(|e| CoreError::RuleCompileError {
                    index,
                    message: e.to_string(),
                })?;
                let names: Vec<&str> = re.capture_names().flatten().collect();
                for required in ["title", "year", "pdf_url"] {
                    if !names.contains(&required) {
                        return Err(CoreError::RuleCompileError {
                            index,
                            message: format!("missing named group `{required}`"),
                        });
                    }
                }
                Ok(re)
            })
            .collect()
    }

    pub fn listing_url(&self, page: u32) -> String {
        self.listing_url_template.replace("{page}", &page.to_string())
    }
}

pub fn article_id(venue_id: &str, pdf_url: &str) -> String {
    sha256_hex(format!("{venue_id}|{pdf_url}").as_bytes())[..16].to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArticleRecord {
    pub article_id: String,
    pub venue_id: String,
    pub title: String,
    pub year: i32,
    pub pdf_url: String,
    pub landing_url: Option<String>,
    #[serde(with = "ts_format")]
    pub discovered_at: DateTime<Utc>,
}

impl ArticleRecord {
    pub fn new(
        venue_id: &str,
        title: &str,
        year: i32,
        pdf_url: &str,
        landing_url: Option<String>,
        discovered_at: DateTime<Utc>,
    ) -> Self {
        ArticleRecord {
            article_id: article_id(venue_id, pdf_url),
            venue_id: venue_id.to_string(),
            title: title.to_string(),
            year,
            pdf_url: pdf_url.to_string(),
            landing_url,
            discovered_at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusIndex {
    pub venue_id: String,
    pub records: Vec<ArticleRecord>,
    pub index_digest: String,
}

impl CorpusIndex {
    /// Sorts by article id, rejects duplicates and computes the digest.
    pub fn new(venue_id: &str, mut records: Vec<ArticleRecord>) -> Result<Self> {
        records.sort_by(|a, b| a.article_id.cmp(&b.article_id));
        for w in records.windows(2) {
            if w[0].article_id == w[1].article_id {
                return Err(CoreError::DuplicateId(w[0].article_id.clone()));
            }
        }
        if let Some(r) = records.iter().find(|r| r.venue_id != venue_id) {
            return Err(CoreError::VenueMismatch(venue_id.into(), r.venue_id.clone()));
        }
        let mut index = CorpusIndex {
            venue_id: venue_id.to_string(),
            records,
            index_digest: String::new(),
        };
        index.index_digest = sha256_hex(&index.to_csv());
        Ok(index)
    }

    pub fn get(&self, article_id: &str) -> Option<&ArticleRecord> {
        self.records
            .binary_search_by(|r| r.article_id.as_str().cmp(article_id))
            .ok()
            .map(|i| &self.records[i])
    }

    /// Canonical CSV bytes: fixed header, CRLF records, minimal quoting.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        w.write_record(INDEX_HEADER).expect("in-memory write");
        for r in &self.records {
            w.write_record([
                r.article_id.as_str(),
                r.venue_id.as_str(),
                r.title.as_str(),
                &r.year.to_string(),
                r.pdf_url.as_str(),
                r.landing_url.as_deref().unwrap_or(""),
                &format_ts(&r.discovered_at),
            ])
            .expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    /// Latest discovery time, used as a reproducible timestamp for derived
    /// artifacts.
    pub fn latest_discovery(&self) -> DateTime<Utc> {
        self.records
            .iter()
            .map(|r| r.discovered_at)
            .max()
            .unwrap_or(DateTime::<Utc>::UNIX_EPOCH)
    }
}

/// Source of listing-page HTML.
pub trait PageFetcher {
    fn fetch_page(&self, url: &str) -> std::result::Result<String, String>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexBuild {
    pub index: CorpusIndex,
    pub warnings: Vec<String>,
}

/// Scrapes every listing page of a venue. Pages are visited in order, so the
/// first occurrence of a duplicated pdf_url is the one kept.
pub fn build_index(
    config: &VenueConfig,
    fetcher: &dyn PageFetcher,
    discovered_at: DateTime<Utc>,
) -> Result<IndexBuild> {
    config.validate()?;
    let rules = config.compile_rules()?;
    let mut warnings = Vec::new();
    let mut by_id: BTreeMap<String, ArticleRecord> = BTreeMap::new();
    let (first, last) = config.page_range;
    let mut fetched = 0usize;
    for page in first..=last {
        let url = config.listing_url(page);
        let html = match fetcher.fetch_page(&url) {
            Ok(h) => h,
            Err(e) => {
                warnings.push(format!("page {page} ({url}): {e}"));
                continue;
            }
        };
        fetched += 1;
        let base = Url::parse(&url).ok();
        let mut found = 0usize;
        for rule in &rules {
            for caps in rule.captures_iter(&html) {
                match entry_from_captures(config, &caps, base.as_ref(), discovered_at) {
                    Ok(rec) => {
                        found += 1;
                        by_id.entry(rec.article_id.clone()).or_insert(rec);
                    }
                    Err(e) => warnings.push(format!("page {page}: skipped entry: {e}")),
                }
            }
        }
        if found == 0 {
            warnings.push(format!("page {page} ({url}): no entries matched"));
        }
    }
    if fetched == 0 {
        return Err(CoreError::AllPagesFailed {
            attempted: (last - first + 1) as usize,
        });
    }
    let index = CorpusIndex::new(&config.venue_id, by_id.into_values().collect())?;
    Ok(IndexBuild { index, warnings })
}

fn entry_from_captures(
    config: &VenueConfig,
    caps: &regex::Captures<'_>,
    base: Option<&Url>,
    discovered_at: DateTime<Utc>,
) -> std::result::Result<ArticleRecord, String> {
    let group = |name: &str| caps.name(name).map(|m| m.as_str()).unwrap_or("");
    let title = clean_html_text(group("title"));
    if title.is_empty() {
        return Err("empty title".into());
    }
    let year_text = group("year").trim();
    let year: i32 = year_text
        .parse()
        .map_err(|_| format!("year {year_text:?} is not an integer"))?;
    if !(MIN_YEAR..=MAX_YEAR).contains(&year) {
        return Err(format!("year {year} outside {MIN_YEAR}..={MAX_YEAR}"));
    }
    let pdf_url = absolutize(&decode_entities(group("pdf_url")), base)?;
    let landing = match caps.name("landing_url").map(|m| m.as_str().trim()) {
        Some(s) if !s.is_empty() => Some(absolutize(&decode_entities(s), base)?),
        _ => None,
    };
    Ok(ArticleRecord::new(
        &config.venue_id,
        &title,
        year,
        &pdf_url,
        landing,
        discovered_at,
    ))
}

fn absolutize(raw: &str, base: Option<&Url>) -> std::result::Result<String, String> {
    let raw = raw.trim();
    let parsed = match base {
        Some(b) => b.join(raw),
        None => Url::parse(raw),
    };
    parsed
        .map(|u| u.to_string())
        .map_err(|e| format!("bad url {raw:?}: {e}"))
}

/// Strips tags, decodes common entities and collapses whitespace.
pub fn clean_html_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut in_tag = false;
    for c in s.chars() {
        match c {
            '<' => in_tag = true,
            '>' if in_tag => {
                in_tag = false;
                out.push(' ');
            }
            _ if !in_tag => out.push(c),
            _ => {}
        }
    }
    decode_entities(&out)
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn decode_entities(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        rest = &rest[amp..];
        let Some(semi) = rest[..rest.len().min(12)].find(';') else {
            out.push('&');
            rest = &rest[1..];
            continue;
        };
        let name = &rest[1..semi];
        let decoded = match name {
            "amp" => Some('&'),
            "lt" => Some('<'),
            "gt" => Some('>'),
            "quot" => Some('"'),
            "apos" => Some('\''),
            "nbsp" => Some(' '),
            _ => name
                .strip_prefix("#x")
                .or_else(|| name.strip_prefix("#X"))
                .and_then(|h| u32::from_str_radix(h, 16).ok())
                .or_else(|| name.strip_prefix('#').and_then(|d| d.parse().ok()))
                .and_then(char::from_u32),
        };
        match decoded {
            Some(c) => {
                out.push(c);
                rest = &rest[semi + 1..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    article_id: String,
    venue_id: String,
    title: String,
    year: String,
    pdf_url: String,
    landing_url: String,
    discovered_at: String,
}

/// Reads an index CSV. Rows may leave `article_id` empty (hand-made
/// indexes); it is then computed. `venue_id` defaults to the file stem when
/// the file has no rows.
pub fn load_index(path: &Path) -> Result<CorpusIndex> {
    let bytes = std::fs::read(path).map_err(|e| CoreError::io(path, e))?;
    let malformed = |line: u64, message: String| CoreError::MalformedRow {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().from_reader(bytes.as_slice());
    let header = rdr
        .headers()
        .map_err(|e| malformed(1, e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != INDEX_HEADER {
        return Err(malformed(1, format!("header must be {}", INDEX_HEADER.join(","))));
    }
    let mut records = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let row: CsvRow = row
            .deserialize(Some(&header))
            .map_err(|e| malformed(line, e.to_string()))?;
        let rec = parse_row(row).map_err(|m| malformed(line, m))?;
        if !seen.insert(rec.article_id.clone()) {
            return Err(CoreError::DuplicateId(rec.article_id));
        }
        records.push(rec);
    }
    let venue = match records.first() {
        Some(r) => r.venue_id.clone(),
        None => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    CorpusIndex::new(&venue, records)
}

fn parse_row(row: CsvRow) -> std::result::Result<ArticleRecord, String> {
    let year: i32 = row
        .year
        .trim()
        .parse()
        .map_err(|_| format!("year {:?} is not an integer", row.year))?;
    if !(MIN_YEAR..=MAX_YEAR).contains(&year) {
        return Err(format!("year {year} outside {MIN_YEAR}..={MAX_YEAR}"));
    }
    if row.venue_id.is_empty() {
        return Err("empty venue_id".into());
    }
    let pdf = Url::parse(row.pdf_url.trim()).map_err(|e| format!("pdf_url not absolute: {e}"))?;
    let landing = match row.landing_url.trim() {
        "" => None,
        s => Some(
            Url::parse(s)
                .map_err(|e| format!("landing_url not absolute: {e}"))?
                .to_string(),
        ),
    };
    let discovered_at = parse_ts(&row.discovered_at)
        .ok_or_else(|| format!("discovered_at {:?} is not ISO-8601", row.discovered_at))?;
    let pdf_url = pdf.to_string();
    let expected = article_id(&row.venue_id, &pdf_url);
    if !row.article_id.is_empty() && row.article_id != expected {
        return Err(format!(
            "article_id {} does not match venue_id|pdf_url (expected {expected})",
            row.article_id
        ));
    }
    Ok(ArticleRecord {
        article_id: expected,
        venue_id: row.venue_id,
        title: row.title,
        year,
        pdf_url,
        landing_url: landing,
        discovered_at,
    })
}

pub fn save_index(index: &CorpusIndex, path: &Path) -> Result<()> {
    write_atomic(path, &index.to_csv())
}

/// Union by article id; `a` wins conflicts.
pub fn merge_indexes(a: &CorpusIndex, b: &CorpusIndex) -> Result<CorpusIndex> {
    if a.venue_id != b.venue_id {
        return Err(CoreError::VenueMismatch(a.venue_id.clone(), b.venue_id.clone()));
    }
    let mut merged: BTreeMap<&str, &ArticleRecord> = BTreeMap::new();
    for r in &b.records {
        merged.insert(&r.article_id, r);
    }
    for r in &a.records {
        merged.insert(&r.article_id, r);
    }
    CorpusIndex::new(&a.venue_id, merged.into_values().cloned().collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleManifest {
    pub venue_id: String,
    pub seed: u64,
    pub requested_k: usize,
    pub index_digest: String,
    pub selected: Vec<String>,
    #[serde(with = "ts_format")]
    pub created_at: DateTime<Utc>,
}

impl SampleManifest {
    pub fn to_json(&self) -> Vec<u8> {
        let mut v = serde_json::to_vec_pretty(self).expect("manifest serializes");
        v.push(b'\n');
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleOutcome {
    pub manifest: SampleManifest,
    /// `EMPTY_AFTER_FILTER` when the year filter leaves nothing to draw.
    pub warnings: Vec<String>,
}

/// Uniform sample without replacement: candidates in article-id order are
/// shuffled with the seeded generator and the first `k` kept.
///
/// `created_at` is the index's latest discovery time, so the manifest is a
/// pure function of its inputs.
pub fn sample(
    index: &CorpusIndex,
    seed: u64,
    k: usize,
    year_filter: Option<(i32, i32)>,
) -> SampleOutcome {
    let mut candidates: Vec<&str> = index
        .records
        .iter()
        .filter(|r| year_filter.is_none_or(|(lo, hi)| (lo..=hi).contains(&r.year)))
        .map(|r| r.article_id.as_str())
        .collect();
    candidates.sort_unstable();
    let mut warnings = Vec::new();
    if candidates.is_empty() {
        warnings.push(format!(
            "EMPTY_AFTER_FILTER: no records of venue {} within {:?}",
            index.venue_id, year_filter
        ));
    }
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    rng.shuffle(&mut candidates);
    let mut selected: Vec<String> = candidates
        .into_iter()
        .take(k)
        .map(str::to_string)
        .collect();
    selected.sort_unstable();
    SampleOutcome {
        manifest: SampleManifest {
            venue_id: index.venue_id.clone(),
            seed,
            requested_k: k,
            index_digest: index.index_digest.clone(),
            selected,
            created_at: index.latest_discovery(),
        },
        warnings,
    }
}
