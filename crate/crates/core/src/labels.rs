//! Append-only label log and per-article availability folding.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::SampleManifest;
use crate::digest::{parse_ts, ts_format};
use crate::error::{CoreError, Result};
use crate::mine::MatchRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelValue {
    No,
    Unclear,
    Yes,
}

impl LabelValue {
    /// Across labelers any evidence wins: yes over unclear over no.
    fn precedence(self) -> u8 {
        match self {
            LabelValue::No => 0,
            LabelValue::Unclear => 1,
            LabelValue::Yes => 2,
        }
    }
}

impl std::str::FromStr for LabelValue {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "yes" | "y" => Ok(LabelValue::Yes),
            "no" | "n" => Ok(LabelValue::No),
            "unclear" | "u" | "?" => Ok(LabelValue::Unclear),
            other => Err(format!("{other:?} is not one of yes, no, unclear")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelRecord {
    pub article_id: String,
    pub paragraph_index: usize,
    pub public_data: LabelValue,
    pub public_code: LabelValue,
    pub labeler_id: String,
    #[serde(with = "ts_format")]
    pub labeled_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

pub fn valid_labeler_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.'))
}

/// Reads a label log; a missing file is an empty log.
pub fn read_log(path: &Path) -> Result<Vec<LabelRecord>> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(CoreError::io(path, e)),
    };
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CoreError::parse(path, format!("line {}: {e}", i + 1)))
        })
        .collect()
}

/// Paragraphs that can be labeled: those with at least one match.
pub fn targets_from_matches(matches: &[MatchRecord]) -> BTreeSet<(String, usize)> {
    matches
        .iter()
        .map(|m| (m.article_id.clone(), m.paragraph_index))
        .collect()
}

/// Single-writer handle on the label log. Records are only ever appended.
#[derive(Debug)]
pub struct LabelStore {
    path: PathBuf,
    targets: BTreeSet<(String, usize)>,
    last_by_labeler: HashMap<String, DateTime<Utc>>,
    records: Vec<LabelRecord>,
}

impl LabelStore {
    pub fn open(path: &Path, targets: BTreeSet<(String, usize)>) -> Result<Self> {
        let records = read_log(path)?;
        let mut last_by_labeler: HashMap<String, DateTime<Utc>> = HashMap::new();
        for r in &records {
            let e = last_by_labeler.entry(r.labeler_id.clone()).or_insert(r.labeled_at);
            *e = (*e).max(r.labeled_at);
        }
        Ok(LabelStore {
            path: path.to_path_buf(),
            targets,
            last_by_labeler,
            records,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn records(&self) -> &[LabelRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn has_target(&self, article_id: &str, paragraph_index: usize) -> bool {
        self.targets.contains(&(article_id.to_string(), paragraph_index))
    }

    /// Timestamp of the labeler's most recent record.
    pub fn last_labeled_at(&self, labeler_id: &str) -> Option<DateTime<Utc>> {
        self.last_by_labeler.get(labeler_id).copied()
    }

    pub fn targets(&self) -> &BTreeSet<(String, usize)> {
        &self.targets
    }

    /// Validates and appends one record, syncing it to disk before
    /// returning.
    pub fn append(&mut self, record: LabelRecord) -> Result<()> {
        if !valid_labeler_id(&record.labeler_id) {
            return Err(CoreError::InvalidLabel(format!(
                "labeler_id {:?} must be a nonempty slug",
                record.labeler_id
            )));
        }
        if !self.has_target(&record.article_id, record.paragraph_index) {
            return Err(CoreError::UnknownTarget {
                article_id: record.article_id,
                paragraph_index: record.paragraph_index,
            });
        }
        if let Some(last) = self.last_by_labeler.get(&record.labeler_id) {
            if record.labeled_at < *last {
                return Err(CoreError::ClockSkew {
                    labeler_id: record.labeler_id,
                    labeled_at: crate::digest::format_ts(&record.labeled_at),
                    last: crate::digest::format_ts(last),
                });
            }
        }
        let mut line = serde_json::to_vec(&record).expect("label serializes");
        line.push(b'\n');
        if let Some(dir) = self.path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| CoreError::io(dir, e))?;
        }
        let write = || -> std::io::Result<()> {
            let mut f = std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(&self.path)?;
            f.write_all(&line)?;
            f.sync_data()
        };
        write().map_err(|e| CoreError::io(&self.path, e))?;
        self.last_by_labeler
            .insert(record.labeler_id.clone(), record.labeled_at);
        self.records.push(record);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedLabel {
    pub article_id: String,
    pub paragraph_index: usize,
    pub public_data: LabelValue,
    pub public_code: LabelValue,
    /// Labelers whose current judgments disagree on data.
    pub data_conflict: bool,
    pub code_conflict: bool,
    pub labelers: Vec<String>,
    #[serde(with = "ts_format")]
    pub labeled_at: DateTime<Utc>,
}

impl ResolvedLabel {
    pub fn conflict(&self) -> bool {
        self.data_conflict || self.code_conflict
    }
}

pub type ResolvedMap = BTreeMap<(String, usize), ResolvedLabel>;

/// Effective label per paragraph. Each labeler's latest record counts (ties
/// on timestamp go to the greatest record, so log order never matters);
/// labelers are then combined by precedence.
pub fn resolve_labels(records: &[LabelRecord]) -> ResolvedMap {
    let mut latest: BTreeMap<(&str, usize, &str), &LabelRecord> = BTreeMap::new();
    for r in records {
        let key = (r.article_id.as_str(), r.paragraph_index, r.labeler_id.as_str());
        match latest.get(&key) {
            Some(cur) if (cur.labeled_at, *cur) >= (r.labeled_at, r) => {}
            _ => {
                latest.insert(key, r);
            }
        }
    }
    let mut out: ResolvedMap = BTreeMap::new();
    for ((article, para, labeler), r) in latest {
        let entry = out
            .entry((article.to_string(), para))
            .or_insert_with(|| ResolvedLabel {
                article_id: article.to_string(),
                paragraph_index: para,
                public_data: r.public_data,
                public_code: r.public_code,
                data_conflict: false,
                code_conflict: false,
                labelers: Vec::new(),
                labeled_at: r.labeled_at,
            });
        if !entry.labelers.is_empty() {
            entry.data_conflict |= entry.public_data != r.public_data;
            entry.code_conflict |= entry.public_code != r.public_code;
            if r.public_data.precedence() > entry.public_data.precedence() {
                entry.public_data = r.public_data;
            }
            if r.public_code.precedence() > entry.public_code.precedence() {
                entry.public_code = r.public_code;
            }
            entry.labeled_at = entry.labeled_at.max(r.labeled_at);
        }
        entry.labelers.push(labeler.to_string());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArticleAvailability {
    pub article_id: String,
    pub data_public: bool,
    pub code_public: bool,
    pub labeled_paragraphs: usize,
    pub unclear_present: bool,
}

/// One entry per sampled article, in manifest order. Flags are ORs over the
/// article's resolved paragraphs; `unclear` never sets a flag.
pub fn aggregate_articles(manifest: &SampleManifest, resolved: &ResolvedMap) -> Vec<ArticleAvailability> {
    let mut by_article: HashMap<&str, Vec<&ResolvedLabel>> = HashMap::new();
    for r in resolved.values() {
        by_article.entry(r.article_id.as_str()).or_default().push(r);
    }
    manifest
        .selected
        .iter()
        .map(|id| {
            let labels = by_article.get(id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
            ArticleAvailability {
                article_id: id.clone(),
                data_public: labels.iter().any(|l| l.public_data == LabelValue::Yes),
                code_public: labels.iter().any(|l| l.public_code == LabelValue::Yes),
                labeled_paragraphs: labels.len(),
                unclear_present: labels.iter().any(|l| {
                    l.public_data == LabelValue::Unclear || l.public_code == LabelValue::Unclear
                }),
            }
        })
        .collect()
}

/// Reads labels from a spreadsheet export. Required columns: `article_id`,
/// `paragraph_index`, `public_data`, `public_code`; optional `labeler_id`,
/// `labeled_at`, `note`. Other columns are ignored, so a labeled copy of the
/// matches CSV works. Rows with blank judgments are skipped, and repeated
/// rows for one paragraph collapse to one record.
pub fn import_csv(
    path: &Path,
    default_labeler: &str,
    default_time: DateTime<Utc>,
) -> Result<Vec<LabelRecord>> {
    let bytes = std::fs::read(path).map_err(|e| CoreError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(bytes.as_slice());
    let header = rdr.headers().map_err(|e| CoreError::parse(path, e))?.clone();
    let col = |name: &str| header.iter().position(|h| h.trim() == name);
    let need = |name: &str| {
        col(name).ok_or_else(|| CoreError::parse(path, format!("missing column {name}")))
    };
    let (c_article, c_para, c_data, c_code) = (
        need("article_id")?,
        need("paragraph_index")?,
        need("public_data")?,
        need("public_code")?,
    );
    let (c_labeler, c_time, c_note) = (col("labeler_id"), col("labeled_at"), col("note"));
    let mut out: Vec<LabelRecord> = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| CoreError::parse(path, e))?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |m: String| CoreError::parse(path, format!("line {line}: {m}"));
        let get = |i: usize| row.get(i).unwrap_or("").trim();
        if get(c_data).is_empty() && get(c_code).is_empty() {
            continue;
        }
        let labeler = c_labeler.map(get).filter(|s| !s.is_empty()).unwrap_or(default_labeler);
        let labeled_at = match c_time.map(get).filter(|s| !s.is_empty()) {
            Some(t) => parse_ts(t).ok_or_else(|| bad(format!("bad labeled_at {t:?}")))?,
            None => default_time,
        };
        let rec = LabelRecord {
            article_id: get(c_article).to_string(),
            paragraph_index: get(c_para)
                .parse()
                .map_err(|_| bad(format!("bad paragraph_index {:?}", get(c_para))))?,
            public_data: get(c_data).parse().map_err(bad)?,
            public_code: get(c_code).parse().map_err(bad)?,
            labeler_id: labeler.to_string(),
            labeled_at,
            note: c_note.map(get).filter(|s| !s.is_empty()).map(str::to_string),
        };
        if !out.contains(&rec) {
            out.push(rec);
        }
    }
    out.sort_by(|a, b| (a.labeled_at, a).cmp(&(b.labeled_at, b)));
    Ok(out)
}
