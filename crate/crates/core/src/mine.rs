//! Keyword/proximity pattern search over extracted paragraphs.

use std::collections::BTreeMap;
use std::path::Path;

use audit_extract::ExtractedDocument;
use regex::{Regex, RegexBuilder};
use regex_syntax::ast::{self, Ast};
use serde::{Deserialize, Serialize};

use crate::digest::{sha256_hex, write_atomic};
use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CategoryHint {
    Data,
    Code,
    Either,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternSpec {
    pub pattern_id: String,
    pub keyword_label: String,
    pub regex_source: String,
    pub category_hint: CategoryHint,
    pub enabled: bool,
    /// Patterns beyond the core set; off unless enabled explicitly.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub extended: bool,
}

const DEFAULT_PATTERNS: &str = include_str!("default_patterns.json");

/// Built-in pattern file: the three core patterns (enabled) followed by
/// an extended set (disabled).
pub fn default_patterns() -> Vec<PatternSpec> {
    serde_json::from_str(DEFAULT_PATTERNS).expect("built-in pattern file parses")
}

pub fn default_patterns_json() -> &'static str {
    DEFAULT_PATTERNS
}

pub fn load_patterns(path: &Path) -> Result<Vec<PatternSpec>> {
    let bytes = std::fs::read(path).map_err(|e| CoreError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| CoreError::parse(path, e))
}

#[derive(Debug, Clone)]
pub struct CompiledPattern {
    pub spec: PatternSpec,
    pub regex: Regex,
}

#[derive(Debug, Clone, Default)]
pub struct PatternSet {
    pub patterns: Vec<CompiledPattern>,
}

impl PatternSet {
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }
}

/// Rejects constructs outside the portable dialect before compiling.
fn check_dialect(spec: &PatternSpec) -> Result<()> {
    let parsed = ast::parse::ParserBuilder::new()
        .build()
        .parse(&spec.regex_source);
    match parsed {
        Ok(ast) => find_unportable(&ast).map_or(Ok(()), |construct| {
            Err(CoreError::DialectViolation {
                pattern_id: spec.pattern_id.clone(),
                construct: construct.into(),
            })
        }),
        Err(e) => {
            let construct = match e.kind() {
                ast::ErrorKind::UnsupportedBackreference => Some("a backreference"),
                ast::ErrorKind::UnsupportedLookAround => Some("lookaround"),
                _ => None,
            };
            match construct {
                Some(c) => Err(CoreError::DialectViolation {
                    pattern_id: spec.pattern_id.clone(),
                    construct: c.into(),
                }),
                None => Err(CoreError::PatternCompileError {
                    pattern_id: spec.pattern_id.clone(),
                    offset: e.span().start.offset,
                    message: e.kind().to_string(),
                }),
            }
        }
    }
}

/// Engine-specific syntax that parses here but would not elsewhere.
fn find_unportable(ast: &Ast) -> Option<&'static str> {
    match ast {
        Ast::Assertion(a) => match a.kind {
            ast::AssertionKind::StartLine
            | ast::AssertionKind::EndLine
            | ast::AssertionKind::StartText
            | ast::AssertionKind::EndText
            | ast::AssertionKind::WordBoundary
            | ast::AssertionKind::NotWordBoundary => None,
            _ => Some("a non-portable assertion"),
        },
        Ast::Flags(_) => Some("inline flags"),
        Ast::Repetition(r) => find_unportable(&r.ast),
        Ast::Group(g) => {
            if let ast::GroupKind::NonCapturing(flags) = &g.kind {
                if !flags.items.is_empty() {
                    return Some("inline flags");
                }
            }
            find_unportable(&g.ast)
        }
        Ast::Alternation(a) => a.asts.iter().find_map(find_unportable),
        Ast::Concat(c) => c.asts.iter().find_map(find_unportable),
        _ => None,
    }
}

/// Compiles enabled specs case-insensitively; disabled specs are skipped but
/// still dialect-checked.
pub fn compile_patterns(specs: &[PatternSpec]) -> Result<PatternSet> {
    let mut seen = std::collections::BTreeSet::new();
    let mut patterns = Vec::new();
    for spec in specs {
        if !seen.insert(spec.pattern_id.as_str()) {
            return Err(CoreError::PatternCompileError {
                pattern_id: spec.pattern_id.clone(),
                offset: 0,
                message: "duplicate pattern_id".into(),
            });
        }
        check_dialect(spec)?;
        if !spec.enabled {
            continue;
        }
        let regex = RegexBuilder::new(&spec.regex_source)
            .case_insensitive(true)
            .build()
            .map_err(|e| CoreError::PatternCompileError {
                pattern_id: spec.pattern_id.clone(),
                offset: 0,
                message: e.to_string(),
            })?;
        patterns.push(CompiledPattern {
            spec: spec.clone(),
            regex,
        });
    }
    Ok(PatternSet { patterns })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub match_id: String,
    pub article_id: String,
    pub venue_id: String,
    pub paragraph_index: usize,
    pub pattern_id: String,
    pub start: usize,
    pub end: usize,
    pub matched_text: String,
    pub context: String,
}

pub const MATCH_HEADER: [&str; 9] = [
    "match_id",
    "article_id",
    "venue_id",
    "paragraph_index",
    "pattern_id",
    "start",
    "end",
    "matched_text",
    "context",
];

pub fn match_id(article_id: &str, paragraph_index: usize, pattern_id: &str, start: usize) -> String {
    sha256_hex(format!("{article_id}|{paragraph_index}|{pattern_id}|{start}").as_bytes())[..16]
        .to_string()
}

/// All non-overlapping leftmost matches of every pattern in every paragraph,
/// ordered by (paragraph_index, start, pattern_id).
pub fn mine_document(doc: &ExtractedDocument, venue_id: &str, patterns: &PatternSet) -> Vec<MatchRecord> {
    let mut out = Vec::new();
    for para in &doc.paragraphs {
        for p in &patterns.patterns {
            for m in p.regex.find_iter(&para.text) {
                if m.start() == m.end() {
                    continue;
                }
                out.push(MatchRecord {
                    match_id: match_id(&doc.article_id, para.index, &p.spec.pattern_id, m.start()),
                    article_id: doc.article_id.clone(),
                    venue_id: venue_id.to_string(),
                    paragraph_index: para.index,
                    pattern_id: p.spec.pattern_id.clone(),
                    start: m.start(),
                    end: m.end(),
                    matched_text: m.as_str().to_string(),
                    context: para.text.clone(),
                });
            }
        }
    }
    out.sort_by(|a, b| {
        (a.paragraph_index, a.start, &a.pattern_id).cmp(&(b.paragraph_index, b.start, &b.pattern_id))
    });
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MineOutput {
    pub matches: Vec<MatchRecord>,
    /// Every mined article, including those with zero matches.
    pub counts: BTreeMap<String, usize>,
}

pub fn mine_corpus(docs: &[ExtractedDocument], venue_id: &str, patterns: &PatternSet) -> MineOutput {
    let mut matches = Vec::new();
    let mut counts = BTreeMap::new();
    for doc in docs {
        let found = mine_document(doc, venue_id, patterns);
        *counts.entry(doc.article_id.clone()).or_insert(0) += found.len();
        matches.extend(found);
    }
    matches.sort_by(|a, b| {
        (&a.article_id, a.paragraph_index, a.start, &a.pattern_id)
            .cmp(&(&b.article_id, b.paragraph_index, b.start, &b.pattern_id))
    });
    MineOutput { matches, counts }
}

pub fn matches_to_csv(matches: &[MatchRecord]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(MATCH_HEADER).expect("in-memory write");
    for m in matches {
        w.serialize(m).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn export_matches(matches: &[MatchRecord], path: &Path) -> Result<()> {
    write_atomic(path, &matches_to_csv(matches))
}

pub fn matches_from_csv(bytes: &[u8], path: &Path) -> Result<Vec<MatchRecord>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(bytes);
    let header = rdr.headers().map_err(|e| CoreError::parse(path, e))?;
    if header.iter().collect::<Vec<_>>() != MATCH_HEADER {
        return Err(CoreError::parse(path, format!("header must be {}", MATCH_HEADER.join(","))));
    }
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let m: MatchRecord = row.map_err(|e| CoreError::parse(path, e))?;
        let span_ok = m.start < m.end && m.context.get(m.start..m.end) == Some(m.matched_text.as_str());
        if !span_ok {
            return Err(CoreError::parse(
                path,
                format!("match {} has a span that does not select matched_text", m.match_id),
            ));
        }
        out.push(m);
    }
    Ok(out)
}

pub fn import_matches(path: &Path) -> Result<Vec<MatchRecord>> {
    let bytes = std::fs::read(path).map_err(|e| CoreError::io(path, e))?;
    matches_from_csv(&bytes, path)
}

pub fn counts_to_json(counts: &BTreeMap<String, usize>) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(counts).expect("counts serialize");
    v.push(b'\n');
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use audit_extract::load_plaintext;

    fn spec(id: &str, src: &str) -> PatternSpec {
        PatternSpec {
            pattern_id: id.into(),
            keyword_label: id.into(),
            regex_source: src.into(),
            category_hint: CategoryHint::Either,
            enabled: true,
            extended: false,
        }
    }

    #[test]
    fn defaults_compile_with_three_enabled() {
        let specs = default_patterns();
        let set = compile_patterns(&specs).unwrap();
        assert_eq!(set.len(), 3);
        assert!(specs.iter().filter(|s| s.extended).all(|s| !s.enabled));
        assert!(specs.iter().filter(|s| !s.extended).all(|s| s.enabled));
    }

    #[test]
    fn backreference_is_dialect_violation() {
        let err = compile_patterns(&[spec("b", r"(a)\1")]).unwrap_err();
        assert_eq!(err.code(), "DIALECT_VIOLATION");
        let err = compile_patterns(&[spec("l", r"foo(?=bar)")]).unwrap_err();
        assert_eq!(err.code(), "DIALECT_VIOLATION");
        let err = compile_patterns(&[spec("f", r"(?i)foo")]).unwrap_err();
        assert_eq!(err.code(), "DIALECT_VIOLATION");
    }

    #[test]
    fn compile_error_reports_offset() {
        match compile_patterns(&[spec("bad", r"abc(def")]).unwrap_err() {
            CoreError::PatternCompileError { pattern_id, offset, .. } => {
                assert_eq!(pattern_id, "bad");
                assert_eq!(offset, 3);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn empty_set_yields_nothing() {
        let set = compile_patterns(&[]).unwrap();
        let doc = load_plaintext("a", b"used the dataset; open source code available").unwrap();
        assert!(mine_document(&doc, "v", &set).is_empty());
    }

    #[test]
    fn disabled_pattern_skipped() {
        let mut s = spec("x", "open");
        s.enabled = false;
        assert!(compile_patterns(&[s]).unwrap().is_empty());
    }

    #[test]
    fn non_overlapping_resume_at_end() {
        let set = compile_patterns(&[spec("aa", "aa")]).unwrap();
        let doc = load_plaintext("a", b"aaaaa").unwrap();
        let m = mine_document(&doc, "v", &set);
        assert_eq!(m.iter().map(|m| m.start).collect::<Vec<_>>(), [0, 2]);
    }

    #[test]
    fn case_insensitive() {
        let set = compile_patterns(&[spec("os", r"\b(open-source|open source)\b")]).unwrap();
        let doc = load_plaintext("a", b"Open Source tools").unwrap();
        assert_eq!(mine_document(&doc, "v", &set)[0].matched_text, "Open Source");
    }

    #[test]
    fn empty_csv_is_header_only() {
        assert_eq!(matches_to_csv(&[]), MATCH_HEADER.join(",").into_bytes().into_iter().chain(*b"\r\n").collect::<Vec<u8>>());
    }
}
