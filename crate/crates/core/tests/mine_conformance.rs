mod support;

use std::sync::LazyLock;
use std::time::Instant;

use audit_core::mine::{
    compile_patterns, default_patterns, matches_from_csv, matches_to_csv, mine_corpus,
    mine_document, CategoryHint, MatchRecord, PatternSet, PatternSpec,
};
use audit_extract::{load_plaintext, ExtractedDocument, Paragraph};
use proptest::prelude::*;
use support::backtrack::Backtrack;

const USED_DATASET: &str = r"\b(used)(?:\W+\w+){0,5}?\W+(dataset)\b";
const OPEN_SOURCE: &str = r"\b(open-source|open source)\b";
const CODE_AVAILABLE: &str = r"\b(code)(?:\W+\w+){0,9}?\W+(available)";

/// (pattern, text, expected matched text or None), each traced by hand.
fn conformance_cases() -> Vec<(&'static str, &'static str, Option<&'static str>)> {
    vec![
        // Four intervening words, within the bound of five.
        (
            USED_DATASET,
            "we used the publicly available benchmark dataset",
            Some("used the publicly available benchmark dataset"),
        ),
        // Seven intervening words, beyond the bound.
        (USED_DATASET, "used a new high quality annotated image segmentation dataset", None),
        (USED_DATASET, "used one two three four five dataset", Some("used one two three four five dataset")),
        (USED_DATASET, "used one two three four five six dataset", None),
        (USED_DATASET, "Datasets: We Used The Dataset.", Some("Used The Dataset")),
        (USED_DATASET, "used dataset", Some("used dataset")),
        (USED_DATASET, "the dataset was used", None),
        (USED_DATASET, "we used the datasets", None),
        (USED_DATASET, "the unused dataset", None),
        (OPEN_SOURCE, "an open source library", Some("open source")),
        (OPEN_SOURCE, "an open-source library", Some("open-source")),
        (OPEN_SOURCE, "Open-Source tools", Some("Open-Source")),
        (OPEN_SOURCE, "the project was open-sourced", None),
        (OPEN_SOURCE, "opensource", None),
        (OPEN_SOURCE, "reopen source files", None),
        (OPEN_SOURCE, "open  source", None),
        (
            CODE_AVAILABLE,
            "the code is freely available online",
            Some("code is freely available"),
        ),
        (CODE_AVAILABLE, "available source code", None),
        (CODE_AVAILABLE, "Code: available upon request", Some("Code: available")),
        (CODE_AVAILABLE, "code a b c d e f g h i available", Some("code a b c d e f g h i available")),
        (CODE_AVAILABLE, "code a b c d e f g h i j available", None),
        (CODE_AVAILABLE, "codes available on request", None),
        (CODE_AVAILABLE, "source code availability", None),
        (CODE_AVAILABLE, "code code available", Some("code code available")),
    ]
}

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
fn default_file_carries_core_patterns() {
    let specs = default_patterns();
    let sources: Vec<&str> = specs.iter().filter(|s| s.enabled).map(|s| s.regex_source.as_str()).collect();
    assert_eq!(sources, [USED_DATASET, OPEN_SOURCE, CODE_AVAILABLE]);
}

#[test]
fn conformance_against_hand_trace_and_reference_engine() {
    let started = Instant::now();
    let cases = conformance_cases();
    assert!(cases.len() >= 12);
    for (pattern, text, expected) in cases {
        let set = compile_patterns(&[spec("p", pattern)]).unwrap();
        let found = mine_document(&doc_from(vec![text.to_string()]), "v", &set);
        let got = found.first().map(|m| m.matched_text.as_str());
        assert_eq!(got, expected, "{pattern} on {text:?}");
        let oracle = Backtrack::new(pattern).unwrap();
        let want = oracle.find_at(text, 0).map(|(s, e)| &text[s..e]);
        assert_eq!(got, want, "reference engine disagrees: {pattern} on {text:?}");
    }
    assert!(started.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn gap_bound_enumerated() {
    // For n intervening words, presence must equal n <= bound.
    for (pattern, head, tail, bound) in [(USED_DATASET, "used", "dataset", 5), (CODE_AVAILABLE, "code", "available", 9)] {
        let set = compile_patterns(&[spec("p", pattern)]).unwrap();
        for n in 0..14 {
            let words: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
            let text = format!("{head} {} {tail}", words.join(" "));
            let doc = load_plaintext("a", text.as_bytes()).unwrap();
            assert_eq!(!mine_document(&doc, "v", &set).is_empty(), n <= bound, "{text}");
        }
    }
}

#[test]
fn multiple_matches_in_one_paragraph() {
    let set = compile_patterns(&[spec("p", USED_DATASET)]).unwrap();
    let doc = load_plaintext("a", b"we used the dataset and then used another dataset").unwrap();
    let m = mine_document(&doc, "v", &set);
    assert_eq!(m.len(), 2);
    assert_eq!(m[1].matched_text, "used another dataset");
}

#[test]
fn corpus_counts_include_zero_articles() {
    let set = compile_patterns(&default_patterns()).unwrap();
    let docs = vec![
        load_plaintext("b", b"Our code is available on request.").unwrap(),
        load_plaintext("a", b"Nothing to see here.").unwrap(),
    ];
    let out = mine_corpus(&docs, "v", &set);
    assert_eq!(out.counts.get("a"), Some(&0));
    assert_eq!(out.counts.get("b"), Some(&1));
    assert_eq!(out, mine_corpus(&docs, "v", &set));
    assert_eq!(matches_to_csv(&out.matches), matches_to_csv(&mine_corpus(&docs, "v", &set).matches));
}

#[test]
fn csv_quoting_survives() {
    let context = "He said, \"the code is available\"\nand left";
    let start = context.find("code").unwrap();
    let end = context.find("available").unwrap() + "available".len();
    let rec = MatchRecord {
        match_id: "x".into(),
        article_id: "a".into(),
        venue_id: "v".into(),
        paragraph_index: 3,
        pattern_id: "code-available".into(),
        start,
        end,
        matched_text: context[start..end].into(),
        context: context.into(),
    };
    let csv = matches_to_csv(std::slice::from_ref(&rec));
    assert_eq!(matches_from_csv(&csv, "t.csv".as_ref()).unwrap(), vec![rec]);
}

fn doc_from(texts: Vec<String>) -> ExtractedDocument {
    let mut doc = load_plaintext("art", b"").unwrap();
    for (i, t) in texts.into_iter().enumerate() {
        let char_len = t.chars().count();
        doc.paragraphs.push(Paragraph { index: i, page: 1, text: t, char_len });
    }
    doc
}

fn vocab_text() -> impl Strategy<Value = String> {
    let word = prop_oneof![
        Just("used"), Just("dataset"), Just("datasets"), Just("code"), Just("available"),
        Just("open"), Just("source"), Just("open-source"), Just("the"), Just("a"),
        Just("Used"), Just("CODE"), Just("unused"), Just("x1"), Just("é"),
    ];
    let sep = prop_oneof![Just(" "), Just(", "), Just("-"), Just("  "), Just(". "), Just("")];
    proptest::collection::vec((word, sep), 0..25)
        .prop_map(|v| v.into_iter().map(|(w, s)| format!("{w}{s}")).collect())
}

fn any_record() -> impl Strategy<Value = MatchRecord> {
    ("[a-f0-9]{16}", "[a-z-]{1,10}", 0usize..50, "\\PC{1,40}", any::<u16>()).prop_map(
        |(article_id, venue_id, paragraph_index, context, cut)| {
            let bounds: Vec<usize> = context.char_indices().map(|(i, _)| i).chain([context.len()]).collect();
            let a = bounds[cut as usize % (bounds.len() - 1)];
            let b = bounds[bounds.iter().position(|&x| x == a).unwrap() + 1];
            MatchRecord {
                match_id: audit_core::mine::match_id(&article_id, paragraph_index, "p", a),
                article_id,
                venue_id,
                paragraph_index,
                pattern_id: "p".into(),
                start: a,
                end: b,
                matched_text: context[a..b].to_string(),
                context,
            }
        },
    )
}

fn all_specs() -> Vec<PatternSpec> {
    vec![spec("u", USED_DATASET), spec("o", OPEN_SOURCE), spec("c", CODE_AVAILABLE)]
}

/// Compiled once: the full set, each single pattern, and each leave-one-out subset.
static SETS: LazyLock<(PatternSet, Vec<PatternSet>, Vec<PatternSet>)> = LazyLock::new(|| {
    let all = all_specs();
    let singles = all.iter().map(|s| compile_patterns(std::slice::from_ref(s)).unwrap()).collect();
    let dropped = (0..all.len())
        .map(|i| {
            let mut subset = all.clone();
            subset[i].enabled = false;
            compile_patterns(&subset).unwrap()
        })
        .collect();
    (compile_patterns(&all).unwrap(), singles, dropped)
});

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn spans_and_presence_agree_with_reference(text in vocab_text()) {
        for (set, pattern) in SETS.1.iter().zip([USED_DATASET, OPEN_SOURCE, CODE_AVAILABLE]) {
            let doc = doc_from(vec![text.clone()]);
            let doc = if text.trim().is_empty() { load_plaintext("art", b"").unwrap() } else { doc };
            let found = mine_document(&doc, "v", set);
            let oracle = Backtrack::new(pattern).unwrap();
            let expected = if text.trim().is_empty() { vec![] } else { oracle.find_all(&text) };
            let got: Vec<(usize, usize)> = found.iter().map(|m| (m.start, m.end)).collect();
            prop_assert_eq!(got, expected, "{} on {:?}", pattern, text);
            for m in &found {
                prop_assert_eq!(&m.context[m.start..m.end], m.matched_text.as_str());
            }
        }
    }

    #[test]
    fn adding_patterns_is_monotone(texts in proptest::collection::vec(vocab_text(), 1..5)) {
        let texts: Vec<String> = texts.into_iter().filter(|t| !t.trim().is_empty()).collect();
        let doc = doc_from(texts);
        let all = all_specs();
        let full = mine_document(&doc, "v", &SETS.0);
        for (dropped, set) in all.iter().zip(&SETS.2) {
            let partial = mine_document(&doc, "v", set);
            let expected: Vec<MatchRecord> = full.iter().filter(|m| m.pattern_id != dropped.pattern_id).cloned().collect();
            prop_assert_eq!(partial, expected);
        }
    }

    #[test]
    fn export_import_identity(records in proptest::collection::vec(any_record(), 100..=100)) {
        let csv = matches_to_csv(&records);
        prop_assert_eq!(matches_from_csv(&csv, "m.csv".as_ref()).unwrap(), records);
    }
}
