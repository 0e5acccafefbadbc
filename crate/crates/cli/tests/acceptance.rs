//! End-to-end acceptance checks. Prints one PASS or FAIL line per criterion
//! and exits nonzero if any fails.

#[allow(dead_code)]
#[path = "../../core/tests/support/backtrack.rs"]
mod backtrack;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use audit_cli::fixture::{FixtureTruth, TRIGGERS};
use audit_core::corpus::SampleManifest;
use audit_core::digest::parse_ts;
use audit_core::labels::{aggregate_articles, resolve_labels, ArticleAvailability, LabelRecord, LabelValue};
use audit_core::mine::{compile_patterns, default_patterns, mine_document, CategoryHint, PatternSpec};
use audit_core::report::{build_venue_report, render_markdown, Counts};
use audit_core::rng::Xoshiro256StarStar;
use audit_extract::writer::{layout_paragraphs, write_pdf, TextEncoding, WriterOptions};
use audit_extract::{decode_stream, extract_document, load_plaintext, parse_filter_chain, ExtractedDocument, Paragraph};
use backtrack::Backtrack;
use serde_json::{json, Value};

const VENUE: &str = "synthetic-phm";
const CONFORMANCE_BUDGET: Duration = Duration::from_secs(1);
const PLANTED_BUDGET: Duration = Duration::from_secs(60);
const FIGURES_BUDGET: Duration = Duration::from_secs(1);
/// Percentages are exact tenths; this only absorbs float representation.
const PCT_TOLERANCE: f64 = 1e-9;
const RANDOM_LOGS: u64 = 1000;
const FLATE_PAYLOADS: u64 = 200;

fn audit(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_audit"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("audit binary runs")
}

fn must(out: std::process::Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Shared fixture workspace for the end-to-end criteria.
struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    truth: FixtureTruth,
}

impl Fixture {
    fn ws(&self, rel: &str) -> PathBuf {
        self.root.join("workspace").join(rel)
    }
}

fn doc_from(texts: &[&str]) -> ExtractedDocument {
    let mut doc = load_plaintext("art", b"").unwrap();
    for (i, t) in texts.iter().enumerate() {
        doc.paragraphs.push(Paragraph { index: i, page: 1, text: t.to_string(), char_len: t.chars().count() });
    }
    doc
}

fn regex_conformance() -> String {
    let started = Instant::now();
    let specs = default_patterns();
    let enabled: Vec<&PatternSpec> = specs.iter().filter(|s| s.enabled).collect();
    assert_eq!(enabled.len(), 3, "three shipped patterns");
    let src = |id: &str| enabled.iter().find(|s| s.pattern_id == id).map(|s| s.regex_source.clone()).unwrap();
    let (ud, os, ca) = (src("used-dataset"), src("open-source"), src("code-available"));

    // (pattern, text, hand-traced match or None)
    let cases: Vec<(&str, &str, Option<&str>)> = vec![
        (&ud, "we used the publicly available benchmark dataset", Some("used the publicly available benchmark dataset")),
        (&ud, "used a new high quality annotated image segmentation dataset", None),
        (&ud, "used one two three four five dataset", Some("used one two three four five dataset")),
        (&ud, "used one two three four five six dataset", None),
        (&ud, "Datasets: We Used The Dataset.", Some("Used The Dataset")),
        (&ud, "the dataset was used", None),
        (&ud, "we used the datasets", None),
        (&ud, "the unused dataset", None),
        (&os, "an open source library", Some("open source")),
        (&os, "an Open-Source library", Some("Open-Source")),
        (&os, "the project was open-sourced", None),
        (&os, "opensource", None),
        (&os, "open  source", None),
        (&ca, "the code is freely available online", Some("code is freely available")),
        (&ca, "available source code", None),
        (&ca, "code a b c d e f g h i available", Some("code a b c d e f g h i available")),
        (&ca, "code a b c d e f g h i j available", None),
        (&ca, "codes available on request", None),
    ];
    for (pattern, text, expected) in &cases {
        let set = compile_patterns(&[PatternSpec {
            pattern_id: "p".into(),
            keyword_label: "p".into(),
            regex_source: pattern.to_string(),
            category_hint: CategoryHint::Either,
            enabled: true,
            extended: false,
        }])
        .unwrap();
        let found = mine_document(&doc_from(&[text]), VENUE, &set);
        let got = found.first().map(|m| m.matched_text.as_str());
        assert_eq!(got, *expected, "{pattern} on {text:?}");
        let reference = Backtrack::new(pattern).unwrap().find_at(text, 0).map(|(s, e)| &text[s..e]);
        assert_eq!(got, reference, "reference engine disagrees on {text:?}");
    }
    let elapsed = started.elapsed();
    assert!(elapsed < CONFORMANCE_BUDGET, "took {elapsed:?}");
    format!("{} cases agree with hand trace and reference engine in {:.0?}", cases.len(), elapsed)
}

fn planted_corpus(slot: &mut Option<Fixture>) -> String {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let started = Instant::now();
    must(audit(&root, &["fixture", "--out", ".", "--articles", "20", "--planted", "7"]));
    must(audit(&root, &["run-all"]));
    let elapsed = started.elapsed();
    let truth: FixtureTruth = serde_json::from_slice(&std::fs::read(root.join("planted.json")).unwrap()).unwrap();
    let fx = Fixture { _dir: dir, root, truth };
    let counts: BTreeMap<String, usize> =
        serde_json::from_slice(&std::fs::read(fx.ws(&format!("matches/{VENUE}.counts.json"))).unwrap()).unwrap();
    assert_eq!((fx.truth.planted.len(), fx.truth.control.len()), (7, 13));
    assert_eq!(counts.len(), 20, "every sampled article has a count");
    let hits: BTreeSet<&String> = counts.iter().filter(|(_, &c)| c > 0).map(|(k, _)| k).collect();
    let planted: BTreeSet<&String> = fx.truth.planted.iter().collect();
    let missed = planted.difference(&hits).count();
    let false_pos = hits.difference(&planted).count();
    assert_eq!((missed, false_pos), (0, 0), "missed {missed}, false positives {false_pos}");
    assert!(elapsed < PLANTED_BUDGET, "took {elapsed:?}");
    *slot = Some(fx);
    format!("7/7 planted found, 0 of 13 controls hit, {:.1?}", elapsed)
}

fn availability(both: u64, data_only: u64, code_only: u64, neither: u64) -> Vec<ArticleAvailability> {
    let mut out = Vec::new();
    for (n, d, c) in [(both, true, true), (data_only, true, false), (code_only, false, true), (neither, false, false)] {
        for _ in 0..n {
            out.push(ArticleAvailability {
                article_id: format!("{:016x}", out.len()),
                data_public: d,
                code_public: c,
                labeled_paragraphs: usize::from(d || c),
                unclear_present: false,
            });
        }
    }
    out
}

fn report_figures() -> String {
    let started = Instant::now();
    let items = availability(1, 25, 5, 119);
    let r = build_venue_report(&items, VENUE, parse_ts("2024-01-01T00:00:00Z").unwrap(), "d").unwrap();
    assert_eq!(r.n_sampled, 150);
    assert_eq!(r.counts.both + r.counts.code_only, 6);
    assert_eq!(r.counts.both + r.counts.data_only + r.counts.code_only, 31);
    assert_eq!(r.display.pct_code, "4%");
    assert_eq!(r.display.pct_any, "21%");
    assert_eq!(r.display.both, "<1%");
    assert!((r.pct.both - 0.7).abs() < PCT_TOLERANCE, "both {}", r.pct.both);
    assert!((r.pct_code - 4.0).abs() < PCT_TOLERANCE);
    assert!((r.pct_any - 20.7).abs() < PCT_TOLERANCE);
    let md = render_markdown(std::slice::from_ref(&r));
    for s in ["4%", "21%", "<1%"] {
        assert!(md.contains(s), "markdown lacks {s}");
    }
    let elapsed = started.elapsed();
    assert!(elapsed < FIGURES_BUDGET);
    format!("n=150: code {}, any {}, both {} ({}%)", r.display.pct_code, r.display.pct_any, r.display.both, r.pct.both)
}

fn determinism(fx: &Fixture) -> String {
    let rels = [
        format!("sample/{VENUE}.json"),
        format!("text/{VENUE}.jsonl"),
        format!("matches/{VENUE}.csv"),
        format!("matches/{VENUE}.counts.json"),
        "report/report.json".to_string(),
        "report/report.md".to_string(),
        format!("report/{VENUE}.svg"),
    ];
    let snapshot = || rels.iter().map(|r| std::fs::read(fx.ws(r)).unwrap()).collect::<Vec<_>>();
    let first = snapshot();
    // Cross a second boundary so any wall-clock leak would show.
    std::thread::sleep(Duration::from_millis(1100));
    must(audit(&fx.root, &["run-all"]));
    let second = snapshot();
    for (rel, (a, b)) in rels.iter().zip(first.iter().zip(&second)) {
        assert!(a == b, "{rel} differs between runs");
    }
    format!("{} artifacts byte-identical across two runs", rels.len())
}

/// Independent recount used as the oracle.
fn brute_force(records: &[LabelRecord], ids: &[String]) -> (Counts, BTreeMap<String, (bool, bool)>) {
    let rank = |v: LabelValue| match v {
        LabelValue::No => 0,
        LabelValue::Unclear => 1,
        LabelValue::Yes => 2,
    };
    let mut flags: BTreeMap<String, (bool, bool)> = ids.iter().map(|i| (i.clone(), (false, false))).collect();
    let mut by_key: BTreeMap<(&str, usize, &str), Vec<&LabelRecord>> = BTreeMap::new();
    for r in records {
        by_key.entry((&r.article_id, r.paragraph_index, &r.labeler_id)).or_default().push(r);
    }
    let mut per_para: BTreeMap<(&str, usize), (u8, u8)> = BTreeMap::new();
    for ((a, p, _), rs) in by_key {
        let mut best = rs[0];
        for r in &rs[1..] {
            if (r.labeled_at, *r) > (best.labeled_at, best) {
                best = r;
            }
        }
        let e = per_para.entry((a, p)).or_insert((0, 0));
        e.0 = e.0.max(rank(best.public_data));
        e.1 = e.1.max(rank(best.public_code));
    }
    for ((a, _), (d, c)) in per_para {
        if let Some(f) = flags.get_mut(a) {
            f.0 |= d == 2;
            f.1 |= c == 2;
        }
    }
    let mut counts = Counts::default();
    for (d, c) in flags.values() {
        match (d, c) {
            (true, true) => counts.both += 1,
            (true, false) => counts.data_only += 1,
            (false, true) => counts.code_only += 1,
            (false, false) => counts.neither += 1,
        }
    }
    (counts, flags)
}

fn oracle_equivalence() -> String {
    let base = parse_ts("2024-06-01T09:00:00Z").unwrap();
    let values = [LabelValue::No, LabelValue::Unclear, LabelValue::Yes];
    let labelers = ["ann", "bob", "cy"];
    let ids: Vec<String> = (0..30).map(|i| format!("{i:016x}")).collect();
    let manifest = SampleManifest {
        venue_id: VENUE.into(),
        seed: 0,
        requested_k: 30,
        index_digest: String::new(),
        selected: ids.clone(),
        created_at: base,
    };
    let mut total_records = 0;
    for trial in 0..RANDOM_LOGS {
        let mut rng = Xoshiro256StarStar::seed_from_u64(trial);
        let n = rng.below(150) as usize;
        let records: Vec<LabelRecord> = (0..n)
            .map(|_| LabelRecord {
                article_id: ids[rng.below(30) as usize].clone(),
                paragraph_index: rng.below(5) as usize,
                public_data: values[rng.below(3) as usize],
                public_code: values[rng.below(3) as usize],
                labeler_id: labelers[rng.below(3) as usize].into(),
                labeled_at: base + chrono::Duration::seconds(rng.below(40) as i64),
                note: None,
            })
            .collect();
        total_records += records.len();
        let agg = aggregate_articles(&manifest, &resolve_labels(&records));
        let counts = Counts::from_availability(&agg);
        let (expected, flags) = brute_force(&records, &ids);
        assert_eq!(counts, expected, "trial {trial}");
        assert_eq!(counts.both + counts.data_only + counts.code_only + counts.neither, 30, "trial {trial}");
        for a in &agg {
            assert_eq!((a.data_public, a.code_public), flags[&a.article_id], "trial {trial}");
        }
    }
    format!("{RANDOM_LOGS} logs ({total_records} records) agree; partition sums to n on every trial")
}

fn extractor() -> String {
    let chain = parse_filter_chain(&["FlateDecode"]).unwrap();
    let mut rng = Xoshiro256StarStar::seed_from_u64(0xF1A7E);
    for i in 0..FLATE_PAYLOADS {
        let len = rng.below(20_000) as usize;
        let alphabet = if i % 2 == 0 { 256 } else { 3 };
        let data: Vec<u8> = (0..len).map(|_| rng.below(alphabet) as u8).collect();
        let level = (i % 10) as u32;
        let mut enc = flate2::write::ZlibEncoder::new(Vec::new(), flate2::Compression::new(level));
        enc.write_all(&data).unwrap();
        let packed = enc.finish().unwrap();
        assert_eq!(decode_stream(&packed, &chain).unwrap(), data, "payload {i}");
    }

    let mut generated = 0;
    let encodings = [TextEncoding::WinAnsi, TextEncoding::WinAnsiTjArray, TextEncoding::IdentityToUnicode];
    for compress in [false, true] {
        for xref_stream in [false, true] {
            for encoding in encodings {
                let paragraphs: Vec<String> = TRIGGERS
                    .iter()
                    .map(|t| format!("Measurements were taken at regular intervals during the test. {t} The results follow."))
                    .collect();
                let opts = WriterOptions { compress, xref_stream, encoding, encrypt: false };
                let doc = extract_document("a", &write_pdf(&layout_paragraphs(&paragraphs, 70), &opts)).unwrap();
                for t in TRIGGERS {
                    assert!(doc.paragraphs.iter().any(|p| p.text.contains(t)), "{t:?} lost with {opts:?}");
                }
                generated += 1;
            }
        }
    }

    let pdf = write_pdf(
        &layout_paragraphs(&[TRIGGERS[0].to_string()], 70),
        &WriterOptions { compress: true, xref_stream: false, encoding: TextEncoding::WinAnsi, encrypt: true },
    );
    let err = extract_document("e", &pdf).unwrap_err();
    assert_eq!(err.code(), "ENCRYPTED_UNSUPPORTED");
    format!("{FLATE_PAYLOADS} flate payloads round-trip; planted text survives {generated} writer configurations; encrypted input rejected")
}

fn planted_fixture_pdfs_conserve_text(fx: &Fixture) {
    for entry in std::fs::read_dir(fx.ws(&format!("pdfs/{VENUE}"))).unwrap() {
        let path = entry.unwrap().path();
        let id = path.file_stem().unwrap().to_string_lossy().into_owned();
        let doc = extract_document(&id, &std::fs::read(&path).unwrap()).unwrap();
        let carries = TRIGGERS.iter().any(|t| doc.paragraphs.iter().any(|p| p.text.contains(t)));
        assert_eq!(carries, fx.truth.planted.contains(&id), "{id}");
    }
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(5)))
        .build()
        .into()
}

fn get(base: &str, path: &str) -> Result<(u16, String), ureq::Error> {
    let mut resp = agent().get(&format!("{base}{path}")).call()?;
    Ok((resp.status().as_u16(), resp.body_mut().read_to_string().unwrap_or_default()))
}

fn service_without_ui(fx: &Fixture) -> String {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let bind = format!("127.0.0.1:{port}");
    let _server = Server(
        Command::new(env!("CARGO_BIN_EXE_audit"))
            .current_dir(&fx.root)
            .args(["serve", "--bind", &bind])
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .unwrap(),
    );
    let base = format!("http://{bind}");
    let deadline = Instant::now() + Duration::from_secs(10);
    let (status, page) = loop {
        match get(&base, "/") {
            Ok(r) => break r,
            Err(_) if Instant::now() < deadline => std::thread::sleep(Duration::from_millis(50)),
            Err(e) => panic!("service did not start: {e}"),
        }
    };
    assert_eq!(status, 200);
    assert!(page.contains("<html"), "embedded page served");

    let (status, body) = get(&base, "/api/tasks/next?labeler=acceptance").unwrap();
    assert_eq!(status, 200, "{body}");
    let task: Value = serde_json::from_str(&body).unwrap();
    let context = task["context"].as_str().unwrap();
    for h in task["highlights"].as_array().unwrap() {
        let (s, e) = (h["start"].as_u64().unwrap() as usize, h["end"].as_u64().unwrap() as usize);
        assert!(TRIGGERS.iter().any(|t| t.to_lowercase().contains(&context[s..e].to_lowercase())));
    }
    let label = json!({
        "article_id": task["article_id"],
        "paragraph_index": task["paragraph_index"],
        "public_data": "yes",
        "public_code": "no",
        "labeler": "acceptance",
    });
    let mut resp = agent()
        .post(&format!("{base}/api/labels"))
        .header("content-type", "application/json")
        .send(label.to_string())
        .unwrap();
    assert_eq!(resp.status().as_u16(), 201, "{}", resp.body_mut().read_to_string().unwrap_or_default());
    let (_, progress) = get(&base, "/api/progress").unwrap();
    let progress: Value = serde_json::from_str(&progress).unwrap();
    assert_eq!(progress["labeled"], 1);
    assert_eq!(progress["total"], 7);
    let log = std::fs::read_to_string(fx.ws(&format!("labels/{VENUE}.jsonl"))).unwrap();
    assert_eq!(log.lines().count(), 1);
    format!("scripted client: page, task, label (201), progress labeled=1 of {}", progress["total"])
}

fn main() {
    std::panic::set_hook(Box::new(|info| eprintln!("  {info}")));
    let mut failures = 0;
    let mut report = |name: &str, outcome: std::thread::Result<String>| match outcome {
        Ok(detail) => println!("PASS  {name}: {detail}"),
        Err(e) => {
            failures += 1;
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            println!("FAIL  {name}: {msg}");
        }
    };

    let mut fixture: Option<Fixture> = None;
    report("regex conformance", catch_unwind(regex_conformance));
    report("planted corpus end to end", catch_unwind(AssertUnwindSafe(|| planted_corpus(&mut fixture))));
    report("report figures", catch_unwind(report_figures));
    let needs = |f: &dyn Fn(&Fixture) -> String| -> std::thread::Result<String> {
        match &fixture {
            Some(fx) => catch_unwind(AssertUnwindSafe(|| f(fx))),
            None => Err(Box::new("fixture workspace unavailable".to_string())),
        }
    };
    report("determinism", needs(&determinism));
    report("aggregation oracle equivalence", catch_unwind(oracle_equivalence));
    report(
        "pdf extractor",
        catch_unwind(extractor).and_then(|d| {
            needs(&|fx| {
                planted_fixture_pdfs_conserve_text(fx);
                String::new()
            })
            .map(|_| format!("{d}; fixture PDFs conserve planted text"))
        }),
    );
    report("service without built ui", needs(&service_without_ui));

    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
