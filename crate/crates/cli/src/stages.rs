//! One function per pipeline stage. Each validates its inputs, writes its
//! outputs and records a stage manifest.

use std::collections::BTreeMap;
use std::sync::Arc;

use audit_core::corpus::{
    build_index, load_index, merge_indexes, sample, save_index, CorpusIndex, SampleManifest,
    VenueConfig,
};
use audit_core::digest::sha256_parts;
use audit_core::fetch::{fetch_all, FetchStatus, HostThrottle, HttpClient};
use audit_core::labels::{
    aggregate_articles, import_csv, read_log, resolve_labels, targets_from_matches, LabelRecord,
    LabelStore,
};
use audit_core::mine::{
    compile_patterns, counts_to_json, default_patterns, import_matches, load_patterns,
    matches_to_csv, mine_corpus, PatternSpec,
};
use audit_core::report::{build_venue_report, render_distribution_chart, render_json, render_markdown, VenueReport};
use audit_extract::{extract_document, load_plaintext, ExtractedDocument, EXTRACTOR_NOTES, EXTRACTOR_VERSION};
use chrono::{DateTime, Utc};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::workspace::{now, StageRecorder, Workspace};

pub struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub ws: &'a Workspace,
    pub seed: Option<u64>,
}

fn load_manifest(ws: &Workspace, venue: &str) -> Result<SampleManifest, CliError> {
    let rel = Workspace::sample(venue);
    let bytes = ws.read(&rel)?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Stage(format!("{rel}: {e}")))
}

pub fn index(ctx: &Ctx, venue: &VenueConfig) -> Result<usize, CliError> {
    let v = venue.venue_id.as_str();
    let mut rec = StageRecorder::start(ctx.ws, "index", Some(v));
    let fresh = match ctx.cfg.manual_index.get(v) {
        Some(path) => {
            rec.external_input(path)?;
            rec.param("source", path.display().to_string());
            let idx = load_index(path)?;
            if idx.venue_id != v && !idx.records.is_empty() {
                return Err(audit_core::CoreError::VenueMismatch(idx.venue_id, v.to_string()).into());
            }
            CorpusIndex::new(v, idx.records)?
        }
        None => {
            rec.param("listing_url_template", &venue.listing_url_template);
            rec.param("page_range", venue.page_range);
            rec.param("entry_rules", &venue.entry_rules);
            rec.param("min_delay_ms", venue.min_delay_ms);
            let client = HttpClient::new(
                &ctx.cfg.fetch.user_agent,
                std::time::Duration::from_millis(ctx.cfg.fetch.timeout_ms),
                std::time::Duration::from_millis(venue.min_delay_ms),
                Arc::new(HostThrottle::new()),
            );
            let built = build_index(venue, &client, now())?;
            for w in built.warnings {
                rec.warn(w);
            }
            built.index
        }
    };
    // Records already indexed keep their original discovery time.
    let rel = Workspace::index(v);
    let merged = if ctx.ws.path(&rel).is_file() {
        merge_indexes(&load_index(&ctx.ws.path(&rel))?, &fresh)?
    } else {
        fresh
    };
    save_index(&merged, &ctx.ws.path(&rel))?;
    rec.output(&rel)?;
    rec.finish()?;
    Ok(merged.records.len())
}

pub fn sample_stage(ctx: &Ctx, venue: &VenueConfig) -> Result<SampleManifest, CliError> {
    let v = venue.venue_id.as_str();
    let index_rel = Workspace::index(v);
    ctx.ws.require("sample", &index_rel, "index", Some(&Workspace::stage_manifest("index", Some(v))))?;
    let mut rec = StageRecorder::start(ctx.ws, "sample", Some(v));
    rec.input(&index_rel)?;
    let index = load_index(&ctx.ws.path(&index_rel))?;
    let seed = ctx.seed.unwrap_or(ctx.cfg.sample.seed);
    let years = ctx.cfg.year_filter(venue);
    rec.param("seed", seed);
    rec.param("k", ctx.cfg.sample.k);
    rec.param("year_filter", years);
    rec.param("method", "uniform without replacement; SplitMix64-seeded xoshiro256** Fisher-Yates");
    let outcome = sample(&index, seed, ctx.cfg.sample.k, years);
    for w in outcome.warnings {
        rec.warn(w);
    }
    if outcome.manifest.selected.len() < ctx.cfg.sample.k {
        rec.warn(format!(
            "only {} eligible articles for k={}",
            outcome.manifest.selected.len(),
            ctx.cfg.sample.k
        ));
    }
    rec.write_output(&Workspace::sample(v), &outcome.manifest.to_json())?;
    rec.finish()?;
    Ok(outcome.manifest)
}

pub struct FetchTally {
    pub fetched: usize,
    pub cached: usize,
    pub failed: usize,
}

pub fn fetch(ctx: &Ctx, venue: &VenueConfig, throttle: Arc<HostThrottle>) -> Result<FetchTally, CliError> {
    let v = venue.venue_id.as_str();
    let (sample_rel, index_rel) = (Workspace::sample(v), Workspace::index(v));
    ctx.ws.require("fetch", &sample_rel, "sample", Some(&Workspace::stage_manifest("sample", Some(v))))?;
    ctx.ws.require("fetch", &index_rel, "index", Some(&Workspace::stage_manifest("index", Some(v))))?;
    let mut rec = StageRecorder::start(ctx.ws, "fetch", Some(v));
    rec.input(&sample_rel)?;
    rec.input(&index_rel)?;
    let manifest = load_manifest(ctx.ws, v)?;
    let index = load_index(&ctx.ws.path(&index_rel))?;
    if let Some(missing) = manifest.selected.iter().find(|id| index.get(id).is_none()) {
        return Err(CliError::Stage(format!("sampled article {missing} is not in {index_rel}")));
    }
    let opts = ctx.cfg.fetch.options();
    rec.param("max_attempts", opts.max_attempts);
    rec.param("per_host_delay_ms", opts.per_host_delay_ms);
    rec.param("timeout_ms", opts.timeout_ms);
    rec.param("backoff_ms", opts.backoff_ms);
    rec.param("user_agent", &opts.user_agent);
    let results = fetch_all(&manifest, &index, &ctx.ws.path(Workspace::pdf_root()), &opts, throttle)?;
    let mut tally = FetchTally { fetched: 0, cached: 0, failed: 0 };
    for r in &results {
        match r.status {
            FetchStatus::Fetched => tally.fetched += 1,
            FetchStatus::Cached => tally.cached += 1,
            FetchStatus::Failed => {
                tally.failed += 1;
                rec.warn(format!(
                    "{}: {}",
                    r.article_id,
                    r.error_detail.as_deref().unwrap_or("failed")
                ));
            }
        }
        if r.status != FetchStatus::Failed {
            rec.output(&format!("{}/{}", Workspace::pdf_root(), r.local_path))?;
        }
    }
    rec.output(&Workspace::fetch_summary(v))?;
    rec.finish()?;
    Ok(tally)
}

/// Reads one article's source: the cached PDF, else a plain-text file
/// placed beside it by hand.
fn extract_one(ws: &Workspace, venue: &str, id: &str) -> (ExtractedDocument, Option<String>) {
    let pdf_rel = format!("{}/{venue}/{id}.pdf", Workspace::pdf_root());
    let txt_rel = format!("{}/{venue}/{id}.txt", Workspace::pdf_root());
    let (rel, result) = if let Ok(bytes) = std::fs::read(ws.path(&pdf_rel)) {
        (pdf_rel, extract_document(id, &bytes))
    } else if let Ok(bytes) = std::fs::read(ws.path(&txt_rel)) {
        (txt_rel, load_plaintext(id, &bytes))
    } else {
        return (
            ExtractedDocument::placeholder(id, "MISSING_SOURCE: no cached PDF or text file".into()),
            None,
        );
    };
    match result {
        Ok(doc) => (doc, Some(rel)),
        Err(e) => (ExtractedDocument::placeholder(id, format!("{}: {e}", e.code())), Some(rel)),
    }
}

pub fn extract(ctx: &Ctx, venue: &VenueConfig) -> Result<Vec<ExtractedDocument>, CliError> {
    let v = venue.venue_id.as_str();
    let sample_rel = Workspace::sample(v);
    ctx.ws.require("extract", &sample_rel, "sample", Some(&Workspace::stage_manifest("sample", Some(v))))?;
    let summary_rel = Workspace::fetch_summary(v);
    ctx.ws.require("extract", &summary_rel, "fetch", Some(&Workspace::stage_manifest("fetch", Some(v))))?;
    let mut rec = StageRecorder::start(ctx.ws, "extract", Some(v));
    rec.input(&sample_rel)?;
    rec.input(&summary_rel)?;
    rec.param("extractor_version", EXTRACTOR_VERSION);
    rec.param("extractor_notes", EXTRACTOR_NOTES);
    let manifest = load_manifest(ctx.ws, v)?;

    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(8);
    let chunk = manifest.selected.len().div_ceil(workers).max(1);
    let ws = ctx.ws;
    let extracted: Vec<(ExtractedDocument, Option<String>)> = std::thread::scope(|s| {
        let handles: Vec<_> = manifest
            .selected
            .chunks(chunk)
            .map(|ids| s.spawn(move || ids.iter().map(|id| extract_one(ws, v, id)).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("extraction worker panicked"))
            .collect()
    });

    let mut out = Vec::with_capacity(extracted.len());
    let mut jsonl = Vec::new();
    for (doc, source) in extracted {
        if let Some(rel) = source {
            rec.input(&rel)?;
        }
        if doc.paragraphs.is_empty() {
            rec.warn(format!("{}: {}", doc.article_id, doc.warnings.join("; ")));
        }
        if let Err(e) = doc.validate() {
            return Err(CliError::Stage(format!("{}: extracted document is inconsistent: {e}", doc.article_id)));
        }
        serde_json::to_writer(&mut jsonl, &doc).expect("document serializes");
        jsonl.push(b'\n');
        out.push(doc);
    }
    rec.write_output(&Workspace::documents(v), &jsonl)?;
    rec.finish()?;
    Ok(out)
}

fn patterns(ctx: &Ctx, rec: &mut StageRecorder) -> Result<Vec<PatternSpec>, CliError> {
    match &ctx.cfg.patterns_path {
        Some(p) => {
            rec.external_input(p)?;
            Ok(load_patterns(p)?)
        }
        None => {
            rec.param("patterns", "built-in");
            Ok(default_patterns())
        }
    }
}

pub fn load_documents(ws: &Workspace, venue: &str) -> Result<Vec<ExtractedDocument>, CliError> {
    let rel = Workspace::documents(venue);
    let bytes = ws.read(&rel)?;
    let text = String::from_utf8(bytes).map_err(|e| CliError::Stage(format!("{rel}: {e}")))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| CliError::Stage(format!("{rel}:{}: {e}", i + 1))))
        .collect()
}

pub fn mine(ctx: &Ctx, venue: &VenueConfig) -> Result<BTreeMap<String, usize>, CliError> {
    let v = venue.venue_id.as_str();
    let docs_rel = Workspace::documents(v);
    ctx.ws.require("mine", &docs_rel, "extract", Some(&Workspace::stage_manifest("extract", Some(v))))?;
    let mut rec = StageRecorder::start(ctx.ws, "mine", Some(v));
    rec.input(&docs_rel)?;
    let specs = patterns(ctx, &mut rec)?;
    let set = compile_patterns(&specs)?;
    rec.param(
        "enabled_patterns",
        specs.iter().filter(|s| s.enabled).map(|s| (&s.pattern_id, &s.regex_source)).collect::<BTreeMap<_, _>>(),
    );
    let docs = load_documents(ctx.ws, v)?;
    let out = mine_corpus(&docs, v, &set);
    rec.write_output(&Workspace::matches(v), &matches_to_csv(&out.matches))?;
    rec.write_output(&Workspace::match_counts(v), &counts_to_json(&out.counts))?;
    rec.finish()?;
    Ok(out.counts)
}

pub fn import_labels(
    ctx: &Ctx,
    venue: &VenueConfig,
    csv: &std::path::Path,
    labeler: &str,
) -> Result<usize, CliError> {
    let v = venue.venue_id.as_str();
    let matches_rel = Workspace::matches(v);
    ctx.ws.require("labels import-csv", &matches_rel, "mine", Some(&Workspace::stage_manifest("mine", Some(v))))?;
    let mut rec = StageRecorder::start(ctx.ws, "labels-import", Some(v));
    rec.input(&matches_rel)?;
    rec.external_input(csv)?;
    rec.param("default_labeler", labeler);
    let targets = targets_from_matches(&import_matches(&ctx.ws.path(&matches_rel))?);
    let mut store = LabelStore::open(&ctx.ws.path(&Workspace::labels(v)), targets)?;
    // A row that repeats the labeler's current judgment adds nothing, so
    // re-importing the same file is a no-op.
    let mut latest: BTreeMap<(String, String, usize), LabelRecord> = BTreeMap::new();
    for r in store.records() {
        let key = (r.labeler_id.clone(), r.article_id.clone(), r.paragraph_index);
        if latest.get(&key).is_none_or(|old| old.labeled_at <= r.labeled_at) {
            latest.insert(key, r.clone());
        }
    }
    let mut added = 0;
    for r in import_csv(csv, labeler, now())? {
        let key = (r.labeler_id.clone(), r.article_id.clone(), r.paragraph_index);
        if latest.get(&key).is_some_and(|old| {
            (old.public_data, old.public_code, &old.note) == (r.public_data, r.public_code, &r.note)
        }) {
            continue;
        }
        latest.insert(key, r.clone());
        store.append(r)?;
        added += 1;
    }
    rec.param("appended", added);
    if !store.is_empty() {
        rec.output(&Workspace::labels(v))?;
    }
    rec.finish()?;
    Ok(added)
}

pub fn report(ctx: &Ctx, venues: &[&VenueConfig]) -> Result<Vec<VenueReport>, CliError> {
    let mut rec = StageRecorder::start(ctx.ws, "report", None);
    let mut reports = Vec::new();
    for venue in venues {
        let v = venue.venue_id.as_str();
        let sample_rel = Workspace::sample(v);
        ctx.ws.require("report", &sample_rel, "sample", Some(&Workspace::stage_manifest("sample", Some(v))))?;
        rec.input(&sample_rel)?;
        let manifest = load_manifest(ctx.ws, v)?;
        let labels_rel = Workspace::labels(v);
        let log_bytes = std::fs::read(ctx.ws.path(&labels_rel)).unwrap_or_default();
        let records = read_log(&ctx.ws.path(&labels_rel))?;
        if records.is_empty() {
            rec.warn(format!("{v}: no labels recorded; every sampled article counts as neither"));
        } else {
            rec.input(&labels_rel)?;
        }
        let availability = aggregate_articles(&manifest, &resolve_labels(&records));
        let generated_at: DateTime<Utc> = records
            .iter()
            .map(|r| r.labeled_at)
            .chain([manifest.created_at])
            .max()
            .expect("nonempty chain");
        let inputs_digest = sha256_parts(&[&manifest.to_json(), &log_bytes]);
        let r = build_venue_report(&availability, v, generated_at, &inputs_digest)?;
        let svg = render_distribution_chart(&r)?;
        rec.write_output(&Workspace::chart(v), svg.as_bytes())?;
        reports.push(r);
    }
    rec.write_output(Workspace::REPORT_JSON, &render_json(&reports))?;
    rec.write_output(Workspace::REPORT_MD, render_markdown(&reports).as_bytes())?;
    rec.finish()?;
    Ok(reports)
}
