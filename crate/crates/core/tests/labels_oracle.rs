use std::collections::{BTreeSet, HashMap};

use audit_core::corpus::SampleManifest;
use audit_core::digest::parse_ts;
use audit_core::labels::{
    aggregate_articles, import_csv, read_log, resolve_labels, LabelRecord, LabelStore, LabelValue,
};
use audit_core::report::Counts;
use chrono::{DateTime, Duration, Utc};
use proptest::prelude::*;
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use sha2::{Digest, Sha256};

use LabelValue::{No, Unclear, Yes};

fn base() -> DateTime<Utc> {
    parse_ts("2024-06-01T09:00:00Z").unwrap()
}

fn rec(article: &str, para: usize, d: LabelValue, c: LabelValue, who: &str, secs: i64) -> LabelRecord {
    LabelRecord {
        article_id: article.into(),
        paragraph_index: para,
        public_data: d,
        public_code: c,
        labeler_id: who.into(),
        labeled_at: base() + Duration::seconds(secs),
        note: None,
    }
}

fn targets(pairs: &[(&str, usize)]) -> BTreeSet<(String, usize)> {
    pairs.iter().map(|(a, p)| (a.to_string(), *p)).collect()
}

fn manifest(ids: &[String]) -> SampleManifest {
    SampleManifest {
        venue_id: "v".into(),
        seed: 0,
        requested_k: ids.len(),
        index_digest: String::new(),
        selected: ids.to_vec(),
        created_at: base(),
    }
}

#[test]
fn log_only_grows_by_appending() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("labels").join("v.jsonl");
    let mut store = LabelStore::open(&path, targets(&[("a", 0), ("a", 1), ("b", 2)])).unwrap();
    let mut previous: Vec<u8> = Vec::new();
    for (i, (a, p)) in [("a", 0), ("a", 1), ("b", 2), ("a", 0)].into_iter().enumerate() {
        store.append(rec(a, p, Yes, No, "ann", i as i64)).unwrap();
        let now = std::fs::read(&path).unwrap();
        assert!(now.len() > previous.len());
        assert_eq!(Sha256::digest(&now[..previous.len()]), Sha256::digest(&previous));
        previous = now;
    }
    assert_eq!(read_log(&path).unwrap(), store.records());
    let reopened = LabelStore::open(&path, store.targets().clone()).unwrap();
    assert_eq!(reopened.len(), 4);
}

#[test]
fn rejected_writes_leave_log_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.jsonl");
    let mut store = LabelStore::open(&path, targets(&[("a", 0)])).unwrap();
    store.append(rec("a", 0, No, No, "ann", 10)).unwrap();
    let before = std::fs::read(&path).unwrap();

    let skew = store.append(rec("a", 0, Yes, Yes, "ann", 5)).unwrap_err();
    assert_eq!(skew.code(), "CLOCK_SKEW");
    let unknown = store.append(rec("zz", 0, Yes, Yes, "ann", 20)).unwrap_err();
    assert_eq!(unknown.code(), "UNKNOWN_TARGET");
    let unknown_para = store.append(rec("a", 9, Yes, Yes, "ann", 20)).unwrap_err();
    assert_eq!(unknown_para.code(), "UNKNOWN_TARGET");
    let bad_id = store.append(rec("a", 0, Yes, Yes, "bad id!", 20)).unwrap_err();
    assert_eq!(bad_id.code(), "INVALID_LABEL");

    assert_eq!(std::fs::read(&path).unwrap(), before);
    // Another labeler's earlier clock is fine.
    store.append(rec("a", 0, Yes, No, "bob", 1)).unwrap();
    // Equal timestamps for the same labeler are fine.
    store.append(rec("a", 0, Yes, No, "ann", 10)).unwrap();
}

#[test]
fn clock_skew_survives_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.jsonl");
    let t = targets(&[("a", 0)]);
    LabelStore::open(&path, t.clone()).unwrap().append(rec("a", 0, No, No, "ann", 10)).unwrap();
    let mut store = LabelStore::open(&path, t).unwrap();
    assert_eq!(store.append(rec("a", 0, No, No, "ann", 9)).unwrap_err().code(), "CLOCK_SKEW");
}

#[test]
fn relabel_replaces_earlier_judgment() {
    let records = vec![
        rec("a", 0, Yes, Yes, "ann", 1),
        rec("a", 0, No, No, "ann", 2),
    ];
    let resolved = resolve_labels(&records);
    let r = &resolved[&("a".to_string(), 0)];
    assert_eq!((r.public_data, r.public_code), (No, No));
    assert!(!r.conflict());
    let agg = aggregate_articles(&manifest(&["a".to_string()]), &resolved);
    assert!(!agg[0].data_public && !agg[0].code_public);
}

#[test]
fn precedence_across_labelers() {
    for (x, y, want) in [
        (Yes, No, Yes),
        (No, Yes, Yes),
        (Unclear, No, Unclear),
        (No, Unclear, Unclear),
        (Yes, Unclear, Yes),
        (No, No, No),
    ] {
        let r = resolve_labels(&[rec("a", 0, x, No, "ann", 1), rec("a", 0, y, No, "bob", 1)]);
        let e = &r[&("a".to_string(), 0)];
        assert_eq!(e.public_data, want);
        assert_eq!(e.data_conflict, x != y);
        assert!(!e.code_conflict);
    }
}

/// Independent recount: per paragraph, per labeler, pick the record with
/// the greatest (time, record) tuple; combine by max precedence; fold per
/// article.
fn brute_force(records: &[LabelRecord], ids: &[String]) -> (Counts, HashMap<String, (bool, bool)>) {
    let rank = |v: LabelValue| match v {
        No => 0,
        Unclear => 1,
        Yes => 2,
    };
    let mut flags: HashMap<String, (bool, bool)> = ids.iter().map(|i| (i.clone(), (false, false))).collect();
    let mut keys: Vec<(String, usize)> = records.iter().map(|r| (r.article_id.clone(), r.paragraph_index)).collect();
    keys.sort();
    keys.dedup();
    for (a, p) in keys {
        let mut labelers: Vec<&str> = records
            .iter()
            .filter(|r| r.article_id == a && r.paragraph_index == p)
            .map(|r| r.labeler_id.as_str())
            .collect();
        labelers.sort();
        labelers.dedup();
        let (mut d, mut c) = (0, 0);
        for who in labelers {
            let latest = records
                .iter()
                .filter(|r| r.article_id == a && r.paragraph_index == p && r.labeler_id == who)
                .max_by(|x, y| (x.labeled_at, *x).cmp(&(y.labeled_at, *y)))
                .unwrap();
            d = d.max(rank(latest.public_data));
            c = c.max(rank(latest.public_code));
        }
        if let Some(f) = flags.get_mut(&a) {
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

fn random_log(seed: u64) -> (Vec<String>, Vec<LabelRecord>) {
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let ids: Vec<String> = (0..30).map(|i| format!("{i:016x}")).collect();
    let values = [No, Unclear, Yes];
    let labelers = ["ann", "bob", "cy"];
    let n = (rng.next_u64() % 120) as usize;
    let records = (0..n)
        .map(|_| {
            let r = rng.next_u64();
            rec(
                &ids[(r % 30) as usize],
                ((r >> 8) % 5) as usize,
                values[((r >> 16) % 3) as usize],
                values[((r >> 20) % 3) as usize],
                labelers[((r >> 24) % 3) as usize],
                ((r >> 32) % 40) as i64,
            )
        })
        .collect();
    (ids, records)
}

#[test]
fn thousand_random_logs_match_brute_force() {
    for seed in 0..1000 {
        let (ids, records) = random_log(seed);
        let agg = aggregate_articles(&manifest(&ids), &resolve_labels(&records));
        let counts = Counts::from_availability(&agg);
        let (expected, flags) = brute_force(&records, &ids);
        assert_eq!(counts, expected, "seed {seed}");
        assert_eq!(counts.total(), 30, "partition covers every sampled article");
        for a in &agg {
            assert_eq!((a.data_public, a.code_public), flags[&a.article_id], "seed {seed}");
        }
    }
}

proptest! {
    #[test]
    fn resolution_ignores_log_order(seed in any::<u64>(), shuffle_seed in any::<u64>()) {
        let (_, records) = random_log(seed);
        let mut shuffled = records.clone();
        audit_core::rng::Xoshiro256StarStar::seed_from_u64(shuffle_seed).shuffle(&mut shuffled);
        prop_assert_eq!(resolve_labels(&shuffled), resolve_labels(&records));
    }

    #[test]
    fn unclear_never_counts_as_public(seed in any::<u64>()) {
        let (ids, mut records) = random_log(seed);
        for r in &mut records {
            if r.public_data == Yes { r.public_data = Unclear; }
            if r.public_code == Yes { r.public_code = Unclear; }
        }
        let agg = aggregate_articles(&manifest(&ids), &resolve_labels(&records));
        prop_assert!(agg.iter().all(|a| !a.data_public && !a.code_public));
    }
}

#[test]
fn csv_import_reads_spreadsheet_exports() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("labels.csv");
    std::fs::write(
        &p,
        "match_id,article_id,paragraph_index,public_data,public_code,labeler_id,labeled_at,note\n\
         m1,a,0,yes,no,,,\"shared on, Zenodo\"\n\
         m2,a,0,yes,no,,,\"shared on, Zenodo\"\n\
         m3,a,1,,,,,\n\
         m4,b,2,n,u,bob,2024-06-02T00:00:00Z,\n",
    )
    .unwrap();
    let got = import_csv(&p, "importer", base()).unwrap();
    assert_eq!(got.len(), 2);
    assert_eq!(got[0].labeler_id, "importer");
    assert_eq!(got[0].note.as_deref(), Some("shared on, Zenodo"));
    assert_eq!((got[1].public_data, got[1].public_code), (No, Unclear));
    assert_eq!(got[1].labeled_at, parse_ts("2024-06-02T00:00:00Z").unwrap());

    std::fs::write(&p, "article_id,paragraph_index,public_data,public_code\na,0,perhaps,no\n").unwrap();
    assert!(import_csv(&p, "importer", base()).is_err());
    std::fs::write(&p, "article_id,public_data,public_code\na,yes,no\n").unwrap();
    assert!(import_csv(&p, "importer", base()).is_err());
}
