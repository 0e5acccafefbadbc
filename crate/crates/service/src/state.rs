use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use audit_core::labels::{LabelRecord, LabelStore};
use audit_core::mine::MatchRecord;
use audit_core::CoreError;
use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

pub type TaskId = (String, usize);

/// Time source; tests substitute a controllable one.
pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

#[derive(Clone)]
pub struct ServiceOptions {
    pub lease: Duration,
    /// Directory of built UI assets; an embedded page is served when absent.
    pub static_dir: Option<PathBuf>,
    pub clock: Clock,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        ServiceOptions {
            lease: Duration::minutes(10),
            static_dir: None,
            clock: Arc::new(Utc::now),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArticleMeta {
    pub title: String,
    pub venue_id: String,
    pub year: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Highlight {
    pub start: usize,
    pub end: usize,
    pub pattern_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelTask {
    pub task_id: String,
    pub article_id: String,
    pub paragraph_index: usize,
    pub context: String,
    pub highlights: Vec<Highlight>,
    pub article: Option<ArticleMeta>,
    pub lease_expiry: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub total: usize,
    pub labeled: usize,
    pub remaining: usize,
    /// Distinct paragraphs each labeler has judged.
    pub per_labeler: BTreeMap<String, usize>,
}

struct Lease {
    labeler: String,
    expires: DateTime<Utc>,
}

/// Paragraph text and highlights for one task, built once at startup.
struct TaskContent {
    context: String,
    highlights: Vec<Highlight>,
}

#[derive(Debug)]
pub(crate) enum SubmitError {
    Core(CoreError),
    Leased { holder: String },
}

/// Shared service state. Match data is immutable; the lease table and the
/// label store each sit behind their own lock, always taken in that order.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    tasks: BTreeMap<TaskId, TaskContent>,
    matches_by_article: BTreeMap<String, Vec<MatchRecord>>,
    meta: BTreeMap<String, ArticleMeta>,
    leases: Mutex<HashMap<TaskId, Lease>>,
    store: Mutex<LabelStore>,
    opts: ServiceOptions,
}

impl AppState {
    /// `store` should have been opened with the targets of `matches`.
    /// Articles in `meta` without matches are known but have no tasks.
    pub fn new(
        matches: Vec<MatchRecord>,
        meta: BTreeMap<String, ArticleMeta>,
        store: LabelStore,
        opts: ServiceOptions,
    ) -> Self {
        let mut tasks: BTreeMap<TaskId, TaskContent> = BTreeMap::new();
        let mut matches_by_article: BTreeMap<String, Vec<MatchRecord>> = BTreeMap::new();
        for m in matches {
            let t = tasks
                .entry((m.article_id.clone(), m.paragraph_index))
                .or_insert_with(|| TaskContent {
                    context: m.context.clone(),
                    highlights: Vec::new(),
                });
            t.highlights.push(Highlight {
                start: m.start,
                end: m.end,
                pattern_id: m.pattern_id.clone(),
            });
            matches_by_article.entry(m.article_id.clone()).or_default().push(m);
        }
        for t in tasks.values_mut() {
            t.highlights.sort_by(|a, b| (a.start, a.end, &a.pattern_id).cmp(&(b.start, b.end, &b.pattern_id)));
        }
        AppState {
            inner: Arc::new(Inner {
                tasks,
                matches_by_article,
                meta,
                leases: Mutex::new(HashMap::new()),
                store: Mutex::new(store),
                opts,
            }),
        }
    }

    pub fn options(&self) -> &ServiceOptions {
        &self.inner.opts
    }

    fn now(&self) -> DateTime<Utc> {
        (self.inner.opts.clock)()
    }

    fn labeled(store: &LabelStore) -> BTreeSet<(&str, usize)> {
        store
            .records()
            .iter()
            .map(|r| (r.article_id.as_str(), r.paragraph_index))
            .collect()
    }

    fn task_view(&self, id: &TaskId, expiry: Option<DateTime<Utc>>) -> LabelTask {
        let content = &self.inner.tasks[id];
        LabelTask {
            task_id: format!("{}:{}", id.0, id.1),
            article_id: id.0.clone(),
            paragraph_index: id.1,
            context: content.context.clone(),
            highlights: content.highlights.clone(),
            article: self.inner.meta.get(&id.0).cloned(),
            lease_expiry: expiry.map(|e| audit_core::digest::format_ts(&e)),
        }
    }

    /// Leases the first unlabeled task not held by someone else. A labeler
    /// asking again gets their own live lease back, with a fresh expiry.
    pub fn next_task(&self, labeler: &str) -> Option<LabelTask> {
        let now = self.now();
        let mut leases = self.inner.leases.lock().unwrap_or_else(|e| e.into_inner());
        leases.retain(|_, l| l.expires > now);
        let store = self.inner.store.lock().unwrap_or_else(|e| e.into_inner());
        let labeled = Self::labeled(&store);
        let own = leases
            .iter()
            .filter(|(id, l)| l.labeler == labeler && !labeled.contains(&(id.0.as_str(), id.1)))
            .map(|(id, _)| id.clone())
            .min();
        let pick = own.or_else(|| {
            self.inner
                .tasks
                .keys()
                .find(|id| !labeled.contains(&(id.0.as_str(), id.1)) && !leases.contains_key(*id))
                .cloned()
        })?;
        let expires = now + self.inner.opts.lease;
        leases.insert(
            pick.clone(),
            Lease {
                labeler: labeler.to_string(),
                expires,
            },
        );
        Some(self.task_view(&pick, Some(expires)))
    }

    /// Appends one judgment and releases the task's lease.
    pub(crate) fn submit(&self, mut record: LabelRecord) -> Result<LabelRecord, SubmitError> {
        let now = self.now();
        let key: TaskId = (record.article_id.clone(), record.paragraph_index);
        let mut leases = self.inner.leases.lock().unwrap_or_else(|e| e.into_inner());
        let mut store = self.inner.store.lock().unwrap_or_else(|e| e.into_inner());
        if !store.has_target(&key.0, key.1) {
            return Err(SubmitError::Core(CoreError::UnknownTarget {
                article_id: key.0,
                paragraph_index: key.1,
            }));
        }
        if let Some(l) = leases.get(&key) {
            if l.expires > now && l.labeler != record.labeler_id {
                return Err(SubmitError::Leased { holder: l.labeler.clone() });
            }
        }
        // Strictly increasing per labeler, so a resubmission always wins.
        record.labeled_at = match store.last_labeled_at(&record.labeler_id) {
            Some(last) if last >= now => last + Duration::milliseconds(1),
            _ => now,
        };
        store.append(record.clone()).map_err(SubmitError::Core)?;
        leases.remove(&key);
        Ok(record)
    }

    pub fn progress(&self) -> Progress {
        let store = self.inner.store.lock().unwrap_or_else(|e| e.into_inner());
        let labeled = Self::labeled(&store);
        let mut per: BTreeMap<String, BTreeSet<(&str, usize)>> = BTreeMap::new();
        for r in store.records() {
            per.entry(r.labeler_id.clone())
                .or_default()
                .insert((r.article_id.as_str(), r.paragraph_index));
        }
        let total = self.inner.tasks.len();
        Progress {
            total,
            labeled: labeled.len(),
            remaining: total - labeled.len(),
            per_labeler: per.into_iter().map(|(k, v)| (k, v.len())).collect(),
        }
    }

    /// All matches for a known article (possibly none); `None` if unknown.
    pub fn article_matches(&self, article_id: &str) -> Option<Vec<MatchRecord>> {
        match self.inner.matches_by_article.get(article_id) {
            Some(m) => Some(m.clone()),
            None => self.inner.meta.contains_key(article_id).then(Vec::new),
        }
    }
}
