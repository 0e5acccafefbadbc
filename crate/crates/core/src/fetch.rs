//! Polite PDF downloading into a content-addressed cache.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use url::Url;

use crate::corpus::{CorpusIndex, PageFetcher, SampleManifest};
use crate::digest::{sha256_hex, write_atomic};
use crate::error::{CoreError, Result};
use crate::rng::Xoshiro256StarStar;

pub const DEFAULT_USER_AGENT: &str = concat!(
    "reproducibility-audit/",
    env!("CARGO_PKG_VERSION"),
    " (+https://example.org/reproducibility-audit; polite research crawler)"
);

const PDF_MAGIC: &[u8] = b"%PDF-";
const JITTER: f64 = 0.2;

/// Reserves request slots per host so that consecutive requests to one host
/// start at least `delay` apart, across all threads sharing the throttle.
#[derive(Debug, Default)]
pub struct HostThrottle {
    next_slot: Mutex<HashMap<String, Instant>>,
}

impl HostThrottle {
    pub fn new() -> Self {
        Self::default()
    }

    /// Blocks until this caller's slot for `host` arrives.
    pub fn wait(&self, host: &str, delay: Duration) {
        let slot = {
            let mut map = self.next_slot.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let slot = map.get(host).copied().map_or(now, |t| t.max(now));
            map.insert(host.to_string(), slot + delay);
            slot
        };
        let now = Instant::now();
        if slot > now {
            std::thread::sleep(slot - now);
        }
    }
}

#[derive(Debug)]
pub struct HttpResponse {
    pub status: u16,
    pub content_type: Option<String>,
    pub body: Vec<u8>,
}

#[derive(Debug)]
pub enum HttpError {
    Timeout,
    Transport(String),
}

impl std::fmt::Display for HttpError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HttpError::Timeout => f.write_str("timeout"),
            HttpError::Transport(m) => f.write_str(m),
        }
    }
}

/// GET client for `http`, `https` and `file` URLs. Network requests go
/// through the shared [`HostThrottle`].
pub struct HttpClient {
    agent: ureq::Agent,
    throttle: std::sync::Arc<HostThrottle>,
    delay: Duration,
    max_bytes: u64,
}

impl HttpClient {
    pub fn new(
        user_agent: &str,
        timeout: Duration,
        delay: Duration,
        throttle: std::sync::Arc<HostThrottle>,
    ) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .user_agent(user_agent)
            .http_status_as_error(false)
            .build();
        HttpClient {
            agent: config.into(),
            throttle,
            delay,
            max_bytes: 200 * 1024 * 1024,
        }
    }

    pub fn get(&self, url: &str) -> std::result::Result<HttpResponse, HttpError> {
        let parsed = Url::parse(url).map_err(|e| HttpError::Transport(format!("bad url: {e}")))?;
        if parsed.scheme() == "file" {
            return read_file_url(&parsed);
        }
        self.throttle.wait(&host_key(&parsed), self.delay);
        let mut resp = self.agent.get(url).call().map_err(|e| match e {
            ureq::Error::Timeout(_) => HttpError::Timeout,
            other => HttpError::Transport(other.to_string()),
        })?;
        let status = resp.status().as_u16();
        let content_type = resp
            .headers()
            .get("content-type")
            .and_then(|v| v.to_str().ok())
            .map(str::to_string);
        let body = resp
            .body_mut()
            .with_config()
            .limit(self.max_bytes)
            .read_to_vec()
            .map_err(|e| match e {
                ureq::Error::Timeout(_) => HttpError::Timeout,
                other => HttpError::Transport(other.to_string()),
            })?;
        Ok(HttpResponse {
            status,
            content_type,
            body,
        })
    }
}

impl PageFetcher for HttpClient {
    fn fetch_page(&self, url: &str) -> std::result::Result<String, String> {
        let resp = self.get(url).map_err(|e| e.to_string())?;
        if !(200..300).contains(&resp.status) {
            return Err(format!("HTTP {}", resp.status));
        }
        Ok(String::from_utf8_lossy(&resp.body).into_owned())
    }
}

fn host_key(url: &Url) -> String {
    format!(
        "{}://{}:{}",
        url.scheme(),
        url.host_str().unwrap_or(""),
        url.port_or_known_default().unwrap_or(0)
    )
}

fn read_file_url(url: &Url) -> std::result::Result<HttpResponse, HttpError> {
    let path = url
        .to_file_path()
        .map_err(|_| HttpError::Transport(format!("bad file url {url}")))?;
    match std::fs::read(&path) {
        Ok(body) => {
            let content_type = match path.extension().and_then(|e| e.to_str()) {
                Some("pdf") => Some("application/pdf".to_string()),
                Some("html" | "htm") => Some("text/html".to_string()),
                _ => None,
            };
            Ok(HttpResponse {
                status: 200,
                content_type,
                body,
            })
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(HttpResponse {
            status: 404,
            content_type: None,
            body: Vec::new(),
        }),
        Err(e) => Err(HttpError::Transport(format!("{}: {e}", path.display()))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FetchStatus {
    Fetched,
    Cached,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchResult {
    pub article_id: String,
    pub status: FetchStatus,
    /// Relative to the cache root.
    pub local_path: String,
    pub sha256: Option<String>,
    pub byte_size: Option<u64>,
    pub attempts: u32,
    pub error_detail: Option<String>,
}

#[derive(Debug, Clone)]
pub struct FetchOptions {
    pub max_attempts: u32,
    pub per_host_delay_ms: u64,
    pub timeout_ms: u64,
    /// First retry waits this long; each further retry doubles it.
    pub backoff_ms: u64,
    pub user_agent: String,
}

impl Default for FetchOptions {
    fn default() -> Self {
        FetchOptions {
            max_attempts: 3,
            per_host_delay_ms: 1000,
            timeout_ms: 30_000,
            backoff_ms: 1000,
            user_agent: DEFAULT_USER_AGENT.to_string(),
        }
    }
}

/// `<venue>/<article_id>.pdf`, relative to the cache root.
pub fn cache_rel_path(venue_id: &str, article_id: &str) -> String {
    format!("{venue_id}/{article_id}.pdf")
}

pub fn summary_path(cache_root: &Path, venue_id: &str) -> PathBuf {
    cache_root.join(format!("{venue_id}.fetch.json"))
}

/// Retry delay before attempt `attempt + 1`: `base * 2^(attempt-1)`,
/// scaled by a factor drawn uniformly from [0.8, 1.2].
pub fn backoff_delay(base_ms: u64, attempt: u32, rng: &mut Xoshiro256StarStar) -> Duration {
    let nominal = base_ms as f64 * 2f64.powi(attempt.saturating_sub(1).min(16) as i32);
    let factor = 1.0 - JITTER + 2.0 * JITTER * rng.next_f64();
    Duration::from_secs_f64(nominal * factor / 1000.0)
}

pub fn read_summary(path: &Path) -> Result<Vec<FetchResult>> {
    let bytes = std::fs::read(path).map_err(|e| CoreError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| CoreError::parse(path, e))
}

/// Downloads every selected article into `cache_root`, reusing valid cached
/// files, and writes the summary JSON next to the venue's cache directory.
pub fn fetch_all(
    manifest: &SampleManifest,
    index: &CorpusIndex,
    cache_root: &Path,
    opts: &FetchOptions,
    throttle: std::sync::Arc<HostThrottle>,
) -> Result<Vec<FetchResult>> {
    let venue = &manifest.venue_id;
    let summary = summary_path(cache_root, venue);
    let previous: HashMap<String, FetchResult> = read_summary(&summary)
        .map(|v| v.into_iter().map(|r| (r.article_id.clone(), r)).collect())
        .unwrap_or_default();
    let client = HttpClient::new(
        &opts.user_agent,
        Duration::from_millis(opts.timeout_ms),
        Duration::from_millis(opts.per_host_delay_ms),
        throttle,
    );

    // One worker per host; requests to the same host stay sequential.
    let mut by_host: BTreeMap<String, Vec<(usize, &str)>> = BTreeMap::new();
    let mut results: Vec<Option<FetchResult>> = vec![None; manifest.selected.len()];
    for (pos, id) in manifest.selected.iter().enumerate() {
        match index.get(id) {
            Some(rec) => {
                let host = Url::parse(&rec.pdf_url)
                    .map(|u| host_key(&u))
                    .unwrap_or_default();
                by_host.entry(host).or_default().push((pos, id));
            }
            None => {
                results[pos] = Some(failed(venue, id, 1, "article not in index".into()));
            }
        }
    }
    let slots = Mutex::new(&mut results);
    std::thread::scope(|scope| {
        for jobs in by_host.values() {
            let (client, previous, slots) = (&client, &previous, &slots);
            scope.spawn(move || {
                for &(pos, id) in jobs {
                    let rec = index.get(id).expect("grouped ids exist");
                    let r = fetch_one(client, cache_root, venue, id, &rec.pdf_url, previous.get(id), opts);
                    slots.lock().unwrap_or_else(|e| e.into_inner())[pos] = Some(r);
                }
            });
        }
    });
    let results: Vec<FetchResult> = results.into_iter().map(|r| r.expect("every slot filled")).collect();
    let mut json = serde_json::to_vec_pretty(&results).expect("results serialize");
    json.push(b'\n');
    write_atomic(&summary, &json)?;
    Ok(results)
}

fn failed(venue: &str, id: &str, attempts: u32, detail: String) -> FetchResult {
    FetchResult {
        article_id: id.to_string(),
        status: FetchStatus::Failed,
        local_path: cache_rel_path(venue, id),
        sha256: None,
        byte_size: None,
        attempts,
        error_detail: Some(detail),
    }
}

fn fetch_one(
    client: &HttpClient,
    cache_root: &Path,
    venue: &str,
    id: &str,
    url: &str,
    previous: Option<&FetchResult>,
    opts: &FetchOptions,
) -> FetchResult {
    let rel = cache_rel_path(venue, id);
    let path = cache_root.join(&rel);
    if let Ok(bytes) = std::fs::read(&path) {
        let digest = sha256_hex(&bytes);
        // A recorded digest must match; files placed by hand are accepted on
        // their magic bytes.
        let valid = match previous.and_then(|p| p.sha256.as_deref()) {
            Some(recorded) => recorded == digest,
            None => bytes.starts_with(PDF_MAGIC),
        };
        if valid {
            return FetchResult {
                article_id: id.to_string(),
                status: FetchStatus::Cached,
                local_path: rel,
                sha256: Some(digest),
                byte_size: Some(bytes.len() as u64),
                attempts: 1,
                error_detail: None,
            };
        }
        tracing::warn!(article_id = id, "cached file does not match its digest; refetching");
    }

    let mut rng = Xoshiro256StarStar::seed_from_u64(u64::from_str_radix(&id[..id.len().min(16)], 16).unwrap_or(0));
    let max_attempts = opts.max_attempts.max(1);
    let mut attempt = 0;
    loop {
        attempt += 1;
        let (detail, retryable) = match client.get(url) {
            Ok(resp) if (200..300).contains(&resp.status) => {
                if !resp.body.starts_with(PDF_MAGIC) {
                    let ct = resp.content_type.as_deref().unwrap_or("none");
                    (format!("not a PDF (content-type {ct}, body lacks %PDF- header)"), false)
                } else {
                    if let Err(e) = write_atomic(&path, &resp.body) {
                        return failed(venue, id, attempt, e.to_string());
                    }
                    return FetchResult {
                        article_id: id.to_string(),
                        status: FetchStatus::Fetched,
                        local_path: rel,
                        sha256: Some(sha256_hex(&resp.body)),
                        byte_size: Some(resp.body.len() as u64),
                        attempts: attempt,
                        error_detail: None,
                    };
                }
            }
            Ok(resp) => (
                format!("HTTP {}", resp.status),
                resp.status == 429 || resp.status >= 500,
            ),
            Err(e) => (e.to_string(), true),
        };
        if !retryable || attempt >= max_attempts {
            return failed(venue, id, attempt, detail);
        }
        std::thread::sleep(backoff_delay(opts.backoff_ms, attempt, &mut rng));
    }
}

/// Recomputes the digest of every cached file.
pub fn verify_cache(cache_root: &Path, results: &[FetchResult]) -> Vec<(String, bool)> {
    results
        .iter()
        .map(|r| {
            let ok = match (&r.status, &r.sha256) {
                (FetchStatus::Failed, _) | (_, None) => false,
                (_, Some(expected)) => std::fs::read(cache_root.join(&r.local_path))
                    .map(|b| &sha256_hex(&b) == expected)
                    .unwrap_or(false),
            };
            (r.article_id.clone(), ok)
        })
        .collect()
}
