//! Workspace layout and the per-stage provenance manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use audit_core::digest::{format_ts, sha256_file, ts_format, write_atomic};
use chrono::{DateTime, SubsecRound, Utc};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const SUBDIRS: [&str; 7] = ["index", "sample", "pdfs", "text", "matches", "labels", "report"];

/// Current time at whole-second precision.
pub fn now() -> DateTime<Utc> {
    Utc::now().trunc_subsecs(0)
}

#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workspace { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn create(&self) -> Result<(), CliError> {
        for d in SUBDIRS {
            let p = self.root.join(d);
            std::fs::create_dir_all(&p)
                .map_err(|e| CliError::Stage(format!("cannot create {}: {e}", p.display())))?;
        }
        Ok(())
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn index(v: &str) -> String {
        format!("index/{v}.csv")
    }
    pub fn sample(v: &str) -> String {
        format!("sample/{v}.json")
    }
    pub fn pdf_root() -> &'static str {
        "pdfs"
    }
    pub fn fetch_summary(v: &str) -> String {
        format!("pdfs/{v}.fetch.json")
    }
    pub fn documents(v: &str) -> String {
        format!("text/{v}.jsonl")
    }
    pub fn matches(v: &str) -> String {
        format!("matches/{v}.csv")
    }
    pub fn match_counts(v: &str) -> String {
        format!("matches/{v}.counts.json")
    }
    pub fn labels(v: &str) -> String {
        format!("labels/{v}.jsonl")
    }
    pub fn chart(v: &str) -> String {
        format!("report/{v}.svg")
    }
    pub const REPORT_JSON: &'static str = "report/report.json";
    pub const REPORT_MD: &'static str = "report/report.md";
    pub const ERROR_FILE: &'static str = "error.json";

    /// Where a stage's manifest lives: one per venue, except the report.
    pub fn stage_manifest(stage: &str, venue: Option<&str>) -> String {
        let dir = match stage {
            "index" => "index",
            "sample" => "sample",
            "fetch" => "pdfs",
            "extract" => "text",
            "mine" => "matches",
            "labels-import" => "labels",
            _ => "report",
        };
        match venue {
            Some(v) => format!("{dir}/{v}.stage.json"),
            None => format!("{dir}/stage.json"),
        }
    }

    pub fn digest(&self, rel: &str) -> Result<String, CliError> {
        Ok(sha256_file(&self.path(rel))?)
    }

    pub fn write(&self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        Ok(write_atomic(&self.path(rel), bytes)?)
    }

    pub fn read(&self, rel: &str) -> Result<Vec<u8>, CliError> {
        std::fs::read(self.path(rel))
            .map_err(|e| CliError::Stage(format!("cannot read {}: {e}", self.path(rel).display())))
    }

    /// Fails with MISSING_INPUT when absent, and with STALE_INPUT when the
    /// producing stage recorded a different digest.
    pub fn require(
        &self,
        stage: &'static str,
        rel: &str,
        producer: &'static str,
        producer_manifest: Option<&str>,
    ) -> Result<(), CliError> {
        let path = self.path(rel);
        if !path.is_file() {
            return Err(CliError::MissingInput { stage, producer, path });
        }
        if let Some(m) = producer_manifest.and_then(|m| self.load_manifest(m)) {
            if let Some(recorded) = m.outputs.get(rel) {
                if *recorded != self.digest(rel)? {
                    return Err(CliError::StaleInput { producer, path });
                }
            }
        } else {
            tracing::warn!(input = rel, "no stage manifest records this input; using it as found");
        }
        Ok(())
    }

    pub fn load_manifest(&self, rel: &str) -> Option<StageManifest> {
        let bytes = std::fs::read(self.path(rel)).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    pub fn write_error(&self, err: &CliError, stage: Option<&str>) {
        let body = serde_json::json!({
            "code": err.code(),
            "message": err.to_string(),
            "stage": stage,
            "exit_code": err.exit_code(),
            "at": format_ts(&now()),
        });
        let mut bytes = serde_json::to_vec_pretty(&body).expect("error serializes");
        bytes.push(b'\n');
        if std::fs::create_dir_all(&self.root).is_ok() {
            let _ = write_atomic(&self.path(Self::ERROR_FILE), &bytes);
        }
    }

    pub fn clear_error(&self) {
        let _ = std::fs::remove_file(self.path(Self::ERROR_FILE));
    }
}

/// Provenance for one stage run. Paths are relative to the workspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageManifest {
    pub stage: String,
    pub tool_version: String,
    pub venue_id: Option<String>,
    pub parameters: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub warnings: Vec<String>,
    #[serde(with = "ts_format")]
    pub started_at: DateTime<Utc>,
    #[serde(with = "ts_format")]
    pub finished_at: DateTime<Utc>,
}

/// Collects a stage's inputs and outputs as it runs.
pub struct StageRecorder<'w> {
    ws: &'w Workspace,
    manifest: StageManifest,
}

impl<'w> StageRecorder<'w> {
    pub fn start(ws: &'w Workspace, stage: &str, venue: Option<&str>) -> Self {
        StageRecorder {
            ws,
            manifest: StageManifest {
                stage: stage.to_string(),
                tool_version: TOOL_VERSION.to_string(),
                venue_id: venue.map(str::to_string),
                parameters: serde_json::Value::Object(Default::default()),
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
                warnings: Vec::new(),
                started_at: now(),
                finished_at: now(),
            },
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        if let serde_json::Value::Object(map) = &mut self.manifest.parameters {
            map.insert(key.to_string(), serde_json::to_value(value).expect("parameter serializes"));
        }
    }

    pub fn input(&mut self, rel: &str) -> Result<(), CliError> {
        let d = self.ws.digest(rel)?;
        self.manifest.inputs.insert(rel.to_string(), d);
        Ok(())
    }

    /// Records a file outside the workspace by absolute path.
    pub fn external_input(&mut self, path: &Path) -> Result<(), CliError> {
        let d = sha256_file(path)?;
        self.manifest.inputs.insert(path.display().to_string(), d);
        Ok(())
    }

    pub fn output(&mut self, rel: &str) -> Result<(), CliError> {
        let d = self.ws.digest(rel)?;
        self.manifest.outputs.insert(rel.to_string(), d);
        Ok(())
    }

    /// Writes `bytes` to `rel` and records it as an output.
    pub fn write_output(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        self.ws.write(rel, bytes)?;
        self.output(rel)
    }

    pub fn warn(&mut self, w: impl Into<String>) {
        let w = w.into();
        tracing::warn!("{w}");
        self.manifest.warnings.push(w);
    }

    pub fn finish(mut self) -> Result<StageManifest, CliError> {
        self.manifest.finished_at = now();
        let rel = Workspace::stage_manifest(&self.manifest.stage, self.manifest.venue_id.as_deref());
        let mut bytes = serde_json::to_vec_pretty(&self.manifest).expect("manifest serializes");
        bytes.push(b'\n');
        self.ws.write(&rel, &bytes)?;
        Ok(self.manifest)
    }
}
