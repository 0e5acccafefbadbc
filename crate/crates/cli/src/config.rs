//! The TOML run configuration.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use audit_core::corpus::VenueConfig;
use audit_core::fetch::{FetchOptions, DEFAULT_USER_AGENT};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Relative paths resolve against the config file's directory.
    pub workspace_dir: PathBuf,
    /// Pattern file; the built-in set when absent.
    #[serde(default)]
    pub patterns_path: Option<PathBuf>,
    pub sample: SampleConfig,
    #[serde(default)]
    pub fetch: FetchConfig,
    #[serde(default)]
    pub service: ServiceConfig,
    /// Hand-made index CSVs for venues that cannot be scraped, by venue id.
    #[serde(default)]
    pub manual_index: BTreeMap<String, PathBuf>,
    pub venues: Vec<VenueConfig>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub seed: u64,
    pub k: usize,
    /// Overrides each venue's own `year_filter`.
    #[serde(default)]
    pub year_range: Option<(i32, i32)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FetchConfig {
    pub max_attempts: u32,
    pub per_host_delay_ms: u64,
    pub timeout_ms: u64,
    pub backoff_ms: u64,
    pub user_agent: String,
}

impl Default for FetchConfig {
    fn default() -> Self {
        let d = FetchOptions::default();
        FetchConfig {
            max_attempts: d.max_attempts,
            per_host_delay_ms: d.per_host_delay_ms,
            timeout_ms: d.timeout_ms,
            backoff_ms: d.backoff_ms,
            user_agent: DEFAULT_USER_AGENT.to_string(),
        }
    }
}

impl FetchConfig {
    pub fn options(&self) -> FetchOptions {
        FetchOptions {
            max_attempts: self.max_attempts,
            per_host_delay_ms: self.per_host_delay_ms,
            timeout_ms: self.timeout_ms,
            backoff_ms: self.backoff_ms,
            user_agent: self.user_agent.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceConfig {
    pub bind_addr: String,
    pub port: u16,
    pub lease_minutes: i64,
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind_addr: "127.0.0.1".into(),
            port: 8787,
            lease_minutes: 10,
            static_dir: None,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads the file and makes its relative paths absolute.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let abs = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        cfg.workspace_dir = abs(&cfg.workspace_dir);
        cfg.patterns_path = cfg.patterns_path.as_deref().map(abs);
        cfg.service.static_dir = cfg.service.static_dir.as_deref().map(abs);
        for p in cfg.manual_index.values_mut() {
            *p = abs(p);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.venues.is_empty() {
            return Err(CliError::Config("at least one [[venues]] entry is required".into()));
        }
        let mut seen = BTreeSet::new();
        for v in &self.venues {
            v.validate().map_err(|e| CliError::Config(format!("venue {}: {e}", v.venue_id)))?;
            if !seen.insert(v.venue_id.as_str()) {
                return Err(CliError::Config(format!("venue {} is listed twice", v.venue_id)));
            }
        }
        for id in self.manual_index.keys() {
            if !seen.contains(id.as_str()) {
                return Err(CliError::Config(format!("manual_index names unknown venue {id}")));
            }
        }
        if let Some((lo, hi)) = self.sample.year_range {
            if lo > hi {
                return Err(CliError::Config(format!("sample.year_range {lo}..{hi} is decreasing")));
            }
        }
        if self.fetch.max_attempts == 0 {
            return Err(CliError::Config("fetch.max_attempts must be at least 1".into()));
        }
        if self.service.lease_minutes <= 0 {
            return Err(CliError::Config("service.lease_minutes must be positive".into()));
        }
        Ok(())
    }

    /// Venues to process: all, or the one named.
    pub fn venues(&self, only: Option<&str>) -> Result<Vec<&VenueConfig>, CliError> {
        match only {
            None => Ok(self.venues.iter().collect()),
            Some(id) => self
                .venues
                .iter()
                .find(|v| v.venue_id == id)
                .map(|v| vec![v])
                .ok_or_else(|| CliError::Usage(format!("venue {id} is not in the config"))),
        }
    }

    pub fn year_filter(&self, venue: &VenueConfig) -> Option<(i32, i32)> {
        self.sample.year_range.or(venue.year_filter)
    }
}
