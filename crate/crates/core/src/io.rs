//! Run configuration and the JSON result envelope shared by the command-line driver.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub subcommand: String,
    /// Subcommand parameters as given on the command line, after defaults.
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub seed: u64,
    /// Override of the subcommand's residual tolerance.
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub profile: String,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidInput(format!("tolerance must be positive, got {t}")));
            }
        }
        if self.profile != "fast" && self.profile != "full" {
            return Err(Error::InvalidInput(format!("unknown profile '{}'", self.profile)));
        }
        Ok(())
    }

    /// `tol` override or the given default.
    pub fn tolerance(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ResidualCheck {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct ResidualSummary {
    pub checks: Vec<ResidualCheck>,
    pub passed: bool,
}

impl ResidualSummary {
    pub fn new() -> Self {
        ResidualSummary { checks: Vec::new(), passed: true }
    }

    /// Records `value ≤ tolerance`; NaN fails.
    pub fn check(&mut self, name: impl Into<String>, value: f64, tolerance: f64) -> &mut Self {
        let passed = value <= tolerance;
        self.passed &= passed;
        self.checks.push(ResidualCheck { name: name.into(), value, tolerance, passed });
        self
    }

    pub fn flag(&mut self, name: impl Into<String>, ok: bool) -> &mut Self {
        self.check(name, if ok { 0.0 } else { 1.0 }, 0.0)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultEnvelope {
    pub schema_version: u32,
    pub toolkit_version: String,
    pub config: RunConfig,
    pub started: String,
    pub finished: String,
    pub payload: serde_json::Value,
    pub residuals: ResidualSummary,
    /// Library operations that produced the payload.
    pub provenance: Vec<String>,
}

impl ResultEnvelope {
    pub fn new(config: RunConfig, payload: serde_json::Value, residuals: ResidualSummary, provenance: Vec<String>) -> Self {
        ResultEnvelope {
            schema_version: SCHEMA_VERSION,
            toolkit_version: TOOLKIT_VERSION.into(),
            config,
            started: String::new(),
            finished: String::new(),
            payload,
            residuals,
            provenance,
        }
    }

    /// Envelope JSON with the timestamps blanked; equal for equal (config, seed).
    pub fn deterministic_json(&self) -> Result<String> {
        let mut e = self.clone();
        e.started.clear();
        e.finished.clear();
        serde_json::to_string_pretty(&e).map_err(|err| Error::Parse(err.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|err| Error::Parse(err.to_string()))
    }
}

/// Writes through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(e.to_string()))?;
    let name = path.file_name().ok_or_else(|| Error::InvalidInput(format!("bad output path {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::Io(e.to_string()))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> RunConfig {
        RunConfig {
            subcommand: "decompose".into(),
            parameters: BTreeMap::from([("freqs".into(), serde_json::json!("3,6"))]),
            seed: 42,
            tol: None,
            out: None,
            format: OutputFormat::Json,
            profile: "fast".into(),
        }
    }

    #[test]
    fn tolerance_must_be_positive() {
        let mut c = config();
        assert!(c.validate().is_ok());
        c.tol = Some(0.0);
        assert!(c.validate().is_err());
        c.tol = Some(f64::NAN);
        assert!(c.validate().is_err());
    }

    #[test]
    fn residual_summary_fails_on_nan() {
        let mut r = ResidualSummary::new();
        r.check("a", 1e-12, 1e-10);
        assert!(r.passed);
        r.check("b", f64::NAN, 1e-10);
        assert!(!r.passed);
    }

    #[test]
    fn timestamps_excluded_from_deterministic_form() {
        let mut a = ResultEnvelope::new(config(), serde_json::json!({"n": [1, 2]}), ResidualSummary::new(), vec!["lattice::decompose_frequency_system".into()]);
        let mut b = a.clone();
        a.started = "2026-01-01T00:00:00Z".into();
        b.started = "2026-06-01T00:00:00Z".into();
        assert_eq!(a.deterministic_json().unwrap(), b.deterministic_json().unwrap());
        assert_ne!(a.to_json().unwrap(), b.to_json().unwrap());
        let back: ResultEnvelope = serde_json::from_str(&a.to_json().unwrap()).unwrap();
        assert_eq!(back.payload, a.payload);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = std::env::temp_dir().join(format!("resalg-io-{}", std::process::id()));
        let p = dir.join("out.json");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
