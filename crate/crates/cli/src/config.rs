//! Experiment configuration: one JSON document per run.

use std::path::{Path, PathBuf};

use liegroup_index::dual::Cutoff;
use liegroup_index::group::GroupSpec;
use liegroup_index::operator::OperatorSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::json::canonical;
use crate::CliError;

/// SU(3) rules have `level^8` nodes.
pub const SU3_MAX_LEVEL: usize = 8;

fn default_rel_tol() -> f64 {
    1e-10
}

fn default_gammas() -> Vec<f64> {
    vec![1.0]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub group: GroupSpec,
    pub operator: OperatorSpec,
    pub cutoffs: Vec<Cutoff>,
    #[serde(default = "default_gammas")]
    pub gammas: Vec<f64>,
    #[serde(default)]
    pub quadrature_level: Option<usize>,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default)]
    pub order_reduce: bool,
    /// Relative paths are taken from the directory holding the config file.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

/// The fields that determine the numbers in a report. Paths are left out so
/// the same experiment hashes the same wherever it writes.
#[derive(Serialize)]
struct Identity<'a> {
    group: &'a GroupSpec,
    operator: &'a OperatorSpec,
    cutoffs: &'a [Cutoff],
    gammas: &'a [f64],
    quadrature_level: Option<usize>,
    rel_tol: f64,
    order_reduce: bool,
}

/// 1-based line of the first `"key":` in `text`.
fn line_of(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    let mut from = 0;
    while let Some(pos) = text[from..].find(&needle) {
        let at = from + pos;
        let rest = text[at + needle.len()..].trim_start();
        if rest.starts_with(':') {
            return Some(text[..at].matches('\n').count() + 1);
        }
        from = at + needle.len();
    }
    None
}

fn field_error(text: &str, field: &str, message: impl Into<String>) -> CliError {
    let key = field.split(['.', '[']).next().unwrap_or(field);
    CliError::Config { line: line_of(text, key), column: None, field: field.to_string(), message: message.into() }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::Config {
            line: Some(e.line()),
            column: Some(e.column()),
            field: "<document>".into(),
            message: e.to_string(),
        })?;
        cfg.validate(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, PathBuf), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let cfg = ExperimentConfig::parse(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    fn validate(&self, text: &str) -> Result<(), CliError> {
        self.group.validate().map_err(|e| field_error(text, "group", e.to_string()))?;
        self.operator
            .validate(self.group)
            .map_err(|e| field_error(text, "operator", e.to_string()))?;
        if self.cutoffs.is_empty() {
            return Err(field_error(text, "cutoffs", "at least one cutoff is required"));
        }
        for (i, c) in self.cutoffs.iter().enumerate() {
            c.validate().map_err(|e| field_error(text, &format!("cutoffs[{i}]"), e.to_string()))?;
        }
        for (i, w) in self.cutoffs.windows(2).enumerate() {
            if !cutoff_less(&w[0], &w[1]) {
                return Err(field_error(
                    text,
                    &format!("cutoffs[{}]", i + 1),
                    format!("cutoffs must be strictly increasing and of one kind ({} then {})", w[0], w[1]),
                ));
            }
        }
        if self.gammas.is_empty() {
            return Err(field_error(text, "gammas", "at least one gamma is required"));
        }
        for (i, g) in self.gammas.iter().enumerate() {
            if !(g.is_finite() && *g > 0.0) {
                return Err(field_error(text, &format!("gammas[{i}]"), format!("gamma must be positive and finite, got {g}")));
            }
        }
        if !(self.rel_tol.is_finite() && self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(field_error(text, "rel_tol", format!("rel_tol must lie in (0, 1), got {}", self.rel_tol)));
        }
        if let Some(level) = self.quadrature_level {
            if level == 0 {
                return Err(field_error(text, "quadrature_level", "level must be at least 1"));
            }
            if self.group == GroupSpec::Su3 && level > SU3_MAX_LEVEL {
                return Err(field_error(
                    text,
                    "quadrature_level",
                    format!("SU(3) level {level} exceeds the cap {SU3_MAX_LEVEL} (level^8 nodes)"),
                ));
            }
        }
        Ok(())
    }

    pub fn sha256(&self) -> String {
        let id = Identity {
            group: &self.group,
            operator: &self.operator,
            cutoffs: &self.cutoffs,
            gammas: &self.gammas,
            quadrature_level: self.quadrature_level,
            rel_tol: self.rel_tol,
            order_reduce: self.order_reduce,
        };
        let value = serde_json::to_value(id).expect("config serializes");
        hex::encode(Sha256::digest(canonical(&value).as_bytes()))
    }
}

fn cutoff_less(a: &Cutoff, b: &Cutoff) -> bool {
    match (a, b) {
        (Cutoff::Weight(x), Cutoff::Weight(y)) => x < y,
        (Cutoff::Band { band: x }, Cutoff::Band { band: y }) => x < y,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"{
  "group": {"kind": "torus", "n": 1},
  "operator": {"op": "winding", "k": 1},
  "cutoffs": [{"band": 8}, {"band": 16}],
  "gammas": [0.5, 1.0]
}"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::parse(GOOD).unwrap();
        assert_eq!(cfg.rel_tol, 1e-10);
        assert!(!cfg.order_reduce);
        assert_eq!(cfg.cutoffs.len(), 2);
    }

    #[test]
    fn decreasing_cutoffs_name_their_line() {
        let text = GOOD.replace(r#"[{"band": 8}, {"band": 16}]"#, r#"[{"band": 16}, {"band": 8}]"#);
        let err = ExperimentConfig::parse(&text).unwrap_err();
        let CliError::Config { line, field, .. } = err else { panic!("{err}") };
        assert_eq!(line, Some(4));
        assert_eq!(field, "cutoffs[1]");
    }

    #[test]
    fn nonpositive_gamma_is_rejected() {
        let text = GOOD.replace("[0.5, 1.0]", "[0.5, 0.0]");
        assert!(ExperimentConfig::parse(&text).unwrap_err().to_string().contains("gammas[1]"));
    }

    #[test]
    fn su3_level_is_capped() {
        let text = r#"{"group": {"kind": "su3"}, "operator": {"op": "identity"}, "cutoffs": [{"band": 0}], "quadrature_level": 9}"#;
        assert!(ExperimentConfig::parse(text).unwrap_err().to_string().contains("cap"));
    }

    #[test]
    fn hash_ignores_paths() {
        let a = ExperimentConfig::parse(GOOD).unwrap();
        let mut b = a.clone();
        b.output_dir = Some("elsewhere".into());
        assert_eq!(a.sha256(), b.sha256());
    }
}
