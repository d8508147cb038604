//! Experiment configuration: one JSON file per experiment, schema-validated
//! before any computation runs.

use anyhow::{bail, Context, Result};
use respike_core::model::Model;
use respike_core::sampler::Rect;
use respike_core::suites::SuiteParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: String,
    pub params: Vec<f64>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            family: "linear".into(),
            params: vec![1.0, -1.0, 1.0],
        }
    }
}

fn default_eps() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4]
}
fn default_beta() -> f64 {
    0.25
}
fn default_seed() -> u64 {
    42
}
fn default_replicas() -> u64 {
    20_000
}
fn default_horizon() -> f64 {
    20.0
}
fn default_t() -> f64 {
    2.0
}
fn default_rectangles() -> Vec<Rect> {
    respike_core::suites::default_rects()
}
fn default_sigmas() -> Vec<f64> {
    vec![0.0, 0.3, 1.0, 3.0]
}
fn default_zs() -> Vec<f64> {
    vec![0.0, 0.5, 1.0]
}
fn default_ab_pairs() -> Vec<(f64, f64)> {
    vec![(0.5, 1.0), (0.25, 0.5)]
}
fn default_min_accepted() -> u64 {
    2_000
}
fn default_max_attempts() -> u64 {
    2_000_000
}
fn default_phi_replicas() -> u64 {
    20_000
}
fn default_quad_tol() -> f64 {
    1e-10
}
fn default_root_tol() -> f64 {
    1e-12
}
fn default_rel_tol() -> f64 {
    0.02
}
fn default_ks_tol() -> f64 {
    0.02
}
fn default_grid_n() -> usize {
    2_000
}
fn default_validate_grid_n() -> usize {
    1_000
}
fn default_out() -> String {
    "runs/default".into()
}

/// Full experiment description. Every field has a default, so `{}` is a
/// valid config. Unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: ModelSpec,
    /// Strictly decreasing ladder of eps values.
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    /// Crossing-threshold exponent, `y_star = 1 - eps^beta`, in (0, 1/2).
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_replicas")]
    pub replicas: u64,
    /// Simulation horizon of `simulate`.
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    /// No-jump conditioning window of the count suites.
    #[serde(default = "default_t")]
    pub t: f64,
    #[serde(default = "default_rectangles")]
    pub rectangles: Vec<Rect>,
    #[serde(default = "default_sigmas")]
    pub sigmas: Vec<f64>,
    #[serde(default = "default_zs")]
    pub zs: Vec<f64>,
    #[serde(default = "default_ab_pairs")]
    pub ab_pairs: Vec<(f64, f64)>,
    #[serde(default = "default_min_accepted")]
    pub min_accepted: u64,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u64,
    #[serde(default = "default_phi_replicas")]
    pub phi_replicas: u64,
    /// Intensity constant for the limit sampler; `null` means `f0`.
    #[serde(default)]
    pub intensity_const: Option<f64>,
    #[serde(default = "default_quad_tol")]
    pub quad_tol: f64,
    #[serde(default = "default_root_tol")]
    pub root_tol: f64,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_ks_tol")]
    pub ks_tol: f64,
    /// Trajectory grid points of `simulate`.
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default = "default_validate_grid_n")]
    pub validate_grid_n: usize,
    #[serde(default = "default_out")]
    pub out: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config is valid")
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .with_context(|| format!("malformed config {}", path.display()))?;
        cfg.validate_ranges()?;
        Ok(cfg)
    }

    /// Numeric-range validation mirroring the library preconditions.
    pub fn validate_ranges(&self) -> Result<()> {
        if self.eps.is_empty() {
            bail!("eps ladder must be nonempty");
        }
        for &e in &self.eps {
            if !(e > 0.0 && e < 1.0) {
                bail!("eps values must lie in (0, 1), got {e}");
            }
        }
        if !self.eps.windows(2).all(|w| w[1] < w[0]) {
            bail!("eps ladder must be strictly decreasing");
        }
        if !(self.beta > 0.0 && self.beta < 0.5) {
            bail!("beta must lie in (0, 1/2), got {}", self.beta);
        }
        if self.horizon < 0.0 || self.t <= 0.0 {
            bail!("horizon must be >= 0 and t > 0");
        }
        for r in &self.rectangles {
            if !(r.s1 <= r.s2 && 0.0 <= r.a && r.a <= r.b && r.b <= 1.0) {
                bail!("bad rectangle ({}, {}] x [{}, {}]", r.s1, r.s2, r.a, r.b);
            }
        }
        for &(a, b) in &self.ab_pairs {
            if !(a > 0.0 && a <= b && b <= 1.0) {
                bail!("bad (a, b) pair ({a}, {b})");
            }
        }
        if self.quad_tol <= 0.0 || self.root_tol <= 0.0 {
            bail!("tolerances must be positive");
        }
        if self.grid_n < 2 || self.validate_grid_n < 2 {
            bail!("grid sizes must be >= 2");
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<Model> {
        Ok(Model::builtin_named(&self.model.family, &self.model.params)?)
    }

    pub fn suite_params(&self) -> Result<SuiteParams> {
        Ok(SuiteParams {
            model: self.build_model()?,
            eps: self.eps.clone(),
            beta: self.beta,
            seed: self.seed,
            replicas: self.replicas,
            t: self.t,
            rects: self.rectangles.clone(),
            sigmas: self.sigmas.clone(),
            zs: self.zs.clone(),
            ab_pairs: self.ab_pairs.clone(),
            min_accepted: self.min_accepted,
            max_attempts: self.max_attempts,
            phi_replicas: self.phi_replicas,
            intensity_const: self.intensity_const,
            quad_tol: self.quad_tol,
            root_tol: self.root_tol,
            rel_tol: self.rel_tol,
            ks_tol: self.ks_tol,
        })
    }

    /// Canonical serialization (fixed field order) and its SHA-256 hash.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serialization is infallible")
    }

    pub fn sha256(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.canonical_json().as_bytes());
        let digest = h.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_defaults() {
        let c = ExperimentConfig::default();
        assert_eq!(c.model.family, "linear");
        assert_eq!(c.eps.len(), 3);
        c.validate_ranges().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        let r: Result<ExperimentConfig, _> = serde_json::from_str(r#"{"epz": [0.1]}"#);
        assert!(r.is_err());
    }

    #[test]
    fn range_checks() {
        let c = ExperimentConfig {
            beta: 0.7,
            ..Default::default()
        };
        assert!(c.validate_ranges().is_err());
        let c = ExperimentConfig {
            eps: vec![1e-3, 1e-2],
            ..Default::default()
        };
        assert!(c.validate_ranges().is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig::default();
        assert_eq!(a.sha256(), b.sha256());
        let b = ExperimentConfig { seed: 43, ..b };
        assert_ne!(a.sha256(), b.sha256());
    }
}
