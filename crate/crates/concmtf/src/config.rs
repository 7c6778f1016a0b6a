//! JSON run configuration shared by all commands. Every section is
//! optional and unknown keys are rejected.

use std::path::Path;

use anyhow::{bail, Context, Result};
use concmtf_core::corpus::CorpusConfig;
use concmtf_core::synth::PlantedConfig;
use concmtf_core::{ConstraintConfig, FitConfig, ModelKind, Ranks};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Coupled constrained model.
    Concmtf,
    /// Non-negative CP of the tensor alone.
    ParafacNs,
    /// Non-negative Tucker3 of the tensor alone, core L1 bound from
    /// `constraints.core.l1_eps`.
    Tucker3Ns,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Concmtf => "concmtf",
            Method::ParafacNs => "parafac-ns",
            Method::Tucker3Ns => "tucker3-ns",
        }
    }

    pub fn kind(self, configured: ModelKind) -> ModelKind {
        match self {
            Method::Concmtf => configured,
            Method::ParafacNs => ModelKind::Cp,
            Method::Tucker3Ns => ModelKind::Tucker3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub method: Method,
    pub kind: ModelKind,
    pub ranks: Ranks,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { method: Method::Concmtf, kind: ModelKind::Cp, ranks: Ranks::cp(3) }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicsConfig {
    /// Core density magnitude tolerance; relative default when absent.
    pub density_tol: Option<f64>,
}

/// One method in an evaluation sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRun {
    pub name: String,
    pub method: Method,
    /// Replaces the top-level constraints for this run.
    #[serde(default)]
    pub constraints: Option<ConstraintConfig>,
    /// Replaces the top-level fit settings for this run.
    #[serde(default)]
    pub fit: Option<FitConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Planted-instance seeds; run `n` fits with seed `fit.seed + seed`.
    pub seeds: Vec<u64>,
    /// Empty means the configured method plus its unconstrained baseline.
    pub runs: Vec<EvalRun>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { seeds: (0..5).collect(), runs: Vec::new() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: CorpusConfig,
    pub model: ModelConfig,
    pub constraints: ConstraintConfig,
    pub fit: FitConfig,
    pub topics: TopicsConfig,
    pub synth: PlantedConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).context("invalid run config")?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Self::from_json(&text).with_context(|| format!("in {}", p.display()))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.constraints.validate()?;
        self.fit.validate()?;
        self.corpus.buckets.validate()?;
        let Ranks(r1, r2, r3) = self.model.ranks;
        if r1 == 0 || r2 == 0 || r3 == 0 {
            bail!("ranks must be positive, got {:?}", self.model.ranks);
        }
        if self.model.method.kind(self.model.kind) == ModelKind::Cp && !self.model.ranks.is_cubic() {
            bail!("a CP model needs equal ranks, got {:?}", self.model.ranks);
        }
        if let Some(t) = self.topics.density_tol {
            if !(t.is_finite() && t >= 0.0) {
                bail!("density_tol must be finite and >= 0, got {t}");
            }
        }
        for run in &self.eval.runs {
            if let Some(c) = &run.constraints {
                c.validate().with_context(|| format!("eval run {:?}", run.name))?;
            }
            if let Some(f) = &run.fit {
                f.validate().with_context(|| format!("eval run {:?}", run.name))?;
            }
        }
        Ok(())
    }

    /// The runs of an evaluation sweep with defaults filled in.
    pub fn eval_runs(&self) -> Vec<EvalRun> {
        if !self.eval.runs.is_empty() {
            return self.eval.runs.clone();
        }
        let baseline = match self.model.method.kind(self.model.kind) {
            ModelKind::Cp => Method::ParafacNs,
            ModelKind::Tucker3 => Method::Tucker3Ns,
        };
        let mut runs = vec![EvalRun { name: self.model.method.name().into(), method: self.model.method, constraints: None, fit: None }];
        if baseline != self.model.method {
            runs.push(EvalRun {
                name: baseline.name().into(),
                method: baseline,
                constraints: Some(ConstraintConfig::default()),
                fit: None,
            });
        }
        runs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_partial_config() {
        let cfg = RunConfig::from_json(r#"{"model": {"kind": "tucker3", "ranks": [12, 4, 4]}, "constraints": {"a": {"l1_eps": 0.05, "orth_eps": 0.05}}}"#).unwrap();
        assert_eq!(cfg.model.ranks, Ranks(12, 4, 4));
        assert_eq!(cfg.constraints.a.l1_eps, Some(0.05));
        assert!(cfg.constraints.a.nonneg);
        assert_eq!(cfg.fit, FitConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(RunConfig::from_json(r#"{"fit": {"max_iter": 3}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"extra": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"corpus": {"buckets": {"kind": "log", "num_buckets": 9, "edges": []}}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"model": {"method": "nmf"}}"#).is_err());
    }

    #[test]
    fn validation() {
        let mut cfg = RunConfig::default();
        cfg.model.ranks = Ranks(3, 2, 2);
        assert!(cfg.validate().is_err());
        cfg.model.kind = ModelKind::Tucker3;
        cfg.validate().unwrap();
        cfg.fit.max_iters = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn default_eval_pairs_with_baseline() {
        let runs = RunConfig::default().eval_runs();
        assert_eq!(runs.iter().map(|r| r.method).collect::<Vec<_>>(), vec![Method::Concmtf, Method::ParafacNs]);
    }
}
