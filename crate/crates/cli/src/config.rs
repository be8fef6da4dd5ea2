//! JSON experiment configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use score_forge_core::dist::GaussianMixture;
use score_forge_core::kernel::MAX_ORDER;
use score_forge_core::metrics::{geometric_grid, MIN_MSE_DRAWS, MIN_TV_NODES, MIN_TV_SAMPLES};
use score_forge_core::sampler::Schedule;

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    TSlope,
    NSlope,
    Integrated,
    EndToEnd,
    KernelCertify,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::TSlope => "t-slope",
            ExperimentKind::NSlope => "n-slope",
            ExperimentKind::Integrated => "integrated",
            ExperimentKind::EndToEnd => "end-to-end",
            ExperimentKind::KernelCertify => "kernel-certify",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub dim: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<f64>,
}

impl MixtureSpec {
    pub fn standard_normal() -> Self {
        Self {
            dim: 1,
            weights: vec![1.0],
            means: vec![vec![0.0]],
            variances: vec![1.0],
        }
    }

    pub fn build(&self) -> Result<GaussianMixture, score_forge_core::Error> {
        GaussianMixture::new(self.dim, self.weights.clone(), self.means.clone(), self.variances.clone())
    }
}

impl Default for MixtureSpec {
    fn default() -> Self {
        Self::standard_normal()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometricSpec {
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometricGrid {
    pub geometric: GeometricSpec,
}

/// Either explicit values or `{"geometric": {"from", "to", "points"}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<f64>),
    Geometric(GeometricGrid),
}

impl GridSpec {
    pub fn values(&self) -> Result<Vec<f64>, String> {
        let v = match self {
            GridSpec::List(v) => v.clone(),
            GridSpec::Geometric(GeometricGrid { geometric: g }) => {
                if g.points == 1 && g.from == g.to && g.from > 0.0 {
                    vec![g.from]
                } else {
                    geometric_grid(g.from, g.to, g.points).map_err(|e| e.to_string())?
                }
            }
        };
        if v.is_empty() {
            return Err("grid is empty".into());
        }
        if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err("grid values must be positive and finite".into());
        }
        if v.windows(2).any(|w| w[1] <= w[0]) {
            return Err("grid must be strictly increasing".into());
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleSpec {
    Uniform,
    Geometric,
}

impl From<ScheduleSpec> for Schedule {
    fn from(s: ScheduleSpec) -> Self {
        match s {
            ScheduleSpec::Uniform => Schedule::Uniform,
            ScheduleSpec::Geometric => Schedule::Geometric,
        }
    }
}

/// Score field driving the end-to-end sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreSpec {
    /// Truncated kernel estimators built from `n` training samples.
    KernelBank,
    /// Closed-form mixture score.
    Oracle,
    /// No sampling; only the early-stopping term is reported.
    None,
}

/// Pass/fail conditions on one result series.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeriesChecks {
    /// Inclusive range for the fitted log-log slope.
    pub slope: Option<[f64; 2]>,
    pub min_r2: Option<f64>,
    /// Upper bound on the `y` of the last cell.
    pub max_last: Option<f64>,
    /// Upper bound on every `y`.
    pub max_all: Option<f64>,
    pub non_increasing: bool,
    pub decreasing: bool,
    /// Inclusive range for `y_first / y_last`.
    pub first_over_last: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub mixture: MixtureSpec,
    #[serde(default)]
    pub n_grid: Option<GridSpec>,
    #[serde(default)]
    pub t_grid: Option<GridSpec>,
    /// Sobolev smoothness used for `t_0` and `T` in end-to-end runs.
    #[serde(default = "defaults::beta")]
    pub beta: f64,
    #[serde(default = "defaults::bandwidth_scale", alias = "C")]
    pub bandwidth_scale: f64,
    #[serde(default = "defaults::mc")]
    pub mc: usize,
    #[serde(default = "defaults::steps")]
    pub steps: usize,
    #[serde(default = "defaults::schedule")]
    pub schedule: ScheduleSpec,
    /// Trajectories per end-to-end cell.
    #[serde(default = "defaults::samples")]
    pub samples: usize,
    #[serde(default = "defaults::score")]
    pub score: ScoreSpec,
    /// Fixed `T` (integrated, end-to-end); end-to-end derives it from `beta` when absent.
    #[serde(default)]
    pub horizon: Option<f64>,
    /// Fixed `t_0` for end-to-end; derived from `beta` when absent.
    #[serde(default)]
    pub early_stop: Option<f64>,
    #[serde(default = "defaults::horizon_cap")]
    pub horizon_cap: f64,
    /// Quadrature points of the integrated experiment.
    #[serde(default = "defaults::grid")]
    pub grid: usize,
    /// Hold `ℓ` and the `ln n` of the bandwidth at the largest `n` of an n-sweep.
    #[serde(default)]
    pub freeze_polylog: bool,
    #[serde(default = "defaults::max_order")]
    pub max_order: usize,
    #[serde(default = "defaults::tv_nodes")]
    pub tv_nodes: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub checks: BTreeMap<String, SeriesChecks>,
}

mod defaults {
    use super::{ScheduleSpec, ScoreSpec};

    pub fn beta() -> f64 {
        2.0
    }
    pub fn bandwidth_scale() -> f64 {
        1.0
    }
    pub fn mc() -> usize {
        5000
    }
    pub fn steps() -> usize {
        100
    }
    pub fn schedule() -> ScheduleSpec {
        ScheduleSpec::Geometric
    }
    pub fn samples() -> usize {
        20_000
    }
    pub fn score() -> ScoreSpec {
        ScoreSpec::KernelBank
    }
    pub fn horizon_cap() -> f64 {
        64.0
    }
    pub fn grid() -> usize {
        40
    }
    pub fn max_order() -> usize {
        16
    }
    pub fn tv_nodes() -> usize {
        2000
    }
}

fn invalid(path: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        path: path.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            mixture: MixtureSpec::default(),
            n_grid: None,
            t_grid: None,
            beta: defaults::beta(),
            bandwidth_scale: defaults::bandwidth_scale(),
            mc: defaults::mc(),
            steps: defaults::steps(),
            schedule: defaults::schedule(),
            samples: defaults::samples(),
            score: defaults::score(),
            horizon: None,
            early_stop: None,
            horizon_cap: defaults::horizon_cap(),
            grid: defaults::grid(),
            freeze_polylog: false,
            max_order: defaults::max_order(),
            tv_nodes: defaults::tv_nodes(),
            seed: 0,
            out_dir: None,
            checks: BTreeMap::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            invalid(if path == "." { "<root>" } else { &path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::ConfigIo {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    /// Sample sizes of `n_grid`, which must be integers of at least 3.
    pub fn n_values(&self) -> Result<Vec<usize>, HarnessError> {
        let grid = self.n_grid.as_ref().ok_or_else(|| invalid("n_grid", "required"))?;
        let raw = grid.values().map_err(|m| invalid("n_grid", m))?;
        let mut out = Vec::with_capacity(raw.len());
        for (i, v) in raw.iter().enumerate() {
            let n = v.round();
            if matches!(grid, GridSpec::List(_)) && n != *v {
                return Err(invalid(&format!("n_grid[{i}]"), "sample sizes must be integers"));
            }
            if n < 3.0 {
                return Err(invalid(&format!("n_grid[{i}]"), "sample sizes must be at least 3"));
            }
            out.push(n as usize);
        }
        if out.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("n_grid", "rounded sample sizes must be strictly increasing"));
        }
        Ok(out)
    }

    pub fn t_values(&self) -> Result<Vec<f64>, HarnessError> {
        let grid = self.t_grid.as_ref().ok_or_else(|| invalid("t_grid", "required"))?;
        grid.values().map_err(|m| invalid("t_grid", m))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let mixture = self.mixture.build().map_err(|e| invalid("mixture", e.to_string()))?;
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(invalid("beta", "must be positive"));
        }
        if !(self.bandwidth_scale.is_finite() && self.bandwidth_scale > 0.0) {
            return Err(invalid("bandwidth_scale", "must be positive"));
        }
        if !(self.horizon_cap.is_finite() && self.horizon_cap > 0.0) {
            return Err(invalid("horizon_cap", "must be positive"));
        }
        if self.tv_nodes < MIN_TV_NODES {
            return Err(invalid("tv_nodes", format!("must be at least {MIN_TV_NODES}")));
        }
        let single = |values: usize, field: &str| {
            if values == 1 {
                Ok(())
            } else {
                Err(invalid(field, "must hold exactly one value for this experiment"))
            }
        };
        let needs_mc = || {
            if self.mc >= MIN_MSE_DRAWS {
                Ok(())
            } else {
                Err(invalid("mc", format!("must be at least {MIN_MSE_DRAWS}")))
            }
        };
        match self.experiment {
            ExperimentKind::TSlope => {
                single(self.n_values()?.len(), "n_grid")?;
                self.t_values()?;
                needs_mc()?;
            }
            ExperimentKind::NSlope => {
                self.n_values()?;
                single(self.t_values()?.len(), "t_grid")?;
                needs_mc()?;
            }
            ExperimentKind::Integrated => {
                single(self.n_values()?.len(), "n_grid")?;
                let t0 = self.t_values()?;
                let horizon = self.horizon.ok_or_else(|| invalid("horizon", "required"))?;
                if !(horizon.is_finite() && horizon > *t0.last().unwrap()) {
                    return Err(invalid("horizon", "must exceed every t_grid value"));
                }
                if self.grid < 2 {
                    return Err(invalid("grid", "must be at least 2"));
                }
                needs_mc()?;
            }
            ExperimentKind::EndToEnd => {
                self.n_values()?;
                if self.steps == 0 {
                    return Err(invalid("steps", "must be at least 1"));
                }
                if let Some(t0) = self.early_stop {
                    if !(t0.is_finite() && t0 > 0.0) {
                        return Err(invalid("early_stop", "must be positive"));
                    }
                }
                if let Some(h) = self.horizon {
                    if !(h.is_finite() && h > self.early_stop.unwrap_or(0.0)) {
                        return Err(invalid("horizon", "must be positive and exceed early_stop"));
                    }
                }
                if self.score != ScoreSpec::None && mixture.dim() == 1 && self.samples < MIN_TV_SAMPLES {
                    return Err(invalid("samples", format!("must be at least {MIN_TV_SAMPLES} for d = 1")));
                }
                if self.score != ScoreSpec::None && self.samples == 0 {
                    return Err(invalid("samples", "must be positive"));
                }
            }
            ExperimentKind::KernelCertify => {
                if !(1..=MAX_ORDER).contains(&self.max_order) {
                    return Err(invalid("max_order", format!("must be in 1..={MAX_ORDER}")));
                }
            }
        }
        for (series, c) in &self.checks {
            if let Some([lo, hi]) = c.slope {
                if !(lo <= hi) {
                    return Err(invalid(&format!("checks.{series}.slope"), "need lo <= hi"));
                }
            }
            if let Some([lo, hi]) = c.first_over_last {
                if !(lo <= hi) {
                    return Err(invalid(&format!("checks.{series}.first_over_last"), "need lo <= hi"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t_slope() -> &'static str {
        r#"{
            "experiment": "t-slope",
            "n_grid": [100000],
            "t_grid": {"geometric": {"from": 0.01, "to": 0.1, "points": 10}},
            "mc": 5000,
            "seed": 7
        }"#
    }

    #[test]
    fn parses_geometric_grids() {
        let cfg = ExperimentConfig::from_json(t_slope()).unwrap();
        let t = cfg.t_values().unwrap();
        assert_eq!(t.len(), 10);
        assert_eq!((t[0], t[9]), (0.01, 0.1));
        assert_eq!(cfg.n_values().unwrap(), vec![100_000]);
        assert_eq!(cfg.bandwidth_scale, 1.0);
    }

    #[test]
    fn accepts_c_alias() {
        let text = t_slope().replace("\"seed\": 7", "\"seed\": 7, \"C\": 2.5");
        assert_eq!(ExperimentConfig::from_json(&text).unwrap().bandwidth_scale, 2.5);
    }

    #[test]
    fn rejects_unknown_fields_with_path() {
        let text = t_slope().replace("\"seed\": 7", "\"seed\": 7, \"sede\": 1");
        let err = ExperimentConfig::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("sede"), "{err}");

        let text = r#"{"experiment": "end-to-end", "n_grid": [1000], "mixture": {"dim": 1, "weights": [1], "means": [[0]], "variances": [1], "extra": 0}}"#;
        let err = ExperimentConfig::from_json(text).unwrap_err();
        assert!(err.to_string().starts_with("mixture"), "{err}");
    }

    #[test]
    fn reports_field_paths() {
        let err = ExperimentConfig::from_json(&t_slope().replace("[100000]", "[1000, 100]")).unwrap_err();
        assert!(err.to_string().starts_with("n_grid"), "{err}");
        let err = ExperimentConfig::from_json(&t_slope().replace("\"mc\": 5000", "\"mc\": 10")).unwrap_err();
        assert!(err.to_string().starts_with("mc"), "{err}");
        let err = ExperimentConfig::from_json(&t_slope().replace("\"mc\": 5000", "\"mc\": -1")).unwrap_err();
        assert!(err.to_string().starts_with("mc"), "{err}");
        let bad_mix = t_slope().replace(
            "\"seed\": 7",
            "\"seed\": 7, \"mixture\": {\"dim\": 1, \"weights\": [0.5], \"means\": [[0]], \"variances\": [1]}",
        );
        let err = ExperimentConfig::from_json(&bad_mix).unwrap_err();
        assert!(err.to_string().starts_with("mixture"), "{err}");
    }

    #[test]
    fn integrated_needs_horizon() {
        let text = r#"{"experiment": "integrated", "n_grid": [4096], "t_grid": [0.01, 0.04]}"#;
        let err = ExperimentConfig::from_json(text).unwrap_err();
        assert!(err.to_string().starts_with("horizon"), "{err}");
    }

    #[test]
    fn grids_must_increase() {
        assert!(GridSpec::List(vec![1.0, 1.0]).values().is_err());
        assert!(GridSpec::List(vec![]).values().is_err());
        assert!(GridSpec::List(vec![0.0, 1.0]).values().is_err());
    }
}
