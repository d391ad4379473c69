//! Versioned JSON configuration of a grid-robustness experiment.
//!
//! Unknown keys are rejected and every error names the offending field path,
//! so a config either means exactly what it says or does not load.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{
    build_grid, degradation_curve, evaluate_grid, standard_variants, DegradationRow, GridOutcome,
    GridRun, GridSpec, Manifest, Variant,
};
use crate::problems::{make_logreg, AbsNoise, AbsProblem, DESK_BATCH};
use crate::sgd::RunOptions;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    /// Synthetic logistic regression scored by test loss.
    Logreg {
        n: usize,
        dim: usize,
        flip: f64,
        /// Dataset seed; run seeds only drive minibatch order.
        seed: u64,
        batch: usize,
        epochs: usize,
    },
    /// `G |x|` on `[-D/2, D/2]` from `x_1 = D/2`, scored by `f`.
    Abs {
        grad_scale: f64,
        diameter: f64,
        noise: AbsNoise,
        steps: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub problem: ProblemConfig,
    pub grid: GridSpec,
    /// Defaults to [`standard_variants`].
    #[serde(default = "standard_variants")]
    pub variants: Vec<Variant>,
    pub seeds: Vec<u64>,
    pub levels: Vec<usize>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_gamma() -> f64 {
    RunOptions::default().gamma
}

fn config_error(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    /// Desk-scale logistic regression: 10^4 samples in 20 dimensions, one
    /// epoch at batch 200, grid `{1, 2.2, 5} x 10^{-3..0}`, three seeds.
    pub fn desk() -> Self {
        Self {
            version: CONFIG_VERSION,
            problem: ProblemConfig::Logreg {
                n: 10_000,
                dim: 20,
                flip: 0.1,
                seed: 0,
                batch: DESK_BATCH,
                epochs: 1,
            },
            grid: GridSpec::new(-3, 0),
            variants: standard_variants(),
            seeds: vec![1, 2, 3],
            levels: vec![1, 2, 3, 4],
            gamma: default_gamma(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_error(&path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks what the type system cannot.
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(config_error(
                "version",
                format!(
                    "unsupported version {} (expected {CONFIG_VERSION})",
                    self.version
                ),
            ));
        }
        let grid = build_grid(&self.grid).map_err(|e| config_error("grid", e.to_string()))?;
        if self.variants.is_empty() {
            return Err(config_error("variants", "at least one variant is required"));
        }
        for (i, v) in self.variants.iter().enumerate() {
            if self.variants[..i].iter().any(|u| u.name == v.name) {
                return Err(config_error(
                    &format!("variants[{i}].name"),
                    format!("duplicate variant `{}`", v.name),
                ));
            }
            if v.name.is_empty() || v.name.contains([',', '\n', '"']) {
                return Err(config_error(
                    &format!("variants[{i}].name"),
                    "names must be non-empty and free of commas, quotes and newlines",
                ));
            }
        }
        if self.seeds.is_empty() {
            return Err(config_error("seeds", "at least one seed is required"));
        }
        if self.levels.is_empty() {
            return Err(config_error("levels", "at least one level is required"));
        }
        if let Some((i, l)) = self
            .levels
            .iter()
            .enumerate()
            .find(|(_, l)| **l == 0 || **l > grid.len())
        {
            return Err(config_error(
                &format!("levels[{i}]"),
                format!("level {l} outside 1..={}", grid.len()),
            ));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(config_error("gamma", "must be finite and non-negative"));
        }
        match &self.problem {
            ProblemConfig::Logreg {
                n,
                dim,
                flip,
                batch,
                epochs,
                ..
            } => {
                if *n == 0 || *dim == 0 {
                    return Err(config_error("problem", "n and dim must be positive"));
                }
                if n.saturating_mul(*dim) > 1 << 28 {
                    return Err(config_error("problem", "n * dim exceeds 2^28"));
                }
                if !(0.0..=1.0).contains(flip) {
                    return Err(config_error("problem.flip", "must lie in [0, 1]"));
                }
                if *batch == 0 || batch > n {
                    return Err(config_error(
                        "problem.batch",
                        format!("must lie in 1..={n}"),
                    ));
                }
                if *epochs == 0 || epochs.saturating_mul(n / batch) > 1 << 24 {
                    return Err(config_error(
                        "problem.epochs",
                        "must be positive and bounded",
                    ));
                }
            }
            ProblemConfig::Abs {
                grad_scale,
                diameter,
                steps,
                ..
            } => {
                for (name, v) in [("grad_scale", grad_scale), ("diameter", diameter)] {
                    if !(*v > 0.0 && v.is_finite()) {
                        return Err(config_error(&format!("problem.{name}"), "must be positive"));
                    }
                }
                if *steps == 0 || *steps > 1 << 24 {
                    return Err(config_error("problem.steps", "must lie in 1..=2^24"));
                }
            }
        }
        Ok(())
    }
}

/// Everything a grid-robustness run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub outcome: GridOutcome,
    pub degradation: Vec<DegradationRow>,
    pub manifest: Manifest,
}

/// Builds the problem, evaluates the grid and aggregates by level.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let grid = build_grid(&cfg.grid)?;
    let options = RunOptions {
        gamma: cfg.gamma,
        ..RunOptions::default()
    };
    let outcome = match &cfg.problem {
        ProblemConfig::Logreg {
            n,
            dim,
            flip,
            seed,
            batch,
            epochs,
        } => {
            let problem = make_logreg(*n, *dim, *flip, *seed)?.with_batch(*batch)?;
            let setup = GridRun {
                steps: (epochs * problem.batches_per_epoch()) as u64,
                x1: vec![0.0; *dim],
                options,
            };
            let metric = |w: &[f64]| problem.test_loss(w);
            evaluate_grid(&problem, &metric, &cfg.variants, &grid, &cfg.seeds, &setup)?
        }
        ProblemConfig::Abs {
            grad_scale,
            diameter,
            noise,
            steps,
        } => {
            let problem = AbsProblem::new(*grad_scale, *diameter, *noise)?;
            let setup = GridRun {
                steps: *steps,
                x1: vec![diameter / 2.0],
                options,
            };
            let g = *grad_scale;
            let metric = move |x: &[f64]| g * x[0].abs();
            evaluate_grid(&problem, &metric, &cfg.variants, &grid, &cfg.seeds, &setup)?
        }
    };
    let degradation = degradation_curve(&outcome, &cfg.levels)?;
    let config = serde_json::to_value(cfg).expect("config serializes");
    let manifest = Manifest::new(&outcome, &cfg.levels, config);
    Ok(ExperimentResult {
        outcome,
        degradation,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_round_trips() {
        let cfg = ExperimentConfig::desk();
        assert_eq!(ExperimentConfig::parse(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn unknown_key_names_its_path() {
        let mut v: serde_json::Value =
            serde_json::from_str(&ExperimentConfig::desk().to_json()).unwrap();
        v["problem"]["batchsize"] = 3.into();
        match ExperimentConfig::parse(&v.to_string()) {
            Err(Error::Config { path, message }) => {
                assert_eq!(path, "problem");
                assert!(message.contains("batchsize"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn type_errors_name_nested_paths() {
        let mut v: serde_json::Value =
            serde_json::from_str(&ExperimentConfig::desk().to_json()).unwrap();
        v["grid"]["decade_lo"] = "low".into();
        match ExperimentConfig::parse(&v.to_string()) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "grid.decade_lo"),
            other => panic!("{other:?}"),
        }
        let mut v: serde_json::Value =
            serde_json::from_str(&ExperimentConfig::desk().to_json()).unwrap();
        v["variants"][1]["schedule"] = "poly:-1".into();
        match ExperimentConfig::parse(&v.to_string()) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "variants[1].schedule"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_errors() {
        let mut cfg = ExperimentConfig::desk();
        cfg.version = 2;
        assert!(matches!(cfg.validate(), Err(Error::Config { path, .. }) if path == "version"));
        let mut cfg = ExperimentConfig::desk();
        cfg.levels = vec![1, 13];
        assert!(matches!(cfg.validate(), Err(Error::Config { path, .. }) if path == "levels[1]"));
    }

    #[test]
    fn deterministic_abs_has_zero_spread() {
        let cfg = ExperimentConfig {
            version: CONFIG_VERSION,
            problem: ProblemConfig::Abs {
                grad_scale: 1.0,
                diameter: 1.0,
                noise: AbsNoise::None,
                steps: 100,
            },
            grid: GridSpec::new(-2, 0),
            variants: standard_variants(),
            seeds: vec![7],
            levels: vec![1, 3],
            gamma: 8.0,
        };
        let r = run_experiment(&cfg).unwrap();
        assert!(r.outcome.cells.iter().all(|c| c.std == 0.0));
        assert_eq!(r.degradation.len(), 2 * cfg.variants.len());
    }
}
