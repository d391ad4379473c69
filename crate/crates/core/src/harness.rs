//! Grid-search robustness protocol.
//!
//! A geometric learning-rate grid is searched at several resolutions: level
//! `k` splits the full grid into the `k` congruence classes of its indices
//! modulo `k`, each class being a grid `k` times coarser. For every class the
//! best learning rate is selected, and the mean of those bests measures how
//! much a schedule suffers from coarse tuning.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::Schedule;
use crate::sgd::{run_sgd, Problem, RunOptions, SgdRun, StepsizePlan};

/// Mantissas × decades.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_mantissas")]
    pub mantissas: Vec<f64>,
    pub decade_lo: i32,
    pub decade_hi: i32,
}

fn default_mantissas() -> Vec<f64> {
    vec![1.0, 2.2, 5.0]
}

impl GridSpec {
    pub fn new(decade_lo: i32, decade_hi: i32) -> Self {
        Self {
            mantissas: default_mantissas(),
            decade_lo,
            decade_hi,
        }
    }
}

/// Rounds to 12 significant digits so `2.2 * 10^-2` prints as `0.022`.
fn tidy(x: f64) -> f64 {
    format!("{x:.11e}").parse().expect("formatted float parses")
}

/// Sorted values `m * 10^d`.
pub fn build_grid(g: &GridSpec) -> Result<Vec<f64>> {
    if g.decade_lo > g.decade_hi {
        return Err(Error::InvalidArgument(format!(
            "empty decade range {}..={}",
            g.decade_lo, g.decade_hi
        )));
    }
    if g.decade_hi - g.decade_lo > 600 {
        return Err(Error::InvalidArgument("decade range too wide".into()));
    }
    if g.mantissas.is_empty() {
        return Err(Error::InvalidArgument("no mantissas".into()));
    }
    if let Some(m) = g.mantissas.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
        return Err(Error::Domain {
            name: "mantissa",
            value: *m,
            expected: "(0, inf)",
        });
    }
    let mut out: Vec<f64> = (g.decade_lo..=g.decade_hi)
        .flat_map(|d| g.mantissas.iter().map(move |m| tidy(m * 10f64.powi(d))))
        .collect();
    out.sort_by(f64::total_cmp);
    if out.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidArgument("grid values overflow".into()));
    }
    if out.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "grid has repeated values; mantissas must lie in distinct positions within a decade"
                .into(),
        ));
    }
    Ok(out)
}

fn check_level(len: usize, level: usize) -> Result<()> {
    if level == 0 || level > len {
        return Err(Error::InvalidArgument(format!(
            "resolution level {level} outside 1..={len}"
        )));
    }
    Ok(())
}

/// Index classes modulo `level`, each in grid order.
pub fn subgrid_indices(len: usize, level: usize) -> Result<Vec<Vec<usize>>> {
    check_level(len, level)?;
    Ok((0..level)
        .map(|r| (r..len).step_by(level).collect())
        .collect())
}

/// The `level` sub-grids of `full`.
pub fn subgrids(full: &[f64], level: usize) -> Result<Vec<Vec<f64>>> {
    Ok(subgrid_indices(full.len(), level)?
        .into_iter()
        .map(|idx| idx.into_iter().map(|i| full[i]).collect())
        .collect())
}

/// Which iterate of a run is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    Last,
    UniformAverage,
    PolynomialAverage,
}

/// A named (schedule, output) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub name: String,
    pub schedule: Schedule,
    #[serde(default = "default_output")]
    pub output: Output,
}

fn default_output() -> Output {
    Output::Last
}

impl Variant {
    pub fn new(name: &str, schedule: Schedule, output: Output) -> Self {
        Self {
            name: name.into(),
            schedule,
            output,
        }
    }

    fn pick<'a>(&self, run: &'a SgdRun) -> &'a [f64] {
        match self.output {
            Output::Last => &run.last_iterate,
            Output::UniformAverage => &run.uniform_average,
            Output::PolynomialAverage => &run.polynomial_average,
        }
    }
}

/// Cosine and linear decay scored on the last iterate, and a fixed stepsize
/// scored on its last iterate and on both averages.
pub fn standard_variants() -> Vec<Variant> {
    let linear = Schedule::polynomial(1.0).expect("p = 1 is valid");
    vec![
        Variant::new("cosine", Schedule::cosine(), Output::Last),
        Variant::new("linear", linear, Output::Last),
        Variant::new("fixed", Schedule::constant(), Output::Last),
        Variant::new(
            "fixed_uniform_avg",
            Schedule::constant(),
            Output::UniformAverage,
        ),
        Variant::new(
            "fixed_poly_avg",
            Schedule::constant(),
            Output::PolynomialAverage,
        ),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub variant: String,
    pub lr: f64,
    pub seed: u64,
    /// `+inf` marks a divergent run.
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStat {
    pub variant: String,
    pub lr: f64,
    pub mean: f64,
    pub std: f64,
}

/// Everything measured on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub variants: Vec<String>,
    /// Ordered by variant, then learning rate, then seed.
    pub raw: Vec<RawRecord>,
    /// Ordered by variant, then learning rate.
    pub cells: Vec<CellStat>,
}

/// Mean and sample standard deviation; `0` spread for a single value and
/// `+inf` for both when any value is infinite.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.iter().any(|v| !v.is_finite()) {
        return (f64::INFINITY, f64::INFINITY);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Shared run settings of a grid evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRun {
    pub steps: u64,
    pub x1: Vec<f64>,
    pub options: RunOptions,
}

/// Runs every (schedule, learning rate, seed) cell and scores each variant
/// with `metric`.
///
/// Variants sharing a schedule share runs. Cells execute in parallel and
/// are reduced in a fixed order, so the outcome does not depend on thread
/// scheduling. Non-finite gradients or losses score `+inf`.
pub fn evaluate_grid(
    problem: &dyn Problem,
    metric: &(dyn Fn(&[f64]) -> f64 + Sync),
    variants: &[Variant],
    grid: &[f64],
    seeds: &[u64],
    setup: &GridRun,
) -> Result<GridOutcome> {
    if variants.is_empty() || grid.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidArgument(
            "variants, grid and seeds must be non-empty".into(),
        ));
    }
    for (i, v) in variants.iter().enumerate() {
        if variants[..i].iter().any(|u| u.name == v.name) {
            return Err(Error::InvalidArgument(format!(
                "duplicate variant `{}`",
                v.name
            )));
        }
    }
    let mut schedules: Vec<Schedule> = Vec::new();
    for v in variants {
        if !schedules.contains(&v.schedule) {
            schedules.push(v.schedule);
        }
    }
    let plans = schedules
        .iter()
        .flat_map(|s| {
            grid.iter()
                .map(move |&lr| StepsizePlan::new(lr, *s, setup.steps))
        })
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, u64)> = (0..plans.len())
        .flat_map(|p| seeds.iter().map(move |&s| (p, s)))
        .collect();
    let runs: Vec<Option<SgdRun>> = jobs
        .par_iter()
        .map(
            |&(p, seed)| match run_sgd(problem, &plans[p], &setup.x1, seed, &setup.options) {
                Ok(run) => Ok(Some(run)),
                Err(Error::NonFiniteGradient { .. }) => Ok(None),
                Err(e) => Err(e),
            },
        )
        .collect::<Result<_>>()?;
    let score = |run: &Option<SgdRun>, v: &Variant| -> f64 {
        match run {
            Some(r) => {
                let x = v.pick(r);
                let loss = metric(x);
                if loss.is_finite() && x.iter().all(|c| c.is_finite()) {
                    loss
                } else {
                    f64::INFINITY
                }
            }
            None => f64::INFINITY,
        }
    };
    let mut raw = Vec::new();
    let mut cells = Vec::new();
    for v in variants {
        let s = schedules
            .iter()
            .position(|x| *x == v.schedule)
            .expect("collected");
        for (li, &lr) in grid.iter().enumerate() {
            let base = (s * grid.len() + li) * seeds.len();
            let losses: Vec<f64> = (0..seeds.len())
                .map(|k| score(&runs[base + k], v))
                .collect();
            for (&seed, &loss) in seeds.iter().zip(&losses) {
                raw.push(RawRecord {
                    variant: v.name.clone(),
                    lr,
                    seed,
                    loss,
                });
            }
            let (mean, std) = mean_std(&losses);
            cells.push(CellStat {
                variant: v.name.clone(),
                lr,
                mean,
                std,
            });
        }
    }
    Ok(GridOutcome {
        grid: grid.to_vec(),
        seeds: seeds.to_vec(),
        variants: variants.iter().map(|v| v.name.clone()).collect(),
        raw,
        cells,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationRow {
    pub variant: String,
    pub level: usize,
    pub grid_factor: f64,
    /// Mean over sub-grids of the best cell mean in each.
    pub mean_best: f64,
    pub std_best: f64,
    /// `mean_best` minus the full-grid best.
    pub degradation: f64,
}

/// Geometric-mean ratio between adjacent grid values.
pub fn grid_ratio(grid: &[f64]) -> f64 {
    match grid {
        [] | [_] => 1.0,
        [first, .., last] => (last / first).powf(1.0 / (grid.len() - 1) as f64),
    }
}

/// Mean over sub-grids of the sub-grid minimum of `means`.
pub fn mean_of_bests(means: &[f64], level: usize) -> Result<(f64, f64)> {
    let bests: Vec<f64> = subgrid_indices(means.len(), level)?
        .iter()
        .map(|idx| idx.iter().map(|&i| means[i]).fold(f64::INFINITY, f64::min))
        .collect();
    Ok(mean_std(&bests))
}

impl GridOutcome {
    /// Cell means of one variant in grid order.
    pub fn means(&self, variant: &str) -> Option<Vec<f64>> {
        let v: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.variant == variant)
            .map(|c| c.mean)
            .collect();
        (!v.is_empty()).then_some(v)
    }

    pub fn raw_csv(&self) -> String {
        let mut out = String::from("schedule,lr,seed,loss\n");
        for r in &self.raw {
            out.push_str(&format!("{},{},{},{}\n", r.variant, r.lr, r.seed, r.loss));
        }
        out
    }
}

/// Per variant and level: grid factor `ratio^level` and mean-of-bests.
pub fn degradation_curve(outcome: &GridOutcome, levels: &[usize]) -> Result<Vec<DegradationRow>> {
    let ratio = grid_ratio(&outcome.grid);
    let mut rows = Vec::new();
    for v in &outcome.variants {
        let means = outcome.means(v).expect("variant has cells");
        let (full_best, _) = mean_of_bests(&means, 1)?;
        for &level in levels {
            let (mean_best, std_best) = mean_of_bests(&means, level)?;
            rows.push(DegradationRow {
                variant: v.clone(),
                level,
                grid_factor: ratio.powi(level as i32),
                mean_best,
                std_best,
                degradation: mean_best - full_best,
            });
        }
    }
    Ok(rows)
}

pub fn degradation_csv(rows: &[DegradationRow]) -> String {
    let mut out = String::from("schedule,level,grid_factor,mean_best,std_best\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.variant, r.level, r.grid_factor, r.mean_best, r.std_best
        ));
    }
    out
}

/// Provenance of an experiment's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub code_version: String,
    pub grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub levels: Vec<usize>,
    pub variants: Vec<String>,
    pub config: serde_json::Value,
}

impl Manifest {
    pub fn new(outcome: &GridOutcome, levels: &[usize], config: serde_json::Value) -> Self {
        Self {
            code_version: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).into(),
            grid: outcome.grid.clone(),
            seeds: outcome.seeds.clone(),
            levels: levels.to_vec(),
            variants: outcome.variants.clone(),
            config,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_examples() {
        let g = build_grid(&GridSpec::new(-2, 0)).unwrap();
        assert_eq!(g, vec![0.01, 0.022, 0.05, 0.1, 0.22, 0.5, 1.0, 2.2, 5.0]);
        let ones = GridSpec {
            mantissas: vec![1.0],
            decade_lo: 0,
            decade_hi: 2,
        };
        assert_eq!(build_grid(&ones).unwrap(), vec![1.0, 10.0, 100.0]);
        assert!(build_grid(&GridSpec::new(1, 0)).is_err());
        let dup = GridSpec {
            mantissas: vec![1.0, 10.0],
            decade_lo: 0,
            decade_hi: 1,
        };
        assert!(build_grid(&dup).is_err());
    }

    #[test]
    fn subgrid_examples() {
        let g = build_grid(&GridSpec::new(-2, 0)).unwrap();
        let s = subgrids(&g, 3).unwrap();
        assert_eq!(
            s,
            vec![
                vec![0.01, 0.1, 1.0],
                vec![0.022, 0.22, 2.2],
                vec![0.05, 0.5, 5.0]
            ]
        );
        assert_eq!(subgrids(&g, 1).unwrap(), vec![g.clone()]);
        assert!(subgrids(&g, 9).unwrap().iter().all(|s| s.len() == 1));
        assert!(subgrids(&g, 0).is_err() && subgrids(&g, 10).is_err());
    }

    #[test]
    fn mean_std_conventions() {
        assert_eq!(mean_std(&[3.0]), (3.0, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[1.0, f64::INFINITY]).0, f64::INFINITY);
    }

    #[test]
    fn mean_of_bests_is_not_monotone_between_unrelated_levels() {
        // Level 3 splits into {0,9},{9,0},{0,9}: every class contains a 0.
        // Level 2 splits into {0,0,0},{9,9,9}: one class has best 9.
        let means = [0.0, 9.0, 0.0, 9.0, 0.0, 9.0];
        let (two, _) = mean_of_bests(&means, 2).unwrap();
        let (three, _) = mean_of_bests(&means, 3).unwrap();
        assert!(three < two);
    }

    #[test]
    fn ratio_of_default_grid() {
        let g = build_grid(&GridSpec::new(-3, 0)).unwrap();
        let r = grid_ratio(&g);
        assert!((r - 5000f64.powf(1.0 / 11.0)).abs() < 1e-12);
    }
}
