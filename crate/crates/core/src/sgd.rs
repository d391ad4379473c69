//! Projected SGD with scheduled stepsizes.
//!
//! Also hosts the discrete quantities of the last-iterate analysis: the
//! right-hand sides of the last-iterate bounds, the suffix sums compared
//! against their integral counterparts, and the weight sequence `v_t`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::schedule::{Schedule, ScheduleKind, TailFunctions};

/// Default parameter of the polynomial average.
pub const DEFAULT_GAMMA: f64 = 8.0;

/// Base stepsize, shape and horizon.
///
/// `eta_t = eta * h((t - 1) / T)` for shapes and `eta / sqrt(t)` for the
/// discrete inverse-sqrt rule, `t = 1..=T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepsizePlan {
    pub eta: f64,
    pub schedule: Schedule,
    pub steps: u64,
}

impl StepsizePlan {
    pub fn new(eta: f64, schedule: Schedule, steps: u64) -> Result<Self> {
        check_positive("eta", eta)?;
        if steps == 0 {
            return Err(Error::InvalidArgument("T must be at least 1".into()));
        }
        Ok(Self {
            eta,
            schedule,
            steps,
        })
    }

    /// `eta_t` for `t` in `1..=T`.
    pub fn stepsize_at(&self, t: u64) -> Result<f64> {
        if t == 0 || t > self.steps {
            return Err(Error::InvalidArgument(format!(
                "step {t} outside 1..={}",
                self.steps
            )));
        }
        Ok(self.step_unchecked(t))
    }

    fn step_unchecked(&self, t: u64) -> f64 {
        match self.schedule.kind() {
            ScheduleKind::InverseSqrtDiscrete => self.eta / (t as f64).sqrt(),
            ScheduleKind::Constant => self.eta,
            _ => {
                let u = (t - 1) as f64 / self.steps as f64;
                self.eta * self.schedule.eval(u).expect("u in [0, 1)")
            }
        }
    }

    /// `eta_1, ..., eta_T`.
    pub fn stepsizes(&self) -> Vec<f64> {
        (1..=self.steps).map(|t| self.step_unchecked(t)).collect()
    }
}

/// Feasible set of a problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Unconstrained,
}

impl Domain {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let d = Domain::Ball { center, radius };
        d.validate()?;
        Ok(d)
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::boxed(vec![lo], vec![hi])
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let d = Domain::Box { lo, hi };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Domain::Ball { center, radius } => {
                check_positive("radius", *radius)?;
                if center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidArgument("ball center must be finite".into()));
                }
            }
            Domain::Box { lo, hi } => {
                if lo.len() != hi.len() {
                    return Err(Error::InvalidArgument(format!(
                        "box bounds have dimensions {} and {}",
                        lo.len(),
                        hi.len()
                    )));
                }
                if let Some(i) =
                    (0..lo.len()).find(|&i| lo[i].partial_cmp(&hi[i]).is_none_or(|o| o.is_gt()))
                {
                    return Err(Error::InvalidArgument(format!(
                        "box bound {i}: lo {} > hi {}",
                        lo[i], hi[i]
                    )));
                }
            }
            Domain::Unconstrained => {}
        }
        Ok(())
    }

    /// Dimension, if the domain fixes one.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Domain::Ball { center, .. } => Some(center.len()),
            Domain::Box { lo, .. } => Some(lo.len()),
            Domain::Unconstrained => None,
        }
    }

    /// Euclidean projection, in place.
    pub fn project_in_place(&self, x: &mut [f64]) {
        match self {
            Domain::Ball { center, radius } => {
                let dist = x
                    .iter()
                    .zip(center)
                    .map(|(a, c)| (a - c) * (a - c))
                    .sum::<f64>()
                    .sqrt();
                if dist > *radius {
                    let s = radius / dist;
                    for (a, c) in x.iter_mut().zip(center) {
                        *a = c + (*a - c) * s;
                    }
                }
            }
            Domain::Box { lo, hi } => {
                for ((a, l), h) in x.iter_mut().zip(lo).zip(hi) {
                    *a = a.clamp(*l, *h);
                }
            }
            Domain::Unconstrained => {}
        }
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        self.project_in_place(&mut y);
        y
    }

    /// Membership up to `tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            Domain::Ball { center, radius } => {
                let d2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                d2.sqrt() <= radius + tol
            }
            Domain::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(a, (l, h))| *a >= l - tol && *a <= h + tol),
            Domain::Unconstrained => x.iter().all(|a| a.is_finite()),
        }
    }
}

/// A stochastic first-order oracle bound to one noise stream.
pub trait Oracle {
    /// Writes a stochastic (sub)gradient at `x` into `out`.
    fn sample(&mut self, x: &[f64], out: &mut [f64]);
}

/// A convex objective over a domain, with a seeded oracle.
pub trait Problem: Sync {
    fn dim(&self) -> usize;
    fn domain(&self) -> &Domain;
    fn value(&self, x: &[f64]) -> f64;
    /// A fresh oracle whose noise is a deterministic function of `seed` and
    /// of the number of calls made so far.
    fn oracle(&self, seed: u64) -> Box<dyn Oracle + '_>;
    fn minimizer(&self) -> Option<Vec<f64>> {
        None
    }
    fn optimal_value(&self) -> Option<f64> {
        None
    }
}

/// Per-run noise stream.
pub fn noise_stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Parameter of the polynomial average.
    pub gamma: f64,
    /// Keep `(t, eta_t, f(x_t), x_t)` for every step.
    pub record_trajectory: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            gamma: DEFAULT_GAMMA,
            record_trajectory: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: u64,
    pub eta: f64,
    /// `f(x_t)`.
    pub value: f64,
    pub x: Vec<f64>,
}

/// Outcome of one SGD run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdRun {
    pub seed: u64,
    pub plan: StepsizePlan,
    /// `x_{T+1}`.
    pub last_iterate: Vec<f64>,
    /// Mean of `x_1, ..., x_T`.
    pub uniform_average: Vec<f64>,
    pub polynomial_average: Vec<f64>,
    pub trajectory: Option<Vec<TrajectoryPoint>>,
}

/// Objective values of the three outputs of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub plan: StepsizePlan,
    pub last: f64,
    pub uniform_average: f64,
    pub polynomial_average: f64,
}

impl SgdRun {
    pub fn summarize(&self, problem: &dyn Problem) -> RunSummary {
        RunSummary {
            seed: self.seed,
            plan: self.plan,
            last: problem.value(&self.last_iterate),
            uniform_average: problem.value(&self.uniform_average),
            polynomial_average: problem.value(&self.polynomial_average),
        }
    }

    /// Trajectory as CSV `t,eta_t,f_x_t`, if one was recorded.
    pub fn trajectory_csv(&self) -> Option<String> {
        let tr = self.trajectory.as_ref()?;
        let mut out = String::from("t,eta_t,f_x_t\n");
        for p in tr {
            out.push_str(&format!("{},{},{}\n", p.t, p.eta, p.value));
        }
        Some(out)
    }
}

/// Runs `T` projected steps `x_{t+1} = P(x_t - eta_t g_t)` from `x1`.
///
/// Averages are streamed: the uniform one over `x_1..x_T`, and the
/// polynomial one by `xbar_t = (1 - w_t) xbar_{t-1} + w_t x_t` with
/// `w_t = (gamma + 1) / (t + gamma)`, so that `xbar_1 = x_1`.
pub fn run_sgd(
    problem: &dyn Problem,
    plan: &StepsizePlan,
    x1: &[f64],
    seed: u64,
    opts: &RunOptions,
) -> Result<SgdRun> {
    let d = problem.dim();
    if x1.len() != d {
        return Err(Error::InvalidArgument(format!(
            "x1 has dimension {}, problem has {d}",
            x1.len()
        )));
    }
    if !problem.domain().contains(x1, 1e-12) {
        return Err(Error::InvalidArgument("x1 lies outside the domain".into()));
    }
    if !(opts.gamma >= 0.0 && opts.gamma.is_finite()) {
        return Err(Error::Domain {
            name: "gamma",
            value: opts.gamma,
            expected: "[0, inf)",
        });
    }
    let mut oracle = problem.oracle(seed);
    let mut x = x1.to_vec();
    let mut g = vec![0.0; d];
    let mut mean = x1.to_vec();
    let mut poly = x1.to_vec();
    let mut trajectory = opts.record_trajectory.then(Vec::new);
    for t in 1..=plan.steps {
        let eta = plan.step_unchecked(t);
        let (wu, wp) = (1.0 / t as f64, (opts.gamma + 1.0) / (t as f64 + opts.gamma));
        for ((m, p), xi) in mean.iter_mut().zip(poly.iter_mut()).zip(&x) {
            *m += wu * (xi - *m);
            *p += wp * (xi - *p);
        }
        if let Some(tr) = trajectory.as_mut() {
            tr.push(TrajectoryPoint {
                t,
                eta,
                value: problem.value(&x),
                x: x.clone(),
            });
        }
        oracle.sample(&x, &mut g);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient { step: t as usize });
        }
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= eta * gi;
        }
        problem.domain().project_in_place(&mut x);
    }
    Ok(SgdRun {
        seed,
        plan: *plan,
        last_iterate: x,
        uniform_average: mean,
        polynomial_average: poly,
        trajectory,
    })
}

/// Suffix sums `S_t = sum_{s=t}^T eta_s`, indexed from 0.
fn suffix_sums(etas: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; etas.len()];
    let mut acc = 0.0;
    for (i, e) in etas.iter().enumerate().rev() {
        acc += e;
        out[i] = acc;
    }
    out
}

fn check_etas(etas: &[f64]) -> Result<()> {
    if etas.is_empty() {
        return Err(Error::InvalidArgument("empty stepsize sequence".into()));
    }
    if let Some(e) = etas.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::Domain {
            name: "eta_t",
            value: *e,
            expected: "(0, inf)",
        });
    }
    Ok(())
}

/// `c1 / S_1 + c2 sum_t eta_t^2 / S_t` for an arbitrary stepsize sequence.
pub fn suffix_terms(etas: &[f64], c1: f64, c2: f64) -> Result<f64> {
    check_etas(etas)?;
    let s = suffix_sums(etas);
    let noise: f64 = etas.iter().zip(&s).map(|(e, st)| e * e / st).sum();
    Ok(c1 / s[0] + c2 * noise)
}

/// `dist^2 / (2 sum eta_s) + 2 G^2 sum_t eta_t^2 / S_t`.
///
/// `dist` is the diameter `D`, or `||x_1 - x*||` when the minimizer is known.
pub fn last_iterate_rhs_lipschitz(etas: &[f64], dist: f64, grad_bound: f64) -> Result<f64> {
    suffix_terms(etas, 0.5 * dist * dist, 2.0 * grad_bound * grad_bound)
}

/// `dist^2 / (2 sum eta_s) + sigma^2 sum_t eta_t^2 / S_t`, valid only while
/// every `eta_t <= 1 / (2 beta)`.
pub fn last_iterate_rhs_smooth(etas: &[f64], dist: f64, sigma: f64, beta: f64) -> Result<f64> {
    check_positive("beta", beta)?;
    let limit = 1.0 / (2.0 * beta);
    if let Some((i, e)) = etas.iter().enumerate().find(|(_, e)| **e > limit) {
        return Err(Error::StepsizeTooLarge {
            step: i + 1,
            eta: *e,
            limit,
        });
    }
    suffix_terms(etas, 0.5 * dist * dist, sigma * sigma)
}

pub fn discrete_last_iterate_bound_lipschitz(
    plan: &StepsizePlan,
    dist: f64,
    grad_bound: f64,
) -> Result<f64> {
    last_iterate_rhs_lipschitz(&plan.stepsizes(), dist, grad_bound)
}

pub fn discrete_last_iterate_bound_smooth(
    plan: &StepsizePlan,
    dist: f64,
    sigma: f64,
    beta: f64,
) -> Result<f64> {
    last_iterate_rhs_smooth(&plan.stepsizes(), dist, sigma, beta)
}

/// Both sides of the suffix-to-integral comparison for suffix start `k`:
///
/// ```text
/// lhs = c1 / S_k + c2 sum_{t>=k} eta_t^2 / S_t
/// rhs = c1 / (eta T H(tau)) + c2 eta ∫_tau^{1-1/T} h^2 / H + 4 eta c2 p / T
/// ```
///
/// with `tau` in `[(k - 1) / T, k / T)`. The integral is signed, so it is
/// negative when `tau > 1 - 1/T`.
pub fn lemma3_gap(
    plan: &StepsizePlan,
    tails: &TailFunctions,
    k: u64,
    c1: f64,
    c2: f64,
    tau: f64,
) -> Result<(f64, f64)> {
    if !plan.schedule.is_annealed() {
        return Err(Error::Unsupported {
            operation: "suffix comparison",
            schedule: plan.schedule.to_string(),
        });
    }
    if *tails.schedule() != plan.schedule {
        return Err(Error::InvalidArgument(format!(
            "tail functions are for {}, plan uses {}",
            tails.schedule(),
            plan.schedule
        )));
    }
    check_positive("c1", c1)?;
    check_positive("c2", c2)?;
    let big_t = plan.steps;
    if k == 0 || k > big_t {
        return Err(Error::InvalidArgument(format!(
            "k = {k} outside 1..={big_t}"
        )));
    }
    let n = big_t as f64;
    let (cell_lo, cell_hi) = ((k - 1) as f64 / n, k as f64 / n);
    if !(tau >= cell_lo && tau < cell_hi) {
        return Err(Error::Domain {
            name: "tau",
            value: tau,
            expected: "[(k - 1) / T, k / T)",
        });
    }
    let etas = plan.stepsizes();
    let lhs = suffix_terms(&etas[(k - 1) as usize..], c1, c2)?;
    let eta = plan.eta;
    let p = plan.schedule.lipschitz();
    let integral = tails.ratio_integral(tau, 1.0 - 1.0 / n)?;
    let rhs = c1 / (eta * n * tails.tail_mass(tau)?) + c2 * eta * integral + 4.0 * eta * c2 * p / n;
    Ok((lhs, rhs))
}

/// `v_0, ..., v_T` with `v_t = eta_T / S_t` and `v_0 = v_1`.
pub fn v_weights(plan: &StepsizePlan) -> Vec<f64> {
    let etas = plan.stepsizes();
    let s = suffix_sums(&etas);
    let last = *etas.last().expect("T >= 1");
    let mut v = Vec::with_capacity(etas.len() + 1);
    v.push(last / s[0]);
    v.extend(s.iter().map(|st| last / st));
    v
}

/// One randomized draw of the suffix-to-integral comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma3Case {
    pub schedule: Schedule,
    pub steps: u64,
    pub k: u64,
    pub tau: f64,
    pub eta: f64,
    pub c1: f64,
    pub c2: f64,
    pub lhs: f64,
    pub rhs: f64,
}

impl Lemma3Case {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma3Audit {
    pub cases: usize,
    /// Largest `lhs / rhs` seen.
    pub worst_ratio: f64,
    pub violations: Vec<Lemma3Case>,
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..=hi.ln())).exp()
}

/// Draws `cases` random instances of [`lemma3_gap`] and evaluates them.
///
/// Schedules are cosine or polynomial with `p` in `[1, 5]`, `T` in
/// `[50, 5000]`, `k` uniform in `1..=T`, `tau` uniform in its cell, and
/// `eta`, `c1`, `c2` log-uniform in `[1e-3, 1e3]`, `[1e-2, 1e2]`,
/// `[1e-2, 1e2]`. Draws come from one seeded stream; evaluation runs in
/// parallel and keeps draw order.
pub fn lemma3_audit(cases: usize, seed: u64) -> Result<Lemma3Audit> {
    let mut rng = noise_stream(seed);
    let mut draws = Vec::with_capacity(cases);
    for _ in 0..cases {
        let schedule = if rng.gen_bool(0.5) {
            Schedule::cosine()
        } else {
            Schedule::polynomial(rng.gen_range(1.0..=5.0))?
        };
        let steps = rng.gen_range(50..=5000u64);
        let k = rng.gen_range(1..=steps);
        let n = steps as f64;
        let tau = ((k - 1) as f64 + rng.gen::<f64>()) / n;
        // Rounding can land exactly on the upper cell edge.
        let tau = if tau >= k as f64 / n {
            (k - 1) as f64 / n
        } else {
            tau
        };
        let eta = log_uniform(&mut rng, 1e-3, 1e3);
        let c1 = log_uniform(&mut rng, 1e-2, 1e2);
        let c2 = log_uniform(&mut rng, 1e-2, 1e2);
        draws.push((schedule, steps, k, tau, eta, c1, c2));
    }
    let evaluated: Vec<Lemma3Case> = draws
        .into_par_iter()
        .map(|(schedule, steps, k, tau, eta, c1, c2)| {
            let plan = StepsizePlan::new(eta, schedule, steps)?;
            let tails = TailFunctions::analytic(schedule)?;
            let (lhs, rhs) = lemma3_gap(&plan, &tails, k, c1, c2, tau)?;
            Ok(Lemma3Case {
                schedule,
                steps,
                k,
                tau,
                eta,
                c1,
                c2,
                lhs,
                rhs,
            })
        })
        .collect::<Result<_>>()?;
    let worst_ratio = evaluated.iter().map(|c| c.lhs / c.rhs).fold(0.0, f64::max);
    Ok(Lemma3Audit {
        cases,
        worst_ratio,
        violations: evaluated.into_iter().filter(|c| !c.holds()).collect(),
    })
}
