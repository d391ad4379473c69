//! Misspecification-robust last-iterate bounds.
//!
//! With base stepsize `eta = rho * eta_star`, the last iterate of SGD with
//! an annealed schedule satisfies a bound of the form
//!
//! ```text
//! scale * inf_{v in [floor, 1)} g(v) + low_order,
//! g(v) = H(0) / (rho H(v)) + rho I(v) / I(0),
//! ```
//!
//! where `scale` is half the tuned rate in the Lipschitz setting and the
//! tuned rate itself in the smooth setting. The infimum is attained at the
//! root of `H(v) H'(v) = -H(0) I(0) / rho^2`, or at the floor when the
//! equation has no root above it.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::numerics::{find_root_with, RootOptions};
use crate::schedule::{Schedule, ScheduleKind, TailFunctions};

/// Number of grid cells used to bracket the stationarity root.
const BRACKET_GRID: usize = 1024;
/// Right end of the bracketing grid.
const BRACKET_END: f64 = 1.0 - 1e-9;

/// Problem constants entering the bounds.
///
/// Only the fields relevant to a setting are validated: `grad_bound` for the
/// Lipschitz bounds, `smoothness` and `noise` for the smooth ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemScales {
    /// Domain diameter `D`.
    pub diameter: f64,
    /// Second-moment bound `G` of the subgradient oracle.
    pub grad_bound: f64,
    /// Smoothness `beta`.
    pub smoothness: f64,
    /// Noise standard deviation `sigma`.
    pub noise: f64,
    /// Number of steps `T`.
    pub steps: u64,
}

impl ProblemScales {
    pub fn lipschitz(diameter: f64, grad_bound: f64, steps: u64) -> Self {
        Self {
            diameter,
            grad_bound,
            smoothness: 0.0,
            noise: 0.0,
            steps,
        }
    }

    pub fn smooth(diameter: f64, smoothness: f64, noise: f64, steps: u64) -> Self {
        Self {
            diameter,
            grad_bound: 0.0,
            smoothness,
            noise,
            steps,
        }
    }

    fn check_common(&self) -> Result<()> {
        check_positive("D", self.diameter)?;
        if self.steps == 0 {
            return Err(Error::InvalidArgument("T must be at least 1".into()));
        }
        Ok(())
    }

    fn check_lipschitz(&self) -> Result<()> {
        self.check_common()?;
        check_positive("G", self.grad_bound)
    }

    fn check_smooth(&self) -> Result<()> {
        self.check_common()?;
        check_positive("beta", self.smoothness)?;
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Domain {
                name: "sigma",
                value: self.noise,
                expected: "[0, inf)",
            });
        }
        Ok(())
    }

    fn t(&self) -> f64 {
        self.steps as f64
    }
}

/// Which explicit estimate applies to the smooth infimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothBranch {
    /// `rho^2 >= (1 - tau0)^-(2q+1)`: the infimum grows like `rho^(1/(2q+1))`.
    RhoPower,
    /// Otherwise the floor binds and the infimum is `O(1 / (1 - tau0))`.
    SuffixFloor,
}

impl fmt::Display for SmoothBranch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SmoothBranch::RhoPower => "rho_power",
            SmoothBranch::SuffixFloor => "suffix_floor",
        })
    }
}

/// One evaluated bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub rho: f64,
    pub tau_star: f64,
    /// `g(tau_star)`.
    pub infimum_value: f64,
    pub eta_star: f64,
    pub rate_opt: f64,
    pub bound_main: f64,
    pub low_order: f64,
    /// `bound_main` divided by `D G / sqrt(T)`, or by
    /// `beta D^2 / T + D sigma / sqrt(T)` in the smooth setting.
    pub coefficient: f64,
    /// Lower end of the suffix search; `tau0` in the smooth setting.
    pub tau_floor: f64,
    /// Smooth setting only.
    pub branch: Option<SmoothBranch>,
}

fn check_rho(rho: f64) -> Result<()> {
    if rho >= 1.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "rho",
            value: rho,
            expected: "[1, inf)",
        })
    }
}

/// `eta* = D / (2 G sqrt(T H(0) I(0)))`.
pub fn tuned_stepsize_lipschitz(sc: &ProblemScales, t: &TailFunctions) -> Result<f64> {
    sc.check_lipschitz()?;
    let (h0, i0) = (t.mass_at_zero(), t.integral_at_zero()?);
    Ok(sc.diameter / (2.0 * sc.grad_bound * (sc.t() * h0 * i0).sqrt()))
}

/// `R* = (2 D G / sqrt(T)) sqrt(I(0) / H(0))`.
pub fn tuned_rate_lipschitz(sc: &ProblemScales, t: &TailFunctions) -> Result<f64> {
    sc.check_lipschitz()?;
    let (h0, i0) = (t.mass_at_zero(), t.integral_at_zero()?);
    Ok(2.0 * sc.diameter * sc.grad_bound / sc.t().sqrt() * (i0 / h0).sqrt())
}

/// Full last-iterate guarantee at base stepsize `eta`, lower-order term
/// included: `D^2 / (2 eta T H(0)) + 2 eta G^2 I(0) + 8 p eta G^2 / T`.
pub fn annealed_rhs_lipschitz(sc: &ProblemScales, t: &TailFunctions, eta: f64) -> Result<f64> {
    sc.check_lipschitz()?;
    check_positive("eta", eta)?;
    let (h0, i0) = (t.mass_at_zero(), t.integral_at_zero()?);
    let (d, g, n) = (sc.diameter, sc.grad_bound, sc.t());
    let p = t.schedule().lipschitz();
    Ok(d * d / (2.0 * eta * n * h0) + 2.0 * eta * g * g * i0 + 8.0 * p * eta * g * g / n)
}

/// `H(v) H'(v) + H(0) I(0) / rho^2`; increasing in `v`, positive at `v = 1`.
pub fn stationarity_residual(t: &TailFunctions, rho: f64, v: f64) -> Result<f64> {
    check_rho(rho)?;
    let c = t.mass_at_zero() * t.integral_at_zero()? / (rho * rho);
    Ok(t.tail_mass(v)? * t.tail_mass_derivative(v)? + c)
}

/// `g(v) = H(0) / (rho H(v)) + rho I(v) / I(0)`.
pub fn infimand(t: &TailFunctions, rho: f64, v: f64) -> Result<f64> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Domain {
            name: "rho",
            value: rho,
            expected: "(0, inf)",
        });
    }
    let i0 = t.integral_at_zero()?;
    Ok(t.mass_at_zero() / (rho * t.tail_mass(v)?) + rho * t.tail_integral(v)? / i0)
}

/// Minimizer of [`infimand`] over `[tau_floor, 1)`.
///
/// The residual is scanned on a uniform grid to bracket its single sign
/// change, which is then refined by a safeguarded secant search. Without a
/// sign change above the floor, `g` is increasing there and the floor wins.
pub fn solve_optimal_tau(t: &TailFunctions, rho: f64, tau_floor: f64) -> Result<f64> {
    check_rho(rho)?;
    if !(0.0..1.0).contains(&tau_floor) {
        return Err(Error::Domain {
            name: "tau_floor",
            value: tau_floor,
            expected: "[0, 1)",
        });
    }
    let r = |v: f64| stationarity_residual(t, rho, v);
    if r(tau_floor)? >= 0.0 {
        return Ok(tau_floor);
    }
    let end = BRACKET_END.max(tau_floor);
    let step = (end - tau_floor) / BRACKET_GRID as f64;
    let mut lo = tau_floor;
    let mut hi = None;
    for i in 1..=BRACKET_GRID {
        let v = if i == BRACKET_GRID {
            end
        } else {
            tau_floor + i as f64 * step
        };
        if r(v)? >= 0.0 {
            hi = Some(v);
            break;
        }
        lo = v;
    }
    // The residual is positive at 1, so the root may sit in the last sliver.
    let hi = hi.unwrap_or(1.0);
    let opts = RootOptions {
        f_tol: 0.0,
        x_tol: 1e-14,
        max_iter: 200,
    };
    let mut failure = None;
    let found = find_root_with(
        |v| match r(v) {
            Ok(x) => x,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        lo,
        hi,
        &opts,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let root = found?.root;
    Ok(root.min(BRACKET_END.max(tau_floor)))
}

fn low_order_factor(s: &Schedule) -> f64 {
    s.lipschitz()
}

/// Lipschitz-setting bound at misspecification `rho`.
pub fn lipschitz_bound(sc: &ProblemScales, t: &TailFunctions, rho: f64) -> Result<BoundReport> {
    check_rho(rho)?;
    let eta_star = tuned_stepsize_lipschitz(sc, t)?;
    let rate_opt = tuned_rate_lipschitz(sc, t)?;
    let tau_star = solve_optimal_tau(t, rho, 0.0)?;
    let infimum_value = infimand(t, rho, tau_star)?;
    let bound_main = 0.5 * rate_opt * infimum_value;
    let g = sc.grad_bound;
    let low_order = 8.0 * low_order_factor(t.schedule()) * rho * eta_star * g * g / sc.t();
    let unit = sc.diameter * g / sc.t().sqrt();
    Ok(BoundReport {
        rho,
        tau_star,
        infimum_value,
        eta_star,
        rate_opt,
        bound_main,
        low_order,
        coefficient: bound_main / unit,
        tau_floor: 0.0,
        branch: None,
    })
}

/// `eta*_beta = min{1 / (2 beta h(0)), D / (sigma sqrt(2 T H(0) I(0)))}`.
pub fn tuned_stepsize_smooth(sc: &ProblemScales, t: &TailFunctions) -> Result<f64> {
    sc.check_smooth()?;
    let cap = 1.0 / (2.0 * sc.smoothness * t.schedule().eval(0.0)?);
    let (h0, i0) = (t.mass_at_zero(), t.integral_at_zero()?);
    if sc.noise == 0.0 {
        return Ok(cap);
    }
    let noise_term = sc.diameter / (sc.noise * (2.0 * sc.t() * h0 * i0).sqrt());
    Ok(cap.min(noise_term))
}

/// `R*_beta = D^2 / (2 eta*_beta T H(0)) + eta*_beta sigma^2 I(0)`.
pub fn tuned_rate_smooth(sc: &ProblemScales, t: &TailFunctions) -> Result<f64> {
    let eta = tuned_stepsize_smooth(sc, t)?;
    let (h0, i0) = (t.mass_at_zero(), t.integral_at_zero()?);
    let d = sc.diameter;
    Ok(d * d / (2.0 * eta * sc.t() * h0) + eta * sc.noise * sc.noise * i0)
}

/// Smallest `k / T`, `k < T`, with `eta h(k / T) <= 1 / (2 beta)`.
///
/// `h` is non-increasing, so the feasible `k` form a suffix and a binary
/// search suffices. Returns [`Error::NoValidSuffix`] if no such `k` exists.
pub fn compute_tau0(sc: &ProblemScales, s: &Schedule, eta: f64) -> Result<f64> {
    sc.check_smooth()?;
    check_positive("eta", eta)?;
    if s.kind() == ScheduleKind::InverseSqrtDiscrete {
        return Err(Error::Unsupported {
            operation: "tau0",
            schedule: s.to_string(),
        });
    }
    let limit = 1.0 / (2.0 * sc.smoothness);
    let steps = sc.steps;
    let ok = |k: u64| -> Result<bool> { Ok(eta * s.eval(k as f64 / steps as f64)? <= limit) };
    if ok(0)? {
        return Ok(0.0);
    }
    if !ok(steps - 1)? {
        return Err(Error::NoValidSuffix);
    }
    // Invariant: !ok(lo), ok(hi).
    let (mut lo, mut hi) = (0, steps - 1);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi as f64 / steps as f64)
}

/// Which estimate of the smooth infimum applies for a schedule with a zero
/// of order `q` at the end of training. `None` for shapes without one.
pub fn smooth_branch(s: &Schedule, rho: f64, tau0: f64) -> Option<SmoothBranch> {
    let q = s.tail_order()?;
    if rho * rho >= (1.0 - tau0).powf(-(2.0 * q + 1.0)) {
        Some(SmoothBranch::RhoPower)
    } else {
        Some(SmoothBranch::SuffixFloor)
    }
}

/// Explicit ceiling on the smooth infimum for polynomial decay `(1 - u)^p`:
/// `2 rho^(1/(2p+1))` on the power branch and
/// `1 / ((1 - p rho / T)(1 - tau0)) + sqrt(1 / (1 - tau0))` on the floor
/// branch. The latter needs `rho <= T / (2p)` and `h(0) = 1`.
pub fn branch_ceiling(
    s: &Schedule,
    rho: f64,
    tau0: f64,
    steps: u64,
    branch: SmoothBranch,
) -> Option<f64> {
    let ScheduleKind::PolynomialDecay(p) = s.kind() else {
        return None;
    };
    match branch {
        SmoothBranch::RhoPower => Some(2.0 * rho.powf(1.0 / (2.0 * p + 1.0))),
        SmoothBranch::SuffixFloor => {
            let t = steps as f64;
            if rho > t / (2.0 * p) {
                return None;
            }
            let w = 1.0 - tau0;
            Some(1.0 / ((1.0 - p * rho / t) * w) + (1.0 / w).sqrt())
        }
    }
}

/// Smooth-setting bound at misspecification `rho`.
pub fn smooth_bound(sc: &ProblemScales, t: &TailFunctions, rho: f64) -> Result<BoundReport> {
    check_rho(rho)?;
    let eta_star = tuned_stepsize_smooth(sc, t)?;
    let rate_opt = tuned_rate_smooth(sc, t)?;
    let tau0 = compute_tau0(sc, t.schedule(), rho * eta_star)?;
    let tau_star = solve_optimal_tau(t, rho, tau0)?;
    let infimum_value = infimand(t, rho, tau_star)?;
    let bound_main = rate_opt * infimum_value;
    let sigma2 = sc.noise * sc.noise;
    let low_order = 4.0 * low_order_factor(t.schedule()) * rho * eta_star * sigma2 / sc.t();
    let d = sc.diameter;
    let unit = sc.smoothness * d * d / sc.t() + d * sc.noise / sc.t().sqrt();
    Ok(BoundReport {
        rho,
        tau_star,
        infimum_value,
        eta_star,
        rate_opt,
        bound_main,
        low_order,
        coefficient: bound_main / unit,
        tau_floor: tau0,
        branch: smooth_branch(t.schedule(), rho, tau0),
    })
}

/// Setting for [`coefficient_curve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundMode {
    Lipschitz(ProblemScales),
    Smooth(ProblemScales),
}

/// Bound reports over a grid of `rho`, evaluated in parallel and sorted by
/// `rho`.
pub fn coefficient_curve(
    t: &TailFunctions,
    rho_grid: &[f64],
    mode: BoundMode,
) -> Result<Vec<BoundReport>> {
    let mut rows = rho_grid
        .par_iter()
        .map(|&rho| match mode {
            BoundMode::Lipschitz(sc) => lipschitz_bound(&sc, t, rho),
            BoundMode::Smooth(sc) => smooth_bound(&sc, t, rho),
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.rho.total_cmp(&b.rho));
    Ok(rows)
}

/// Closed range `lo:hi` of misspecification factors, `1 <= lo <= hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoRange {
    pub lo: f64,
    pub hi: f64,
}

impl RhoRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        check_rho(lo)?;
        check_rho(hi)?;
        if lo > hi {
            return Err(Error::InvalidArgument(format!(
                "rho range {lo}:{hi} is empty"
            )));
        }
        Ok(Self { lo, hi })
    }

    /// `points` log-spaced values from `lo` to `hi` inclusive. A single
    /// point yields `lo`.
    pub fn geometric(&self, points: usize) -> Vec<f64> {
        match points {
            0 => Vec::new(),
            1 => vec![self.lo],
            n => {
                let (a, b) = (self.lo.ln(), self.hi.ln());
                (0..n)
                    .map(|i| match i {
                        0 => self.lo,
                        _ if i == n - 1 => self.hi,
                        // exp(ln x) can land an ulp outside the range.
                        _ => (a + (b - a) * i as f64 / (n - 1) as f64)
                            .exp()
                            .clamp(self.lo, self.hi),
                    })
                    .collect()
            }
        }
    }
}

/// Parses `lo:hi`, or a single value `x` meaning `x:x`.
impl FromStr for RhoRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let num = |x: &str| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad rho value `{x}` in `{s}`")))
        };
        let (lo, hi) = match s.split_once(':') {
            Some((a, b)) => (num(a)?, num(b)?),
            None => {
                let x = num(s)?;
                (x, x)
            }
        };
        Self::new(lo, hi)
    }
}

pub const CSV_HEADER: &str =
    "rho,tau_star,infimum,eta_star,rate_opt,bound_main,low_order,coefficient";

/// Renders reports as CSV with a header row and `\n` line endings.
pub fn reports_to_csv(rows: &[BoundReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.rho,
            r.tau_star,
            r.infimum_value,
            r.eta_star,
            r.rate_opt,
            r.bound_main,
            r.low_order,
            r.coefficient
        ));
    }
    out
}

pub fn reports_to_json(rows: &[BoundReport]) -> String {
    serde_json::to_string_pretty(rows).expect("reports serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin() -> TailFunctions {
        TailFunctions::analytic(Schedule::polynomial(1.0).unwrap()).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn tuned_stepsize_examples() {
        let t = lin();
        let sc = ProblemScales::lipschitz(1.0, 1.0, 100);
        assert!(close(
            tuned_stepsize_lipschitz(&sc, &t).unwrap(),
            0.05,
            1e-15
        ));
        let sc2 = ProblemScales::lipschitz(2.0, 1.0, 100);
        assert!(close(
            tuned_stepsize_lipschitz(&sc2, &t).unwrap(),
            0.1,
            1e-15
        ));
        let c = TailFunctions::analytic(Schedule::constant()).unwrap();
        assert!(matches!(
            tuned_stepsize_lipschitz(&sc, &c),
            Err(Error::Divergent { .. })
        ));
    }

    #[test]
    fn tuned_rate_examples() {
        let sc = ProblemScales::lipschitz(1.0, 1.0, 1);
        assert!(close(
            tuned_rate_lipschitz(&sc, &lin()).unwrap(),
            4.0,
            1e-14
        ));
        let cos = TailFunctions::analytic(Schedule::cosine()).unwrap();
        assert!(tuned_rate_lipschitz(&sc, &cos).unwrap() <= 10.0);
        let sc2 = ProblemScales::lipschitz(2.0, 1.0, 1);
        let (a, b) = (
            tuned_rate_lipschitz(&sc, &cos).unwrap(),
            tuned_rate_lipschitz(&sc2, &cos).unwrap(),
        );
        assert!(close(b, 2.0 * a, 1e-14));
    }

    #[test]
    fn residual_examples() {
        let t = lin();
        let root = 1.0 - 0.5f64.cbrt();
        assert!(stationarity_residual(&t, 2.0, root).unwrap().abs() <= 1e-10);
        assert!(close(
            stationarity_residual(&t, 1.0, 0.0).unwrap(),
            0.5,
            1e-15
        ));
        assert!(close(
            stationarity_residual(&t, 3.0, 1.0).unwrap(),
            1.0 / 9.0,
            1e-15
        ));
        assert!(stationarity_residual(&t, 0.5, 0.0).is_err());
    }

    #[test]
    fn optimal_tau_examples() {
        let t = lin();
        assert_eq!(solve_optimal_tau(&t, 1.0, 0.0).unwrap(), 0.0);
        let tau = solve_optimal_tau(&t, 2.0, 0.0).unwrap();
        assert!(close(tau, 1.0 - 0.5f64.cbrt(), 1e-12), "{tau}");
        let cos = TailFunctions::analytic(Schedule::cosine()).unwrap();
        let (a, b) = (
            solve_optimal_tau(&cos, 10.0, 0.0).unwrap(),
            solve_optimal_tau(&cos, 100.0, 0.0).unwrap(),
        );
        assert!(a < b && b < 1.0);
        // A floor above the root is returned unchanged.
        assert_eq!(solve_optimal_tau(&t, 2.0, 0.5).unwrap(), 0.5);
    }

    #[test]
    fn infimand_examples() {
        let t = lin();
        assert!(close(infimand(&t, 8.0, 0.75).unwrap(), 4.0, 1e-12));
        let cos = TailFunctions::analytic(Schedule::cosine()).unwrap();
        assert!(close(infimand(&cos, 1.0, 0.0).unwrap(), 2.0, 1e-12));
    }

    #[test]
    fn smooth_stepsize_examples() {
        let t = lin();
        let sc = ProblemScales::smooth(1.0, 1.0, 0.0, 100);
        assert_eq!(tuned_stepsize_smooth(&sc, &t).unwrap(), 0.5);
        // min{50, 1 / sqrt(2 * 100 * 0.5 * 2)}
        let sc = ProblemScales::smooth(1.0, 0.01, 1.0, 100);
        assert!(close(
            tuned_stepsize_smooth(&sc, &t).unwrap(),
            200f64.sqrt().recip(),
            1e-15
        ));
        let sc = ProblemScales::smooth(1.0, 1e9, 1.0, 100);
        assert_eq!(tuned_stepsize_smooth(&sc, &t).unwrap(), 0.5e-9);
    }

    #[test]
    fn tau0_examples() {
        let s = Schedule::polynomial(1.0).unwrap();
        let sc = ProblemScales::smooth(1.0, 1.0, 1.0, 100);
        assert_eq!(compute_tau0(&sc, &s, 0.5).unwrap(), 0.0);
        assert_eq!(compute_tau0(&sc, &s, 2.0 / 2.0).unwrap(), 0.5);
        let c = Schedule::constant();
        assert_eq!(compute_tau0(&sc, &c, 1.0), Err(Error::NoValidSuffix));
    }

    #[test]
    fn smooth_bound_at_rho_one() {
        let t = lin();
        let sc = ProblemScales::smooth(1.0, 1.0, 1.0, 100);
        let r = smooth_bound(&sc, &t, 1.0).unwrap();
        assert_eq!(r.tau_floor, 0.0);
        assert!(r.bound_main <= 2.0 * r.rate_opt * (1.0 + 1e-12));
    }

    #[test]
    fn rho_range_parsing() {
        let r: RhoRange = "1:50".parse().unwrap();
        assert_eq!((r.lo, r.hi), (1.0, 50.0));
        let g = r.geometric(3);
        assert_eq!(g[0], 1.0);
        assert_eq!(g[2], 50.0);
        assert!(close(g[1], 50f64.sqrt(), 1e-12));
        assert_eq!(" 2 ".parse::<RhoRange>().unwrap().geometric(1), vec![2.0]);
        // A degenerate range stays exactly on its single value.
        let r: RhoRange = "999".parse().unwrap();
        assert!(r.geometric(7).iter().all(|x| *x == 999.0));
        for bad in ["0.5:2", "3:2", "a:b", "", ":", "1:inf", "nan:2"] {
            assert!(bad.parse::<RhoRange>().is_err(), "{bad}");
        }
    }

    #[test]
    fn csv_layout() {
        let t = lin();
        let sc = ProblemScales::lipschitz(1.0, 1.0, 100);
        let rows = coefficient_curve(&t, &[2.0, 1.0], BoundMode::Lipschitz(sc)).unwrap();
        assert_eq!(rows[0].rho, 1.0);
        let csv = reports_to_csv(&rows);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1].split(',').count(), 8);
        let back: Vec<BoundReport> = serde_json::from_str(&reports_to_json(&rows)).unwrap();
        assert_eq!(back, rows);
    }
}
