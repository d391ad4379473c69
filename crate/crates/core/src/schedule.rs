//! Stepsize shapes `h: [0, 1] -> [0, 1]` and their tail functionals.
//!
//! For a shape `h` the tail mass is `H(v) = ∫_v^1 h(u) du` and the tail
//! integral is `I(v) = ∫_v^1 h(u)^2 / H(u) du`. The convergence bounds in
//! [`crate::bounds`] are written entirely in terms of these two functions.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_unit_interval, Error, Result};
use crate::numerics::{integrate_with, QuadratureOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleKind {
    /// `h(u) = 1`.
    Constant,
    /// `h(u) = (1 + cos(pi u)) / 2`.
    Cosine,
    /// `h(u) = (1 - u)^p` with `p >= 1`.
    PolynomialDecay(f64),
    /// `eta_t = eta / sqrt(t)`; has no shape on `[0, 1]`.
    InverseSqrtDiscrete,
}

/// A named stepsize shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    kind: ScheduleKind,
}

impl Schedule {
    pub const fn constant() -> Self {
        Self {
            kind: ScheduleKind::Constant,
        }
    }

    pub const fn cosine() -> Self {
        Self {
            kind: ScheduleKind::Cosine,
        }
    }

    /// Polynomial decay `(1 - u)^p`. Non-integer `p` is allowed.
    pub fn polynomial(p: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::Domain {
                name: "p",
                value: p,
                expected: "[1, inf)",
            });
        }
        Ok(Self {
            kind: ScheduleKind::PolynomialDecay(p),
        })
    }

    pub const fn inverse_sqrt() -> Self {
        Self {
            kind: ScheduleKind::InverseSqrtDiscrete,
        }
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    /// Lipschitz constant of `h`: `pi/2` for cosine, `p` for polynomial decay,
    /// `0` for the constant shape. The discrete inverse-sqrt rule has no
    /// shape and reports `0`.
    pub fn lipschitz(&self) -> f64 {
        match self.kind {
            ScheduleKind::Constant | ScheduleKind::InverseSqrtDiscrete => 0.0,
            ScheduleKind::Cosine => FRAC_PI_2,
            ScheduleKind::PolynomialDecay(p) => p,
        }
    }

    /// True iff `h` is non-increasing, differentiable and vanishes only at 1.
    pub fn is_annealed(&self) -> bool {
        matches!(
            self.kind,
            ScheduleKind::Cosine | ScheduleKind::PolynomialDecay(_)
        )
    }

    /// Order `q` of the zero of `h` at `u = 1`, i.e. `h(u) = Θ((1 - u)^q)`.
    /// Cosine decays quadratically at the end of training.
    pub fn tail_order(&self) -> Option<f64> {
        match self.kind {
            ScheduleKind::Cosine => Some(2.0),
            ScheduleKind::PolynomialDecay(p) => Some(p),
            _ => None,
        }
    }

    fn unsupported(&self, operation: &'static str) -> Error {
        Error::Unsupported {
            operation,
            schedule: self.to_string(),
        }
    }

    /// `h(u)`.
    pub fn eval(&self, u: f64) -> Result<f64> {
        check_unit_interval("u", u)?;
        match self.kind {
            ScheduleKind::Constant => Ok(1.0),
            // sin^2 of the distance to the end keeps precision near u = 1.
            ScheduleKind::Cosine => {
                let s = (FRAC_PI_2 * (1.0 - u)).sin();
                Ok(s * s)
            }
            ScheduleKind::PolynomialDecay(p) => Ok((1.0 - u).powf(p)),
            ScheduleKind::InverseSqrtDiscrete => Err(self.unsupported("eval_h")),
        }
    }

    /// `h'(u)`.
    pub fn derivative(&self, u: f64) -> Result<f64> {
        check_unit_interval("u", u)?;
        match self.kind {
            ScheduleKind::Constant => Ok(0.0),
            ScheduleKind::Cosine => Ok(-FRAC_PI_2 * (PI * (1.0 - u)).sin()),
            ScheduleKind::PolynomialDecay(p) => {
                if p == 1.0 {
                    Ok(-1.0)
                } else {
                    Ok(-p * (1.0 - u).powf(p - 1.0))
                }
            }
            ScheduleKind::InverseSqrtDiscrete => Err(self.unsupported("eval_h_prime")),
        }
    }

    // Shape as a function of the remaining fraction `w = 1 - u`. Working in
    // `w` keeps full relative precision near the end of training.
    pub(crate) fn h_remaining(&self, w: f64) -> f64 {
        match self.kind {
            ScheduleKind::Constant => 1.0,
            ScheduleKind::Cosine => {
                let s = (FRAC_PI_2 * w).sin();
                s * s
            }
            ScheduleKind::PolynomialDecay(p) => w.max(0.0).powf(p),
            ScheduleKind::InverseSqrtDiscrete => f64::NAN,
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ScheduleKind::Constant => f.write_str("constant"),
            ScheduleKind::Cosine => f.write_str("cosine"),
            ScheduleKind::PolynomialDecay(p) => write!(f, "poly:{p}"),
            ScheduleKind::InverseSqrtDiscrete => f.write_str("invsqrt"),
        }
    }
}

/// Parses `constant`, `cosine`, `poly:<p>` or `invsqrt`, case-insensitively.
impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "constant" => Ok(Self::constant()),
            "cosine" => Ok(Self::cosine()),
            "invsqrt" => Ok(Self::inverse_sqrt()),
            _ => {
                let Some(p) = t.strip_prefix("poly:") else {
                    return Err(Error::Parse(format!(
                        "unknown schedule `{s}` (expected constant, cosine, poly:<p> or invsqrt)"
                    )));
                };
                let p: f64 = p
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad polynomial degree in `{s}`")))?;
                Self::polynomial(p)
            }
        }
    }
}

impl Serialize for Schedule {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Schedule {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How tail functionals are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailMode {
    /// Closed forms where available, quadrature for the rest.
    Analytic,
    /// Everything by adaptive quadrature, nested for `I`.
    Quadrature { tolerance: f64 },
}

/// Upper end of the `I` quadrature; the integrand is at most `2p`, so the
/// dropped sliver contributes at most `2p * TAIL_EPS`.
pub const TAIL_EPS: f64 = 1e-12;

const DEFAULT_TOLERANCE: f64 = 1e-12;

/// Evaluator for `H(v)`, `H'(v) = -h(v)` and `I(v)`.
///
/// Construction precomputes `H(0)` and `I(0)`; the value is immutable
/// afterwards.
#[derive(Debug, Clone)]
pub struct TailFunctions {
    schedule: Schedule,
    mode: TailMode,
    mass_at_zero: f64,
    integral_at_zero: Option<f64>,
}

impl TailFunctions {
    pub fn new(schedule: Schedule, mode: TailMode) -> Result<Self> {
        if schedule.kind == ScheduleKind::InverseSqrtDiscrete {
            return Err(schedule.unsupported("tail functions"));
        }
        if let TailMode::Quadrature { tolerance } = mode {
            if !(tolerance > 0.0 && tolerance.is_finite()) {
                return Err(Error::Domain {
                    name: "tolerance",
                    value: tolerance,
                    expected: "(0, inf)",
                });
            }
        }
        let mut t = Self {
            schedule,
            mode,
            mass_at_zero: 0.0,
            integral_at_zero: None,
        };
        t.mass_at_zero = t.tail_mass(0.0)?;
        t.integral_at_zero = match t.tail_integral(0.0) {
            Ok(v) => Some(v),
            Err(Error::Divergent { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(t)
    }

    pub fn analytic(schedule: Schedule) -> Result<Self> {
        Self::new(schedule, TailMode::Analytic)
    }

    pub fn quadrature(schedule: Schedule, tolerance: f64) -> Result<Self> {
        Self::new(schedule, TailMode::Quadrature { tolerance })
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn mode(&self) -> TailMode {
        self.mode
    }

    /// `H(0)`.
    pub fn mass_at_zero(&self) -> f64 {
        self.mass_at_zero
    }

    /// `I(0)`, or the divergence error for non-annealed shapes.
    pub fn integral_at_zero(&self) -> Result<f64> {
        self.integral_at_zero.ok_or_else(|| Error::Divergent {
            schedule: self.schedule.to_string(),
        })
    }

    fn tolerance(&self) -> f64 {
        match self.mode {
            TailMode::Analytic => DEFAULT_TOLERANCE,
            TailMode::Quadrature { tolerance } => tolerance,
        }
    }

    /// `H(v) = ∫_v^1 h(u) du`.
    pub fn tail_mass(&self, v: f64) -> Result<f64> {
        check_unit_interval("v", v)?;
        Ok(self.mass_unchecked(v))
    }

    fn mass_unchecked(&self, v: f64) -> f64 {
        self.mass_remaining(1.0 - v)
    }

    /// `H` as a function of the remaining fraction: `∫_0^w h(1 - x) dx`.
    fn mass_remaining(&self, w: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        match (self.mode, self.schedule.kind) {
            (TailMode::Analytic, ScheduleKind::Constant) => w,
            (TailMode::Analytic, ScheduleKind::PolynomialDecay(p)) => w.powf(p + 1.0) / (p + 1.0),
            (TailMode::Analytic, ScheduleKind::Cosine) => cosine_mass(w),
            _ => {
                let s = self.schedule;
                // Relative accuracy keeps h^2 / H meaningful as H -> 0, and the
                // inner level must be well below the outer tolerance or the
                // outer refinement chases quadrature noise.
                let opts = QuadratureOptions::relative((1e-3 * self.tolerance()).max(1e-13));
                match integrate_with(|x| s.h_remaining(x), 0.0, w, &opts) {
                    Ok(r) => r.value,
                    Err(Error::QuadratureFailed { estimate, .. }) => estimate,
                    Err(_) => f64::NAN,
                }
            }
        }
    }

    /// `H'(v) = -h(v)`.
    pub fn tail_mass_derivative(&self, v: f64) -> Result<f64> {
        Ok(-self.schedule.eval(v)?)
    }

    /// `I(v) = ∫_v^1 h(u)^2 / H(u) du`.
    ///
    /// Returns [`Error::Divergent`] for the constant shape, whose integrand
    /// behaves like `1 / (1 - u)`.
    pub fn tail_integral(&self, v: f64) -> Result<f64> {
        check_unit_interval("v", v)?;
        if !self.schedule.is_annealed() {
            return Err(Error::Divergent {
                schedule: self.schedule.to_string(),
            });
        }
        if v >= 1.0 {
            return Ok(0.0);
        }
        if let (TailMode::Analytic, ScheduleKind::PolynomialDecay(p)) =
            (self.mode, self.schedule.kind)
        {
            return Ok((p + 1.0) / p * (1.0 - v).powf(p));
        }
        self.integrate_ratio(v, 1.0 - TAIL_EPS)
    }

    /// Signed `∫_a^b h(u)^2 / H(u) du` by quadrature, with `a, b` in `[0, 1)`.
    pub fn ratio_integral(&self, a: f64, b: f64) -> Result<f64> {
        check_unit_interval("a", a)?;
        check_unit_interval("b", b)?;
        if !self.schedule.is_annealed() {
            return Err(Error::Divergent {
                schedule: self.schedule.to_string(),
            });
        }
        if let (TailMode::Analytic, ScheduleKind::PolynomialDecay(p)) =
            (self.mode, self.schedule.kind)
        {
            let i = |x: f64| (p + 1.0) / p * (1.0 - x).powf(p);
            return Ok(i(a) - i(b));
        }
        let (lo, hi, sign) = if a <= b { (a, b, 1.0) } else { (b, a, -1.0) };
        Ok(sign * self.integrate_ratio(lo, hi.min(1.0 - TAIL_EPS))?)
    }

    // ∫_lo^hi h^2 / H du, evaluated in the remaining fraction w = 1 - u.
    fn integrate_ratio(&self, lo: f64, hi: f64) -> Result<f64> {
        if lo >= hi {
            return Ok(0.0);
        }
        let s = self.schedule;
        let integrand = |w: f64| {
            let h = s.h_remaining(w);
            let mass = self.mass_remaining(w);
            if mass > 0.0 && mass.is_finite() {
                h * h / mass
            } else {
                0.0
            }
        };
        let w_lo = (1.0 - hi).max(TAIL_EPS);
        let w_hi = 1.0 - lo;
        if w_lo >= w_hi {
            return Ok(0.0);
        }
        let opts = QuadratureOptions::absolute(self.tolerance());
        Ok(integrate_with(integrand, w_lo, w_hi, &opts)?.value)
    }
}

/// `∫_{1-w}^1 (1 + cos(pi u)) / 2 du = (pi w - sin(pi w)) / (2 pi)`, with a
/// series for small `w` to avoid cancellation.
fn cosine_mass(w: f64) -> f64 {
    let x = PI * w;
    if x < 0.5 {
        // x - sin x = x^3/3! - x^5/5! + x^7/7! - ...
        let x2 = x * x;
        let mut term = x * x2 / 6.0;
        let mut sum = term;
        let mut n = 3.0;
        while term.abs() > 1e-18 * sum.abs() && n < 40.0 {
            term *= -x2 / ((n + 1.0) * (n + 2.0));
            sum += term;
            n += 2.0;
        }
        sum / (2.0 * PI)
    } else {
        (x - x.sin()) / (2.0 * PI)
    }
}
