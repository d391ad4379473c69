//! Adaptive Simpson quadrature and a safeguarded bracketing root finder.
//!
//! Both routines are plain functions over caller-supplied closures and keep
//! no state between calls.

use crate::error::{Error, Result};

/// Outcome of a successful integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    /// Sum of the per-panel Richardson error estimates.
    pub error_estimate: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    pub abs_tol: f64,
    /// Tolerance relative to a coarse estimate of the integral; the effective
    /// tolerance is `max(abs_tol, rel_tol * |coarse|)`.
    pub rel_tol: f64,
    pub max_depth: usize,
    pub max_evaluations: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 0.0,
            max_depth: 60,
            max_evaluations: 5_000_000,
        }
    }
}

impl QuadratureOptions {
    pub fn absolute(tol: f64) -> Self {
        Self {
            abs_tol: tol,
            ..Self::default()
        }
    }

    pub fn relative(tol: f64) -> Self {
        Self {
            abs_tol: 0.0,
            rel_tol: tol,
            ..Self::default()
        }
    }
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<QuadratureResult> {
    integrate_with(f, a, b, &QuadratureOptions::absolute(tol))
}

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
}

struct Simpson<'f, F> {
    f: &'f F,
    evaluations: usize,
    max_evaluations: usize,
    max_depth: usize,
    exhausted: bool,
}

impl<F: Fn(f64) -> f64> Simpson<'_, F> {
    fn eval(&mut self, x: f64) -> f64 {
        self.evaluations += 1;
        (self.f)(x)
    }

    // Returns (value, error estimate).
    fn refine(&mut self, p: Panel) -> (f64, f64) {
        let m = 0.5 * (p.a + p.b);
        let lm = 0.5 * (p.a + m);
        let rm = 0.5 * (m + p.b);
        let flm = self.eval(lm);
        let frm = self.eval(rm);
        let h = p.b - p.a;
        let left = h / 12.0 * (p.fa + 4.0 * flm + p.fm);
        let right = h / 12.0 * (p.fm + 4.0 * frm + p.fb);
        let refined = left + right;
        let delta = refined - p.whole;
        let err = delta.abs() / 15.0;
        let at_roundoff = delta.abs() <= 8.0 * f64::EPSILON * refined.abs() || m <= p.a || m >= p.b;
        if err <= p.tol || at_roundoff {
            return (refined + delta / 15.0, err);
        }
        if p.depth >= self.max_depth || self.evaluations >= self.max_evaluations {
            self.exhausted = true;
            return (refined + delta / 15.0, err);
        }
        let (lv, le) = self.refine(Panel {
            a: p.a,
            b: m,
            fa: p.fa,
            fm: flm,
            fb: p.fm,
            whole: left,
            tol: 0.5 * p.tol,
            depth: p.depth + 1,
        });
        let (rv, re) = self.refine(Panel {
            a: m,
            b: p.b,
            fa: p.fm,
            fm: frm,
            fb: p.fb,
            whole: right,
            tol: 0.5 * p.tol,
            depth: p.depth + 1,
        });
        (lv + rv, le + re)
    }
}

/// Adaptive Simpson quadrature with Richardson extrapolation.
///
/// Panels are halved until `|S2 - S1| / 15` drops below the panel's share of
/// the tolerance. Running past `max_depth` or `max_evaluations` fails with
/// the best estimate attached.
pub fn integrate_with<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    opts: &QuadratureOptions,
) -> Result<QuadratureResult> {
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(Error::InvalidArgument(format!(
            "integration bounds must satisfy a <= b, got [{a}, {b}]"
        )));
    }
    if !(opts.abs_tol >= 0.0 && opts.rel_tol >= 0.0) || opts.abs_tol + opts.rel_tol <= 0.0 {
        return Err(Error::InvalidArgument(
            "quadrature tolerance must be positive".into(),
        ));
    }
    if a == b {
        return Ok(QuadratureResult {
            value: 0.0,
            error_estimate: 0.0,
            evaluations: 1,
        });
    }
    let mut s = Simpson {
        f: &f,
        evaluations: 0,
        max_evaluations: opts.max_evaluations,
        max_depth: opts.max_depth,
        exhausted: false,
    };
    let fa = s.eval(a);
    let fm = s.eval(0.5 * (a + b));
    let fb = s.eval(b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let tol = opts.abs_tol.max(opts.rel_tol * whole.abs());
    // An all-zero coarse estimate with a pure relative tolerance would accept
    // anything; fall back to a tiny absolute floor.
    let tol = if tol > 0.0 { tol } else { f64::MIN_POSITIVE };
    let (value, error_estimate) = s.refine(Panel {
        a,
        b,
        fa,
        fm,
        fb,
        whole,
        tol,
        depth: 0,
    });
    if !value.is_finite() {
        return Err(Error::QuadratureFailed {
            estimate: value,
            error_estimate,
        });
    }
    if s.exhausted {
        return Err(Error::QuadratureFailed {
            estimate: value,
            error_estimate,
        });
    }
    Ok(QuadratureResult {
        value,
        error_estimate,
        evaluations: s.evaluations,
    })
}

/// Outcome of a successful root search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootResult {
    pub root: f64,
    /// `f(root)`.
    pub residual: f64,
    pub iterations: usize,
    /// Width of the final bracket.
    pub bracket_width: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    /// Stop once `|f(x)| <= f_tol`.
    pub f_tol: f64,
    /// Stop once the bracket is narrower than `x_tol`.
    pub x_tol: f64,
    pub max_iter: usize,
}

impl RootOptions {
    pub fn new(tol: f64) -> Self {
        Self {
            f_tol: tol,
            x_tol: tol,
            max_iter: 200,
        }
    }
}

/// Finds a root of `f` in `[lo, hi]`; see [`find_root_with`].
pub fn find_root<F: FnMut(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<RootResult> {
    find_root_with(f, lo, hi, &RootOptions::new(tol))
}

/// Secant steps guarded by bisection.
///
/// The bracket `[a, b]` always satisfies `f(a) * f(b) <= 0`. A secant
/// candidate is taken only when it lands strictly inside the bracket and the
/// previous step at least halved the bracket; otherwise the midpoint is used.
/// The returned point is always inside the initial bracket.
pub fn find_root_with<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    opts: &RootOptions,
) -> Result<RootResult> {
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::InvalidArgument(format!(
            "root bracket must satisfy lo <= hi, got [{lo}, {hi}]"
        )));
    }
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa.is_nan() || fb.is_nan() || fa * fb > 0.0 {
        return Err(Error::BracketViolation {
            lo,
            hi,
            f_lo: fa,
            f_hi: fb,
        });
    }
    let done = |x: f64, fx: f64, width: f64, it: usize| RootResult {
        root: x,
        residual: fx,
        iterations: it,
        bracket_width: width,
    };
    if fa == 0.0 {
        return Ok(done(a, fa, b - a, 0));
    }
    if fb == 0.0 {
        return Ok(done(b, fb, b - a, 0));
    }
    let mut last_width = b - a;
    for it in 1..=opts.max_iter {
        let width = b - a;
        let best = if fa.abs() <= fb.abs() {
            (a, fa)
        } else {
            (b, fb)
        };
        if best.1.abs() <= opts.f_tol || width <= opts.x_tol {
            return Ok(done(best.0, best.1, width, it - 1));
        }
        let mid = a + 0.5 * width;
        let secant = b - fb * (b - a) / (fb - fa);
        let x = if secant.is_finite() && secant > a && secant < b && width <= 0.5 * last_width {
            secant
        } else {
            mid
        };
        // The first iteration compares against the full width, so it always
        // bisects; after that a secant step is allowed only on good progress.
        last_width = width;
        let fx = f(x);
        if fx.is_nan() {
            return Err(Error::RootFailed {
                lo: a,
                hi: b,
                iterations: it,
            });
        }
        if fx == 0.0 {
            return Ok(done(x, fx, b - a, it));
        }
        if (fx < 0.0) == (fa < 0.0) {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
    }
    let width = b - a;
    let best = if fa.abs() <= fb.abs() {
        (a, fa)
    } else {
        (b, fb)
    };
    if best.1.abs() <= opts.f_tol || width <= opts.x_tol {
        return Ok(done(best.0, best.1, width, opts.max_iter));
    }
    Err(Error::RootFailed {
        lo: a,
        hi: b,
        iterations: opts.max_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_integrand() {
        let r = integrate(|_| 1.0, 0.0, 1.0, 1e-10).unwrap();
        assert!((r.value - 1.0).abs() < 1e-14);
        assert!(r.error_estimate <= 1e-10);
    }

    #[test]
    fn squared_decay() {
        let r = integrate(|u| (1.0 - u) * (1.0 - u), 0.0, 1.0, 1e-10).unwrap();
        assert!((r.value - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn cosine_shape_has_half_mass() {
        let r = integrate(|u| 0.5 * (1.0 + (PI * u).cos()), 0.0, 1.0, 1e-10).unwrap();
        assert!((r.value - 0.5).abs() < 1e-10);
    }

    #[test]
    fn empty_interval_is_zero() {
        let r = integrate(|u| u.exp(), 2.0, 2.0, 1e-10).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn reversed_bounds_rejected() {
        assert!(matches!(
            integrate(|u| u, 1.0, 0.0, 1e-10),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn depth_exhaustion_reports_estimate() {
        let opts = QuadratureOptions {
            max_depth: 2,
            ..QuadratureOptions::absolute(1e-14)
        };
        match integrate_with(|u| (50.0 * u).sin(), 0.0, 1.0, &opts) {
            Err(Error::QuadratureFailed { estimate, .. }) => assert!(estimate.is_finite()),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn relative_tolerance_resolves_tiny_integrals() {
        // (1 - u)^6 on [1 - 1e-3, 1] integrates to 1e-21 / 7.
        let a = 1.0 - 1e-3;
        let r = integrate_with(
            |u: f64| (1.0 - u).powi(6),
            a,
            1.0,
            &QuadratureOptions::relative(1e-12),
        )
        .unwrap();
        let exact = (1.0 - a).powi(7) / 7.0;
        assert!(((r.value - exact) / exact).abs() < 1e-10);
    }

    #[test]
    fn sqrt_two() {
        let r = find_root(|x| x * x - 2.0, 0.0, 2.0, 1e-12).unwrap();
        assert!((r.root - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn identity_root_at_zero() {
        let r = find_root(|x| x, -1.0, 1.0, 1e-12).unwrap();
        assert!(r.root.abs() <= 1e-12);
    }

    #[test]
    fn root_on_endpoint() {
        let r = find_root(|x| x - 1.0, 0.0, 1.0, 1e-12).unwrap();
        assert_eq!(r.root, 1.0);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn bracket_violation() {
        assert!(matches!(
            find_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12),
            Err(Error::BracketViolation { .. })
        ));
    }

    #[test]
    fn iteration_cap_reports_bracket() {
        let opts = RootOptions {
            f_tol: 0.0,
            x_tol: 0.0,
            max_iter: 3,
        };
        match find_root_with(|x| x.powi(3) - 0.3, 0.0, 1.0, &opts) {
            Err(Error::RootFailed { lo, hi, .. }) => assert!(lo < hi && lo >= 0.0 && hi <= 1.0),
            other => panic!("expected failure, got {other:?}"),
        }
    }
}
