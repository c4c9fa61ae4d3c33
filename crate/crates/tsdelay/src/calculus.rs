//! Regressivity, the scale exponential, and delay-aware integral identities.
//!
//! The exponential `e_p(t, s)` is the product of `1 + mu*p` over
//! right-scattered points times `exp` of the plain integral over dense
//! stretches. For merely regressive `p` (some `1 + mu*p < 0`) the product is
//! signed; positively regressive `p` gives a positive exponential. Backward
//! arguments use the reciprocal law `e_p(t, s) = 1 / e_p(s, t)`.

use std::sync::Arc;

use thiserror::Error;

use crate::scale::{simpson_refined, GridFunction, ScaleError, ScaleKind, TimeScale, SNAP_TOL};
use crate::shift::{DelayFunction, ShiftError};

/// `1 + mu*p` values with magnitude below this are treated as zero.
const REGRESSIVITY_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CalculusError {
    #[error("1 + mu(t)p(t) vanishes at t = {0}; p is not regressive there")]
    NotRegressiveAt(f64),
    #[error("the grid function is zero at t = {0}")]
    ZeroValueAt(f64),
    #[error("sign change across a right-dense point t = {0}")]
    DenseSignChange(f64),
    #[error("point {0} is outside the operation's domain")]
    OutOfDomain(f64),
    #[error(transparent)]
    Shift(#[from] ShiftError),
    #[error(transparent)]
    Scale(#[from] ScaleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressivityClass {
    /// `1 + mu*p` nonzero but of mixed sign.
    Regressive,
    /// `1 + mu*p > 0` everywhere sampled.
    PositivelyRegressive,
}

/// A scalar coefficient on a scale, with its regressivity class cached once
/// classified over a horizon.
#[derive(Clone)]
pub struct RegressiveFunction {
    scale: TimeScale,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    class: Option<RegressivityClass>,
}

impl RegressiveFunction {
    pub fn new(scale: TimeScale, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        RegressiveFunction { scale, f: Arc::new(f), class: None }
    }

    pub fn value(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    pub fn scale(&self) -> &TimeScale {
        &self.scale
    }

    pub fn class(&self) -> Option<RegressivityClass> {
        self.class
    }

    /// Samples `[from, to]` and caches whether `1 + mu*p` stays nonzero
    /// (regressive) or positive (positively regressive).
    pub fn classify_on(
        &mut self,
        from: f64,
        to: f64,
        real_step: f64,
    ) -> Result<RegressivityClass, CalculusError> {
        let grid = self.scale.grid(from, to, real_step)?;
        let mut positive = true;
        for &t in &grid {
            let Ok((_, mu)) = self.scale.jump(t) else { continue };
            let v = 1.0 + mu * self.value(t);
            if v.abs() <= REGRESSIVITY_TOL {
                return Err(CalculusError::NotRegressiveAt(t));
            }
            if v < 0.0 {
                positive = false;
            }
        }
        let class = if positive {
            RegressivityClass::PositivelyRegressive
        } else {
            RegressivityClass::Regressive
        };
        self.class = Some(class);
        Ok(class)
    }
}

/// `(circle-minus p)(t) = -p(t) / (1 + mu(t) p(t))`.
pub fn circle_minus(p: &RegressiveFunction, t: f64) -> Result<f64, CalculusError> {
    let (_, mu) = p.scale().jump(t)?;
    let v = p.value(t);
    let denom = 1.0 + mu * v;
    if denom.abs() <= REGRESSIVITY_TOL {
        return Err(CalculusError::NotRegressiveAt(t));
    }
    Ok(-v / denom)
}

fn exp_forward(
    scale: &TimeScale,
    f: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
) -> Result<f64, CalculusError> {
    if matches!(scale.kind(), ScaleKind::QLattice { .. }) && lo == 0.0 && hi > 0.0 {
        return Err(CalculusError::Scale(ScaleError::InfiniteGrid(lo, hi)));
    }
    let mut acc = 1.0;
    let mut cur = lo;
    while hi - cur > SNAP_TOL {
        let (sig, mu) = scale.jump(cur)?;
        if mu > 0.0 {
            let factor = 1.0 + mu * f(cur);
            if factor.abs() <= REGRESSIVITY_TOL {
                return Err(CalculusError::NotRegressiveAt(cur));
            }
            acc *= factor;
            cur = sig;
        } else {
            let end = scale.dense_run_end(cur).min(hi);
            debug_assert!(end > cur);
            acc *= simpson_refined(f, cur, end, scale.quad_tol()).exp();
            cur = end;
        }
    }
    Ok(acc)
}

/// The scale exponential `e_p(t, s)`.
pub fn ts_exponential(p: &RegressiveFunction, t: f64, s: f64) -> Result<f64, CalculusError> {
    let scale = p.scale();
    let t = scale.snap(t).ok_or(ScaleError::PointNotInScale(t))?;
    let s = scale.snap(s).ok_or(ScaleError::PointNotInScale(s))?;
    if (t - s).abs() <= SNAP_TOL {
        return Ok(1.0);
    }
    let f = |u: f64| p.value(u);
    if t > s {
        exp_forward(scale, &f, s, t)
    } else {
        Ok(1.0 / exp_forward(scale, &f, t, s)?)
    }
}

/// The window integral `int_{delta_minus(h,t)}^{t} f` evaluated through the
/// substitution identity: shift the first piece back to the history window,
///
/// `int_t^{t0} f(delta_minus(h,s)) delta_minus^Delta(h,s) Delta s
///  + int_{delta_minus(h,t0)}^{t} f(s) Delta s`.
pub fn delayed_integral_split(
    df: &DelayFunction,
    f: &dyn Fn(f64) -> f64,
    t: f64,
) -> Result<f64, CalculusError> {
    let t0 = df.t0();
    if t < t0 - SNAP_TOL {
        return Err(CalculusError::OutOfDomain(t));
    }
    let scale = df.scale();
    let shifted = |s: f64| -> f64 {
        match (df.delayed(s), df.delta_derivative(s)) {
            (Ok(d), Ok(dd)) => f(d) * dd,
            _ => f64::NAN,
        }
    };
    let first = scale.delta_integral(&shifted, t, t0)?;
    let second = scale.delta_integral(f, df.delayed(t0)?, t)?;
    let total = first + second;
    if total.is_finite() {
        Ok(total)
    } else {
        Err(CalculusError::OutOfDomain(t))
    }
}

/// Delta derivative at `t` of `g(t) = int_{delta_minus(h,t)}^{t} f(t, s) Delta s`
/// for a two-variable kernel, by the Leibniz rule specialized to the delay
/// window:
///
/// `g^Delta(t) = f(sigma(t), t) - f(sigma(t), delta_minus(h,t)) * delta_minus^Delta(h,t)
///  + int_{delta_minus(h,t)}^{t} f^Delta_t(t, s) Delta s`.
pub fn leibniz_delay_derivative(
    df: &DelayFunction,
    f: &dyn Fn(f64, f64) -> f64,
    f_delta_t: &dyn Fn(f64, f64) -> f64,
    t: f64,
) -> Result<f64, CalculusError> {
    if t < df.t0() - SNAP_TOL {
        return Err(CalculusError::OutOfDomain(t));
    }
    let scale = df.scale();
    let (sig, _) = scale.jump(t)?;
    let delayed = df.delayed(t)?;
    let boundary = f(sig, t) - f(sig, delayed) * df.delta_derivative(t)?;
    let interior = scale.delta_integral(&|s| f_delta_t(t, s), delayed, t)?;
    Ok(boundary + interior)
}

/// Both sides of the double-integral interchange over the delay window:
/// `lhs = int_{delta_minus(h,t)}^t [ int_s^t k(u) Delta u ] Delta s` nested,
/// `rhs = int_{delta_minus(h,t)}^t (sigma(u) - delta_minus(h,t)) k(u) Delta u`.
pub fn interchange_double(
    df: &DelayFunction,
    k: &dyn Fn(f64) -> f64,
    t: f64,
) -> Result<(f64, f64), CalculusError> {
    if t < df.t0() - SNAP_TOL {
        return Err(CalculusError::OutOfDomain(t));
    }
    let scale = df.scale();
    let lo = df.delayed(t)?;
    let inner = |s: f64| scale.delta_integral(k, s, t).unwrap_or(f64::NAN);
    let lhs = scale.delta_integral(&inner, lo, t)?;
    let rhs = scale.delta_integral(
        &|u| {
            let sig = scale.jump(u).map(|(s, _)| s).unwrap_or(f64::NAN);
            (sig - lo) * k(u)
        },
        lo,
        t,
    )?;
    if lhs.is_finite() && rhs.is_finite() {
        Ok((lhs, rhs))
    } else {
        Err(CalculusError::OutOfDomain(t))
    }
}

/// Delta derivative of `|x|` at a grid point, split by the sign of
/// `x(t) x(sigma(t))`:
///
/// - same sign: `sign(x(t)) x^Delta(t)`;
/// - opposite signs (right-scattered only): `-(2/mu)|x(t)| - sign(x(t)) x^Delta(t)`,
///   which equals the exact quotient `(|x(sigma(t))| - |x(t)|) / mu`.
pub fn abs_delta_derivative(x: &GridFunction, t: f64) -> Result<f64, CalculusError> {
    let scale = x.scale().clone();
    let i = x
        .index_of(t)
        .ok_or(ScaleError::PointNotInScale(t))?;
    let t = x.points()[i];
    let xt = x.values()[i];
    if xt == 0.0 {
        return Err(CalculusError::ZeroValueAt(t));
    }
    if i + 1 >= x.len() {
        return Err(CalculusError::OutOfDomain(t));
    }
    let (_, mu) = scale.jump(t)?;
    let pts = x.points();
    let vals = x.values();
    let sign = xt.signum();
    if mu > 0.0 {
        let xd = (vals[i + 1] - xt) / mu;
        if xt * vals[i + 1] >= 0.0 {
            Ok(sign * xd)
        } else {
            Ok(-(2.0 / mu) * xt.abs() - sign * xd)
        }
    } else {
        if xt * vals[i + 1] < 0.0 {
            return Err(CalculusError::DenseSignChange(t));
        }
        // central difference over the flanking grid points where possible
        let xd = if i > 0 {
            (vals[i + 1] - vals[i - 1]) / (pts[i + 1] - pts[i - 1])
        } else {
            (vals[i + 1] - xt) / (pts[i + 1] - t)
        };
        Ok(sign * xd)
    }
}
