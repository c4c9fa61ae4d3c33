//! Shift operators and delay functions.
//!
//! A shift system pairs a time scale with a family of backward/forward
//! operators `delta_minus(s, t)`, `delta_plus(s, t)` associated with an
//! initial point `t0`. Shift sizes `s` range over `[t0, oo)` on the scale;
//! the operators act on the scale minus an optional *sticky point* `t*`
//! (a fixed point of every shift, e.g. `0` for the scaling family).
//!
//! The operator families themselves live in [`builtins`] behind the
//! [`ShiftOps`] trait and are selected by name through [`builtin_shift`];
//! [`verify::verify_axioms`] checks every defining axiom by sampling, and
//! treats failures as report data rather than errors, so deliberately broken
//! or incompatible systems are first-class inputs.

pub mod builtins;
pub mod verify;

use std::sync::Arc;

use thiserror::Error;

use crate::scale::{ScaleError, TimeScale, SNAP_TOL};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ShiftError {
    #[error("shift size {s} with point {t} is outside the operator domain")]
    OutOfDomain { s: f64, t: f64 },
    #[error("shift of ({s}, {t}) lands on the sticky point {sticky}")]
    StickyPointViolation { s: f64, t: f64, sticky: f64 },
    #[error("shift of ({s}, {t}) produced {result}, which is not on the scale")]
    ResultLeavesScale { s: f64, t: f64, result: f64 },
    #[error("axiom sweep found {got} admissible sample pairs; at least {needed} required")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("initial point {0} rejected: {1}")]
    BadInitialPoint(f64, String),
    #[error("delay size {0} rejected: {1}")]
    BadDelay(f64, String),
    #[error(transparent)]
    Scale(#[from] ScaleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftDir {
    Minus,
    Plus,
}

impl ShiftDir {
    pub fn opposite(self) -> ShiftDir {
        match self {
            ShiftDir::Minus => ShiftDir::Plus,
            ShiftDir::Plus => ShiftDir::Minus,
        }
    }
}

/// One family of shift operators, independent of any particular scale.
///
/// `apply` returns the raw formula value, or `None` when `(s, t)` lies
/// outside the family's claimed domain. Whether the value actually lands on
/// the scale (the closure part of the domain definition) is checked by the
/// owning [`ShiftSystem`].
pub trait ShiftOps: Send + Sync {
    fn name(&self) -> &str;

    /// The initial point `t0` the family is associated with.
    fn initial_point(&self) -> f64;

    /// Fixed point of every shift, excluded from the operator's codomain.
    fn sticky_point(&self) -> Option<f64> {
        None
    }

    fn apply(&self, dir: ShiftDir, s: f64, t: f64) -> Option<f64>;

    /// Exact derivative of `t -> delta_minus(h, t)` when the family knows it
    /// in closed form on the working horizon `[delta_minus(h,t0), oo)`.
    fn closed_form_delay_derivative(&self, _h: f64, _t: f64) -> Option<f64> {
        None
    }
}

/// A shift-operator family bound to a concrete time scale.
#[derive(Clone)]
pub struct ShiftSystem {
    scale: TimeScale,
    ops: Arc<dyn ShiftOps>,
}

impl std::fmt::Debug for ShiftSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShiftSystem")
            .field("ops", &self.ops.name())
            .field("t0", &self.t0())
            .field("scale", &self.scale)
            .finish()
    }
}

impl ShiftSystem {
    pub fn new(scale: TimeScale, ops: Arc<dyn ShiftOps>) -> Result<Self, ShiftError> {
        let t0 = ops.initial_point();
        if !scale.contains(t0) {
            return Err(ShiftError::BadInitialPoint(
                t0,
                "initial point is not on the scale".into(),
            ));
        }
        if let Some(st) = ops.sticky_point() {
            if (st - t0).abs() <= SNAP_TOL {
                return Err(ShiftError::BadInitialPoint(
                    t0,
                    "initial point coincides with the sticky point".into(),
                ));
            }
        }
        Ok(ShiftSystem { scale, ops })
    }

    pub fn scale(&self) -> &TimeScale {
        &self.scale
    }

    pub fn t0(&self) -> f64 {
        self.ops.initial_point()
    }

    pub fn sticky_point(&self) -> Option<f64> {
        self.ops.sticky_point()
    }

    pub fn ops(&self) -> &Arc<dyn ShiftOps> {
        &self.ops
    }

    pub fn name(&self) -> &str {
        self.ops.name()
    }

    // Sticky comparison is exact: a snapped lattice point near the sticky
    // value (e.g. q^-30 next to 0) is still a working point.
    fn is_working_point(&self, t: f64) -> Option<f64> {
        let t = self.scale.snap(t)?;
        match self.ops.sticky_point() {
            Some(st) if t == st => None,
            _ => Some(t),
        }
    }

    /// Raw formula value without codomain validation; used by the axiom
    /// verifier to detect closure failures.
    pub(crate) fn raw_shift(&self, dir: ShiftDir, s: f64, t: f64) -> Option<f64> {
        self.ops.apply(dir, s, t)
    }

    /// Validated shift: checks `s in [t0, oo)` on the scale, `t` on the scale
    /// and distinct from the sticky point, applies the operator, and snaps
    /// the result back onto the scale.
    pub fn shift(&self, dir: ShiftDir, s: f64, t: f64) -> Result<f64, ShiftError> {
        let s = self
            .scale
            .snap(s)
            .filter(|s| *s >= self.t0() - SNAP_TOL)
            .ok_or(ShiftError::OutOfDomain { s, t })?;
        let t = self.is_working_point(t).ok_or(ShiftError::OutOfDomain { s, t })?;
        let raw = self.ops.apply(dir, s, t).ok_or(ShiftError::OutOfDomain { s, t })?;
        let snapped = self
            .scale
            .snap(raw)
            .ok_or(ShiftError::ResultLeavesScale { s, t, result: raw })?;
        if let Some(st) = self.ops.sticky_point() {
            if snapped == st {
                return Err(ShiftError::StickyPointViolation { s, t, sticky: st });
            }
        }
        Ok(snapped)
    }

    /// New system with the same operator formulas rebased to the initial
    /// point `lam`: `delta'_(-)(s,t) = delta_plus(lam, delta_minus(s,t))` and
    /// symmetrically for the forward operator.
    pub fn rebase_initial_point(&self, lam: f64) -> Result<ShiftSystem, ShiftError> {
        let lam = self
            .scale
            .snap(lam)
            .ok_or(ShiftError::BadInitialPoint(lam, "not on the scale".into()))?;
        if lam <= self.t0() + SNAP_TOL {
            return Err(ShiftError::BadInitialPoint(
                lam,
                format!("must lie strictly above the current initial point {}", self.t0()),
            ));
        }
        let ops = Arc::new(builtins::RebasedOps::new(Arc::clone(&self.ops), lam));
        ShiftSystem::new(self.scale.clone(), ops)
    }
}

/// Names of the built-in shift families accepted by [`builtin_shift`].
///
/// `broken-difference` deliberately violates closure on multiplicative
/// lattices; it exists as a negative fixture for the axiom verifier.
pub const BUILTIN_SHIFTS: [&str; 4] = ["translation", "scaling", "quadratic", "broken-difference"];

/// Construct a built-in shift family by name on the given scale.
pub fn builtin_shift(name: &str, scale: &TimeScale) -> Result<ShiftSystem, ShiftError> {
    let ops: Arc<dyn ShiftOps> = match name {
        "translation" => Arc::new(builtins::TranslationOps),
        "scaling" => Arc::new(builtins::ScalingOps),
        "quadratic" => Arc::new(builtins::QuadraticOps),
        "broken-difference" => Arc::new(builtins::BrokenDifferenceOps),
        other => {
            return Err(ShiftError::BadInitialPoint(
                f64::NAN,
                format!("unknown shift family '{other}' (expected one of {BUILTIN_SHIFTS:?})"),
            ))
        }
    };
    ShiftSystem::new(scale.clone(), ops)
}

/// A backward shift with a fixed size `h`, acting as the delay
/// `t -> delta_minus(h, t)`.
#[derive(Debug, Clone)]
pub struct DelayFunction {
    system: ShiftSystem,
    h: f64,
    derivative_bound: Option<f64>,
}

impl DelayFunction {
    /// Requires `h` to be a scale point strictly above the initial point.
    pub fn new(system: ShiftSystem, h: f64) -> Result<Self, ShiftError> {
        let h = system
            .scale()
            .snap(h)
            .ok_or(ShiftError::BadDelay(h, "not on the scale".into()))?;
        if h <= system.t0() + SNAP_TOL {
            return Err(ShiftError::BadDelay(
                h,
                format!("must lie strictly above the initial point {}", system.t0()),
            ));
        }
        Ok(DelayFunction { system, h, derivative_bound: None })
    }

    /// Overrides the computed bound on the delay derivative.
    pub fn with_derivative_bound(mut self, m: f64) -> Self {
        assert!(m > 0.0, "derivative bound must be positive");
        self.derivative_bound = Some(m);
        self
    }

    pub fn system(&self) -> &ShiftSystem {
        &self.system
    }

    pub fn scale(&self) -> &TimeScale {
        self.system.scale()
    }

    pub fn t0(&self) -> f64 {
        self.system.t0()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// `delta_minus(h, t)`.
    pub fn delayed(&self, t: f64) -> Result<f64, ShiftError> {
        self.system.shift(ShiftDir::Minus, self.h, t)
    }

    /// `delta_plus(h, t)`, the inverse of the delay.
    pub fn advanced(&self, t: f64) -> Result<f64, ShiftError> {
        self.system.shift(ShiftDir::Plus, self.h, t)
    }

    /// Lag length `beta(t) = t - delta_minus(h, t)`.
    pub fn beta(&self, t: f64) -> Result<f64, ShiftError> {
        Ok(t - self.delayed(t)?)
    }

    /// Derivative of the delay map at `t`: the family's closed form when
    /// available, otherwise the forward quotient on right-scattered points
    /// and a finite difference on right-dense ones.
    pub fn delta_derivative(&self, t: f64) -> Result<f64, ShiftError> {
        if let Some(v) = self.system.ops().closed_form_delay_derivative(self.h, t) {
            return Ok(v);
        }
        let (sig, mu) = self.system.scale().jump(t)?;
        if mu > 0.0 {
            return Ok((self.delayed(sig)? - self.delayed(t)?) / mu);
        }
        let v = self
            .system
            .scale()
            .delta_derivative(&|u| self.delayed(u).unwrap_or(f64::NAN), t)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ShiftError::OutOfDomain { s: self.h, t })
        }
    }

    /// Bound `M >= sup |delta_minus^Delta(h, .)|` over `[t0, horizon]`,
    /// either user-supplied or estimated from a 256-point sweep.
    pub fn derivative_bound(&self, horizon: f64) -> Result<f64, ShiftError> {
        if let Some(m) = self.derivative_bound {
            return Ok(m);
        }
        let t0 = self.t0();
        let step = ((horizon - t0) / 256.0).max(1e-6);
        let grid = self.system.scale().grid(t0, horizon, step)?;
        let mut m: f64 = 0.0;
        for &t in &grid {
            match self.delta_derivative(t) {
                Ok(d) => m = m.max(d.abs()),
                // the supremum ignores the scale's right endpoint
                Err(ShiftError::Scale(ScaleError::AtSupremum(_))) => {}
                Err(e) => return Err(e),
            }
        }
        if m > 0.0 {
            Ok(m)
        } else {
            Err(ShiftError::BadDelay(self.h, "delay derivative vanished on the horizon".into()))
        }
    }

    /// True when no scale point lies strictly between `t0` and `h`, i.e. the
    /// delay advances exactly one grid step at a time. Verified against
    /// `sigma = delta_plus(h, .)` on a forward walk from `t0`.
    pub fn isolated_gap(&self) -> bool {
        let scale = self.system.scale();
        let t0 = self.t0();
        let Ok((sig, mu)) = scale.jump(t0) else { return false };
        if mu <= 0.0 || sig < self.h - SNAP_TOL {
            return false;
        }
        // spot-check sigma == delta_plus(h, .) and its inverse relation
        let mut t = t0;
        for _ in 0..64 {
            let Ok((sig, mu)) = scale.jump(t) else { return false };
            if mu <= 0.0 {
                return false;
            }
            match self.advanced(t) {
                Ok(adv) if (adv - sig).abs() <= SNAP_TOL => {}
                _ => return false,
            }
            match self.delayed(sig) {
                Ok(del) if (del - t).abs() <= SNAP_TOL => {}
                _ => return false,
            }
            t = sig;
        }
        true
    }
}
