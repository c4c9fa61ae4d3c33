//! The built-in shift-operator families.
//!
//! Each family is a pure formula pair; the owning system supplies the scale.
//! Canonical pairings: `translation` with real lines and additive lattices,
//! `scaling` with q-power lattices or the full real line, `quadratic` with
//! the square-root lattice or `[0, oo)`.

use std::sync::Arc;

use super::{ShiftDir, ShiftOps};
use crate::scale::SNAP_TOL;

/// Additive shifts `t -+ s` with initial point 0.
pub struct TranslationOps;

impl ShiftOps for TranslationOps {
    fn name(&self) -> &str {
        "translation"
    }

    fn initial_point(&self) -> f64 {
        0.0
    }

    fn apply(&self, dir: ShiftDir, s: f64, t: f64) -> Option<f64> {
        if s < -SNAP_TOL {
            return None;
        }
        Some(match dir {
            ShiftDir::Minus => t - s,
            ShiftDir::Plus => t + s,
        })
    }

    fn closed_form_delay_derivative(&self, _h: f64, _t: f64) -> Option<f64> {
        Some(1.0)
    }
}

/// Multiplicative shifts with initial point 1 and sticky point 0:
/// `delta_minus(s,t) = t/s` for `t >= 0` and `t*s` for `t < 0` (mirrored for
/// the forward direction), so monotonicity in `t` survives across zero.
pub struct ScalingOps;

impl ShiftOps for ScalingOps {
    fn name(&self) -> &str {
        "scaling"
    }

    fn initial_point(&self) -> f64 {
        1.0
    }

    fn sticky_point(&self) -> Option<f64> {
        Some(0.0)
    }

    fn apply(&self, dir: ShiftDir, s: f64, t: f64) -> Option<f64> {
        if s < 1.0 - SNAP_TOL {
            return None;
        }
        Some(match (dir, t >= 0.0) {
            (ShiftDir::Minus, true) => t / s,
            (ShiftDir::Minus, false) => t * s,
            (ShiftDir::Plus, true) => t * s,
            (ShiftDir::Plus, false) => t / s,
        })
    }

    fn closed_form_delay_derivative(&self, h: f64, _t: f64) -> Option<f64> {
        // the delay map is linear with slope 1/h on [delta_minus(h,t0), oo)
        (h >= 1.0).then(|| 1.0 / h)
    }
}

/// Quadratic-mean shifts `sqrt(t^2 -+ s^2)` with initial point 0, defined on
/// nonnegative points with `t >= s` in the backward direction.
pub struct QuadraticOps;

impl ShiftOps for QuadraticOps {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn initial_point(&self) -> f64 {
        0.0
    }

    fn apply(&self, dir: ShiftDir, s: f64, t: f64) -> Option<f64> {
        if s < -SNAP_TOL || t < -SNAP_TOL {
            return None;
        }
        match dir {
            ShiftDir::Minus => {
                if t < s - SNAP_TOL {
                    return None;
                }
                Some((t * t - s * s).max(0.0).sqrt())
            }
            ShiftDir::Plus => Some((t * t + s * s).sqrt()),
        }
    }
}

/// Negative fixture: the additive formula `t -+ s` claiming initial point 1.
/// On a multiplicative lattice its results leave the scale (closure failure).
pub struct BrokenDifferenceOps;

impl ShiftOps for BrokenDifferenceOps {
    fn name(&self) -> &str {
        "broken-difference"
    }

    fn initial_point(&self) -> f64 {
        1.0
    }

    fn apply(&self, dir: ShiftDir, s: f64, t: f64) -> Option<f64> {
        if s < 1.0 - SNAP_TOL {
            return None;
        }
        Some(match dir {
            ShiftDir::Minus => t - s,
            ShiftDir::Plus => t + s,
        })
    }
}

/// A base family rebased to the new initial point `lam`:
/// `delta'_(-)(s,t) = delta_plus(lam, delta_minus(s,t))`,
/// `delta'_(+)(s,t) = delta_minus(lam, delta_plus(s,t))`.
pub struct RebasedOps {
    base: Arc<dyn ShiftOps>,
    lam: f64,
    name: String,
}

impl RebasedOps {
    pub fn new(base: Arc<dyn ShiftOps>, lam: f64) -> Self {
        let name = format!("rebased({}, t0={lam})", base.name());
        RebasedOps { base, lam, name }
    }
}

impl ShiftOps for RebasedOps {
    fn name(&self) -> &str {
        &self.name
    }

    fn initial_point(&self) -> f64 {
        self.lam
    }

    fn sticky_point(&self) -> Option<f64> {
        self.base.sticky_point()
    }

    fn apply(&self, dir: ShiftDir, s: f64, t: f64) -> Option<f64> {
        if s < self.lam - SNAP_TOL {
            return None;
        }
        let inner = self.base.apply(dir, s, t)?;
        self.base.apply(dir.opposite(), self.lam, inner)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scale::TimeScale;
    use crate::shift::{builtin_shift, DelayFunction, ShiftError, ShiftSystem};

    fn q2_system() -> ShiftSystem {
        builtin_shift("scaling", &TimeScale::q_lattice(2.0).unwrap()).unwrap()
    }

    #[test]
    fn scaling_shifts_on_q_lattice() {
        let sys = q2_system();
        // q^5 shifted down by q^2
        assert_eq!(sys.shift(ShiftDir::Minus, 4.0, 32.0).unwrap(), 8.0);
        assert_eq!(sys.shift(ShiftDir::Plus, 4.0, 8.0).unwrap(), 32.0);
    }

    #[test]
    fn quadratic_shifts_on_sqrt_lattice() {
        let sys = builtin_shift("quadratic", &TimeScale::sqrt_naturals()).unwrap();
        let r2 = 2.0f64.sqrt();
        let r3 = 3.0f64.sqrt();
        let r5 = 5.0f64.sqrt();
        assert_eq!(sys.shift(ShiftDir::Plus, r2, r3).unwrap(), r5);
        assert_eq!(sys.shift(ShiftDir::Minus, r2, r5).unwrap(), r3);
    }

    #[test]
    fn scaling_on_reals_branches_at_zero() {
        let sys = builtin_shift("scaling", &TimeScale::real_line()).unwrap();
        assert_eq!(sys.shift(ShiftDir::Minus, 2.0, -3.0).unwrap(), -6.0);
        assert_eq!(sys.shift(ShiftDir::Minus, 2.0, 3.0).unwrap(), 1.5);
        assert_eq!(sys.shift(ShiftDir::Plus, 2.0, -3.0).unwrap(), -1.5);
    }

    #[test]
    fn identity_shift_at_initial_point() {
        let sys = builtin_shift("translation", &TimeScale::real_line()).unwrap();
        assert_eq!(sys.shift(ShiftDir::Plus, 0.0, 7.25).unwrap(), 7.25);
        let sys = q2_system();
        assert_eq!(sys.shift(ShiftDir::Plus, 1.0, 16.0).unwrap(), 16.0);
    }

    #[test]
    fn shift_size_below_initial_point_is_rejected() {
        let sys = q2_system();
        assert!(matches!(
            sys.shift(ShiftDir::Minus, 0.5, 8.0),
            Err(ShiftError::OutOfDomain { .. })
        ));
    }

    #[test]
    fn sticky_point_is_not_a_working_point() {
        let sys = q2_system();
        assert!(matches!(
            sys.shift(ShiftDir::Plus, 2.0, 0.0),
            Err(ShiftError::OutOfDomain { .. })
        ));
    }

    #[test]
    fn broken_difference_leaves_q_lattice() {
        let sys = builtin_shift("broken-difference", &TimeScale::q_lattice(2.0).unwrap()).unwrap();
        // q^5 - q^2 = 24 is not a power of two
        assert!(matches!(
            sys.shift(ShiftDir::Minus, 8.0, 32.0),
            Err(ShiftError::ResultLeavesScale { .. })
        ));
    }

    #[test]
    fn rebased_real_translation_matches_closed_form() {
        let sys = builtin_shift("translation", &TimeScale::real_line()).unwrap();
        let reb = sys.rebase_initial_point(1.0).unwrap();
        // forward shift becomes t - 1 + s
        assert_eq!(reb.shift(ShiftDir::Plus, 2.5, 4.0).unwrap(), 5.5);
        assert_eq!(reb.shift(ShiftDir::Plus, 3.0, 1.0).unwrap(), 3.0);
        assert_eq!(reb.t0(), 1.0);
    }

    #[test]
    fn rebased_step_lattice_matches_table_form() {
        // step lattice h=0.5 rebased to t0 = h*lam with lam = 3: delta_minus = t + 1.5 - s
        let scale = TimeScale::step_lattice(0.5, 0.0).unwrap();
        let sys = builtin_shift("translation", &scale).unwrap();
        let reb = sys.rebase_initial_point(1.5).unwrap();
        assert_eq!(reb.shift(ShiftDir::Minus, 2.0, 4.0).unwrap(), 3.5);
        assert_eq!(reb.shift(ShiftDir::Plus, 2.0, 4.0).unwrap(), 4.5);
    }

    #[test]
    fn rebased_power_lattice_matches_table_form() {
        // 2^N rebased to 2^lam with lam = 2: delta_minus = 4 t / s
        let sys = q2_system().rebase_initial_point(4.0).unwrap();
        assert_eq!(sys.shift(ShiftDir::Minus, 8.0, 16.0).unwrap(), 8.0);
        assert_eq!(sys.shift(ShiftDir::Plus, 8.0, 16.0).unwrap(), 32.0);
    }

    #[test]
    fn delay_function_requires_h_above_t0() {
        let sys = q2_system();
        assert!(DelayFunction::new(sys.clone(), 1.0).is_err());
        assert!(DelayFunction::new(sys, 2.0).is_ok());
    }

    #[test]
    fn delay_derivative_closed_forms() {
        let real = builtin_shift("translation", &TimeScale::real_line()).unwrap();
        let df = DelayFunction::new(real, 1.0 / 3.0).unwrap();
        assert_eq!(df.delta_derivative(5.0).unwrap(), 1.0);

        let df = DelayFunction::new(q2_system(), 2.0).unwrap();
        assert_eq!(df.delta_derivative(8.0).unwrap(), 0.5);
    }

    #[test]
    fn delay_derivative_from_definition_on_sqrt_lattice() {
        let sys = builtin_shift("quadratic", &TimeScale::sqrt_naturals()).unwrap();
        let df = DelayFunction::new(sys, 1.0).unwrap();
        let r5 = 5.0f64.sqrt();
        let r6 = 6.0f64.sqrt();
        // (delta(sqrt 6) - delta(sqrt 5)) / (sqrt 6 - sqrt 5)
        let want = (r5 - 2.0) / (r6 - r5);
        assert!((df.delta_derivative(r5).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn beta_is_the_lag_length() {
        let real = builtin_shift("translation", &TimeScale::real_line()).unwrap();
        let df = DelayFunction::new(real, 0.25).unwrap();
        assert_eq!(df.beta(3.0).unwrap(), 0.25);
    }

    #[test]
    fn derivative_bound_is_the_sampled_supremum() {
        let df = DelayFunction::new(q2_system(), 2.0).unwrap();
        assert_eq!(df.derivative_bound(64.0).unwrap(), 0.5);
        let real = builtin_shift("translation", &TimeScale::real_line()).unwrap();
        let df = DelayFunction::new(real, 1.0).unwrap().with_derivative_bound(2.0);
        assert_eq!(df.derivative_bound(10.0).unwrap(), 2.0);
    }

    #[test]
    fn isolated_gap_detection() {
        let zi = builtin_shift("translation", &TimeScale::integers()).unwrap();
        assert!(DelayFunction::new(zi, 1.0).unwrap().isolated_gap());

        let real = builtin_shift("translation", &TimeScale::real_line()).unwrap();
        assert!(!DelayFunction::new(real, 1.0 / 3.0).unwrap().isolated_gap());

        let q = DelayFunction::new(q2_system(), 2.0).unwrap();
        assert!(q.isolated_gap());
        let q4 = DelayFunction::new(q2_system(), 4.0).unwrap();
        assert!(!q4.isolated_gap());
    }
}
