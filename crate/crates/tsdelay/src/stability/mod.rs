//! Lyapunov-functional machinery for the delayed equation: the two-sided
//! coefficient window check, the exponential bounds it buys, the small-delay
//! feedback bound, the instability lower bound, and a certificate search that
//! tries each method in a fixed order.
//!
//! Margins are reported with a slack of [`CONDITION_SLACK`]: an inequality
//! whose worst margin is a few ulps negative (exact-equality cases rounded in
//! floating point) still counts as holding, and the raw margin is kept in the
//! report.

mod literature;
mod methods;

pub use literature::{
    check_literature_conditions, ConditionOutcome, ConditionReport, LiteratureParams,
    LiteratureReport,
};
pub use methods::{certify, CertificateMethod, SearchGrids, StabilityWorkspace};

use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::calculus::{ts_exponential, CalculusError, RegressiveFunction};
use crate::scale::{ScaleError, SNAP_TOL};
use crate::shift::{ShiftDir, ShiftError};
use crate::solver::{DelayProblem, SolverError, Trajectory};

/// Inequalities hold if their worst margin is above `-CONDITION_SLACK`.
pub const CONDITION_SLACK: f64 = 1e-9;

/// `1 + mu*p` magnitudes below this fail the regressivity checks.
const REGRESSIVITY_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Error)]
pub enum StabilityError {
    #[error("precondition not verified: {0}")]
    PreconditionNotVerified(String),
    #[error("no scale point lies strictly between t0 and h; the two-point window method applies instead")]
    EmptyAlphaInterval,
    #[error("delay-feedback condition fails at t = {t} (margin {margin})")]
    Condition228aFails { t: f64, margin: f64 },
    #[error("b(delta_plus(h, t)) vanishes at t = {0}")]
    ZeroBAt(f64),
    #[error("initial functional value V(t0) = {0} is not positive")]
    NonPositiveV0(f64),
    #[error("evaluation produced a non-finite value near t = {0}")]
    NonFinite(f64),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Shift(#[from] ShiftError),
    #[error(transparent)]
    Scale(#[from] ScaleError),
    #[error(transparent)]
    Calculus(#[from] CalculusError),
}

/// Certificate verdicts. The identifiers name the method that produced the
/// certificate and are part of the output contract.
#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    ExpStable_Thm21,
    ExpStable_Thm21a,
    Bounded_Thm23,
    Unstable_Thm31,
    NotCertified,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::ExpStable_Thm21 => "ExpStable_Thm21",
            Verdict::ExpStable_Thm21a => "ExpStable_Thm21a",
            Verdict::Bounded_Thm23 => "Bounded_Thm23",
            Verdict::Unstable_Thm31 => "Unstable_Thm31",
            Verdict::NotCertified => "NotCertified",
        };
        f.write_str(s)
    }
}

/// Worst-case slack of one checked inequality and where it was attained.
#[derive(Debug, Clone, PartialEq)]
pub struct Margin {
    pub name: &'static str,
    pub value: f64,
    pub at: f64,
}

impl Margin {
    fn track(&mut self, value: f64, at: f64) {
        if value < self.value {
            self.value = value;
            self.at = at;
        }
    }

    fn new(name: &'static str) -> Self {
        Margin { name, value: f64::INFINITY, at: f64::NAN }
    }

    pub fn holds(&self) -> bool {
        self.value >= -CONDITION_SLACK
    }
}

/// Report of the two-sided window condition
/// `-lam*d'/(beta+lam[beta+mu]) <= Q <= -lam[beta+mu]b(d+)^2 - mu*Q^2`.
#[derive(Debug, Clone)]
pub struct Cond11Report {
    pub lam: f64,
    /// Proof-internal denominator `beta + lam*beta + mu` instead of the
    /// stated `beta + lam*(beta + mu)`.
    pub strict_variant: bool,
    pub lower_margin: Margin,
    pub upper_margin: Margin,
    /// min of `1 + mu*a` over the grid (must stay positive).
    pub a_regressivity: Margin,
    /// min of `|1 + mu*Q|` over the grid (must stay nonzero).
    pub q_regressivity: Margin,
    /// (lower, upper) evaluated at the first grid point.
    pub endpoints: (f64, f64),
}

impl Cond11Report {
    pub fn holds(&self) -> bool {
        self.lower_margin.holds()
            && self.upper_margin.holds()
            && self.a_regressivity.value > 0.0
            && self.q_regressivity.value > REGRESSIVITY_TOL
    }
}

/// Report of the midpoint window condition
/// `d-(h,t) <= [d-(alpha,t) + d-(h, d-(alpha,t))]/2` together with
/// `Lambda(t) = d-(h,t) - d-(h, d-(alpha,t)) > 0`.
#[derive(Debug, Clone)]
pub struct Cond28Report {
    pub alpha: f64,
    pub midpoint_margin: Margin,
    pub capital_lambda: Margin,
    /// `(alpha, t)` admitted by both shift directions at every grid point.
    pub domain_ok: bool,
    pub first_domain_failure: Option<f64>,
}

impl Cond28Report {
    pub fn holds(&self) -> bool {
        self.midpoint_margin.holds() && self.capital_lambda.value > 0.0 && self.domain_ok
    }
}

/// Q(t) = a(t) + b(delta_plus(h, t)).
pub fn q_at(p: &DelayProblem, t: f64) -> Result<f64, StabilityError> {
    Ok(p.a(t) + p.b(p.delay().advanced(t)?))
}

pub fn check_condition_11(
    p: &DelayProblem,
    lam: f64,
    grid: &[f64],
) -> Result<Cond11Report, StabilityError> {
    check_condition_11_with(p, lam, grid, false)
}

pub fn check_condition_11_with(
    p: &DelayProblem,
    lam: f64,
    grid: &[f64],
    strict_variant: bool,
) -> Result<Cond11Report, StabilityError> {
    assert!(lam > 0.0, "lam must be positive");
    let scale = p.scale();
    let df = p.delay();
    let mut lower_margin = Margin::new("q_above_lower");
    let mut upper_margin = Margin::new("q_below_upper");
    let mut a_reg = Margin::new("a_positively_regressive");
    let mut q_reg = Margin::new("q_regressive");
    let mut endpoints = (f64::NAN, f64::NAN);
    for (i, &t) in grid.iter().enumerate() {
        let (_, mu) = scale.jump(t)?;
        let beta = df.beta(t)?;
        let dd = df.delta_derivative(t)?;
        let bp = p.b(df.advanced(t)?);
        let q = p.a(t) + bp;
        let denom = if strict_variant {
            beta + lam * beta + mu
        } else {
            beta + lam * (beta + mu)
        };
        let lower = -lam * dd / denom;
        let upper = -lam * (beta + mu) * bp * bp - mu * q * q;
        if i == 0 {
            endpoints = (lower, upper);
        }
        lower_margin.track(q - lower, t);
        upper_margin.track(upper - q, t);
        a_reg.track(1.0 + mu * p.a(t), t);
        q_reg.track((1.0 + mu * q).abs(), t);
    }
    Ok(Cond11Report {
        lam,
        strict_variant,
        lower_margin,
        upper_margin,
        a_regressivity: a_reg,
        q_regressivity: q_reg,
        endpoints,
    })
}

/// True when no scale point lies strictly inside `(t0, h)`.
pub fn alpha_interval_empty(p: &DelayProblem) -> bool {
    let t0 = p.t0();
    let h = p.delay().h();
    match p.scale().jump(t0) {
        Ok((sigma, mu)) if mu > 0.0 => sigma >= h - SNAP_TOL,
        Ok(_) => false,
        Err(_) => true,
    }
}

pub fn check_condition_2_8(
    p: &DelayProblem,
    alpha: f64,
    grid: &[f64],
) -> Result<Cond28Report, StabilityError> {
    if alpha_interval_empty(p) {
        return Err(StabilityError::EmptyAlphaInterval);
    }
    let df = p.delay();
    let sys = df.system();
    let scale = p.scale();
    let alpha = scale
        .snap(alpha)
        .ok_or(ScaleError::PointNotInScale(alpha))?;
    if alpha <= p.t0() + SNAP_TOL || alpha >= df.h() - SNAP_TOL {
        return Err(StabilityError::PreconditionNotVerified(format!(
            "alpha = {alpha} does not lie strictly between t0 = {} and h = {}",
            p.t0(),
            df.h()
        )));
    }
    let mut midpoint = Margin::new("window_midpoint");
    let mut lambda_m = Margin::new("capital_lambda");
    let mut domain_ok = true;
    let mut first_domain_failure = None;
    for &t in grid.iter().filter(|&&t| t >= alpha - SNAP_TOL) {
        let minus = sys.shift(ShiftDir::Minus, alpha, t);
        let plus = sys.shift(ShiftDir::Plus, alpha, t);
        let da = match (minus, plus) {
            (Ok(da), Ok(_)) => da,
            _ => {
                domain_ok = false;
                first_domain_failure.get_or_insert(t);
                continue;
            }
        };
        let dh = df.delayed(t)?;
        let dhda = df.delayed(da)?;
        midpoint.track((da + dhda) / 2.0 - dh, t);
        lambda_m.track(dh - dhda, t);
    }
    Ok(Cond28Report { alpha, midpoint_margin: midpoint, capital_lambda: lambda_m, domain_ok, first_domain_failure })
}

/// Per-point values of the quadratic Lyapunov functional along a trajectory:
/// `Q`, `beta`, `A(t) = x + int b(d+)x`, the window double integral `H`, and
/// `V = A^2 + lam*H`.
#[derive(Debug, Clone)]
pub struct FunctionalCache {
    lam: f64,
    grid: Vec<f64>,
    q: Vec<f64>,
    beta: Vec<f64>,
    a_func: Vec<f64>,
    h_func: Vec<f64>,
    v: Vec<f64>,
    h_route_gap: f64,
}

impl FunctionalCache {
    pub fn lam(&self) -> f64 {
        self.lam
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn a_func(&self) -> &[f64] {
        &self.a_func
    }

    pub fn h_func(&self) -> &[f64] {
        &self.h_func
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    /// Worst disagreement between the nested evaluation of the double
    /// integral and its single-integral rewriting, over the checked sample.
    pub fn h_route_gap(&self) -> f64 {
        self.h_route_gap
    }
}

/// `A(t)` at one point, reading solution values from the trajectory.
fn a_functional_at(p: &DelayProblem, tr: &Trajectory, t: f64) -> Result<f64, StabilityError> {
    let df = p.delay();
    let x = tr.value_at(t).ok_or(StabilityError::NonFinite(t))?;
    let lo = df.delayed(t)?;
    let integrand = |s: f64| -> f64 {
        match (df.advanced(s), tr.value_at(s)) {
            (Ok(ap), Some(xs)) => p.b(ap) * xs,
            _ => f64::NAN,
        }
    };
    let int = p.scale().delta_integral(&integrand, lo, t)?;
    let out = x + int;
    if out.is_finite() {
        Ok(out)
    } else {
        Err(StabilityError::NonFinite(t))
    }
}

/// Squared-kernel `k(u) = b(delta_plus(h,u))^2 x(u)^2`.
fn squared_kernel(p: &DelayProblem, tr: &Trajectory, u: f64) -> f64 {
    match (p.delay().advanced(u), tr.value_at(u)) {
        (Ok(ap), Some(xu)) => {
            let b = p.b(ap);
            b * b * xu * xu
        }
        _ => f64::NAN,
    }
}

/// Double window integral via its single-integral rewriting:
/// `int_{d-(h,t)}^t (sigma(u) - d-(h,t)) k(u) Delta u`.
fn h_functional_at(p: &DelayProblem, tr: &Trajectory, t: f64) -> Result<f64, StabilityError> {
    let lo = p.delay().delayed(t)?;
    let scale = p.scale();
    let integrand = |u: f64| -> f64 {
        let sigma = match scale.jump(u) {
            Ok((s, _)) => s,
            Err(_) => return f64::NAN,
        };
        (sigma - lo) * squared_kernel(p, tr, u)
    };
    let out = scale.delta_integral(&integrand, lo, t)?;
    if out.is_finite() {
        Ok(out)
    } else {
        Err(StabilityError::NonFinite(t))
    }
}

/// The same double integral evaluated by direct nesting.
fn h_functional_nested(p: &DelayProblem, tr: &Trajectory, t: f64) -> Result<f64, StabilityError> {
    let lo = p.delay().delayed(t)?;
    let scale = p.scale();
    let inner = |s: f64| -> f64 {
        scale
            .delta_integral(&|u| squared_kernel(p, tr, u), s, t)
            .unwrap_or(f64::NAN)
    };
    let out = scale.delta_integral(&inner, lo, t)?;
    if out.is_finite() {
        Ok(out)
    } else {
        Err(StabilityError::NonFinite(t))
    }
}

/// Builds the functional cache over the trajectory's equation-regime points.
pub fn functionals(
    p: &DelayProblem,
    tr: &Trajectory,
    lam: f64,
) -> Result<FunctionalCache, StabilityError> {
    assert!(lam > 0.0, "lam must be positive");
    let grid: Vec<f64> = tr.points()[tr.t0_index()..].to_vec();
    let df = p.delay();
    let mut q = Vec::with_capacity(grid.len());
    let mut beta = Vec::with_capacity(grid.len());
    let mut a_func = Vec::with_capacity(grid.len());
    let mut h_func = Vec::with_capacity(grid.len());
    for &t in &grid {
        q.push(q_at(p, t)?);
        beta.push(df.beta(t)?);
        a_func.push(a_functional_at(p, tr, t)?);
        h_func.push(h_functional_at(p, tr, t)?);
    }
    // dual-route agreement, exact on lattices, sampled on dense grids
    let stride = if tr.is_dense() { (grid.len() / 64).max(1) } else { 1 };
    let mut h_route_gap = 0.0f64;
    let mut i = 0;
    while i < grid.len() {
        let nested = h_functional_nested(p, tr, grid[i])?;
        h_route_gap = h_route_gap.max((nested - h_func[i]).abs());
        i += stride;
    }
    let v = a_func
        .iter()
        .zip(&h_func)
        .map(|(a, h)| a * a + lam * h)
        .collect();
    Ok(FunctionalCache { lam, grid, q, beta, a_func, h_func, v, h_route_gap })
}

/// `xi(t) = 1 + lam*Lambda(t)/beta(t)` for the midpoint-window bound.
fn xi_at(p: &DelayProblem, lam: f64, alpha: f64, t: f64) -> Result<f64, StabilityError> {
    let df = p.delay();
    let sys = df.system();
    let da = sys.shift(ShiftDir::Minus, alpha, t)?;
    let cap = df.delayed(t)? - df.delayed(da)?;
    Ok(1.0 + lam * cap / df.beta(t)?)
}

/// Integral of `Q` over `[t0, upper]`.
fn q_integral(p: &DelayProblem, upper: f64) -> Result<f64, StabilityError> {
    let df = p.delay();
    let integrand = |s: f64| match df.advanced(s) {
        Ok(ap) => p.a(s) + p.b(ap),
        Err(_) => f64::NAN,
    };
    let out = p.scale().delta_integral(&integrand, p.t0(), upper)?;
    if out.is_finite() {
        Ok(out)
    } else {
        Err(StabilityError::NonFinite(upper))
    }
}

/// Exponential bound of the midpoint-window method.
///
/// For `t >= alpha`: `sqrt(2 V0 / (1 - 1/xi(t))) * exp((1/2) int_{t0}^{d-(alpha,t)} Q)`.
/// For `t in [t0, alpha)` the history-regime product bound is used:
/// `psi_sup * e^{int a} [1 + M int |b/(1+mu a)| e^{-int a}]`.
pub fn bound_thm21(
    p: &DelayProblem,
    lam: f64,
    alpha: f64,
    v0: f64,
    t: f64,
) -> Result<f64, StabilityError> {
    if alpha_interval_empty(p) {
        return Err(StabilityError::PreconditionNotVerified(
            "no scale point lies strictly between t0 and h".into(),
        ));
    }
    let scale = p.scale();
    let t = scale.snap(t).ok_or(ScaleError::PointNotInScale(t))?;
    let t0 = p.t0();
    if t >= alpha - SNAP_TOL {
        let xi = xi_at(p, lam, alpha, t)?;
        if xi <= 1.0 {
            return Err(StabilityError::PreconditionNotVerified(format!(
                "xi(t) = {xi} is not above 1 at t = {t}"
            )));
        }
        let da = p.delay().system().shift(ShiftDir::Minus, alpha, t)?;
        let exponent = 0.5 * q_integral(p, da)?;
        Ok((2.0 * v0 / (1.0 - 1.0 / xi)).sqrt() * exponent.exp())
    } else {
        let m = p.delay().derivative_bound(p.horizon())?;
        let psi_sup = history_sup(p)?;
        let a_int = |u: f64| scale.delta_integral(&|s| p.a(s), t0, u).unwrap_or(f64::NAN);
        let integrand = |s: f64| -> f64 {
            let Ok((_, mu)) = scale.jump(s) else { return f64::NAN };
            (p.b(s) / (1.0 + mu * p.a(s))).abs() * (-a_int(s)).exp()
        };
        let tail = scale.delta_integral(&integrand, t0, t)?;
        let out = psi_sup * a_int(t).exp() * (1.0 + m * tail);
        if out.is_finite() {
            Ok(out)
        } else {
            Err(StabilityError::NonFinite(t))
        }
    }
}

/// sup of `|psi|` over the history window grid.
pub fn history_sup(p: &DelayProblem) -> Result<f64, StabilityError> {
    let t0 = p.t0();
    let start = p.delay().delayed(t0)?;
    let step = (t0 - start).abs().max(f64::MIN_POSITIVE) / 256.0;
    let pts = p.scale().grid(start, t0, step)?;
    let mut sup = 0.0f64;
    for t in pts {
        let v = p.psi(t).abs();
        if !v.is_finite() {
            return Err(StabilityError::NonFinite(t));
        }
        sup = sup.max(v);
    }
    Ok(sup)
}

/// Exponential bound of the two-point window method (empty lattice gap):
/// `sqrt((1 + 1/lam) V0) * exp((1/2) int_{t0}^t Q)`.
pub fn bound_thm21a(p: &DelayProblem, lam: f64, v0: f64, t: f64) -> Result<f64, StabilityError> {
    if !p.delay().isolated_gap() {
        return Err(StabilityError::PreconditionNotVerified(
            "the delay does not span exactly one forward jump".into(),
        ));
    }
    let t = p
        .scale()
        .snap(t)
        .ok_or(ScaleError::PointNotInScale(t))?;
    let exponent = 0.5 * q_integral(p, t)?;
    Ok(((1.0 + 1.0 / lam) * v0).sqrt() * exponent.exp())
}

/// Cached scale exponential `e_a(., t0)` over a gauge grid reaching past the
/// horizon, so window integrals of `e_a(delta_plus(h, s), t0)` can be read
/// without re-walking the scale.
pub(crate) struct EtaCache {
    p: DelayProblem,
    lam: f64,
    gauge: Vec<f64>,
    e_vals: Vec<f64>,
}

impl EtaCache {
    pub(crate) fn new(p: &DelayProblem, lam: f64) -> Result<Self, StabilityError> {
        let scale = p.scale().clone();
        let t0 = p.t0();
        let end = p.delay().advanced(p.delay().advanced(p.horizon())?)?;
        let step = if let Ok(g1) = p.delay().advanced(t0) {
            ((g1 - t0) / 64.0).min(1e-2).max(1e-6)
        } else {
            1e-2
        };
        let gauge = scale.grid(t0, end, step)?;
        let mut e_vals = Vec::with_capacity(gauge.len());
        let mut acc = 1.0f64;
        e_vals.push(acc);
        for i in 0..gauge.len() - 1 {
            let t = gauge[i];
            let (_, mu) = scale.jump(t)?;
            if mu > 0.0 {
                let factor = 1.0 + mu * p.a(t);
                if factor <= REGRESSIVITY_TOL {
                    return Err(StabilityError::PreconditionNotVerified(format!(
                        "a is not positively regressive at t = {t}"
                    )));
                }
                acc *= factor;
            } else {
                acc *= crate::scale::simpson_refined(
                    &|s| p.a(s),
                    t,
                    gauge[i + 1],
                    scale.quad_tol(),
                )
                .exp();
            }
            e_vals.push(acc);
        }
        Ok(EtaCache { p: p.clone(), lam, gauge, e_vals })
    }

    fn e_a_at(&self, t: f64) -> f64 {
        let i = match self.gauge.partition_point(|&g| g <= t + SNAP_TOL) {
            0 => 0,
            k => k - 1,
        };
        if (self.gauge[i] - t).abs() <= SNAP_TOL {
            return self.e_vals[i];
        }
        self.e_vals[i]
            * crate::scale::simpson_refined(
                &|s| self.p.a(s),
                self.gauge[i],
                t,
                self.p.scale().quad_tol(),
            )
            .exp()
    }

    pub(crate) fn eta(&self, t: f64) -> Result<f64, StabilityError> {
        let df = self.p.delay();
        let lo = df.delayed(t)?;
        let w = self
            .p
            .scale()
            .delta_integral(
                &|s| match df.advanced(s) {
                    Ok(ap) => self.e_a_at(ap),
                    Err(_) => f64::NAN,
                },
                lo,
                t,
            )?;
        let out = self.e_a_at(t) / (1.0 + self.lam * w);
        if out.is_finite() {
            Ok(out)
        } else {
            Err(StabilityError::NonFinite(t))
        }
    }

    pub(crate) fn eta_sigma(&self, t: f64) -> Result<f64, StabilityError> {
        let (sigma, _) = self.p.scale().jump(t)?;
        self.eta(sigma)
    }

    pub(crate) fn gamma(&self, m_tilde: f64, t: f64) -> Result<f64, StabilityError> {
        Ok(self.p.a(t) + self.lam * m_tilde * self.eta_sigma(t)?)
    }
}

/// `V(t0, x_{t0}) = |x(t0)| + lam*eta(t0) int |psi|` for the small-delay
/// feedback method.
pub(crate) fn v0_thm23(p: &DelayProblem, lam: f64, eta0: f64) -> Result<f64, StabilityError> {
    let t0 = p.t0();
    let lo = p.delay().delayed(t0)?;
    let int = p.scale().delta_integral(&|s| p.psi(s).abs(), lo, t0)?;
    let out = p.psi(t0).abs() + lam * eta0 * int;
    if out.is_finite() {
        Ok(out)
    } else {
        Err(StabilityError::NonFinite(t0))
    }
}

/// Small-delay feedback method: returns `(eta(t), gamma(t), bound(t))` where
/// `bound(t) = V(t0, x_{t0}) e_gamma(t, t0)`.
///
/// Verifies `|b(t)| <= lam * eta_sigma(t) * d-'(h,t)` at `t` and errors with
/// the margin otherwise.
pub fn eta_and_bound_thm23(
    p: &DelayProblem,
    lam: f64,
    t: f64,
) -> Result<(f64, f64, f64), StabilityError> {
    assert!(lam > 0.0, "lam must be positive");
    let t = p
        .scale()
        .snap(t)
        .ok_or(ScaleError::PointNotInScale(t))?;
    let cache = EtaCache::new(p, lam)?;
    let eta_s = cache.eta_sigma(t)?;
    let dd = p.delay().delta_derivative(t)?;
    let margin = lam * eta_s * dd - p.b(t).abs();
    if margin < -CONDITION_SLACK {
        return Err(StabilityError::Condition228aFails { t, margin });
    }
    let m = p.delay().derivative_bound(p.horizon())?;
    let m_tilde = m.max(1.0);
    let eta_t = cache.eta(t)?;
    let gamma_t = cache.gamma(m_tilde, t)?;
    let v0 = v0_thm23(p, lam, cache.eta(p.t0())?)?;
    let shared = Arc::new(cache);
    let gamma_fn = RegressiveFunction::new(p.scale().clone(), move |u| {
        shared.gamma(m_tilde, u).unwrap_or(f64::NAN)
    });
    let e_gamma = ts_exponential(&gamma_fn, t, p.t0())?;
    let bound = v0 * e_gamma;
    if bound.is_finite() {
        Ok((eta_t, gamma_t, bound))
    } else {
        Err(StabilityError::NonFinite(t))
    }
}

/// Report of the instability window condition
/// `beta(t) < D <= Q(t)/b(delta_plus(h,t))^2`.
#[derive(Clone)]
pub struct InstabilityReport {
    pub d: f64,
    pub beta0: f64,
    pub c: f64,
    pub v0: f64,
    pub d_above_beta: Margin,
    pub q_over_b_squared: Margin,
    pub divergence_integral: f64,
    lower_bound: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl InstabilityReport {
    pub fn holds(&self) -> bool {
        self.d_above_beta.value > 0.0 && self.q_over_b_squared.holds()
    }

    /// `sqrt(C * V(t0) * int_{t0}^t b(delta_plus(h,s))^2)`.
    pub fn lower_bound(&self, t: f64) -> f64 {
        (self.lower_bound)(t)
    }
}

impl std::fmt::Debug for InstabilityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InstabilityReport")
            .field("d", &self.d)
            .field("beta0", &self.beta0)
            .field("c", &self.c)
            .field("v0", &self.v0)
            .field("d_above_beta", &self.d_above_beta)
            .field("q_over_b_squared", &self.q_over_b_squared)
            .field("divergence_integral", &self.divergence_integral)
            .finish_non_exhaustive()
    }
}

/// `int_{t0}^{upper} b(delta_plus(h,s))^2 Delta s`.
pub(crate) fn b_plus_squared_integral(
    p: &DelayProblem,
    upper: f64,
) -> Result<f64, StabilityError> {
    let df = p.delay();
    let out = p.scale().delta_integral(
        &|s| match df.advanced(s) {
            Ok(ap) => {
                let b = p.b(ap);
                b * b
            }
            Err(_) => f64::NAN,
        },
        p.t0(),
        upper,
    )?;
    if out.is_finite() {
        Ok(out)
    } else {
        Err(StabilityError::NonFinite(upper))
    }
}

/// `V(t0)` for the instability functional (quadratic form minus the
/// weighted window energy), computed off the history alone.
pub(crate) fn v0_instability(p: &DelayProblem, d: f64) -> Result<f64, StabilityError> {
    let t0 = p.t0();
    let df = p.delay();
    let lo = df.delayed(t0)?;
    let scale = p.scale();
    let a0 = {
        let integrand = |s: f64| match df.advanced(s) {
            Ok(ap) => p.b(ap) * p.psi(s),
            Err(_) => f64::NAN,
        };
        p.psi(t0) + scale.delta_integral(&integrand, lo, t0)?
    };
    let energy = scale.delta_integral(
        &|s| match df.advanced(s) {
            Ok(ap) => {
                let b = p.b(ap);
                let x = p.psi(s);
                b * b * x * x
            }
            Err(_) => f64::NAN,
        },
        lo,
        t0,
    )?;
    let out = a0 * a0 - d * energy;
    if out.is_finite() {
        Ok(out)
    } else {
        Err(StabilityError::NonFinite(t0))
    }
}

pub fn check_instability(
    p: &DelayProblem,
    d: f64,
    grid: &[f64],
) -> Result<InstabilityReport, StabilityError> {
    assert!(d > 0.0, "D must be positive");
    let df = p.delay();
    let mut beta0 = 0.0f64;
    let mut d_above_beta = Margin::new("d_above_beta");
    let mut q_over_b = Margin::new("q_over_b_squared");
    for &t in grid {
        let bp = p.b(df.advanced(t)?);
        if bp == 0.0 {
            return Err(StabilityError::ZeroBAt(t));
        }
        let beta = df.beta(t)?;
        beta0 = beta0.max(beta);
        d_above_beta.track(d - beta, t);
        q_over_b.track(q_at(p, t)? / (bp * bp) - d, t);
    }
    let v0 = v0_instability(p, d)?;
    if v0 <= 0.0 {
        return Err(StabilityError::NonPositiveV0(v0));
    }
    let c = d - beta0;
    let divergence_integral = b_plus_squared_integral(p, p.horizon())?;
    let lower_bound: Arc<dyn Fn(f64) -> f64 + Send + Sync> = {
        let p = p.clone();
        Arc::new(move |t: f64| match b_plus_squared_integral(&p, t) {
            Ok(int) => (c * v0 * int).max(0.0).sqrt(),
            Err(_) => f64::NAN,
        })
    };
    Ok(InstabilityReport {
        d,
        beta0,
        c,
        v0,
        d_above_beta,
        q_over_b_squared: q_over_b,
        divergence_integral,
        lower_bound,
    })
}

/// Per-point instability functional `V(t) = A(t)^2 - D int b(d+)^2 x^2` along
/// a solved trajectory.
pub fn instability_functional(
    p: &DelayProblem,
    tr: &Trajectory,
    d: f64,
) -> Result<Vec<f64>, StabilityError> {
    let grid = &tr.points()[tr.t0_index()..];
    let scale = p.scale();
    let mut out = Vec::with_capacity(grid.len());
    for &t in grid {
        let a = a_functional_at(p, tr, t)?;
        let lo = p.delay().delayed(t)?;
        let energy = scale.delta_integral(&|u| squared_kernel(p, tr, u), lo, t)?;
        out.push(a * a - d * energy);
    }
    Ok(out)
}

/// A certified stability/instability statement with parameters, worst-case
/// margins, and an evaluable bound.
#[derive(Clone)]
pub struct StabilityCertificate {
    pub verdict: Verdict,
    pub lam: Option<f64>,
    pub alpha: Option<f64>,
    pub d: Option<f64>,
    pub v0: Option<f64>,
    pub margins: Vec<Margin>,
    /// Finite-horizon value of the relevant divergence integral; growth past
    /// the threshold is recorded, never a proven limit.
    pub divergence_integral: Option<f64>,
    pub divergence_threshold: f64,
    pub divergence_reached: bool,
    pub bound_desc: String,
    pub notes: Vec<String>,
    bound: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl StabilityCertificate {
    pub(crate) fn not_certified(threshold: f64, notes: Vec<String>) -> Self {
        StabilityCertificate {
            verdict: Verdict::NotCertified,
            lam: None,
            alpha: None,
            d: None,
            v0: None,
            margins: Vec::new(),
            divergence_integral: None,
            divergence_threshold: threshold,
            divergence_reached: false,
            bound_desc: "none".into(),
            notes,
            bound: None,
        }
    }

    pub(crate) fn with_bound(mut self, b: Arc<dyn Fn(f64) -> f64 + Send + Sync>) -> Self {
        self.bound = Some(b);
        self
    }

    /// Bound value at `t`: upper bound for stability verdicts, lower bound
    /// for the instability verdict, None when not certified.
    pub fn bound_at(&self, t: f64) -> Option<f64> {
        self.bound.as_ref().map(|b| b(t))
    }

    pub fn is_certified(&self) -> bool {
        self.verdict != Verdict::NotCertified
    }

    /// Deterministic structured-text rendering.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "verdict: {}", self.verdict);
        if let Some(l) = self.lam {
            let _ = writeln!(out, "lambda: {l:?}");
        }
        if let Some(a) = self.alpha {
            let _ = writeln!(out, "alpha: {a:?}");
        }
        if let Some(d) = self.d {
            let _ = writeln!(out, "D: {d:?}");
        }
        if let Some(v) = self.v0 {
            let _ = writeln!(out, "V0: {v:?}");
        }
        if !self.margins.is_empty() {
            let _ = writeln!(out, "margins (worst slack, tolerance {CONDITION_SLACK:?}):");
            for m in &self.margins {
                let _ = writeln!(out, "  {:<24} {:?} at t={:?}", m.name, m.value, m.at);
            }
        }
        if let Some(di) = self.divergence_integral {
            let _ = writeln!(
                out,
                "divergence integral at horizon: {di:?} (threshold {:?}, reached: {})",
                self.divergence_threshold,
                if self.divergence_reached { "yes" } else { "no" }
            );
        }
        let _ = writeln!(out, "bound: {}", self.bound_desc);
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }

    /// Companion CSV `t,x,V,bound,Q,beta` over the trajectory's equation
    /// regime. `V` uses the certificate's parameters (quadratic form for
    /// stability verdicts, windowed-energy form for the instability verdict);
    /// without a certificate the `lam = 1` functional is written and the
    /// bound column is NaN.
    pub fn to_csv(&self, p: &DelayProblem, tr: &Trajectory) -> Result<String, StabilityError> {
        let v = match (self.verdict, self.d, self.lam) {
            (Verdict::Unstable_Thm31, Some(d), _) => instability_functional(p, tr, d)?,
            (_, _, lam) => functionals(p, tr, lam.unwrap_or(1.0))?.v,
        };
        let grid = &tr.points()[tr.t0_index()..];
        let vals = &tr.values()[tr.t0_index()..];
        let mut out = String::from("t,x,V,bound,Q,beta\n");
        for (i, &t) in grid.iter().enumerate() {
            let bound = self.bound_at(t).unwrap_or(f64::NAN);
            let q = q_at(p, t)?;
            let beta = p.delay().beta(t)?;
            let _ = writeln!(
                out,
                "{:?},{:?},{:?},{:?},{:?},{:?}",
                t, vals[i], v[i], bound, q, beta
            );
        }
        Ok(out)
    }
}
