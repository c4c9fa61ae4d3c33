//! Stepper for the delayed dynamic equation
//! `x^Δ(t) = a(t)x(t) + b(t)x(δ₋(h,t))δ₋^Δ(h,t)` with history `ψ` on
//! `[δ₋(h,t0), t0]`.
//!
//! Isolated lattices advance by the exact forward recurrence. Real intervals
//! use the method of steps: the horizon is partitioned at the `δ₊`-iterates of
//! `t0`, and each segment is integrated with classical 4th-order steps against
//! the already-computed delayed segment, looked up by cubic interpolation.
//! Segment joins are derivative kinks, so residual stencils stay inside one
//! segment.

use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::calculus::{ts_exponential, CalculusError, RegressiveFunction};
use crate::scale::{GridFunction, ScaleError, ScaleKind, TimeScale, SNAP_TOL};
use crate::shift::{DelayFunction, ShiftError};

#[derive(Debug, Clone, Error)]
pub enum SolverError {
    #[error("delayed argument {delayed} at t = {t} falls before the history start {start}")]
    HistoryGap { t: f64, delayed: f64, start: f64 },
    #[error("solution grid fails to advance at index {0}")]
    NonMonotoneGrid(usize),
    #[error("t = {t} lies beyond the history regime [t0, {alpha}]")]
    OutOfHistoryRegime { t: f64, alpha: f64 },
    #[error("scale mixes dense and scattered points on the solution window; only isolated lattices and real intervals are supported")]
    MixedScale,
    #[error("history value at t = {0} is not finite")]
    BadHistoryValue(f64),
    #[error("evaluation produced a non-finite value near t = {0}")]
    NonFinite(f64),
    #[error(transparent)]
    Shift(#[from] ShiftError),
    #[error(transparent)]
    Scale(#[from] ScaleError),
    #[error(transparent)]
    Calculus(#[from] CalculusError),
}

type Coefficient = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The delayed equation, its history, and the solve horizon.
#[derive(Clone)]
pub struct DelayProblem {
    delay: DelayFunction,
    a: Coefficient,
    b: Coefficient,
    psi: Coefficient,
    horizon: f64,
    real_step: Option<f64>,
}

impl DelayProblem {
    pub fn new(
        delay: DelayFunction,
        a: impl Fn(f64) -> f64 + Send + Sync + 'static,
        b: impl Fn(f64) -> f64 + Send + Sync + 'static,
        psi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        horizon: f64,
    ) -> Result<Self, SolverError> {
        let horizon = delay
            .scale()
            .snap(horizon)
            .ok_or(ScaleError::PointNotInScale(horizon))?;
        if horizon <= delay.t0() + SNAP_TOL {
            return Err(SolverError::NonMonotoneGrid(0));
        }
        Ok(DelayProblem {
            delay,
            a: Arc::new(a),
            b: Arc::new(b),
            psi: Arc::new(psi),
            horizon,
            real_step: None,
        })
    }

    /// Overrides the base step of the first dense segment.
    pub fn with_real_step(mut self, step: f64) -> Self {
        assert!(step > 0.0, "step must be positive");
        self.real_step = Some(step);
        self
    }

    pub fn delay(&self) -> &DelayFunction {
        &self.delay
    }

    pub fn scale(&self) -> &TimeScale {
        self.delay.scale()
    }

    pub fn t0(&self) -> f64 {
        self.delay.t0()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn a(&self, t: f64) -> f64 {
        (self.a)(t)
    }

    pub fn b(&self, t: f64) -> f64 {
        (self.b)(t)
    }

    pub fn psi(&self, t: f64) -> f64 {
        (self.psi)(t)
    }
}

/// A solved trajectory over `[δ₋(h,t0), T]` with per-point graininess, delayed
/// argument, and delay derivative. `delayed_t`/`delay_deriv` are NaN where the
/// shift is not applicable (history points of some systems).
#[derive(Debug, Clone)]
pub struct Trajectory {
    grid: GridFunction,
    mu: Vec<f64>,
    delayed_t: Vec<f64>,
    delay_deriv: Vec<f64>,
    t0_index: usize,
    /// Dense path: flat index where each method-of-steps range starts
    /// (history range first); empty on lattices.
    range_starts: Vec<usize>,
}

impl Trajectory {
    pub fn grid(&self) -> &GridFunction {
        &self.grid
    }

    pub fn points(&self) -> &[f64] {
        self.grid.points()
    }

    pub fn values(&self) -> &[f64] {
        self.grid.values()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn delayed_t(&self) -> &[f64] {
        &self.delayed_t
    }

    pub fn delay_deriv(&self) -> &[f64] {
        &self.delay_deriv
    }

    /// Index of the initial point `t0` in the flat grid.
    pub fn t0_index(&self) -> usize {
        self.t0_index
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.len() == 0
    }

    pub fn is_dense(&self) -> bool {
        !self.range_starts.is_empty()
    }

    /// Solution value at `t`: exact node lookup on lattices, segment-local
    /// cubic interpolation on dense trajectories. None outside the grid span.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let pts = self.points();
        if pts.is_empty() {
            return None;
        }
        if !self.is_dense() {
            return self.grid.index_of(t).map(|i| self.values()[i]);
        }
        let first = pts[0];
        let last = *pts.last().unwrap();
        if t < first - SNAP_TOL || t > last + SNAP_TOL {
            return None;
        }
        let t = t.clamp(first, last);
        let r = match self
            .range_starts
            .partition_point(|&s| pts[s] <= t)
        {
            0 => 0,
            k => k - 1,
        };
        let lo = self.range_starts[r];
        let hi = if r + 1 < self.range_starts.len() {
            self.range_starts[r + 1]
        } else {
            pts.len() - 1
        };
        Some(cubic_interp(pts, self.values(), lo, hi, t))
    }

    /// CSV with header `t,x,mu,delayed_t,delay_deriv`; shortest round-trip
    /// decimal per value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,mu,delayed_t,delay_deriv\n");
        let pts = self.points();
        let vals = self.values();
        for i in 0..pts.len() {
            let _ = writeln!(
                out,
                "{:?},{:?},{:?},{:?},{:?}",
                pts[i], vals[i], self.mu[i], self.delayed_t[i], self.delay_deriv[i]
            );
        }
        out
    }
}

/// Lagrange interpolation through up to four nodes of `pts[lo..=hi]` around
/// `t`. Exact (bitwise) at the nodes themselves.
pub(crate) fn cubic_interp(pts: &[f64], vals: &[f64], lo: usize, hi: usize, t: f64) -> f64 {
    let m = hi - lo + 1;
    let k = m.min(4);
    // window of k consecutive nodes around t
    let mut w = lo;
    if m > k {
        let off = pts[lo..=hi].partition_point(|&x| x <= t);
        let i = lo + off.saturating_sub(1);
        w = i.saturating_sub(1).clamp(lo, hi + 1 - k);
    }
    let xs = &pts[w..w + k];
    let ys = &vals[w..w + k];
    let mut acc = 0.0;
    for i in 0..k {
        let mut li = 1.0;
        for j in 0..k {
            if i != j {
                li *= (t - xs[j]) / (xs[i] - xs[j]);
            }
        }
        acc += li * ys[i];
    }
    acc
}

/// True when the delay spans exactly one forward jump everywhere sampled, so
/// the lattice gap `(t0, h)` is empty.
pub fn isolated_gap(df: &DelayFunction) -> bool {
    df.isolated_gap()
}

pub fn solve(p: &DelayProblem) -> Result<Trajectory, SolverError> {
    if matches!(p.scale().kind(), ScaleKind::RealInterval { .. }) {
        return solve_dense(p);
    }
    let start = p.delay.delayed(p.t0())?;
    let pts = p
        .scale()
        .grid(start, p.horizon, p.real_step.unwrap_or(1.0))?;
    for (i, &t) in pts.iter().enumerate() {
        if i + 1 < pts.len() && !p.scale().is_right_scattered(t) {
            return Err(SolverError::MixedScale);
        }
    }
    solve_lattice(p, pts)
}

fn solve_lattice(p: &DelayProblem, pts: Vec<f64>) -> Result<Trajectory, SolverError> {
    let scale = p.scale().clone();
    let t0 = p.t0();
    let n = pts.len();
    let t0_index = pts
        .iter()
        .position(|&t| (t - t0).abs() <= SNAP_TOL)
        .ok_or(ScaleError::PointNotInScale(t0))?;

    let mut mu = Vec::with_capacity(n);
    let mut delayed_t = Vec::with_capacity(n);
    let mut delay_deriv = Vec::with_capacity(n);
    for (i, &t) in pts.iter().enumerate() {
        mu.push(if i + 1 < n {
            pts[i + 1] - t
        } else {
            scale.jump(t).map(|(_, m)| m).unwrap_or(0.0)
        });
        if t >= t0 - SNAP_TOL {
            delayed_t.push(p.delay.delayed(t)?);
            match p.delay.delta_derivative(t) {
                Ok(dd) => delay_deriv.push(dd),
                Err(_) if i + 1 == n => delay_deriv.push(f64::NAN),
                Err(e) => return Err(e.into()),
            }
        } else {
            delayed_t.push(p.delay.delayed(t).unwrap_or(f64::NAN));
            delay_deriv.push(p.delay.delta_derivative(t).unwrap_or(f64::NAN));
        }
    }

    let mut vals = vec![0.0; n];
    for i in 0..=t0_index {
        let v = p.psi(pts[i]);
        if !v.is_finite() {
            return Err(SolverError::BadHistoryValue(pts[i]));
        }
        vals[i] = v;
    }
    for i in t0_index..n.saturating_sub(1) {
        let t = pts[i];
        let d = delayed_t[i];
        if d < pts[0] - SNAP_TOL {
            return Err(SolverError::HistoryGap { t, delayed: d, start: pts[0] });
        }
        let j = lattice_index(&pts, d).ok_or(ScaleError::PointNotInScale(d))?;
        let rhs = p.a(t) * vals[i] + p.b(t) * vals[j] * delay_deriv[i];
        vals[i + 1] = vals[i] + mu[i] * rhs;
    }

    let grid = GridFunction::new(scale, pts, vals)?;
    Ok(Trajectory { grid, mu, delayed_t, delay_deriv, t0_index, range_starts: Vec::new() })
}

fn lattice_index(pts: &[f64], t: f64) -> Option<usize> {
    let i = pts.partition_point(|&x| x < t - SNAP_TOL);
    (i < pts.len() && (pts[i] - t).abs() <= SNAP_TOL).then_some(i)
}

/// Uniform nodes over `[lo, hi]` with exact endpoints.
fn segment_nodes(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(steps + 1);
    for j in 0..=steps {
        out.push(if j == 0 {
            lo
        } else if j == steps {
            hi
        } else {
            lo + (hi - lo) * (j as f64 / steps as f64)
        });
    }
    out
}

fn solve_dense(p: &DelayProblem) -> Result<Trajectory, SolverError> {
    let scale = p.scale().clone();
    let t0 = p.t0();
    let horizon = p.horizon;
    let d0 = p.delay.delayed(t0)?;

    // segment boundaries: delta_plus iterates of t0, clipped at the horizon
    let mut bounds = vec![t0];
    loop {
        let last = *bounds.last().unwrap();
        if last >= horizon - SNAP_TOL {
            break;
        }
        let next = p.delay.advanced(last)?;
        if next <= last + SNAP_TOL {
            return Err(SolverError::NonMonotoneGrid(bounds.len()));
        }
        bounds.push(next.min(horizon));
    }
    if bounds.len() < 2 {
        return Err(SolverError::NonMonotoneGrid(0));
    }

    let seg0 = match p.delay.advanced(t0) {
        Ok(g1) => g1 - t0,
        Err(_) => bounds[1] - bounds[0],
    };
    let base = p.real_step.unwrap_or((seg0 / 64.0).min(1e-2));
    let step0 = seg0 / (seg0 / base).ceil().max(4.0);
    let steps_for = |len: f64| -> usize { ((len / step0).ceil() as usize).max(4) };

    // flat grid: history range first, then one range per segment
    let mut pts: Vec<f64> = Vec::new();
    let mut vals: Vec<f64> = Vec::new();
    let mut range_starts = vec![0usize];
    for t in segment_nodes(d0, t0, steps_for(t0 - d0)) {
        let v = p.psi(t);
        if !v.is_finite() {
            return Err(SolverError::BadHistoryValue(t));
        }
        pts.push(t);
        vals.push(v);
    }

    for w in bounds.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let nodes = segment_nodes(lo, hi, steps_for(hi - lo));
        // everything before this index is a completed range; interpolation
        // windows must not cross into the segment being integrated
        let frozen_end = pts.len() - 1;
        range_starts.push(frozen_end);

        let lookup = |t: f64, pts: &[f64], vals: &[f64], ranges: &[usize]| -> Result<f64, SolverError> {
            let d = p.delay.delayed(t)?;
            if d < d0 - SNAP_TOL {
                return Err(SolverError::HistoryGap { t, delayed: d, start: d0 });
            }
            let d = d.clamp(d0, pts[frozen_end]);
            let r = match ranges.partition_point(|&s| pts[s] <= d) {
                0 => 0,
                k => k - 1,
            };
            let lo_i = ranges[r];
            let hi_i = if r + 1 < ranges.len() { ranges[r + 1] } else { frozen_end };
            let dd = p.delay.delta_derivative(t)?;
            Ok(p.b(t) * cubic_interp(pts, vals, lo_i, hi_i, d) * dd)
        };

        let mut y = *vals.last().unwrap();
        for j in 0..nodes.len() - 1 {
            let t = nodes[j];
            let te = nodes[j + 1];
            let dt = te - t;
            let tm = t + dt / 2.0;
            let frozen = &range_starts[..range_starts.len() - 1];
            let g_t = lookup(t, &pts, &vals, frozen)?;
            let g_m = lookup(tm, &pts, &vals, frozen)?;
            let g_e = lookup(te, &pts, &vals, frozen)?;
            let k1 = p.a(t) * y + g_t;
            let k2 = p.a(tm) * (y + dt / 2.0 * k1) + g_m;
            let k3 = p.a(tm) * (y + dt / 2.0 * k2) + g_m;
            let k4 = p.a(te) * (y + dt * k3) + g_e;
            y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if !y.is_finite() {
                return Err(SolverError::NonFinite(te));
            }
            pts.push(te);
            vals.push(y);
        }
    }

    let n = pts.len();
    let t0_index = range_starts[1];
    let mut mu = vec![0.0; n];
    let mut delayed_t = Vec::with_capacity(n);
    let mut delay_deriv = Vec::with_capacity(n);
    for &t in &pts {
        if t >= t0 - SNAP_TOL {
            delayed_t.push(p.delay.delayed(t)?);
            delay_deriv.push(p.delay.delta_derivative(t)?);
        } else {
            delayed_t.push(p.delay.delayed(t).unwrap_or(f64::NAN));
            delay_deriv.push(p.delay.delta_derivative(t).unwrap_or(f64::NAN));
        }
    }
    if let Ok((_, m)) = scale.jump(*pts.last().unwrap()) {
        mu[n - 1] = m;
    }

    let grid = GridFunction::new(scale, pts, vals)?;
    Ok(Trajectory { grid, mu, delayed_t, delay_deriv, t0_index, range_starts })
}

/// Maximum equation residual over `[t0, T]`.
///
/// Scattered points compare the stored forward step against an identical
/// recomputation, so a freshly solved lattice trajectory reports exactly 0.
/// Dense ranges differentiate the stored values with 4th-order five-point
/// stencils confined to one method-of-steps segment.
pub fn residual(p: &DelayProblem, tr: &Trajectory) -> Result<f64, SolverError> {
    let pts = tr.points();
    let vals = tr.values();
    let rhs_at = |i: usize| -> Result<f64, SolverError> {
        let t = pts[i];
        let d = tr.delayed_t[i];
        let xd = tr
            .value_at(d)
            .ok_or(SolverError::HistoryGap { t, delayed: d, start: pts[0] })?;
        Ok(p.a(t) * vals[i] + p.b(t) * xd * tr.delay_deriv[i])
    };

    let mut worst = 0.0f64;
    if !tr.is_dense() {
        for i in tr.t0_index..pts.len() - 1 {
            let t = pts[i];
            let d = tr.delayed_t[i];
            let j = lattice_index(pts, d).ok_or(ScaleError::PointNotInScale(d))?;
            let rhs = p.a(t) * vals[i] + p.b(t) * vals[j] * tr.delay_deriv[i];
            let r = (vals[i + 1] - (vals[i] + tr.mu[i] * rhs)).abs() / tr.mu[i];
            worst = worst.max(r);
        }
        return Ok(worst);
    }

    for r in 1..tr.range_starts.len() {
        let lo = tr.range_starts[r];
        let hi = if r + 1 < tr.range_starts.len() {
            tr.range_starts[r + 1]
        } else {
            pts.len() - 1
        };
        let m = hi - lo;
        debug_assert!(m >= 4);
        let dt = (pts[hi] - pts[lo]) / m as f64;
        let f = &vals[lo..=hi];
        for j in 0..=m {
            let fd = match j {
                0 => (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4])
                    / (12.0 * dt),
                1 => (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * dt),
                _ if j + 1 == m => {
                    (3.0 * f[m] + 10.0 * f[m - 1] - 18.0 * f[m - 2] + 6.0 * f[m - 3] - f[m - 4])
                        / (12.0 * dt)
                }
                _ if j == m => {
                    (25.0 * f[m] - 48.0 * f[m - 1] + 36.0 * f[m - 2] - 16.0 * f[m - 3]
                        + 3.0 * f[m - 4])
                        / (12.0 * dt)
                }
                _ => (f[j - 2] - 8.0 * f[j - 1] + 8.0 * f[j + 1] - f[j + 2]) / (12.0 * dt),
            };
            worst = worst.max((fd - rhs_at(lo + j)?).abs());
        }
    }
    Ok(worst)
}

/// Closed-form solution on the history regime `[t0, δ₊(h,t0)]`, where the
/// delayed term still reads from `ψ`:
///
/// `x(t) = x(t0) e_a(t,t0)
///  + ∫_{t0}^t (b(s)/(1+μ(s)a(s))) e_a(t,s) ψ(δ₋(h,s)) δ₋^Δ(h,s) Δs`.
pub fn variation_of_parameters(p: &DelayProblem, t: f64) -> Result<f64, SolverError> {
    let scale = p.scale().clone();
    let t0 = p.t0();
    let t = scale.snap(t).ok_or(ScaleError::PointNotInScale(t))?;
    let alpha = p.delay.advanced(t0)?;
    if t > alpha + SNAP_TOL || t < t0 - SNAP_TOL {
        return Err(SolverError::OutOfHistoryRegime { t, alpha });
    }
    let a_fun = {
        let p = p.clone();
        RegressiveFunction::new(scale.clone(), move |u| p.a(u))
    };
    let head = p.psi(t0) * ts_exponential(&a_fun, t, t0)?;
    let integrand = |s: f64| -> f64 {
        let Ok((_, mu)) = scale.jump(s) else { return f64::NAN };
        let Ok(e) = ts_exponential(&a_fun, t, s) else { return f64::NAN };
        let Ok(d) = p.delay.delayed(s) else { return f64::NAN };
        let Ok(dd) = p.delay.delta_derivative(s) else { return f64::NAN };
        p.b(s) / (1.0 + mu * p.a(s)) * e * p.psi(d) * dd
    };
    let tail = scale.delta_integral(&integrand, t0, t)?;
    let out = head + tail;
    if out.is_finite() {
        Ok(out)
    } else {
        Err(SolverError::NonFinite(t))
    }
}
