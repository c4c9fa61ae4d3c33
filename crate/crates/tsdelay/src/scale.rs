//! Time-scale domains and the grid operations built on them.
//!
//! A time scale is a closed subset of the real line. Points are carried as
//! `f64` values; every operation snaps its arguments to the scale first, so
//! callers may pass values that are within [`SNAP_TOL`] of a true point.
//! Lattice-like scales (unit, step, q-power, square-root) represent points by
//! an integer index internally and derive the real value from it, which keeps
//! stepping and equality exact.
//!
//! Conventions:
//! - the forward jump of the supremum of a bounded scale is the supremum
//!   itself; asking for a jump *past* it is an [`ScaleError::AtSupremum`];
//! - `delta_integral` is oriented: swapping the endpoints flips the sign;
//! - dense stretches are integrated with a refined composite Simpson rule to
//!   the scale's `quad_tol` and differentiated with a central difference of
//!   width `fd_step`.

use thiserror::Error;

/// Absolute tolerance used to recognise a real number as a scale point.
pub const SNAP_TOL: f64 = 1e-9;

/// Default tolerance for quadrature over dense stretches.
pub const DEFAULT_QUAD_TOL: f64 = 1e-10;

/// Default width of the central difference used at right-dense points.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ScaleError {
    #[error("point {0} is not in the time scale")]
    PointNotInScale(f64),
    #[error("point {0} is the supremum of the scale; no forward step exists")]
    AtSupremum(f64),
    #[error("interval [{0}, {1}] is empty or reversed")]
    EmptyInterval(f64, f64),
    #[error("grid from {0} to {1} would contain infinitely many points")]
    InfiniteGrid(f64, f64),
    #[error("step {0} is not a positive finite real")]
    BadStep(f64),
    #[error("invalid scale: {0}")]
    InvalidScale(String),
    #[error("invalid grid function: {0}")]
    InvalidGrid(String),
}

/// The supported families of time scales.
#[derive(Debug, Clone, PartialEq)]
pub enum ScaleKind {
    /// A closed real interval `[lo, hi]`; either bound may be infinite.
    RealInterval { lo: f64, hi: f64 },
    /// `origin + Z`.
    UnitLattice { origin: f64 },
    /// `origin + step * Z` with `step > 0`.
    StepLattice { step: f64, origin: f64 },
    /// `{ q^n : n in Z } ∪ {0}` with `q > 1`; `0` is the accumulation point.
    QLattice { q: f64 },
    /// `{ sqrt(n) : n in N }`.
    SqrtNaturals,
    /// A finite strictly increasing list of points.
    FiniteGrid { points: Vec<f64> },
    /// A disjoint, ordered union of closed intervals; outer bounds may be
    /// infinite. Interval right endpoints are right-scattered.
    UnionOfIntervals { intervals: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeScale {
    kind: ScaleKind,
    quad_tol: f64,
    fd_step: f64,
}

impl TimeScale {
    pub fn new(kind: ScaleKind) -> Result<Self, ScaleError> {
        match &kind {
            ScaleKind::RealInterval { lo, hi } => {
                if !(lo < hi) || lo.is_nan() || hi.is_nan() {
                    return Err(ScaleError::InvalidScale(format!(
                        "real interval needs lo < hi, got [{lo}, {hi}]"
                    )));
                }
            }
            ScaleKind::UnitLattice { origin } => {
                if !origin.is_finite() {
                    return Err(ScaleError::InvalidScale("lattice origin must be finite".into()));
                }
            }
            ScaleKind::StepLattice { step, origin } => {
                if !(step.is_finite() && *step > 0.0) {
                    return Err(ScaleError::BadStep(*step));
                }
                if !origin.is_finite() {
                    return Err(ScaleError::InvalidScale("lattice origin must be finite".into()));
                }
            }
            ScaleKind::QLattice { q } => {
                if !(q.is_finite() && *q > 1.0) {
                    return Err(ScaleError::InvalidScale(format!("q-lattice needs q > 1, got {q}")));
                }
            }
            ScaleKind::SqrtNaturals => {}
            ScaleKind::FiniteGrid { points } => {
                if points.is_empty() {
                    return Err(ScaleError::InvalidScale("finite grid needs at least one point".into()));
                }
                if points.windows(2).any(|w| !(w[0] < w[1])) || points.iter().any(|p| !p.is_finite()) {
                    return Err(ScaleError::InvalidScale(
                        "finite grid points must be finite and strictly increasing".into(),
                    ));
                }
            }
            ScaleKind::UnionOfIntervals { intervals } => {
                if intervals.is_empty() {
                    return Err(ScaleError::InvalidScale("union needs at least one interval".into()));
                }
                for (lo, hi) in intervals {
                    if !(lo < hi) || lo.is_nan() || hi.is_nan() {
                        return Err(ScaleError::InvalidScale(format!(
                            "union interval [{lo}, {hi}] is degenerate"
                        )));
                    }
                }
                if intervals.windows(2).any(|w| !(w[0].1 < w[1].0)) {
                    return Err(ScaleError::InvalidScale(
                        "union intervals must be ordered and disjoint".into(),
                    ));
                }
            }
        }
        Ok(TimeScale { kind, quad_tol: DEFAULT_QUAD_TOL, fd_step: DEFAULT_FD_STEP })
    }

    pub fn real_line() -> Self {
        Self::new(ScaleKind::RealInterval { lo: f64::NEG_INFINITY, hi: f64::INFINITY }).unwrap()
    }

    pub fn real_interval(lo: f64, hi: f64) -> Result<Self, ScaleError> {
        Self::new(ScaleKind::RealInterval { lo, hi })
    }

    pub fn half_line(lo: f64) -> Self {
        Self::new(ScaleKind::RealInterval { lo, hi: f64::INFINITY }).unwrap()
    }

    pub fn integers() -> Self {
        Self::new(ScaleKind::UnitLattice { origin: 0.0 }).unwrap()
    }

    pub fn unit_lattice(origin: f64) -> Result<Self, ScaleError> {
        Self::new(ScaleKind::UnitLattice { origin })
    }

    pub fn step_lattice(step: f64, origin: f64) -> Result<Self, ScaleError> {
        Self::new(ScaleKind::StepLattice { step, origin })
    }

    pub fn q_lattice(q: f64) -> Result<Self, ScaleError> {
        Self::new(ScaleKind::QLattice { q })
    }

    pub fn sqrt_naturals() -> Self {
        Self::new(ScaleKind::SqrtNaturals).unwrap()
    }

    pub fn finite_grid(points: Vec<f64>) -> Result<Self, ScaleError> {
        Self::new(ScaleKind::FiniteGrid { points })
    }

    pub fn union_of_intervals(intervals: Vec<(f64, f64)>) -> Result<Self, ScaleError> {
        Self::new(ScaleKind::UnionOfIntervals { intervals })
    }

    pub fn kind(&self) -> &ScaleKind {
        &self.kind
    }

    /// Short human-readable description for reports.
    pub fn describe(&self) -> String {
        match &self.kind {
            ScaleKind::RealInterval { lo, hi } => format!("real interval [{lo}, {hi}]"),
            ScaleKind::UnitLattice { origin } => format!("unit lattice {origin} + Z"),
            ScaleKind::StepLattice { step, origin } => format!("lattice {origin} + {step}*Z"),
            ScaleKind::QLattice { q } => format!("power lattice {q}^Z with 0"),
            ScaleKind::SqrtNaturals => "square roots of the naturals".into(),
            ScaleKind::FiniteGrid { points } => format!("finite grid of {} points", points.len()),
            ScaleKind::UnionOfIntervals { intervals } => {
                let parts: Vec<String> =
                    intervals.iter().map(|(a, b)| format!("[{a}, {b}]")).collect();
                format!("union {}", parts.join(" u "))
            }
        }
    }

    pub fn quad_tol(&self) -> f64 {
        self.quad_tol
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn with_quad_tol(mut self, tol: f64) -> Self {
        assert!(tol > 0.0, "quadrature tolerance must be positive");
        self.quad_tol = tol;
        self
    }

    pub fn with_fd_step(mut self, step: f64) -> Self {
        assert!(step > 0.0, "finite-difference step must be positive");
        self.fd_step = step;
        self
    }

    /// Least upper bound, when finite.
    pub fn supremum(&self) -> Option<f64> {
        match &self.kind {
            ScaleKind::RealInterval { hi, .. } => hi.is_finite().then_some(*hi),
            ScaleKind::FiniteGrid { points } => points.last().copied(),
            ScaleKind::UnionOfIntervals { intervals } => {
                let hi = intervals.last().unwrap().1;
                hi.is_finite().then_some(hi)
            }
            _ => None,
        }
    }

    /// Greatest lower bound, when finite.
    pub fn infimum(&self) -> Option<f64> {
        match &self.kind {
            ScaleKind::RealInterval { lo, .. } => lo.is_finite().then_some(*lo),
            ScaleKind::FiniteGrid { points } => points.first().copied(),
            ScaleKind::UnionOfIntervals { intervals } => {
                let lo = intervals.first().unwrap().0;
                lo.is_finite().then_some(lo)
            }
            ScaleKind::QLattice { .. } => Some(0.0),
            ScaleKind::SqrtNaturals => Some(0.0),
            _ => None,
        }
    }

    /// Canonical scale value within [`SNAP_TOL`] of `t`, if any.
    pub fn snap(&self, t: f64) -> Option<f64> {
        if t.is_nan() {
            return None;
        }
        match &self.kind {
            ScaleKind::RealInterval { lo, hi } => {
                if t >= lo - SNAP_TOL && t <= hi + SNAP_TOL {
                    Some(t.clamp(*lo, *hi))
                } else {
                    None
                }
            }
            ScaleKind::UnitLattice { origin } => {
                let k = (t - origin).round();
                let v = origin + k;
                ((v - t).abs() <= SNAP_TOL).then_some(v)
            }
            ScaleKind::StepLattice { step, origin } => {
                let k = ((t - origin) / step).round();
                let v = origin + k * step;
                ((v - t).abs() <= SNAP_TOL).then_some(v)
            }
            ScaleKind::QLattice { q } => {
                if t == 0.0 {
                    return Some(0.0);
                }
                if t < 0.0 {
                    return (t.abs() <= SNAP_TOL).then_some(0.0);
                }
                let n = (t.ln() / q.ln()).round();
                if n.abs() > 4000.0 {
                    return None;
                }
                let v = q.powi(n as i32);
                if (v - t).abs() <= SNAP_TOL {
                    Some(v)
                } else {
                    (t <= SNAP_TOL).then_some(0.0)
                }
            }
            ScaleKind::SqrtNaturals => {
                if t < -SNAP_TOL {
                    return None;
                }
                let n = (t * t).round().max(0.0);
                let v = n.sqrt();
                ((v - t).abs() <= SNAP_TOL).then_some(v)
            }
            ScaleKind::FiniteGrid { points } => {
                let i = points.partition_point(|p| *p < t);
                let mut best: Option<f64> = None;
                for j in [i.wrapping_sub(1), i] {
                    if let Some(&p) = points.get(j) {
                        if (p - t).abs() <= SNAP_TOL
                            && best.is_none_or(|b| (p - t).abs() < (b - t).abs())
                        {
                            best = Some(p);
                        }
                    }
                }
                best
            }
            ScaleKind::UnionOfIntervals { intervals } => intervals
                .iter()
                .find(|(lo, hi)| t >= lo - SNAP_TOL && t <= hi + SNAP_TOL)
                .map(|(lo, hi)| t.clamp(*lo, *hi)),
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        self.snap(t).is_some()
    }

    fn require(&self, t: f64) -> Result<f64, ScaleError> {
        self.snap(t).ok_or(ScaleError::PointNotInScale(t))
    }

    /// Forward jump `sigma(t)` and graininess `mu(t) = sigma(t) - t`.
    ///
    /// Fails with [`ScaleError::AtSupremum`] at the maximum of a bounded scale.
    pub fn jump(&self, t: f64) -> Result<(f64, f64), ScaleError> {
        let t = self.require(t)?;
        match &self.kind {
            ScaleKind::RealInterval { hi, .. } => {
                if t >= *hi {
                    Err(ScaleError::AtSupremum(t))
                } else {
                    Ok((t, 0.0))
                }
            }
            ScaleKind::UnitLattice { origin } => {
                let k = (t - origin).round();
                let s = origin + (k + 1.0);
                Ok((s, s - t))
            }
            ScaleKind::StepLattice { step, origin } => {
                let k = ((t - origin) / step).round();
                let s = origin + (k + 1.0) * step;
                Ok((s, s - t))
            }
            ScaleKind::QLattice { q } => {
                if t == 0.0 {
                    // 0 is the accumulation point of the negative powers: right-dense.
                    Ok((0.0, 0.0))
                } else {
                    let n = (t.ln() / q.ln()).round() as i32;
                    let s = q.powi(n + 1);
                    Ok((s, s - t))
                }
            }
            ScaleKind::SqrtNaturals => {
                let n = (t * t).round();
                let s = (n + 1.0).sqrt();
                Ok((s, s - t))
            }
            ScaleKind::FiniteGrid { points } => {
                let i = points.partition_point(|p| *p < t + SNAP_TOL);
                match points.get(i) {
                    Some(&s) => Ok((s, s - t)),
                    None => Err(ScaleError::AtSupremum(t)),
                }
            }
            ScaleKind::UnionOfIntervals { intervals } => {
                let idx = intervals
                    .iter()
                    .position(|(lo, hi)| t >= lo - SNAP_TOL && t <= hi + SNAP_TOL)
                    .ok_or(ScaleError::PointNotInScale(t))?;
                let (_, hi) = intervals[idx];
                if t < hi {
                    Ok((t, 0.0))
                } else if let Some((nlo, _)) = intervals.get(idx + 1) {
                    Ok((*nlo, nlo - t))
                } else {
                    Err(ScaleError::AtSupremum(t))
                }
            }
        }
    }

    pub fn sigma(&self, t: f64) -> Result<f64, ScaleError> {
        Ok(self.jump(t)?.0)
    }

    pub fn mu(&self, t: f64) -> Result<f64, ScaleError> {
        Ok(self.jump(t)?.1)
    }

    /// True when `t` is right-scattered (`mu(t) > 0`).
    pub fn is_right_scattered(&self, t: f64) -> bool {
        matches!(self.jump(t), Ok((_, mu)) if mu > 0.0)
    }

    /// All scale points of `[a, b]`; dense stretches are sampled with spacing
    /// at most `real_step`, always including stretch endpoints.
    pub fn grid(&self, a: f64, b: f64, real_step: f64) -> Result<Vec<f64>, ScaleError> {
        if !(real_step.is_finite() && real_step > 0.0) {
            return Err(ScaleError::BadStep(real_step));
        }
        let a = self.require(a)?;
        let b = self.require(b)?;
        if a > b + SNAP_TOL {
            return Err(ScaleError::EmptyInterval(a, b));
        }
        if (b - a).abs() <= SNAP_TOL {
            return Ok(vec![a]);
        }
        match &self.kind {
            ScaleKind::RealInterval { .. } => Ok(dense_fill(a, b, real_step)),
            ScaleKind::UnitLattice { origin } => {
                let ka = (a - origin).round() as i64;
                let kb = (b - origin).round() as i64;
                Ok((ka..=kb).map(|k| origin + k as f64).collect())
            }
            ScaleKind::StepLattice { step, origin } => {
                let ka = ((a - origin) / step).round() as i64;
                let kb = ((b - origin) / step).round() as i64;
                Ok((ka..=kb).map(|k| origin + k as f64 * step).collect())
            }
            ScaleKind::QLattice { q } => {
                if a == 0.0 {
                    return Err(ScaleError::InfiniteGrid(a, b));
                }
                let na = (a.ln() / q.ln()).round() as i32;
                let nb = (b.ln() / q.ln()).round() as i32;
                Ok((na..=nb).map(|n| q.powi(n)).collect())
            }
            ScaleKind::SqrtNaturals => {
                let na = (a * a).round() as i64;
                let nb = (b * b).round() as i64;
                Ok((na..=nb).map(|n| (n as f64).sqrt()).collect())
            }
            ScaleKind::FiniteGrid { points } => {
                let i = points.partition_point(|p| *p < a - SNAP_TOL);
                let j = points.partition_point(|p| *p <= b + SNAP_TOL);
                Ok(points[i..j].to_vec())
            }
            ScaleKind::UnionOfIntervals { intervals } => {
                let mut out = Vec::new();
                for &(lo, hi) in intervals {
                    let s = lo.max(a);
                    let e = hi.min(b);
                    if s > e {
                        continue;
                    }
                    if (e - s).abs() <= SNAP_TOL {
                        out.push(s);
                    } else {
                        out.extend(dense_fill(s, e, real_step));
                    }
                }
                Ok(out)
            }
        }
    }

    /// Oriented delta integral of `f` from `a` to `b`.
    ///
    /// Right-scattered points contribute `mu(t) * f(t)`; dense stretches are
    /// integrated by a refined composite Simpson rule to `quad_tol`.
    pub fn delta_integral(&self, f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Result<f64, ScaleError> {
        let a = self.require(a)?;
        let b = self.require(b)?;
        if (a - b).abs() <= SNAP_TOL {
            return Ok(0.0);
        }
        let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
        if matches!(self.kind, ScaleKind::QLattice { .. }) && lo == 0.0 {
            return Err(ScaleError::InfiniteGrid(lo, hi));
        }
        let mut acc = 0.0;
        let mut cur = lo;
        while hi - cur > SNAP_TOL {
            let (sig, mu) = self.jump(cur)?;
            if mu > 0.0 {
                acc += mu * f(cur);
                cur = sig;
            } else {
                let end = self.dense_run_end(cur).min(hi);
                debug_assert!(end > cur);
                acc += simpson_refined(f, cur, end, self.quad_tol);
                cur = end;
            }
        }
        Ok(sign * acc)
    }

    /// Delta derivative of `f` at `t`: the exact forward quotient at
    /// right-scattered points, a central difference of width `fd_step` at
    /// right-dense points.
    pub fn delta_derivative(&self, f: &dyn Fn(f64) -> f64, t: f64) -> Result<f64, ScaleError> {
        let t = self.require(t)?;
        let (sig, mu) = self.jump(t)?;
        if mu > 0.0 {
            return Ok((f(sig) - f(t)) / mu);
        }
        let (run_lo, run_hi) = self.dense_run_span(t);
        let room_left = t - run_lo;
        let room_right = run_hi - t;
        let mut eps = self.fd_step;
        if room_left >= eps && room_right >= eps {
            return Ok((f(t + eps) - f(t - eps)) / (2.0 * eps));
        }
        if room_left < eps {
            eps = eps.min(room_right / 2.0);
            // second-order one-sided difference at a left edge
            return Ok((-3.0 * f(t) + 4.0 * f(t + eps) - f(t + 2.0 * eps)) / (2.0 * eps));
        }
        eps = eps.min(room_left / 2.0);
        Ok((3.0 * f(t) - 4.0 * f(t - eps) + f(t - 2.0 * eps)) / (2.0 * eps))
    }

    /// End of the maximal right-dense run starting at `t` (only meaningful
    /// when `mu(t) = 0`).
    pub(crate) fn dense_run_end(&self, t: f64) -> f64 {
        match &self.kind {
            ScaleKind::RealInterval { hi, .. } => *hi,
            ScaleKind::UnionOfIntervals { intervals } => intervals
                .iter()
                .find(|(lo, hi)| t >= lo - SNAP_TOL && t <= hi + SNAP_TOL)
                .map(|(_, hi)| *hi)
                .unwrap_or(t),
            _ => t,
        }
    }

    fn dense_run_span(&self, t: f64) -> (f64, f64) {
        match &self.kind {
            ScaleKind::RealInterval { lo, hi } => (*lo, *hi),
            ScaleKind::UnionOfIntervals { intervals } => intervals
                .iter()
                .find(|(lo, hi)| t >= lo - SNAP_TOL && t <= hi + SNAP_TOL)
                .map(|&(lo, hi)| (lo, hi))
                .unwrap_or((t, t)),
            _ => (t, t),
        }
    }
}

/// Uniform fill of `[a, b]` with spacing at most `step`, endpoints exact.
fn dense_fill(a: f64, b: f64, step: f64) -> Vec<f64> {
    let n = ((b - a) / step).ceil().max(1.0) as usize;
    let h = (b - a) / n as f64;
    let mut pts: Vec<f64> = (0..n).map(|i| a + i as f64 * h).collect();
    pts.push(b);
    pts
}

/// Composite Simpson with interval doubling and a final Richardson step.
pub(crate) fn simpson_refined(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let composite = |n: usize| -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    };
    let mut n = 8;
    let mut prev = composite(n);
    loop {
        n *= 2;
        let cur = composite(n);
        if (cur - prev).abs() <= tol * cur.abs().max(1.0) || n >= (1 << 20) {
            return cur + (cur - prev) / 15.0;
        }
        prev = cur;
    }
}

/// Values sampled on a scale grid.
///
/// Invariant: points are strictly increasing, all on the scale, and on
/// right-scattered points consecutive entries are linked by the forward jump.
#[derive(Debug, Clone)]
pub struct GridFunction {
    scale: TimeScale,
    points: Vec<f64>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(scale: TimeScale, points: Vec<f64>, values: Vec<f64>) -> Result<Self, ScaleError> {
        if points.len() != values.len() {
            return Err(ScaleError::InvalidGrid(format!(
                "{} points but {} values",
                points.len(),
                values.len()
            )));
        }
        if points.is_empty() {
            return Err(ScaleError::InvalidGrid("empty grid".into()));
        }
        let mut snapped = Vec::with_capacity(points.len());
        for &p in &points {
            snapped.push(scale.snap(p).ok_or(ScaleError::PointNotInScale(p))?);
        }
        for w in snapped.windows(2) {
            if !(w[0] < w[1]) {
                return Err(ScaleError::InvalidGrid(format!(
                    "points not strictly increasing near {}",
                    w[0]
                )));
            }
        }
        for i in 0..snapped.len() - 1 {
            let (sig, mu) = scale.jump(snapped[i])?;
            if mu > 0.0 && (snapped[i + 1] - sig).abs() > SNAP_TOL {
                return Err(ScaleError::InvalidGrid(format!(
                    "gap after right-scattered point {}: next grid point {} is not its jump {}",
                    snapped[i],
                    snapped[i + 1],
                    sig
                )));
            }
        }
        Ok(GridFunction { scale, points: snapped, values })
    }

    pub fn scale(&self) -> &TimeScale {
        &self.scale
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the grid point equal (within snap) to `t`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let i = self.points.partition_point(|p| *p < t - SNAP_TOL);
        (i < self.points.len() && (self.points[i] - t).abs() <= SNAP_TOL).then_some(i)
    }

    pub fn value_at(&self, t: f64) -> Option<f64> {
        self.index_of(t).map(|i| self.values[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q2() -> TimeScale {
        TimeScale::q_lattice(2.0).unwrap()
    }

    #[test]
    fn jump_on_q_lattice() {
        let (sig, mu) = q2().jump(4.0).unwrap();
        assert_eq!((sig, mu), (8.0, 4.0));
    }

    #[test]
    fn jump_on_half_line_is_dense() {
        let ts = TimeScale::half_line(0.0);
        assert_eq!(ts.jump(1.5).unwrap(), (1.5, 0.0));
    }

    #[test]
    fn jump_at_bounded_supremum_fails() {
        let ts = TimeScale::real_interval(0.0, 2.0).unwrap();
        assert_eq!(ts.jump(2.0), Err(ScaleError::AtSupremum(2.0)));
        let fg = TimeScale::finite_grid(vec![0.0, 1.0]).unwrap();
        assert_eq!(fg.jump(1.0), Err(ScaleError::AtSupremum(1.0)));
    }

    #[test]
    fn q_lattice_accumulation_point_is_right_dense() {
        assert_eq!(q2().jump(0.0).unwrap(), (0.0, 0.0));
        assert!(q2().contains(0.0));
    }

    #[test]
    fn snap_recovers_lattice_points() {
        assert_eq!(q2().snap(4.0000000004), Some(4.0));
        assert_eq!(q2().snap(4.1), None);
        let sq = TimeScale::sqrt_naturals();
        let r5 = 5.0f64.sqrt();
        assert_eq!(sq.snap(r5 + 2e-10), Some(r5));
        assert_eq!(sq.snap(-0.5), None);
        let hl = TimeScale::step_lattice(0.5, 0.0).unwrap();
        assert_eq!(hl.snap(1.4999999999), Some(1.5));
    }

    #[test]
    fn union_jump_at_interior_right_endpoint() {
        let ts = TimeScale::union_of_intervals(vec![(f64::NEG_INFINITY, 0.0), (1.0, f64::INFINITY)])
            .unwrap();
        assert_eq!(ts.jump(0.0).unwrap(), (1.0, 1.0));
        assert_eq!(ts.jump(-0.5).unwrap(), (-0.5, 0.0));
        assert!(!ts.contains(0.5));
        assert!(ts.contains(-3.0));
    }

    #[test]
    fn grid_on_q_lattice_enumerates_powers() {
        assert_eq!(q2().grid(1.0, 8.0, 0.1).unwrap(), vec![1.0, 2.0, 4.0, 8.0]);
    }

    #[test]
    fn grid_on_reals_includes_endpoints() {
        let ts = TimeScale::half_line(0.0);
        assert_eq!(ts.grid(0.0, 1.0, 0.5).unwrap(), vec![0.0, 0.5, 1.0]);
        let g = ts.grid(0.0, 1.0, 0.3).unwrap();
        assert_eq!(*g.first().unwrap(), 0.0);
        assert_eq!(*g.last().unwrap(), 1.0);
        for w in g.windows(2) {
            assert!(w[1] - w[0] <= 0.3 + 1e-12);
        }
    }

    #[test]
    fn grid_rejects_reversed_interval() {
        let ts = TimeScale::integers();
        assert!(matches!(ts.grid(3.0, 1.0, 1.0), Err(ScaleError::EmptyInterval(_, _))));
    }

    #[test]
    fn grid_rejects_points_off_scale() {
        assert!(matches!(q2().grid(3.0, 8.0, 1.0), Err(ScaleError::PointNotInScale(_))));
    }

    #[test]
    fn grid_from_q_lattice_accumulation_point_is_infinite() {
        assert!(matches!(q2().grid(0.0, 8.0, 1.0), Err(ScaleError::InfiniteGrid(_, _))));
    }

    #[test]
    fn integral_on_q_lattice_is_weighted_sum() {
        let v = q2().delta_integral(&|_| 1.0, 1.0, 8.0).unwrap();
        assert_eq!(v, 7.0); // mu(1) + mu(2) + mu(4) = 1 + 2 + 4
    }

    #[test]
    fn integral_on_unit_lattice_is_left_sum() {
        let ts = TimeScale::integers();
        let v = ts.delta_integral(&|t| t * t, 0.0, 4.0).unwrap();
        assert_eq!(v, 0.0 + 1.0 + 4.0 + 9.0);
    }

    #[test]
    fn integral_on_reals_matches_antiderivative() {
        let ts = TimeScale::half_line(0.0);
        let v = ts.delta_integral(&|t| t * t, 0.0, 1.0).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn integral_is_oriented() {
        let ts = TimeScale::half_line(0.0);
        let fwd = ts.delta_integral(&|t| t.exp(), 0.0, 2.0).unwrap();
        let bwd = ts.delta_integral(&|t| t.exp(), 2.0, 0.0).unwrap();
        assert_eq!(fwd, -bwd);
    }

    #[test]
    fn integral_additivity_is_tight() {
        let ts = TimeScale::half_line(0.0);
        let f = |t: f64| (1.3 * t).sin() + t * t;
        let ab = ts.delta_integral(&f, 0.0, 1.0).unwrap();
        let bc = ts.delta_integral(&f, 1.0, 2.3).unwrap();
        let ac = ts.delta_integral(&f, 0.0, 2.3).unwrap();
        assert!((ab + bc - ac).abs() < 1e-12);

        let zi = TimeScale::integers();
        let g = |t: f64| 0.25 * t;
        let s = zi.delta_integral(&g, 0.0, 5.0).unwrap()
            + zi.delta_integral(&g, 5.0, 9.0).unwrap();
        assert_eq!(s, zi.delta_integral(&g, 0.0, 9.0).unwrap());
    }

    #[test]
    fn integral_over_union_mixes_sum_and_quadrature() {
        let ts = TimeScale::union_of_intervals(vec![(-2.0, 0.0), (1.0, 3.0)]).unwrap();
        // [-2,0] dense + jump at 0 (mu=1) + [1,3] dense, f = 1
        let v = ts.delta_integral(&|_| 1.0, -2.0, 3.0).unwrap();
        assert!((v - 5.0).abs() < 1e-10);
    }

    #[test]
    fn derivative_on_unit_lattice_is_forward_quotient() {
        let ts = TimeScale::integers();
        // (t^2)^delta at 3 on Z: 3 + sigma(3) = 7
        assert_eq!(ts.delta_derivative(&|t| t * t, 3.0).unwrap(), 7.0);
    }

    #[test]
    fn derivative_on_reals_is_central_difference() {
        let ts = TimeScale::real_line();
        assert!((ts.delta_derivative(&|t| t * t, 3.0).unwrap() - 6.0).abs() < 1e-9);
    }

    #[test]
    fn derivative_at_dense_left_edge_uses_one_sided_stencil() {
        let ts = TimeScale::real_interval(0.0, 1.0).unwrap();
        assert!((ts.delta_derivative(&|t| t * t, 0.0).unwrap() - 0.0).abs() < 1e-8);
        assert!(matches!(ts.delta_derivative(&|t| t, 1.0), Err(ScaleError::AtSupremum(_))));
    }

    #[test]
    fn product_rule_exact_on_isolated_scale() {
        // (fg)^delta = f^delta g(sigma) + f g^delta, dyadic data so both
        // routes are exact in floating point
        let ts = TimeScale::step_lattice(0.5, 0.0).unwrap();
        let f = |t: f64| 0.25 * t * t - 1.5 * t;
        let g = |t: f64| 2.0 * t + 0.125;
        for k in 0..20 {
            let t = 0.5 * k as f64;
            let lhs = ts.delta_derivative(&|u| f(u) * g(u), t).unwrap();
            let (sig, _) = ts.jump(t).unwrap();
            let rhs = ts.delta_derivative(&f, t).unwrap() * g(sig)
                + f(t) * ts.delta_derivative(&g, t).unwrap();
            assert_eq!(lhs, rhs, "product rule at t = {t}");
        }
    }

    #[test]
    fn grid_function_checks_jump_consistency() {
        let ts = TimeScale::integers();
        let ok = GridFunction::new(ts.clone(), vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 3.0]);
        assert!(ok.is_ok());
        let gap = GridFunction::new(ts, vec![0.0, 2.0], vec![1.0, 2.0]);
        assert!(matches!(gap, Err(ScaleError::InvalidGrid(_))));
    }

    #[test]
    fn grid_function_lookup_snaps() {
        let ts = TimeScale::q_lattice(2.0).unwrap();
        let gf = GridFunction::new(ts, vec![1.0, 2.0, 4.0], vec![10.0, 20.0, 40.0]).unwrap();
        assert_eq!(gf.value_at(2.0000000001), Some(20.0));
        assert_eq!(gf.value_at(3.0), None);
        assert_eq!(gf.index_of(4.0), Some(2));
    }
}
