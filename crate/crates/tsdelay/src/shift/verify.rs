//! Sampling-based verification of the shift axioms.
//!
//! The verifier sweeps a deterministic, seed-shuffled enumeration of
//! `(s, t)` index pairs drawn from scale grids and evaluates every defining
//! property on each admissible pair. Failures are data: each check reports
//! pass/fail together with the counterexample of smallest index pair, so a
//! scale that cannot carry a delay function produces FAIL lines rather than
//! an error.
//!
//! Equality of points is index-exact on lattice scales (all compared values
//! are snapped to the lattice first) and uses a 1e-9 tolerance on real
//! intervals and unions.

use std::fmt;

use super::{ShiftDir, ShiftError, ShiftSystem};
use crate::scale::{ScaleKind, SNAP_TOL};

/// Tolerance for point equality on scales with dense parts.
const REAL_EQ_TOL: f64 = 1e-9;

/// Hard floor on admissible sample pairs demanded by the verifier.
const MIN_PAIRS: usize = 100;

/// How the `(s, t)` sample pairs are drawn.
#[derive(Debug, Clone)]
pub struct SampleSpec {
    /// Target number of admissible pairs (floored at 100).
    pub count: usize,
    /// Seed for the pair-order shuffle.
    pub seed: u64,
    /// Upper end of the sampled window `[t0, horizon]`.
    pub horizon: f64,
    /// Sampling resolution on dense stretches; `None` divides the window
    /// into 63 steps.
    pub real_step: Option<f64>,
    /// When given, also checks the delay-function identities for this shift size.
    pub delay_h: Option<f64>,
}

impl SampleSpec {
    pub fn new(horizon: f64) -> Self {
        SampleSpec { count: 1000, seed: 1, horizon, real_step: None, delay_h: None }
    }

    pub fn with_count(mut self, count: usize) -> Self {
        self.count = count;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_delay(mut self, h: f64) -> Self {
        self.delay_h = Some(h);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    /// Pool indices of the pair, smallest sampled pair kept.
    pub pair: (usize, usize),
    pub s: f64,
    pub t: f64,
    pub detail: String,
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at (s={}, t={}): {}", self.s, self.t, self.detail)
    }
}

#[derive(Debug, Clone)]
pub struct AxiomCheck {
    pub name: String,
    pub checked: usize,
    pub counterexample: Option<Counterexample>,
}

impl AxiomCheck {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct AxiomReport {
    pub system: String,
    pub scale: String,
    /// Number of distinct admissible `(s, t)` pairs swept.
    pub pairs: usize,
    pub checks: Vec<AxiomCheck>,
}

impl AxiomReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(AxiomCheck::passed)
    }

    pub fn check(&self, name: &str) -> Option<&AxiomCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// One line per axiom: name, PASS/FAIL, case count, counterexample.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("system: {} on {}\n", self.system, self.scale));
        out.push_str(&format!("pairs sampled: {}\n", self.pairs));
        for c in &self.checks {
            let cases = if c.checked == 0 {
                "no applicable samples".to_string()
            } else {
                format!("{} cases", c.checked)
            };
            match &c.counterexample {
                None => out.push_str(&format!("{:<24} PASS  ({cases})\n", c.name)),
                Some(ce) => out.push_str(&format!("{:<24} FAIL  ({cases}) {ce}\n", c.name)),
            }
        }
        out
    }
}

impl fmt::Display for AxiomReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn shuffled_indices(n: usize, state: &mut u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = (splitmix64(state) % (i as u64 + 1)) as usize;
        idx.swap(i, j);
    }
    idx
}

struct Acc {
    name: &'static str,
    checked: usize,
    worst: Option<Counterexample>,
}

impl Acc {
    fn new(name: &'static str) -> Self {
        Acc { name, checked: 0, worst: None }
    }

    fn pass(&mut self) {
        self.checked += 1;
    }

    fn fail(&mut self, pair: (usize, usize), s: f64, t: f64, detail: String) {
        self.checked += 1;
        if self.worst.as_ref().is_none_or(|w| pair < w.pair) {
            self.worst = Some(Counterexample { pair, s, t, detail });
        }
    }

    fn record(&mut self, pair: (usize, usize), s: f64, t: f64, ok: bool, detail: impl Fn() -> String) {
        if ok {
            self.pass();
        } else {
            self.fail(pair, s, t, detail());
        }
    }

    fn into_check(self) -> AxiomCheck {
        AxiomCheck { name: self.name.into(), checked: self.checked, counterexample: self.worst }
    }
}

/// Check every shift axiom and (when `sample.delay_h` is set) the
/// delay-function identities on sampled pairs.
///
/// Fails only when fewer than 100 admissible pairs exist; axiom violations
/// are returned inside the report.
pub fn verify_axioms(sys: &ShiftSystem, sample: &SampleSpec) -> Result<AxiomReport, ShiftError> {
    let scale = sys.scale();
    let t0 = sys.t0();
    let lattice_exact = !matches!(
        scale.kind(),
        ScaleKind::RealInterval { .. } | ScaleKind::UnionOfIntervals { .. }
    );
    let eq = |a: f64, b: f64| -> bool {
        if lattice_exact {
            a == b
        } else {
            (a - b).abs() <= REAL_EQ_TOL
        }
    };
    let step = sample
        .real_step
        .unwrap_or(((sample.horizon - t0) / 63.0).max(1e-9));
    let pool = scale.grid(t0, sample.horizon, step)?;
    let n = pool.len();
    let target = sample.count.max(MIN_PAIRS);

    let mut rng = sample.seed ^ 0x7c15_9e37_79b9_7f4a;
    let perm_s = shuffled_indices(n, &mut rng);
    let perm_t = shuffled_indices(n, &mut rng);
    // partner offsets for the checks that need a second size or point
    let stride_t = 1 + (splitmix64(&mut rng) as usize) % n.saturating_sub(1).max(1);
    let stride_s = 1 + (splitmix64(&mut rng) as usize) % n.saturating_sub(1).max(1);

    let sh = |dir: ShiftDir, s: f64, t: f64| sys.shift(dir, s, t).ok();

    let mut closure = Acc::new("closure");
    let mut p1 = Acc::new("P.1");
    let mut p2 = Acc::new("P.2");
    let mut p3 = Acc::new("P.3");
    let mut p4 = Acc::new("P.4");
    let mut p5 = Acc::new("P.5");
    let mut l3 = [
        Acc::new("L3.i"),
        Acc::new("L3.ii"),
        Acc::new("L3.iii"),
        Acc::new("L3.iv"),
        Acc::new("L3.v"),
        Acc::new("L3.vi"),
        Acc::new("L3.vii"),
        Acc::new("L3.viii"),
        Acc::new("L3.ix"),
        Acc::new("L3.x"),
    ];
    let mut cor2 = Acc::new("Cor2.commutation");
    let mut structure = Acc::new("structure.preservation");
    let mut delay_pos = Acc::new("delay.derivative.positive");
    let mut delay_less = Acc::new("delay.less");
    let mut sticky_check = Acc::new("sticky.exclusion");

    if let Some(st) = sys.sticky_point() {
        sticky_check.record((0, 0), f64::NAN, st, st < t0 - SNAP_TOL, || {
            format!("sticky point {st} lies in the working interval [{t0}, oo)")
        });
    }

    let mut admissible = 0usize;
    let total = n.saturating_mul(n);
    for k in 0..total {
        if admissible >= target {
            break;
        }
        let i = perm_s[k % n];
        let j = perm_t[k / n];
        let s = pool[i];
        let t = pool[j];
        let pair = (i, j);

        let raw_m = sys.raw_shift(ShiftDir::Minus, s, t);
        let raw_p = sys.raw_shift(ShiftDir::Plus, s, t);
        if raw_m.is_none() && raw_p.is_none() {
            continue;
        }
        admissible += 1;

        // closure: each raw value must land on the scale, off the sticky point
        for (dir, raw) in [("minus", raw_m), ("plus", raw_p)] {
            let Some(raw) = raw else { continue };
            match sys.shift(if dir == "minus" { ShiftDir::Minus } else { ShiftDir::Plus }, s, t) {
                Ok(_) => closure.pass(),
                Err(ShiftError::ResultLeavesScale { result, .. }) => closure.fail(
                    pair,
                    s,
                    t,
                    format!("delta_{dir}({s}, {t}) = {result} leaves the scale"),
                ),
                Err(ShiftError::StickyPointViolation { sticky, .. }) => closure.fail(
                    pair,
                    s,
                    t,
                    format!("delta_{dir}({s}, {t}) = {raw} hits the sticky point {sticky}"),
                ),
                Err(_) => {}
            }
        }

        let t2 = pool[(j + stride_t) % n];
        let s2 = pool[(i + stride_s) % n];

        // P.1: strict monotonicity in the point, sizes below both points
        if t != t2 {
            let (tlo, thi) = if t < t2 { (t, t2) } else { (t2, t) };
            if s <= tlo + SNAP_TOL {
                for dir in [ShiftDir::Minus, ShiftDir::Plus] {
                    if let (Some(a), Some(b)) = (sh(dir, s, tlo), sh(dir, s, thi)) {
                        p1.record(pair, s, t, a < b, || {
                            format!("shift({s}, {tlo}) = {a} not below shift({s}, {thi}) = {b}")
                        });
                    }
                }
            }
        }

        // P.2: backward shift decreasing, forward increasing in the size
        if s != s2 {
            let (slo, shi) = if s < s2 { (s, s2) } else { (s2, s) };
            if let (Some(a), Some(b)) = (sh(ShiftDir::Minus, slo, t), sh(ShiftDir::Minus, shi, t)) {
                p2.record(pair, s, t, a > b, || {
                    format!("delta_minus({slo}, {t}) = {a} not above delta_minus({shi}, {t}) = {b}")
                });
            }
            if let (Some(a), Some(b)) = (sh(ShiftDir::Plus, slo, t), sh(ShiftDir::Plus, shi, t)) {
                p2.record(pair, s, t, a < b, || {
                    format!("delta_plus({slo}, {t}) = {a} not below delta_plus({shi}, {t}) = {b}")
                });
            }
        }

        // P.3: identity of the initial point in both argument positions
        if let Some(v) = sh(ShiftDir::Plus, t0, t) {
            p3.record(pair, t0, t, eq(v, t), || format!("delta_plus(t0, {t}) = {v} != {t}"));
        }
        if let Some(v) = sh(ShiftDir::Plus, s, t0) {
            p3.record(pair, s, t0, eq(v, s), || format!("delta_plus({s}, t0) = {v} != {s}"));
        }

        // P.4: each direction inverts the other
        if let Some(down) = sh(ShiftDir::Minus, s, t) {
            if let Some(back) = sh(ShiftDir::Plus, s, down) {
                p4.record(pair, s, t, eq(back, t), || {
                    format!("delta_plus({s}, delta_minus({s}, {t})) = {back} != {t}")
                });
            }
        }
        if let Some(up) = sh(ShiftDir::Plus, s, t) {
            if let Some(back) = sh(ShiftDir::Minus, s, up) {
                p4.record(pair, s, t, eq(back, t), || {
                    format!("delta_minus({s}, delta_plus({s}, {t})) = {back} != {t}")
                });
            }
        }

        // P.5: shifts of opposite direction commute
        let u = s2;
        if let Some(lhs) = sh(ShiftDir::Plus, s, t).and_then(|v| sh(ShiftDir::Minus, u, v)) {
            if let Some(rhs) = sh(ShiftDir::Minus, u, t).and_then(|v| sh(ShiftDir::Plus, s, v)) {
                p5.record(pair, s, t, eq(lhs, rhs), || {
                    format!("delta_minus({u}, delta_plus({s}, {t})) = {lhs} != delta_plus({s}, delta_minus({u}, {t})) = {rhs}")
                });
            }
        }
        if let Some(lhs) = sh(ShiftDir::Minus, s, t).and_then(|v| sh(ShiftDir::Plus, u, v)) {
            if let Some(rhs) = sh(ShiftDir::Plus, u, t).and_then(|v| sh(ShiftDir::Minus, s, v)) {
                p5.record(pair, s, t, eq(lhs, rhs), || {
                    format!("delta_plus({u}, delta_minus({s}, {t})) = {lhs} != delta_minus({s}, delta_plus({u}, {t})) = {rhs}")
                });
            }
        }

        // L3.i: shifting a point down by itself reaches t0
        if let Some(v) = sh(ShiftDir::Minus, t, t) {
            l3[0].record(pair, t, t, eq(v, t0), || format!("delta_minus({t}, {t}) = {v} != t0 = {t0}"));
        }

        // L3.ii: backward shift by t0 is the identity
        if let Some(v) = sh(ShiftDir::Minus, t0, t) {
            l3[1].record(pair, t0, t, eq(v, t), || format!("delta_minus(t0, {t}) = {v} != {t}"));
        }

        // L3.iii: delta_plus(s,t) = u iff delta_minus(s,u) = t
        if let Some(up) = sh(ShiftDir::Plus, s, t) {
            if let Some(back) = sh(ShiftDir::Minus, s, up) {
                l3[2].record(pair, s, t, eq(back, t), || {
                    format!("delta_plus({s}, {t}) = {up} but delta_minus({s}, {up}) = {back}")
                });
            }
        }
        if let Some(down) = sh(ShiftDir::Minus, s, t) {
            if let Some(back) = sh(ShiftDir::Plus, s, down) {
                l3[2].record(pair, s, t, eq(back, t), || {
                    format!("delta_minus({s}, {t}) = {down} but delta_plus({s}, {down}) = {back}")
                });
            }
        }

        // L3.iv: delta_plus(t, delta_minus(s, t0)) = delta_minus(s, t)
        if let Some(lhs) = sh(ShiftDir::Minus, s, t0).and_then(|v| sh(ShiftDir::Plus, t, v)) {
            if let Some(rhs) = sh(ShiftDir::Minus, s, t) {
                l3[3].record(pair, s, t, eq(lhs, rhs), || {
                    format!("delta_plus({t}, delta_minus({s}, t0)) = {lhs} != delta_minus({s}, {t}) = {rhs}")
                });
            }
        }

        // L3.v: forward shift is symmetric in its arguments above t0
        if let (Some(a), Some(b)) = (sh(ShiftDir::Plus, s, t), sh(ShiftDir::Plus, t, s)) {
            l3[4].record(pair, s, t, eq(a, b), || {
                format!("delta_plus({s}, {t}) = {a} != delta_plus({t}, {s}) = {b}")
            });
        }

        // L3.vi: forward shifts stay above t0
        if let Some(v) = sh(ShiftDir::Plus, s, t) {
            l3[5].record(pair, s, t, v >= t0 - SNAP_TOL, || {
                format!("delta_plus({s}, {t}) = {v} fell below t0 = {t0}")
            });
        }

        // L3.vii: backward shifts stay above t0 when t >= s
        if t >= s - SNAP_TOL {
            if let Some(v) = sh(ShiftDir::Minus, s, t) {
                l3[6].record(pair, s, t, v >= t0 - SNAP_TOL, || {
                    format!("delta_minus({s}, {t}) = {v} fell below t0 = {t0}")
                });
            }
        }

        // L3.viii: forward shift has positive delta derivative in t
        if let Ok((sig, mu)) = scale.jump(t) {
            if mu > 0.0 {
                if let (Some(a), Some(b)) = (sh(ShiftDir::Plus, s, t), sh(ShiftDir::Plus, s, sig)) {
                    l3[7].record(pair, s, t, (b - a) / mu > 0.0, || {
                        format!("forward quotient ({b} - {a}) / {mu} is not positive")
                    });
                }
            }
        }

        // L3.ix: delta_plus(delta_minus(u,s'), delta_minus(s',v)) = delta_minus(u,v)
        {
            let (u3, s3) = if s <= s2 { (s, s2) } else { (s2, s) };
            let v3 = t;
            if v3 >= s3 - SNAP_TOL {
                let lhs = sh(ShiftDir::Minus, u3, s3).and_then(|in1| {
                    sh(ShiftDir::Minus, s3, v3).and_then(|in2| sh(ShiftDir::Plus, in1, in2))
                });
                if let (Some(lhs), Some(rhs)) = (lhs, sh(ShiftDir::Minus, u3, v3)) {
                    l3[8].record(pair, s, t, eq(lhs, rhs), || {
                        format!("composite shift gave {lhs} != delta_minus({u3}, {v3}) = {rhs}")
                    });
                }
            }
        }

        // L3.x: only the full-size shift reaches t0
        if let Some(v) = sh(ShiftDir::Minus, s, t) {
            if eq(v, t0) {
                l3[9].record(pair, s, t, eq(s, t) || (s - t).abs() <= REAL_EQ_TOL, || {
                    format!("delta_minus({s}, {t}) = t0 although s != t")
                });
            }
        }

        // delay-function identities for the attached shift size h
        if let Some(h) = sample.delay_h {
            let del = sh(ShiftDir::Minus, h, t);
            if let (Ok((sig, mu)), Some(dt)) = (scale.jump(t), del) {
                // Cor2: the delay commutes with the forward jump
                if let (Some(lhs), Ok((sig2, _))) = (sh(ShiftDir::Minus, h, sig), scale.jump(dt)) {
                    cor2.record(pair, h, t, eq(lhs, sig2), || {
                        format!("delta_minus(h, sigma({t})) = {lhs} != sigma(delta_minus(h, {t})) = {sig2}")
                    });
                }
                // structure preservation: dense to dense, scattered to scattered
                if let Ok((_, mu2)) = scale.jump(dt) {
                    let ok = if mu > 0.0 { mu2 > 0.0 } else { mu2 == 0.0 };
                    structure.record(pair, h, t, ok, || {
                        if mu > 0.0 {
                            format!("right-scattered {t} maps to right-dense {dt}")
                        } else {
                            format!("right-dense {t} maps to right-scattered {dt}")
                        }
                    });
                }
                // positive delay derivative via the forward quotient
                if mu > 0.0 {
                    if let Some(dn) = sh(ShiftDir::Minus, h, sig) {
                        delay_pos.record(pair, h, t, (dn - dt) / mu > 0.0, || {
                            format!("delay quotient ({dn} - {dt}) / {mu} is not positive")
                        });
                    }
                }
                // the delay actually delays, and stays above t0 once t >= h
                let mut ok = dt < t;
                let mut why = format!("delta_minus(h, {t}) = {dt} does not precede {t}");
                if ok && t >= h - SNAP_TOL && dt < t0 - SNAP_TOL {
                    ok = false;
                    why = format!("delta_minus(h, {t}) = {dt} fell below t0 = {t0}");
                }
                delay_less.record(pair, h, t, ok, || why.clone());
            }
        }
    }

    if admissible < MIN_PAIRS {
        return Err(ShiftError::InsufficientSamples { needed: MIN_PAIRS, got: admissible });
    }

    let mut checks = vec![
        closure.into_check(),
        p1.into_check(),
        p2.into_check(),
        p3.into_check(),
        p4.into_check(),
        p5.into_check(),
    ];
    checks.extend(l3.into_iter().map(Acc::into_check));
    if sample.delay_h.is_some() {
        checks.push(cor2.into_check());
        checks.push(structure.into_check());
        checks.push(delay_pos.into_check());
        checks.push(delay_less.into_check());
    }
    if sys.sticky_point().is_some() {
        checks.push(sticky_check.into_check());
    }

    Ok(AxiomReport {
        system: sys.name().to_string(),
        scale: scale.describe(),
        pairs: admissible,
        checks,
    })
}
