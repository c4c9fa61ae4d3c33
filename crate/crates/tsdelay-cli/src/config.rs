//! Flat INI-style run configuration.
//!
//! Sections: `[scale] [shift] [problem] [certify] [compare] [output] [axioms]`.
//! Values are expressions in `t`; quoted or not, they go through the same
//! parser, so `horizon = 20` and `b = "-3/2"` both work. History tables use
//! `psi.table = (t,v);(t,v);...` and are linearly interpolated between nodes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use tsdelay::expr::{self, Expr};
use tsdelay::stability::{LiteratureParams, SearchGrids};
use tsdelay::{builtin_shift, DelayFunction, DelayProblem, ShiftSystem, TimeScale};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {err}")]
    Io { path: String, err: String },
    #[error("{path}:{line}: {message}")]
    Malformed { path: String, line: usize, message: String },
    #[error("[{section}] {key}: {err}")]
    BadExpression { section: String, key: String, err: expr::SyntaxError },
    #[error("[{section}] {key}: expected a constant expression")]
    NotConstant { section: String, key: String },
    #[error("[{section}] {key}: {message}")]
    BadValue { section: String, key: String, message: String },
    #[error("missing required key [{section}] {key}")]
    Missing { section: String, key: String },
    #[error("{0}")]
    Build(String),
}

/// Parsed but uninterpreted `section.key = value` table.
#[derive(Debug, Default)]
pub struct RawConfig {
    values: BTreeMap<(String, String), String>,
}

impl RawConfig {
    pub fn load(path: &Path) -> Result<RawConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            err: e.to_string(),
        })?;
        Self::parse(&path.display().to_string(), &text)
    }

    pub fn parse(path: &str, text: &str) -> Result<RawConfig, ConfigError> {
        let mut values = BTreeMap::new();
        let mut section = String::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let Some(name) = name.strip_suffix(']') else {
                    return Err(ConfigError::Malformed {
                        path: path.into(),
                        line: i + 1,
                        message: "unterminated section header".into(),
                    });
                };
                section = name.trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Malformed {
                    path: path.into(),
                    line: i + 1,
                    message: "expected `key = value` or `[section]`".into(),
                });
            };
            if section.is_empty() {
                return Err(ConfigError::Malformed {
                    path: path.into(),
                    line: i + 1,
                    message: "key before any [section] header".into(),
                });
            }
            values.insert(
                (section.clone(), key.trim().to_string()),
                value.trim().to_string(),
            );
        }
        Ok(RawConfig { values })
    }

    fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.values
            .get(&(section.to_string(), key.to_string()))
            .map(String::as_str)
    }

    fn require(&self, section: &str, key: &str) -> Result<&str, ConfigError> {
        self.get(section, key).ok_or_else(|| ConfigError::Missing {
            section: section.into(),
            key: key.into(),
        })
    }

    fn expr(&self, section: &str, key: &str) -> Result<Option<Expr>, ConfigError> {
        let Some(v) = self.get(section, key) else { return Ok(None) };
        parse_value_expr(section, key, v).map(Some)
    }

    fn f64(&self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        let Some(e) = self.expr(section, key)? else { return Ok(None) };
        constant(section, key, &e).map(Some)
    }

    fn f64_required(&self, section: &str, key: &str) -> Result<f64, ConfigError> {
        self.require(section, key)?;
        Ok(self.f64(section, key)?.expect("checked above"))
    }

    fn f64_list(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some(v) = self.get(section, key) else { return Ok(None) };
        let mut out = Vec::new();
        for part in unquote(v).split(';') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let e = parse_value_expr(section, key, part)?;
            out.push(constant(section, key, &e)?);
        }
        if out.is_empty() {
            return Err(ConfigError::BadValue {
                section: section.into(),
                key: key.into(),
                message: "empty list".into(),
            });
        }
        Ok(Some(out))
    }

    fn usize(&self, section: &str, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.f64(section, key)? {
            Some(v) if v >= 0.0 && v.fract() == 0.0 => Ok(Some(v as usize)),
            Some(_) => Err(ConfigError::BadValue {
                section: section.into(),
                key: key.into(),
                message: "expected a nonnegative integer".into(),
            }),
            None => Ok(None),
        }
    }
}

fn unquote(v: &str) -> &str {
    let v = v.trim();
    if v.len() >= 2 && v.starts_with('"') && v.ends_with('"') {
        &v[1..v.len() - 1]
    } else {
        v
    }
}

fn parse_value_expr(section: &str, key: &str, v: &str) -> Result<Expr, ConfigError> {
    expr::parse(unquote(v)).map_err(|err| ConfigError::BadExpression {
        section: section.into(),
        key: key.into(),
        err,
    })
}

fn constant(section: &str, key: &str, e: &Expr) -> Result<f64, ConfigError> {
    if !e.is_constant() {
        return Err(ConfigError::NotConstant { section: section.into(), key: key.into() });
    }
    e.eval(0.0).map_err(|err| ConfigError::BadValue {
        section: section.into(),
        key: key.into(),
        message: err.to_string(),
    })
}

/// History data: an expression in `t` or an interpolated table.
#[derive(Debug, Clone)]
pub enum PsiSpec {
    Expr(Expr),
    Table(Vec<(f64, f64)>),
}

impl PsiSpec {
    /// Evaluation closure handed to the solver; NaN marks points the history
    /// definition does not cover, which the solver rejects with a diagnostic.
    pub fn closure(&self) -> impl Fn(f64) -> f64 + Send + Sync + 'static {
        let psi = self.clone();
        move |t: f64| match &psi {
            PsiSpec::Expr(e) => e.eval(t).unwrap_or(f64::NAN),
            PsiSpec::Table(rows) => {
                if rows.is_empty() {
                    return f64::NAN;
                }
                let i = rows.partition_point(|&(rt, _)| rt <= t);
                if i > 0 && (rows[i - 1].0 - t).abs() <= 1e-9 {
                    return rows[i - 1].1;
                }
                if i < rows.len() && (rows[i].0 - t).abs() <= 1e-9 {
                    return rows[i].1;
                }
                if i == 0 || i == rows.len() {
                    return f64::NAN;
                }
                let (t0, v0) = rows[i - 1];
                let (t1, v1) = rows[i];
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }
}

fn parse_table(section: &str, key: &str, v: &str) -> Result<Vec<(f64, f64)>, ConfigError> {
    let bad = |message: &str| ConfigError::BadValue {
        section: section.into(),
        key: key.into(),
        message: message.into(),
    };
    let mut rows = Vec::new();
    for part in unquote(v).split(';') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let inner = part
            .strip_prefix('(')
            .and_then(|p| p.strip_suffix(')'))
            .ok_or_else(|| bad("expected (t,v) pairs separated by ';'"))?;
        let (ts, vs) = inner
            .split_once(',')
            .ok_or_else(|| bad("expected (t,v) pairs separated by ';'"))?;
        let t = constant(section, key, &parse_value_expr(section, key, ts)?)?;
        let val = constant(section, key, &parse_value_expr(section, key, vs)?)?;
        rows.push((t, val));
    }
    if rows.is_empty() {
        return Err(bad("table has no rows"));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(rows)
}

/// Sampling controls for the `axioms` subcommand.
#[derive(Debug, Clone)]
pub struct AxiomsSpec {
    pub systems: Vec<String>,
    pub rebase: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub horizon: f64,
    pub delay: Option<f64>,
}

/// Output file names, joined onto the `--out` directory.
#[derive(Debug, Clone)]
pub struct OutputSpec {
    pub trajectory: String,
    pub certificate: String,
    pub certificate_csv: String,
    pub report: String,
}

/// A fully resolved run configuration.
#[derive(Debug)]
pub struct RunConfig {
    pub scale: TimeScale,
    pub shift_name: String,
    pub rebase: Option<f64>,
    pub h: Option<f64>,
    pub horizon: Option<f64>,
    pub a: Option<Expr>,
    pub b: Option<Expr>,
    pub psi: Option<PsiSpec>,
    pub derivative_bound: Option<f64>,
    pub real_step: Option<f64>,
    pub search: SearchGrids,
    pub literature: LiteratureParams,
    pub compare_step: Option<f64>,
    pub axioms: AxiomsSpec,
    pub output: OutputSpec,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let raw = RawConfig::load(path)?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<RunConfig, ConfigError> {
        let scale = build_scale(&raw)?;
        let shift_name = raw
            .get("shift", "name")
            .unwrap_or("translation")
            .to_string();
        let rebase = raw.f64("shift", "rebase")?;
        let h = match raw.f64("shift", "h")? {
            Some(h) => Some(h),
            None => raw.f64("problem", "h")?,
        };
        let horizon = raw.f64("problem", "horizon")?;
        let a = raw.expr("problem", "a")?;
        let b = raw.expr("problem", "b")?;
        let psi = match (raw.get("problem", "psi"), raw.get("problem", "psi.table")) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::BadValue {
                    section: "problem".into(),
                    key: "psi".into(),
                    message: "give either psi or psi.table, not both".into(),
                })
            }
            (Some(_), None) => Some(PsiSpec::Expr(raw.expr("problem", "psi")?.expect("present"))),
            (None, Some(v)) => Some(PsiSpec::Table(parse_table("problem", "psi.table", v)?)),
            (None, None) => None,
        };
        let derivative_bound = raw.f64("problem", "derivative_bound")?;
        let real_step = raw.f64("problem", "real_step")?;

        let mut search = SearchGrids::default();
        if let Some(l) = raw.f64_list("certify", "lambda_grid")? {
            search.lambdas = l;
        }
        search.alphas = raw.f64_list("certify", "alpha_grid")?;
        search.ds = raw.f64_list("certify", "d_grid")?;
        if let Some(t) = raw.f64("certify", "divergence_threshold")? {
            search.divergence_threshold = t;
        }

        let mut literature = LiteratureParams::default();
        if let Some(n) = raw.f64("compare", "n")? {
            literature.n = n;
        }
        if let Some(l) = raw.f64("compare", "lambda")? {
            literature.lam = l;
        }
        literature.alpha = raw.f64("compare", "alpha")?;
        if let Some(t) = raw.f64("compare", "divergence_threshold")? {
            literature.divergence_threshold = t;
        }
        let compare_step = raw.f64("compare", "step")?;

        let axioms = AxiomsSpec {
            systems: raw
                .get("axioms", "systems")
                .map(|v| {
                    unquote(v)
                        .split(';')
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect()
                })
                .unwrap_or_else(|| vec![shift_name.clone()]),
            rebase: raw.f64_list("axioms", "rebase")?.unwrap_or_default(),
            samples: raw.usize("axioms", "samples")?.unwrap_or(1000),
            seed: raw.usize("axioms", "seed")?.unwrap_or(1) as u64,
            horizon: raw.f64("axioms", "horizon")?.or(horizon).unwrap_or(100.0),
            delay: match raw.f64("axioms", "delay")? {
                Some(d) => Some(d),
                None => h,
            },
        };

        let output = OutputSpec {
            trajectory: raw
                .get("output", "trajectory")
                .unwrap_or("trajectory.csv")
                .to_string(),
            certificate: raw
                .get("output", "certificate")
                .unwrap_or("certificate.txt")
                .to_string(),
            certificate_csv: raw
                .get("output", "certificate_csv")
                .unwrap_or("certificate.csv")
                .to_string(),
            report: raw.get("output", "report").unwrap_or("report.txt").to_string(),
        };

        Ok(RunConfig {
            scale,
            shift_name,
            rebase,
            h,
            horizon,
            a,
            b,
            psi,
            derivative_bound,
            real_step,
            search,
            literature,
            compare_step,
            axioms,
            output,
        })
    }

    /// Shift system named by the config, rebased if requested.
    pub fn shift_system(&self, name: &str) -> Result<ShiftSystem, ConfigError> {
        let sys = builtin_shift(name, &self.scale).map_err(|e| ConfigError::Build(e.to_string()))?;
        match self.rebase {
            Some(lam) => sys
                .rebase_initial_point(lam)
                .map_err(|e| ConfigError::Build(e.to_string())),
            None => Ok(sys),
        }
    }

    /// Full delay problem for simulate/certify/compare; `real_step_override`
    /// comes from the command line and wins over the config value.
    pub fn problem(&self, real_step_override: Option<f64>) -> Result<DelayProblem, ConfigError> {
        let sys = self.shift_system(&self.shift_name.clone())?;
        let h = self.h.ok_or(ConfigError::Missing {
            section: "problem".into(),
            key: "h".into(),
        })?;
        let mut delay =
            DelayFunction::new(sys, h).map_err(|e| ConfigError::Build(e.to_string()))?;
        if let Some(m) = self.derivative_bound {
            delay = delay.with_derivative_bound(m);
        }
        let horizon = self.horizon.ok_or(ConfigError::Missing {
            section: "problem".into(),
            key: "horizon".into(),
        })?;
        let a = self.a.clone().ok_or(ConfigError::Missing {
            section: "problem".into(),
            key: "a".into(),
        })?;
        let b = self.b.clone().ok_or(ConfigError::Missing {
            section: "problem".into(),
            key: "b".into(),
        })?;
        let psi = self.psi.clone().ok_or(ConfigError::Missing {
            section: "problem".into(),
            key: "psi".into(),
        })?;
        let mut p = DelayProblem::new(
            delay,
            move |t| a.eval(t).unwrap_or(f64::NAN),
            move |t| b.eval(t).unwrap_or(f64::NAN),
            psi.closure(),
            horizon,
        )
        .map_err(|e| ConfigError::Build(e.to_string()))?;
        if let Some(step) = real_step_override.or(self.real_step) {
            p = p.with_real_step(step);
        }
        Ok(p)
    }

    pub fn out_path(&self, out_dir: &Path, name: &str) -> PathBuf {
        out_dir.join(name)
    }
}

fn build_scale(raw: &RawConfig) -> Result<TimeScale, ConfigError> {
    let kind = raw.require("scale", "kind")?.to_string();
    let bad = |message: String| ConfigError::BadValue {
        section: "scale".into(),
        key: "kind".into(),
        message,
    };
    match kind.as_str() {
        "real-line" => Ok(TimeScale::real_line()),
        "half-line" => Ok(TimeScale::half_line(raw.f64("scale", "lo")?.unwrap_or(0.0))),
        "real-interval" => TimeScale::real_interval(
            raw.f64_required("scale", "lo")?,
            raw.f64_required("scale", "hi")?,
        )
        .map_err(|e| bad(e.to_string())),
        "integers" => Ok(TimeScale::integers()),
        "unit-lattice" => TimeScale::unit_lattice(raw.f64("scale", "origin")?.unwrap_or(0.0))
            .map_err(|e| bad(e.to_string())),
        "step-lattice" => TimeScale::step_lattice(
            raw.f64_required("scale", "step")?,
            raw.f64("scale", "origin")?.unwrap_or(0.0),
        )
        .map_err(|e| bad(e.to_string())),
        "q-lattice" => TimeScale::q_lattice(raw.f64_required("scale", "q")?)
            .map_err(|e| bad(e.to_string())),
        "sqrt-naturals" => Ok(TimeScale::sqrt_naturals()),
        "finite-grid" => {
            let pts = raw.f64_list("scale", "points")?.ok_or(ConfigError::Missing {
                section: "scale".into(),
                key: "points".into(),
            })?;
            TimeScale::finite_grid(pts).map_err(|e| bad(e.to_string()))
        }
        "union-of-intervals" => {
            let v = raw.require("scale", "intervals")?;
            let rows = parse_table("scale", "intervals", v)?;
            TimeScale::union_of_intervals(rows).map_err(|e| bad(e.to_string()))
        }
        other => Err(bad(format!("unknown scale kind '{other}'"))),
    }
}
