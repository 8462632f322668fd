//! Problem configuration files.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diffusion::{make_brownian, CustomDiffusion, DiffusionModel, RealFn};
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::measure::{Atom, MeasureSpec, QuadratureOptions};
use crate::reward::{Polynomial, RewardSpec};
use crate::solver::SolverOptions;

pub const PROBLEM_SCHEMA: &str = "ostop.problem.v1";

/// Serde adapter writing infinities as the strings `"inf"` / `"-inf"`.
pub mod ext_f64 {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn to_repr(x: f64) -> serde_json::Value {
        if x == f64::INFINITY {
            "inf".into()
        } else if x == f64::NEG_INFINITY {
            "-inf".into()
        } else {
            x.into()
        }
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_nan() {
            return Err(serde::ser::Error::custom("NaN cannot be encoded"));
        }
        to_repr(*x).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(x) => Ok(x),
            Repr::Text(t) => match t.as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(D::Error::custom(format!("expected a number, \"inf\" or \"-inf\", got {other:?}"))),
            },
        }
    }
}

/// An interval written as `[lo, hi]` with optional infinity strings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds(#[serde(with = "ext_f64")] pub f64, #[serde(with = "ext_f64")] pub f64);

impl Bounds {
    pub fn interval(&self) -> Result<Interval> {
        Interval::new(self.0, self.1).map_err(|e| Error::Config(e.to_string()))
    }
}

impl From<Interval> for Bounds {
    fn from(i: Interval) -> Self {
        Bounds(i.lo(), i.hi())
    }
}

/// Named real functions that a configuration can refer to.
#[derive(Clone, Default)]
pub struct HandleRegistry {
    handles: HashMap<String, RealFn>,
}

impl HandleRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, f: RealFn) -> &mut Self {
        self.handles.insert(name.into(), f);
        self
    }

    pub fn get(&self, name: &str) -> Result<RealFn> {
        self.handles
            .get(name)
            .cloned()
            .ok_or_else(|| Error::Config(format!("no function registered under {name:?}")))
    }

    pub fn names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.handles.keys().map(String::as_str).collect();
        names.sort_unstable();
        names
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffusionConfig {
    Brownian {
        alpha: f64,
        #[serde(default)]
        drift: f64,
        #[serde(default = "one")]
        volatility: f64,
    },
    Custom {
        alpha: f64,
        #[serde(default = "real_line")]
        domain: Bounds,
        phi: String,
        psi: String,
        scale_density: String,
        speed_density: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference_point: Option<f64>,
    },
}

fn one() -> f64 {
    1.0
}

fn real_line() -> Bounds {
    Bounds(f64::NEG_INFINITY, f64::INFINITY)
}

/// A real function given inline or by registered name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionConfig {
    /// Coefficients in ascending order.
    Polynomial(Vec<f64>),
    Handle(String),
}

impl FunctionConfig {
    fn build(&self, registry: &HandleRegistry) -> Result<RealFn> {
        match self {
            FunctionConfig::Polynomial(c) => {
                let p = Polynomial::new(c.clone()).map_err(|e| Error::Config(e.to_string()))?;
                Ok(crate::diffusion::real_fn(move |x| p.eval(x)))
            }
            FunctionConfig::Handle(name) => registry.get(name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RewardConfig {
    Polynomial {
        coefficients: Vec<f64>,
    },
    PiecewiseLinear {
        knots: Vec<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        left_slope: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        right_slope: Option<f64>,
    },
    Represented {
        g: FunctionConfig,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        density: Option<FunctionConfig>,
        /// `[location, mass]` pairs.
        #[serde(default)]
        atoms: Vec<[f64; 2]>,
        #[serde(default)]
        breakpoints: Vec<f64>,
    },
}

/// Overrides of the solver defaults; absent fields keep the default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub work_window: Option<Bounds>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub root_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enlarge_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_enlarge_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition_rel_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check_inversion: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_subdivisions: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_range: Option<Bounds>,
    pub sample_count: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            sample_range: None,
            sample_count: 401,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub points: Vec<f64>,
    pub paths: usize,
    pub dt: f64,
    pub seed: u64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            points: Vec::new(),
            paths: 100_000,
            dt: 1e-3,
            seed: 20_240_601,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Numbers of continuation gaps to scan.
    pub templates: Vec<usize>,
    pub step: f64,
    pub window: Bounds,
    /// Evaluation points; empty means 20 points spread over the window.
    pub eval_points: Vec<f64>,
    pub budget: u64,
    /// Largest amount by which a scanned policy may beat the solver.
    pub dominance_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<MonteCarloConfig>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            templates: vec![0, 1, 2],
            step: 0.05,
            window: Bounds(-5.0, 5.0),
            eval_points: Vec::new(),
            budget: 200_000_000,
            dominance_tol: 1e-4,
            monte_carlo: None,
        }
    }
}

impl OracleConfig {
    pub fn eval_points(&self) -> Result<Vec<f64>> {
        if !self.eval_points.is_empty() {
            return Ok(self.eval_points.clone());
        }
        let w = self.window.interval()?;
        Ok((0..20).map(|i| w.lo() + w.width() * (i as f64 + 0.5) / 20.0).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub schema: String,
    pub diffusion: DiffusionConfig,
    pub reward: RewardConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ProblemConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema != PROBLEM_SCHEMA {
            return Err(Error::Config(format!(
                "unsupported schema {:?}, expected {PROBLEM_SCHEMA:?}",
                cfg.schema
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        match &self.reward {
            RewardConfig::Polynomial { coefficients } => {
                if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
                    return Err(Error::Config("polynomial coefficients must be finite and non-empty".into()));
                }
            }
            RewardConfig::PiecewiseLinear { knots, .. } => {
                if knots.windows(2).any(|w| !(w[0][0] < w[1][0])) {
                    return Err(Error::Config("piecewise-linear knots must be strictly increasing".into()));
                }
            }
            RewardConfig::Represented { .. } => {}
        }
        if self.output.sample_count < 2 {
            return Err(Error::Config("sample_count must be at least 2".into()));
        }
        self.solver_options(None)?;
        Ok(())
    }

    pub fn model(&self, registry: &HandleRegistry) -> Result<DiffusionModel> {
        match &self.diffusion {
            DiffusionConfig::Brownian {
                alpha,
                drift,
                volatility,
            } => make_brownian(*alpha, *drift, *volatility).map_err(config_err),
            DiffusionConfig::Custom {
                alpha,
                domain,
                phi,
                psi,
                scale_density,
                speed_density,
                reference_point,
            } => CustomDiffusion {
                domain: domain.interval()?,
                alpha: *alpha,
                phi: registry.get(phi)?,
                psi: registry.get(psi)?,
                scale_density: registry.get(scale_density)?,
                speed_density: registry.get(speed_density)?,
                reference_point: *reference_point,
            }
            .build()
            .map_err(config_err),
        }
    }

    pub fn reward(&self, model: &DiffusionModel, registry: &HandleRegistry) -> Result<RewardSpec> {
        match &self.reward {
            RewardConfig::Polynomial { coefficients } => RewardSpec::polynomial(model, coefficients).map_err(config_err),
            RewardConfig::PiecewiseLinear {
                knots,
                left_slope,
                right_slope,
            } => {
                let knots: Vec<(f64, f64)> = knots.iter().map(|k| (k[0], k[1])).collect();
                RewardSpec::piecewise_linear(model, &knots, *left_slope, *right_slope).map_err(config_err)
            }
            RewardConfig::Represented {
                g,
                density,
                atoms,
                breakpoints,
            } => {
                let atoms: Vec<Atom> = atoms
                    .iter()
                    .map(|a| Atom {
                        location: a[0],
                        mass: a[1],
                    })
                    .collect();
                let nu = match density {
                    Some(d) => MeasureSpec::new(d.build(registry)?, atoms.clone(), breakpoints.clone()),
                    None => MeasureSpec::atomic(atoms.clone()),
                }
                .map_err(config_err)?;
                let mut exceptional: Vec<f64> = atoms.iter().map(|a| a.location).collect();
                exceptional.extend(breakpoints);
                Ok(RewardSpec::represented(g.build(registry)?, nu, exceptional))
            }
        }
    }

    /// Solver options with the configuration's overrides, and `window` from
    /// the command line taking precedence over both.
    pub fn solver_options(&self, window: Option<Interval>) -> Result<SolverOptions> {
        let s = &self.solver;
        let d = SolverOptions::default();
        let dq = QuadratureOptions::default();
        let opts = SolverOptions {
            work_window: match (window, s.work_window) {
                (Some(w), _) => w,
                (None, Some(b)) => b.interval()?,
                (None, None) => d.work_window,
            },
            scan_points: s.scan_points.unwrap_or(d.scan_points),
            root_tol: s.root_tol.unwrap_or(d.root_tol),
            enlarge_tol: s.enlarge_tol.unwrap_or(d.enlarge_tol),
            max_enlarge_iters: s.max_enlarge_iters.unwrap_or(d.max_enlarge_iters),
            gap_tol: s.gap_tol.unwrap_or(d.gap_tol),
            condition_rel_tol: s.condition_rel_tol.unwrap_or(d.condition_rel_tol),
            check_inversion: s.check_inversion.unwrap_or(d.check_inversion),
            quadrature: QuadratureOptions {
                rel_tol: s.rel_tol.unwrap_or(dq.rel_tol),
                abs_tol: s.abs_tol.unwrap_or(dq.abs_tol),
                max_subdivisions: s.max_subdivisions.unwrap_or(dq.max_subdivisions),
                ..dq
            },
            ..d
        };
        opts.validate().map_err(config_err)?;
        Ok(opts)
    }
}
