//! Run configuration: a TOML document with rational strings for every exact
//! rate input and floats only for solver-side quantities.

use std::path::Path;

use eqsub::equilibrium::EquilibriumProblem;
use eqsub::rates::{parse_rational, Limits, RateInputs, SigmaFamily};
use eqsub::solver::{EpsSchedule, LambdaSchedule, SolverConfig};
use eqsub::verify::{CheckGroup, DEFAULT_CAP, DEFAULT_TOL};
use eqsub::{Counterfunction, FirmOp, RegularityModulus, Vector};
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: Option<EquilibriumProblem>,
    pub operator: Option<FirmOp>,
    pub solver: Option<SolverSection>,
    pub rates: RatesSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub output: OutputSection,
    /// Source text, for locating fields in diagnostics.
    #[serde(skip)]
    text: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub x0: Vec<f64>,
    pub steps: usize,
    #[serde(default = "midpoint")]
    pub lambda: LambdaSchedule,
    pub eps: EpsSchedule,
    pub in_memory_cap: Option<usize>,
}

fn midpoint() -> LambdaSchedule {
    LambdaSchedule::Midpoint
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSection {
    pub a: String,
    pub b: String,
    #[serde(rename = "M")]
    pub m: String,
    pub c_u: String,
    #[serde(rename = "L")]
    pub l: Option<String>,
    pub e: Option<String>,
    /// Defaults to the dominator derived from the eps schedule.
    pub tau: Option<Counterfunction>,
    /// Defaults to the dimension of `x0`, else 1.
    pub dim: Option<u32>,
    #[serde(default)]
    pub k: Option<u64>,
    #[serde(default)]
    pub g: Option<Counterfunction>,
    /// Modulus of regularity `psi`, applied to `ceil(1/eps)`.
    pub psi: Option<Counterfunction>,
    /// Uniform modulus of continuity `sigma_j` of every `f(y_j, .)`.
    pub sigma: Option<Counterfunction>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    /// A point of the solution set.
    pub u: Option<Vec<f64>>,
    /// The limit of the iterates, if known.
    pub x_star: Option<Vec<f64>>,
    pub k: Vec<u64>,
    pub g: Vec<Counterfunction>,
    pub checks: Option<Vec<String>>,
    pub feasibility_cap: u64,
    pub tol: f64,
    pub samples: usize,
    pub perturb: Option<Perturbation>,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            u: None,
            x_star: None,
            k: vec![0, 1, 2],
            g: vec![Counterfunction::constant(1u32)],
            checks: None,
            feasibility_cap: DEFAULT_CAP,
            tol: DEFAULT_TOL,
            samples: 200,
            perturb: None,
        }
    }
}

/// Adds `delta` to every coordinate of `x_step` before checking.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub step: usize,
    pub delta: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    pub seed: u64,
    /// Decimal digit budget of exact bounds.
    pub digit_budget: u64,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            seed: 0,
            digit_budget: Limits::default().digit_budget,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.text = text.to_string();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// `section.key` with the line it appears on, when found.
    fn field(&self, section: &str, key: &str) -> String {
        let mut in_section = false;
        for (i, line) in self.text.lines().enumerate() {
            let t = line.trim();
            if t.starts_with('[') {
                in_section = t.trim_matches(|c| c == '[' || c == ']').trim() == section;
            } else if in_section && t.split('=').next().is_some_and(|k| k.trim() == key) {
                return format!("line {}, field {section}.{key}", i + 1);
            }
        }
        format!("field {section}.{key}")
    }

    fn rational(&self, key: &str, value: &str) -> Result<BigRational, CliError> {
        parse_rational(value).map_err(|e| CliError::Config(format!("{}: {e}", self.field("rates", key))))
    }

    pub fn solver_section(&self) -> Result<&SolverSection, CliError> {
        self.solver
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [solver] section".into()))
    }

    pub fn problem(&self) -> Result<&EquilibriumProblem, CliError> {
        self.problem
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [problem] section".into()))
    }

    pub fn operator(&self) -> FirmOp {
        self.operator.clone().unwrap_or(FirmOp::Identity)
    }

    pub fn x0(&self) -> Result<Vector, CliError> {
        Vector::new(self.solver_section()?.x0.clone())
            .map_err(|e| CliError::Config(format!("{}: {e}", self.field("solver", "x0"))))
    }

    /// The exact inputs, with `L` and `e` derived when absent.
    pub fn rate_inputs(&self) -> Result<RateInputs, CliError> {
        let r = &self.rates;
        let a = self.rational("a", &r.a)?;
        let b = self.rational("b", &r.b)?;
        let m = self.rational("M", &r.m)?;
        let c_u = self.rational("c_u", &r.c_u)?;
        let l = r.l.as_deref().map(|v| self.rational("L", v)).transpose()?;
        let e = r.e.as_deref().map(|v| self.rational("e", v)).transpose()?;
        let tau = match (&r.tau, &self.solver) {
            (Some(t), _) => t.clone(),
            (None, Some(s)) => s.eps.tau().ok_or_else(|| {
                CliError::Config(format!(
                    "{}: the eps schedule does not tend to 0, so rates.tau must be given",
                    self.field("solver", "eps")
                ))
            })?,
            (None, None) => Counterfunction::constant(0u32),
        };
        let dim = match (r.dim, &self.solver) {
            (Some(d), _) => d,
            (None, Some(s)) => s.x0.len() as u32,
            (None, None) => 1,
        };
        RateInputs::with_defaults(a, b, m, l, c_u, e, dim, tau).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn limits(&self, digit_budget: Option<u64>) -> Limits {
        Limits {
            digit_budget: digit_budget.unwrap_or(self.output.digit_budget),
            ..Limits::default()
        }
    }

    /// Solver parameters taken from the exact inputs.
    pub fn solver_config(&self, inputs: &RateInputs) -> Result<SolverConfig, CliError> {
        let s = self.solver_section()?;
        let f = |q: &BigRational| q.to_f64().unwrap_or(f64::NAN);
        let mut cfg = SolverConfig::new(f(&inputs.a), f(&inputs.b), f(&inputs.m), s.eps.clone(), s.steps)
            .with_lambda(s.lambda.clone());
        if let Some(cap) = s.in_memory_cap {
            cfg.in_memory_cap = cap;
        }
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn psi(&self) -> Option<RegularityModulus> {
        self.rates.psi.clone().map(RegularityModulus::new)
    }

    pub fn sigma(&self) -> Option<SigmaFamily> {
        self.rates.sigma.clone().map(SigmaFamily::Uniform)
    }

    pub fn vector(&self, section: &str, key: &str, v: &[f64]) -> Result<Vector, CliError> {
        Vector::new(v.to_vec()).map_err(|e| CliError::Config(format!("{}: {e}", self.field(section, key))))
    }

    /// Selected check groups: the flag wins over the config; all by default.
    pub fn check_groups(&self, flag: Option<&str>) -> Result<Vec<CheckGroup>, CliError> {
        let names: Vec<String> = match (flag, &self.verify.checks) {
            (Some(f), _) => f.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect(),
            (None, Some(list)) => list.clone(),
            (None, None) => return Ok(CheckGroup::ALL.to_vec()),
        };
        if names.is_empty() {
            return Err(CliError::Config("no checks selected".into()));
        }
        names
            .iter()
            .map(|n| n.parse::<CheckGroup>().map_err(|e| CliError::Config(e.to_string())))
            .collect()
    }
}
