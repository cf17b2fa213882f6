//! The subgradient-type iteration
//!
//! ```text
//! x_{n+1} = T(x_n - lambda_n f(y_n, x_n) xi_n),   rho_{n+1} = max(rho_n, |x_{n+1}|)
//! ```
//!
//! where `y_n` is an `eps_n`-maximizer of `f(., x_n)` over the ball of radius
//! `rho_n + 1` and `xi_n` a subgradient of `f(y_n, .)` at `x_n`.

use std::io::Write;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::counter::Counterfunction;
use crate::equilibrium::EquilibriumProblem;
use crate::error::SolverError;
use crate::operators::FirmOp;
use crate::vector::Vector;

/// Default number of records kept in memory by [`run`].
pub const DEFAULT_IN_MEMORY_CAP: usize = 1_000_000;

/// Rule producing the step sizes `lambda_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LambdaSchedule {
    /// `lambda_n = (a + b) / 2`
    Midpoint,
    Constant { value: f64 },
    /// Cycles through the listed values.
    Cyclic { values: Vec<f64> },
}

impl LambdaSchedule {
    pub fn at(&self, n: usize, a: f64, b: f64) -> f64 {
        match self {
            LambdaSchedule::Midpoint => 0.5 * (a + b),
            LambdaSchedule::Constant { value } => *value,
            LambdaSchedule::Cyclic { values } => values[n % values.len()],
        }
    }
}

/// Rule producing the maximization tolerances `eps_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EpsSchedule {
    Constant { value: f64 },
    /// `eps_n = eps0 / (n + 1)`
    Harmonic { eps0: f64 },
    /// `eps_n = eps0 * ratio^n` with `0 < ratio < 1`
    Geometric { eps0: f64, ratio: f64 },
}

impl EpsSchedule {
    pub fn at(&self, n: usize) -> f64 {
        match self {
            EpsSchedule::Constant { value } => *value,
            EpsSchedule::Harmonic { eps0 } => eps0 / (n as f64 + 1.0),
            EpsSchedule::Geometric { eps0, ratio } => eps0 * ratio.powi(n.min(i32::MAX as usize) as i32),
        }
    }

    fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::InvalidConfig(m.to_string()));
        match *self {
            EpsSchedule::Constant { value } if !(value.is_finite() && value >= 0.0) => {
                bad("eps must be finite and nonnegative")
            }
            EpsSchedule::Harmonic { eps0 } if !(eps0.is_finite() && eps0 >= 0.0) => {
                bad("eps0 must be finite and nonnegative")
            }
            EpsSchedule::Geometric { eps0, ratio }
                if !(eps0.is_finite() && eps0 >= 0.0 && ratio > 0.0 && ratio < 1.0) =>
            {
                bad("geometric schedule needs eps0 >= 0 and 0 < ratio < 1")
            }
            _ => Ok(()),
        }
    }

    /// Smallest-form rate of convergence: the least `tau(k)` such that
    /// `eps_n <= 1/(k+1)` for every `n >= tau(k)`. `None` if `eps_n` does not tend to 0.
    pub fn tau_at(&self, k: u64) -> Option<u64> {
        let k1 = k as f64 + 1.0;
        match *self {
            EpsSchedule::Constant { value } => (value == 0.0).then_some(0),
            EpsSchedule::Harmonic { eps0 } => {
                // eps0/(n+1) <= 1/(k+1)  iff  n >= eps0 (k+1) - 1
                Some(((eps0 * k1).ceil() - 1.0).max(0.0) as u64)
            }
            EpsSchedule::Geometric { eps0, ratio } => {
                if eps0 * k1 <= 1.0 {
                    return Some(0);
                }
                let mut n = ((eps0 * k1).ln() / (1.0 / ratio).ln()).ceil().max(0.0) as u64;
                // guard the floating point estimate in both directions
                while n > 0 && self.at(n as usize - 1) <= 1.0 / k1 {
                    n -= 1;
                }
                while self.at(n as usize) > 1.0 / k1 {
                    n += 1;
                }
                Some(n)
            }
        }
    }

    /// An affine counterfunction dominating [`EpsSchedule::tau_at`], as needed by
    /// the exact bounds. `None` if `eps_n` does not tend to 0.
    pub fn tau(&self) -> Option<Counterfunction> {
        match *self {
            EpsSchedule::Constant { value } => {
                (value == 0.0).then(|| Counterfunction::constant(0u32))
            }
            EpsSchedule::Harmonic { eps0 } => {
                // ceil(eps0 (k+1)) <= ceil(eps0) (k+1)
                let c = ceil_nat(eps0);
                Some(Counterfunction::affine(c.clone(), c))
            }
            EpsSchedule::Geometric { eps0, ratio } => {
                // ln(eps0 (k+1)) <= max(ln eps0, 0) + k
                let l = (1.0 / ratio).ln();
                let offset = ceil_nat(eps0.ln().max(0.0) / l);
                let slope = ceil_nat(1.0 / l);
                Some(Counterfunction::affine(slope, offset))
            }
        }
    }
}

fn ceil_nat(v: f64) -> BigUint {
    let c = v.ceil();
    if c <= 0.0 {
        BigUint::from(0u32)
    } else {
        BigUint::from(c as u64)
    }
}

/// Parameters of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Lower end of the step-size range.
    pub a: f64,
    /// Upper end of the step-size range.
    pub b: f64,
    /// Bound on the subgradient norms.
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(default = "default_lambda")]
    pub lambda: LambdaSchedule,
    pub eps: EpsSchedule,
    pub max_steps: usize,
    #[serde(default = "default_cap")]
    pub in_memory_cap: usize,
}

fn default_lambda() -> LambdaSchedule {
    LambdaSchedule::Midpoint
}

fn default_cap() -> usize {
    DEFAULT_IN_MEMORY_CAP
}

impl SolverConfig {
    pub fn new(a: f64, b: f64, m: f64, eps: EpsSchedule, max_steps: usize) -> Self {
        Self {
            a,
            b,
            m,
            lambda: LambdaSchedule::Midpoint,
            eps,
            max_steps,
            in_memory_cap: DEFAULT_IN_MEMORY_CAP,
        }
    }

    pub fn with_lambda(mut self, lambda: LambdaSchedule) -> Self {
        self.lambda = lambda;
        self
    }

    /// Checks `0 < a <= b < 2/M^2` and the schedule parameters.
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.m.is_finite() && self.m > 0.0) {
            return Err(SolverError::InvalidConfig("M must be positive".into()));
        }
        let upper = 2.0 / (self.m * self.m);
        if !(self.a > 0.0 && self.a <= self.b && self.b < upper) {
            return Err(SolverError::InvalidConfig(format!(
                "lambda range [{}, {}] not inside (0, 2/M^2) = (0, {upper})",
                self.a, self.b
            )));
        }
        if let LambdaSchedule::Cyclic { values } = &self.lambda {
            if values.is_empty() {
                return Err(SolverError::InvalidConfig("cyclic schedule is empty".into()));
            }
        }
        self.eps.validate()
    }

    pub fn lambda_at(&self, n: usize) -> Result<f64, SolverError> {
        let l = self.lambda.at(n, self.a, self.b);
        if l >= self.a && l <= self.b {
            Ok(l)
        } else {
            Err(SolverError::InvalidConfig(format!(
                "lambda_{n} = {l} is outside [{}, {}]",
                self.a, self.b
            )))
        }
    }
}

/// `(n, x_n, rho_n)`
#[derive(Clone, Debug, PartialEq)]
pub struct IterationState {
    pub n: usize,
    pub x: Vector,
    pub rho: f64,
}

impl IterationState {
    pub fn initial(x0: Vector) -> Self {
        let rho = x0.norm();
        Self { n: 0, x: x0, rho }
    }
}

/// Everything computed at step `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub n: usize,
    pub x: Vector,
    pub y: Vector,
    pub xi: Vector,
    pub rho: f64,
    pub lambda: f64,
    pub eps: f64,
    /// `f(y_n, x_n)`
    pub fval: f64,
}

/// Performs step `state.n`, returning the next state and the record of this step.
pub fn step(
    state: &IterationState,
    problem: &EquilibriumProblem,
    op: &FirmOp,
    cfg: &SolverConfig,
) -> Result<(IterationState, StepRecord), SolverError> {
    state.x.ensure_dim(problem.dim())?;
    let n = state.n;
    let lambda = cfg.lambda_at(n)?;
    let eps = cfg.eps.at(n);
    let found = problem.approx_max(&state.x, state.rho + 1.0, eps)?;
    let xi = problem.subgradient(&found.y, &state.x)?;
    let fval = found.value;
    let moved = state.x.axpy(-lambda * fval, &xi);
    let x_next = op.apply(&moved)?;
    let rho_next = state.rho.max(x_next.norm());
    let record = StepRecord {
        n,
        x: state.x.clone(),
        y: found.y,
        xi,
        rho: state.rho,
        lambda,
        eps,
        fval,
    };
    Ok((
        IterationState {
            n: n + 1,
            x: x_next,
            rho: rho_next,
        },
        record,
    ))
}

/// Records of steps `0..=max_steps` held in memory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub records: Vec<StepRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn xs(&self) -> impl Iterator<Item = &Vector> {
        self.records.iter().map(|r| &r.x)
    }

    pub fn ys(&self) -> Vec<Vector> {
        self.records.iter().map(|r| r.y.clone()).collect()
    }

    pub fn fvals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.fval).collect()
    }

    /// Largest pairwise distance between recorded iterates; a lower witness
    /// for the diameter of the whole sequence.
    pub fn diameter_bound(&self) -> f64 {
        diameter_bound(&self.records.iter().map(|r| r.x.clone()).collect::<Vec<_>>())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let Some(first) = self.records.first() else {
            return Ok(());
        };
        let mut sink = CsvSink::new(out, first.x.dim())?;
        for r in &self.records {
            sink.write(r)?;
        }
        sink.finish()
    }
}

/// Largest pairwise distance among the given points.
pub fn diameter_bound(points: &[Vector]) -> f64 {
    let mut best: f64 = 0.0;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            best = best.max(p.dist(q));
        }
    }
    best
}

/// Result of [`run`]: the records produced before any failure, and the failure.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub trajectory: Trajectory,
    pub error: Option<SolverError>,
}

impl RunOutcome {
    pub fn into_result(self) -> Result<Trajectory, SolverError> {
        match self.error {
            None => Ok(self.trajectory),
            Some(e) => Err(e),
        }
    }
}

/// Runs `max_steps + 1` steps from `x0`, keeping every record in memory.
///
/// Fails with [`SolverError::TooLong`] if that exceeds `cfg.in_memory_cap`;
/// use [`run_with_sink`] for longer runs.
pub fn run(
    problem: &EquilibriumProblem,
    op: &FirmOp,
    cfg: &SolverConfig,
    x0: Vector,
) -> RunOutcome {
    let requested = cfg.max_steps.saturating_add(1);
    if requested > cfg.in_memory_cap {
        return RunOutcome {
            trajectory: Trajectory::default(),
            error: Some(SolverError::TooLong {
                requested,
                cap: cfg.in_memory_cap,
            }),
        };
    }
    let mut records = Vec::with_capacity(requested);
    let error = run_with_sink(problem, op, cfg, x0, |r| {
        records.push(r.clone());
        Ok(())
    })
    .err();
    RunOutcome {
        trajectory: Trajectory { records },
        error,
    }
}

/// Runs `max_steps + 1` steps from `x0`, handing each record to `sink`.
/// Returns the state after the last step.
pub fn run_with_sink(
    problem: &EquilibriumProblem,
    op: &FirmOp,
    cfg: &SolverConfig,
    x0: Vector,
    mut sink: impl FnMut(&StepRecord) -> Result<(), SolverError>,
) -> Result<IterationState, SolverError> {
    cfg.validate()?;
    x0.ensure_dim(problem.dim())?;
    if let Some(d) = op.dim() {
        x0.ensure_dim(d)?;
    }
    let mut state = IterationState::initial(x0);
    for _ in 0..=cfg.max_steps {
        let (next, record) = step(&state, problem, op, cfg)?;
        sink(&record)?;
        state = next;
    }
    Ok(state)
}

/// Streams records as CSV with header `n,x[0],...,y[0],...,xi[0],...,rho,lambda,eps,fval`.
/// Floats carry 17 significant digits.
pub struct CsvSink<W: Write> {
    writer: csv::Writer<W>,
    dim: usize,
}

impl<W: Write> CsvSink<W> {
    pub fn new(out: W, dim: usize) -> csv::Result<Self> {
        let mut writer = csv::Writer::from_writer(out);
        let mut header = vec!["n".to_string()];
        for name in ["x", "y", "xi"] {
            header.extend((0..dim).map(|i| format!("{name}[{i}]")));
        }
        header.extend(["rho", "lambda", "eps", "fval"].map(String::from));
        writer.write_record(&header)?;
        Ok(Self { writer, dim })
    }

    pub fn write(&mut self, r: &StepRecord) -> csv::Result<()> {
        debug_assert_eq!(r.x.dim(), self.dim);
        let mut row = vec![r.n.to_string()];
        for v in [&r.x, &r.y, &r.xi] {
            row.extend(v.as_slice().iter().map(|c| fmt_float(*c)));
        }
        row.extend([r.rho, r.lambda, r.eps, r.fval].map(fmt_float));
        self.writer.write_record(&row)
    }

    pub fn finish(mut self) -> csv::Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}
