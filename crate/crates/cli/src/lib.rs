//! The `eqsub` command line: `solve` runs the method and writes its
//! trajectory, `rates` prints the exact bounds, `verify` runs the check suite.
//!
//! Exit codes: 0 success, 1 a check failed, 2 configuration error,
//! 3 the maximization oracle failed.

pub mod config;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use eqsub::rates::{uniform_closedness_moduli, Bound, Enclosure, RateCalculator, RateInputs};
use eqsub::regularity::OmegaContext;
use eqsub::solver::{run, run_with_sink, CsvSink, SolverConfig};
use eqsub::verify::{perturb, tally, CheckReport, Suite};
use eqsub::{Counterfunction, RateError, SolverError};
use num_traits::ToPrimitive;
use serde::Serialize;

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("oracle failure: {0}")]
    Oracle(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{0} check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::ChecksFailed(_) => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Oracle(_) => 3,
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        if e.is_oracle_failure() {
            CliError::Oracle(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Command line overrides shared by every subcommand.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub k: Option<u64>,
    pub g: Option<Counterfunction>,
    /// Decimal digit budget of exact bounds.
    pub cap: Option<u64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub checks: Option<String>,
}

fn out_dir(cfg: &RunConfig, ov: &Overrides) -> Result<PathBuf, CliError> {
    let dir = ov.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveSummary {
    pub records: usize,
    /// The iterate after the last recorded step.
    pub final_x: Vec<f64>,
    pub final_rho: f64,
    /// The last (at most five) values of `f(y_n, x_n)`.
    pub fval_tail: Vec<f64>,
    pub csv: String,
}

/// Runs the method, streaming `trajectory.csv` into the output directory.
/// On an oracle failure the rows written so far are kept.
pub fn solve(cfg: &RunConfig, ov: &Overrides) -> Result<SolveSummary, CliError> {
    let inputs = cfg.rate_inputs()?;
    let scfg = cfg.solver_config(&inputs)?;
    let problem = cfg.problem()?;
    let op = cfg.operator();
    let x0 = cfg.x0()?;
    let dir = out_dir(cfg, ov)?;
    let csv_path = dir.join("trajectory.csv");
    let mut sink = CsvSink::new(BufWriter::new(File::create(&csv_path)?), x0.dim())?;
    let mut records = 0;
    let mut tail = Vec::new();
    let result = run_with_sink(problem, &op, &scfg, x0, |r| {
        sink.write(r).map_err(|e| SolverError::InvalidConfig(format!("writing trajectory: {e}")))?;
        records += 1;
        tail.push(r.fval);
        if tail.len() > 5 {
            tail.remove(0);
        }
        Ok(())
    });
    sink.finish()?;
    let state = result?;
    let summary = SolveSummary {
        records,
        final_x: state.x.into_inner(),
        final_rho: state.rho,
        fval_tail: tail,
        csv: csv_path.display().to_string(),
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

/// One line of the bounds table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Row {
    pub name: String,
    /// Exact decimal value, a digit count for very long values, or the
    /// reason the bound could not be computed.
    pub value: String,
    pub digits: Option<u64>,
}

impl Row {
    fn text(name: &str, value: impl ToString) -> Self {
        Self {
            name: name.into(),
            value: value.to_string(),
            digits: None,
        }
    }

    fn bound(name: &str, b: Result<Bound, RateError>) -> Self {
        match b {
            Ok(b) => Self {
                name: name.into(),
                value: b.to_string(),
                digits: Some(b.digits()),
            },
            Err(e) => Self::text(name, format!("not computed: {e}")),
        }
    }
}

fn enclosure_text(e: &Enclosure) -> String {
    let f = |q: &num_rational::BigRational| q.to_f64().unwrap_or(f64::NAN);
    if e.is_exact() {
        e.lo().to_string()
    } else {
        format!("[{:.17}, {:.17}]", f(e.lo()), f(e.hi()))
    }
}

/// Every bound at `(k, g)`, plus the uniform closedness rows when `sigma`
/// is given and the regularity rate when `psi` is.
pub fn rates_table(
    calc: &RateCalculator,
    k: u64,
    g: &Counterfunction,
    psi: Option<&eqsub::RegularityModulus>,
    sigma: Option<&eqsub::rates::SigmaFamily>,
) -> Vec<Row> {
    let c = calc.constants();
    let inputs = calc.inputs();
    let kb = k.into();
    let mut rows = vec![
        Row::text("k", k),
        Row::text("g", g),
        Row::text("L", &inputs.l),
        Row::text("e", &inputs.e),
        Row::text("tau", &inputs.tau),
        Row::text("alpha", &c.alpha),
        Row::text("beta", enclosure_text(c.beta.best())),
        Row::text("sigma_real", enclosure_text(c.sigma_real.best())),
        Row::text("sigma", &c.sigma),
        Row::text("eta", enclosure_text(c.eta.best())),
        Row::bound("phi1_prime", calc.phi1_prime(&kb, g, &0u32.into())),
        Row::bound("phi1", calc.phi1(&kb, g)),
        Row::bound("phi2", calc.phi2(&kb, g)),
        Row::bound("phi3", calc.phi3(&kb, g)),
        Row::bound("approx_point", calc.approx_point_bound(&kb)),
        Row::bound("total_bdd", calc.total_bdd_modulus(&kb)),
        Row::bound("metastability", calc.metastability_rate(&kb, g)),
    ];
    if let Some(sigma) = sigma {
        match uniform_closedness_moduli(&kb, sigma) {
            Ok((delta, omega)) => {
                rows.push(Row::bound("delta", Ok(delta)));
                rows.push(Row::bound("omega", Ok(omega)));
            }
            Err(e) => rows.push(Row::text("delta", format!("not computed: {e}"))),
        }
        rows.push(Row::bound("metastability_uc", calc.metastability_rate_uc(&kb, g, sigma)));
    }
    if let Some(psi) = psi {
        rows.push(Row::bound("regularity_rate", calc.regularity_convergence_rate(&kb, psi)));
    }
    rows
}

/// The calculator for a config, honoring the digit budget override.
pub fn calculator(cfg: &RunConfig, ov: &Overrides) -> Result<RateCalculator, CliError> {
    let inputs: RateInputs = cfg.rate_inputs()?;
    RateCalculator::new(inputs, cfg.limits(ov.cap)).map_err(|e| CliError::Config(e.to_string()))
}

pub fn rates(cfg: &RunConfig, ov: &Overrides) -> Result<Vec<Row>, CliError> {
    let calc = calculator(cfg, ov)?;
    let k = ov.k.or(cfg.rates.k).unwrap_or(0);
    let g = ov.g.clone().or_else(|| cfg.rates.g.clone()).unwrap_or_else(|| Counterfunction::constant(1u32));
    Ok(rates_table(&calc, k, &g, cfg.psi().as_ref(), cfg.sigma().as_ref()))
}

pub fn format_table(rows: &[Row]) -> String {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
    rows.iter().map(|r| format!("{:<width$}  {}\n", r.name, r.value)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub pass: usize,
    pub fail: usize,
    pub skipped: usize,
    pub checks: Vec<CheckReport>,
}

/// Runs the method in memory and the selected checks on its trajectory,
/// writing `report.json` and `trajectory.csv`.
pub fn verify(cfg: &RunConfig, ov: &Overrides) -> Result<Report, CliError> {
    let groups = cfg.check_groups(ov.checks.as_deref())?;
    let calc = calculator(cfg, ov)?;
    let scfg: SolverConfig = cfg.solver_config(calc.inputs())?;
    let problem = cfg.problem()?.clone();
    let op = cfg.operator();
    let x0 = cfg.x0()?;
    let u = match &cfg.verify.u {
        Some(u) => cfg.vector("verify", "u", u)?,
        None => return Err(CliError::Config("field verify.u: a point of the solution set is required".into())),
    };
    let x_star = cfg.verify.x_star.as_deref().map(|v| cfg.vector("verify", "x_star", v)).transpose()?;
    let dir = out_dir(cfg, ov)?;
    let outcome = run(&problem, &op, &scfg, x0);
    let mut traj = outcome.trajectory;
    let csv_path = dir.join("trajectory.csv");
    let dim = traj.records.first().map_or(u.dim(), |r| r.x.dim());
    let mut sink = CsvSink::new(BufWriter::new(File::create(&csv_path)?), dim)?;
    for r in &traj.records {
        sink.write(r)?;
    }
    sink.finish()?;
    if let Some(e) = outcome.error {
        return Err(e.into());
    }
    if let Some(p) = &cfg.verify.perturb {
        perturb(&mut traj, p.step, p.delta).map_err(|e| CliError::Config(format!("field verify.perturb: {e}")))?;
    }
    let ctx = OmegaContext::from_trajectory(op, problem, &traj);
    let suite = Suite {
        traj: &traj,
        ctx: &ctx,
        calc: &calc,
        u,
        ks: ov.k.map_or_else(|| cfg.verify.k.clone(), |k| vec![k]),
        gs: ov.g.clone().map_or_else(|| cfg.verify.g.clone(), |g| vec![g]),
        psi: cfg.psi(),
        x_star,
        sigma: cfg.sigma(),
        cap: cfg.verify.feasibility_cap,
        tol: cfg.verify.tol,
        seed: ov.seed.unwrap_or(cfg.output.seed),
        samples: cfg.verify.samples,
    };
    let checks = suite.run(&groups).map_err(|e| CliError::Config(e.to_string()))?;
    let (pass, fail, skipped) = tally(&checks);
    let report = Report {
        pass,
        fail,
        skipped,
        checks,
    };
    write_json(&dir.join("report.json"), &report)?;
    Ok(report)
}

pub fn format_report(report: &Report) -> String {
    let mut out = String::new();
    for c in &report.checks {
        let status = match c.status {
            eqsub::Status::Pass => "PASS",
            eqsub::Status::Fail => "FAIL",
            eqsub::Status::Skipped => "SKIP",
        };
        let step = c.step.map(|s| format!(" step {s}")).unwrap_or_default();
        let line = format!("{status} {}{step} {}", c.id, c.note);
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out.push_str(&format!(
        "{} passed, {} failed, {} skipped\n",
        report.pass, report.fail, report.skipped
    ));
    out
}
