//! Empirical checks of the per-step inequalities and of every computed
//! bound against recorded trajectories.
//!
//! Each check produces a [`CheckReport`]. Margins are slacks: the amount by
//! which the checked inequality holds, negative when it is violated. Bounds
//! above the feasibility cap are never searched; their checks are reported
//! as skipped together with the bound's digit count.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::counter::Counterfunction;
use crate::error::{RateError, RegularityError, VerifyError};
use crate::operators::{fix_residual, FirmOp};
use crate::rates::{uniform_closedness_moduli, Bound, RateCalculator, RateInputs, SigmaFamily};
use crate::regularity::{threshold, OmegaContext, RegularityModulus};
use crate::solver::Trajectory;
use crate::vector::Vector;

/// Largest bound a witness search will run to.
pub const DEFAULT_CAP: u64 = 1_000_000;

/// Absolute tolerance on floating inequalities.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub id: String,
    pub status: Status,
    /// Smallest slack seen, negative on violation.
    pub worst_margin: Option<f64>,
    /// Step where the worst margin occurred, or the witness index.
    pub step: Option<usize>,
    pub bound_digits: Option<u64>,
    pub note: String,
}

impl CheckReport {
    fn new(id: impl Into<String>, status: Status) -> Self {
        Self {
            id: id.into(),
            status,
            worst_margin: None,
            step: None,
            bound_digits: None,
            note: String::new(),
        }
    }

    fn skipped(id: impl Into<String>, note: impl Into<String>) -> Self {
        let mut r = Self::new(id, Status::Skipped);
        r.note = note.into();
        r
    }

    fn with_bound(mut self, bound: &Bound) -> Self {
        self.bound_digits = Some(bound.digits());
        self
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// Running minimum of slacks with the step where it occurred.
#[derive(Clone, Copy, Debug)]
struct Worst {
    margin: f64,
    step: usize,
    seen: bool,
}

impl Worst {
    fn new() -> Self {
        Self {
            margin: f64::INFINITY,
            step: 0,
            seen: false,
        }
    }

    fn update(&mut self, margin: f64, step: usize) {
        // NaN slacks count as violations
        let margin = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
        if !self.seen || margin < self.margin {
            self.margin = margin;
            self.step = step;
        }
        self.seen = true;
    }

    /// Report for an inequality checked with `slack >= -tol`.
    fn report(self, id: &str, tol: f64) -> CheckReport {
        if !self.seen {
            return CheckReport::skipped(id, "no steps to check");
        }
        let status = if self.margin >= -tol { Status::Pass } else { Status::Fail };
        let mut r = CheckReport::new(id, status);
        r.worst_margin = Some(self.margin);
        r.step = Some(self.step);
        r
    }

    /// Report for a strict inequality, `slack > 0`.
    fn report_strict(self, id: &str) -> CheckReport {
        if !self.seen {
            return CheckReport::skipped(id, "no steps to check");
        }
        let status = if self.margin > 0.0 { Status::Pass } else { Status::Fail };
        let mut r = CheckReport::new(id, status);
        r.worst_margin = Some(self.margin);
        r.step = Some(self.step);
        r
    }
}

/// Floating copies of the rate inputs used by the per-step inequalities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepConstants {
    pub a: f64,
    pub b: f64,
    pub m: f64,
    pub l: f64,
    pub e: f64,
}

impl StepConstants {
    pub fn from_inputs(inputs: &RateInputs) -> Self {
        let f = |q: &num_rational::BigRational| q.to_f64().unwrap_or(f64::INFINITY);
        Self {
            a: f(&inputs.a),
            b: f(&inputs.b),
            m: f(&inputs.m),
            l: f(&inputs.l),
            e: f(&inputs.e),
        }
    }

    /// `a (2 - M^2 b)`
    pub fn alpha(&self) -> f64 {
        self.a * (2.0 - self.m * self.m * self.b)
    }
}

/// Ids produced by [`check_step_inequalities`], in report order.
pub const STEP_CHECK_IDS: [&str; 8] = [
    "fejer",
    "fejer_sharp",
    "descent_gap",
    "step_length",
    "step_length_diameter",
    "fix_residual_step",
    "subgradient_bound",
    "fval_bound",
];

/// Evaluates every per-step inequality along the trajectory. Transition
/// checks report the index of the later iterate `n+1`.
pub fn check_step_inequalities(
    traj: &Trajectory,
    op: &FirmOp,
    u: &Vector,
    inputs: &RateInputs,
    tol: f64,
) -> Result<Vec<CheckReport>, VerifyError> {
    let c = StepConstants::from_inputs(inputs);
    let alpha = c.alpha();
    let mut worst = [Worst::new(); 8];
    for r in &traj.records {
        if r.x.dim() != u.dim() {
            return Err(VerifyError::Invalid(format!(
                "reference point has dimension {}, trajectory has {}",
                u.dim(),
                r.x.dim()
            )));
        }
        worst[6].update(c.m - r.xi.norm(), r.n);
        worst[7].update(c.e - r.fval, r.n);
    }
    for pair in traj.records.windows(2) {
        let (cur, next) = (&pair[0], &pair[1]);
        let step = next.n;
        let f = cur.fval;
        let d0 = cur.x.dist_sq(u);
        let d1 = next.x.dist_sq(u);
        let gap = d0 - d1;
        let s = cur.x.dist(&next.x);
        let lam = cur.lambda;
        worst[0].update(d0 - d1, step);
        worst[1].update(d0 + lam * (c.m * c.m * lam - 2.0) * f * f - d1, step);
        worst[2].update(gap - alpha * f * f, step);
        worst[3].update(gap + 2.0 * c.m * c.b * f * s - s * s, step);
        worst[4].update(gap + 2.0 * c.m * c.b * c.l * f - s * s, step);
        let res = fix_residual(op, &next.x)?;
        worst[5].update(s + c.m * c.b * f - res, step);
    }
    Ok(STEP_CHECK_IDS
        .iter()
        .zip(worst)
        .map(|(id, w)| w.report(id, tol))
        .collect())
}

/// Adds `delta` to every coordinate of the recorded `x_step`.
pub fn perturb(traj: &mut Trajectory, step: usize, delta: f64) -> Result<(), VerifyError> {
    let len = traj.len();
    let r = traj
        .records
        .get_mut(step)
        .ok_or_else(|| VerifyError::Invalid(format!("step {step} outside a trajectory of {len} records")))?;
    r.x = r.x.map(|v| v + delta);
    Ok(())
}

/// A recorded sequence and the window property a witness must have.
#[derive(Clone, Debug)]
pub enum Series {
    /// `q_i < 1/(k+1)` for every `i` in the window.
    Below(Vec<f64>),
    /// `|q_i - q_j| < 1/(k+1)` for all `i, j` in the window.
    Oscillation(Vec<f64>),
    /// `|p_i - p_j| <= 1/(k+1)` for all `i, j` in the window.
    Points(Vec<Vector>),
}

impl Series {
    pub fn len(&self) -> usize {
        match self {
            Series::Below(v) | Series::Oscillation(v) => v.len(),
            Series::Points(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Result of a search for the least `n` whose window `[n, n+g(n)]` has the
/// property of the series.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WitnessOutcome {
    Found(usize),
    /// Every `n < searched` fails; `n = searched` was not decided, either
    /// because it passed the limit or because its window leaves the record.
    NotFound { searched: usize },
}

/// End of the window at `n`, if it lies inside `len` records.
fn window_end(g: &Counterfunction, n: usize, len: usize) -> Option<usize> {
    let end = (n as u64).checked_add(g.eval_small(n as u64)?)?;
    (end < len as u64).then_some(end as usize)
}

/// Monotone deque tracking the maximum (or minimum) of a sliding window.
struct Extreme {
    idx: VecDeque<usize>,
    max: bool,
}

impl Extreme {
    fn new(max: bool) -> Self {
        Self {
            idx: VecDeque::new(),
            max,
        }
    }

    fn push(&mut self, values: &[f64], i: usize) {
        while let Some(&b) = self.idx.back() {
            let dominated = if self.max { values[b] <= values[i] } else { values[b] >= values[i] };
            if !dominated {
                break;
            }
            self.idx.pop_back();
        }
        self.idx.push_back(i);
    }

    fn expire(&mut self, start: usize) {
        while self.idx.front().is_some_and(|&f| f < start) {
            self.idx.pop_front();
        }
    }

    fn get(&self, values: &[f64]) -> f64 {
        values[*self.idx.front().expect("window is nonempty")]
    }
}

fn window_diameter_within(points: &[Vector], start: usize, end: usize, thr: f64) -> bool {
    (start..=end).all(|i| (i + 1..=end).all(|j| points[i].dist(&points[j]) <= thr))
}

/// Least `n <= limit` whose window has the property, in one pass over the
/// record with sliding-window extremes.
pub fn find_witness(series: &Series, thr: f64, g: &Counterfunction, limit: usize) -> WitnessOutcome {
    let len = series.len();
    match series {
        Series::Below(q) => {
            let mut hi = Extreme::new(true);
            let mut next = 0;
            for n in 0..=limit {
                let Some(end) = window_end(g, n, len) else {
                    return WitnessOutcome::NotFound { searched: n };
                };
                while next <= end {
                    hi.push(q, next);
                    next += 1;
                }
                hi.expire(n);
                if hi.get(q) < thr {
                    return WitnessOutcome::Found(n);
                }
            }
        }
        Series::Oscillation(q) => {
            let (mut hi, mut lo) = (Extreme::new(true), Extreme::new(false));
            let mut next = 0;
            for n in 0..=limit {
                let Some(end) = window_end(g, n, len) else {
                    return WitnessOutcome::NotFound { searched: n };
                };
                while next <= end {
                    hi.push(q, next);
                    lo.push(q, next);
                    next += 1;
                }
                hi.expire(n);
                lo.expire(n);
                if hi.get(q) - lo.get(q) < thr {
                    return WitnessOutcome::Found(n);
                }
            }
        }
        Series::Points(p) => {
            let dim = p.first().map_or(0, Vector::dim);
            let coords: Vec<Vec<f64>> = (0..dim).map(|c| p.iter().map(|v| v[c]).collect()).collect();
            let mut ext: Vec<(Extreme, Extreme)> =
                (0..dim).map(|_| (Extreme::new(true), Extreme::new(false))).collect();
            let mut next = 0;
            for n in 0..=limit {
                let Some(end) = window_end(g, n, len) else {
                    return WitnessOutcome::NotFound { searched: n };
                };
                while next <= end {
                    for (c, (hi, lo)) in ext.iter_mut().enumerate() {
                        hi.push(&coords[c], next);
                        lo.push(&coords[c], next);
                    }
                    next += 1;
                }
                // a coordinate range is a lower bound for the diameter
                let mut spread = 0.0f64;
                for (c, (hi, lo)) in ext.iter_mut().enumerate() {
                    hi.expire(n);
                    lo.expire(n);
                    spread = spread.max(hi.get(&coords[c]) - lo.get(&coords[c]));
                }
                if spread <= thr * (1.0 + 1e-12) && window_diameter_within(p, n, end, thr) {
                    return WitnessOutcome::Found(n);
                }
            }
        }
    }
    WitnessOutcome::NotFound { searched: limit + 1 }
}

/// Linear scan from 0 evaluating every window directly.
pub fn find_witness_naive(series: &Series, thr: f64, g: &Counterfunction, limit: usize) -> WitnessOutcome {
    let len = series.len();
    for n in 0..=limit {
        let Some(end) = window_end(g, n, len) else {
            return WitnessOutcome::NotFound { searched: n };
        };
        let ok = match series {
            Series::Below(q) => q[n..=end].iter().all(|&v| v < thr),
            Series::Oscillation(q) => {
                (n..=end).all(|i| (n..=end).all(|j| (q[i] - q[j]).abs() < thr))
            }
            Series::Points(p) => window_diameter_within(p, n, end, thr),
        };
        if ok {
            return WitnessOutcome::Found(n);
        }
    }
    WitnessOutcome::NotFound { searched: limit + 1 }
}

/// Quantities with a bound on how soon they settle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// `f(y_i, x_i)`, bounded by `phi2(k^2+2k, g)`.
    Fvals,
    /// `|x_i - T x_i|`, bounded by `phi3(k, g)`.
    FixResiduals,
    /// Oscillation of `|x_i - u|^2`, bounded by `phi1(k, g)`.
    NormSqToU,
    /// Diameter of the iterates, bounded by the rate of metastability.
    Points,
}

impl Quantity {
    pub const ALL: [Quantity; 4] = [
        Quantity::Fvals,
        Quantity::FixResiduals,
        Quantity::NormSqToU,
        Quantity::Points,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Quantity::Fvals => "fvals",
            Quantity::FixResiduals => "fix_residuals",
            Quantity::NormSqToU => "norm_sq_to_u",
            Quantity::Points => "points",
        }
    }

    /// The recorded series for this quantity.
    pub fn series(&self, traj: &Trajectory, op: &FirmOp, u: &Vector) -> Result<Series, VerifyError> {
        Ok(match self {
            Quantity::Fvals => Series::Below(traj.fvals()),
            Quantity::FixResiduals => Series::Below(
                traj.xs()
                    .map(|x| fix_residual(op, x))
                    .collect::<Result<_, _>>()?,
            ),
            Quantity::NormSqToU => Series::Oscillation(traj.xs().map(|x| x.dist_sq(u)).collect()),
            Quantity::Points => Series::Points(traj.xs().cloned().collect()),
        })
    }

    /// The bound this quantity's witness must respect.
    pub fn bound(&self, calc: &RateCalculator, k: u64, g: &Counterfunction) -> Result<Bound, RateError> {
        let kb = BigUint::from(k);
        match self {
            Quantity::Fvals => calc.phi2(&(&kb * &kb + &kb * 2u32), g),
            Quantity::FixResiduals => calc.phi3(&kb, g),
            Quantity::NormSqToU => calc.phi1(&kb, g),
            Quantity::Points => calc.metastability_rate(&kb, g),
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Searches for the least witness of the window property at `k` and
/// checks it does not exceed `bound`.
pub fn witness_search(
    id: &str,
    series: &Series,
    k: u64,
    g: &Counterfunction,
    bound: &Bound,
    cap: u64,
) -> CheckReport {
    let over_cap = || {
        CheckReport::skipped(id, format!("bound ({} digits) exceeds the cap {cap}", bound.digits()))
            .with_bound(bound)
    };
    if !bound.fits(cap) {
        return over_cap();
    }
    let Some(limit) = bound.to_u64().and_then(|b| usize::try_from(b).ok()) else {
        return over_cap();
    };
    let thr = threshold(k as usize);
    match find_witness(series, thr, g, limit) {
        WitnessOutcome::Found(n) => {
            let mut r = CheckReport::new(id, Status::Pass).with_bound(bound);
            r.step = Some(n);
            r.worst_margin = Some((limit - n) as f64);
            r.note = format!("witness {n} <= bound {limit}");
            r
        }
        WitnessOutcome::NotFound { searched } if searched > limit => {
            CheckReport::new(id, Status::Fail)
                .with_bound(bound)
                .with_note(format!("no witness up to the bound {limit}"))
        }
        WitnessOutcome::NotFound { searched } => CheckReport::skipped(
            id,
            format!("no witness below {searched}; its window leaves the {} recorded steps", series.len()),
        )
        .with_bound(bound),
    }
}

/// Witness search for `quantity` against its own bound.
pub fn witness_search_metastability(
    traj: &Trajectory,
    op: &FirmOp,
    u: &Vector,
    calc: &RateCalculator,
    k: u64,
    g: &Counterfunction,
    quantity: Quantity,
    cap: u64,
) -> Result<CheckReport, VerifyError> {
    let id = format!("witness_{quantity}(k={k},g={g})");
    let bound = match quantity.bound(calc, k, g) {
        Ok(b) => b,
        Err(e) => return Ok(CheckReport::skipped(id, e.to_string())),
    };
    let series = quantity.series(traj, op, u)?;
    Ok(witness_search(&id, &series, k, g, &bound, cap))
}

/// Least `n <= limit` with `pred(x_n)`, over the recorded iterates.
fn first_index(
    traj: &Trajectory,
    limit: usize,
    mut pred: impl FnMut(&Vector) -> Result<bool, RegularityError>,
) -> Result<Option<usize>, RegularityError> {
    for (n, x) in traj.xs().enumerate().take(limit.saturating_add(1)) {
        if pred(x)? {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

fn bounded_search(
    id: String,
    traj: &Trajectory,
    bound: Result<Bound, RateError>,
    cap: u64,
    pred: impl FnMut(&Vector) -> Result<bool, RegularityError>,
) -> Result<CheckReport, VerifyError> {
    let bound = match bound {
        Ok(b) => b,
        Err(e) => return Ok(CheckReport::skipped(id, e.to_string())),
    };
    let limit = match bound.to_u64().and_then(|b| usize::try_from(b).ok()) {
        Some(b) if bound.fits(cap) => b,
        _ => {
            return Ok(CheckReport::skipped(
                id,
                format!("bound ({} digits) exceeds the cap {cap}", bound.digits()),
            )
            .with_bound(&bound))
        }
    };
    Ok(match first_index(traj, limit, pred)? {
        Some(n) => {
            let mut r = CheckReport::new(id, Status::Pass).with_bound(&bound);
            r.step = Some(n);
            r.worst_margin = Some((limit - n) as f64);
            r.note = format!("witness {n} <= bound {limit}");
            r
        }
        None if traj.len() > limit => CheckReport::new(id, Status::Fail)
            .with_bound(&bound)
            .with_note(format!("no witness up to the bound {limit}")),
        None => CheckReport::skipped(
            id,
            format!("no witness in the {} recorded steps, bound is {limit}", traj.len()),
        )
        .with_bound(&bound),
    })
}

/// Some `n <= approx_point_bound(k)` has `x_n` in `Omega'_k`.
pub fn check_approx_point_bound(
    traj: &Trajectory,
    ctx: &OmegaContext,
    k: u64,
    calc: &RateCalculator,
    cap: u64,
) -> Result<CheckReport, VerifyError> {
    let id = format!("approx_point(k={k})");
    let ku = k as usize;
    if ctx.horizon().is_none_or(|h| ku > h) {
        return Ok(CheckReport::skipped(id, "k exceeds the recorded horizon"));
    }
    let bound = calc.approx_point_bound(&BigUint::from(k));
    bounded_search(id, traj, bound, cap, |x| ctx.omega_prime_member(x, ku, 0.0))
}

/// Some `n <= approx_point_bound(k)` has `F(x_n) <= 1/(k+1)`.
pub fn check_approx_zero_bound(
    traj: &Trajectory,
    ctx: &OmegaContext,
    k: u64,
    calc: &RateCalculator,
    cap: u64,
) -> Result<CheckReport, VerifyError> {
    let id = format!("approx_zero(k={k})");
    let ku = k as usize;
    if ctx.horizon().is_none_or(|h| ku > h) {
        return Ok(CheckReport::skipped(id, "k exceeds the recorded horizon"));
    }
    let bound = calc.approx_point_bound(&BigUint::from(k));
    let thr = threshold(ku);
    bounded_search(id, traj, bound, cap, |x| Ok(ctx.f_value(x)? <= thr))
}

fn to_index(b: &Bound) -> Option<usize> {
    b.to_u64().and_then(|v| usize::try_from(v).ok())
}

/// For candidates `u` in `Omega'_k` with `k = chi(n, m, r)`:
/// `|x_{n+l} - u| < |x_n - u| + 1/(r+1) + tol` for all `l <= m`.
pub fn check_fejer_modulus(
    traj: &Trajectory,
    ctx: &OmegaContext,
    calc: &RateCalculator,
    (n, m, r): (u64, u64, u64),
    candidates: &[Vector],
    tol: f64,
) -> Result<CheckReport, VerifyError> {
    let id = format!("fejer_modulus(n={n},m={m},r={r})");
    let chi = calc.chi(&n.into(), &m.into(), &r.into())?;
    let horizon = ctx.horizon().unwrap_or(0);
    let k = match to_index(&chi) {
        Some(k) if ctx.horizon().is_some_and(|h| k <= h) => k,
        _ => {
            return Err(RegularityError::HorizonExceeded {
                k: chi.value.to_string(),
                horizon,
            }
            .into())
        }
    };
    let (n, m) = (n as usize, m as usize);
    if n + m >= traj.len() {
        return Err(VerifyError::Invalid(format!(
            "steps {n}..={} not all recorded ({} records)",
            n + m,
            traj.len()
        )));
    }
    let slack_r = 1.0 / (r as f64 + 1.0);
    let mut worst = Worst::new();
    let mut members = 0usize;
    for u in candidates {
        if !ctx.omega_prime_member(u, k, 0.0)? {
            continue;
        }
        members += 1;
        let base = traj.records[n].x.dist(u) + slack_r;
        for l in 0..=m {
            worst.update(base - traj.records[n + l].x.dist(u), n + l);
        }
    }
    if members == 0 {
        let mut rep = CheckReport::new(id, Status::Pass).with_bound(&chi);
        rep.note = format!("no members sampled (k={k})");
        return Ok(rep);
    }
    let mut rep = worst.report(&id, tol).with_bound(&chi);
    rep.note = format!("{members} of {} candidates in the approximation set k={k}", candidates.len());
    Ok(rep)
}

/// For each `k <= k_max` whose rate fits the cap and the record:
/// `|x_n - x*| < 1/(k+1)` for all recorded `n >= rate(k)`.
pub fn check_regularity_rate(
    traj: &Trajectory,
    x_star: &Vector,
    k_max: u64,
    psi: &RegularityModulus,
    calc: &RateCalculator,
    cap: u64,
) -> CheckReport {
    let id = format!("regularity_rate(k<={k_max})");
    let mut worst = Worst::new();
    let (mut checked, mut skipped) = (0u64, 0u64);
    let mut max_digits = 0u64;
    for k in 0..=k_max {
        let rate = match calc.regularity_convergence_rate(&k.into(), psi) {
            Ok(b) => b,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        max_digits = max_digits.max(rate.digits());
        let start = match to_index(&rate) {
            Some(s) if rate.fits(cap) && s < traj.len() => s,
            _ => {
                skipped += 1;
                continue;
            }
        };
        checked += 1;
        let thr = threshold(k as usize);
        for rec in &traj.records[start..] {
            worst.update(thr - rec.x.dist(x_star), rec.n);
        }
    }
    let note = format!("{checked} values of k checked, {skipped} skipped");
    let mut rep = if checked == 0 {
        CheckReport::skipped(&id, "")
    } else {
        worst.report_strict(&id)
    };
    rep.bound_digits = Some(max_digits);
    rep.with_note(note)
}

/// Pairs `(u, u')` with `u'` uniform in the box `center +- spread` and
/// `u = u' + v`, `v` uniform in the box `+- reach`.
pub fn sample_pairs(center: &Vector, spread: f64, reach: f64, count: usize, seed: u64) -> Vec<(Vector, Vector)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let up = center.map(|c| c + rng.random_range(-spread..=spread));
            let u = up.map(|c| c + rng.random_range(-reach..=reach));
            (u, up)
        })
        .collect()
}

/// Grid with `per_axis` points per coordinate over `center +- radius`,
/// followed by `random` uniform samples from the same box.
pub fn candidate_points(center: &Vector, radius: f64, per_axis: usize, random: usize, seed: u64) -> Vec<Vector> {
    let dim = center.dim();
    let per_axis = per_axis.max(1);
    let coord = |i: usize| {
        if per_axis == 1 {
            0.0
        } else {
            -radius + 2.0 * radius * i as f64 / (per_axis - 1) as f64
        }
    };
    let mut out = Vec::new();
    let total = per_axis.checked_pow(dim as u32).unwrap_or(usize::MAX);
    for mut idx in 0..total.min(1 << 20) {
        let mut v = Vec::with_capacity(dim);
        for c in 0..dim {
            v.push(center[c] + coord(idx % per_axis));
            idx /= per_axis;
        }
        out.push(Vector::new(v).expect("finite grid point"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random {
        out.push(center.map(|c| c + rng.random_range(-radius..=radius)));
    }
    out
}

/// `u' in Omega'_{delta(k)}` and `|u - u'| <= 1/(omega(k)+1)` imply
/// `u in Omega'_k`, over the sampled pairs `(u, u')`.
pub fn check_uniform_closedness(
    ctx: &OmegaContext,
    k: u64,
    sigma: &SigmaFamily,
    samples: &[(Vector, Vector)],
) -> Result<CheckReport, VerifyError> {
    let id = format!("uniform_closedness(k={k})");
    let (delta, omega) = uniform_closedness_moduli(&k.into(), sigma)?;
    let horizon = ctx.horizon().unwrap_or(0);
    let d = match to_index(&delta) {
        Some(d) if ctx.horizon().is_some_and(|h| d <= h) => d,
        _ => {
            return Err(RegularityError::HorizonExceeded {
                k: delta.value.to_string(),
                horizon,
            }
            .into())
        }
    };
    let reach = 1.0 / (omega.value.to_f64().unwrap_or(f64::INFINITY) + 1.0);
    let (mut premises, mut failures) = (0usize, 0usize);
    let mut first_failure = None;
    for (i, (u, up)) in samples.iter().enumerate() {
        if u.dist(up) > reach || !ctx.omega_prime_member(up, d, 0.0)? {
            continue;
        }
        premises += 1;
        if !ctx.omega_prime_member(u, k as usize, 0.0)? {
            failures += 1;
            first_failure.get_or_insert(i);
        }
    }
    let status = if failures == 0 { Status::Pass } else { Status::Fail };
    let mut rep = CheckReport::new(id, status).with_bound(&omega);
    rep.step = first_failure;
    rep.note = if premises == 0 {
        "no pairs satisfied the premises".to_string()
    } else {
        format!("{premises} pairs satisfied the premises, {failures} failed")
    };
    Ok(rep)
}

/// `x in Omega'_k` exactly when `F(x) <= 1/(k+1)`, and `gamma(x)` is upward
/// closed, at every point and every `k <= k_max`.
pub fn check_characterization(
    ctx: &OmegaContext,
    points: &[Vector],
    k_max: u64,
) -> Result<Vec<CheckReport>, VerifyError> {
    let k_max = k_max as usize;
    let (mut equiv_fail, mut closure_fail) = (None, None);
    let (mut equiv_count, mut closure_count) = (0usize, 0usize);
    for (i, x) in points.iter().enumerate() {
        let f = ctx.f_value(x)?;
        let mut prev_in_gamma = false;
        for k in 0..=k_max {
            if ctx.omega_prime_member(x, k, 0.0)? != (f <= threshold(k)) {
                equiv_count += 1;
                equiv_fail.get_or_insert(i);
            }
            let in_gamma = ctx.gamma_contains(x, k)?;
            if prev_in_gamma && !in_gamma {
                closure_count += 1;
                closure_fail.get_or_insert(i);
            }
            prev_in_gamma = in_gamma;
        }
    }
    let report = |id: &str, count: usize, at: Option<usize>| {
        let mut r = CheckReport::new(id, if count == 0 { Status::Pass } else { Status::Fail });
        r.step = at;
        r.note = format!("{} points, {count} mismatches", points.len());
        r
    };
    Ok(vec![
        report("membership_by_f", equiv_count, equiv_fail),
        report("gamma_upward_closed", closure_count, closure_fail),
    ])
}

/// Groups of checks selectable by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckGroup {
    Steps,
    Witness,
    ApproxPoint,
    FejerModulus,
    Regularity,
    Closedness,
    Characterization,
}

impl CheckGroup {
    pub const ALL: [CheckGroup; 7] = [
        CheckGroup::Steps,
        CheckGroup::Witness,
        CheckGroup::ApproxPoint,
        CheckGroup::FejerModulus,
        CheckGroup::Regularity,
        CheckGroup::Closedness,
        CheckGroup::Characterization,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CheckGroup::Steps => "steps",
            CheckGroup::Witness => "witness",
            CheckGroup::ApproxPoint => "approx_point",
            CheckGroup::FejerModulus => "fejer_modulus",
            CheckGroup::Regularity => "regularity",
            CheckGroup::Closedness => "closedness",
            CheckGroup::Characterization => "characterization",
        }
    }
}

impl FromStr for CheckGroup {
    type Err = VerifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CheckGroup::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| VerifyError::Invalid(format!("unknown check group {s:?}")))
    }
}

/// Everything the full suite needs about one run.
#[derive(Clone, Debug)]
pub struct Suite<'a> {
    pub traj: &'a Trajectory,
    pub ctx: &'a OmegaContext,
    pub calc: &'a RateCalculator,
    /// A point of the solution set.
    pub u: Vector,
    pub ks: Vec<u64>,
    pub gs: Vec<Counterfunction>,
    pub psi: Option<RegularityModulus>,
    /// The limit, or the last iterate when unknown.
    pub x_star: Option<Vector>,
    pub sigma: Option<SigmaFamily>,
    pub cap: u64,
    pub tol: f64,
    pub seed: u64,
    pub samples: usize,
}

impl Suite<'_> {
    /// Runs the selected groups in the order of [`CheckGroup::ALL`].
    /// Errors that only mean the record is too short become skipped reports.
    pub fn run(&self, groups: &[CheckGroup]) -> Result<Vec<CheckReport>, VerifyError> {
        let mut out = Vec::new();
        let k_max = self.ks.iter().copied().max().unwrap_or(0);
        for group in CheckGroup::ALL.into_iter().filter(|g| groups.contains(g)) {
            match group {
                CheckGroup::Steps => {
                    out.extend(check_step_inequalities(
                        self.traj,
                        &self.ctx.op,
                        &self.u,
                        self.calc.inputs(),
                        self.tol,
                    )?);
                }
                CheckGroup::Witness => {
                    for &k in &self.ks {
                        for g in &self.gs {
                            for q in Quantity::ALL {
                                out.push(witness_search_metastability(
                                    self.traj,
                                    &self.ctx.op,
                                    &self.u,
                                    self.calc,
                                    k,
                                    g,
                                    q,
                                    self.cap,
                                )?);
                            }
                        }
                    }
                }
                CheckGroup::ApproxPoint => {
                    for &k in &self.ks {
                        out.push(check_approx_point_bound(self.traj, self.ctx, k, self.calc, self.cap)?);
                        out.push(check_approx_zero_bound(self.traj, self.ctx, k, self.calc, self.cap)?);
                    }
                }
                CheckGroup::FejerModulus => {
                    let radius = self.traj.records.first().map_or(1.0, |r| r.x.dist(&self.u)) + 1.0;
                    let cands = candidate_points(&self.u, radius, 21, self.samples, self.seed);
                    for (n, m, r) in [(0, 2, 0), (0, 5, 1), (1, 3, 2)] {
                        let id = format!("fejer_modulus(n={n},m={m},r={r})");
                        out.push(
                            match check_fejer_modulus(self.traj, self.ctx, self.calc, (n, m, r), &cands, self.tol) {
                                Ok(rep) => rep,
                                Err(VerifyError::Rate(e)) => CheckReport::skipped(id, e.to_string()),
                                Err(VerifyError::Regularity(e @ RegularityError::HorizonExceeded { .. })) => {
                                    CheckReport::skipped(id, e.to_string())
                                }
                                Err(VerifyError::Invalid(e)) => CheckReport::skipped(id, e),
                                Err(e) => return Err(e),
                            },
                        );
                    }
                }
                CheckGroup::Regularity => match &self.psi {
                    Some(psi) => {
                        let last = self.traj.records.last().map(|r| r.x.clone());
                        match self.x_star.clone().or(last) {
                            Some(x_star) => out.push(check_regularity_rate(
                                self.traj, &x_star, k_max, psi, self.calc, self.cap,
                            )),
                            None => out.push(CheckReport::skipped("regularity_rate", "empty trajectory")),
                        }
                    }
                    None => out.push(CheckReport::skipped("regularity_rate", "no modulus of regularity given")),
                },
                CheckGroup::Closedness => {
                    let Some(sigma) = &self.sigma else {
                        out.push(CheckReport::skipped("uniform_closedness", "no moduli of continuity given"));
                        continue;
                    };
                    for &k in &self.ks {
                        let id = format!("uniform_closedness(k={k})");
                        let (delta, omega) = match uniform_closedness_moduli(&k.into(), sigma) {
                            Ok(p) => p,
                            Err(e) => {
                                out.push(CheckReport::skipped(id, e.to_string()));
                                continue;
                            }
                        };
                        let spread = 1.0 / (delta.value.to_f64().unwrap_or(f64::INFINITY) + 1.0);
                        let reach = 1.0 / (omega.value.to_f64().unwrap_or(f64::INFINITY) + 1.0);
                        let pairs = sample_pairs(&self.u, spread, reach, self.samples, self.seed ^ k);
                        out.push(match check_uniform_closedness(self.ctx, k, sigma, &pairs) {
                            Ok(rep) => rep,
                            Err(VerifyError::Regularity(e @ RegularityError::HorizonExceeded { .. })) => {
                                CheckReport::skipped(id, e.to_string())
                            }
                            Err(e) => return Err(e),
                        });
                    }
                }
                CheckGroup::Characterization => {
                    let horizon = self.ctx.horizon().unwrap_or(0) as u64;
                    let km = k_max.min(horizon);
                    let pts = candidate_points(&self.u, 2.0, 11, self.samples.min(100), self.seed);
                    out.extend(check_characterization(self.ctx, &pts, km)?);
                }
            }
        }
        Ok(out)
    }
}

/// Counts of each status.
pub fn tally(reports: &[CheckReport]) -> (usize, usize, usize) {
    reports.iter().fold((0, 0, 0), |(p, f, s), r| match r.status {
        Status::Pass => (p + 1, f, s),
        Status::Fail => (p, f + 1, s),
        Status::Skipped => (p, f, s + 1),
    })
}

#[cfg(test)]
mod tests;
