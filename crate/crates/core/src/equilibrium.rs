//! Equilibrium functions `f(x, y)` with `f(x, x) = 0`, `f(., y)` continuous and
//! `f(x, .)` convex; subgradients of `f(y, .)`; and approximate maximizers of
//! `y -> f(y, x)` over closed balls centered at the origin.

use nalgebra::{DMatrix, DVector};
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::counter::Counterfunction;
use crate::error::{DimensionError, EquilibriumError};
use crate::vector::Vector;

/// Default ceiling on the number of grid points the grid oracle may evaluate.
pub const DEFAULT_MAX_GRID_POINTS: u64 = 10_000_000;
/// Largest dimension the grid oracle accepts.
pub const MAX_GRID_DIM: usize = 3;

/// Convex functions `h` used by the convex minimization family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConvexFn {
    /// `h(x) = sum_i w_i |x_i - z_i|` with `w_i >= 0`.
    WeightedOneNorm { center: Vec<f64>, weights: Vec<f64> },
    /// `h(x) = x^T Q x / 2 + <q, x> + c` with `Q` symmetric positive semidefinite.
    Quadratic {
        matrix: Vec<Vec<f64>>,
        linear: Vec<f64>,
        #[serde(default)]
        constant: f64,
    },
}

impl ConvexFn {
    fn dim(&self) -> usize {
        match self {
            ConvexFn::WeightedOneNorm { center, .. } => center.len(),
            ConvexFn::Quadratic { linear, .. } => linear.len(),
        }
    }

    fn validate(&self) -> Result<(), EquilibriumError> {
        match self {
            ConvexFn::WeightedOneNorm { center, weights } => {
                if center.len() != weights.len() {
                    return Err(DimensionError::Mismatch {
                        expected: center.len(),
                        found: weights.len(),
                    }
                    .into());
                }
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return Err(invalid("weights must be finite and nonnegative"));
                }
                finite("center", center)
            }
            ConvexFn::Quadratic {
                matrix,
                linear,
                constant,
            } => {
                let q = square_matrix(matrix, linear.len())?;
                finite("linear term", linear)?;
                if !constant.is_finite() {
                    return Err(invalid("constant is not finite"));
                }
                if (&q - q.transpose()).amax() > 1e-12 * (1.0 + q.amax()) {
                    return Err(invalid("quadratic matrix must be symmetric"));
                }
                if !is_psd(&q) {
                    return Err(invalid("quadratic matrix is not positive semidefinite"));
                }
                Ok(())
            }
        }
    }

    pub fn value(&self, x: &Vector) -> f64 {
        match self {
            ConvexFn::WeightedOneNorm { center, weights } => x
                .as_slice()
                .iter()
                .zip(center.iter().zip(weights))
                .map(|(xi, (zi, wi))| wi * (xi - zi).abs())
                .sum(),
            ConvexFn::Quadratic {
                matrix,
                linear,
                constant,
            } => {
                let xs = x.as_slice();
                let quad: f64 = matrix
                    .iter()
                    .zip(xs)
                    .map(|(row, xi)| xi * dot(row, xs))
                    .sum();
                0.5 * quad + dot(linear, xs) + constant
            }
        }
    }

    /// A subgradient of `h` at `x`; zero on the kinks of the weighted one-norm.
    pub fn subgradient(&self, x: &Vector) -> Vector {
        match self {
            ConvexFn::WeightedOneNorm { center, weights } => Vector::from_raw(
                x.as_slice()
                    .iter()
                    .zip(center.iter().zip(weights))
                    .map(|(xi, (zi, wi))| {
                        let d = xi - zi;
                        if d > 0.0 {
                            *wi
                        } else if d < 0.0 {
                            -wi
                        } else {
                            0.0
                        }
                    })
                    .collect(),
            ),
            ConvexFn::Quadratic { matrix, linear, .. } => Vector::from_raw(
                matrix
                    .iter()
                    .zip(linear)
                    .map(|(row, qi)| dot(row, x.as_slice()) + qi)
                    .collect(),
            ),
        }
    }

    /// Lipschitz constant of `h` on the ball of radius `radius` about the origin.
    fn lipschitz_on_ball(&self, radius: f64) -> f64 {
        match self {
            ConvexFn::WeightedOneNorm { weights, .. } => norm(weights),
            ConvexFn::Quadratic { matrix, linear, .. } => {
                frobenius(matrix) * radius + norm(linear)
            }
        }
    }
}

/// The equilibrium function families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `f = 0`
    Zero,
    /// `f(x, y) = h(y) - h(x)`
    ConvexMinimization { h: ConvexFn },
    /// `f(x, y) = <A x + c, y - x>`
    AffinePaired { matrix: Vec<Vec<f64>>, offset: Vec<f64> },
}

/// Which maximization strategy [`EquilibriumProblem::approx_max`] used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Trivial,
    WeightedOneNormDual,
    ProjectedGradient,
    Grid,
}

/// Tuning for the approximate maximization oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleOptions {
    /// Modulus of uniform continuity `sigma` of `y -> f(y, x)` on the ball:
    /// `|y - y'| <= 1/(sigma(k)+1)` implies `|f(y,x) - f(y',x)| <= 1/(k+1)`.
    /// When absent the grid spacing comes from a Lipschitz bound on the ball.
    pub grid_modulus: Option<Counterfunction>,
    pub max_grid_points: u64,
    /// Always use the grid, even where an exact strategy exists.
    pub force_grid: bool,
    pub max_iterations: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            grid_modulus: None,
            max_grid_points: DEFAULT_MAX_GRID_POINTS,
            force_grid: false,
            max_iterations: 200_000,
        }
    }
}

/// An approximate maximizer of `y -> f(y, x)` over a ball.
#[derive(Clone, Debug, PartialEq)]
pub struct ApproxMax {
    pub y: Vector,
    /// `f(y, x)`
    pub value: f64,
    /// Certified upper bound on `max_{|y'| <= radius} f(y', x) - value`.
    pub gap: f64,
    pub strategy: Strategy,
}

/// An equilibrium function on `R^dim` together with its oracles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProblemSpec", into = "ProblemSpec")]
pub struct EquilibriumProblem {
    dim: usize,
    family: Family,
    oracle: OracleOptions,
    /// For the affine family: whether `y -> f(y, x)` is concave (symmetric part of `A` is PSD).
    concave_in_first: bool,
}

#[derive(Clone, Serialize, Deserialize)]
struct ProblemSpec {
    dim: usize,
    #[serde(flatten)]
    family: Family,
    #[serde(default)]
    oracle: OracleOptions,
}

impl TryFrom<ProblemSpec> for EquilibriumProblem {
    type Error = EquilibriumError;

    fn try_from(spec: ProblemSpec) -> Result<Self, Self::Error> {
        EquilibriumProblem::new(spec.dim, spec.family)
            .map(|p| p.with_oracle_options(spec.oracle))
    }
}

impl From<EquilibriumProblem> for ProblemSpec {
    fn from(p: EquilibriumProblem) -> Self {
        ProblemSpec {
            dim: p.dim,
            family: p.family,
            oracle: p.oracle,
        }
    }
}

fn invalid(msg: impl Into<String>) -> EquilibriumError {
    EquilibriumError::Invalid(msg.into())
}

fn oracle_failure(msg: impl Into<String>) -> EquilibriumError {
    EquilibriumError::OracleFailure(msg.into())
}

fn finite(name: &str, values: &[f64]) -> Result<(), EquilibriumError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(invalid(format!("{name} has non-finite entries")))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn frobenius(m: &[Vec<f64>]) -> f64 {
    m.iter().map(|row| dot(row, row)).sum::<f64>().sqrt()
}

fn square_matrix(rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>, EquilibriumError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(invalid(format!("matrix must be {n}x{n}")));
    }
    for row in rows {
        finite("matrix", row)?;
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn is_psd(sym: &DMatrix<f64>) -> bool {
    let scale = sym.amax().max(1.0);
    sym.clone()
        .symmetric_eigenvalues()
        .iter()
        .all(|&l| l >= -1e-12 * scale)
}

impl EquilibriumProblem {
    pub fn new(dim: usize, family: Family) -> Result<Self, EquilibriumError> {
        if dim == 0 {
            return Err(DimensionError::Empty.into());
        }
        let mut concave_in_first = false;
        match &family {
            Family::Zero => {}
            Family::ConvexMinimization { h } => {
                if h.dim() != dim {
                    return Err(DimensionError::Mismatch {
                        expected: dim,
                        found: h.dim(),
                    }
                    .into());
                }
                h.validate()?;
            }
            Family::AffinePaired { matrix, offset } => {
                if offset.len() != dim {
                    return Err(DimensionError::Mismatch {
                        expected: dim,
                        found: offset.len(),
                    }
                    .into());
                }
                finite("offset", offset)?;
                let a = square_matrix(matrix, dim)?;
                let sym = (&a + a.transpose()) * 0.5;
                concave_in_first = is_psd(&sym);
            }
        }
        Ok(Self {
            dim,
            family,
            oracle: OracleOptions::default(),
            concave_in_first,
        })
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, Family::Zero).expect("zero family is always valid")
    }

    pub fn convex_minimization(h: ConvexFn) -> Result<Self, EquilibriumError> {
        Self::new(h.dim(), Family::ConvexMinimization { h })
    }

    pub fn affine_paired(
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
    ) -> Result<Self, EquilibriumError> {
        Self::new(offset.len(), Family::AffinePaired { matrix, offset })
    }

    pub fn with_oracle_options(mut self, oracle: OracleOptions) -> Self {
        self.oracle = oracle;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn oracle_options(&self) -> &OracleOptions {
        &self.oracle
    }

    fn check(&self, v: &Vector) -> Result<(), EquilibriumError> {
        v.ensure_dim(self.dim).map_err(Into::into)
    }

    /// `f(x, y)`
    pub fn eval(&self, x: &Vector, y: &Vector) -> Result<f64, EquilibriumError> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.eval_unchecked(x, y))
    }

    pub(crate) fn eval_unchecked(&self, x: &Vector, y: &Vector) -> f64 {
        match &self.family {
            Family::Zero => 0.0,
            Family::ConvexMinimization { h } => h.value(y) - h.value(x),
            Family::AffinePaired { matrix, offset } => {
                let xs = x.as_slice();
                matrix
                    .iter()
                    .zip(offset)
                    .zip(y.as_slice().iter().zip(xs))
                    .map(|((row, c), (yi, xi))| (dot(row, xs) + c) * (yi - xi))
                    .sum()
            }
        }
    }

    /// An element of the subdifferential of `x -> f(y_fixed, x)` at `x`.
    pub fn subgradient(&self, y_fixed: &Vector, x: &Vector) -> Result<Vector, EquilibriumError> {
        self.check(y_fixed)?;
        self.check(x)?;
        Ok(match &self.family {
            Family::Zero => Vector::zeros(self.dim),
            Family::ConvexMinimization { h } => h.subgradient(x),
            Family::AffinePaired { matrix, offset } => Vector::from_raw(
                matrix
                    .iter()
                    .zip(offset)
                    .map(|(row, c)| dot(row, y_fixed.as_slice()) + c)
                    .collect(),
            ),
        })
    }

    /// Lipschitz constant of `y -> f(y, x)` on the ball of radius `radius`.
    pub fn lipschitz_in_first(&self, x: &Vector, radius: f64) -> f64 {
        match &self.family {
            Family::Zero => 0.0,
            Family::ConvexMinimization { h } => h.lipschitz_on_ball(radius),
            Family::AffinePaired { matrix, offset } => {
                // gradient A^T (x - y) - (A y + c)
                let a = frobenius(matrix);
                a * (x.norm() + radius) + a * radius + norm(offset)
            }
        }
    }

    /// Finds `y` with `|y| <= radius`, `f(y, x) >= 0` and
    /// `max_{|y'| <= radius} f(y', x) <= f(y, x) + eps`.
    ///
    /// Exact strategies certify their gap in floating point and accept a
    /// relative slack of `1e-12` on top of `eps`; the grid strategy needs
    /// `eps > 0`.
    pub fn approx_max(
        &self,
        x: &Vector,
        radius: f64,
        eps: f64,
    ) -> Result<ApproxMax, EquilibriumError> {
        self.check(x)?;
        if !(radius.is_finite() && radius > 0.0) {
            return Err(invalid(format!("radius must be positive, got {radius}")));
        }
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(invalid(format!("eps must be nonnegative, got {eps}")));
        }
        if let Family::Zero = self.family {
            let y = if x.norm() <= radius {
                x.clone()
            } else {
                x.scale(radius / x.norm())
            };
            return Ok(ApproxMax {
                y,
                value: 0.0,
                gap: 0.0,
                strategy: Strategy::Trivial,
            });
        }
        if x.norm() > radius {
            return Err(oracle_failure(format!(
                "point of norm {} lies outside the ball of radius {radius}",
                x.norm()
            )));
        }
        let candidate = if self.oracle.force_grid {
            self.grid_max(x, radius, eps)?
        } else {
            match &self.family {
                Family::Zero => unreachable!(),
                Family::ConvexMinimization { h } => self.minimize_convex(h, x, radius, eps)?,
                Family::AffinePaired { matrix, offset } if self.concave_in_first => {
                    self.maximize_concave_affine(matrix, offset, x, radius, eps)?
                }
                Family::AffinePaired { .. } => self.grid_max(x, radius, eps)?,
            }
        };
        // x itself lies in the ball and has f(x, x) = 0
        if candidate.value < 0.0 {
            return Ok(ApproxMax {
                y: x.clone(),
                value: 0.0,
                gap: candidate.gap,
                strategy: candidate.strategy,
            });
        }
        Ok(candidate)
    }

    fn accept(&self, gap: f64, eps: f64, scale: f64, what: &str) -> Result<(), EquilibriumError> {
        let slack = 1e-12 * (1.0 + scale.abs());
        if gap <= eps + slack {
            Ok(())
        } else {
            Err(oracle_failure(format!(
                "{what} could not certify gap {gap:e} within eps {eps:e}"
            )))
        }
    }

    fn minimize_convex(
        &self,
        h: &ConvexFn,
        x: &Vector,
        radius: f64,
        eps: f64,
    ) -> Result<ApproxMax, EquilibriumError> {
        let hx = h.value(x);
        let (y, gap, strategy) = match h {
            ConvexFn::WeightedOneNorm { center, weights } => {
                let (y, gap) = min_weighted_one_norm(center, weights, radius, eps, &self.oracle);
                (y, gap, Strategy::WeightedOneNormDual)
            }
            ConvexFn::Quadratic { matrix, linear, .. } => {
                let q = DMatrix::from_fn(self.dim, self.dim, |i, j| matrix[i][j]);
                let lin = DVector::from_column_slice(linear);
                let (y, gap) = min_quadratic_on_ball(&q, &lin, radius, eps, &self.oracle);
                (y, gap, Strategy::ProjectedGradient)
            }
        };
        let hy = h.value(&y);
        self.accept(gap, eps, hx.abs() + hy.abs(), "convex minimization oracle")?;
        Ok(ApproxMax {
            value: hx - hy,
            y,
            gap,
            strategy,
        })
    }

    fn maximize_concave_affine(
        &self,
        matrix: &[Vec<f64>],
        offset: &[f64],
        x: &Vector,
        radius: f64,
        eps: f64,
    ) -> Result<ApproxMax, EquilibriumError> {
        // f(y, x) = -y^T A_s y + <A^T x - c, y> + <c, x>; minimize the negation
        let a = DMatrix::from_fn(self.dim, self.dim, |i, j| matrix[i][j]);
        let q = &a + a.transpose();
        let xv = DVector::from_column_slice(x.as_slice());
        let c = DVector::from_column_slice(offset);
        let lin = -(a.transpose() * &xv - &c);
        let (y, gap) = min_quadratic_on_ball(&q, &lin, radius, eps, &self.oracle);
        let value = self.eval_unchecked(&y, x);
        self.accept(gap, eps, value, "concave maximization oracle")?;
        Ok(ApproxMax {
            y,
            value,
            gap,
            strategy: Strategy::ProjectedGradient,
        })
    }

    /// Uniform grid over the cube `[-radius, radius]^N`, each node projected onto
    /// the ball. Projection is nonexpansive, so the projected nodes cover the
    /// ball with the same covering radius as the cube grid.
    fn grid_max(&self, x: &Vector, radius: f64, eps: f64) -> Result<ApproxMax, EquilibriumError> {
        let n = self.dim;
        if n > MAX_GRID_DIM {
            return Err(oracle_failure(format!(
                "grid strategy supports dimension at most {MAX_GRID_DIM}, got {n}"
            )));
        }
        if eps <= 0.0 {
            return Err(oracle_failure("grid strategy needs eps > 0"));
        }
        // covering radius delta guaranteeing |f(y,x) - f(y',x)| <= eps
        let (delta, gap) = match &self.oracle.grid_modulus {
            Some(sigma) => {
                let k = ((1.0 / eps).ceil() as u64).saturating_sub(1).max(0);
                let k = if 1.0 / ((k + 1) as f64) > eps { k + 1 } else { k };
                let s = sigma
                    .eval_u64(k)
                    .to_f64()
                    .ok_or_else(|| oracle_failure("modulus value too large"))?;
                (1.0 / (s + 1.0), 1.0 / ((k + 1) as f64))
            }
            None => {
                let lip = self.lipschitz_in_first(x, radius);
                if lip == 0.0 {
                    (f64::INFINITY, 0.0)
                } else {
                    (eps / lip, eps)
                }
            }
        };
        let spacing = 2.0 * delta / (n as f64).sqrt();
        let per_axis = if spacing.is_infinite() {
            1
        } else {
            let m = (2.0 * radius / spacing).ceil() + 1.0;
            if !m.is_finite() || m > self.oracle.max_grid_points as f64 {
                return Err(oracle_failure("grid would exceed the point budget"));
            }
            m as u64
        };
        let total = (per_axis as f64).powi(n as i32);
        if total > self.oracle.max_grid_points as f64 {
            return Err(oracle_failure(format!(
                "grid needs {total:e} points, over the budget of {}",
                self.oracle.max_grid_points
            )));
        }
        let step = if per_axis > 1 {
            2.0 * radius / (per_axis - 1) as f64
        } else {
            0.0
        };
        let coord = |i: u64| {
            if per_axis == 1 {
                0.0
            } else {
                -radius + i as f64 * step
            }
        };
        let mut index = vec![0u64; n];
        let mut best: Option<(Vector, f64)> = None;
        loop {
            let raw = Vector::from_raw(index.iter().map(|&i| coord(i)).collect());
            let node = if raw.norm() > radius {
                raw.scale(radius / raw.norm())
            } else {
                raw
            };
            let value = self.eval_unchecked(&node, x);
            let better = match &best {
                None => true,
                Some((bp, bv)) => value > *bv || (value == *bv && lex_less(&node, bp)),
            };
            if better {
                best = Some((node, value));
            }
            // odometer increment, last coordinate fastest
            let mut d = n;
            loop {
                if d == 0 {
                    let (y, value) = best.expect("grid is nonempty");
                    return Ok(ApproxMax {
                        y,
                        value,
                        gap,
                        strategy: Strategy::Grid,
                    });
                }
                d -= 1;
                index[d] += 1;
                if index[d] < per_axis {
                    break;
                }
                index[d] = 0;
            }
        }
    }

    /// Samples the three defining properties of an equilibrium function.
    pub fn validate_axioms(&self, samples: &[AxiomSample], tol: f64) -> AxiomReport {
        validate_axioms(|x, y| self.eval_unchecked(x, y), samples, tol)
    }
}

fn lex_less(a: &Vector, b: &Vector) -> bool {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .find(|(x, y)| x != y)
        .is_some_and(|(x, y)| x < y)
}

/// Minimizes `sum w_i |y_i - z_i|` over `|y| <= radius`.
///
/// For a multiplier `mu > 0` the Lagrangian minimizer is the coordinatewise
/// clamp `y_i(mu) = clamp(z_i, -w_i/mu, w_i/mu)`, whose norm decreases in `mu`.
/// Bisection on `mu` gives a feasible point; the Lagrangian value is a lower
/// bound on the minimum, which certifies the gap.
fn min_weighted_one_norm(
    center: &[f64],
    weights: &[f64],
    radius: f64,
    eps: f64,
    opts: &OracleOptions,
) -> (Vector, f64) {
    let z = Vector::from_raw(center.to_vec());
    if z.norm() <= radius {
        return (z, 0.0);
    }
    let h = |y: &Vector| -> f64 {
        y.as_slice()
            .iter()
            .zip(center.iter().zip(weights))
            .map(|(yi, (zi, wi))| wi * (yi - zi).abs())
            .sum()
    };
    let clamp_at = |mu: f64| -> Vector {
        Vector::from_raw(
            center
                .iter()
                .zip(weights)
                .map(|(zi, wi)| {
                    let t = wi / mu;
                    zi.clamp(-t, t)
                })
                .collect(),
        )
    };
    let lagrangian = |mu: f64, y: &Vector| h(y) + 0.5 * mu * (y.norm_sq() - radius * radius);

    let mut hi = 1.0;
    while clamp_at(hi).norm() > radius {
        hi *= 2.0;
    }
    let mut lo = hi / 2.0;
    while lo > f64::MIN_POSITIVE && clamp_at(lo).norm() <= radius {
        lo /= 2.0;
    }
    let projected = z.scale(radius / z.norm());
    let mut best_primal = {
        let y = clamp_at(hi);
        if h(&y) <= h(&projected) {
            y
        } else {
            projected.clone()
        }
    };
    let mut lower = lagrangian(lo, &clamp_at(lo)).max(lagrangian(hi, &clamp_at(hi)));
    for _ in 0..opts.max_iterations.min(2_000) {
        let gap = h(&best_primal) - lower;
        if gap <= eps * 0.5 || hi - lo <= hi * f64::EPSILON {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let y = clamp_at(mid);
        lower = lower.max(lagrangian(mid, &y));
        if y.norm() > radius {
            lo = mid;
        } else {
            hi = mid;
            if h(&y) < h(&best_primal) {
                best_primal = y;
            }
        }
    }
    let gap = (h(&best_primal) - lower).max(0.0);
    (best_primal, gap)
}

/// Minimizes `y^T Q y / 2 + <q, y>` (Q PSD) over `|y| <= radius`.
///
/// Returns the point and its Frank-Wolfe gap
/// `<grad, y> + radius |grad| >= h(y) - min h`.
fn min_quadratic_on_ball(
    q: &DMatrix<f64>,
    lin: &DVector<f64>,
    radius: f64,
    eps: f64,
    opts: &OracleOptions,
) -> (Vector, f64) {
    let grad = |y: &DVector<f64>| q * y + lin;
    let fw_gap = |y: &DVector<f64>| {
        let g = grad(y);
        (g.dot(y) + radius * g.norm()).max(0.0)
    };
    let project = |y: DVector<f64>| {
        let n = y.norm();
        if n > radius {
            y * (radius / n)
        } else {
            y
        }
    };
    let to_vector = |y: &DVector<f64>| Vector::from_raw(y.as_slice().to_vec());

    // interior unconstrained minimizer, when Q is invertible
    if let Some(chol) = q.clone().cholesky() {
        let y = chol.solve(&(-lin));
        if y.norm() <= radius {
            let gap = fw_gap(&y);
            return (to_vector(&y), gap);
        }
    }
    let lip = q.norm();
    if lip == 0.0 {
        let n = lin.norm();
        let y = if n == 0.0 {
            DVector::zeros(lin.len())
        } else {
            lin * (-radius / n)
        };
        let gap = fw_gap(&y);
        return (to_vector(&y), gap);
    }
    // accelerated projected gradient with adaptive restart
    let step = 1.0 / lip;
    let mut y = project(-lin * step);
    let mut z = y.clone();
    let mut t = 1.0f64;
    let mut best = y.clone();
    let mut best_gap = fw_gap(&y);
    for it in 0..opts.max_iterations {
        if best_gap <= eps * 0.5 {
            break;
        }
        let next = project(&z - grad(&z) * step);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = (t - 1.0) / t_next;
        if (&next - &y).dot(&(&z - &next)) > 0.0 {
            // restart
            z = next.clone();
            t = 1.0;
        } else {
            z = &next + (&next - &y) * momentum;
            t = t_next;
        }
        y = next;
        if it % 8 == 0 {
            let g = fw_gap(&y);
            if g < best_gap {
                best_gap = g;
                best = y.clone();
            }
        }
    }
    let g = fw_gap(&y);
    if g < best_gap {
        best_gap = g;
        best = y;
    }
    (to_vector(&best), best_gap)
}

/// A sample `(x, y1, y2)` for [`validate_axioms`].
#[derive(Clone, Debug)]
pub struct AxiomSample {
    pub x: Vector,
    pub y1: Vector,
    pub y2: Vector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AxiomReport {
    /// Largest `|f(x, x)|`.
    pub diagonal: f64,
    /// Largest `f(x, (y1+y2)/2) - (f(x,y1) + f(x,y2))/2`.
    pub convexity: f64,
    /// Largest relative jump `|f(x', y) - f(x, y)| / (1 + |f(x, y)|)` for `|x' - x| = 1e-8`.
    pub continuity: f64,
    pub diagonal_ok: bool,
    pub convexity_ok: bool,
    pub continuity_ok: bool,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.diagonal_ok && self.convexity_ok && self.continuity_ok
    }
}

const CONTINUITY_STEP: f64 = 1e-8;
const CONTINUITY_TOL: f64 = 1e-5;

/// Worst violations of `f(x,x) = 0`, midpoint convexity in `y`, and a
/// perturbation proxy for continuity in `x`, for any evaluator.
pub fn validate_axioms(
    f: impl Fn(&Vector, &Vector) -> f64,
    samples: &[AxiomSample],
    tol: f64,
) -> AxiomReport {
    let mut diagonal: f64 = 0.0;
    let mut convexity = f64::NEG_INFINITY;
    let mut continuity: f64 = 0.0;
    for s in samples {
        diagonal = diagonal.max(f(&s.x, &s.x).abs());
        let mid = s.y1.zip_map(&s.y2, |a, b| 0.5 * (a + b));
        convexity = convexity.max(f(&s.x, &mid) - 0.5 * (f(&s.x, &s.y1) + f(&s.x, &s.y2)));
        let dir = &s.y2 - &s.y1;
        let dn = dir.norm();
        let shift = if dn > 0.0 {
            dir.scale(CONTINUITY_STEP / dn)
        } else {
            Vector::from_raw(vec![CONTINUITY_STEP; s.x.dim()]).scale(1.0 / (s.x.dim() as f64).sqrt())
        };
        let xp = &s.x + &shift;
        let base = f(&s.x, &s.y1);
        continuity = continuity.max((f(&xp, &s.y1) - base).abs() / (1.0 + base.abs()));
    }
    let convexity = if samples.is_empty() { 0.0 } else { convexity };
    AxiomReport {
        diagonal,
        convexity,
        continuity,
        diagonal_ok: diagonal <= tol,
        convexity_ok: convexity <= tol,
        continuity_ok: continuity <= CONTINUITY_TOL,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: f64) -> Vector {
        Vector::scalar(v)
    }

    fn abs_problem() -> EquilibriumProblem {
        EquilibriumProblem::convex_minimization(ConvexFn::WeightedOneNorm {
            center: vec![0.0],
            weights: vec![1.0],
        })
        .unwrap()
    }

    fn identity_paired() -> EquilibriumProblem {
        EquilibriumProblem::affine_paired(vec![vec![1.0]], vec![0.0]).unwrap()
    }

    #[test]
    fn eval_examples() {
        let zero = EquilibriumProblem::zero(2);
        let x = Vector::new(vec![1.0, 2.0]).unwrap();
        let y = Vector::new(vec![-3.0, 0.5]).unwrap();
        assert_eq!(zero.eval(&x, &y).unwrap(), 0.0);
        assert_eq!(abs_problem().eval(&s(2.0), &s(0.0)).unwrap(), -2.0);
        assert_eq!(identity_paired().eval(&s(1.0), &s(3.0)).unwrap(), 2.0);
    }

    #[test]
    fn eval_rejects_dimension_mismatch() {
        let err = abs_problem().eval(&s(1.0), &Vector::zeros(2)).unwrap_err();
        assert!(matches!(err, EquilibriumError::Dimension(_)));
    }

    #[test]
    fn subgradient_examples() {
        let zero = EquilibriumProblem::zero(3);
        assert_eq!(
            zero.subgradient(&Vector::zeros(3), &Vector::zeros(3)).unwrap(),
            Vector::zeros(3)
        );
        assert_eq!(abs_problem().subgradient(&s(0.0), &s(2.0)).unwrap(), s(1.0));
        // kink selection
        assert_eq!(abs_problem().subgradient(&s(0.0), &s(0.0)).unwrap(), s(0.0));
        assert_eq!(identity_paired().subgradient(&s(5.0), &s(-7.0)).unwrap(), s(5.0));
    }

    #[test]
    fn approx_max_abs_exact_with_zero_eps() {
        let r = abs_problem().approx_max(&s(1.0), 2.0, 0.0).unwrap();
        assert_eq!(r.y, s(0.0));
        assert_eq!(r.value, 1.0);
        assert_eq!(r.gap, 0.0);
    }

    #[test]
    fn approx_max_zero_returns_x() {
        let x = Vector::new(vec![0.3, -0.2]).unwrap();
        let r = EquilibriumProblem::zero(2).approx_max(&x, 1.0, 0.0).unwrap();
        assert_eq!(r.y, x);
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn approx_max_identity_paired_grid() {
        // y(1-y) on [-2, 2]: max 1/4 at y = 1/2; A = 1 is PSD so force the grid
        let p = identity_paired().with_oracle_options(OracleOptions {
            force_grid: true,
            ..OracleOptions::default()
        });
        let r = p.approx_max(&s(1.0), 2.0, 1e-3).unwrap();
        assert_eq!(r.strategy, Strategy::Grid);
        assert!((r.y[0] - 0.5).abs() < 1e-2, "{:?}", r.y);
        assert!(0.25 - r.value <= 1e-3 && r.value <= 0.25);
        // exact strategy on the same instance
        let r = identity_paired().approx_max(&s(1.0), 2.0, 1e-9).unwrap();
        assert_eq!(r.strategy, Strategy::ProjectedGradient);
        assert!((r.value - 0.25).abs() < 1e-12);
    }

    #[test]
    fn grid_with_user_modulus() {
        // y(1-y) has |d/dy| <= 5 on [-2, 2], so sigma(k) = 5(k+1) is a modulus
        let p = identity_paired().with_oracle_options(OracleOptions {
            force_grid: true,
            grid_modulus: Some(Counterfunction::affine(5u32, 5u32)),
            ..OracleOptions::default()
        });
        let r = p.approx_max(&s(1.0), 2.0, 1e-3).unwrap();
        assert!(0.25 - r.value <= 1e-3);
    }

    #[test]
    fn grid_refuses_zero_eps_and_high_dimension() {
        let p = identity_paired().with_oracle_options(OracleOptions {
            force_grid: true,
            ..OracleOptions::default()
        });
        assert!(matches!(
            p.approx_max(&s(1.0), 2.0, 0.0),
            Err(EquilibriumError::OracleFailure(_))
        ));
        let m: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 0.0 } else if i < j { 1.0 } else { -1.0 }).collect())
            .collect();
        // skew-symmetric A: f(., x) is affine, not handled by the concave route
        let mut a = m.clone();
        a[0][0] = -1.0;
        let p = EquilibriumProblem::affine_paired(a, vec![0.0; 4]).unwrap();
        assert!(matches!(
            p.approx_max(&Vector::zeros(4), 1.0, 0.1),
            Err(EquilibriumError::OracleFailure(_))
        ));
    }

    #[test]
    fn approx_max_rejects_points_outside_ball() {
        assert!(matches!(
            abs_problem().approx_max(&s(3.0), 2.0, 0.1),
            Err(EquilibriumError::OracleFailure(_))
        ));
    }

    #[test]
    fn weighted_one_norm_center_outside_ball() {
        // minimize |y1 - 3| + 2|y2 - 4| over the unit disc
        let h = ConvexFn::WeightedOneNorm {
            center: vec![3.0, 4.0],
            weights: vec![1.0, 2.0],
        };
        let p = EquilibriumProblem::convex_minimization(h.clone()).unwrap();
        let x = Vector::zeros(2);
        let r = p.approx_max(&x, 1.0, 1e-9).unwrap();
        assert!(r.y.norm() <= 1.0 + 1e-15);
        // brute force over the unit circle (the minimizer is on the boundary)
        let brute = (0..200_000)
            .map(|i| {
                let t = i as f64 / 200_000.0 * std::f64::consts::TAU;
                h.value(&Vector::new(vec![t.cos(), t.sin()]).unwrap())
            })
            .fold(f64::INFINITY, f64::min);
        let hx = h.value(&x);
        assert!((hx - r.value) - brute <= 1e-9);
        assert!(brute - (hx - r.value) <= 1e-6);
    }

    #[test]
    fn quadratic_on_ball_boundary() {
        // h(y) = |y - (2, 0)|^2 / 2 on the unit disc: minimizer (1, 0)
        let h = ConvexFn::Quadratic {
            matrix: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            linear: vec![-2.0, 0.0],
            constant: 2.0,
        };
        let p = EquilibriumProblem::convex_minimization(h).unwrap();
        let r = p.approx_max(&Vector::zeros(2), 1.0, 1e-10).unwrap();
        assert!((r.y[0] - 1.0).abs() < 1e-6 && r.y[1].abs() < 1e-6);
        assert!(r.gap <= 1e-10);
    }

    #[test]
    fn quadratic_must_be_psd_and_symmetric() {
        let bad = ConvexFn::Quadratic {
            matrix: vec![vec![1.0, 0.0], vec![0.0, -1.0]],
            linear: vec![0.0, 0.0],
            constant: 0.0,
        };
        assert!(EquilibriumProblem::convex_minimization(bad).is_err());
        let asym = ConvexFn::Quadratic {
            matrix: vec![vec![1.0, 1.0], vec![0.0, 1.0]],
            linear: vec![0.0, 0.0],
            constant: 0.0,
        };
        assert!(EquilibriumProblem::convex_minimization(asym).is_err());
    }

    fn samples() -> Vec<AxiomSample> {
        let pts = [-2.0, -0.5, 0.0, 0.7, 1.9];
        let mut out = Vec::new();
        for &a in &pts {
            for &b in &pts {
                for &c in &pts {
                    out.push(AxiomSample {
                        x: s(a),
                        y1: s(b),
                        y2: s(c),
                    });
                }
            }
        }
        out
    }

    #[test]
    fn axioms_hold_for_shipped_families() {
        let zero = EquilibriumProblem::zero(1).validate_axioms(&samples(), 0.0);
        assert!(zero.passed());
        assert_eq!(zero.diagonal, 0.0);
        let quad = EquilibriumProblem::convex_minimization(ConvexFn::Quadratic {
            matrix: vec![vec![1.0]],
            linear: vec![0.0],
            constant: 0.0,
        })
        .unwrap();
        assert!(quad.validate_axioms(&samples(), 1e-10).passed());
        assert!(identity_paired().validate_axioms(&samples(), 1e-10).passed());
    }

    #[test]
    fn corrupted_diagonal_is_detected() {
        let report = validate_axioms(|_, _| 1.0, &samples(), 1e-10);
        assert!(!report.diagonal_ok);
        assert!(report.convexity_ok);
    }

    #[test]
    fn serde_round_trip_shape() {
        let p = abs_problem();
        let spec = ProblemSpec::from(p.clone());
        let back = EquilibriumProblem::try_from(spec).unwrap();
        assert_eq!(back, p);
    }
}
