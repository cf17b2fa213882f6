//! Firmly nonexpansive mappings on `R^N`.
//!
//! Only the variants of [`FirmOp`] can be constructed, and each one is firmly
//! nonexpansive by construction: metric projections onto closed convex sets,
//! the identity, and half-averages `(I + S) / 2` of nonexpansive maps `S`.
//! [`check_firm`] samples the defining inequality
//! `|Tx - Ty|^2 <= <x - y, Tx - Ty>` for any mapping, including ones that are
//! not firm.

use serde::{Deserialize, Serialize};

use crate::error::{DimensionError, OperatorError};
use crate::vector::Vector;

const ORTHO_TOL: f64 = 1e-10;

/// A firmly nonexpansive mapping with nonempty fixed point set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", try_from = "FirmOpSpec")]
pub enum FirmOp {
    Identity,
    /// Projection onto `{x : lower <= x <= upper}` (coordinatewise).
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Projection onto the closed ball `B(center, radius)`.
    Ball { center: Vec<f64>, radius: f64 },
    /// Projection onto `{x : <normal, x> <= offset}`.
    Halfspace { normal: Vec<f64>, offset: f64 },
    /// Projection onto `anchor + span(directions)`; `directions` is orthonormal.
    Affine {
        anchor: Vec<f64>,
        directions: Vec<Vec<f64>>,
    },
    /// `(x + S x) / 2` for a nonexpansive `S`.
    HalfAveraged { inner: NonexpansiveMap },
}

/// Nonexpansive maps accepted inside [`FirmOp::HalfAveraged`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NonexpansiveMap {
    /// The reflection `2 P - I` of a firm map `P`; its fixed points are those of `P`.
    Reflection { of: Box<FirmOp> },
    /// `x -> A x` with spectral norm of `A` at most one (rows of `A`).
    Linear { matrix: Vec<Vec<f64>> },
}

/// Unvalidated wire form of [`FirmOp`], converted through the checked constructors.
#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum FirmOpSpec {
    Identity,
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Halfspace { normal: Vec<f64>, offset: f64 },
    Affine {
        anchor: Vec<f64>,
        directions: Vec<Vec<f64>>,
    },
    HalfAveraged { inner: NonexpansiveMap },
}

impl TryFrom<FirmOpSpec> for FirmOp {
    type Error = OperatorError;

    fn try_from(spec: FirmOpSpec) -> Result<Self, Self::Error> {
        match spec {
            FirmOpSpec::Identity => Ok(FirmOp::Identity),
            FirmOpSpec::Box { lower, upper } => FirmOp::box_projection(lower, upper),
            FirmOpSpec::Ball { center, radius } => FirmOp::ball_projection(center, radius),
            FirmOpSpec::Halfspace { normal, offset } => {
                FirmOp::halfspace_projection(normal, offset)
            }
            FirmOpSpec::Affine { anchor, directions } => {
                FirmOp::affine_projection(anchor, directions)
            }
            FirmOpSpec::HalfAveraged { inner } => FirmOp::half_averaged(inner),
        }
    }
}

fn check_finite(name: &str, values: &[f64]) -> Result<(), OperatorError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(OperatorError::Invalid(format!("{name} has non-finite entries")))
    }
}

fn check_nonempty(name: &str, values: &[f64]) -> Result<(), OperatorError> {
    if values.is_empty() {
        Err(OperatorError::Invalid(format!("{name} is empty")))
    } else {
        check_finite(name, values)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl FirmOp {
    pub fn box_projection(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, OperatorError> {
        check_nonempty("box lower bound", &lower)?;
        check_nonempty("box upper bound", &upper)?;
        if lower.len() != upper.len() {
            return Err(DimensionError::Mismatch {
                expected: lower.len(),
                found: upper.len(),
            }
            .into());
        }
        if let Some(i) = lower.iter().zip(&upper).position(|(l, u)| l > u) {
            return Err(OperatorError::Invalid(format!(
                "box is empty in coordinate {i}"
            )));
        }
        Ok(FirmOp::Box { lower, upper })
    }

    pub fn ball_projection(center: Vec<f64>, radius: f64) -> Result<Self, OperatorError> {
        check_nonempty("ball center", &center)?;
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(OperatorError::Invalid(format!(
                "ball radius must be finite and nonnegative, got {radius}"
            )));
        }
        Ok(FirmOp::Ball { center, radius })
    }

    pub fn halfspace_projection(normal: Vec<f64>, offset: f64) -> Result<Self, OperatorError> {
        check_nonempty("halfspace normal", &normal)?;
        if !offset.is_finite() {
            return Err(OperatorError::Invalid("halfspace offset is not finite".into()));
        }
        if dot(&normal, &normal) == 0.0 {
            return Err(OperatorError::Invalid("halfspace normal is zero".into()));
        }
        Ok(FirmOp::Halfspace { normal, offset })
    }

    /// Orthonormalizes `directions` (modified Gram-Schmidt) and rejects dependent sets.
    pub fn affine_projection(
        anchor: Vec<f64>,
        directions: Vec<Vec<f64>>,
    ) -> Result<Self, OperatorError> {
        check_nonempty("affine anchor", &anchor)?;
        let n = anchor.len();
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(directions.len());
        for (i, d) in directions.into_iter().enumerate() {
            check_finite("affine direction", &d)?;
            if d.len() != n {
                return Err(DimensionError::Mismatch {
                    expected: n,
                    found: d.len(),
                }
                .into());
            }
            let scale = dot(&d, &d).sqrt();
            let mut v = d;
            for b in &basis {
                let c = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(vi, bi)| *vi -= c * bi);
            }
            let norm = dot(&v, &v).sqrt();
            if norm <= ORTHO_TOL * scale.max(1.0) {
                return Err(OperatorError::Invalid(format!(
                    "affine direction {i} is linearly dependent on the previous ones"
                )));
            }
            v.iter_mut().for_each(|vi| *vi /= norm);
            basis.push(v);
        }
        Ok(FirmOp::Affine {
            anchor,
            directions: basis,
        })
    }

    pub fn half_averaged(inner: NonexpansiveMap) -> Result<Self, OperatorError> {
        inner.validate()?;
        Ok(FirmOp::HalfAveraged { inner })
    }

    /// Dimension the operator is defined on; `None` for dimension-free maps.
    pub fn dim(&self) -> Option<usize> {
        match self {
            FirmOp::Identity => None,
            FirmOp::Box { lower, .. } => Some(lower.len()),
            FirmOp::Ball { center, .. } => Some(center.len()),
            FirmOp::Halfspace { normal, .. } => Some(normal.len()),
            FirmOp::Affine { anchor, .. } => Some(anchor.len()),
            FirmOp::HalfAveraged { inner } => inner.dim(),
        }
    }

    pub fn apply(&self, x: &Vector) -> Result<Vector, OperatorError> {
        if let Some(n) = self.dim() {
            x.ensure_dim(n)?;
        }
        Ok(self.apply_unchecked(x))
    }

    fn apply_unchecked(&self, x: &Vector) -> Vector {
        match self {
            FirmOp::Identity => x.clone(),
            FirmOp::Box { lower, upper } => Vector::from_raw(
                x.as_slice()
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .map(|(&xi, (&l, &u))| xi.clamp(l, u))
                    .collect(),
            ),
            FirmOp::Ball { center, radius } => {
                let c = Vector::from_raw(center.clone());
                let d = x - &c;
                let norm = d.norm();
                if norm <= *radius {
                    x.clone()
                } else {
                    c.axpy(radius / norm, &d)
                }
            }
            FirmOp::Halfspace { normal, offset } => {
                let a = Vector::from_raw(normal.clone());
                let excess = a.dot(x) - offset;
                if excess <= 0.0 {
                    x.clone()
                } else {
                    x.axpy(-excess / a.norm_sq(), &a)
                }
            }
            FirmOp::Affine { anchor, directions } => {
                let anchor = Vector::from_raw(anchor.clone());
                let d = x - &anchor;
                let mut out = anchor;
                for b in directions {
                    let b = Vector::from_raw(b.clone());
                    out = out.axpy(d.dot(&b), &b);
                }
                out
            }
            FirmOp::HalfAveraged { inner } => {
                let s = inner.apply_unchecked(x);
                x.zip_map(&s, |a, b| 0.5 * (a + b))
            }
        }
    }

    /// A point of `Fix(T)` known in closed form.
    pub fn known_fixed_point(&self, dim: usize) -> Vector {
        match self {
            FirmOp::Identity => Vector::zeros(dim),
            FirmOp::Box { lower, upper } => Vector::from_raw(
                lower
                    .iter()
                    .zip(upper)
                    .map(|(l, u)| 0.5 * (l + u))
                    .collect(),
            ),
            FirmOp::Ball { center, .. } => Vector::from_raw(center.clone()),
            FirmOp::Halfspace { normal, offset } => {
                // the foot of the origin on the boundary hyperplane, or the origin itself
                let a = Vector::from_raw(normal.clone());
                if *offset >= 0.0 {
                    Vector::zeros(normal.len())
                } else {
                    a.scale(offset / a.norm_sq())
                }
            }
            FirmOp::Affine { anchor, .. } => Vector::from_raw(anchor.clone()),
            FirmOp::HalfAveraged { inner } => inner.known_fixed_point(dim),
        }
    }
}

impl NonexpansiveMap {
    fn validate(&self) -> Result<(), OperatorError> {
        match self {
            NonexpansiveMap::Reflection { .. } => Ok(()),
            NonexpansiveMap::Linear { matrix } => {
                let n = matrix.len();
                if n == 0 {
                    return Err(OperatorError::Invalid("linear map has no rows".into()));
                }
                for row in matrix {
                    check_finite("linear map", row)?;
                    if row.len() != n {
                        return Err(OperatorError::Invalid("linear map must be square".into()));
                    }
                }
                let norm = spectral_norm(matrix);
                if norm > 1.0 + 1e-9 {
                    return Err(OperatorError::Invalid(format!(
                        "linear map has spectral norm {norm} > 1 and is not nonexpansive"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            NonexpansiveMap::Reflection { of } => of.dim(),
            NonexpansiveMap::Linear { matrix } => Some(matrix.len()),
        }
    }

    pub fn apply(&self, x: &Vector) -> Result<Vector, OperatorError> {
        if let Some(n) = self.dim() {
            x.ensure_dim(n)?;
        }
        Ok(self.apply_unchecked(x))
    }

    fn apply_unchecked(&self, x: &Vector) -> Vector {
        match self {
            NonexpansiveMap::Reflection { of } => {
                let p = of.apply_unchecked(x);
                p.zip_map(x, |pi, xi| 2.0 * pi - xi)
            }
            NonexpansiveMap::Linear { matrix } => {
                Vector::from_raw(matrix.iter().map(|row| dot(row, x.as_slice())).collect())
            }
        }
    }

    fn known_fixed_point(&self, dim: usize) -> Vector {
        match self {
            NonexpansiveMap::Reflection { of } => of.known_fixed_point(dim),
            NonexpansiveMap::Linear { matrix } => Vector::zeros(matrix.len()),
        }
    }
}

/// Largest singular value by power iteration on `A^T A`.
fn spectral_norm(matrix: &[Vec<f64>]) -> f64 {
    let n = matrix.len();
    let mut best: f64 = 0.0;
    for start in 0..n.min(4) {
        let mut v: Vec<f64> = (0..n)
            .map(|i| if i == start { 1.0 } else { 0.5 / (1 + i) as f64 })
            .collect();
        let mut estimate = 0.0;
        for _ in 0..500 {
            let av: Vec<f64> = matrix.iter().map(|row| dot(row, &v)).collect();
            let mut atav = vec![0.0; n];
            for (row, a) in matrix.iter().zip(&av) {
                atav.iter_mut().zip(row).for_each(|(t, r)| *t += r * a);
            }
            let norm = dot(&atav, &atav).sqrt();
            if norm == 0.0 {
                break;
            }
            estimate = (norm / dot(&v, &v).sqrt()).sqrt();
            v = atav.into_iter().map(|t| t / norm).collect();
        }
        best = best.max(estimate);
    }
    best
}

/// Anything that maps vectors to vectors; lets [`check_firm`] test arbitrary maps.
pub trait Mapping {
    fn map(&self, x: &Vector) -> Result<Vector, OperatorError>;
}

impl Mapping for FirmOp {
    fn map(&self, x: &Vector) -> Result<Vector, OperatorError> {
        self.apply(x)
    }
}

impl Mapping for NonexpansiveMap {
    fn map(&self, x: &Vector) -> Result<Vector, OperatorError> {
        self.apply(x)
    }
}

impl<F> Mapping for F
where
    F: Fn(&Vector) -> Vector,
{
    fn map(&self, x: &Vector) -> Result<Vector, OperatorError> {
        Ok(self(x))
    }
}

/// Outcome of a sampled inequality check over vector pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct PairReport {
    pub holds: bool,
    /// Largest `lhs - rhs` seen; negative when every pair holds strictly.
    pub worst_violation: f64,
    /// Index of the pair attaining `worst_violation`.
    pub worst_pair: usize,
    pub pairs: usize,
}

fn pair_report(
    samples: &[(Vector, Vector)],
    tol: f64,
    mut gap: impl FnMut(&Vector, &Vector) -> Result<f64, OperatorError>,
) -> Result<PairReport, OperatorError> {
    if samples.is_empty() {
        return Err(OperatorError::Invalid("no sample pairs supplied".into()));
    }
    let mut worst = f64::NEG_INFINITY;
    let mut worst_pair = 0;
    for (i, (x, y)) in samples.iter().enumerate() {
        let g = gap(x, y)?;
        if g > worst || g.is_nan() {
            worst = g;
            worst_pair = i;
        }
    }
    Ok(PairReport {
        holds: worst <= tol,
        worst_violation: worst,
        worst_pair,
        pairs: samples.len(),
    })
}

/// Checks `|Tx - Ty|^2 <= <x - y, Tx - Ty> + tol` on every sampled pair.
pub fn check_firm<M: Mapping + ?Sized>(
    map: &M,
    samples: &[(Vector, Vector)],
    tol: f64,
) -> Result<PairReport, OperatorError> {
    pair_report(samples, tol, |x, y| {
        let tx = map.map(x)?;
        let ty = map.map(y)?;
        let dt = &tx - &ty;
        Ok(dt.norm_sq() - (x - y).dot(&dt))
    })
}

/// Checks `|Sx - Sy| <= |x - y| + tol` on every sampled pair.
pub fn check_nonexpansive<M: Mapping + ?Sized>(
    map: &M,
    samples: &[(Vector, Vector)],
    tol: f64,
) -> Result<PairReport, OperatorError> {
    pair_report(samples, tol, |x, y| {
        let sx = map.map(x)?;
        let sy = map.map(y)?;
        Ok(sx.dist(&sy) - x.dist(y))
    })
}

/// `|x - Tx|`.
pub fn fix_residual(op: &FirmOp, x: &Vector) -> Result<f64, OperatorError> {
    Ok(x.dist(&op.apply(x)?))
}
