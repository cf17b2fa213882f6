//! The approximation sets
//!
//! ```text
//! Omega'_k = { u : |u - Tu| <= 1/(k+1) and f(y_j, u) <= 1/(k+1) for all j <= k }
//! ```
//!
//! relative to a recorded sequence `y_0, ..., y_H`, the function
//! `F(x) = max(|x - Tx|, G(x))` whose zeros are their intersection, and
//! conversions between moduli of regularity.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::counter::Counterfunction;
use crate::equilibrium::EquilibriumProblem;
use crate::error::RegularityError;
use crate::operators::{fix_residual, FirmOp};
use crate::rates::ceil_nat;
use crate::solver::Trajectory;
use crate::vector::Vector;

/// `1/(k+1)` in the arithmetic shared by every membership test.
pub fn threshold(k: usize) -> f64 {
    1.0 / (k as f64 + 1.0)
}

/// The operator, the problem and the recorded `y_0, ..., y_H`.
#[derive(Clone, Debug)]
pub struct OmegaContext {
    pub op: FirmOp,
    pub problem: EquilibriumProblem,
    ys: Vec<Vector>,
}

/// Value of `G(x)` as far as the recorded horizon can tell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GValue {
    pub value: f64,
    /// Smallest recorded `k` in `gamma(x)`, if any.
    pub inf_gamma: Option<usize>,
    /// No `k <= H` lies in `gamma(x)`: reported as 0, though a later `y_j`
    /// could still put some larger `k` into `gamma(x)`.
    pub truncated: bool,
}

impl OmegaContext {
    pub fn new(op: FirmOp, problem: EquilibriumProblem, ys: Vec<Vector>) -> Self {
        Self { op, problem, ys }
    }

    pub fn from_trajectory(op: FirmOp, problem: EquilibriumProblem, traj: &Trajectory) -> Self {
        Self::new(op, problem, traj.ys())
    }

    pub fn ys(&self) -> &[Vector] {
        &self.ys
    }

    /// Largest usable index `H`, or `None` when nothing is recorded.
    pub fn horizon(&self) -> Option<usize> {
        self.ys.len().checked_sub(1)
    }

    fn check_k(&self, k: usize) -> Result<(), RegularityError> {
        match self.horizon() {
            Some(h) if k <= h => Ok(()),
            _ => Err(RegularityError::HorizonExceeded {
                k: k.to_string(),
                horizon: self.horizon().unwrap_or(0),
            }),
        }
    }

    fn f_at(&self, j: usize, x: &Vector) -> Result<f64, RegularityError> {
        self.problem
            .eval(&self.ys[j], x)
            .map_err(|e| match e {
                crate::error::EquilibriumError::Dimension(d) => RegularityError::Dimension(d),
                other => unreachable!("evaluation only fails on dimensions: {other}"),
            })
    }

    pub fn residual(&self, x: &Vector) -> Result<f64, RegularityError> {
        Ok(fix_residual(&self.op, x)?)
    }

    /// `|x - Tx| <= 1/(k+1) + tol` and `f(y_j, x) <= 1/(k+1) + tol` for all `j <= k`.
    pub fn omega_prime_member(&self, x: &Vector, k: usize, tol: f64) -> Result<bool, RegularityError> {
        self.check_k(k)?;
        let t = threshold(k) + tol;
        if self.residual(x)? > t {
            return Ok(false);
        }
        for j in 0..=k {
            if self.f_at(j, x)? > t {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `k` in `gamma(x)`: `f(y_j, x) > 1/(k+1)` for some `j <= k`.
    pub fn gamma_contains(&self, x: &Vector, k: usize) -> Result<bool, RegularityError> {
        self.check_k(k)?;
        let t = threshold(k);
        for j in 0..=k {
            if self.f_at(j, x)? > t {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// `G(x)`: 0 if `gamma(x)` is empty, 2 if it contains 0, else `1 / inf gamma(x)`.
    pub fn g_value(&self, x: &Vector) -> Result<GValue, RegularityError> {
        let Some(h) = self.horizon() else {
            return Err(RegularityError::Undecided { horizon: 0 });
        };
        // gamma is upward closed, so a running maximum finds its least element
        let mut running = f64::NEG_INFINITY;
        for k in 0..=h {
            running = running.max(self.f_at(k, x)?);
            if running > threshold(k) {
                let value = if k == 0 { 2.0 } else { 1.0 / k as f64 };
                return Ok(GValue {
                    value,
                    inf_gamma: Some(k),
                    truncated: false,
                });
            }
        }
        Ok(GValue {
            value: 0.0,
            inf_gamma: None,
            truncated: true,
        })
    }

    /// `F(x) = max(|x - Tx|, G(x))`
    pub fn f_value(&self, x: &Vector) -> Result<f64, RegularityError> {
        Ok(self.residual(x)?.max(self.g_value(x)?.value))
    }
}

/// A function `psi` with `x in Omega'_{psi(eps)} => dist(x, Omega) < eps` on a
/// ball, given as a counterfunction applied to `ceil(1/eps)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegularityModulus {
    pub psi: Counterfunction,
}

impl RegularityModulus {
    pub fn new(psi: Counterfunction) -> Self {
        Self { psi }
    }

    /// `psi(eps) = g(ceil(1/eps))`
    pub fn psi_at(&self, eps: &BigRational) -> BigUint {
        self.psi.eval(&ceil_nat(&eps_recip(eps)))
    }

    /// The modulus of regularity `phi(eps) = 1/(psi(eps)+1)`.
    pub fn phi_at(&self, eps: &BigRational) -> BigRational {
        psi_to_phi(|e| self.psi_at(e))(eps)
    }

    /// `ceil(1/phi(eps))`
    pub fn index(&self, eps: &BigRational) -> BigUint {
        phi_to_psi_index(|e| self.phi_at(e), eps)
    }
}

fn eps_recip(eps: &BigRational) -> BigRational {
    assert!(eps > &BigRational::from_integer(0.into()), "eps must be positive");
    eps.recip()
}

/// `phi(eps) = 1/(psi(eps)+1)`
pub fn psi_to_phi(psi: impl Fn(&BigRational) -> BigUint) -> impl Fn(&BigRational) -> BigRational {
    move |eps| BigRational::new(BigInt::from(1u32), BigInt::from(psi(eps) + 1u32))
}

/// `ceil(1/phi(eps))`
pub fn phi_to_psi_index(phi: impl Fn(&BigRational) -> BigRational, eps: &BigRational) -> BigUint {
    ceil_nat(&eps_recip(&phi(eps)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::ConvexFn;

    fn s(v: f64) -> Vector {
        Vector::scalar(v)
    }

    fn q(p: i64, d: i64) -> BigRational {
        BigRational::new(p.into(), d.into())
    }

    fn abs_ctx(h: usize) -> OmegaContext {
        let p = EquilibriumProblem::convex_minimization(ConvexFn::WeightedOneNorm {
            center: vec![0.0],
            weights: vec![1.0],
        })
        .unwrap();
        OmegaContext::new(FirmOp::Identity, p, vec![s(0.0); h + 1])
    }

    /// Context with f(y_j, 0) = values[j], using f(x, y) = -x (y - x).
    fn scripted(values: &[f64]) -> (OmegaContext, Vector) {
        let p = EquilibriumProblem::affine_paired(vec![vec![-1.0]], vec![0.0]).unwrap();
        let ys = values.iter().map(|v| s(v.sqrt())).collect();
        (OmegaContext::new(FirmOp::Identity, p, ys), s(0.0))
    }

    #[test]
    fn membership_examples() {
        let ctx = abs_ctx(5);
        assert!(ctx.omega_prime_member(&s(0.3), 2, 1e-12).unwrap());
        assert!(!ctx.omega_prime_member(&s(0.3), 3, 1e-12).unwrap());
        assert!(ctx.omega_prime_member(&s(0.0), 5, 0.0).unwrap());
        assert!(matches!(
            ctx.omega_prime_member(&s(0.0), 6, 0.0),
            Err(RegularityError::HorizonExceeded { .. })
        ));
    }

    #[test]
    fn gamma_and_g_examples() {
        let (ctx, x) = scripted(&[0.0, 0.0]);
        assert!(!ctx.gamma_contains(&x, 1).unwrap());
        let g = ctx.g_value(&x).unwrap();
        assert_eq!((g.value, g.truncated), (0.0, true));

        let (ctx, x) = scripted(&[2.0, 0.0, 0.0]);
        assert!(ctx.gamma_contains(&x, 0).unwrap());
        assert!(ctx.gamma_contains(&x, 2).unwrap());
        assert_eq!(ctx.g_value(&x).unwrap().value, 2.0);

        let (ctx, x) = scripted(&[0.25, 0.25, 0.25, 0.25, 0.5]);
        assert!(!ctx.gamma_contains(&x, 3).unwrap());
        assert!(ctx.gamma_contains(&x, 4).unwrap());
        let g = ctx.g_value(&x).unwrap();
        assert_eq!((g.value, g.inf_gamma), (0.25, Some(4)));
    }

    #[test]
    fn f_value_examples() {
        let ctx = abs_ctx(10);
        assert_eq!(ctx.f_value(&s(0.0)).unwrap(), 0.0);
        assert_eq!(ctx.f_value(&s(0.3)).unwrap(), 1.0 / 3.0);
        let p = EquilibriumProblem::zero(1);
        let op = FirmOp::box_projection(vec![0.0], vec![1.0]).unwrap();
        let ctx = OmegaContext::new(op, p, vec![s(0.0); 3]);
        assert_eq!(ctx.f_value(&s(2.0)).unwrap(), 1.0);
    }

    #[test]
    fn empty_record_is_undecided() {
        let ctx = OmegaContext::new(FirmOp::Identity, EquilibriumProblem::zero(1), vec![]);
        assert!(matches!(ctx.g_value(&s(0.0)), Err(RegularityError::Undecided { .. })));
    }

    #[test]
    fn modulus_conversions() {
        let m = RegularityModulus::new(Counterfunction::identity());
        assert_eq!(m.phi_at(&q(1, 2)), q(1, 3));
        assert_eq!(m.index(&q(1, 2)), BigUint::from(3u32));
        let zero = RegularityModulus::new(Counterfunction::constant(0u32));
        assert_eq!(zero.phi_at(&q(1, 7)), q(1, 1));
        assert_eq!(phi_to_psi_index(|e| e.clone(), &q(1, 5)), BigUint::from(5u32));
        // nonincreasing in eps
        let mut prev = m.psi_at(&q(1, 1000));
        for d in (1..1000).rev() {
            let cur = m.psi_at(&q(1, d));
            assert!(cur <= prev);
            prev = cur;
        }
    }
}
