//! Monotone counterfunctions `n -> p*n + c` over arbitrary-size naturals.
//!
//! The family is closed under every transform the bounds need: `g + 1`,
//! `n -> g(n+1) + 1`, and `n -> n + g(n)`, so iterates stay in the family and
//! can be evaluated exactly.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::RateError;

/// `g(n) = slope * n + offset` with natural coefficients; nondecreasing in `n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Counterfunction {
    slope: BigUint,
    offset: BigUint,
}

impl Counterfunction {
    pub fn constant(c: impl Into<BigUint>) -> Self {
        Self {
            slope: BigUint::zero(),
            offset: c.into(),
        }
    }

    pub fn affine(slope: impl Into<BigUint>, offset: impl Into<BigUint>) -> Self {
        Self {
            slope: slope.into(),
            offset: offset.into(),
        }
    }

    /// `n -> n`
    pub fn identity() -> Self {
        Self::affine(1u32, 0u32)
    }

    pub fn slope(&self) -> &BigUint {
        &self.slope
    }

    pub fn offset(&self) -> &BigUint {
        &self.offset
    }

    pub fn is_constant(&self) -> bool {
        self.slope.is_zero()
    }

    pub fn eval(&self, n: &BigUint) -> BigUint {
        &self.slope * n + &self.offset
    }

    pub fn eval_u64(&self, n: u64) -> BigUint {
        self.eval(&BigUint::from(n))
    }

    /// `g(n)` as a machine integer, if it fits.
    pub fn eval_small(&self, n: u64) -> Option<u64> {
        self.eval_u64(n).to_u64()
    }

    /// `n -> g(n) + 1`
    pub fn plus_one(&self) -> Self {
        Self {
            slope: self.slope.clone(),
            offset: &self.offset + 1u32,
        }
    }

    /// `n -> g(n + 1) + 1`
    pub fn shifted(&self) -> Self {
        Self {
            slope: self.slope.clone(),
            offset: &self.slope + &self.offset + 1u32,
        }
    }

    /// `n -> n + g(n)`
    pub fn tilde(&self) -> Self {
        Self {
            slope: &self.slope + 1u32,
            offset: self.offset.clone(),
        }
    }

    /// True if `self(n) >= other(n)` for every natural `n`.
    pub fn dominates(&self, other: &Counterfunction) -> bool {
        self.slope >= other.slope && self.offset >= other.offset
    }

    /// Composition `self ∘ other`.
    pub(crate) fn compose(&self, other: &Counterfunction) -> Counterfunction {
        Counterfunction {
            slope: &self.slope * &other.slope,
            offset: &self.slope * &other.offset + &self.offset,
        }
    }
}

impl fmt::Display for Counterfunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.slope.is_zero() {
            write!(f, "const:{}", self.offset)
        } else {
            write!(f, "affine:{},{}", self.slope, self.offset)
        }
    }
}

impl FromStr for Counterfunction {
    type Err = RateError;

    /// Accepts `const:C` and `affine:P,C` (natural `P`, `C`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |reason: &str| RateError::Parse {
            input: s.to_string(),
            reason: reason.to_string(),
        };
        let nat = |t: &str| -> Result<BigUint, RateError> {
            t.trim()
                .parse::<BigUint>()
                .map_err(|_| bad("coefficients must be natural numbers"))
        };
        let (family, params) = s
            .split_once(':')
            .ok_or_else(|| bad("expected FAMILY:PARAMS"))?;
        match family.trim() {
            "const" | "constant" => Ok(Self::constant(nat(params)?)),
            "affine" => {
                let (p, c) = params
                    .split_once(',')
                    .ok_or_else(|| bad("affine needs SLOPE,OFFSET"))?;
                Ok(Self::affine(nat(p)?, nat(c)?))
            }
            _ => Err(bad("family must be const or affine")),
        }
    }
}

impl TryFrom<String> for Counterfunction {
    type Error = RateError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Counterfunction> for String {
    fn from(g: Counterfunction) -> Self {
        g.to_string()
    }
}
