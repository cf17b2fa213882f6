//! Rational interval enclosures of nonnegative reals, with nth roots
//! computed on dyadic grids so that raising the precision yields nested
//! intervals.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Working precision for root enclosures.
///
/// Roots are taken on the grid `2^-bits`; a ceiling or floor that the
/// enclosure cannot decide is retried with the precision doubled, up to
/// `refinements` times, after which the upper end is used.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Precision {
    pub bits: u64,
    pub refinements: u32,
}

impl Default for Precision {
    fn default() -> Self {
        Self {
            bits: 64,
            refinements: 6,
        }
    }
}

impl Precision {
    /// Grid exponents tried in order.
    pub(crate) fn levels(&self) -> impl Iterator<Item = u64> {
        let bits = self.bits.max(1);
        (0..=self.refinements).map(move |i| bits.saturating_mul(1u64 << i.min(40)))
    }
}

/// A closed interval `[lo, hi]` of nonnegative rationals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Enclosure {
    lo: BigRational,
    hi: BigRational,
}

impl Enclosure {
    pub fn exact(q: BigRational) -> Self {
        debug_assert!(!q.is_negative());
        Self {
            lo: q.clone(),
            hi: q,
        }
    }

    pub fn new(lo: BigRational, hi: BigRational) -> Self {
        debug_assert!(!lo.is_negative() && lo <= hi);
        Self { lo, hi }
    }

    pub fn lo(&self) -> &BigRational {
        &self.lo
    }

    pub fn hi(&self) -> &BigRational {
        &self.hi
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    pub fn width(&self) -> BigRational {
        &self.hi - &self.lo
    }

    pub fn contains(&self, q: &BigRational) -> bool {
        &self.lo <= q && q <= &self.hi
    }

    /// True if `self` lies inside `outer`.
    pub fn within(&self, outer: &Enclosure) -> bool {
        outer.lo <= self.lo && self.hi <= outer.hi
    }

    pub fn add(&self, other: &Enclosure) -> Enclosure {
        Enclosure::new(&self.lo + &other.lo, &self.hi + &other.hi)
    }

    pub fn add_rational(&self, q: &BigRational) -> Enclosure {
        Enclosure::new(&self.lo + q, &self.hi + q)
    }

    pub fn mul(&self, other: &Enclosure) -> Enclosure {
        Enclosure::new(&self.lo * &other.lo, &self.hi * &other.hi)
    }

    pub fn scale(&self, q: &BigRational) -> Enclosure {
        debug_assert!(!q.is_negative());
        Enclosure::new(&self.lo * q, &self.hi * q)
    }

    pub fn pow(&self, e: u32) -> Enclosure {
        Enclosure::new(num_traits::pow(self.lo.clone(), e as usize), num_traits::pow(self.hi.clone(), e as usize))
    }

    /// `(ceil(lo), ceil(hi))`
    pub fn ceil_ends(&self) -> (BigUint, BigUint) {
        (ceil_nat(&self.lo), ceil_nat(&self.hi))
    }

    /// `(floor(lo), floor(hi))`
    pub fn floor_ends(&self) -> (BigUint, BigUint) {
        (floor_nat(&self.lo), floor_nat(&self.hi))
    }
}

pub(crate) fn to_nat(i: BigInt) -> BigUint {
    match i.sign() {
        Sign::Minus => BigUint::zero(),
        _ => i.magnitude().clone(),
    }
}

/// `ceil(q)` clamped at 0.
pub fn ceil_nat(q: &BigRational) -> BigUint {
    to_nat(q.numer().div_ceil(q.denom()))
}

/// `floor(q)` clamped at 0.
pub fn floor_nat(q: &BigRational) -> BigUint {
    to_nat(q.numer().div_floor(q.denom()))
}

/// `ceil(q * f)` for `q >= 0`, without normalizing a large rational.
pub fn mul_ceil(q: &BigRational, f: &BigUint) -> BigUint {
    to_nat((q.numer() * BigInt::from(f.clone())).div_ceil(q.denom()))
}

/// `floor(q * f)` for `q >= 0`, without normalizing a large rational.
pub fn mul_floor(q: &BigRational, f: &BigUint) -> BigUint {
    to_nat((q.numer() * BigInt::from(f.clone())).div_floor(q.denom()))
}

/// Exact `q^(1/n)` if `q` is the nth power of a rational.
pub fn exact_root(q: &BigRational, n: u32) -> Option<BigRational> {
    let p = q.numer().magnitude();
    let d = q.denom().magnitude();
    let rp = p.nth_root(n);
    let rd = d.nth_root(n);
    (rp.pow(n) == *p && rd.pow(n) == *d)
        .then(|| BigRational::new(BigInt::from(rp), BigInt::from(rd)))
}

/// Encloses `q^(1/n)` for `q >= 0`: exact when `q` is a perfect nth power,
/// otherwise `[r, r+1] / 2^bits` with `r = floor(q^(1/n) 2^bits)`.
pub fn nth_root(q: &BigRational, n: u32, bits: u64) -> Enclosure {
    assert!(n >= 1 && !q.is_negative());
    if let Some(r) = exact_root(q, n) {
        return Enclosure::exact(r);
    }
    let scale = BigUint::one() << (bits as usize);
    let p = q.numer().magnitude();
    let d = q.denom().magnitude();
    // floor(floor(y)^(1/n)) = floor(y^(1/n))
    let t = (p * scale.pow(n)) / d;
    let r = t.nth_root(n);
    let den = BigInt::from(scale);
    Enclosure::new(
        BigRational::new(BigInt::from(r.clone()), den.clone()),
        BigRational::new(BigInt::from(r + 1u32), den),
    )
}

/// A real constant enclosed at each precision level of a [`Precision`].
#[derive(Clone, Debug)]
pub struct Refined {
    levels: Vec<Enclosure>,
}

impl Refined {
    pub fn build(precision: &Precision, at: impl Fn(u64) -> Enclosure) -> Self {
        let mut levels = Vec::new();
        for bits in precision.levels() {
            let e = at(bits);
            let exact = e.is_exact();
            levels.push(e);
            if exact {
                break;
            }
        }
        Self { levels }
    }

    /// The tightest enclosure.
    pub fn best(&self) -> &Enclosure {
        self.levels.last().expect("at least one level")
    }

    pub fn levels(&self) -> &[Enclosure] {
        &self.levels
    }

    /// Certified upper value of `ceil(expr(c))` for a nondecreasing `expr`:
    /// the exact ceiling when some level decides it, else the ceiling of the
    /// upper end at the tightest level.
    pub fn ceil_of(&self, expr: impl Fn(&Enclosure) -> Enclosure) -> BigUint {
        self.decide(expr, Enclosure::ceil_ends)
    }

    /// Certified upper value of `floor(expr(c))` for a nondecreasing `expr`.
    pub fn floor_of(&self, expr: impl Fn(&Enclosure) -> Enclosure) -> BigUint {
        self.decide(expr, Enclosure::floor_ends)
    }

    /// Certified upper value of `ceil(expr(c) * factor)`.
    pub fn ceil_scaled(&self, expr: impl Fn(&Enclosure) -> Enclosure, factor: &BigUint) -> BigUint {
        self.decide(expr, |e| (mul_ceil(e.lo(), factor), mul_ceil(e.hi(), factor)))
    }

    /// Certified upper value of `floor(expr(c) * factor)`.
    pub fn floor_scaled(&self, expr: impl Fn(&Enclosure) -> Enclosure, factor: &BigUint) -> BigUint {
        self.decide(expr, |e| (mul_floor(e.lo(), factor), mul_floor(e.hi(), factor)))
    }

    fn decide(
        &self,
        expr: impl Fn(&Enclosure) -> Enclosure,
        ends: impl Fn(&Enclosure) -> (BigUint, BigUint),
    ) -> BigUint {
        let mut last = BigUint::zero();
        for level in &self.levels {
            let (lo, hi) = ends(&expr(level));
            if lo == hi {
                return hi;
            }
            last = hi;
        }
        last
    }
}
