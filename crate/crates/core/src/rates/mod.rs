//! Exact bounds on the behaviour of the iteration: rates of metastability,
//! approximate-point bounds, Fejér moduli and the rate of convergence under a
//! modulus of regularity.
//!
//! Every output is an arbitrary-size natural. Irrational constants are
//! enclosed in rational intervals; a ceiling or floor the enclosure cannot
//! decide is taken at the upper end, which is sound because every bound is
//! nondecreasing in those constants.

mod enclosure;

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub use enclosure::{
    ceil_nat, exact_root, floor_nat, mul_ceil, mul_floor, nth_root, Enclosure, Precision, Refined,
};

use crate::counter::Counterfunction;
use crate::error::RateError;
use crate::regularity::RegularityModulus;

/// Default ceiling on the decimal digits of any computed bound.
pub const DEFAULT_DIGIT_BUDGET: u64 = 1_000_000;
/// Default ceiling on the depth of the metastability recursion.
pub const DEFAULT_ITERATION_LIMIT: u64 = 10_000_000;
/// Bounds with more digits than this are displayed by digit count.
pub const DISPLAY_DIGITS: u64 = 1_000;

const LOG2_10: f64 = std::f64::consts::LOG2_10;

/// Parses `p/q`, an integer, or a finite decimal such as `0.25` into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational, RateError> {
    let bad = |reason: &str| RateError::Parse {
        input: s.to_string(),
        reason: reason.to_string(),
    };
    let t = s.trim();
    if let Some((p, q)) = t.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad("numerator is not an integer"))?;
        let q: BigInt = q.trim().parse().map_err(|_| bad("denominator is not an integer"))?;
        if q.is_zero() {
            return Err(bad("zero denominator"));
        }
        return Ok(BigRational::new(p, q));
    }
    if let Some((int, frac)) = t.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|c| c.is_ascii_digit()) {
            return Err(bad("malformed decimal"));
        }
        let digits: BigInt = format!("{int}{frac}")
            .parse()
            .map_err(|_| bad("malformed decimal"))?;
        let den = num_traits::pow(BigInt::from(10u32), frac.len());
        return Ok(BigRational::new(digits, den));
    }
    let p: BigInt = t.parse().map_err(|_| bad("expected p/q, an integer or a decimal"))?;
    Ok(BigRational::from_integer(p))
}

/// Sizes allowed for intermediate and final values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub digit_budget: u64,
    pub iteration_limit: u64,
    pub precision: Precision,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            digit_budget: DEFAULT_DIGIT_BUDGET,
            iteration_limit: DEFAULT_ITERATION_LIMIT,
            precision: Precision::default(),
        }
    }
}

impl Limits {
    fn budget_bits(&self) -> u64 {
        (self.digit_budget as f64 * LOG2_10).ceil() as u64
    }

    /// Fails if a value of about `bits` bits would exceed the digit budget.
    fn check_bits(&self, bits: u64) -> Result<(), RateError> {
        if bits > self.budget_bits() {
            Err(RateError::SizeOverflow {
                digits: bits_to_digits(bits),
                budget: self.digit_budget,
            })
        } else {
            Ok(())
        }
    }
}

fn bits_to_digits(bits: u64) -> u64 {
    (bits as f64 / LOG2_10).ceil() as u64
}

/// Decimal digit count of `n` (1 for zero).
pub fn decimal_digits(n: &BigUint) -> u64 {
    if n.is_zero() {
        return 1;
    }
    let bits = n.bits();
    // 10^(d-1) <= n < 10^d; the estimate is exact or one short
    let est = ((bits - 1) as f64 / LOG2_10).floor() as u64 + 1;
    if *n >= num_traits::pow(BigUint::from(10u32), est as usize) {
        est + 1
    } else {
        est
    }
}

/// An exact natural bound tagged with the formula that produced it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bound {
    pub value: BigUint,
    pub formula: &'static str,
}

impl Bound {
    pub fn new(value: BigUint, formula: &'static str) -> Self {
        Self { value, formula }
    }

    pub fn digits(&self) -> u64 {
        decimal_digits(&self.value)
    }

    pub fn to_u64(&self) -> Option<u64> {
        self.value.to_u64()
    }

    /// True if the value is at most `cap`.
    pub fn fits(&self, cap: u64) -> bool {
        self.value <= BigUint::from(cap)
    }
}

impl fmt::Display for Bound {
    /// The decimal value, or the digit count when it has more than a thousand digits.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.value.bits() > 3400 && self.digits() > DISPLAY_DIGITS {
            write!(f, "<{} digits>", self.digits())
        } else {
            write!(f, "{}", self.value)
        }
    }
}

/// Exact inputs of the bounds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RateInputs {
    /// Lower end of the step-size range.
    pub a: BigRational,
    /// Upper end of the step-size range.
    pub b: BigRational,
    /// Bound on subgradient norms.
    pub m: BigRational,
    /// Bound on the diameter of the iterates.
    pub l: BigRational,
    /// Bound on `|x_0 - u|^2` for some `u` in the solution set.
    pub c_u: BigRational,
    /// Bound on `f(y_n, x_n)`.
    pub e: BigRational,
    /// Dimension of the space.
    pub dim: u32,
    /// Rate of convergence of `eps_n -> 0`.
    pub tau: Counterfunction,
}

fn rat(n: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// `a (2 - M^2 b)`
pub fn alpha(a: &BigRational, b: &BigRational, m: &BigRational) -> BigRational {
    a * (rat(2) - m * m * b)
}

impl RateInputs {
    /// Validates `0 < a <= b`, `M > 0`, `M^2 b < 2`, `L > 0`, `c_u >= 0`, `e >= 0`, `dim >= 1`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: BigRational,
        b: BigRational,
        m: BigRational,
        l: BigRational,
        c_u: BigRational,
        e: BigRational,
        dim: u32,
        tau: Counterfunction,
    ) -> Result<Self, RateError> {
        let inputs = Self {
            a,
            b,
            m,
            l,
            c_u,
            e,
            dim,
            tau,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    /// Like [`RateInputs::new`], filling `L` and `e` with the certified upper
    /// values of `2 sqrt(c_u)` and `sqrt(c_u / alpha)` when absent.
    #[allow(clippy::too_many_arguments)]
    pub fn with_defaults(
        a: BigRational,
        b: BigRational,
        m: BigRational,
        l: Option<BigRational>,
        c_u: BigRational,
        e: Option<BigRational>,
        dim: u32,
        tau: Counterfunction,
    ) -> Result<Self, RateError> {
        check_step_range(&a, &b, &m)?;
        let derived = derived_constants(&c_u, &alpha(&a, &b, &m), &Precision::default())?;
        let l = l.unwrap_or(derived.l_default);
        let e = e.unwrap_or(derived.e_default);
        Self::new(a, b, m, l, c_u, e, dim, tau)
    }

    pub fn validate(&self) -> Result<(), RateError> {
        check_step_range(&self.a, &self.b, &self.m)?;
        let bad = |m: &str| Err(RateError::InvalidRange(m.to_string()));
        if !self.l.is_positive() {
            return bad("L must be positive");
        }
        if self.c_u.is_negative() {
            return bad("c_u must be nonnegative");
        }
        if self.e.is_negative() {
            return bad("e must be nonnegative");
        }
        if self.dim == 0 {
            return bad("dimension must be at least 1");
        }
        Ok(())
    }

    pub fn alpha(&self) -> BigRational {
        alpha(&self.a, &self.b, &self.m)
    }
}

fn check_step_range(a: &BigRational, b: &BigRational, m: &BigRational) -> Result<(), RateError> {
    if !m.is_positive() {
        return Err(RateError::InvalidRange("M must be positive".into()));
    }
    if !(a.is_positive() && a <= b && m * m * b < rat(2)) {
        return Err(RateError::InvalidRange(
            "lambda range not inside (0, 2/M^2)".into(),
        ));
    }
    Ok(())
}

/// `L = 2 sqrt(c_u)` and `e = sqrt(c_u / alpha)`, as certified upper values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DerivedConstants {
    pub l_default: BigRational,
    pub e_default: BigRational,
    pub l_enclosure: Enclosure,
    pub e_enclosure: Enclosure,
}

pub fn derived_constants(
    c_u: &BigRational,
    alpha: &BigRational,
    precision: &Precision,
) -> Result<DerivedConstants, RateError> {
    if !alpha.is_positive() {
        return Err(RateError::InvalidRange("alpha must be positive".into()));
    }
    if c_u.is_negative() {
        return Err(RateError::InvalidRange("c_u must be nonnegative".into()));
    }
    let l = nth_root(&(rat(4) * c_u), 2, precision.bits);
    let e = nth_root(&(c_u / alpha), 2, precision.bits);
    let mut l_default = l.hi().clone();
    if l_default.is_zero() {
        // L must be positive; any positive value bounds a zero diameter
        l_default = BigRational::new(BigInt::one(), BigInt::from(BigUint::one() << precision.bits as usize));
    }
    Ok(DerivedConstants {
        l_default,
        e_default: e.hi().clone(),
        l_enclosure: l,
        e_enclosure: e,
    })
}

/// The constants of the bounds: alpha exactly, the others enclosed.
#[derive(Clone, Debug)]
pub struct Constants {
    /// `a (2 - M^2 b)`
    pub alpha: BigRational,
    /// `(1 + sqrt(2 b e (1 + M)))^2`
    pub beta: Refined,
    /// `sqrt(2MbL) / alpha^(1/4) + (Mb+1) / sqrt(alpha) + 1`
    pub sigma_real: Refined,
    /// `ceil` of `sigma_real`, certified.
    pub sigma: BigUint,
    /// `sqrt(2MbL) / alpha^(1/4) + Mb / sqrt(alpha) + 1`
    pub eta: Refined,
}

pub fn constants(inputs: &RateInputs, precision: &Precision) -> Result<Constants, RateError> {
    inputs.validate()?;
    let RateInputs { b, m, l, e, .. } = inputs;
    let alpha = inputs.alpha();
    let one = BigRational::one();
    let beta = Refined::build(precision, |bits| {
        nth_root(&(rat(2) * b * e * (&one + m)), 2, bits)
            .add_rational(&one)
            .pow(2)
    });
    // sqrt(2MbL) / alpha^(1/4) = (4 M^2 b^2 L^2 / alpha)^(1/4)
    let mb = m * b;
    let first = |bits| nth_root(&(rat(4) * &mb * &mb * l * l / &alpha), 4, bits);
    let sigma_real = Refined::build(precision, |bits| {
        first(bits)
            .add(&nth_root(&((&mb + &one) * (&mb + &one) / &alpha), 2, bits))
            .add_rational(&one)
    });
    let sigma = sigma_real.ceil_of(|s| s.clone());
    let eta = Refined::build(precision, |bits| {
        first(bits)
            .add(&nth_root(&(&mb * &mb / &alpha), 2, bits))
            .add_rational(&one)
    });
    Ok(Constants {
        alpha,
        beta,
        sigma_real,
        sigma,
        eta,
    })
}

/// `n -> n + g(n)` iterated `ceil(c_u (k+1))` times from `start`.
pub fn phi1_prime(
    k: &BigUint,
    g: &Counterfunction,
    c_u: &BigRational,
    start: &BigUint,
    limits: &Limits,
) -> Result<Bound, RateError> {
    let iterations = mul_ceil(c_u, &(k + 1u32));
    let step = g.tilde();
    if step.slope().is_one() {
        // n -> n + c: closed form start + iterations * c
        let bits = iterations.bits() + step.offset().bits() + start.bits() + 1;
        limits.check_bits(bits)?;
        return Ok(Bound::new(start + iterations * step.offset(), "phi1_prime"));
    }
    // slope >= 2: the result has at least `iterations` bits
    let per_step = step.slope().bits();
    let estimate = iterations
        .to_u64()
        .and_then(|i| i.checked_mul(per_step))
        .and_then(|b| b.checked_add(start.bits().max(step.offset().bits()) + 1))
        .unwrap_or(u64::MAX);
    limits.check_bits(estimate)?;
    let map = power(&step, &iterations);
    Ok(Bound::new(map.eval(start), "phi1_prime"))
}

/// `f` composed with itself `times` times, by repeated squaring.
fn power(f: &Counterfunction, times: &BigUint) -> Counterfunction {
    let mut result = Counterfunction::identity();
    let mut base = f.clone();
    let bits = times.bits();
    for i in 0..bits {
        if times.bit(i) {
            result = base.compose(&result);
        }
        if i + 1 < bits {
            base = base.compose(&base);
        }
    }
    result
}

/// `phi1_prime(k, g, c_u, 0)`
pub fn phi1(k: &BigUint, g: &Counterfunction, c_u: &BigRational, limits: &Limits) -> Result<Bound, RateError> {
    phi1_prime(k, g, c_u, &BigUint::zero(), limits).map(|b| Bound::new(b.value, "phi1"))
}

/// Certified bounds for one set of inputs.
#[derive(Clone, Debug)]
pub struct RateCalculator {
    inputs: RateInputs,
    constants: Constants,
    limits: Limits,
}

/// Moduli of uniform continuity `sigma_j` of `f(y_j, .)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SigmaFamily {
    /// The same modulus for every `j`.
    Uniform(Counterfunction),
    /// `sigma_j` for `j = 0, 1, ...`
    Indexed(Vec<Counterfunction>),
}

impl SigmaFamily {
    /// `max_{i <= j} sigma_i(k)`
    pub fn max_upto(&self, j: &BigUint, k: &BigUint) -> Result<BigUint, RateError> {
        match self {
            SigmaFamily::Uniform(s) => Ok(s.eval(k)),
            SigmaFamily::Indexed(list) => {
                let j = j.to_usize().unwrap_or(usize::MAX);
                if j >= list.len() {
                    return Err(RateError::MissingModulus(list.len()));
                }
                Ok(list[..=j].iter().map(|s| s.eval(k)).max().expect("nonempty"))
            }
        }
    }
}

/// `(delta, omega)` with `delta(k) = 2k+1` and
/// `omega(k) = max(4k+3, max_{i<=k} sigma_i(2k+1))`.
pub fn uniform_closedness_moduli(
    k: &BigUint,
    sigma: &SigmaFamily,
) -> Result<(Bound, Bound), RateError> {
    let two_k1 = k * 2u32 + 1u32;
    let omega = (k * 4u32 + 3u32).max(sigma.max_upto(k, &two_k1)?);
    Ok((
        Bound::new(two_k1, "delta_omega"),
        Bound::new(omega, "omega_omega"),
    ))
}

impl RateCalculator {
    pub fn new(inputs: RateInputs, limits: Limits) -> Result<Self, RateError> {
        let constants = constants(&inputs, &limits.precision)?;
        Ok(Self {
            inputs,
            constants,
            limits,
        })
    }

    pub fn inputs(&self) -> &RateInputs {
        &self.inputs
    }

    pub fn constants(&self) -> &Constants {
        &self.constants
    }

    pub fn limits(&self) -> &Limits {
        &self.limits
    }

    pub fn phi1_prime(&self, k: &BigUint, g: &Counterfunction, start: &BigUint) -> Result<Bound, RateError> {
        phi1_prime(k, g, &self.inputs.c_u, start, &self.limits)
    }

    pub fn phi1(&self, k: &BigUint, g: &Counterfunction) -> Result<Bound, RateError> {
        phi1(k, g, &self.inputs.c_u, &self.limits)
    }

    /// `phi1(ceil((k+1)/alpha) - 1, g + 1, c_u)`. The accuracy `1/(k+1)` for
    /// `f(y_i, x_i)` corresponds to calling this with `k^2 + 2k`.
    pub fn phi2(&self, k: &BigUint, g: &Counterfunction) -> Result<Bound, RateError> {
        let index = mul_ceil(&self.constants.alpha.recip(), &(k + 1u32)) - 1u32;
        let b = phi1(&index, &g.plus_one(), &self.inputs.c_u, &self.limits)?;
        Ok(Bound::new(b.value, "phi2"))
    }

    /// `phi1(ceil(eta^4 (k+1)^4) - 1, g', c_u) + 1` with `g'(n) = g(n+1) + 1`.
    pub fn phi3(&self, k: &BigUint, g: &Counterfunction) -> Result<Bound, RateError> {
        let k4 = (k + 1u32).pow(4);
        let index = self.constants.eta.ceil_scaled(|eta| eta.pow(4), &k4) - 1u32;
        let b = phi1(&index, &g.shifted(), &self.inputs.c_u, &self.limits)?;
        Ok(Bound::new(b.value + 1u32, "phi3"))
    }

    /// `2 ceil(c_u sigma^4 16 (k+1)^4) + max(k, tau(2k+1)) + 1`
    pub fn approx_point_bound(&self, k: &BigUint) -> Result<Bound, RateError> {
        let k1 = k + 1u32;
        let s = &self.constants.sigma;
        let bits = 4 * (k1.bits() + s.bits()) + 8 + self.inputs.c_u.numer().bits();
        self.limits.check_bits(bits)?;
        let k1_4 = k1.pow(4);
        let body = mul_ceil(&self.inputs.c_u, &(s.pow(4) * 16u32 * k1_4));
        let tail = k.clone().max(self.inputs.tau.eval(&(k * 2u32 + 1u32)));
        Ok(Bound::new(body * 2u32 + tail + 1u32, "approx_point_bound"))
    }

    /// `max(n + m, floor((r+1)^2 m^2 beta))`
    pub fn chi(&self, n: &BigUint, m: &BigUint, r: &BigUint) -> Result<Bound, RateError> {
        let factor = (r + 1u32) * m;
        self.limits.check_bits(2 * factor.bits() + 8)?;
        let floor = self.constants.beta.floor_scaled(|beta| beta.clone(), &(&factor * &factor));
        Ok(Bound::new((n + m).max(floor), "chi"))
    }

    /// `chi(n, g(n), k)`
    pub fn chi_g(&self, n: &BigUint, k: &BigUint, g: &Counterfunction) -> Result<Bound, RateError> {
        self.chi(n, &g.eval(n), k).map(|b| Bound::new(b.value, "chi_g"))
    }

    /// `max_{i <= n} chi_g(i, k)`, which equals `chi_g(n, k)` because `g` and
    /// `chi` are nondecreasing.
    pub fn chi_g_max(&self, n: &BigUint, k: &BigUint, g: &Counterfunction) -> Result<Bound, RateError> {
        self.chi_g(n, k, g).map(|b| Bound::new(b.value, "chi_g_max"))
    }

    /// `max_{i <= n} chi_g(i, k)` by scanning every `i`.
    pub fn chi_g_max_scan(&self, n: u64, k: &BigUint, g: &Counterfunction) -> Result<Bound, RateError> {
        let mut best = BigUint::zero();
        for i in 0..=n {
            best = best.max(self.chi_g(&BigUint::from(i), k, g)?.value);
        }
        Ok(Bound::new(best, "chi_g_max"))
    }

    /// `ceil((8k+8) sqrt(N) L)^N`
    pub fn total_bdd_modulus(&self, k: &BigUint) -> Result<Bound, RateError> {
        let l = &self.inputs.l;
        let radicand = rat(self.inputs.dim as u64) * l * l;
        let factor = (k + 1u32) * 8u32;
        let precision = self.limits.precision;
        let root = Refined::build(&precision, |bits| nth_root(&radicand, 2, bits));
        let base = root.ceil_scaled(|r| r.clone(), &factor);
        let bits = base.bits().saturating_mul(self.inputs.dim as u64);
        self.limits.check_bits(bits)?;
        Ok(Bound::new(base.pow(self.inputs.dim), "total_bdd_modulus"))
    }

    /// `Sigma_0(depth)` with `Sigma_0(0) = 0` and
    /// `Sigma_0(j+1) = Phi(max(floor, chi_g_max(Sigma_0(j), 4k+3)))`.
    fn sigma0(
        &self,
        depth: &BigUint,
        k: &BigUint,
        g: &Counterfunction,
        floor: Option<&BigUint>,
    ) -> Result<BigUint, RateError> {
        let r = k * 4u32 + 3u32;
        let mut value = BigUint::zero();
        let mut level = BigUint::zero();
        let limit = BigUint::from(self.limits.iteration_limit);
        while &level < depth {
            if level >= limit {
                return Err(RateError::IterationLimit {
                    depth: depth.to_string(),
                    limit: self.limits.iteration_limit,
                });
            }
            let mut chi = self.chi_g_max(&value, &r, g)?.value;
            if let Some(f) = floor {
                chi = chi.max(f.clone());
            }
            value = self.approx_point_bound(&chi)?.value;
            level += 1u32;
        }
        Ok(value)
    }

    /// Rate of metastability `Sigma_0(P(k), k, g, chi, Phi)` for the iterates.
    pub fn metastability_rate(&self, k: &BigUint, g: &Counterfunction) -> Result<Bound, RateError> {
        let depth = self.total_bdd_modulus(k)?.value;
        let v = self.sigma0(&depth, k, g, None)?;
        Ok(Bound::new(v, "metastability_rate"))
    }

    /// `max(k, ceil((omega(k) - 1) / 2))`
    pub fn k0(&self, k: &BigUint, sigma: &SigmaFamily) -> Result<BigUint, RateError> {
        let (_, omega) = uniform_closedness_moduli(k, sigma)?;
        // ceil((omega - 1) / 2) = floor(omega / 2)
        let half = omega.value / 2u32;
        Ok(k.clone().max(half))
    }

    /// Rate of metastability under uniform closedness:
    /// `Sigma_0(P(k0), k0, g, chi_k, Phi)` with `chi_k = max(delta(k), chi)`.
    pub fn metastability_rate_uc(
        &self,
        k: &BigUint,
        g: &Counterfunction,
        sigma: &SigmaFamily,
    ) -> Result<Bound, RateError> {
        let (delta, _) = uniform_closedness_moduli(k, sigma)?;
        let k0 = self.k0(k, sigma)?;
        let depth = self.total_bdd_modulus(&k0)?.value;
        let v = self.sigma0(&depth, &k0, g, Some(&delta.value))?;
        Ok(Bound::new(v, "metastability_rate_uc"))
    }

    /// Rate of convergence `Phi(phi(1/(2(k+1))))` where `phi = 1/(psi+1)`
    /// and `Phi(eps) = approx_point_bound(ceil(1/eps))`.
    pub fn regularity_convergence_rate(
        &self,
        k: &BigUint,
        psi: &RegularityModulus,
    ) -> Result<Bound, RateError> {
        let eps = BigRational::new(BigInt::one(), BigInt::from(k + 1u32) * 2);
        let index = psi.index(&eps);
        let b = self.approx_point_bound(&index)?;
        Ok(Bound::new(b.value, "regularity_convergence_rate"))
    }
}

#[cfg(test)]
mod tests;
