//! Certified interval arithmetic on dyadic fixed-point numbers.
//!
//! An [`Interval`] at precision `p` holds integers `lo <= hi` and stands for
//! the real interval `[lo, hi] * 2^-p`. Every operation rounds outward, so a
//! real number enclosed by the inputs is enclosed by the output. `ln` and
//! `exp` are evaluated with `atanh`/Taylor series in fixed point with an
//! explicit ulp error budget, then widened by that budget.
//!
//! Comparisons return `None` when the enclosures overlap; [`decide`] retries
//! with doubled precision until the answer is certain.

use crate::error::{Error, Result};
use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub const START_PRECISION: u32 = 128;
pub const MAX_PRECISION: u32 = 1 << 15;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interval {
    lo: BigInt,
    hi: BigInt,
    prec: u32,
}

fn pow2(k: u64) -> BigInt {
    BigInt::one() << k
}

fn floor_shr(n: &BigInt, k: u64) -> BigInt {
    if k == 0 {
        return n.clone();
    }
    n.div_floor(&pow2(k))
}

fn ceil_shr(n: &BigInt, k: u64) -> BigInt {
    -floor_shr(&-n, k)
}

/// `n * 2^shift` rounded down (shift may be negative).
fn floor_scale(n: &BigInt, shift: i64) -> BigInt {
    if shift >= 0 {
        n << shift as u64
    } else {
        floor_shr(n, (-shift) as u64)
    }
}

fn ceil_scale(n: &BigInt, shift: i64) -> BigInt {
    if shift >= 0 {
        n << shift as u64
    } else {
        ceil_shr(n, (-shift) as u64)
    }
}

/// `sum_{i>=0} t^(2i+1)/(2i+1)` at scale `2^-w` for `0 <= t <= 1/3`.
/// Returns the approximation and its error bound in ulps.
fn atanh_series(t: &BigInt, w: u32) -> (BigInt, u64) {
    let t2 = (t * t) >> w;
    let mut pow = t.clone();
    let mut sum = BigInt::zero();
    let mut terms = 0u64;
    while !pow.is_zero() {
        sum += &pow / BigInt::from(2 * terms + 1);
        pow = (&pow * &t2) >> w;
        terms += 1;
    }
    (sum, 4 * terms + 8)
}

/// ln 2 at scale `2^-w` with its ulp error bound.
fn ln2_fixed(w: u32) -> (BigInt, u64) {
    let third = pow2(w as u64) / BigInt::from(3);
    let (s, e) = atanh_series(&third, w);
    (s * 2, 2 * (e + 2))
}

/// ln(n * 2^-scale) at scale `2^-w` for positive `n`, with ulp error bound.
fn ln_fixed(n: &BigUint, scale: u32, w: u32) -> (BigInt, u64) {
    debug_assert!(!n.is_zero());
    let s_bits = w as u64 + 2;
    let b = n.bits();
    let m = if b - 1 >= s_bits {
        BigInt::from(n >> (b - 1 - s_bits))
    } else {
        BigInt::from(n << (s_bits - (b - 1)))
    };
    let one = pow2(s_bits);
    let t = ((&m - &one) << w) / (&m + &one);
    let (atanh, e_series) = atanh_series(&t, w);
    let ln_m = atanh * 2;
    let err_m = 2 * (e_series + 3);

    let exponent = b as i64 - 1 - scale as i64;
    let (l2, e2) = ln2_fixed(w);
    let approx = ln_m + l2 * BigInt::from(exponent);
    let err = exponent.unsigned_abs() * e2 + err_m + 2;
    (approx, err)
}

fn guard_bits(extra: u64) -> u32 {
    (48 + 64 - extra.leading_zeros() as u64) as u32
}

impl Interval {
    /// Degenerate interval holding the integer `n`.
    pub fn from_int(n: &BigInt, prec: u32) -> Self {
        let v = n << prec as u64;
        Interval {
            lo: v.clone(),
            hi: v,
            prec,
        }
    }

    pub fn from_biguint(n: &BigUint, prec: u32) -> Self {
        Self::from_int(&BigInt::from(n.clone()), prec)
    }

    pub fn from_rational(r: &BigRational, prec: u32) -> Self {
        let scaled = r * BigRational::from_integer(pow2(prec as u64));
        Interval {
            lo: scaled.floor().to_integer(),
            hi: scaled.ceil().to_integer(),
            prec,
        }
    }

    /// Exact enclosure of a finite `f64` (every finite double is dyadic).
    pub fn from_f64(x: f64, prec: u32) -> Self {
        let r = BigRational::from_float(x).expect("finite float");
        Self::from_rational(&r, prec)
    }

    pub fn precision(&self) -> u32 {
        self.prec
    }

    pub fn lo_f64(&self) -> f64 {
        to_f64_scaled(&self.lo, self.prec)
    }

    pub fn hi_f64(&self) -> f64 {
        to_f64_scaled(&self.hi, self.prec)
    }

    pub fn width_ulps(&self) -> BigInt {
        &self.hi - &self.lo
    }

    fn check(&self, other: &Interval) {
        assert_eq!(self.prec, other.prec, "interval precision mismatch");
    }

    pub fn add(&self, other: &Interval) -> Interval {
        self.check(other);
        Interval {
            lo: &self.lo + &other.lo,
            hi: &self.hi + &other.hi,
            prec: self.prec,
        }
    }

    pub fn sub(&self, other: &Interval) -> Interval {
        self.check(other);
        Interval {
            lo: &self.lo - &other.hi,
            hi: &self.hi - &other.lo,
            prec: self.prec,
        }
    }

    pub fn mul(&self, other: &Interval) -> Interval {
        self.check(other);
        let cands = [
            &self.lo * &other.lo,
            &self.lo * &other.hi,
            &self.hi * &other.lo,
            &self.hi * &other.hi,
        ];
        let min = cands.iter().min().unwrap();
        let max = cands.iter().max().unwrap();
        Interval {
            lo: floor_shr(min, self.prec as u64),
            hi: ceil_shr(max, self.prec as u64),
            prec: self.prec,
        }
    }

    pub fn mul_rational(&self, r: &BigRational) -> Interval {
        self.mul(&Interval::from_rational(r, self.prec))
    }

    /// Division by a positive integer.
    pub fn div_int(&self, n: &BigUint) -> Interval {
        assert!(!n.is_zero(), "division by zero");
        let d = BigInt::from(n.clone());
        Interval {
            lo: self.lo.div_floor(&d),
            hi: self.hi.div_ceil(&d),
            prec: self.prec,
        }
    }

    /// Natural logarithm; the interval must be strictly positive.
    pub fn ln(&self) -> Result<Interval> {
        if !self.lo.is_positive() {
            return Err(Error::Invariant(
                "logarithm of an interval that is not strictly positive".into(),
            ));
        }
        let p = self.prec;
        let lo_n = self.lo.to_biguint().unwrap();
        let hi_n = self.hi.to_biguint().unwrap();
        let extra = hi_n.bits().max(p as u64 + 1);
        let w = p + guard_bits(extra);
        let shift = (w - p) as u64;
        let (a_lo, e_lo) = ln_fixed(&lo_n, p, w);
        let (a_hi, e_hi) = ln_fixed(&hi_n, p, w);
        Ok(Interval {
            lo: floor_shr(&(a_lo - BigInt::from(e_lo)), shift),
            hi: ceil_shr(&(a_hi + BigInt::from(e_hi)), shift),
            prec: p,
        })
    }

    /// Exponential. Fails only when the result would need more than about
    /// 2^32 bits.
    pub fn exp(&self) -> Result<Interval> {
        let lo = exp_bound(&self.lo, self.prec, false)?;
        let hi = exp_bound(&self.hi, self.prec, true)?;
        Ok(Interval {
            lo,
            hi,
            prec: self.prec,
        })
    }

    /// `Some(true)` if every point is `< other`, `Some(false)` if every point
    /// is `>= other`, `None` if undecided at this precision.
    pub fn lt(&self, other: &Interval) -> Option<bool> {
        self.check(other);
        if self.hi < other.lo {
            Some(true)
        } else if self.lo >= other.hi {
            Some(false)
        } else {
            None
        }
    }

    /// Common floor of all points, if the interval does not straddle an integer.
    pub fn floor(&self) -> Option<BigInt> {
        let a = floor_shr(&self.lo, self.prec as u64);
        let b = floor_shr(&self.hi, self.prec as u64);
        (a == b).then_some(a)
    }

    /// Floor of the lower endpoint.
    pub fn floor_lo(&self) -> BigInt {
        floor_shr(&self.lo, self.prec as u64)
    }

    pub fn contains_rational(&self, r: &BigRational) -> bool {
        let scaled = r * BigRational::from_integer(pow2(self.prec as u64));
        BigRational::from_integer(self.lo.clone()) <= scaled
            && scaled <= BigRational::from_integer(self.hi.clone())
    }
}

fn to_f64_scaled(n: &BigInt, prec: u32) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        let v = n.to_f64().unwrap_or(f64::NAN);
        return v * (-(prec as f64)).exp2();
    }
    let drop = bits - 60;
    let top = n >> drop;
    top.to_f64().unwrap() * ((drop as f64) - prec as f64).exp2()
}

/// Directed bound of e^(x * 2^-p) at scale `2^-p`.
fn exp_bound(x: &BigInt, p: u32, upper: bool) -> Result<BigInt> {
    let int_bits = (x.abs() >> p as u64).bits();
    if int_bits > 31 {
        return Err(Error::Precision {
            reason: "exponential argument too large to materialise".into(),
            required_bits: 1 << int_bits.min(63),
        });
    }
    let w = p + guard_bits(int_bits + 2) + 8;
    let xw = x << (w - p) as u64;
    let (l2, e2) = ln2_fixed(w);
    let k = xw.div_floor(&l2);
    let r = &xw - &k * &l2;
    let k_i = k.to_i64().expect("bounded exponent");
    let dr = k_i.unsigned_abs() * e2;

    let one = pow2(w as u64);
    let mut sum = one.clone();
    let mut term = one;
    let mut n = 0u64;
    loop {
        n += 1;
        term = floor_shr(&(&term * &r), w as u64).div_floor(&BigInt::from(n));
        if term.is_zero() {
            break;
        }
        sum += &term;
        if n > 100_000 {
            return Err(Error::Invariant("exp series failed to converge".into()));
        }
    }
    let err = BigInt::from(n * (n + 1) + 4 * n + 4 + 3 * (dr + 1));
    let shift = k_i + p as i64 - w as i64;
    Ok(if upper {
        ceil_scale(&(sum + err), shift)
    } else {
        let v = floor_scale(&(sum - err), shift);
        if v.sign() == Sign::Minus {
            BigInt::zero()
        } else {
            v
        }
    })
}

/// Enclosure of ln(n) for a positive integer.
pub fn ln_int(n: &BigUint, prec: u32) -> Result<Interval> {
    if n.is_zero() {
        return Err(Error::Invariant("ln(0)".into()));
    }
    Interval::from_biguint(n, prec).ln()
}

/// Enclosure of ln(r) for a positive rational.
pub fn ln_rational(r: &BigRational, prec: u32) -> Result<Interval> {
    if !r.is_positive() {
        return Err(Error::Invariant("ln of a non-positive rational".into()));
    }
    let num = r.numer().to_biguint().unwrap();
    let den = r.denom().to_biguint().unwrap();
    Ok(ln_int(&num, prec)?.sub(&ln_int(&den, prec)?))
}

/// Run `f` at increasing precision until it returns a definite answer.
pub fn decide(what: &str, mut f: impl FnMut(u32) -> Result<Option<bool>>) -> Result<bool> {
    let mut p = START_PRECISION;
    loop {
        if let Some(b) = f(p)? {
            return Ok(b);
        }
        if p >= MAX_PRECISION {
            return Err(Error::Indeterminate(what.to_string()));
        }
        p *= 2;
    }
}

/// Exact test of `c * q^r` against `d` for positive rationals `c`, `d` and
/// rational `r`, when the integer powers involved stay below `max_bits`.
/// Returns `None` if the exact route is too expensive.
pub fn exact_power_cmp(
    c: &BigRational,
    q: &BigUint,
    r: &BigRational,
    d: &BigRational,
    max_bits: u64,
) -> Option<std::cmp::Ordering> {
    // c * q^(a/b) vs d  <=>  c^b * q^a vs d^b  (b > 0), a may be negative.
    let a = r.numer().clone();
    let b = r.denom().clone();
    let b_u = b.to_u32()?;
    let a_abs = a.abs().to_u32()?;
    let est = (q.bits() * a_abs as u64)
        .max(c.numer().bits().max(c.denom().bits()) * b_u as u64)
        .max(d.numer().bits().max(d.denom().bits()) * b_u as u64);
    if est > max_bits {
        return None;
    }
    let qa = BigRational::from_integer(BigInt::from(num_traits::pow(q.clone(), a_abs as usize)));
    let qa = if a.is_negative() { qa.recip() } else { qa };
    let lhs = num_traits::pow(c.clone(), b_u as usize) * qa;
    let rhs = num_traits::pow(d.clone(), b_u as usize);
    Some(lhs.cmp(&rhs))
}

/// Certified ordering of `c * q^r` against `d` for positive rationals `c`,
/// `d`, rational `r` and an integer `q >= 1`: interval evaluation with
/// widening, then the exact integer comparison (the only route that can
/// certify equality).
pub fn power_cmp(c: &BigRational, q: &BigUint, r: &BigRational, d: &BigRational) -> Result<std::cmp::Ordering> {
    use std::cmp::Ordering;
    let mut p = START_PRECISION;
    while p <= 4096 {
        let lhs = ln_rational(c, p)?.add(&ln_int(q, p)?.mul_rational(r));
        let rhs = ln_rational(d, p)?;
        if lhs.lt(&rhs) == Some(true) {
            return Ok(Ordering::Less);
        }
        if rhs.lt(&lhs) == Some(true) {
            return Ok(Ordering::Greater);
        }
        p *= 2;
    }
    exact_power_cmp(c, q, r, d, 1 << 24).ok_or_else(|| Error::Indeterminate(format!("{c} * {q}^({r}) against {d}")))
}

/// Certified `c * q^r < d`.
pub fn power_lt(c: &BigRational, q: &BigUint, r: &BigRational, d: &BigRational) -> Result<bool> {
    Ok(power_cmp(c, q, r, d)? == std::cmp::Ordering::Less)
}

/// Certified `c * q^r > d`.
pub fn power_gt(c: &BigRational, q: &BigUint, r: &BigRational, d: &BigRational) -> Result<bool> {
    Ok(power_cmp(c, q, r, d)? == std::cmp::Ordering::Greater)
}

/// Certified `floor(c * q^r)` for a positive rational `c`, an integer
/// `q >= 1` and a rational `r >= 0`.
pub fn floor_power(c: &BigRational, q: &BigUint, r: &BigRational) -> Result<BigUint> {
    if !c.is_positive() || r.is_negative() || q.is_zero() {
        return Err(Error::Invariant("floor_power needs c > 0, r >= 0, q >= 1".into()));
    }
    let a = r.numer().to_u64();
    let b = r.denom().to_u32();
    if let (Some(a), Some(b)) = (a, b) {
        let c_bits = c.numer().bits().max(c.denom().bits());
        let est = q.bits().saturating_mul(a).saturating_add(c_bits.saturating_mul(b as u64));
        if est <= 1 << 24 {
            // floor(y) = floor(floor(y^b)^(1/b)) for y >= 0
            let num = c.numer().to_biguint().unwrap().pow(b) * q.pow(a as u32);
            let den = c.denom().to_biguint().unwrap().pow(b);
            return Ok((num / den).nth_root(b));
        }
    }
    let est_bits = (ln_int(q, 64)?.hi_f64() * r.to_f64().unwrap_or(f64::INFINITY)
        + ln_rational(c, 64)?.hi_f64())
        / std::f64::consts::LN_2;
    let mut p = START_PRECISION.max((est_bits.max(0.0) as u32).saturating_add(64));
    loop {
        let y = ln_rational(c, p)?.add(&ln_int(q, p)?.mul_rational(r)).exp()?;
        if let Some(v) = y.floor() {
            return v
                .to_biguint()
                .ok_or_else(|| Error::Invariant("negative floor of a positive power".into()));
        }
        if p >= MAX_PRECISION {
            return Err(Error::Indeterminate(format!("floor({c} * {q}^({r}))")));
        }
        p = (p * 2).min(MAX_PRECISION);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn contains_f64(i: &Interval, x: f64) -> bool {
        i.lo_f64() <= x && x <= i.hi_f64()
    }

    #[test]
    fn ln_encloses_reference_values() {
        for (n, v) in [(2u32, 2f64.ln()), (10, 10f64.ln()), (34, 34f64.ln()), (1, 0.0)] {
            let i = ln_int(&BigUint::from(n), 128).unwrap();
            assert!(contains_f64(&i, v), "ln({n})");
            assert!(i.width_ulps() < BigInt::from(1u64 << 20));
        }
    }

    #[test]
    fn exp_encloses_reference_values() {
        for x in [-3.5, -0.25, 0.0, 0.5, 1.0, 7.25, 40.0] {
            let i = Interval::from_f64(x, 128).exp().unwrap();
            let e = x.exp();
            assert!(i.lo_f64() <= e * (1.0 + 1e-15) && e * (1.0 - 1e-15) <= i.hi_f64(), "exp({x})");
        }
    }

    #[test]
    fn exp_of_ln_is_tight_around_integer() {
        let n = BigUint::from(123_456_789u64);
        let back = ln_int(&n, 192).unwrap().exp().unwrap();
        assert!(back.contains_rational(&BigRational::from_integer(BigInt::from(n.clone()))));
        assert_eq!(back.floor(), None); // exactly an integer: cannot be separated
        assert!(back.width_ulps().bits() < 192 - 100);
    }

    #[test]
    fn power_comparison_matches_hand_values() {
        // 34^1.2 ~ 68.8 and 89^1.2 ~ 218.4
        let zeta = BigRational::from_float(1.2).unwrap();
        let p = 128;
        let pow34 = ln_int(&BigUint::from(34u32), p).unwrap().mul_rational(&zeta);
        assert_eq!(ln_int(&BigUint::from(89u32), p).unwrap().lt(&pow34), Some(false));
        assert_eq!(ln_int(&BigUint::from(55u32), p).unwrap().lt(&pow34), Some(true));
        let pow89 = ln_int(&BigUint::from(89u32), p).unwrap().mul_rational(&zeta);
        assert_eq!(ln_int(&BigUint::from(233u32), p).unwrap().lt(&pow89), Some(false));
        assert_eq!(ln_int(&BigUint::from(144u32), p).unwrap().lt(&pow89), Some(true));
    }

    #[test]
    fn ln_of_huge_integer_is_narrow() {
        let n = (BigUint::from(7u32) << 100_000u32) + 1u32;
        let i = ln_int(&n, 128).unwrap();
        let v = 7f64.ln() + 100_000.0 * std::f64::consts::LN_2;
        assert!((i.lo_f64() - v).abs() < 1e-9);
        assert!(i.width_ulps().bits() < 40);
    }

    #[test]
    fn decide_refines_until_separated() {
        // 2^(1/2) < 1.41421356237309515 (just above sqrt 2 in f64)
        let half = BigRational::new(1.into(), 2.into());
        let bound = BigRational::from_float(1.4142135623730951).unwrap();
        let ans = decide("sqrt2", |p| {
            let lhs = ln_int(&BigUint::from(2u32), p)?.mul_rational(&half);
            Ok(lhs.lt(&ln_rational(&bound, p)?))
        })
        .unwrap();
        assert!(ans);
    }

    #[test]
    fn power_lt_handles_exact_ties() {
        let one = BigRational::one();
        let r = BigRational::new(5.into(), 4.into());
        let d = BigRational::from_integer(32.into());
        assert!(!power_lt(&one, &BigUint::from(16u32), &r, &d).unwrap());
        let d = BigRational::from_integer(33.into());
        assert!(power_lt(&one, &BigUint::from(16u32), &r, &d).unwrap());
        let d = BigRational::from_integer(32.into());
        assert!(!power_gt(&one, &BigUint::from(16u32), &r, &d).unwrap());
        assert_eq!(power_cmp(&one, &BigUint::from(16u32), &r, &d).unwrap(), std::cmp::Ordering::Equal);
    }

    #[test]
    fn floor_power_matches_exact_and_interval_routes() {
        let c = BigRational::from_integer(2.into());
        let r = BigRational::new(5.into(), 4.into());
        // 2 * 89^(5/4) = 546.72...
        assert_eq!(floor_power(&c, &BigUint::from(89u32), &r).unwrap(), BigUint::from(546u32));
        // 16^(5/4) = 32 exactly
        assert_eq!(
            floor_power(&BigRational::one(), &BigUint::from(16u32), &r).unwrap(),
            BigUint::from(32u32)
        );
        // huge denominator forces the interval route
        let r = BigRational::new(BigInt::from(5u64 << 40) + 1, BigInt::from(4u64 << 40));
        let v = floor_power(&BigRational::one(), &BigUint::from(16u32), &r).unwrap();
        assert_eq!(v, BigUint::from(32u32));
    }

    #[test]
    fn exact_power_cmp_detects_equality() {
        let one = BigRational::one();
        let r = BigRational::new(5.into(), 4.into());
        let d = BigRational::from_integer(32.into());
        assert_eq!(
            exact_power_cmp(&one, &BigUint::from(16u32), &r, &d, 1 << 16),
            Some(std::cmp::Ordering::Equal)
        );
    }
}
