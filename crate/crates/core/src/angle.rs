//! Exact fixed-point angles on the circle `R/Z` and orbits `theta + j alpha`.

use crate::error::{Error, Result};
use crate::freq::Frequency;
use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

pub const DEFAULT_PRECISION_BITS: u32 = 192;

/// Guard bits required on top of `log2 N` for an orbit of length `N`.
pub const GUARD_BITS: u32 = 64;

/// `numerator / 2^precision_bits` with `0 <= numerator < 2^precision_bits`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixedPointAngle {
    #[serde(with = "crate::bigutil::dec")]
    numerator: BigUint,
    precision_bits: u32,
}

impl FixedPointAngle {
    pub fn new(numerator: BigUint, precision_bits: u32) -> Result<Self> {
        if numerator.bits() > precision_bits as u64 {
            return Err(Error::input(format!(
                "angle numerator needs {} bits but precision is {precision_bits}",
                numerator.bits()
            )));
        }
        Ok(FixedPointAngle {
            numerator,
            precision_bits,
        })
    }

    pub fn zero(precision_bits: u32) -> Self {
        FixedPointAngle {
            numerator: BigUint::zero(),
            precision_bits,
        }
    }

    /// The exact dyadic `i / 2^log2_k`.
    pub fn dyadic(i: u64, log2_k: u32, precision_bits: u32) -> Result<Self> {
        if log2_k > precision_bits || (log2_k < 64 && i >> log2_k != 0) {
            return Err(Error::input(format!(
                "grid point {i}/2^{log2_k} is not an angle at {precision_bits} bits"
            )));
        }
        Self::new(BigUint::from(i) << (precision_bits - log2_k), precision_bits)
    }

    /// Nearest angle below `x mod 1` (exact for dyadic `x`).
    pub fn from_f64(x: f64, precision_bits: u32) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::input("angle must be finite"));
        }
        let frac = x - x.floor();
        // frac is a dyadic with at most 53 significant bits; scale exactly.
        let (mant, exp) = decompose(frac);
        let num = if mant == 0 {
            BigUint::zero()
        } else {
            let shift = precision_bits as i64 + exp;
            if shift >= 0 {
                BigUint::from(mant) << shift as u64
            } else {
                BigUint::from(mant) >> (-shift) as u64
            }
        };
        Self::new(num, precision_bits)
    }

    pub fn numerator(&self) -> &BigUint {
        &self.numerator
    }

    pub fn precision_bits(&self) -> u32 {
        self.precision_bits
    }

    /// Value truncated to 64 fractional bits, then to an `f64` toward zero
    /// (so it always lies in `[0, 1)`).
    pub fn to_f64(&self) -> f64 {
        let p = self.precision_bits as u64;
        let top = if p <= 64 {
            self.numerator.to_u64().unwrap() << (64 - p)
        } else {
            (&self.numerator >> (p - 64)).to_u64().unwrap()
        };
        top64_to_f64(top)
    }

    /// Same value at a larger precision (exact).
    pub fn widen(&self, precision_bits: u32) -> Result<Self> {
        if precision_bits < self.precision_bits {
            return Err(Error::input(format!(
                "cannot narrow a {}-bit angle to {precision_bits} bits exactly",
                self.precision_bits
            )));
        }
        Ok(FixedPointAngle {
            numerator: &self.numerator << (precision_bits - self.precision_bits),
            precision_bits,
        })
    }

    /// `self + other mod 1`; both at the same precision.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.precision_bits != other.precision_bits {
            return Err(Error::input("angle precisions differ"));
        }
        let modulus = BigUint::one() << self.precision_bits;
        Ok(FixedPointAngle {
            numerator: (&self.numerator + &other.numerator) % modulus,
            precision_bits: self.precision_bits,
        })
    }

    /// Distance to `other` on the circle, as an `f64`.
    pub fn circle_distance(&self, other: &Self) -> f64 {
        let p = self.precision_bits.max(other.precision_bits);
        let a = self.widen(p).unwrap().numerator;
        let b = other.widen(p).unwrap().numerator;
        let modulus = BigUint::one() << p;
        let d = if a >= b { &a - &b } else { &b - &a };
        let d = d.clone().min(&modulus - &d);
        FixedPointAngle {
            numerator: d,
            precision_bits: p,
        }
        .to_f64()
    }
}

#[inline]
fn top64_to_f64(t: u64) -> f64 {
    const SCALE: f64 = 1.0 / 18446744073709551616.0;
    let width = 64 - t.leading_zeros();
    if width <= 53 {
        t as f64 * SCALE
    } else {
        let drop = width - 53;
        ((t >> drop) << drop) as f64 * SCALE
    }
}

fn decompose(x: f64) -> (u64, i64) {
    if x == 0.0 {
        return (0, 0);
    }
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    if exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp - 1075)
    }
}

/// Bits required for an orbit of length `n`.
pub fn required_bits(n: u64) -> u32 {
    let log2 = if n <= 1 { 0 } else { 64 - (n - 1).leading_zeros() };
    log2 + GUARD_BITS
}

/// Fixed-point approximant of `alpha` with error below `2^-precision_bits`,
/// built from the first convergent with `q > 2^precision_bits`.
pub fn alpha_approximant(f: &Frequency, precision_bits: u32) -> Result<FixedPointAngle> {
    let bound = BigUint::one() << precision_bits;
    let mut last_q = BigUint::zero();
    for c in f.convergents() {
        if c.q > bound {
            // |alpha - p/q| < 1/(q q') <= 2^-(P+1); rounding adds <= 2^-(P+1).
            let scaled = (c.p << precision_bits) + (&c.q >> 1u32);
            let num = scaled.div_floor(&c.q);
            let num = if num.bits() > precision_bits as u64 { BigUint::zero() } else { num };
            return FixedPointAngle::new(num, precision_bits);
        }
        last_q = c.q;
    }
    Err(Error::Precision {
        reason: format!(
            "frequency '{}' ends at denominator {last_q}, too small to resolve alpha at {precision_bits} bits",
            f.label
        ),
        required_bits: precision_bits as u64,
    })
}

fn check_orbit_precision(n: u64, precision_bits: u32) -> Result<()> {
    let need = required_bits(n);
    if precision_bits < need {
        return Err(Error::Precision {
            reason: format!("orbit of length {n} at {precision_bits} bits"),
            required_bits: need as u64,
        });
    }
    Ok(())
}

/// `theta0 + j alpha mod 1` for `j = 0..n`, by exact integer addition of the
/// fixed-point approximant of `alpha`.
pub fn orbit_angles(
    f: &Frequency,
    theta0: &FixedPointAngle,
    n: u64,
    precision_bits: u32,
) -> Result<Vec<FixedPointAngle>> {
    if n == 0 {
        return Err(Error::input("orbit length must be at least 1"));
    }
    check_orbit_precision(n, precision_bits)?;
    let start = theta0.widen(precision_bits)?;
    if n == 1 {
        return Ok(vec![start]);
    }
    let alpha = alpha_approximant(f, precision_bits)?;
    let mut out = Vec::with_capacity(n as usize);
    let mut cur = start;
    for _ in 0..n {
        let next = cur.add(&alpha)?;
        out.push(std::mem::replace(&mut cur, next));
    }
    Ok(out)
}

/// Allocation-free orbit walker over little-endian limbs, yielding `f64`
/// angles; bit-identical to rounding [`orbit_angles`] entries toward zero.
#[derive(Clone, Debug)]
pub struct OrbitWalker {
    cur: Vec<u64>,
    step: Vec<u64>,
    precision_bits: u32,
    top_mask: u64,
}

fn to_limbs(n: &BigUint, len: usize) -> Vec<u64> {
    let mut v = n.to_u64_digits();
    v.resize(len, 0);
    v
}

impl OrbitWalker {
    /// Walker for an orbit of at most `max_len` points starting at `theta0`.
    pub fn new(alpha: &FixedPointAngle, theta0: &FixedPointAngle, max_len: u64) -> Result<Self> {
        let p = alpha.precision_bits;
        check_orbit_precision(max_len, p)?;
        let start = theta0.widen(p)?;
        let len = (p as usize).div_ceil(64);
        let rem = p % 64;
        Ok(OrbitWalker {
            cur: to_limbs(&start.numerator, len),
            step: to_limbs(&alpha.numerator, len),
            precision_bits: p,
            top_mask: if rem == 0 { u64::MAX } else { (1u64 << rem) - 1 },
        })
    }

    /// Current angle as an `f64` in `[0, 1)`.
    #[inline]
    pub fn value(&self) -> f64 {
        let p = self.precision_bits as usize;
        if p <= 64 {
            return top64_to_f64(self.cur[0] << (64 - p));
        }
        // the 64 bits [p-64, p)
        let lo_bit = p - 64;
        let (w, b) = (lo_bit / 64, lo_bit % 64);
        let top = if b == 0 {
            self.cur[w]
        } else {
            (self.cur[w] >> b) | (self.cur[w + 1] << (64 - b))
        };
        top64_to_f64(top)
    }

    #[inline]
    pub fn advance(&mut self) {
        let mut carry = false;
        for (c, s) in self.cur.iter_mut().zip(&self.step) {
            let (x, o1) = c.overflowing_add(*s);
            let (y, o2) = x.overflowing_add(carry as u64);
            *c = y;
            carry = o1 || o2;
        }
        if let Some(last) = self.cur.last_mut() {
            *last &= self.top_mask;
        }
    }

    pub fn angle(&self) -> FixedPointAngle {
        FixedPointAngle {
            numerator: BigUint::from_slice(
                &self
                    .cur
                    .iter()
                    .flat_map(|&l| [l as u32, (l >> 32) as u32])
                    .collect::<Vec<_>>(),
            ),
            precision_bits: self.precision_bits,
        }
    }
}
