//! Small helpers around `num-bigint`: floating logarithms of huge integers,
//! decimal-string serde adapters and fixed-width float formatting.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::ToPrimitive;
use std::f64::consts::LN_2;

/// Natural log of a positive big integer as an `f64`, valid far beyond the
/// `f64` range (only the leading 64 bits are used).
pub fn ln_biguint(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 64 {
        return n.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    let top: BigUint = n >> shift;
    top.to_f64().unwrap_or(f64::INFINITY).ln() + shift as f64 * LN_2
}

/// Largest integer `X` with `X <= e^y` up to a relative safety margin of
/// about 2^-40; `y` is a plain `f64`. Used where only a near-extremal lower
/// bound for `e^y` is needed and the bound is certified separately.
pub fn exp_floor_approx(y: f64) -> BigUint {
    if y < 0.0 {
        return BigUint::from(0u32);
    }
    let safe = y - (y.abs() * 4.0 * f64::EPSILON + 1e-12);
    let log2 = safe / LN_2;
    let k = log2.floor();
    if k < 52.0 {
        return BigUint::from(safe.exp().floor().max(0.0) as u64);
    }
    // e^safe = 2^(k-52) * (2^(frac) * 2^52)
    let frac = log2 - k;
    let mant = (frac.exp2() * (1u64 << 52) as f64 * (1.0 - 1e-12)).floor() as u64;
    BigUint::from(mant) << (k as u64 - 52)
}

/// The rational with the shortest decimal expansion that round-trips to `x`
/// (so `0.1` becomes `1/10`, not the nearest dyadic).
pub fn decimal_rational(x: f64) -> Option<BigRational> {
    if !x.is_finite() {
        return None;
    }
    let text = format!("{:e}", x);
    let (mant, exp) = text.split_once('e')?;
    let exp: i64 = exp.parse().ok()?;
    let negative = mant.starts_with('-');
    let mant = mant.trim_start_matches('-');
    let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
    let digits = BigInt::parse_bytes(format!("{int}{frac}").as_bytes(), 10)?;
    let scale = exp - frac.len() as i64;
    let ten = BigInt::from(10u32);
    let mut r = if scale >= 0 {
        BigRational::from_integer(digits * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(digits, num_traits::pow(ten, (-scale) as usize))
    };
    if negative {
        r = -r;
    }
    Some(r)
}

/// Render a float with 17 significant digits, the CSV convention of the crate.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// Serde adapters writing big integers as decimal strings.
pub mod dec {
    use super::*;
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(n: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&n.to_str_radix(10))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let text = String::deserialize(d)?;
        BigUint::parse_bytes(text.as_bytes(), 10)
            .ok_or_else(|| D::Error::custom(format!("invalid decimal integer {text:?}")))
    }

    pub mod opt {
        use super::*;

        pub fn serialize<S: Serializer>(n: &Option<BigUint>, s: S) -> Result<S::Ok, S::Error> {
            match n {
                Some(n) => s.serialize_some(&n.to_str_radix(10)),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BigUint>, D::Error> {
            let text = Option::<String>::deserialize(d)?;
            text.map(|t| {
                BigUint::parse_bytes(t.as_bytes(), 10)
                    .ok_or_else(|| D::Error::custom(format!("invalid decimal integer {t:?}")))
            })
            .transpose()
        }
    }

    pub mod signed {
        use super::*;

        pub fn serialize<S: Serializer>(n: &BigInt, s: S) -> Result<S::Ok, S::Error> {
            s.serialize_str(&n.to_str_radix(10))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
            let text = String::deserialize(d)?;
            BigInt::parse_bytes(text.as_bytes(), 10)
                .ok_or_else(|| D::Error::custom(format!("invalid decimal integer {text:?}")))
        }
    }
}

/// Serde adapter writing rationals as `"num/den"` strings.
pub mod rational {
    use num_rational::BigRational;
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let text = String::deserialize(d)?;
        text.parse::<BigRational>()
            .map_err(|_| D::Error::custom(format!("invalid rational {text:?}")))
    }
}

/// Serde adapter for floats that may be non-finite (written as strings).
pub mod float {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_str(&x.to_string())
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}
