//! Exact rational helpers: parsing, logarithms of big rationals and the
//! `{num, den}` JSON representation shared by every file format.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Largest denominator produced when a decimal literal has to be approximated.
pub const MAX_DECIMAL_DENOMINATOR: u64 = 1_000_000_000;

pub fn ratio(num: i64, den: i64) -> Rational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

/// Exact conversion of a finite float (every finite f64 is a dyadic rational).
pub fn from_f64(x: f64) -> Result<Rational> {
    BigRational::from_float(x).ok_or_else(|| Error::InvalidParams(format!("non-finite value {x}")))
}

pub fn to_f64(q: &Rational) -> f64 {
    if let Some(v) = q.to_f64() {
        if v.is_finite() && (v != 0.0 || q.is_zero()) {
            return v;
        }
    }
    let sign = if q.is_negative() { -1.0 } else { 1.0 };
    sign * ln_rational(&q.abs()).exp()
}

/// Natural logarithm of a positive big integer, accurate to f64 precision
/// regardless of magnitude.
pub fn ln_bigint(n: &BigInt) -> f64 {
    assert!(n.is_positive(), "logarithm of a non-positive integer");
    let bits = n.bits();
    if bits <= 1000 {
        if let Some(v) = n.to_f64() {
            return v.ln();
        }
    }
    let shift = bits - 64;
    let top: BigInt = n >> shift;
    top.to_f64().expect("64-bit prefix").ln() + shift as f64 * std::f64::consts::LN_2
}

/// Natural logarithm of a positive rational.
pub fn ln_rational(q: &Rational) -> f64 {
    assert!(q.is_positive(), "logarithm of a non-positive rational");
    if q.is_one() {
        return 0.0;
    }
    ln_bigint(q.numer()) - ln_bigint(q.denom())
}

/// `log_base(q)` for positive rationals `q` and `base != 1`.
pub fn log_rational(q: &Rational, base: &Rational) -> f64 {
    ln_rational(q) / ln_rational(base)
}

pub fn pow(q: &Rational, exp: u64) -> Rational {
    num_traits::pow(q.clone(), exp as usize)
}

/// Outcome of parsing a rational literal from the command line or a file.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedRational {
    pub value: Rational,
    /// False when a decimal literal needed more precision than the denominator cap.
    pub exact: bool,
}

/// Parses `num/den`, an integer, or a decimal literal.
///
/// Decimals are read exactly when the reduced denominator fits under
/// [`MAX_DECIMAL_DENOMINATOR`]; otherwise the best approximation with a bounded
/// denominator is returned and flagged inexact.
pub fn parse_rational(text: &str) -> Result<ParsedRational> {
    let s = text.trim();
    let bad = || Error::Parse(format!("not a rational number: {text:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let num: BigInt = n.trim().parse().map_err(|_| bad())?;
        let den: BigInt = d.trim().parse().map_err(|_| bad())?;
        if den.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {text:?}")));
        }
        return Ok(ParsedRational { value: BigRational::new(num, den), exact: true });
    }
    if let Ok(n) = s.parse::<BigInt>() {
        return Ok(ParsedRational { value: BigRational::from_integer(n), exact: true });
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if frac_part.chars().any(|c| !c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let digits = if digits == "-" || digits == "+" || digits.is_empty() { return Err(bad()) } else { digits };
    let num: BigInt = digits.parse().map_err(|_| bad())?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let exact = if scale >= 0 {
        BigRational::from_integer(num * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(num, num_traits::pow(ten, (-scale) as usize))
    };
    let cap = BigInt::from(MAX_DECIMAL_DENOMINATOR);
    if exact.denom() <= &cap {
        return Ok(ParsedRational { value: exact, exact: true });
    }
    Ok(ParsedRational { value: best_approximation(&exact, &cap), exact: false })
}

/// Best rational approximation with denominator at most `cap`, via continued
/// fraction convergents and the final semiconvergent.
pub fn best_approximation(x: &Rational, cap: &BigInt) -> Rational {
    if x.denom() <= cap {
        return x.clone();
    }
    let (mut p0, mut q0, mut p1, mut q1) = (BigInt::zero(), BigInt::one(), BigInt::one(), BigInt::zero());
    let mut num = x.numer().clone();
    let mut den = x.denom().clone();
    loop {
        let (a, r) = num.div_mod_floor(&den);
        let q2 = &a * &q1 + &q0;
        if &q2 > cap {
            let k = (cap - &q0) / &q1;
            let semi = BigRational::new(&k * &p1 + &p0, &k * &q1 + &q0);
            let conv = BigRational::new(p1.clone(), q1.clone());
            return if (&semi - x).abs() < (&conv - x).abs() { semi } else { conv };
        }
        let p2 = &a * &p1 + &p0;
        p0 = std::mem::replace(&mut p1, p2);
        q0 = std::mem::replace(&mut q1, q2);
        if r.is_zero() {
            return BigRational::new(p1, q1);
        }
        num = std::mem::replace(&mut den, r);
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum IntRepr {
    Small(i64),
    Big(String),
}

impl IntRepr {
    fn from_big(n: &BigInt) -> Self {
        n.to_i64().map(IntRepr::Small).unwrap_or_else(|| IntRepr::Big(n.to_string()))
    }

    fn to_big<E: serde::de::Error>(&self) -> std::result::Result<BigInt, E> {
        match self {
            IntRepr::Small(v) => Ok(BigInt::from(*v)),
            IntRepr::Big(s) => s.parse().map_err(|_| E::custom(format!("bad integer {s:?}"))),
        }
    }
}

/// Wire form `{num, den}`; integers beyond 64 bits travel as decimal strings.
#[derive(Serialize, Deserialize)]
pub struct RationalRepr {
    num: IntRepr,
    den: IntRepr,
}

impl RationalRepr {
    pub fn new(q: &Rational) -> Self {
        RationalRepr { num: IntRepr::from_big(q.numer()), den: IntRepr::from_big(q.denom()) }
    }

    pub fn value<E: serde::de::Error>(&self) -> std::result::Result<Rational, E> {
        let den = self.den.to_big::<E>()?;
        if den.is_zero() {
            return Err(E::custom("zero denominator"));
        }
        Ok(BigRational::new(self.num.to_big::<E>()?, den))
    }
}

/// `#[serde(with = "rational_serde")]` for `Rational` fields.
pub mod rational_serde {
    use super::*;

    pub fn serialize<S: Serializer>(q: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        RationalRepr::new(q).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        RationalRepr::deserialize(d)?.value()
    }
}

/// `#[serde(with = "rational_vec_serde")]` for `Vec<Rational>` fields.
pub mod rational_vec_serde {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
        v.iter().map(RationalRepr::new).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Rational>, D::Error> {
        Vec::<RationalRepr>::deserialize(d)?.iter().map(|r| r.value()).collect()
    }
}
