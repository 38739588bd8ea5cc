//! Exact rational scalars and dense vector helpers.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact scalar, always in lowest terms with a positive denominator.
pub type Rational = BigRational;

/// Dense rational vector.
pub type RVec = Vec<Rational>;

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn frac(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

pub fn rvec(vals: &[i64]) -> RVec {
    vals.iter().map(|&v| int(v)).collect()
}

pub fn zeros(n: usize) -> RVec {
    vec![Rational::zero(); n]
}

pub fn unit(n: usize, i: usize) -> RVec {
    let mut v = zeros(n);
    v[i] = one();
    v
}

/// Parses `"p/q"`, `"p"`, or a finite decimal such as `"-0.25"`.
///
/// Exponent notation and non-finite values are rejected so that float
/// literals cannot sneak into exact inputs.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let t = s.trim();
    let bad = || Error::input(format!("bad rational {s:?}"));
    if t.is_empty() {
        return Err(bad());
    }
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(Error::input(format!("zero denominator in {s:?}")));
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((ip, fp)) = t.split_once('.') {
        if fp.is_empty() || !fp.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let neg = ip.starts_with('-');
        let ip_digits = ip.trim_start_matches(['-', '+']);
        if !ip_digits.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let digits: BigInt = format!("{ip_digits}{fp}").parse().map_err(|_| bad())?;
        let scale = num_traits::pow(BigInt::from(10), fp.len());
        let r = Rational::new(digits, scale);
        return Ok(if neg { -r } else { r });
    }
    let n: BigInt = t.parse().map_err(|_| bad())?;
    Ok(Rational::from_integer(n))
}

pub fn parse_vec(items: &[String]) -> Result<RVec> {
    items.iter().map(|s| parse_rational(s)).collect()
}

/// Canonical `p/q` (or `p`) rendering, inverse of [`parse_rational`].
pub fn fmt_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn fmt_vec(v: &[Rational]) -> Vec<String> {
    v.iter().map(fmt_rational).collect()
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Huge numerators/denominators: scale down through the bit lengths.
        let n = r.numer();
        let d = r.denom();
        let shift = n.bits().max(d.bits()).saturating_sub(1000) as usize;
        let n = (n >> shift).to_f64().unwrap_or(f64::NAN);
        let d = (d >> shift).to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

pub fn vec_to_f64(v: &[Rational]) -> Vec<f64> {
    v.iter().map(to_f64).collect()
}

pub fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(Rational::zero(), |acc, (x, y)| acc + x * y)
}

pub fn add(a: &[Rational], b: &[Rational]) -> RVec {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[Rational], b: &[Rational]) -> RVec {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(c: &Rational, a: &[Rational]) -> RVec {
    a.iter().map(|x| c * x).collect()
}

pub fn neg(a: &[Rational]) -> RVec {
    a.iter().map(|x| -x).collect()
}

pub fn is_zero_vec(a: &[Rational]) -> bool {
    a.iter().all(Zero::is_zero)
}

/// Squared Euclidean norm, exact.
pub fn norm2(a: &[Rational]) -> Rational {
    dot(a, a)
}

pub fn norm_inf(a: &[Rational]) -> Rational {
    a.iter().map(|x| x.abs()).max().unwrap_or_else(Rational::zero)
}

/// `2^-k` as an exact rational.
pub fn pow2_neg(k: u32) -> Rational {
    Rational::new(BigInt::one(), BigInt::one() << k)
}

pub(crate) fn check_dim(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::input(format!(
            "{what}: dimension {got}, expected {want}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rational("3/6").unwrap(), frac(1, 2));
        assert_eq!(parse_rational("-0.25").unwrap(), frac(-1, 4));
        assert_eq!(parse_rational(" 7 ").unwrap(), int(7));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("1e3").is_err());
        assert!(parse_rational("nan").is_err());
        assert!(parse_rational("").is_err());
    }

    #[test]
    fn format_round_trips() {
        for s in ["0", "-3", "22/7", "-1/1024"] {
            assert_eq!(fmt_rational(&parse_rational(s).unwrap()), s);
        }
    }

    #[test]
    fn lowest_terms_invariant() {
        let r = parse_rational("-12/-18").unwrap();
        assert_eq!(r, frac(2, 3));
        assert!(r.denom() > &BigInt::zero());
    }
}
