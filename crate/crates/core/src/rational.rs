//! Exact rational arithmetic helpers.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};

/// The probability/score scalar used throughout the crate.
pub type Q = BigRational;

/// `numer / denom` as an exact rational.
pub fn q(numer: i64, denom: i64) -> Q {
    Q::new(BigInt::from(numer), BigInt::from(denom))
}

/// Integer as an exact rational.
pub fn qi(value: i64) -> Q {
    Q::from_integer(BigInt::from(value))
}

/// Rational to `f64`, for reports and Monte Carlo comparisons only.
pub fn qf(value: &Q) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// Parses `"p/q"`, decimal (`"0.25"`) and integer (`"3"`) literals exactly.
pub fn parse_q(text: &str) -> Option<Q> {
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Q::new(n, d));
    }
    if let Some((int, frac)) = text.split_once('.') {
        let sign = if int.trim_start().starts_with('-') { -1 } else { 1 };
        let int: BigInt = if int.is_empty() || int == "-" { BigInt::zero() } else { int.parse().ok()? };
        if frac.is_empty() {
            return Some(Q::from_integer(int));
        }
        if !frac.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let scale = num::pow::pow(BigInt::from(10), frac.len());
        let frac: BigInt = frac.parse().ok()?;
        return Some(Q::new(int.magnitude().clone().into(), BigInt::one()) * BigInt::from(sign)
            + Q::new(frac, scale.clone()) * BigInt::from(sign));
    }
    let n: BigInt = text.parse().ok()?;
    Some(Q::from_integer(n))
}

/// Renders a rational as `p/q` (or plain integer) for reports.
pub fn render_q(value: &Q) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

/// Binomial coefficient as an exact rational.
pub fn binomial(n: usize, k: usize) -> Q {
    if k > n {
        return Q::zero();
    }
    let mut result = BigInt::one();
    let k = k.min(n - k);
    for i in 0..k {
        result = result * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    Q::from_integer(result)
}

/// Absolute value.
pub fn qabs(value: &Q) -> Q {
    value.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fraction_decimal_integer() {
        assert_eq!(parse_q("1/3").unwrap(), q(1, 3));
        assert_eq!(parse_q("0.25").unwrap(), q(1, 4));
        assert_eq!(parse_q("-0.5").unwrap(), q(-1, 2));
        assert_eq!(parse_q("3").unwrap(), qi(3));
        assert_eq!(parse_q("-2/4").unwrap(), q(-1, 2));
        assert!(parse_q("1/0").is_none());
        assert!(parse_q("abc").is_none());
    }

    #[test]
    fn binomial_matches_pascal() {
        assert_eq!(binomial(5, 2), qi(10));
        assert_eq!(binomial(6, 0), qi(1));
        assert_eq!(binomial(4, 5), qi(0));
        for n in 1..10usize {
            for k in 1..n {
                assert_eq!(binomial(n, k), binomial(n - 1, k - 1) + binomial(n - 1, k));
            }
        }
    }

    #[test]
    fn renders_round_trip() {
        for value in [q(1, 3), qi(7), q(-5, 8)] {
            assert_eq!(parse_q(&render_q(&value)).unwrap(), value);
        }
    }
}
