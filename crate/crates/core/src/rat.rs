//! Exact rational coefficient arithmetic.
//!
//! All coefficients in the engine are arbitrary-precision rationals;
//! floating point never enters the core.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Arbitrary-precision rational number, always stored reduced with a
/// positive denominator.
pub type Rat = BigRational;

/// Rational from an integer.
pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Rational `n/d`. Panics if `d == 0`.
pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Binomial coefficient `C(k, j)` for arbitrary integer `k` and `j >= 0`.
///
/// For `k < 0` this is the generalized binomial coefficient
/// `k (k-1) ... (k-j+1) / j!`, which is always an integer.
pub fn binomial(k: i64, j: u32) -> Rat {
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for t in 0..j as i64 {
        num *= BigInt::from(k - t);
        den *= BigInt::from(t + 1);
    }
    Rat::new(num, den)
}

/// True if the rational is an integer.
pub fn is_integer(r: &Rat) -> bool {
    r.denom().is_one()
}

/// Extract `r` as an `i64` if it is a small integer.
pub fn to_i64(r: &Rat) -> Option<i64> {
    if !is_integer(r) {
        return None;
    }
    let n = r.numer();
    if n.abs() > BigInt::from(i64::MAX) {
        return None;
    }
    let (sign, digits) = n.to_u64_digits();
    let mag = *digits.first().unwrap_or(&0) as i64;
    Some(match sign {
        num_bigint::Sign::Minus => -mag,
        _ => mag,
    })
}

/// Parse a rational written as `a` or `a/b`.
pub fn parse_rat(text: &str) -> Option<Rat> {
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        Some(Rat::new(n, d))
    } else {
        let n: BigInt = text.parse().ok()?;
        Some(Rat::from_integer(n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generalized_binomials_are_integral() {
        // C(-1, j) = (-1)^j, C(-2, j) = (-1)^j (j+1)
        for j in 0..8u32 {
            assert_eq!(binomial(-1, j), rat_int(if j % 2 == 0 { 1 } else { -1 }));
            let want = (j as i64 + 1) * if j % 2 == 0 { 1 } else { -1 };
            assert_eq!(binomial(-2, j), rat_int(want));
        }
        assert_eq!(binomial(3, 2), rat_int(3));
        assert_eq!(binomial(3, 5), rat_int(0));
    }

    #[test]
    fn parse_roundtrip() {
        assert_eq!(parse_rat("3/2"), Some(rat(3, 2)));
        assert_eq!(parse_rat("-7"), Some(rat_int(-7)));
        assert_eq!(parse_rat("1/0"), None);
    }
}
