//! Exact rational arithmetic helpers.
//!
//! All symbolic paths in this crate use arbitrary-precision rationals; floats
//! appear only in the numeric oracle.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

/// Exact rational scalar used by every symbolic computation.
pub type Q = num_rational::BigRational;

pub fn q_int(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

pub fn q_big(v: BigInt) -> Q {
    Q::from_integer(v)
}

pub fn q_ratio(num: i64, den: i64) -> Q {
    Q::new(BigInt::from(num), BigInt::from(den))
}

pub fn is_zero(v: &Q) -> bool {
    v.is_zero()
}

/// Renders a rational as `p` or `p/q`, suitable for reports and golden files.
pub fn q_display(v: &Q) -> String {
    if v.denom().is_one() {
        v.numer().to_string()
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

/// Parses the `integer[/positive-integer]` form accepted by the expression
/// grammar.
pub fn q_parse(text: &str) -> Option<Q> {
    let (num, den) = match text.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (text.trim(), "1"),
    };
    let num: BigInt = num.parse().ok()?;
    let den: BigInt = den.parse().ok()?;
    if den.is_positive() {
        Some(Q::new(num, den))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["3/2", "-7", "0", "22/7"] {
            let v = q_parse(s).unwrap();
            assert_eq!(q_display(&v), s);
        }
        assert!(q_parse("1/0").is_none());
        assert!(q_parse("1/-2").is_none());
    }
}
