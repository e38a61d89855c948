//! Closed-form coefficients and combinatorial identities, in exact arithmetic.
//!
//! Everything here is a finite formula: factorials, binomials, the
//! normalisation constants `C(w)` and `K(w)`, the multiplicity coefficients
//! `c1..c6` / `u_1..u_27`, the expansion coefficients `d^g_l` and `e^g_l`,
//! and the summation identities that tie them together. Values routinely
//! exceed 64-bit range (the multiplicity checksum reaches `(2w+4)!`), so all
//! integers are arbitrary precision.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::ratio::{q_big, q_int, q_ratio, Q};

pub fn factorial(n: u64) -> BigInt {
    let mut acc = BigInt::one();
    for k in 2..=n {
        acc *= k;
    }
    acc
}

/// `binom(n, k)` with the convention that out-of-range entries are zero.
pub fn binom(n: i64, k: i64) -> BigInt {
    if k < 0 || k > n || n < 0 {
        return BigInt::zero();
    }
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Odd double factorial `(2k-1)!! = (2k)! / (2^k k!)`; the number of perfect
/// matchings of `2k` slots.
pub fn double_factorial_odd(k: u64) -> BigInt {
    let mut acc = BigInt::one();
    let mut m = 1u64;
    for _ in 0..k {
        acc *= m;
        m += 2;
    }
    acc
}

/// `C(w) = (w+1)^2 (w+2)^2 (2w+2)! / ((w+3)!)^2`.
pub fn c_norm(omega: u32) -> Q {
    let w = omega as u64;
    let num = BigInt::from((w + 1) * (w + 1)) * BigInt::from((w + 2) * (w + 2)) * factorial(2 * w + 2);
    let den = factorial(w + 3).pow(2);
    Q::new(num, den)
}

/// `K(w) = (3w+8)(w+1)^2 / ((2w+5) ((w+3)!)^2)`.
pub fn k_norm(omega: u32) -> Q {
    let w = omega as u64;
    let num = BigInt::from(3 * w + 8) * BigInt::from((w + 1) * (w + 1));
    let den = BigInt::from(2 * w + 5) * factorial(w + 3).pow(2);
    Q::new(num, den)
}

/// The six multiplicity building blocks `c1..c6`. `c5` vanishes for
/// `w in {2,3}` and `c6` for `w = 2` (factors `(w-2)`, `(w-3)`).
pub fn c_list(omega: u32) -> [BigInt; 6] {
    let w = i64::from(omega);
    let big = BigInt::from;
    let c1 = big((2 * w + 4) * (2 * w + 2));
    let c2 = 2 * big(w).pow(3) * &c1;
    let c3 = 2 * big(w).pow(2) * big(w - 1) * &c1;
    let c4 = 4 * big(w).pow(3) * big(w - 1).pow(3) * &c1;
    let c5 = 4 * big(w).pow(2) * big(w - 1).pow(2) * big((w - 2) * (w - 3)) * &c1;
    let c6 = 4 * big(w).pow(3) * big(w - 1).pow(2) * big(w - 2) * &c1;
    [c1, c2, c3, c4, c5, c6]
}

/// Row multiplicities `u_1..u_27` expressed over `c1..c6`.
pub fn u_list(omega: u32) -> [BigInt; 27] {
    let [c1, c2, c3, c4, c5, c6] = c_list(omega);
    let d = |x: &BigInt| BigInt::from(2) * x;
    [
        c1.clone(),
        d(&c2),
        d(&c3),
        d(&c2),
        d(&c3),
        c1.clone(),
        c2.clone(),
        d(&c3),
        c2.clone(),
        c1.clone(),
        d(&c2),
        d(&c3),
        d(&c2),
        d(&c3),
        d(&c3),
        c2.clone(),
        c2.clone(),
        c4.clone(),
        d(&c5),
        d(&c6),
        d(&c6),
        d(&c6),
        d(&c6),
        c4.clone(),
        c4.clone(),
        d(&c4),
        c4.clone(),
    ]
}

/// Multiplicity checksum: the weighted sum of the `u_k` against the sizes of
/// each row's residual symmetrisation must recover `(2w+4)!`.
pub fn checksum(omega: u32) -> (BigInt, BigInt) {
    assert!(omega >= 2, "checksum needs omega >= 2");
    let w = omega as u64;
    let u = u_list(omega);
    let wide: BigInt = [0usize, 5, 9].iter().map(|&k| &u[k]).sum();
    let mid: BigInt = (1..17).filter(|&k| k != 5 && k != 9).map(|k| &u[k]).sum();
    let narrow: BigInt = (17..27).map(|k| &u[k]).sum();
    let lhs = factorial(2 * w) * wide + factorial(2 * w - 2) * mid + factorial(2 * w - 4) * narrow;
    (lhs, factorial(2 * w + 4))
}

/// `d^g_l = 2^(g-2l) (g!)^3 / ((g-2l)! (l!)^2)`; zero when `g - 2l < 0`.
pub fn d_coeff(gamma: u32, ell: u32) -> Q {
    if 2 * ell > gamma {
        return Q::zero();
    }
    let g = gamma as u64;
    let l = ell as u64;
    let num = BigInt::from(2).pow((g - 2 * l) as u32) * factorial(g).pow(3);
    let den = factorial(g - 2 * l) * factorial(l).pow(2);
    Q::new(num, den)
}

/// `e^g_l = 2^(g-2l-2) g! (g-1)! (g-2)! / ((g-2l-2)! (l+1)! l!)`; zero when
/// `g - 2l - 2 < 0`.
pub fn e_coeff(gamma: u32, ell: u32) -> Q {
    if gamma < 2 || 2 * ell + 2 > gamma {
        return Q::zero();
    }
    let g = gamma as u64;
    let l = ell as u64;
    let num = BigInt::from(2).pow((g - 2 * l - 2) as u32) * factorial(g) * factorial(g - 1) * factorial(g - 2);
    let den = factorial(g - 2 * l - 2) * factorial(l + 1) * factorial(l);
    Q::new(num, den)
}

/// All closed-form coefficients for one `w`, as used by the verifiers.
#[derive(Debug, Clone)]
pub struct CoeffTable {
    pub omega: u32,
    pub c_norm: Q,
    pub k_norm: Q,
    pub c: [BigInt; 6],
    pub u: [BigInt; 27],
    /// `d^g_l` for `0 <= g <= omega`.
    pub d: BTreeMap<(u32, u32), Q>,
    /// `e^g_l` for `2 <= g <= omega`.
    pub e: BTreeMap<(u32, u32), Q>,
}

pub fn coeffs(omega: u32) -> CoeffTable {
    assert!(omega >= 1, "coeffs needs omega >= 1");
    let mut d = BTreeMap::new();
    let mut e = BTreeMap::new();
    for gamma in 0..=omega {
        for ell in 0..=(gamma / 2) {
            d.insert((gamma, ell), d_coeff(gamma, ell));
        }
        for ell in 0..=(gamma.saturating_sub(2) / 2) {
            if gamma >= 2 {
                e.insert((gamma, ell), e_coeff(gamma, ell));
            }
        }
    }
    CoeffTable {
        omega,
        c_norm: c_norm(omega),
        k_norm: k_norm(omega),
        c: c_list(omega),
        u: u_list(omega),
        d,
        e,
    }
}

/// `(w+2) sum_{k=w}^{2w} (k+1) binom(k,w)` versus `(w+3)^2 C(w)`.
pub fn comb1(omega: u32) -> (Q, Q) {
    let w = omega as i64;
    let sum: BigInt = (w..=2 * w).map(|k| BigInt::from(k + 1) * binom(k, w)).sum();
    let lhs = q_big(BigInt::from(w + 2) * sum);
    let rhs = q_int((w + 3) * (w + 3)) * c_norm(omega);
    (lhs, rhs)
}

/// `(w+2) sum_{k=w}^{2w-1} (k+1)(2w-k) binom(k,w)` versus `w(w+3) C(w)`.
pub fn comb2(omega: u32) -> (Q, Q) {
    let w = omega as i64;
    let sum: BigInt = (w..=2 * w - 1)
        .map(|k| BigInt::from(k + 1) * BigInt::from(2 * w - k) * binom(k, w))
        .sum();
    let lhs = q_big(BigInt::from(w + 2) * sum);
    let rhs = q_int(w * (w + 3)) * c_norm(omega);
    (lhs, rhs)
}

/// `sum_{k=w}^{n-1} binom(k,w) = binom(n,w+1)`.
pub fn comb4_first(omega: u32, n: u32) -> (BigInt, BigInt) {
    let (w, n) = (omega as i64, n as i64);
    let lhs: BigInt = (w..=n - 1).map(|k| binom(k, w)).sum();
    (lhs, binom(n, w + 1))
}

/// `sum_{k=w}^{n-2} (n-k-1) binom(k,w) = binom(n,w+2)`.
pub fn comb4_second(omega: u32, n: u32) -> (BigInt, BigInt) {
    let (w, n) = (omega as i64, n as i64);
    let lhs: BigInt = (w..=n - 2).map(|k| BigInt::from(n - k - 1) * binom(k, w)).sum();
    (lhs, binom(n, w + 2))
}

/// The scalar-term bookkeeping identity
/// `2(w+2)[1 + 1/2 sum_{k=w+1}^{2w+2} (1 + w delta_{k,w+1})] = 2(w+2)^2`.
pub fn s1_coefficient(omega: u32) -> (Q, Q) {
    let w = omega as i64;
    let mut inner = q_int(0);
    for k in (w + 1)..=(2 * w + 2) {
        let weight = if k == w + 1 { 1 + w } else { 1 };
        inner += q_int(weight);
    }
    let lhs = q_int(2 * (w + 2)) * (q_int(1) + q_ratio(1, 2) * inner);
    let rhs = q_int(2 * (w + 2) * (w + 2));
    (lhs, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::q_ratio;

    #[test]
    fn factorials_and_binomials() {
        assert_eq!(factorial(0), BigInt::from(1));
        assert_eq!(factorial(8), BigInt::from(40320));
        assert_eq!(binom(5, 3), BigInt::from(10));
        assert_eq!(binom(3, 5), BigInt::from(0));
        assert_eq!(binom(6, 0), BigInt::from(1));
        assert_eq!(double_factorial_odd(5), BigInt::from(945));
    }

    #[test]
    fn normalisation_constants() {
        assert_eq!(c_norm(1), q_ratio(3, 2));
        assert_eq!(c_norm(2), q_ratio(36, 5));
        // K(1) = 11*4 / (7 * 24^2)
        assert_eq!(k_norm(1), q_ratio(44, 4032));
    }

    #[test]
    fn c_list_omega_2() {
        let c = c_list(2);
        let want = [48i64, 768, 384, 1536, 0, 0];
        for (got, want) in c.iter().zip(want) {
            assert_eq!(*got, BigInt::from(want));
        }
        // (w-2)/(w-3) factors keep vanishing where expected
        assert_eq!(c_list(3)[4], BigInt::from(0));
        assert!(c_list(4)[4] > BigInt::from(0));
    }

    #[test]
    fn checksum_small_omegas() {
        let (lhs, rhs) = checksum(2);
        assert_eq!(lhs, BigInt::from(40320));
        assert_eq!(lhs, rhs);
        let (lhs, rhs) = checksum(3);
        assert_eq!(lhs, factorial(10));
        assert_eq!(lhs, rhs);
        let (lhs, rhs) = checksum(4);
        assert_eq!(lhs, factorial(12));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn d_and_e_spot_values() {
        assert_eq!(d_coeff(0, 0), q_int(1));
        assert_eq!(d_coeff(2, 1), q_int(8));
        assert_eq!(d_coeff(4, 1), q_int(27648));
        assert_eq!(d_coeff(2, 2), q_int(0));
        // e^2_0 = 2, so T^0_1 = 2 T_1
        assert_eq!(e_coeff(2, 0), q_int(2));
        assert_eq!(e_coeff(3, 1), q_int(0));
    }

    #[test]
    fn d_e_positive_in_range() {
        for gamma in 0..=12u32 {
            for ell in 0..=(gamma / 2) {
                assert!(d_coeff(gamma, ell) > q_int(0), "d^{gamma}_{ell}");
            }
            for ell in 0..=(gamma.saturating_sub(2) / 2) {
                if gamma >= 2 {
                    assert!(e_coeff(gamma, ell) > q_int(0), "e^{gamma}_{ell}");
                }
            }
        }
    }

    #[test]
    fn comb_identities_spot() {
        let (lhs, rhs) = comb1(2);
        assert_eq!(lhs, q_int(180));
        assert_eq!(lhs, rhs);
        let (lhs, rhs) = comb2(2);
        assert_eq!(lhs, q_int(72));
        assert_eq!(lhs, rhs);
        let (lhs, rhs) = comb4_first(2, 5);
        assert_eq!(lhs, BigInt::from(10));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn s1_coefficient_identity() {
        for omega in 1..=12 {
            let (lhs, rhs) = s1_coefficient(omega);
            assert_eq!(lhs, rhs, "omega = {omega}");
        }
    }

    #[test]
    fn q_int_is_q_bigint() {
        assert_eq!(q_big(BigInt::from(7)), q_int(7));
    }
}
