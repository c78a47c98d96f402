//! Scalar integer helpers: square roots, square tests, modular arithmetic, primes.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Floor of the square root of `n`.
pub fn isqrt_u128(n: u128) -> u128 {
    if n < 2 {
        return n;
    }
    let mut r = (n as f64).sqrt() as u128;
    while r.checked_mul(r).is_none_or(|sq| sq > n) {
        r -= 1;
    }
    while (r + 1).checked_mul(r + 1).is_some_and(|sq| sq <= n) {
        r += 1;
    }
    r
}

/// Floor of the square root of a nonnegative `n`; `None` for negative input.
pub fn isqrt_i128(n: i128) -> Option<i128> {
    if n < 0 {
        None
    } else {
        Some(isqrt_u128(n as u128) as i128)
    }
}

pub fn isqrt_big(n: &BigInt) -> Option<BigInt> {
    if n.is_negative() {
        None
    } else {
        Some(n.sqrt())
    }
}

// Quadratic residues mod 64, 63 and 11 give a cheap rejection before the root.
const fn square_mask(m: u64) -> u64 {
    let mut mask = 0u64;
    let mut i = 0;
    while i < m {
        mask |= 1 << ((i * i) % m);
        i += 1;
    }
    mask
}

const SQ64: u64 = square_mask(64);
const SQ63: u64 = square_mask(63);
const SQ11: u64 = square_mask(11);

fn residue_filter(n: u128) -> bool {
    (SQ64 >> (n % 64) as u64) & 1 == 1 && (SQ63 >> (n % 63) as u64) & 1 == 1 && (SQ11 >> (n % 11) as u64) & 1 == 1
}

/// Exact square root of a perfect square, `None` otherwise.
pub fn exact_sqrt_i128(n: i128) -> Option<i128> {
    if n < 0 {
        return None;
    }
    let u = n as u128;
    if !residue_filter(u) {
        return None;
    }
    let r = isqrt_u128(u);
    (r * r == u).then_some(r as i128)
}

pub fn exact_sqrt_big(n: &BigInt) -> Option<BigInt> {
    if n.is_negative() {
        return None;
    }
    if let Some(v) = n.to_i128() {
        return exact_sqrt_i128(v).map(BigInt::from);
    }
    let r = n.sqrt();
    (&r * &r == *n).then_some(r)
}

/// The `x0 >= 0` with `s = c * x0^2`, if one exists. `c` must be positive.
pub fn perfect_square_part(s: &BigInt, c: &BigInt) -> Option<BigInt> {
    assert!(c.is_positive(), "perfect_square_part requires c > 0");
    if s.is_zero() {
        return Some(BigInt::zero());
    }
    if s.is_negative() {
        return None;
    }
    let (q, r) = s.div_rem(c);
    if !r.is_zero() {
        return None;
    }
    exact_sqrt_big(&q)
}

pub fn perfect_square_part_i128(s: i128, c: i128) -> Option<i128> {
    debug_assert!(c > 0);
    if s == 0 {
        return Some(0);
    }
    if s < 0 || s % c != 0 {
        return None;
    }
    exact_sqrt_i128(s / c)
}

pub fn gcd_i64(a: i64, b: i64) -> i64 {
    a.gcd(&b)
}

pub fn gcd_i128(a: i128, b: i128) -> i128 {
    a.gcd(&b)
}

/// Extended gcd on `BigInt`: returns `(g, x, y)` with `g = a*x + b*y`, `g >= 0`.
pub fn ext_gcd_big(a: &BigInt, b: &BigInt) -> (BigInt, BigInt, BigInt) {
    let e = a.extended_gcd(b);
    if e.gcd.is_negative() {
        (-e.gcd, -e.x, -e.y)
    } else {
        (e.gcd, e.x, e.y)
    }
}

pub fn mod_floor_i128(a: i128, m: i128) -> i128 {
    a.mod_floor(&m)
}

pub fn mul_mod_u64(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod_u64(mut b: u64, mut e: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut r = 1u64;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod_u64(r, b, m);
        }
        b = mul_mod_u64(b, b, m);
        e >>= 1;
    }
    r
}

/// Inverse of `a` modulo `m`, if `gcd(a, m) = 1`.
pub fn inv_mod_i128(a: i128, m: i128) -> Option<i128> {
    let e = a.mod_floor(&m).extended_gcd(&m);
    (e.gcd == 1).then(|| e.x.mod_floor(&m))
}

pub fn inv_mod_big(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    let (g, x, _) = ext_gcd_big(&a.mod_floor(m), m);
    g.is_one().then(|| x.mod_floor(m))
}

/// Deterministic Miller-Rabin for 64-bit integers.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod_u64(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod_u64(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Smallest prime `>= n`.
pub fn next_prime(n: u64) -> u64 {
    let mut c = n.max(2);
    while !is_prime_u64(c) {
        c += 1;
    }
    c
}

/// Legendre symbol `(a / p)` for an odd prime `p`: -1, 0 or 1.
pub fn legendre(a: &BigInt, p: u64) -> i32 {
    let r = a.mod_floor(&BigInt::from(p)).to_u64().expect("residue fits u64");
    if r == 0 {
        return 0;
    }
    if pow_mod_u64(r, (p - 1) / 2, p) == 1 {
        1
    } else {
        -1
    }
}

/// Exponent of the largest power of `p` dividing `n`; `None` for `n = 0`.
pub fn valuation_i128(mut n: i128, p: i128) -> Option<u32> {
    if n == 0 {
        return None;
    }
    let mut v = 0;
    while n % p == 0 {
        n /= p;
        v += 1;
    }
    Some(v)
}

pub fn valuation_big(n: &BigInt, p: &BigInt) -> Option<u32> {
    if n.is_zero() {
        return None;
    }
    let mut v = 0;
    let mut m = n.clone();
    loop {
        let (q, r) = m.div_rem(p);
        if !r.is_zero() {
            return Some(v);
        }
        m = q;
        v += 1;
    }
}

pub fn pow_i128(base: i128, exp: u32) -> Option<i128> {
    base.checked_pow(exp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_square_part_examples() {
        let b = |v: i64| BigInt::from(v);
        assert_eq!(perfect_square_part(&b(0), &b(16)), Some(b(0)));
        assert_eq!(perfect_square_part(&b(64), &b(16)), Some(b(2)));
        assert_eq!(perfect_square_part(&b(48), &b(16)), None);
        assert_eq!(perfect_square_part(&b(-16), &b(16)), None);
        assert_eq!(perfect_square_part_i128(64, 16), Some(2));
        assert_eq!(perfect_square_part_i128(48, 16), None);
    }

    #[test]
    fn square_filter_agrees_with_scan() {
        for n in 0..20_000i128 {
            let r = isqrt_u128(n as u128) as i128;
            assert_eq!(exact_sqrt_i128(n), (r * r == n).then_some(r), "n = {n}");
        }
        let big = (1i128 << 62) + 12345;
        assert_eq!(exact_sqrt_i128(big * big), Some(big));
        assert_eq!(exact_sqrt_i128(big * big + 1), None);
    }

    #[test]
    fn primes_and_legendre() {
        assert!(is_prime_u64(10007));
        assert!(!is_prime_u64(10005));
        assert_eq!(next_prime(100), 101);
        assert!(is_prime_u64(2_147_483_647));
        assert_eq!(legendre(&BigInt::from(-64), 5), 1);
        assert_eq!(legendre(&BigInt::from(-64), 3), -1);
        assert_eq!(legendre(&BigInt::from(9), 3), 0);
    }
}
