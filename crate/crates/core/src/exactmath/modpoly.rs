//! Polynomials over a prime field `F_p` (`p < 2^62`) and exact integer root finding.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};

use super::arith::{is_prime_u64, mul_mod_u64, next_prime, pow_mod_u64};
use super::poly::IntPolynomial;

fn trim(mut v: Vec<u64>) -> Vec<u64> {
    while v.last() == Some(&0) {
        v.pop();
    }
    v
}

fn inv(a: u64, p: u64) -> u64 {
    pow_mod_u64(a, p - 2, p)
}

fn make_monic(f: &mut [u64], p: u64) {
    if let Some(&lead) = f.last() {
        let li = inv(lead, p);
        for c in f.iter_mut() {
            *c = mul_mod_u64(*c, li, p);
        }
    }
}

fn sub(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let n = a.len().max(b.len());
    let out = (0..n)
        .map(|i| {
            let (x, y) = (a.get(i).copied().unwrap_or(0), b.get(i).copied().unwrap_or(0));
            if x >= y {
                x - y
            } else {
                x + (p - y)
            }
        })
        .collect();
    trim(out)
}

fn mul(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = (out[i + j] + mul_mod_u64(x, y, p)) % p;
        }
    }
    trim(out)
}

/// `(quotient, remainder)` of `a` by nonzero `b`.
fn div_rem(a: &[u64], b: &[u64], p: u64) -> (Vec<u64>, Vec<u64>) {
    let db = b.len() - 1;
    let li = inv(b[db], p);
    let mut r = a.to_vec();
    let mut q = vec![0u64; a.len().saturating_sub(db)];
    while r.len() > db {
        let k = r.len() - 1 - db;
        let c = mul_mod_u64(r[r.len() - 1], li, p);
        q[k] = c;
        for (j, &y) in b.iter().enumerate() {
            let t = mul_mod_u64(c, y, p);
            r[k + j] = if r[k + j] >= t { r[k + j] - t } else { r[k + j] + (p - t) };
        }
        r = trim(r);
    }
    (trim(q), r)
}

fn rem(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    div_rem(a, b, p).1
}

fn gcd(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    while !b.is_empty() {
        let r = rem(&a, &b, p);
        a = b;
        b = r;
    }
    make_monic(&mut a, p);
    a
}

/// `base^e mod modulus`.
fn pow_mod_poly(base: &[u64], mut e: u64, modulus: &[u64], p: u64) -> Vec<u64> {
    let mut result = vec![1u64];
    let mut b = rem(base, modulus, p);
    while e > 0 {
        if e & 1 == 1 {
            result = rem(&mul(&result, &b, p), modulus, p);
        }
        b = rem(&mul(&b, &b, p), modulus, p);
        e >>= 1;
    }
    result
}

/// Roots of a squarefree split monic polynomial by equal-degree splitting.
fn split_roots(g: &[u64], p: u64, out: &mut Vec<u64>) {
    match g.len() {
        0 | 1 => {}
        2 => out.push((p - g[0]) % p),
        _ => {
            for a in 0..p {
                let shifted = [a, 1];
                let mut h = pow_mod_poly(&shifted, (p - 1) / 2, g, p);
                h = sub(&h, &[1], p);
                let d = gcd(g, &h, p);
                if d.len() > 1 && d.len() < g.len() {
                    let (q, _) = div_rem(g, &d, p);
                    let mut q = q;
                    make_monic(&mut q, p);
                    split_roots(&d, p, out);
                    split_roots(&q, p, out);
                    return;
                }
            }
            unreachable!("equal-degree splitting failed over F_{p}");
        }
    }
}

/// Distinct roots in `[0, p)` of `f` (coefficients low degree first, any integers),
/// sorted. The zero polynomial has no listed roots; callers handle it separately.
pub fn roots_mod_prime(f: &[BigInt], p: u64) -> Vec<u64> {
    debug_assert!(is_prime_u64(p));
    let pb = BigInt::from(p);
    let mut g = trim(f.iter().map(|c| c.mod_floor(&pb).to_u64().expect("reduced")).collect());
    if g.len() <= 1 {
        return Vec::new();
    }
    if p < 64 {
        return (0..p).filter(|&x| g.iter().rev().fold(0u64, |acc, &c| (mul_mod_u64(acc, x, p) + c) % p) == 0).collect();
    }
    make_monic(&mut g, p);
    let xp = pow_mod_poly(&[0, 1], p, &g, p);
    let split = gcd(&g, &sub(&xp, &[0, 1], p), p);
    let mut out = Vec::new();
    split_roots(&split, p, &mut out);
    out.sort_unstable();
    out
}

/// Whether every coefficient of `f` vanishes modulo `p`.
pub fn is_zero_mod(f: &[BigInt], p: u64) -> bool {
    let pb = BigInt::from(p);
    f.iter().all(|c| c.is_multiple_of(&pb))
}

/// Integer roots `r` of a nonzero `f` with `|r| ≤ bound`, sorted. Roots are read off
/// modulo a prime `ℓ > 2·bound` and verified exactly.
pub fn integer_roots(f: &IntPolynomial, bound: u64) -> Vec<i64> {
    assert!(!f.is_zero(), "integer_roots of the zero polynomial");
    assert!(bound < (1 << 60), "root bound too large");
    if f.degree() == Some(0) {
        return Vec::new();
    }
    let mut ell = next_prime(2 * bound + 1);
    while is_zero_mod(f.coeffs(), ell) {
        ell = next_prime(ell + 1);
    }
    let mut out: Vec<i64> = roots_mod_prime(f.coeffs(), ell)
        .into_iter()
        .filter_map(|r| {
            let r = if r > bound { r as i128 - ell as i128 } else { r as i128 };
            (r.unsigned_abs() <= bound as u128).then_some(r as i64)
        })
        .filter(|&r| f.eval_i128(r as i128).is_zero())
        .collect();
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn big(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn roots_mod_small_and_large_primes() {
        // (x-1)(x-2)(x+3)
        let f = big(&[6, -7, 0, 1]);
        assert_eq!(roots_mod_prime(&f, 5), vec![1, 2]);
        assert_eq!(roots_mod_prime(&f, 10007), vec![1, 2, 10004]);
        assert!(roots_mod_prime(&big(&[1, 0, 1]), 10007).is_empty());
        assert_eq!(roots_mod_prime(&big(&[1, 0, 1]), 10009), {
            let mut r: Vec<u64> = (0..10009u64).filter(|&x| (x * x + 1) % 10009 == 0).collect();
            r.sort();
            r
        });
        assert!(roots_mod_prime(&big(&[5]), 101).is_empty());
    }

    #[test]
    fn integer_root_examples() {
        let f = IntPolynomial::from_i64(&[6, -7, 0, 1]);
        assert_eq!(integer_roots(&f, 10), vec![-3, 1, 2]);
        assert_eq!(integer_roots(&f, 2), vec![1, 2]);
        let g = IntPolynomial::from_i64(&[0, 0, 1]);
        assert_eq!(integer_roots(&g, 5), vec![0]);
        let h = IntPolynomial::from_i64(&[-2, 0, 1]);
        assert!(integer_roots(&h, 100).is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn roots_mod_prime_match_scan(coeffs in proptest::collection::vec(-50i64..=50, 1..6), p in prop::sample::select(vec![67u64, 101, 257, 1009])) {
            let f = big(&coeffs);
            let scan: Vec<u64> = if is_zero_mod(&f, p) {
                Vec::new()
            } else {
                (0..p).filter(|&x| {
                    let v = coeffs.iter().rev().fold(0i128, |acc, &c| (acc * x as i128 + c as i128).rem_euclid(p as i128));
                    v == 0
                }).collect()
            };
            prop_assert_eq!(roots_mod_prime(&f, p), scan);
        }

        #[test]
        fn integer_roots_match_scan(coeffs in proptest::collection::vec(-30i64..=30, 2..6), bound in 0u64..200) {
            let f = IntPolynomial::from_i64(&coeffs);
            prop_assume!(!f.is_zero());
            let scan: Vec<i64> = (-(bound as i64)..=bound as i64).filter(|&x| f.eval_i128(x as i128).is_zero()).collect();
            prop_assert_eq!(integer_roots(&f, bound), scan);
        }
    }
}
