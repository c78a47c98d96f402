//! Hermite and Smith normal forms and kernels of congruence systems.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::matrix::IntMatrix;

/// Row-style Hermite normal form: `H = U·M` with `U` unimodular, `H` upper
/// triangular (echelon), pivots positive, entries above each pivot in `[0, pivot)`,
/// zero rows last.
pub fn hnf(m: &IntMatrix) -> (IntMatrix, IntMatrix) {
    let rows = m.rows();
    let cols = m.cols();
    let mut h = m.clone();
    let mut u = IntMatrix::identity(rows);
    let mut r = 0;
    for col in 0..cols {
        if r == rows {
            break;
        }
        loop {
            let pivot = (r..rows).filter(|&i| !h[(i, col)].is_zero()).min_by(|&i, &j| h[(i, col)].abs().cmp(&h[(j, col)].abs()).then(i.cmp(&j)));
            let Some(p) = pivot else { break };
            h.swap_rows(p, r);
            u.swap_rows(p, r);
            let mut done = true;
            for i in r + 1..rows {
                if h[(i, col)].is_zero() {
                    continue;
                }
                let q = h[(i, col)].div_floor(&h[(r, col)]);
                let neg = -q;
                h.add_row_multiple(i, r, &neg);
                u.add_row_multiple(i, r, &neg);
                if !h[(i, col)].is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if h[(r, col)].is_zero() {
            continue;
        }
        if h[(r, col)].is_negative() {
            h.negate_row(r);
            u.negate_row(r);
        }
        for i in 0..r {
            let q = h[(i, col)].div_floor(&h[(r, col)]);
            if !q.is_zero() {
                let neg = -q;
                h.add_row_multiple(i, r, &neg);
                u.add_row_multiple(i, r, &neg);
            }
        }
        r += 1;
    }
    (h, u)
}

/// Smith normal form: `S = U·M·V` diagonal with `d_i | d_{i+1}`, nonnegative
/// diagonal, `U` and `V` unimodular.
pub fn snf(m: &IntMatrix) -> (IntMatrix, IntMatrix, IntMatrix) {
    let rows = m.rows();
    let cols = m.cols();
    let mut s = m.clone();
    let mut u = IntMatrix::identity(rows);
    let mut v = IntMatrix::identity(cols);
    for t in 0..rows.min(cols) {
        'pivot: loop {
            let mut best: Option<(usize, usize)> = None;
            for i in t..rows {
                for j in t..cols {
                    if s[(i, j)].is_zero() {
                        continue;
                    }
                    if best.is_none_or(|(bi, bj)| s[(i, j)].abs() < s[(bi, bj)].abs()) {
                        best = Some((i, j));
                    }
                }
            }
            let Some((pi, pj)) = best else { return (s, u, v) };
            s.swap_rows(pi, t);
            u.swap_rows(pi, t);
            s.swap_cols(pj, t);
            v.swap_cols(pj, t);

            let mut clean = true;
            for i in t + 1..rows {
                if s[(i, t)].is_zero() {
                    continue;
                }
                let neg = -s[(i, t)].div_floor(&s[(t, t)]);
                s.add_row_multiple(i, t, &neg);
                u.add_row_multiple(i, t, &neg);
                clean &= s[(i, t)].is_zero();
            }
            for j in t + 1..cols {
                if s[(t, j)].is_zero() {
                    continue;
                }
                let neg = -s[(t, j)].div_floor(&s[(t, t)]);
                s.add_col_multiple(j, t, &neg);
                v.add_col_multiple(j, t, &neg);
                clean &= s[(t, j)].is_zero();
            }
            if !clean {
                continue;
            }
            for i in t + 1..rows {
                for j in t + 1..cols {
                    if !s[(i, j)].is_multiple_of(&s[(t, t)]) {
                        let one = BigInt::one();
                        s.add_row_multiple(t, i, &one);
                        u.add_row_multiple(t, i, &one);
                        continue 'pivot;
                    }
                }
            }
            break;
        }
        if s[(t, t)].is_negative() {
            s.negate_row(t);
            u.negate_row(t);
        }
    }
    (s, u, v)
}

/// Diagonal of a Smith normal form (length `min(rows, cols)`).
pub fn elementary_divisors(m: &IntMatrix) -> Vec<BigInt> {
    let (s, _, _) = snf(m);
    (0..m.rows().min(m.cols())).map(|i| s[(i, i)].clone()).collect()
}

/// Basis (rows, in Hermite normal form) of `{ y in Z^k : C·y ≡ 0 mod modulus }`.
pub fn congruence_kernel(c: &IntMatrix, modulus: &BigInt) -> IntMatrix {
    assert!(modulus.is_positive(), "modulus must be positive");
    let k = c.cols();
    let (s, _, v) = snf(c);
    let diag_len = c.rows().min(k);
    let mut basis = IntMatrix::zeros(k, k);
    for i in 0..k {
        let d = if i < diag_len { s[(i, i)].clone() } else { BigInt::zero() };
        let scale = modulus / d.gcd(modulus);
        for j in 0..k {
            basis[(i, j)] = &v[(j, i)] * &scale;
        }
    }
    hnf(&basis).0
}

/// Solutions of `C·y ≡ 0 mod modulus` in `(Z/modulus)^k`, counted via elementary divisors.
pub fn congruence_solution_count(c: &IntMatrix, modulus: &BigInt) -> BigInt {
    let k = c.cols();
    let divisors = elementary_divisors(c);
    let mut count = BigInt::one();
    for i in 0..k {
        let d = divisors.get(i).cloned().unwrap_or_default();
        count *= d.gcd(modulus);
    }
    count
}

/// Absolute determinant of a full-rank square lattice basis given by rows.
pub fn lattice_index(basis: &IntMatrix) -> BigInt {
    basis.det().abs()
}
