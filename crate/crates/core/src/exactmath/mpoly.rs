//! Sparse multivariate integer polynomials in a fixed number of variables.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_traits::{One, Zero};

/// Polynomial in `N` variables as a map from exponent vectors to nonzero coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct MPoly<const N: usize> {
    terms: BTreeMap<[u32; N], BigInt>,
}

impl<const N: usize> MPoly<N> {
    pub fn zero() -> Self {
        MPoly { terms: BTreeMap::new() }
    }

    pub fn constant<T: Into<BigInt>>(c: T) -> Self {
        let mut p = Self::zero();
        p.add_term([0; N], c.into());
        p
    }

    /// The variable with index `i`.
    pub fn var(i: usize) -> Self {
        let mut e = [0; N];
        e[i] = 1;
        let mut p = Self::zero();
        p.add_term(e, BigInt::one());
        p
    }

    fn add_term(&mut self, e: [u32; N], c: BigInt) {
        let entry = self.terms.entry(e).or_default();
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&e);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn eval(&self, point: &[BigInt; N]) -> BigInt {
        self.terms.iter().map(|(e, c)| e.iter().zip(point).fold(c.clone(), |acc, (&k, x)| acc * num_traits::pow(x.clone(), k as usize))).sum()
    }
}

impl<const N: usize> Add for &MPoly<N> {
    type Output = MPoly<N>;
    fn add(self, rhs: &MPoly<N>) -> MPoly<N> {
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(*e, c.clone());
        }
        out
    }
}

impl<const N: usize> Neg for &MPoly<N> {
    type Output = MPoly<N>;
    fn neg(self) -> MPoly<N> {
        MPoly { terms: self.terms.iter().map(|(e, c)| (*e, -c)).collect() }
    }
}

impl<const N: usize> Sub for &MPoly<N> {
    type Output = MPoly<N>;
    fn sub(self, rhs: &MPoly<N>) -> MPoly<N> {
        self + &(-rhs)
    }
}

impl<const N: usize> Mul for &MPoly<N> {
    type Output = MPoly<N>;
    fn mul(self, rhs: &MPoly<N>) -> MPoly<N> {
        let mut out = MPoly::zero();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &rhs.terms {
                let mut e = *e1;
                for (x, y) in e.iter_mut().zip(e2) {
                    *x += y;
                }
                out.add_term(e, c1 * c2);
            }
        }
        out
    }
}

/// Determinant of a square matrix of polynomials by the Leibniz expansion.
pub fn det<const N: usize>(m: &[Vec<MPoly<N>>]) -> MPoly<N> {
    let n = m.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut out = MPoly::zero();
    permutations(&mut perm, 0, &mut |p| {
        let inversions = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| p[i] > p[j]).count();
        let mut term = MPoly::constant(if inversions % 2 == 0 { 1 } else { -1 });
        for (row, &col) in p.iter().enumerate() {
            term = &term * &m[row][col];
        }
        out = &out + &term;
    });
    out
}

fn permutations(p: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permutations(p, k + 1, visit);
        p.swap(k, i);
    }
}
