//! Lattice bases, exact LLL and Minkowski reduction, short vectors, box enumeration.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::arith::isqrt_big;
use super::matrix::IntMatrix;
use super::normal_form::{elementary_divisors, hnf};
use crate::error::{Error, Result};

/// A lattice given by linearly independent integer vectors and their Euclidean Gram matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeBasis {
    vectors: Vec<Vec<BigInt>>,
    gram: IntMatrix,
}

impl LatticeBasis {
    pub fn new(vectors: Vec<Vec<BigInt>>) -> Result<Self> {
        let Some(first) = vectors.first() else {
            return Err(Error::Dimension("empty basis".into()));
        };
        let dim = first.len();
        if dim == 0 || vectors.iter().any(|v| v.len() != dim) {
            return Err(Error::Dimension("basis vectors must share a positive ambient dimension".into()));
        }
        let m = IntMatrix::from_rows(&vectors);
        if m.rank() != vectors.len() {
            return Err(Error::DependentVectors);
        }
        let gram = &m * &m.transpose();
        Ok(LatticeBasis { vectors, gram })
    }

    pub fn from_i64(vectors: &[Vec<i64>]) -> Result<Self> {
        Self::new(vectors.iter().map(|v| v.iter().map(|&x| BigInt::from(x)).collect()).collect())
    }

    /// Basis from the nonzero rows of a generator matrix (HNF of the row span).
    pub fn from_generators(m: &IntMatrix) -> Result<Self> {
        let (h, _) = hnf(m);
        let rows: Vec<Vec<BigInt>> = h.row_vecs().into_iter().filter(|r| r.iter().any(|x| !x.is_zero())).collect();
        Self::new(rows)
    }

    pub fn rank(&self) -> usize {
        self.vectors.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn vectors(&self) -> &[Vec<BigInt>] {
        &self.vectors
    }

    pub fn gram(&self) -> &IntMatrix {
        &self.gram
    }

    pub fn matrix(&self) -> IntMatrix {
        IntMatrix::from_rows(&self.vectors)
    }

    /// Squared Euclidean norms of the basis vectors.
    pub fn norms_squared(&self) -> Vec<BigInt> {
        (0..self.rank()).map(|i| self.gram[(i, i)].clone()).collect()
    }

    /// Determinant of the Gram matrix (the squared covolume).
    pub fn gram_det(&self) -> BigInt {
        self.gram.det()
    }

    /// Row-style Hermite normal form of the basis; equal iff the lattices are equal.
    pub fn hnf(&self) -> IntMatrix {
        hnf(&self.matrix()).0
    }

    pub fn same_lattice(&self, other: &LatticeBasis) -> bool {
        self.rank() == other.rank() && self.hnf() == other.hnf()
    }

    /// Lattice vector with the given coefficients.
    pub fn combine(&self, coeffs: &[BigInt]) -> Vec<BigInt> {
        let mut out = vec![BigInt::zero(); self.ambient_dim()];
        for (c, v) in coeffs.iter().zip(&self.vectors) {
            if c.is_zero() {
                continue;
            }
            for (o, x) in out.iter_mut().zip(v) {
                *o += c * x;
            }
        }
        out
    }

    fn transformed(&self, t: &IntMatrix) -> Result<Self> {
        let m = t * &self.matrix();
        Self::new(m.row_vecs())
    }
}

/// Integral LLL on a positive definite Gram matrix with parameter `delta = num/den`.
/// Returns the unimodular `T` whose rows express the reduced basis in the input basis,
/// so the reduced Gram matrix is `T·G·Tᵀ`.
pub fn lll_gram(gram: &IntMatrix, delta_num: i64, delta_den: i64) -> Result<IntMatrix> {
    assert!(gram.is_square());
    let n = gram.rows();
    let mut g = gram.clone();
    let mut h = IntMatrix::identity(n);
    let zero = BigInt::zero();
    let mut d = vec![zero.clone(); n + 1];
    let mut lam = vec![vec![zero.clone(); n + 1]; n + 1];
    d[0] = BigInt::one();
    d[1] = g[(0, 0)].clone();
    if !d[1].is_positive() {
        return Err(Error::DependentVectors);
    }
    let (dn, dd) = (BigInt::from(delta_num), BigInt::from(delta_den));
    let mut k = 2;
    let mut kmax = 1;
    while k <= n {
        if k > kmax {
            kmax = k;
            for j in 1..=k {
                let mut u = g[(k - 1, j - 1)].clone();
                for i in 1..j {
                    u = (&d[i] * &u - &lam[k][i] * &lam[j][i]) / &d[i - 1];
                }
                if j < k {
                    lam[k][j] = u;
                } else {
                    if !u.is_positive() {
                        return Err(Error::DependentVectors);
                    }
                    d[k] = u;
                }
            }
        }
        loop {
            size_reduce(k, k - 1, &mut g, &mut h, &d, &mut lam);
            let lhs = &dd * &d[k] * &d[k - 2];
            let rhs = &dn * &d[k - 1] * &d[k - 1] - &dd * &lam[k][k - 1] * &lam[k][k - 1];
            if lhs < rhs {
                swap_step(k, kmax, &mut g, &mut h, &mut d, &mut lam);
                k = (k - 1).max(2);
            } else {
                for l in (1..k - 1).rev() {
                    size_reduce(k, l, &mut g, &mut h, &d, &mut lam);
                }
                k += 1;
                break;
            }
        }
    }
    Ok(h)
}

fn size_reduce(k: usize, l: usize, g: &mut IntMatrix, h: &mut IntMatrix, d: &[BigInt], lam: &mut [Vec<BigInt>]) {
    let twice: BigInt = &lam[k][l] * 2;
    if twice.abs() <= d[l] {
        return;
    }
    let q = (twice + &d[l]).div_floor(&(&d[l] * 2));
    let neg = -&q;
    h.add_row_multiple(k - 1, l - 1, &neg);
    g.add_row_multiple(k - 1, l - 1, &neg);
    g.add_col_multiple(k - 1, l - 1, &neg);
    lam[k][l] -= &q * &d[l];
    for i in 1..l {
        let v = &q * &lam[l][i];
        lam[k][i] -= v;
    }
}

fn swap_step(k: usize, kmax: usize, g: &mut IntMatrix, h: &mut IntMatrix, d: &mut [BigInt], lam: &mut [Vec<BigInt>]) {
    h.swap_rows(k - 1, k - 2);
    g.swap_rows(k - 1, k - 2);
    g.swap_cols(k - 1, k - 2);
    for j in 1..k - 1 {
        let t = std::mem::take(&mut lam[k][j]);
        lam[k][j] = std::mem::replace(&mut lam[k - 1][j], t);
    }
    let l = lam[k][k - 1].clone();
    let b = (&d[k - 2] * &d[k] + &l * &l) / &d[k - 1];
    for i in k + 1..=kmax {
        let t = lam[i][k].clone();
        lam[i][k] = (&d[k] * &lam[i][k - 1] - &l * &t) / &d[k - 1];
        lam[i][k - 1] = (&b * &t + &l * &lam[i][k]) / &d[k];
    }
    d[k - 1] = b;
}

/// Exact Gram–Schmidt data of a positive definite Gram matrix:
/// `x·G·x = Σ_i b[i]·(x_i + Σ_{j>i} mu[j][i]·x_j)²`.
#[derive(Clone, Debug)]
pub struct GramSchmidt {
    pub b: Vec<BigRational>,
    pub mu: Vec<Vec<BigRational>>,
}

impl GramSchmidt {
    pub fn new(gram: &IntMatrix) -> Result<Self> {
        let n = gram.rows();
        let mut b = vec![BigRational::zero(); n];
        let mut mu = vec![vec![BigRational::zero(); n]; n];
        let mut r = vec![vec![BigRational::zero(); n]; n];
        for j in 0..n {
            for i in 0..=j {
                let mut v = BigRational::from_integer(gram[(j, i)].clone());
                for k in 0..i {
                    v -= &mu[i][k] * &r[j][k];
                }
                if i < j {
                    mu[j][i] = &v / &b[i];
                }
                r[j][i] = v;
            }
            b[j] = r[j][j].clone();
            if !b[j].is_positive() {
                return Err(Error::NotPositiveDefinite("Gram matrix is not positive definite".into()));
            }
        }
        Ok(GramSchmidt { b, mu })
    }
}

/// Options for [`short_vectors`].
#[derive(Clone, Copy, Debug, Default)]
pub struct ShortVectorOptions {
    /// Emit one vector per `±` pair (the first nonzero coordinate from the end is positive).
    pub one_per_pair: bool,
    /// Only emit vectors whose norm equals the bound.
    pub exact_norm: bool,
}

fn int_range(rem: &BigRational, b: &BigRational, center: &BigRational) -> Option<(BigInt, BigInt)> {
    if rem.is_negative() {
        return None;
    }
    let t = rem / b;
    let cn = center.numer();
    let cd = center.denom();
    let s = isqrt_big(&(t.numer() * cd * cd).div_floor(t.denom()))?;
    let lo = (-&s - cn).div_ceil(cd);
    let hi = (&s - cn).div_floor(cd);
    (lo <= hi).then_some((lo, hi))
}

/// Visit every nonzero integer `x` with `x·G·x <= bound` (Fincke–Pohst, exact rationals).
/// The visitor receives the coefficient vector and its norm; returning `false` stops.
pub fn for_each_short_vector<F>(gram: &IntMatrix, bound: &BigInt, opts: ShortVectorOptions, mut visit: F) -> Result<()>
where
    F: FnMut(&[BigInt], &BigInt) -> bool,
{
    let gs = GramSchmidt::new(gram)?;
    let n = gram.rows();
    if bound.is_negative() {
        return Ok(());
    }
    let mut x = vec![BigInt::zero(); n];
    let bound_q = BigRational::from_integer(bound.clone());
    let mut stop = false;
    recurse(&gs, n, n - 1, &bound_q, bound, true, &mut x, opts, &mut visit, &mut stop);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn recurse<F>(
    gs: &GramSchmidt,
    n: usize,
    level: usize,
    rem: &BigRational,
    bound: &BigInt,
    zero_above: bool,
    x: &mut [BigInt],
    opts: ShortVectorOptions,
    visit: &mut F,
    stop: &mut bool,
) where
    F: FnMut(&[BigInt], &BigInt) -> bool,
{
    let mut center = BigRational::zero();
    for j in level + 1..n {
        if !x[j].is_zero() {
            center += &gs.mu[j][level] * BigRational::from_integer(x[j].clone());
        }
    }
    if level == 0 && opts.exact_norm {
        let t = rem / &gs.b[0];
        let cd = center.denom().clone();
        let target = &t * BigRational::from_integer(&cd * &cd);
        if !target.is_integer() {
            return;
        }
        let Some(s) = super::arith::exact_sqrt_big(&target.to_integer()) else { return };
        let mut cands = vec![-&s, s.clone()];
        if s.is_zero() {
            cands.pop();
        }
        for u in cands {
            let num = &u - center.numer();
            if !num.is_multiple_of(&cd) {
                continue;
            }
            let v = num / &cd;
            if zero_above && (v.is_zero() || (opts.one_per_pair && v.is_negative())) {
                continue;
            }
            x[0] = v;
            if !visit(x, bound) {
                *stop = true;
                return;
            }
        }
        x[0] = BigInt::zero();
        return;
    }
    let Some((mut lo, hi)) = int_range(rem, &gs.b[level], &center) else { return };
    if zero_above && opts.one_per_pair && lo.is_negative() {
        lo = BigInt::zero();
    }
    let mut v = lo;
    while v <= hi {
        let shifted = BigRational::from_integer(v.clone()) + &center;
        let next_rem = rem - &gs.b[level] * &shifted * &shifted;
        x[level] = v.clone();
        let next_zero = zero_above && v.is_zero();
        if level == 0 {
            if !next_zero {
                let norm = (BigRational::from_integer(bound.clone()) - &next_rem).to_integer();
                if !visit(x, &norm) {
                    *stop = true;
                }
            }
        } else {
            recurse(gs, n, level - 1, &next_rem, bound, next_zero, x, opts, visit, stop);
        }
        if *stop {
            break;
        }
        v += 1;
    }
    x[level] = BigInt::zero();
}

/// All nonzero `x` with `x·G·x <= bound`, paired with their norms, in enumeration order.
pub fn short_vectors(gram: &IntMatrix, bound: &BigInt, opts: ShortVectorOptions) -> Result<Vec<(Vec<BigInt>, BigInt)>> {
    let mut out = Vec::new();
    for_each_short_vector(gram, bound, opts, |x, norm| {
        out.push((x.to_vec(), norm.clone()));
        true
    })?;
    Ok(out)
}

/// LLL-reduce first, then enumerate; coefficients are returned in the original basis.
pub fn short_vectors_reduced(gram: &IntMatrix, bound: &BigInt, opts: ShortVectorOptions) -> Result<Vec<(Vec<BigInt>, BigInt)>> {
    let t = lll_gram(gram, 99, 100)?;
    let reduced = &(&t * gram) * &t.transpose();
    let tt = t.transpose();
    Ok(short_vectors(&reduced, bound, opts)?.into_iter().map(|(y, norm)| (tt.mul_vec(&y), norm)).collect())
}

fn cmp_candidates(a: &(Vec<BigInt>, BigInt), b: &(Vec<BigInt>, BigInt)) -> Ordering {
    a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0))
}

fn extends_to_basis(rows: &[Vec<BigInt>]) -> bool {
    let m = IntMatrix::from_rows(rows);
    elementary_divisors(&m).iter().all(One::is_one)
}

/// Minkowski reduction of a positive definite Gram matrix of rank ≤ 4 by greedy
/// successive-minima enumeration. Returns the unimodular `T` (rows in the input basis).
pub fn minkowski_gram(gram: &IntMatrix) -> Result<IntMatrix> {
    let n = gram.rows();
    if n > 4 {
        return Err(Error::Dimension(format!("Minkowski reduction needs rank <= 4, got {n}")));
    }
    let t1 = lll_gram(gram, 99, 100)?;
    let g1 = &(&t1 * gram) * &t1.transpose();
    let mut radius = (0..n).map(|i| g1[(i, i)].clone()).max().expect("nonempty");
    let opts = ShortVectorOptions { one_per_pair: true, exact_norm: false };
    loop {
        let mut cands = short_vectors(&g1, &radius, opts)?;
        cands.sort_by(cmp_candidates);
        let mut chosen: Vec<Vec<BigInt>> = Vec::with_capacity(n);
        for (c, _) in cands {
            chosen.push(c);
            if !extends_to_basis(&chosen) {
                chosen.pop();
            } else if chosen.len() == n {
                break;
            }
        }
        if chosen.len() == n {
            let c = IntMatrix::from_rows(&chosen);
            return Ok(&c * &t1);
        }
        radius *= 2;
    }
}

/// Exact Minkowski-reduced basis of the same lattice, sorted by norm.
pub fn reduce_basis(basis: &LatticeBasis) -> Result<LatticeBasis> {
    if basis.rank() > 4 {
        return Err(Error::Dimension(format!("rank {} exceeds 4", basis.rank())));
    }
    let t = minkowski_gram(basis.gram())?;
    basis.transformed(&t)
}

/// LLL-reduced basis of the same lattice (parameter 0.99).
pub fn lll_basis(basis: &LatticeBasis) -> Result<LatticeBasis> {
    let t = lll_gram(basis.gram(), 99, 100)?;
    basis.transformed(&t)
}

/// Iterator over all lattice vectors with `|x_j| <= bounds[j]` for every ambient coordinate.
/// Vectors are emitted in lexicographic order of their Hermite-normal-form coefficients.
pub struct BoxPoints {
    rows: Vec<Vec<BigInt>>,
    pivots: Vec<usize>,
    bounds: Vec<BigInt>,
    partial: Vec<Vec<BigInt>>,
    cur: Vec<BigInt>,
    hi: Vec<BigInt>,
    level: usize,
    descending: bool,
    done: bool,
}

pub fn lattice_points_in_box(basis: &LatticeBasis, bounds: &[BigInt]) -> BoxPoints {
    assert_eq!(bounds.len(), basis.ambient_dim(), "one bound per ambient coordinate");
    assert!(bounds.iter().all(|b| !b.is_negative()), "bounds must be nonnegative");
    let h = basis.hnf();
    let rows: Vec<Vec<BigInt>> = h.row_vecs().into_iter().filter(|r| r.iter().any(|x| !x.is_zero())).collect();
    let pivots: Vec<usize> = rows.iter().map(|r| r.iter().position(|x| !x.is_zero()).expect("nonzero")).collect();
    let r = rows.len();
    let dim = basis.ambient_dim();
    BoxPoints {
        rows,
        pivots,
        bounds: bounds.to_vec(),
        partial: vec![vec![BigInt::zero(); dim]; r + 1],
        cur: vec![BigInt::zero(); r],
        hi: vec![BigInt::zero(); r],
        level: 0,
        descending: true,
        done: false,
    }
}

impl BoxPoints {
    /// Columns fully determined once coefficients `0..=level` are fixed.
    fn determined_cols(&self, level: usize) -> std::ops::Range<usize> {
        let start = self.pivots[level];
        let end = self.pivots.get(level + 1).copied().unwrap_or(self.bounds.len());
        start..end
    }

    fn set_level(&mut self, level: usize) -> bool {
        let col = self.pivots[level];
        let piv = &self.rows[level][col];
        let s = &self.partial[level][col];
        let b = &self.bounds[col];
        let lo = (-b - s).div_ceil(piv);
        let hi = (b - s).div_floor(piv);
        if lo > hi {
            return false;
        }
        self.cur[level] = lo;
        self.hi[level] = hi;
        true
    }

    fn fill_partial(&mut self, level: usize) -> bool {
        let c = self.cur[level].clone();
        let (head, tail) = self.partial.split_at_mut(level + 1);
        let src = &head[level];
        let dst = &mut tail[0];
        for j in 0..dst.len() {
            dst[j] = &src[j] + &c * &self.rows[level][j];
        }
        self.determined_cols(level).all(|j| self.partial[level + 1][j].abs() <= self.bounds[j])
    }
}

impl BoxPoints {
    /// Step to the next coefficient, climbing out of exhausted levels.
    fn step(&mut self) -> bool {
        self.cur[self.level] += 1;
        while self.cur[self.level] > self.hi[self.level] {
            if self.level == 0 {
                self.done = true;
                return false;
            }
            self.level -= 1;
            self.cur[self.level] += 1;
        }
        true
    }
}

impl Iterator for BoxPoints {
    type Item = Vec<BigInt>;

    fn next(&mut self) -> Option<Vec<BigInt>> {
        if self.done {
            return None;
        }
        let r = self.rows.len();
        if r == 0 {
            self.done = true;
            return Some(vec![BigInt::zero(); self.bounds.len()]);
        }
        loop {
            if self.descending {
                self.descending = false;
                if !self.set_level(self.level) {
                    self.cur[self.level] = BigInt::one();
                    self.hi[self.level] = BigInt::zero();
                    if !self.step() {
                        return None;
                    }
                    continue;
                }
            }
            let ok = self.fill_partial(self.level);
            if ok && self.level + 1 == r {
                let out = self.partial[r].clone();
                self.step();
                return Some(out);
            }
            if ok {
                self.level += 1;
                self.descending = true;
            } else if !self.step() {
                return None;
            }
        }
    }
}
