//! Representations of a binary form by a quaternary form and Gram tuples of pairs.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exactmath::arith::perfect_square_part;
use crate::exactmath::lattice::{short_vectors_reduced, ShortVectorOptions};
use crate::exactmath::mpoly::{self, MPoly};
use crate::exactmath::normal_form::hnf;
use crate::exactmath::IntMatrix;
use crate::forms::{BinaryForm, QuaternaryForm};

pub type Vec4 = [i64; 4];

/// A 4×2 integer matrix whose columns are the images of the two basis vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Representation {
    cols: [Vec4; 2],
}

impl Representation {
    pub fn new(first: Vec4, second: Vec4) -> Self {
        Representation { cols: [first, second] }
    }

    pub fn first(&self) -> &Vec4 {
        &self.cols[0]
    }

    pub fn second(&self) -> &Vec4 {
        &self.cols[1]
    }

    pub fn columns(&self) -> &[Vec4; 2] {
        &self.cols
    }

    pub fn matrix(&self) -> IntMatrix {
        let rows: Vec<Vec<i64>> = (0..4).map(|i| vec![self.cols[0][i], self.cols[1][i]]).collect();
        IntMatrix::from_rows(&rows)
    }

    /// The six 2×2 minors.
    pub fn minors(&self) -> [i64; 6] {
        let (u, v) = (&self.cols[0], &self.cols[1]);
        let mut out = [0i64; 6];
        let mut k = 0;
        for i in 0..4 {
            for j in i + 1..4 {
                out[k] = u[i] * v[j] - u[j] * v[i];
                k += 1;
            }
        }
        out
    }

    /// Doubled Gram `[2a, b, 2c]` of the represented form.
    pub fn represented_gram2(&self, form: &QuaternaryForm) -> [i128; 3] {
        let (u, v) = (&self.cols[0], &self.cols[1]);
        [form.pairing(u, u), form.pairing(u, v), form.pairing(v, v)]
    }

    pub fn represents(&self, q: &BinaryForm, form: &QuaternaryForm) -> bool {
        self.represented_gram2(form) == [2 * q.a() as i128, q.b() as i128, 2 * q.c() as i128]
    }

    /// Column-major list of 8 integers.
    pub fn to_json(&self) -> serde_json::Value {
        let flat: Vec<i64> = self.cols.iter().flatten().copied().collect();
        serde_json::json!(flat)
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let arr = v.as_array().filter(|a| a.len() == 8).ok_or_else(|| Error::Dimension("expected 8 integers".into()))?;
        let n: Vec<i64> = arr.iter().map(|x| x.as_i64().ok_or_else(|| Error::Dimension("non-integer entry".into()))).collect::<Result<_>>()?;
        Ok(Representation::new([n[0], n[1], n[2], n[3]], [n[4], n[5], n[6], n[7]]))
    }

    /// Row-style HNF of the image lattice (rows are the two columns).
    pub fn image_hnf(&self) -> IntMatrix {
        let rows: Vec<Vec<i64>> = self.cols.iter().map(|c| c.to_vec()).collect();
        hnf(&IntMatrix::from_rows(&rows)).0
    }
}

/// Whether the image is a saturated rank-2 sublattice (gcd of the 2×2 minors is 1).
pub fn is_primitive_rep(m: &Representation) -> Result<bool> {
    let g = m.minors().iter().fold(0i64, |g, x| g.gcd(x));
    if g == 0 {
        let rank = if m.cols.iter().all(|c| c.iter().all(|&x| x == 0)) { 0 } else { 1 };
        return Err(Error::RankDeficient(rank));
    }
    Ok(g == 1)
}

fn to_vec4(v: &[BigInt]) -> Result<Vec4> {
    let mut out = [0i64; 4];
    for (o, x) in out.iter_mut().zip(v) {
        *o = x.to_i64().ok_or(Error::Overflow("representation entry"))?;
    }
    Ok(out)
}

/// All integer vectors `v` with `vᵀ·gram2·v = target2`, sorted.
pub fn vectors_of_norm(form: &QuaternaryForm, target2: i64) -> Result<Vec<Vec4>> {
    if target2 <= 0 {
        return Ok(Vec::new());
    }
    let opts = ShortVectorOptions { one_per_pair: false, exact_norm: true };
    let mut out: Vec<Vec4> =
        short_vectors_reduced(form.gram2(), &BigInt::from(target2), opts)?.into_iter().map(|(v, _)| to_vec4(&v)).collect::<Result<_>>()?;
    out.sort_unstable();
    Ok(out)
}

/// Every 4×2 matrix `M` with `Mᵀ·gram2·M = gram2(q)`, sorted; optionally primitive only.
pub fn enumerate_representations(q: &BinaryForm, form: &QuaternaryForm, primitive_only: bool) -> Result<Vec<Representation>> {
    let firsts = vectors_of_norm(form, 2 * q.a())?;
    let seconds = if q.a() == q.c() { firsts.clone() } else { vectors_of_norm(form, 2 * q.c())? };
    let b = q.b() as i128;
    let mut out: Vec<Representation> = firsts
        .par_iter()
        .flat_map_iter(|u| {
            seconds
                .iter()
                .filter(move |v| form.pairing(u, v) == b)
                .map(move |v| Representation::new(*u, *v))
                .filter(|r| !primitive_only || is_primitive_rep(r).unwrap_or(false))
                .collect::<Vec<_>>()
        })
        .collect();
    out.sort_unstable();
    Ok(out)
}

/// `(total, primitive)` representation counts.
pub fn count_representations(q: &BinaryForm, form: &QuaternaryForm) -> Result<(u64, u64)> {
    let all = enumerate_representations(q, form, false)?;
    let prim = all.iter().filter(|r| is_primitive_rep(r).unwrap_or(false)).count();
    Ok((all.len() as u64, prim as u64))
}

/// Doubled pairings and index of a pair of representations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GramTuple {
    pub x0: i64,
    pub x: [i64; 4],
}

impl GramTuple {
    pub fn new(x0: i64, x: [i64; 4]) -> Self {
        GramTuple { x0, x }
    }

    pub fn negated(&self) -> Self {
        GramTuple { x0: self.x0, x: self.x.map(|v| -v) }
    }
}

/// The right-hand side `s` of the degree-4 identity `det2·x0² = s` in doubled coordinates.
pub fn degree4_rhs(q: &BinaryForm, x: &[i64; 4]) -> BigInt {
    let big = |v: i64| BigInt::from(v);
    let (a, b, c, fd) = (big(q.a()), big(q.b()), big(q.c()), big(q.four_d()));
    let [x1, x2, x3, x4] = x.map(big);
    let t = &x2 + &x3;
    let core = &x1 * &x4 - &x2 * &x3 - fd;
    let lin = &c * &x1 - &a * &x4;
    &core * &core - 4 * &lin * &lin - 4 * (&b * &x1 - &a * &t) * (&b * &x4 - &c * &t)
}

/// Doubled 4×4 Gram matrix of the two pairs of columns.
pub fn pair_gram(i1: &Representation, i2: &Representation, form: &QuaternaryForm) -> IntMatrix {
    let vs = [i1.cols[0], i1.cols[1], i2.cols[0], i2.cols[1]];
    let mut g = IntMatrix::zeros(4, 4);
    for i in 0..4 {
        for j in 0..4 {
            g[(i, j)] = BigInt::from(form.pairing(&vs[i], &vs[j]));
        }
    }
    g
}

/// Gram tuple of two representations of the same form.
pub fn gram_tuple(i1: &Representation, i2: &Representation, form: &QuaternaryForm) -> Result<GramTuple> {
    let g1 = i1.represented_gram2(form);
    if g1 != i2.represented_gram2(form) {
        return Err(Error::FormMismatch);
    }
    let (u, v) = (&i1.cols, &i2.cols);
    let cast = |x: i128| i64::try_from(x).map_err(|_| Error::Overflow("gram tuple"));
    let x =
        [cast(form.pairing(&u[0], &v[0]))?, cast(form.pairing(&u[0], &v[1]))?, cast(form.pairing(&u[1], &v[0]))?, cast(form.pairing(&u[1], &v[1]))?];
    let det = pair_gram(i1, i2, form).det();
    let x0 = perfect_square_part(&det, form.det2()).ok_or_else(|| Error::Inconsistent(format!("det(G4) = {det} is not det2 times a square")))?;
    Ok(GramTuple { x0: x0.to_i64().ok_or(Error::Overflow("x0"))?, x })
}

/// `[Z⁴ : ι₁(Z²) + ι₂(Z²)]`, or 0 when the four columns are dependent.
pub fn joint_index(i1: &Representation, i2: &Representation) -> BigInt {
    let rows: Vec<Vec<i64>> = [i1.cols[0], i1.cols[1], i2.cols[0], i2.cols[1]].iter().map(|c| c.to_vec()).collect();
    let (h, _) = hnf(&IntMatrix::from_rows(&rows));
    let d: BigInt = (0..4).map(|i| h[(i, i)].clone()).product();
    d.abs()
}

/// Generic counter for `vᵀ·G·v = target` over `Z^k` (k ≤ 4): `(all, primitive)` where
/// primitive means the coordinates have gcd 1.
pub fn count_vector_representations(gram: &IntMatrix, target: &BigInt) -> Result<(u64, u64)> {
    if !target.is_positive() {
        return Ok((0, 0));
    }
    let opts = ShortVectorOptions { one_per_pair: false, exact_norm: true };
    let vecs = short_vectors_reduced(gram, target, opts)?;
    let prim = vecs.iter().filter(|(v, _)| v.iter().fold(BigInt::zero(), |g, x| g.gcd(x)) == BigInt::from(1)).count();
    Ok((vecs.len() as u64, prim as u64))
}

/// Expand `det(G4)` for indeterminate `a, b, c, X1..X4` and compare with the expanded `s`.
/// Returns the number of monomials in the common expansion, or `None` on mismatch.
pub fn verify_degree4_identity_symbolic() -> Option<usize> {
    type P = MPoly<7>;
    let v = P::var;
    let k = |c: i64| P::constant(c);
    let (a, b, c) = (v(0), v(1), v(2));
    let (x1, x2, x3, x4) = (v(3), v(4), v(5), v(6));
    let (a2, c2) = (&k(2) * &a, &k(2) * &c);
    let g4 = vec![
        vec![a2.clone(), b.clone(), x1.clone(), x2.clone()],
        vec![b.clone(), c2.clone(), x3.clone(), x4.clone()],
        vec![x1.clone(), x3.clone(), a2, b.clone()],
        vec![x2.clone(), x4.clone(), b.clone(), c2],
    ];
    let lhs = mpoly::det(&g4);
    let fd = &(&k(4) * &(&a * &c)) - &(&b * &b);
    let t = &x2 + &x3;
    let core = &(&(&x1 * &x4) - &(&x2 * &x3)) - &fd;
    let lin = &(&c * &x1) - &(&a * &x4);
    let u = &(&b * &x1) - &(&a * &t);
    let w = &(&b * &x4) - &(&c * &t);
    let rhs = &(&(&core * &core) - &(&k(4) * &(&lin * &lin))) - &(&k(4) * &(&u * &w));
    (lhs == rhs).then(|| lhs.num_terms())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn e(i: usize) -> Vec4 {
        let mut v = [0; 4];
        v[i] = 1;
        v
    }

    fn bf(a: i64, b: i64, c: i64) -> BinaryForm {
        BinaryForm::new(a, b, c).unwrap()
    }

    fn brute_vectors(form: &QuaternaryForm, target2: i128, r: i64) -> Vec<Vec4> {
        let mut out = Vec::new();
        for a in -r..=r {
            for b in -r..=r {
                for c in -r..=r {
                    for d in -r..=r {
                        let v = [a, b, c, d];
                        if form.pairing(&v, &v) == target2 {
                            out.push(v);
                        }
                    }
                }
            }
        }
        out
    }

    fn brute_reps(q: &BinaryForm, form: &QuaternaryForm, r: i64) -> BTreeSet<Representation> {
        let us = brute_vectors(form, 2 * q.a() as i128, r);
        let vs = brute_vectors(form, 2 * q.c() as i128, r);
        let mut out = BTreeSet::new();
        for u in &us {
            for v in &vs {
                if form.pairing(u, v) == q.b() as i128 {
                    out.insert(Representation::new(*u, *v));
                }
            }
        }
        out
    }

    #[test]
    fn representation_counts() {
        let q4 = QuaternaryForm::sum_of_four_squares();
        assert_eq!(count_representations(&bf(1, 0, 1), &q4).unwrap(), (48, 48));
        assert_eq!(count_representations(&bf(2, 0, 2), &q4).unwrap(), (144, 96));
        assert_eq!(count_representations(&bf(1, 1, 1), &q4).unwrap(), (0, 0));
        let q3 = QuaternaryForm::diagonal([6, 6, 6, 6]).unwrap();
        assert!(enumerate_representations(&bf(1, 0, 1), &q3, false).unwrap().is_empty());
    }

    #[test]
    fn enumeration_matches_brute_force() {
        let forms = [
            QuaternaryForm::sum_of_four_squares(),
            QuaternaryForm::from_rows([[2, 1, 0, 0], [1, 2, 0, 0], [0, 0, 4, 1], [0, 0, 1, 6]]).unwrap(),
            QuaternaryForm::diagonal([2, 2, 2, 18]).unwrap(),
        ];
        for form in &forms {
            for q in [bf(1, 0, 2), bf(2, 1, 3), bf(3, 2, 3), bf(1, 1, 4)] {
                let got: BTreeSet<_> = enumerate_representations(&q, form, false).unwrap().into_iter().collect();
                assert_eq!(got, brute_reps(&q, form, 4), "q = {q:?}");
                for r in &got {
                    assert!(r.represents(&q, form));
                }
            }
        }
    }

    #[test]
    fn primitivity_examples() {
        assert_eq!(is_primitive_rep(&Representation::new(e(0), e(1))), Ok(true));
        assert_eq!(is_primitive_rep(&Representation::new([1, 1, 0, 0], [1, -1, 0, 0])), Ok(false));
        assert_eq!(is_primitive_rep(&Representation::new([1, 1, 0, 0], [0, 0, 1, 1])), Ok(true));
        assert_eq!(is_primitive_rep(&Representation::new([1, 1, 0, 0], [2, 2, 0, 0])), Err(Error::RankDeficient(1)));
        let m = Representation::new([1, 1, 0, 0], [1, -1, 0, 0]).matrix();
        let divisors = crate::exactmath::normal_form::elementary_divisors(&m);
        assert_eq!(divisors, vec![BigInt::from(1), BigInt::from(2)]);
    }

    #[test]
    fn gram_tuple_examples() {
        let q4 = QuaternaryForm::sum_of_four_squares();
        let t = gram_tuple(&Representation::new(e(0), e(1)), &Representation::new(e(2), e(3)), &q4).unwrap();
        assert_eq!(t, GramTuple::new(1, [0, 0, 0, 0]));
        let t = gram_tuple(&Representation::new(e(0), e(1)), &Representation::new(e(0), e(2)), &q4).unwrap();
        assert_eq!(t, GramTuple::new(0, [2, 0, 0, 0]));
        let i = Representation::new([1, 1, 0, 0], [0, 1, 1, 1]);
        let q = bf(2, 2, 3);
        assert!(i.represents(&q, &q4));
        let t = gram_tuple(&i, &i, &q4).unwrap();
        assert_eq!(t, GramTuple::new(0, [4, 2, 2, 6]));
        assert_eq!(gram_tuple(&Representation::new(e(0), e(1)), &Representation::new([1, 1, 0, 0], e(2)), &q4), Err(Error::FormMismatch));
    }

    #[test]
    fn degree4_identity_and_index_on_all_pairs() {
        let form = QuaternaryForm::from_rows([[2, 1, 0, 0], [1, 4, 1, 0], [0, 1, 4, 1], [0, 0, 1, 6]]).unwrap();
        let seed = Representation::new([1, 1, 0, 0], [0, 1, 1, 0]);
        let [a2, b, c2] = seed.represented_gram2(&form);
        let q = bf((a2 / 2) as i64, b as i64, (c2 / 2) as i64);
        let reps = enumerate_representations(&q, &form, false).unwrap();
        assert!(reps.len() >= 4);
        for i1 in &reps {
            for i2 in &reps {
                let t = gram_tuple(i1, i2, &form).unwrap();
                let lhs = form.det2() * BigInt::from(t.x0) * BigInt::from(t.x0);
                assert_eq!(lhs, degree4_rhs(&q, &t.x));
                assert_eq!(BigInt::from(t.x0), joint_index(i1, i2));
                let [x1, x2, x3, x4] = t.x;
                assert!(x1.abs() <= 2 * q.a() && x4.abs() <= 2 * q.c());
                assert!(x2 * x2 <= 4 * q.a() * q.c() && x3 * x3 <= 4 * q.a() * q.c());
                if x1.abs() == 2 * q.a() || x4.abs() == 2 * q.c() {
                    assert_eq!(t.x0, 0);
                }
            }
        }
    }

    #[test]
    fn json_is_column_major() {
        let r = Representation::new([1, 2, 3, 4], [5, 6, 7, 8]);
        assert_eq!(r.to_json().to_string(), "[1,2,3,4,5,6,7,8]");
        assert_eq!(Representation::from_json(&r.to_json()).unwrap(), r);
    }

    #[test]
    fn degree4_identity_holds_symbolically() {
        assert!(verify_degree4_identity_symbolic().is_some_and(|n| n > 0));
    }

    #[test]
    fn ternary_watson_form() {
        // x² + xy + y² + 9z² in doubled coordinates
        let g = IntMatrix::from_rows(&[vec![2, 1, 0], vec![1, 2, 0], vec![0, 0, 18]]);
        for m in [1i64, 4, 7, 10] {
            let (all, prim) = count_vector_representations(&g, &BigInt::from(8 * m * m)).unwrap();
            assert_eq!(prim, 0, "m = {m}");
            assert!(all > 0, "m = {m}");
        }
    }
}
