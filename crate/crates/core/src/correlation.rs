//! Correlation sets X(n): pairs of primitive representations that agree modulo
//! `p^{2n}` up to a rotation of the common plane.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exactmath::arith::{is_prime_u64, pow_i128};
use crate::exactmath::normal_form::snf;
use crate::exactmath::IntMatrix;
use crate::forms::{is_primitive_binary, BinaryForm, QuaternaryForm};
use crate::reps::{enumerate_representations, gram_tuple, is_primitive_rep, GramTuple, Representation};
use crate::svariety::sn_violations;

/// A binary form `q`, a quaternary form `Q`, an odd prime `p` and a level `n ≥ 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorrelationInstance {
    pub q: BinaryForm,
    pub form: QuaternaryForm,
    pub p: u64,
    pub n: u32,
}

impl CorrelationInstance {
    /// Validated instance: `p` odd prime, `n ≥ 1`, `q` reduced and primitive.
    pub fn new(q: BinaryForm, form: QuaternaryForm, p: u64, n: u32) -> Result<Self> {
        let inst = Self::diagnostic(q, form, p, n)?;
        if !is_primitive_binary(&inst.q) {
            return Err(Error::Precondition(format!("binary form {:?} is not primitive", inst.q)));
        }
        Ok(inst)
    }

    /// Like [`CorrelationInstance::new`] but allows non-primitive `q`.
    pub fn diagnostic(q: BinaryForm, form: QuaternaryForm, p: u64, n: u32) -> Result<Self> {
        if p == 2 || !is_prime_u64(p) {
            return Err(Error::NotOddPrime(p));
        }
        if n == 0 {
            return Err(Error::Precondition("level n must be positive".into()));
        }
        if !q.is_reduced() {
            return Err(Error::Precondition(format!("binary form {q:?} is not reduced")));
        }
        let inst = CorrelationInstance { q, form, p, n };
        inst.modulus(4)?;
        Ok(inst)
    }

    /// `p^{k·n}` as `i128`.
    pub fn modulus(&self, k: u32) -> Result<i128> {
        pow_i128(self.p as i128, k * self.n).filter(|m| *m < (1i128 << 62)).ok_or(Error::Overflow("p^(kn)"))
    }

    /// The same data at another level.
    pub fn at_level(&self, n: u32) -> Result<Self> {
        Self::diagnostic(self.q, self.form.clone(), self.p, n)
    }

    /// Whether `p ∤ 2·disc(q)·disc(Q)`, where the planar test matches the rotation condition.
    pub fn planar_test_exact(&self) -> bool {
        let p = BigInt::from(self.p);
        let prod = BigInt::from(self.q.four_d()) * self.form.det2();
        !prod.is_multiple_of(&p)
    }
}

/// Left inverse of a primitive representation, reduced modulo `modulus`.
fn left_inverse_mod(m: &Representation, modulus: i128) -> Result<[[i128; 4]; 2]> {
    if !is_primitive_rep(m)? {
        return Err(Error::NotPrimitive);
    }
    let (s, u, v) = snf(&m.matrix());
    debug_assert!(s[(0, 0)].is_one() && s[(1, 1)].is_one());
    let vu = &v * &IntMatrix::from_rows(&[u.row(0).to_vec(), u.row(1).to_vec()]);
    let modulus_big = BigInt::from(modulus);
    let mut out = [[0i128; 4]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = vu[(i, j)].mod_floor(&modulus_big).to_i128().expect("reduced entry fits");
        }
    }
    Ok(out)
}

/// The unique candidate `g = L·M2 mod N` and whether it passes all three congruences.
fn planar_check(l1: &[[i128; 4]; 2], m1: &Representation, m2: &Representation, gram: [[i128; 2]; 2], modulus: i128) -> bool {
    let md = |x: i128| x.rem_euclid(modulus);
    let (c1, c2) = (m1.columns(), m2.columns());
    let mut g = [[0i128; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            g[i][j] = md((0..4).map(|k| md(l1[i][k] * c2[j][k] as i128)).sum());
        }
    }
    for j in 0..2 {
        for k in 0..4 {
            let lhs = c1[0][k] as i128 * g[0][j] + c1[1][k] as i128 * g[1][j];
            if md(lhs - c2[j][k] as i128) != 0 {
                return false;
            }
        }
    }
    if md(g[0][0] * g[1][1] - g[0][1] * g[1][0]) != 1 % modulus {
        return false;
    }
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = 0i128;
            for k in 0..2 {
                for l in 0..2 {
                    acc = md(acc + md(g[k][i] * gram[k][l]) * g[l][j]);
                }
            }
            if md(acc - gram[i][j]) != 0 {
                return false;
            }
        }
    }
    true
}

fn gram_of(q: &BinaryForm) -> [[i128; 2]; 2] {
    let g = q.gram2();
    [[g[0][0] as i128, g[0][1] as i128], [g[1][0] as i128, g[1][1] as i128]]
}

/// Whether `M2 ≡ M1·g` for some `g` over `Z/p^{2n}` preserving the doubled Gram of `q`
/// with `det g ≡ 1`.
pub fn rotation_congruent(i1: &Representation, i2: &Representation, inst: &CorrelationInstance) -> Result<bool> {
    let modulus = inst.modulus(2)?;
    let l1 = left_inverse_mod(i1, modulus)?;
    Ok(planar_check(&l1, i1, i2, gram_of(&inst.q), modulus))
}

/// Ordered pairs in X(n) with their Gram tuples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorrelationSet {
    pub pairs: Vec<(Representation, Representation)>,
    pub primitive_count: usize,
}

impl CorrelationSet {
    pub fn ordered_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn unordered_count(&self) -> usize {
        self.pairs.iter().map(|(a, b)| if a <= b { (*a, *b) } else { (*b, *a) }).collect::<BTreeSet<_>>().len()
    }
}

/// All ordered pairs of primitive representations with distinct images that are
/// rotation-congruent at level `n`.
pub fn build_xn(inst: &CorrelationInstance) -> Result<CorrelationSet> {
    let reps = enumerate_representations(&inst.q, &inst.form, true)?;
    let modulus = inst.modulus(2)?;
    let gram = gram_of(&inst.q);
    let inverses: Vec<_> = reps.iter().map(|r| left_inverse_mod(r, modulus)).collect::<Result<_>>()?;
    let images: Vec<IntMatrix> = reps.iter().map(Representation::image_hnf).collect();
    // M2 ≡ M1·g with det g ≡ 1 forces equal 2×2 minors modulo p^{2n}.
    let mut buckets: BTreeMap<[i128; 6], Vec<usize>> = BTreeMap::new();
    let keys: Vec<[i128; 6]> = reps.iter().map(|r| r.minors().map(|m| (m as i128).rem_euclid(modulus))).collect();
    for (i, k) in keys.iter().enumerate() {
        buckets.entry(*k).or_default().push(i);
    }
    let pairs: Vec<(Representation, Representation)> = (0..reps.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let (reps, inverses, images) = (&reps, &inverses, &images);
            buckets[&keys[i]]
                .iter()
                .copied()
                .filter(move |&j| j != i && planar_check(&inverses[i], &reps[i], &reps[j], gram, modulus))
                .filter(move |&j| images[i] != images[j])
                .map(move |j| (reps[i], reps[j]))
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(CorrelationSet { pairs, primitive_count: reps.len() })
}

/// One pair of X(n) whose Gram tuple fails the S(n) constraints.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct XnViolation {
    pub first: Representation,
    pub second: Representation,
    pub tuple: GramTuple,
    pub reasons: Vec<String>,
}

/// Outcome of mapping X(n) into S(n).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct XnReport {
    pub q: [i64; 3],
    pub det2: String,
    pub p: u64,
    pub n: u32,
    pub primitive_representations: usize,
    pub ordered_pairs: usize,
    pub unordered_pairs: usize,
    pub planar_test_exact: bool,
    pub epsilon: f64,
    pub delta: f64,
    /// `D^{1+ε} / p^{(4+2δ)n}` with `D = fourD/4`.
    pub target_ratio: f64,
    pub violations: Vec<XnViolation>,
}

/// Build X(n), map every pair to its Gram tuple and test S(n) membership.
pub fn xn_to_sn_check(inst: &CorrelationInstance, epsilon: f64, delta: f64) -> Result<XnReport> {
    let set = build_xn(inst)?;
    let mut violations = Vec::new();
    for (i1, i2) in &set.pairs {
        let tuple = gram_tuple(i1, i2, &inst.form)?;
        let reasons = sn_violations(&tuple, inst)?;
        if !reasons.is_empty() {
            violations.push(XnViolation { first: *i1, second: *i2, tuple, reasons });
        }
    }
    let d = inst.q.four_d() as f64 / 4.0;
    let target_ratio = d.powf(1.0 + epsilon) / (inst.p as f64).powf((4.0 + 2.0 * delta) * inst.n as f64);
    Ok(XnReport {
        q: [inst.q.a(), inst.q.b(), inst.q.c()],
        det2: inst.form.det2().to_string(),
        p: inst.p,
        n: inst.n,
        primitive_representations: set.primitive_count,
        ordered_pairs: set.ordered_count(),
        unordered_pairs: set.unordered_count(),
        planar_test_exact: inst.planar_test_exact(),
        epsilon,
        delta,
        target_ratio,
        violations,
    })
}

/// A nonempty X(1) instance at `p = 3`: `q = (3,2,82)` on the sum of four squares.
/// The two listed representations differ only by the sign of a coordinate that is
/// `≡ 0 mod 9`.
pub fn constructed_instance() -> (CorrelationInstance, Representation, Representation) {
    let q = BinaryForm::new(3, 2, 82).expect("positive definite");
    let inst = CorrelationInstance::new(q, QuaternaryForm::sum_of_four_squares(), 3, 1).expect("valid instance");
    let i1 = Representation::new([0, 1, 1, 1], [9, 1, 0, 0]);
    let i2 = Representation::new([0, 1, 1, 1], [-9, 1, 0, 0]);
    (inst, i1, i2)
}

/// A family of nonempty instances: `q` represented by `v = (0, 1, 1, 1)` and
/// `w = (9k, 1, 0, 0)` on the sum of four squares, for `k = 1..=count`.
pub fn constructed_family(count: i64) -> Vec<CorrelationInstance> {
    (1..=count)
        .filter_map(|k| {
            let c = 81 * k * k + 1;
            let q = BinaryForm::new(3, 2, c).ok()?;
            CorrelationInstance::new(q, QuaternaryForm::sum_of_four_squares(), 3, 1).ok()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn e(i: usize) -> [i64; 4] {
        let mut v = [0; 4];
        v[i] = 1;
        v
    }

    fn neg(v: [i64; 4]) -> [i64; 4] {
        v.map(|x| -x)
    }

    fn squares_instance(p: u64, n: u32) -> CorrelationInstance {
        CorrelationInstance::new(BinaryForm::new(1, 0, 1).unwrap(), QuaternaryForm::sum_of_four_squares(), p, n).unwrap()
    }

    #[test]
    fn instance_validation() {
        let q = BinaryForm::new(1, 0, 1).unwrap();
        let form = QuaternaryForm::sum_of_four_squares();
        assert_eq!(CorrelationInstance::new(q, form.clone(), 2, 1), Err(Error::NotOddPrime(2)));
        assert_eq!(CorrelationInstance::new(q, form.clone(), 9, 1), Err(Error::NotOddPrime(9)));
        assert!(CorrelationInstance::new(q, form.clone(), 3, 0).is_err());
        assert!(CorrelationInstance::new(BinaryForm::new(2, 0, 2).unwrap(), form.clone(), 3, 1).is_err());
        assert!(CorrelationInstance::diagnostic(BinaryForm::new(2, 0, 2).unwrap(), form.clone(), 3, 1).is_ok());
        assert!(CorrelationInstance::new(BinaryForm::new(3, 2, 1).unwrap(), form, 3, 1).is_err());
    }

    #[test]
    fn rotation_examples() {
        let inst = squares_instance(3, 1);
        let i1 = Representation::new(e(0), e(1));
        assert!(rotation_congruent(&i1, &i1, &inst).unwrap());
        let rot = Representation::new(e(1), neg(e(0)));
        for (p, n) in [(3, 1), (3, 2), (5, 1), (7, 3)] {
            assert!(rotation_congruent(&i1, &rot, &squares_instance(p, n)).unwrap());
        }
        let other = Representation::new(e(2), e(3));
        assert!(!rotation_congruent(&i1, &other, &inst).unwrap());
        // A reflection has determinant −1.
        let refl = Representation::new(e(1), e(0));
        assert!(!rotation_congruent(&i1, &refl, &inst).unwrap());
    }

    #[test]
    fn rotation_rejects_non_primitive() {
        let inst = CorrelationInstance::diagnostic(BinaryForm::new(2, 0, 2).unwrap(), QuaternaryForm::sum_of_four_squares(), 3, 1).unwrap();
        let bad = Representation::new([1, 1, 0, 0], [1, -1, 0, 0]);
        assert_eq!(rotation_congruent(&bad, &bad, &inst), Err(Error::NotPrimitive));
    }

    #[test]
    fn xn_empty_for_unit_square() {
        let inst = squares_instance(3, 1);
        let set = build_xn(&inst).unwrap();
        assert_eq!(set.primitive_count, 48);
        assert!(set.pairs.is_empty());
        let report = xn_to_sn_check(&inst, 0.1, 0.1).unwrap();
        assert_eq!(report.ordered_pairs, 0);
        assert!(report.violations.is_empty());
        assert!(report.target_ratio > 0.0);
    }

    #[test]
    fn xn_brute_force_scan_on_unit_square() {
        let inst = squares_instance(3, 1);
        let reps = enumerate_representations(&inst.q, &inst.form, true).unwrap();
        let mut count = 0;
        for i1 in &reps {
            for i2 in &reps {
                if i1.image_hnf() != i2.image_hnf() && rotation_congruent(i1, i2, &inst).unwrap() {
                    count += 1;
                }
            }
        }
        assert_eq!(count, 0);
    }

    // Exhaustive search for g over (Z/N)^{2×2} as an oracle for the planar test.
    fn rotation_oracle(i1: &Representation, i2: &Representation, inst: &CorrelationInstance) -> bool {
        let n = inst.modulus(2).unwrap();
        let gram = gram_of(&inst.q);
        let md = |x: i128| x.rem_euclid(n);
        let (c1, c2) = (i1.columns(), i2.columns());
        for g00 in 0..n {
            for g10 in 0..n {
                if (0..4).any(|k| md(c1[0][k] as i128 * g00 + c1[1][k] as i128 * g10 - c2[0][k] as i128) != 0) {
                    continue;
                }
                for g01 in 0..n {
                    for g11 in 0..n {
                        let g = [[g00, g01], [g10, g11]];
                        let ok_m = (0..4).all(|k| md(c1[0][k] as i128 * g01 + c1[1][k] as i128 * g11 - c2[1][k] as i128) == 0);
                        let ok_det = md(g00 * g11 - g01 * g10) == 1;
                        let ok_gram = (0..2).all(|i| {
                            (0..2).all(|j| {
                                let s: i128 = (0..2).flat_map(|k| (0..2).map(move |l| (k, l))).map(|(k, l)| g[k][i] * gram[k][l] * g[l][j]).sum();
                                md(s - gram[i][j]) == 0
                            })
                        });
                        if ok_m && ok_det && ok_gram {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    #[test]
    fn rotation_matches_exhaustive_oracle() {
        let q = BinaryForm::new(2, 2, 3).unwrap();
        let form = QuaternaryForm::from_rows([[2, 1, 0, 0], [1, 4, 1, 0], [0, 1, 4, 1], [0, 0, 1, 6]]).unwrap();
        let inst = CorrelationInstance::new(q, form, 3, 1).unwrap();
        let reps = enumerate_representations(&inst.q, &inst.form, true).unwrap();
        assert!(!reps.is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..40 {
            let i1 = reps.choose(&mut rng).unwrap();
            let i2 = reps.choose(&mut rng).unwrap();
            assert_eq!(rotation_congruent(i1, i2, &inst).unwrap(), rotation_oracle(i1, i2, &inst), "{i1:?} {i2:?}");
        }
    }

    #[test]
    fn rotation_reflexive_symmetric_and_monotone() {
        let (inst, _, _) = constructed_instance();
        let inst2 = inst.at_level(2).unwrap();
        let reps = enumerate_representations(&inst.q, &inst.form, true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sample: Vec<_> = reps.choose_multiple(&mut rng, 40).copied().collect();
        for i1 in &sample {
            assert!(rotation_congruent(i1, i1, &inst).unwrap());
            for i2 in &sample {
                let fwd = rotation_congruent(i1, i2, &inst).unwrap();
                assert_eq!(fwd, rotation_congruent(i2, i1, &inst).unwrap());
                if rotation_congruent(i1, i2, &inst2).unwrap() {
                    assert!(fwd);
                }
            }
        }
    }

    #[test]
    fn constructed_instance_is_nonempty_and_maps_into_sn() {
        let (inst, i1, i2) = constructed_instance();
        assert!(i1.represents(&inst.q, &inst.form) && i2.represents(&inst.q, &inst.form));
        assert_ne!(i1.image_hnf(), i2.image_hnf());
        assert!(rotation_congruent(&i1, &i2, &inst).unwrap());
        let set = build_xn(&inst).unwrap();
        assert!(set.pairs.contains(&(i1, i2)) && set.pairs.contains(&(i2, i1)));
        assert_eq!(set.ordered_count(), 2 * set.unordered_count());
        assert_eq!(gram_tuple(&i1, &i2, &inst.form).unwrap(), GramTuple::new(0, [6, 2, 2, -160]));
        let report = xn_to_sn_check(&inst, 0.1, 0.1).unwrap();
        assert!(report.ordered_pairs >= 2);
        assert!(report.violations.is_empty(), "{:?}", report.violations);
    }

    #[test]
    fn xn_pairs_match_brute_force_pair_scan() {
        let (inst, _, _) = constructed_instance();
        let reps = enumerate_representations(&inst.q, &inst.form, true).unwrap();
        let mut brute = Vec::new();
        for i1 in &reps {
            for i2 in &reps {
                if i1.image_hnf() != i2.image_hnf() && rotation_congruent(i1, i2, &inst).unwrap() {
                    brute.push((*i1, *i2));
                }
            }
        }
        let mut built = build_xn(&inst).unwrap().pairs;
        built.sort();
        brute.sort();
        assert_eq!(built, brute);
    }
}
