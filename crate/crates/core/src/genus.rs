//! Kneser p-neighbors, isometry testing, automorphism counts and the spin-genus-averaged
//! representation number.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exactmath::arith::{inv_mod_i128, is_prime_u64};
use crate::exactmath::lattice::{minkowski_gram, short_vectors_reduced, ShortVectorOptions};
use crate::exactmath::normal_form::{congruence_kernel, hnf};
use crate::exactmath::IntMatrix;
use crate::forms::{is_primitive_binary, min_quaternary, reduced_primitive_forms, splitting_check, BinaryForm, QuaternaryForm};
use crate::reps::{count_representations, is_primitive_rep, vectors_of_norm, Representation, Vec4};

pub const DEFAULT_CLASS_BUDGET: usize = 512;
/// Number of theta coefficients compared before an isometry search.
pub const THETA_PREFIX: usize = 20;
/// Normalization used for the averaged representation number.
pub const R_SPIN_NORMALIZATION: &str = "sum_j r(q,Q_j)/|Aut(Q_j)| divided by sum_j 1/|Aut(Q_j)|";

type Gram = [[i64; 4]; 4];

/// A class in a spin genus with its reduced representative.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenusClass {
    pub form: QuaternaryForm,
    pub aut_order: u64,
    theta: Vec<u64>,
}

impl GenusClass {
    pub fn new(form: &QuaternaryForm) -> Result<Self> {
        let form = reduce_form(form)?;
        let aut_order = automorphism_order(&form);
        let theta = theta_prefix(&form, THETA_PREFIX)?;
        Ok(GenusClass { form, aut_order, theta })
    }

    pub fn theta(&self) -> &[u64] {
        &self.theta
    }

    fn is_isometric_to(&self, other: &GenusClass) -> bool {
        self.form.det2() == other.form.det2() && self.theta == other.theta && find_isometries(other.form.entries(), self.form.entries(), false) > 0
    }
}

/// The p-neighbor closure of a form.
#[derive(Clone, Debug)]
pub struct SpinGenus {
    pub classes: Vec<GenusClass>,
    pub p: u64,
    pub mass: BigRational,
}

impl SpinGenus {
    /// JSON dump: list of `{gram2, autOrder}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(self.classes.iter().map(|c| serde_json::json!({ "gram2": c.form.entries(), "autOrder": c.aut_order })).collect())
    }

    /// Whether both closures contain the same classes up to isometry.
    pub fn same_classes(&self, other: &SpinGenus) -> bool {
        self.classes.len() == other.classes.len() && self.classes.iter().all(|c| other.classes.iter().any(|d| c.is_isometric_to(d)))
    }
}

/// Minkowski-reduced representative of the class of `q`.
pub fn reduce_form(q: &QuaternaryForm) -> Result<QuaternaryForm> {
    let t = minkowski_gram(q.gram2())?;
    q.transform(&t.transpose())
}

/// Number of `v` with `Q(v) = k` for `k < len`.
pub fn theta_prefix(q: &QuaternaryForm, len: usize) -> Result<Vec<u64>> {
    let mut out = vec![0u64; len.max(1)];
    out[0] = 1;
    if len <= 1 {
        return Ok(out);
    }
    let bound = BigInt::from(2 * (len as i64 - 1));
    let opts = ShortVectorOptions { one_per_pair: false, exact_norm: false };
    for (_, norm) in short_vectors_reduced(q.gram2(), &bound, opts)? {
        let k = (norm / 2u32).to_usize().expect("bounded norm");
        out[k] += 1;
    }
    Ok(out)
}

fn pair(g: &Gram, u: &Vec4, v: &Vec4) -> i128 {
    let mut s = 0i128;
    for i in 0..4 {
        for j in 0..4 {
            s += u[i] as i128 * g[i][j] as i128 * v[j] as i128;
        }
    }
    s
}

/// Number of `U` with `Uᵀ·target·U = source` (stopping at the first when `count_all` is false).
/// Columns of `U` are drawn from short vectors of `target`; `source` should be reduced.
fn find_isometries(source: &Gram, target: &Gram, count_all: bool) -> u64 {
    let target_form = QuaternaryForm::from_rows(*target).expect("positive definite");
    let mut buckets: BTreeMap<i64, Vec<Vec4>> = BTreeMap::new();
    for i in 0..4 {
        let n = source[i][i];
        buckets.entry(n).or_insert_with(|| vectors_of_norm(&target_form, n).expect("positive definite"));
    }
    let cands: Vec<&Vec<Vec4>> = (0..4).map(|i| &buckets[&source[i][i]]).collect();
    let mut chosen: Vec<Vec4> = Vec::with_capacity(4);
    let mut count = 0u64;
    backtrack(source, target, &cands, &mut chosen, count_all, &mut count);
    count
}

fn backtrack(source: &Gram, target: &Gram, cands: &[&Vec<Vec4>], chosen: &mut Vec<Vec4>, count_all: bool, count: &mut u64) {
    let k = chosen.len();
    if k == 4 {
        *count += 1;
        return;
    }
    for v in cands[k].iter() {
        if (0..k).all(|j| pair(target, &chosen[j], v) == source[j][k] as i128) {
            chosen.push(*v);
            backtrack(source, target, cands, chosen, count_all, count);
            chosen.pop();
            if !count_all && *count > 0 {
                return;
            }
        }
    }
}

/// Order of the integral automorphism group of `Q`.
pub fn automorphism_order(q: &QuaternaryForm) -> u64 {
    let reduced = reduce_form(q).expect("positive definite");
    find_isometries(reduced.entries(), reduced.entries(), true)
}

/// Oracle for [`automorphism_order`]: count `U` with `Uᵀ·G·U = G` whose columns lie in
/// the box `[-radius, radius]⁴`, scanning the box once per column.
pub fn automorphism_order_bruteforce(q: &QuaternaryForm, radius: i64) -> u64 {
    let g = q.entries();
    let r = radius;
    let mut boxed = Vec::new();
    for a in -r..=r {
        for b in -r..=r {
            for c in -r..=r {
                for d in -r..=r {
                    boxed.push([a, b, c, d]);
                }
            }
        }
    }
    let cols: Vec<Vec<Vec4>> = (0..4).map(|i| boxed.iter().filter(|v| q.pairing(v, v) == g[i][i] as i128).copied().collect()).collect();
    let mut count = 0;
    for u0 in &cols[0] {
        for u1 in &cols[1] {
            for u2 in &cols[2] {
                for u3 in &cols[3] {
                    let us = [u0, u1, u2, u3];
                    if (0..4).all(|i| (0..4).all(|j| q.pairing(us[i], us[j]) == g[i][j] as i128)) {
                        count += 1;
                    }
                }
            }
        }
    }
    count
}

/// Whether an integral `U` with `Uᵀ·gram2(Q1)·U = gram2(Q2)` exists.
pub fn isometric(q1: &QuaternaryForm, q2: &QuaternaryForm) -> bool {
    if q1.det2() != q2.det2() || min_quaternary(q1) != min_quaternary(q2) {
        return false;
    }
    match (GenusClass::new(q1), GenusClass::new(q2)) {
        (Ok(a), Ok(b)) => a.is_isometric_to(&b),
        _ => false,
    }
}

fn check_neighbor_prime(q: &QuaternaryForm, p: u64) -> Result<()> {
    if p == 2 || !is_prime_u64(p) {
        return Err(Error::NotOddPrime(p));
    }
    if q.det2().is_multiple_of(&BigInt::from(p)) {
        return Err(Error::Precondition(format!("{p} divides det2 = {}", q.det2())));
    }
    Ok(())
}

/// Normalized representatives of the lines of `F_p^4` (first nonzero coordinate 1).
fn projective_points(p: i64) -> Vec<Vec4> {
    let mut out = Vec::new();
    for lead in 0..4 {
        let free = 3 - lead;
        let count = p.pow(free as u32);
        for idx in 0..count {
            let mut v = [0i64; 4];
            v[lead] = 1;
            let mut r = idx;
            for slot in v.iter_mut().skip(lead + 1) {
                *slot = r % p;
                r /= p;
            }
            out.push(v);
        }
    }
    out
}

/// The p-neighbor of `Q` along the isotropic line of `v`, reduced.
fn neighbor(q: &QuaternaryForm, v: Vec4, p: i64) -> Result<QuaternaryForm> {
    let g = q.entries();
    let pp = p as i128;
    let gv: Vec<i128> = (0..4).map(|i| (0..4).map(|j| g[i][j] as i128 * v[j] as i128).sum()).collect();
    let k = (0..4).find(|&i| gv[i].rem_euclid(pp) != 0).expect("p does not divide det2");
    let qv = q.value(&v);
    let t = (-(qv / pp) * inv_mod_i128(gv[k], pp).expect("unit")).rem_euclid(pp);
    let mut lift = v;
    lift[k] += (p as i128 * t) as i64;
    debug_assert_eq!(q.value(&lift).rem_euclid(pp * pp), 0);
    let row = IntMatrix::from_rows(&[gv.iter().map(|&x| BigInt::from(x)).collect::<Vec<_>>()]);
    let kernel = congruence_kernel(&row, &BigInt::from(p));
    let mut gens = IntMatrix::zeros(5, 4);
    for i in 0..4 {
        for j in 0..4 {
            gens[(i, j)] = &kernel[(i, j)] * p;
        }
    }
    for j in 0..4 {
        gens[(4, j)] = BigInt::from(lift[j]);
    }
    let (h, _) = hnf(&gens);
    let rows: Vec<Vec<BigInt>> = h.row_vecs().into_iter().filter(|r| r.iter().any(|x| !x.is_zero())).collect();
    if rows.len() != 4 {
        return Err(Error::Inconsistent("neighbor lattice has wrong rank".into()));
    }
    let b = IntMatrix::from_rows(&rows);
    let scaled = b.transpose().congruent(q.gram2());
    let p2 = BigInt::from(p * p);
    let mut gram = IntMatrix::zeros(4, 4);
    for i in 0..4 {
        for j in 0..4 {
            let (quo, rem) = scaled[(i, j)].div_rem(&p2);
            if !rem.is_zero() {
                return Err(Error::Inconsistent("neighbor Gram matrix is not integral".into()));
            }
            gram[(i, j)] = quo;
        }
    }
    reduce_form(&QuaternaryForm::from_gram2(&gram)?)
}

/// All p-neighbors of `Q` up to isometry, in line order.
pub fn p_neighbors(q: &QuaternaryForm, p: u64) -> Result<Vec<QuaternaryForm>> {
    check_neighbor_prime(q, p)?;
    let pi = p as i64;
    let lines: Vec<Vec4> = projective_points(pi).into_iter().filter(|v| q.value(v).rem_euclid(pi as i128) == 0).collect();
    let forms: Vec<QuaternaryForm> = lines.into_par_iter().map(|v| neighbor(q, v, pi)).collect::<Result<_>>()?;
    let mut classes: Vec<GenusClass> = Vec::new();
    for f in forms {
        let c = GenusClass::new(&f)?;
        if !classes.iter().any(|d| d.is_isometric_to(&c)) {
            classes.push(c);
        }
    }
    Ok(classes.into_iter().map(|c| c.form).collect())
}

/// Breadth-first p-neighbor closure of `Q`.
pub fn spin_closure(q: &QuaternaryForm, p: u64, class_budget: usize) -> Result<SpinGenus> {
    check_neighbor_prime(q, p)?;
    let mut classes = vec![GenusClass::new(q)?];
    let mut next = 0;
    while next < classes.len() {
        for n in p_neighbors(&classes[next].form, p)? {
            let c = GenusClass::new(&n)?;
            if classes.iter().any(|d| d.is_isometric_to(&c)) {
                continue;
            }
            if classes.len() >= class_budget {
                return Err(Error::Budget(format!("spin closure exceeds {class_budget} classes")));
            }
            classes.push(c);
        }
        next += 1;
    }
    let mass = classes.iter().map(|c| BigRational::new(BigInt::one(), BigInt::from(c.aut_order))).sum();
    Ok(SpinGenus { classes, p, mass })
}

fn primitive_count(q: &BinaryForm, form: &QuaternaryForm) -> Result<u64> {
    Ok(count_representations(q, form)?.1)
}

/// `Σ_j r(q,Q_j)/|Aut_j| / Σ_j 1/|Aut_j|` with `r` the primitive representation count.
pub fn r_spin(q: &BinaryForm, sg: &SpinGenus) -> Result<BigRational> {
    if !q.is_reduced() {
        return Err(Error::Precondition(format!("q = ({}, {}, {}) is not reduced", q.a(), q.b(), q.c())));
    }
    let mut total = BigRational::zero();
    for c in &sg.classes {
        total += BigRational::new(BigInt::from(primitive_count(q, &c.form)?), BigInt::from(c.aut_order));
    }
    Ok(total / &sg.mass)
}

/// Parameters of the comparison report.
#[derive(Clone, Debug)]
pub struct Theorem13Params {
    /// Prime for the neighbor closure; defaults to the least odd prime not dividing det2.
    pub neighbor_prime: Option<u64>,
    pub class_budget: usize,
}

impl Default for Theorem13Params {
    fn default() -> Self {
        Theorem13Params { neighbor_prime: None, class_budget: DEFAULT_CLASS_BUDGET }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Hypotheses {
    pub q_primitive: bool,
    pub q_reduced: bool,
    pub splitting_p1: bool,
    pub splitting_p2: bool,
    pub represented_by_spin_genus: bool,
}

impl Hypotheses {
    pub fn all(&self) -> bool {
        self.q_primitive && self.q_reduced && self.splitting_p1 && self.splitting_p2 && self.represented_by_spin_genus
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Theorem13Report {
    pub q: [i64; 3],
    pub gram2: Gram,
    pub p1: u64,
    pub p2: u64,
    pub neighbor_prime: u64,
    pub classes: usize,
    pub mass: String,
    pub hypotheses: Hypotheses,
    pub hypotheses_met: bool,
    pub status: String,
    pub r_q_form: u64,
    pub r_spin: String,
    pub r_spin_value: f64,
    pub ratio: Option<String>,
    pub ratio_value: Option<f64>,
    pub normalization: String,
}

/// Least odd prime not dividing `det2`.
pub fn default_neighbor_prime(q: &QuaternaryForm) -> u64 {
    let mut p = 3u64;
    while q.det2().is_multiple_of(&BigInt::from(p)) {
        p = crate::exactmath::arith::next_prime(p + 1);
    }
    p
}

fn check_prime_pair(p1: u64, p2: u64) -> Result<()> {
    for p in [p1, p2] {
        if p == 2 || !is_prime_u64(p) {
            return Err(Error::NotOddPrime(p));
        }
    }
    if p1 == p2 {
        return Err(Error::Precondition("p1 and p2 must differ".into()));
    }
    Ok(())
}

fn ratio_string(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn to_f64(r: &BigRational) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

/// Compute the spin genus once for repeated reports.
pub fn closure_for(form: &QuaternaryForm, params: &Theorem13Params) -> Result<SpinGenus> {
    let p = params.neighbor_prime.unwrap_or_else(|| default_neighbor_prime(form));
    spin_closure(form, p, params.class_budget)
}

/// Hypotheses, `r(q,Q)`, `r(q,spin(Q))` and their ratio.
pub fn theorem13_report(q: &BinaryForm, form: &QuaternaryForm, p1: u64, p2: u64, params: &Theorem13Params) -> Result<Theorem13Report> {
    let sg = closure_for(form, params)?;
    theorem13_report_with(q, form, p1, p2, &sg)
}

pub fn theorem13_report_with(q: &BinaryForm, form: &QuaternaryForm, p1: u64, p2: u64, sg: &SpinGenus) -> Result<Theorem13Report> {
    check_prime_pair(p1, p2)?;
    let r_q = primitive_count(q, form)?;
    let rs = if q.is_reduced() { r_spin(q, sg)? } else { BigRational::zero() };
    let hypotheses = Hypotheses {
        q_primitive: is_primitive_binary(q),
        q_reduced: q.is_reduced(),
        splitting_p1: splitting_check(q, form, p1)?,
        splitting_p2: splitting_check(q, form, p2)?,
        represented_by_spin_genus: !rs.is_zero(),
    };
    let met = hypotheses.all();
    let ratio = (!rs.is_zero()).then(|| BigRational::from_integer(BigInt::from(r_q)) / &rs);
    Ok(Theorem13Report {
        q: [q.a(), q.b(), q.c()],
        gram2: *form.entries(),
        p1,
        p2,
        neighbor_prime: sg.p,
        classes: sg.classes.len(),
        mass: ratio_string(&sg.mass),
        hypotheses_met: met,
        status: if met { "hypotheses met".into() } else { "hypotheses not met".into() },
        hypotheses,
        r_q_form: r_q,
        r_spin: ratio_string(&rs),
        r_spin_value: to_f64(&rs),
        ratio_value: ratio.as_ref().map(to_f64),
        ratio: ratio.as_ref().map(ratio_string),
        normalization: R_SPIN_NORMALIZATION.into(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyMinimum {
    pub q: [i64; 3],
    pub ratio: String,
    pub ratio_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyScan {
    pub max_four_d: i64,
    pub forms_scanned: usize,
    pub forms_meeting_hypotheses: usize,
    pub minimum: Option<FamilyMinimum>,
    pub normalization: String,
}

/// Primitive representation counts of every reduced `(a, b, c)` for one class,
/// keyed by `b`, sharing the vector lists of norms `2a` and `2c`.
fn counts_by_b(form: &QuaternaryForm, a: i64, c: i64, bs: &[i64]) -> Result<BTreeMap<i64, u64>> {
    let firsts = vectors_of_norm(form, 2 * a)?;
    let seconds = if a == c { firsts.clone() } else { vectors_of_norm(form, 2 * c)? };
    let g = form.entries();
    let lo = *bs.iter().min().unwrap();
    let hi = *bs.iter().max().unwrap();
    let mut out: BTreeMap<i64, u64> = bs.iter().map(|&b| (b, 0)).collect();
    for u in &firsts {
        let gu: [i64; 4] = std::array::from_fn(|j| (0..4).map(|i| u[i] * g[i][j]).sum());
        for v in &seconds {
            let b = (0..4).map(|j| gu[j] * v[j]).sum::<i64>();
            if b < lo || b > hi {
                continue;
            }
            if let Some(slot) = out.get_mut(&b) {
                if is_primitive_rep(&Representation::new(*u, *v))? {
                    *slot += 1;
                }
            }
        }
    }
    Ok(out)
}

/// Minimum of `r(q,Q)/r(q,spin(Q))` over reduced primitive `q` with `fourD ≤ max_four_d`
/// meeting the hypotheses.
pub fn family_scan(form: &QuaternaryForm, p1: u64, p2: u64, max_four_d: i64, sg: &SpinGenus) -> Result<FamilyScan> {
    check_prime_pair(p1, p2)?;
    let forms = reduced_primitive_forms(3, max_four_d);
    let candidates: Vec<&BinaryForm> =
        forms.iter().filter(|q| splitting_check(q, form, p1).unwrap_or(false) && splitting_check(q, form, p2).unwrap_or(false)).collect();
    let mut groups: BTreeMap<(i64, i64), Vec<i64>> = BTreeMap::new();
    for q in &candidates {
        groups.entry((q.a(), q.c())).or_default().push(q.b());
    }
    let group_list: Vec<((i64, i64), Vec<i64>)> = groups.into_iter().collect();
    let ratios: Vec<Vec<([i64; 3], BigRational)>> = group_list
        .par_iter()
        .map(|((a, c), bs)| -> Result<Vec<([i64; 3], BigRational)>> {
            let own = counts_by_b(form, *a, *c, bs)?;
            let mut weighted: BTreeMap<i64, BigRational> = bs.iter().map(|&b| (b, BigRational::zero())).collect();
            for class in &sg.classes {
                let counts = counts_by_b(&class.form, *a, *c, bs)?;
                for (b, n) in counts {
                    *weighted.get_mut(&b).unwrap() += BigRational::new(BigInt::from(n), BigInt::from(class.aut_order));
                }
            }
            Ok(bs
                .iter()
                .filter_map(|b| {
                    let rs = &weighted[b] / &sg.mass;
                    (!rs.is_zero()).then(|| ([*a, *b, *c], BigRational::from_integer(BigInt::from(own[b])) / rs))
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let all: Vec<([i64; 3], BigRational)> = ratios.into_iter().flatten().collect();
    let minimum = all.iter().min_by(|x, y| x.1.cmp(&y.1).then_with(|| x.0.cmp(&y.0))).map(|(q, r)| FamilyMinimum {
        q: *q,
        ratio: ratio_string(r),
        ratio_value: to_f64(r),
    });
    Ok(FamilyScan {
        max_four_d,
        forms_scanned: forms.len(),
        forms_meeting_hypotheses: all.len(),
        minimum,
        normalization: R_SPIN_NORMALIZATION.into(),
    })
}
