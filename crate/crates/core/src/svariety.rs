//! The point sets S(n) on the degree-4 variety, their residue fibers, the lattices
//! `Λ_w` of linearized congruences, and the per-fiber curves.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::correlation::CorrelationInstance;
use crate::error::{Error, Result};
use crate::exactmath::arith::{inv_mod_i128, isqrt_big, isqrt_u128, perfect_square_part_i128, valuation_i128};
use crate::exactmath::lattice::{reduce_basis, LatticeBasis};
use crate::exactmath::normal_form::{congruence_kernel, congruence_solution_count, lattice_index};
use crate::exactmath::poly::{poly_square_root, IntPolynomial};
use crate::exactmath::IntMatrix;
use crate::reps::{degree4_rhs, GramTuple};

/// A point `(x0, X1, X2, X3, X4)` of S(n) in doubled coordinates.
pub type SnPoint = GramTuple;

/// Default cap on walker nodes for [`enumerate_sn`].
pub const DEFAULT_NODE_BUDGET: u64 = 50_000_000_000;

/// Largest `fourD` handled by the `i128` walker.
pub const MAX_FOUR_D: i64 = 1_000_000_000;

/// Instance constants in machine integers.
#[derive(Clone, Copy, Debug)]
struct System {
    a: i128,
    b: i128,
    c: i128,
    four_d: i128,
    det2: Option<i128>,
    modulus: i128,
    radius: i128,
    /// Residues mod 64 of `det2·k²`.
    square_mask: u64,
}

impl System {
    fn new(inst: &CorrelationInstance, level_factor: u32) -> Result<Self> {
        if inst.q.four_d() > MAX_FOUR_D {
            return Err(Error::Overflow("fourD exceeds the i128 walker range"));
        }
        let (a, b, c) = (inst.q.a() as i128, inst.q.b() as i128, inst.q.c() as i128);
        Ok(System {
            a,
            b,
            c,
            four_d: inst.q.four_d() as i128,
            det2: inst.form.det2().to_i128(),
            modulus: inst.modulus(level_factor)?,
            radius: isqrt_u128((4 * a * c) as u128) as i128,
            square_mask: inst.form.det2().to_u64().map_or(u64::MAX, |d| (0..64u64).fold(0, |m, k| m | 1 << (d % 64 * (k * k % 64) % 64))),
        })
    }

    fn s(&self, x: &[i64; 4]) -> i128 {
        let [x1, x2, x3, x4] = x.map(|v| v as i128);
        let t = x2 + x3;
        let core = x1 * x4 - x2 * x3 - self.four_d;
        let lin = self.c * x1 - self.a * x4;
        core * core - 4 * lin * lin - 4 * (self.b * x1 - self.a * t) * (self.b * x4 - self.c * t)
    }

    fn in_bounds(&self, x: &[i64; 4]) -> bool {
        let [x1, x2, x3, x4] = x.map(|v| v as i128);
        x1.abs() <= 2 * self.a && x2 * x2 <= 4 * self.a * self.c && x3 * x3 <= 4 * self.a * self.c && x4.abs() <= 2 * self.c
    }

    fn congruences(&self, x: &[i64; 4]) -> [bool; 4] {
        let [x1, x2, x3, x4] = x.map(|v| v as i128);
        let m = self.modulus;
        let t = x2 + x3;
        [
            (x1 * x4 - x2 * x3 - self.four_d).rem_euclid(m) == 0,
            (self.c * x1 - self.a * x4).rem_euclid(m) == 0,
            (self.c * t - self.b * x4).rem_euclid(m) == 0,
            (self.a * t - self.b * x1).rem_euclid(m) == 0,
        ]
    }

    fn boundary_ok(&self, x0: i64, x: &[i64; 4]) -> bool {
        let [x1, x2, x3, x4] = x.map(|v| v as i128);
        let check = |edge: i128| {
            let sb = edge.signum() * self.b;
            x0 == 0 && x2 == sb && x3 == sb
        };
        (x1.abs() != 2 * self.a || check(x1)) && (x4.abs() != 2 * self.c || check(x4))
    }

    /// `x0` when `s` is `det2` times a square and the boundary rules hold.
    fn solve_x0(&self, x: &[i64; 4]) -> Option<i64> {
        self.x0_from_s(self.s(x), x)
    }

    fn x0_from_s(&self, s: i128, x: &[i64; 4]) -> Option<i64> {
        if s < 0 || (self.square_mask >> (s as u128 & 63)) & 1 == 0 {
            return None;
        }
        if let (Ok(s64), Some(d)) = (u64::try_from(s), self.det2) {
            let d = d as u64;
            if s64 % d != 0 {
                return None;
            }
            let r = isqrt_u128((s64 / d) as u128) as u64;
            let x0 = i64::try_from(r).ok().filter(|_| r * r == s64 / d)?;
            return self.boundary_ok(x0, x).then_some(x0);
        }
        let x0 = match self.det2 {
            Some(d) => perfect_square_part_i128(s, d)?,
            None => (s == 0).then_some(0)?,
        };
        let x0 = i64::try_from(x0).ok()?;
        self.boundary_ok(x0, x).then_some(x0)
    }
}

/// Every constraint of S(n) that `t` violates; empty iff `t ∈ S(n)`.
pub fn sn_violations(t: &GramTuple, inst: &CorrelationInstance) -> Result<Vec<String>> {
    let sys = System::new(inst, 4)?;
    let mut out = Vec::new();
    if t.x0 < 0 {
        out.push("x0 negative".to_string());
    }
    let s = degree4_rhs(&inst.q, &t.x);
    if inst.form.det2() * BigInt::from(t.x0) * BigInt::from(t.x0) != s {
        out.push(format!("degree-4 identity fails: s = {s}"));
    }
    if !sys.in_bounds(&t.x) {
        out.push("Cauchy-Schwarz bounds".to_string());
    }
    const NAMES: [&str; 4] = ["X1X4 - X2X3 = fourD", "cX1 - aX4 = 0", "c(X2+X3) - bX4 = 0", "a(X2+X3) - bX1 = 0"];
    for (ok, name) in sys.congruences(&t.x).iter().zip(NAMES) {
        if !ok {
            out.push(format!("congruence {name} fails mod p^4n"));
        }
    }
    if !sys.boundary_ok(t.x0, &t.x) {
        out.push("boundary rule".to_string());
    }
    Ok(out)
}

/// Whether `t` satisfies every constraint of S(n).
pub fn sn_membership(t: &GramTuple, inst: &CorrelationInstance) -> bool {
    sn_violations(t, inst).is_ok_and(|v| v.is_empty())
}

fn budget_error(budget: u64) -> Error {
    Error::Budget(format!("S(n) enumeration exceeded {budget} nodes"))
}

/// S(n), sorted, with the default node budget.
pub fn enumerate_sn(inst: &CorrelationInstance) -> Result<Vec<SnPoint>> {
    enumerate_sn_with_budget(inst, DEFAULT_NODE_BUDGET)
}

/// S(n), sorted. Walks the lattice of the three linear congruences in Hermite
/// coordinates `(c1, c2, c3)` inside the Cauchy-Schwarz box and solves the quadratic
/// congruence and `s ≥ 0` for the arithmetic progression of `X4`.
pub fn enumerate_sn_with_budget(inst: &CorrelationInstance, budget: u64) -> Result<Vec<SnPoint>> {
    let sys = System::new(inst, 4)?;
    let m = sys.modulus;
    let rows = IntMatrix::from_rows(&[vec![sys.c, 0, 0, -sys.a], vec![0, sys.c, sys.c, -sys.b], vec![-sys.b, sys.a, sys.a, 0]]);
    let kernel = congruence_kernel(&rows, &BigInt::from(m));
    let mut h = [[0i128; 4]; 4];
    for (i, row) in h.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = kernel[(i, j)].to_i128().ok_or(Error::Overflow("kernel basis"))?;
        }
        debug_assert!(row[i] > 0 && row[..i].iter().all(|&v| v == 0));
    }
    let nodes = AtomicU64::new(0);
    let exceeded = AtomicBool::new(false);
    let bound1 = 2 * sys.a;
    let c1_range: Vec<i128> = (div_ceil(-bound1, h[0][0])..=div_floor(bound1, h[0][0])).collect();
    let chunks: Vec<Vec<SnPoint>> = c1_range
        .par_iter()
        .map(|&c1| {
            if exceeded.load(Ordering::Relaxed) {
                return Vec::new();
            }
            let (out, used) = walk_first_coefficient(&sys, &h, c1);
            if nodes.fetch_add(used, Ordering::Relaxed) + used > budget {
                exceeded.store(true, Ordering::Relaxed);
            }
            out
        })
        .collect();
    if exceeded.load(Ordering::Relaxed) {
        return Err(budget_error(budget));
    }
    let mut points: Vec<SnPoint> = chunks.into_iter().flatten().collect();
    points.sort_unstable();
    Ok(points)
}

fn div_floor(a: i128, b: i128) -> i128 {
    Integer::div_floor(&a, &b)
}

fn div_ceil(a: i128, b: i128) -> i128 {
    -div_floor(-a, b)
}

/// All points with first Hermite coefficient `c1`, and the number of nodes visited.
fn walk_first_coefficient(sys: &System, h: &[[i128; 4]; 4], c1: i128) -> (Vec<SnPoint>, u64) {
    let m = sys.modulus;
    let r = sys.radius;
    let x1 = c1 * h[0][0];
    let lead = (x1 * h[3][3]).rem_euclid(m);
    let g = lead.gcd(&m);
    let step = m / g;
    let inv = if step == 1 { 0 } else { inv_mod_i128(lead / g, step).expect("coprime after dividing by gcd") };
    let alpha_neg = 4 * sys.a * sys.a - x1 * x1;
    let edge = alpha_neg == 0;
    let mut out = Vec::new();
    let mut nodes = 0u64;
    let x2_off = c1 * h[0][1];
    for c2 in div_ceil(-r - x2_off, h[1][1])..=div_floor(r - x2_off, h[1][1]) {
        let x2 = x2_off + c2 * h[1][1];
        let x3_off = c1 * h[0][2] + c2 * h[1][2];
        let x4_off = c1 * h[0][3] + c2 * h[1][3];
        nodes += 1;
        // rhs(c3) = fd + X2·X3 − X1·base is affine in c3; it must vanish mod g.
        let rhs0 = (sys.four_d + x2 * x3_off - x1 * x4_off).rem_euclid(g);
        let slope = (x2 * h[2][2] - x1 * h[2][3]).rem_euclid(g);
        let g3 = slope.gcd(&g);
        if rhs0 % g3 != 0 {
            continue;
        }
        let step3 = g / g3;
        let c3_res = if step3 == 1 {
            0
        } else {
            let inv3 = inv_mod_i128(slope / g3, step3).expect("coprime after dividing by gcd");
            ((g - rhs0) / g3 % step3) * inv3 % step3
        };
        let c3_lo = div_ceil(-r - x3_off, h[2][2]);
        let c3_hi = div_floor(r - x3_off, h[2][2]);
        let mut c3 = c3_lo + (c3_res - c3_lo).rem_euclid(step3);
        while c3 <= c3_hi {
            let c3_cur = c3;
            c3 += step3;
            nodes += 1;
            let x3 = x3_off + c3_cur * h[2][2];
            let base = x4_off + c3_cur * h[2][3];
            let rhs = (sys.four_d + x2 * x3 - x1 * base).rem_euclid(m);
            debug_assert_eq!(rhs % g, 0);
            let t0 = ((rhs / g) % step) * inv % step;
            let (lo, hi) = if edge {
                let sb = x1.signum() * sys.b;
                if x2 != sb || x3 != sb {
                    continue;
                }
                (-2 * sys.c, 2 * sys.c)
            } else {
                let t = x2 + x3;
                let k = x2 * x3 + sys.four_d;
                let u = sys.b * x1 - sys.a * t;
                let beta = -2 * k * x1 + 8 * sys.a * sys.c * x1 - 4 * sys.b * u;
                let gamma = k * k - 4 * sys.c * sys.c * x1 * x1 + 4 * sys.c * t * u;
                let disc = beta * beta + 4 * alpha_neg * gamma;
                if disc < 0 {
                    continue;
                }
                let sq = isqrt_u128(disc as u128) as i128;
                let den = 2 * alpha_neg;
                let lo = div_floor(beta - sq - 1, den).max(-2 * sys.c);
                let hi = div_ceil(beta + sq + 1, den).min(2 * sys.c);
                (lo, hi)
            };
            if lo > hi {
                continue;
            }
            let t_lo = div_ceil(lo - base, h[3][3]);
            let t_hi = div_floor(hi - base, h[3][3]);
            let t_first = t_lo + (t0 - t_lo).rem_euclid(step);
            if t_first > t_hi {
                continue;
            }
            // s is quadratic in X4: walk it by first and second differences.
            let dx = step * h[3][3];
            let mut x4 = base + t_first * h[3][3];
            let mut x = [x1 as i64, x2 as i64, x3 as i64, x4 as i64];
            let mut s = sys.s(&x);
            let mut ds = sys.s(&[x[0], x[1], x[2], (x4 + dx) as i64]) - s;
            let dds = -2 * alpha_neg * dx * dx;
            for _ in 0..=(t_hi - t_first) / step {
                nodes += 1;
                x[3] = x4 as i64;
                if let Some(x0) = sys.x0_from_s(s, &x) {
                    out.push(GramTuple::new(x0, x));
                }
                s += ds;
                ds += dds;
                x4 += dx;
            }
        }
    }
    (out, nodes)
}

/// S(n) by scanning the full Cauchy-Schwarz box. Oracle for [`enumerate_sn`].
pub fn enumerate_sn_bruteforce(inst: &CorrelationInstance, budget: u64) -> Result<Vec<SnPoint>> {
    let sys = System::new(inst, 4)?;
    let (a, c, r, m) = (sys.a as i64, sys.c as i64, sys.radius as i64, sys.modulus);
    let volume = (4 * a as u128 + 1) * (4 * c as u128 + 1) * (2 * r as u128 + 1).pow(2);
    if volume / m as u128 > budget as u128 {
        return Err(budget_error(budget));
    }
    let mut out = Vec::new();
    for x1 in -2 * a..=2 * a {
        for x4 in -2 * c..=2 * c {
            if (sys.c * x1 as i128 - sys.a * x4 as i128).rem_euclid(m) != 0 {
                continue;
            }
            for x2 in -r..=r {
                for x3 in -r..=r {
                    let x = [x1, x2, x3, x4];
                    if !sys.congruences(&x).iter().all(|&ok| ok) {
                        continue;
                    }
                    if let Some(x0) = sys.solve_x0(&x) {
                        out.push(GramTuple::new(x0, x));
                    }
                }
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Points of S(n) with `X1 = 2a`, `X2 = X3 = b`, `x0 = 0`, counted directly on the slice.
pub fn diagonal_slice_count(inst: &CorrelationInstance) -> Result<u64> {
    let sys = System::new(inst, 4)?;
    let (a, b, c) = (inst.q.a(), inst.q.b(), inst.q.c());
    let mut count = 0;
    for x4 in -2 * c..=2 * c {
        let x = [2 * a, b, b, x4];
        if sys.congruences(&x).iter().all(|&ok| ok) && sys.s(&x) == 0 && sys.boundary_ok(0, &x) {
            count += 1;
        }
    }
    Ok(count)
}

/// Points of S(n) with `X1 = X4` and `X2 = −X3`, counted directly on the slice.
pub fn antidiagonal_slice_count(inst: &CorrelationInstance) -> Result<u64> {
    let sys = System::new(inst, 4)?;
    let lim = 2 * inst.q.a().min(inst.q.c());
    let r = sys.radius as i64;
    let mut count = 0;
    for x1 in -lim..=lim {
        for x2 in -r..=r {
            let x = [x1, x2, -x2, x1];
            if sys.congruences(&x).iter().all(|&ok| ok) && sys.solve_x0(&x).is_some() {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// Level rule `n = max{n ≥ 1 : p^{(2+δ)n} ≤ (fourD/4)^{1/4}}`, clamped to 1.
pub fn level_for(four_d: i64, p: u64, delta: f64) -> u32 {
    let target = (four_d as f64 / 4.0).ln() / 4.0;
    let per_level = (2.0 + delta) * (p as f64).ln();
    ((target / per_level).floor() as i64).max(1) as u32
}

/// Residue classes `X mod p^{2n}` that solve the four congruences modulo `p^{2n}`.
pub fn fiber_class_bound(inst: &CorrelationInstance, cap: i128) -> Result<Option<u64>> {
    let sys = System::new(inst, 2)?;
    let n = sys.modulus;
    if n > cap {
        return Ok(None);
    }
    let mut count = 0u64;
    for x1 in 0..n {
        for x4 in 0..n {
            if (sys.c * x1 - sys.a * x4).rem_euclid(n) != 0 {
                continue;
            }
            for t in 0..n {
                if (sys.c * t - sys.b * x4).rem_euclid(n) != 0 || (sys.a * t - sys.b * x1).rem_euclid(n) != 0 {
                    continue;
                }
                for x2 in 0..n {
                    let x3 = t - x2;
                    if (x1 * x4 - x2 * x3 - sys.four_d).rem_euclid(n) == 0 {
                        count += 1;
                    }
                }
            }
        }
    }
    Ok(Some(count))
}

/// Parameters for fiber tagging.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FiberParams {
    /// Fibers with `ν ≥ removal_threshold` are tagged as removed.
    pub removal_threshold: u32,
    /// Fibers with `B2 ≤ D^{short_delta}` are bucketed as short.
    pub short_delta: f64,
}

impl Default for FiberParams {
    fn default() -> Self {
        FiberParams { removal_threshold: 1, short_delta: 0.05 }
    }
}

/// One residue class of S(n) modulo `p^{2n}` with its linearization lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct FiberData {
    pub id: usize,
    /// Residues of `X1..X4` modulo `p^{2n}`.
    pub w: [i64; 4],
    /// The smallest member; all members are `base + p^{2n}·Y` with `Y ∈ Λ_w`.
    pub base: SnPoint,
    pub members: Vec<SnPoint>,
    pub nu: u32,
    pub lambda: LatticeBasis,
    pub reduced: LatticeBasis,
    pub index: BigInt,
    pub boxes: [BigInt; 4],
    pub removed: bool,
    pub short: bool,
}

fn fiber_rows(w: &[i64; 4], a: i64, b: i64, c: i64) -> IntMatrix {
    IntMatrix::from_rows(&[vec![w[3], -w[2], -w[1], w[0]], vec![c, 0, 0, -a], vec![0, c, c, -b], vec![-b, a, a, 0]])
}

/// Group `points` (a subset of S(n)) into fibers modulo `p^{2n}` and build `Λ_w`.
pub fn fibers(inst: &CorrelationInstance, points: &[SnPoint], params: FiberParams) -> Result<Vec<FiberData>> {
    let n_mod = inst.modulus(2)?;
    let mut classes: BTreeMap<[i64; 4], Vec<SnPoint>> = BTreeMap::new();
    for pt in points {
        let w = pt.x.map(|v| (v as i128).rem_euclid(n_mod) as i64);
        classes.entry(w).or_default().push(*pt);
    }
    let d_pow = (inst.q.four_d() as f64 / 4.0).powf(params.short_delta);
    let mut out: Vec<FiberData> = classes
        .into_par_iter()
        .map(|(w, mut members)| -> Result<FiberData> {
            members.sort_unstable();
            build_fiber(inst, w, members, n_mod, params, d_pow)
        })
        .collect::<Result<_>>()?;
    for (i, f) in out.iter_mut().enumerate() {
        f.id = i;
    }
    Ok(out)
}

fn build_fiber(inst: &CorrelationInstance, w: [i64; 4], members: Vec<SnPoint>, n_mod: i128, params: FiberParams, d_pow: f64) -> Result<FiberData> {
    let (a, b, c) = (inst.q.a(), inst.q.b(), inst.q.c());
    let n_big = BigInt::from(n_mod);
    let kernel = congruence_kernel(&fiber_rows(&w, a, b, c), &n_big);
    let index = lattice_index(&kernel);
    let lambda = LatticeBasis::new(kernel.row_vecs())?;
    let reduced = reduce_basis(&lambda)?;
    let base = members[0];
    let cap = 2 * inst.n;
    let nu = valuation_i128(base.x[1] as i128 - base.x[2] as i128, inst.p as i128).map_or(cap, |v| v.min(cap));
    let four_d = BigInt::from(inst.q.four_d());
    let norms = reduced.norms_squared();
    let boxes: [BigInt; 4] = std::array::from_fn(|i| {
        let den = &n_big * &n_big * &norms[i];
        isqrt_big(&(&four_d / den)).expect("nonnegative").max(BigInt::from(1))
    });
    let short = boxes[1].to_f64().unwrap_or(f64::INFINITY) <= d_pow;
    Ok(FiberData { id: 0, w, base, members, nu, lambda, reduced, index, boxes, removed: nu >= params.removal_threshold, short })
}

/// Failures of the fiber invariants: index bound, `‖v4‖ ≤ p^{2n}`, containment of
/// `p^{2n}Z⁴`, the index/solution-count identity, member consistency and the
/// Hermite bound on the reduced basis.
pub fn fiber_violations(f: &FiberData, inst: &CorrelationInstance) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let n_mod = inst.modulus(2)?;
    let n_big = BigInt::from(n_mod);
    let p_big = BigInt::from(inst.p);
    let bound = p_big.pow(6 * inst.n - f.nu.min(6 * inst.n));
    if f.index < bound {
        out.push(format!("index {} below p^(6n-nu) = {bound}", f.index));
    }
    let norms = f.reduced.norms_squared();
    if norms[3] > &n_big * &n_big {
        out.push(format!("|v4|^2 = {} exceeds p^(4n)", norms[3]));
    }
    let h = f.lambda.hnf();
    for j in 0..4 {
        let mut e = vec![BigInt::zero(); 4];
        e[j] = n_big.clone();
        if !in_row_lattice(&h, &e) {
            out.push(format!("p^(2n) e{} not in lattice", j + 1));
        }
    }
    let rows = fiber_rows(&f.w, inst.q.a(), inst.q.b(), inst.q.c());
    let sols = congruence_solution_count(&rows, &n_big);
    if &f.index * &sols != n_big.pow(4) {
        out.push(format!("index {} times solution count {sols} is not p^(8n)", f.index));
    }
    for pt in &f.members {
        let y: Vec<BigInt> = (0..4).map(|i| BigInt::from(pt.x[i] - f.base.x[i])).collect();
        let divisible = y.iter().all(|v| v.is_multiple_of(&n_big));
        if !divisible || !in_row_lattice(&h, &y.iter().map(|v| v / &n_big).collect::<Vec<_>>()) {
            out.push(format!("member {pt:?} not in base + p^(2n) Λ_w"));
        }
    }
    let prod: BigInt = norms.iter().product();
    if prod > 4 * f.reduced.gram_det() {
        out.push("product of norms exceeds the Hermite bound".to_string());
    }
    Ok(out)
}

/// Membership in the row lattice of an upper-triangular Hermite basis.
fn in_row_lattice(h: &IntMatrix, v: &[BigInt]) -> bool {
    let mut rest = v.to_vec();
    for i in 0..h.rows() {
        let Some(p) = (0..h.cols()).find(|&j| !h[(i, j)].is_zero()) else { continue };
        if (0..p).any(|j| !rest[j].is_zero()) {
            return false;
        }
        let (q, r) = rest[p].div_rem(&h[(i, p)]);
        if !r.is_zero() {
            return false;
        }
        for j in 0..h.cols() {
            rest[j] -= &q * &h[(i, j)];
        }
    }
    rest.iter().all(Zero::is_zero)
}

/// Coefficients `z` of a fiber member in the reduced basis: `X = base + p^{2n}·Σ z_i v_i`.
pub fn fiber_coordinates(f: &FiberData, pt: &SnPoint, inst: &CorrelationInstance) -> Result<Option<[BigInt; 4]>> {
    let n_big = BigInt::from(inst.modulus(2)?);
    let y: Vec<BigInt> = (0..4).map(|i| BigInt::from(pt.x[i] - f.base.x[i])).collect();
    if !y.iter().all(|v| v.is_multiple_of(&n_big)) {
        return Ok(None);
    }
    let y: Vec<BigInt> = y.iter().map(|v| v / &n_big).collect();
    let b = f.reduced.matrix();
    let det = b.det();
    let mut z: [BigInt; 4] = Default::default();
    for (i, zi) in z.iter_mut().enumerate() {
        let mut bi = b.clone();
        for j in 0..4 {
            bi[(i, j)] = y[j].clone();
        }
        let (q, r) = bi.det().div_rem(&det);
        if !r.is_zero() {
            return Ok(None);
        }
        *zi = q;
    }
    Ok(Some(z))
}

/// The curve `det2·x0² = P(z1)` on a fiber with `(z2, z3, z4)` fixed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiberCurve {
    /// `det2` of the quaternary form.
    pub c: BigInt,
    pub poly: IntPolynomial,
    /// `P` is `c` times the square of a rational polynomial.
    pub degenerate: bool,
}

/// Substitute `X = base + p^{2n}(z1 v1 + z2 v2 + z3 v3 + z4 v4)` into `s`.
pub fn fiber_curve(f: &FiberData, z2: &BigInt, z3: &BigInt, z4: &BigInt, inst: &CorrelationInstance) -> Result<FiberCurve> {
    let n_big = BigInt::from(inst.modulus(2)?);
    let v = f.reduced.vectors();
    let xs: Vec<IntPolynomial> = (0..4)
        .map(|i| {
            let constant = BigInt::from(f.base.x[i]) + &n_big * (z2 * &v[1][i] + z3 * &v[2][i] + z4 * &v[3][i]);
            IntPolynomial::new(vec![constant, &n_big * &v[0][i]])
        })
        .collect();
    let k = |x: i64| IntPolynomial::constant(x);
    let (a, b, c, fd) = (k(inst.q.a()), k(inst.q.b()), k(inst.q.c()), k(inst.q.four_d()));
    let four = k(4);
    let t = &xs[1] + &xs[2];
    let core = &(&(&xs[0] * &xs[3]) - &(&xs[1] * &xs[2])) - &fd;
    let lin = &(&c * &xs[0]) - &(&a * &xs[3]);
    let u = &(&b * &xs[0]) - &(&a * &t);
    let w = &(&b * &xs[3]) - &(&c * &t);
    let poly = &(&(&core * &core) - &(&four * &(&lin * &lin))) - &(&four * &(&u * &w));
    let det2 = inst.form.det2().clone();
    let degenerate = poly_square_root(&poly.scale(&det2)).is_some();
    Ok(FiberCurve { c: det2, poly, degenerate })
}

/// Summary of S(n) against the trivial and target bounds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SnStatistics {
    pub q: [i64; 3],
    pub det2: String,
    pub p: u64,
    pub n: u32,
    pub count: usize,
    pub sqrt_d: f64,
    /// `D² / p^{12n}` with `D = fourD/4`.
    pub trivial_bound: f64,
    /// `#S(n) / √D`.
    pub ratio_sqrt_d: f64,
    /// `#S(n) · p^{12n} / D²`.
    pub ratio_trivial: f64,
    pub fibers: usize,
    pub fibers_kept: usize,
    pub points_kept: usize,
    pub fiber_class_bound: Option<u64>,
    /// Fiber size → number of fibers of that size.
    pub fiber_sizes: BTreeMap<usize, usize>,
}

/// Counts and ratios for S(n) and its fiber distribution.
pub fn sn_statistics(inst: &CorrelationInstance, points: &[SnPoint], fibers: &[FiberData]) -> Result<SnStatistics> {
    let d = inst.q.four_d() as f64 / 4.0;
    let trivial_bound = d * d / (inst.p as f64).powi(12 * inst.n as i32);
    let mut fiber_sizes = BTreeMap::new();
    for f in fibers {
        *fiber_sizes.entry(f.members.len()).or_insert(0) += 1;
    }
    let kept: Vec<&FiberData> = fibers.iter().filter(|f| !f.removed).collect();
    Ok(SnStatistics {
        q: [inst.q.a(), inst.q.b(), inst.q.c()],
        det2: inst.form.det2().to_string(),
        p: inst.p,
        n: inst.n,
        count: points.len(),
        sqrt_d: d.sqrt(),
        trivial_bound,
        ratio_sqrt_d: points.len() as f64 / d.sqrt(),
        ratio_trivial: points.len() as f64 / trivial_bound,
        fibers: fibers.len(),
        fibers_kept: kept.len(),
        points_kept: kept.iter().map(|f| f.members.len()).sum(),
        fiber_class_bound: fiber_class_bound(inst, 100)?,
        fiber_sizes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::{reduced_primitive_forms, BinaryForm, QuaternaryForm};
    use crate::reps::{enumerate_representations, gram_tuple};
    use proptest::prelude::*;

    fn inst(q: (i64, i64, i64), form: QuaternaryForm, p: u64, n: u32) -> CorrelationInstance {
        CorrelationInstance::diagnostic(BinaryForm::new(q.0, q.1, q.2).unwrap(), form, p, n).unwrap()
    }

    fn unit() -> CorrelationInstance {
        inst((1, 0, 1), QuaternaryForm::sum_of_four_squares(), 3, 1)
    }

    #[test]
    fn membership_examples() {
        let u = unit();
        assert!(sn_membership(&GramTuple::new(0, [2, 0, 0, 2]), &u));
        assert!(!sn_membership(&GramTuple::new(1, [0, 0, 0, 0]), &u));
        assert!(sn_membership(&GramTuple::new(0, [0, 2, -2, 0]), &u));
        for (q, n) in [((2, 1, 3), 1), ((5, 3, 7), 2), ((4, -3, 9), 3)] {
            let i = inst(q, QuaternaryForm::sum_of_four_squares(), 5, n);
            assert!(sn_membership(&GramTuple::new(0, [2 * q.0, q.1, q.1, 2 * q.2]), &i));
            assert!(sn_membership(&GramTuple::new(0, [-2 * q.0, -q.1, -q.1, -2 * q.2]), &i));
        }
    }

    #[test]
    fn boundary_rule_with_signs() {
        let i = inst((2, 1, 3), QuaternaryForm::sum_of_four_squares(), 3, 1);
        let sys = System::new(&i, 4).unwrap();
        assert!(sys.boundary_ok(0, &[4, 1, 1, 0]));
        assert!(!sys.boundary_ok(0, &[4, -1, -1, 0]));
        assert!(sys.boundary_ok(0, &[-4, -1, -1, 0]));
        assert!(!sys.boundary_ok(1, &[4, 1, 1, 0]));
        assert!(!sys.boundary_ok(0, &[4, 1, 1, -6]));
        assert!(sys.boundary_ok(0, &[4, 1, 1, 6]));
    }

    #[test]
    fn unit_square_has_four_points() {
        let pts = enumerate_sn(&unit()).unwrap();
        let mut expected = vec![
            GramTuple::new(0, [2, 0, 0, 2]),
            GramTuple::new(0, [-2, 0, 0, -2]),
            GramTuple::new(0, [0, 2, -2, 0]),
            GramTuple::new(0, [0, -2, 2, 0]),
        ];
        expected.sort();
        assert_eq!(pts, expected);
        assert_eq!(enumerate_sn_bruteforce(&unit(), u64::MAX).unwrap(), expected);
    }

    #[test]
    fn budget_is_enforced() {
        let i = inst((101, 17, 313), QuaternaryForm::sum_of_four_squares(), 3, 1);
        assert!(matches!(enumerate_sn_with_budget(&i, 1000), Err(Error::Budget(_))));
        assert!(matches!(enumerate_sn_bruteforce(&i, 1000), Err(Error::Budget(_))));
    }

    fn forms_for_oracle() -> Vec<QuaternaryForm> {
        vec![
            QuaternaryForm::sum_of_four_squares(),
            QuaternaryForm::diagonal([2, 2, 2, 18]).unwrap(),
            QuaternaryForm::from_rows([[2, 1, 0, 0], [1, 4, 1, 0], [0, 1, 4, 1], [0, 0, 1, 6]]).unwrap(),
        ]
    }

    #[test]
    fn walker_matches_bruteforce_small() {
        let forms = forms_for_oracle();
        for (k, q) in reduced_primitive_forms(3, 160).into_iter().enumerate() {
            let form = forms[k % forms.len()].clone();
            for p in [3, 5] {
                let i = CorrelationInstance::new(q, form.clone(), p, 1).unwrap();
                let fast = enumerate_sn(&i).unwrap();
                let slow = enumerate_sn_bruteforce(&i, u64::MAX).unwrap();
                assert_eq!(fast, slow, "q = {q:?}, p = {p}");
            }
        }
    }

    #[test]
    fn walker_matches_bruteforce_at_level_two() {
        for q in [(1, 0, 1), (2, 1, 3), (5, 4, 9), (7, -3, 11)] {
            let i = inst(q, QuaternaryForm::sum_of_four_squares(), 3, 2);
            assert_eq!(enumerate_sn(&i).unwrap(), enumerate_sn_bruteforce(&i, u64::MAX).unwrap());
        }
    }

    #[test]
    fn points_satisfy_membership_and_sign_symmetry() {
        let i = inst((13, 5, 17), QuaternaryForm::diagonal([2, 2, 2, 18]).unwrap(), 3, 1);
        let pts = enumerate_sn(&i).unwrap();
        assert!(!pts.is_empty());
        for pt in &pts {
            assert!(sn_violations(pt, &i).unwrap().is_empty(), "{pt:?}");
            assert!(pts.binary_search(&pt.negated()).is_ok());
        }
    }

    #[test]
    fn monotone_in_level() {
        for q in [(5, 2, 7), (13, 5, 17), (10, 3, 10)] {
            let i1 = inst(q, QuaternaryForm::sum_of_four_squares(), 3, 1);
            let s1 = enumerate_sn(&i1).unwrap();
            let s2 = enumerate_sn(&i1.at_level(2).unwrap()).unwrap();
            assert!(s2.len() <= s1.len());
            assert!(s2.iter().all(|pt| s1.binary_search(pt).is_ok()));
        }
    }

    #[test]
    fn gram_tuples_of_representation_pairs_respect_bounds() {
        let q = BinaryForm::new(2, 2, 3).unwrap();
        let form = QuaternaryForm::from_rows([[2, 1, 0, 0], [1, 4, 1, 0], [0, 1, 4, 1], [0, 0, 1, 6]]).unwrap();
        let i = CorrelationInstance::new(q, form.clone(), 3, 1).unwrap();
        let sys = System::new(&i, 4).unwrap();
        let reps = enumerate_representations(&q, &form, false).unwrap();
        for r1 in &reps {
            for r2 in &reps {
                let t = gram_tuple(r1, r2, &form).unwrap();
                assert!(sys.in_bounds(&t.x));
                assert!(sys.boundary_ok(t.x0, &t.x), "{t:?}");
                assert_eq!(sys.s(&t.x), form.det2().to_i128().unwrap() * (t.x0 as i128).pow(2));
            }
        }
    }

    #[test]
    fn diagonal_slice_matches_progression() {
        for q in [(1, 0, 1), (2, 1, 100), (4, 3, 250), (5, 0, 300)] {
            let i = inst(q, QuaternaryForm::sum_of_four_squares(), 3, 1);
            let count = diagonal_slice_count(&i).unwrap() as i64;
            let c = q.2;
            let expected = (-2 * c..=2 * c).filter(|x| (x - 2 * c) % 81 == 0 && (*x != -2 * c || q.1 == 0)).count() as i64;
            assert_eq!(count, expected, "q = {q:?}");
        }
    }

    #[test]
    fn slices_agree_with_enumeration() {
        for q in [(5, 2, 90), (9, 0, 9), (12, 0, 12)] {
            let i = inst(q, QuaternaryForm::sum_of_four_squares(), 3, 1);
            let pts = enumerate_sn(&i).unwrap();
            let (a, b) = (q.0, q.1);
            let diag = pts.iter().filter(|t| t.x[0] == 2 * a && t.x[1] == b && t.x[2] == b && t.x0 == 0).count();
            assert_eq!(diag as u64, diagonal_slice_count(&i).unwrap());
            let anti = pts.iter().filter(|t| t.x[0] == t.x[3] && t.x[1] == -t.x[2]).count();
            assert_eq!(anti as u64, antidiagonal_slice_count(&i).unwrap());
        }
    }

    #[test]
    fn level_rule() {
        assert_eq!(level_for(4, 3, 0.1), 1);
        assert_eq!(level_for(4_000_000, 3, 0.1), 1);
        // D^{1/4} = 3^{4.2} needs D = 3^{16.8}.
        let d = 3f64.powf(16.9) as i64;
        assert_eq!(level_for(4 * d, 3, 0.1), 2);
    }

    #[test]
    fn unit_fiber_index() {
        let u = unit();
        let pts = enumerate_sn(&u).unwrap();
        let fs = fibers(&u, &pts, FiberParams::default()).unwrap();
        let f = fs.iter().find(|f| f.w == [2, 0, 0, 2]).unwrap();
        assert_eq!(f.index, BigInt::from(729));
        assert_eq!(f.nu, 2);
        assert!(f.removed);
        for f in &fs {
            assert!(fiber_violations(f, &u).unwrap().is_empty());
        }
        let total: usize = fs.iter().map(|f| f.members.len()).sum();
        assert_eq!(total, pts.len());
    }

    #[test]
    fn fibers_partition_and_invariants() {
        for (q, form) in [((13, 5, 17), QuaternaryForm::sum_of_four_squares()), ((20, 7, 23), QuaternaryForm::diagonal([2, 2, 2, 18]).unwrap())] {
            let i = inst(q, form, 3, 1);
            let pts = enumerate_sn(&i).unwrap();
            let fs = fibers(&i, &pts, FiberParams::default()).unwrap();
            let mut union: Vec<SnPoint> = fs.iter().flat_map(|f| f.members.iter().copied()).collect();
            union.sort();
            assert_eq!(union, pts);
            for f in &fs {
                assert_eq!(fiber_violations(f, &i).unwrap(), Vec::<String>::new(), "fiber {:?}", f.w);
            }
            let stats = sn_statistics(&i, &pts, &fs).unwrap();
            assert!(stats.fibers as u64 <= stats.fiber_class_bound.unwrap());
        }
    }

    #[test]
    fn lambda_box_enumeration_matches_scan() {
        use crate::exactmath::lattice::lattice_points_in_box;
        let i = inst((13, 5, 17), QuaternaryForm::sum_of_four_squares(), 3, 1);
        let pts = enumerate_sn(&i).unwrap();
        let fs = fibers(&i, &pts, FiberParams::default()).unwrap();
        let f = &fs[0];
        let bounds = [6i64, 10, 10, 6];
        let big: Vec<BigInt> = bounds.iter().map(|&b| BigInt::from(b)).collect();
        let mut walk: Vec<Vec<BigInt>> = lattice_points_in_box(&f.reduced, &big).collect();
        walk.sort();
        let h = f.lambda.hnf();
        let mut scan = Vec::new();
        for y1 in -6..=6i64 {
            for y2 in -10..=10i64 {
                for y3 in -10..=10i64 {
                    for y4 in -6..=6i64 {
                        let y: Vec<BigInt> = [y1, y2, y3, y4].iter().map(|&v| BigInt::from(v)).collect();
                        if in_row_lattice(&h, &y) {
                            scan.push(y);
                        }
                    }
                }
            }
        }
        scan.sort();
        assert_eq!(walk, scan);
    }

    #[test]
    fn fiber_curve_consistency() {
        let i = inst((13, 5, 17), QuaternaryForm::diagonal([2, 2, 2, 18]).unwrap(), 3, 1);
        let pts = enumerate_sn(&i).unwrap();
        let fs = fibers(&i, &pts, FiberParams::default()).unwrap();
        let mut checked = 0;
        for f in &fs {
            for pt in &f.members {
                let z = fiber_coordinates(f, pt, &i).unwrap().expect("member has coordinates");
                let curve = fiber_curve(f, &z[1], &z[2], &z[3], &i).unwrap();
                assert!(curve.poly.degree().is_none_or(|d| d <= 4));
                let x0 = BigInt::from(pt.x0);
                assert_eq!(curve.poly.eval(&z[0]), &curve.c * &x0 * &x0);
                checked += 1;
            }
        }
        assert_eq!(checked, pts.len());
    }

    #[test]
    fn degenerate_fiber_curve_exists() {
        // Along the diagonal slice s vanishes identically, so a fiber whose first
        // reduced vector is a multiple of e4 through a diagonal point is degenerate.
        let i = inst((9, 0, 9), QuaternaryForm::sum_of_four_squares(), 3, 1);
        let pts = enumerate_sn(&i).unwrap();
        let fs = fibers(&i, &pts, FiberParams::default()).unwrap();
        let mut found = false;
        for f in &fs {
            for pt in &f.members {
                let z = fiber_coordinates(f, pt, &i).unwrap().unwrap();
                let curve = fiber_curve(f, &z[1], &z[2], &z[3], &i).unwrap();
                if curve.degenerate {
                    let root = poly_square_root(&curve.poly.scale(&curve.c)).unwrap();
                    assert_eq!(&root * &root, curve.poly.scale(&curve.c));
                    found = true;
                }
            }
        }
        assert!(found);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn walker_matches_bruteforce_random(a in 1i64..30, b_frac in 0.0f64..1.0, extra in 0i64..30, p in prop::sample::select(vec![3u64, 5, 7])) {
            let b = ((b_frac * (2 * a + 1) as f64).floor() as i64) - a;
            let c = a + extra;
            let q = BinaryForm::new(a, b, c).unwrap();
            prop_assume!(q.is_reduced());
            let i = CorrelationInstance::diagnostic(q, QuaternaryForm::sum_of_four_squares(), p, 1).unwrap();
            prop_assert_eq!(enumerate_sn(&i).unwrap(), enumerate_sn_bruteforce(&i, u64::MAX).unwrap());
        }
    }
}
