//! Integral points on planar curves in boxes: a brute-force oracle and an ell-adic
//! determinant-method counter.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exactmath::arith::{inv_mod_big, is_prime_u64, isqrt_big, next_prime, perfect_square_part};
use crate::exactmath::bivariate::BiPoly;
use crate::exactmath::lattice::lll_gram;
use crate::exactmath::modpoly::{integer_roots, is_zero_mod, roots_mod_prime};
use crate::exactmath::normal_form::congruence_kernel;
use crate::exactmath::poly::IntPolynomial;
use crate::exactmath::IntMatrix;
use crate::svariety::FiberCurve;

pub type Point = (i64, i64);

/// Largest accepted total degree.
pub const MAX_DEGREE: usize = 6;
/// Largest accepted box bound.
pub const MAX_BOX: i64 = 1 << 40;
/// Default work budget for the oracle, counted in scanned lines.
pub const DEFAULT_BRUTE_BUDGET: u64 = 100_000_000;
/// Below this `B1` fiber curves are counted by the oracle.
pub const DETMETHOD_MIN_B1: u64 = 64;

/// `f(x, y) = 0` restricted to `|x| ≤ bx`, `|y| ≤ by`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanarCurve {
    pub f: BiPoly,
    pub bx: i64,
    pub by: i64,
}

impl PlanarCurve {
    pub fn new(f: BiPoly, bx: i64, by: i64) -> Result<Self> {
        if f.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        let d = f.total_degree().unwrap();
        if d > MAX_DEGREE {
            return Err(Error::Precondition(format!("total degree {d} exceeds {MAX_DEGREE}")));
        }
        if !(0..=MAX_BOX).contains(&bx) || !(0..=MAX_BOX).contains(&by) {
            return Err(Error::Precondition(format!("box bounds must lie in [0, {MAX_BOX}]")));
        }
        Ok(PlanarCurve { f, bx, by })
    }

    pub fn square_box(f: BiPoly, b: i64) -> Result<Self> {
        Self::new(f, b, b)
    }

    fn swapped(&self) -> Self {
        PlanarCurve { f: self.f.swap(), bx: self.by, by: self.bx }
    }

    fn with_poly(&self, f: BiPoly) -> Self {
        PlanarCurve { f, bx: self.bx, by: self.by }
    }
}

/// `Some((c, P))` when `f = c·x² − P(y)`.
fn special_shape(f: &BiPoly) -> Option<(BigInt, IntPolynomial)> {
    let rows = f.rows();
    if rows.len() != 3 || !rows[1].is_zero() || rows[2].degree() != Some(0) {
        return None;
    }
    Some((rows[2].leading(), -&rows[0]))
}

/// Integers `v ≡ r (mod m)` with `|v| ≤ b` (all of `[-b, b]` when `m` is `None`).
fn class_values(r: u64, m: Option<u64>, b: i64) -> impl Iterator<Item = i64> {
    let (start, step) = match m {
        None => (-b, 1),
        Some(m) => {
            let m = m as i64;
            (-b + (r as i64 - (-b)).rem_euclid(m), m)
        }
    };
    (start..=b).step_by(step as usize)
}

fn in_class(v: i64, class: Option<(u64, u64)>) -> bool {
    class.is_none_or(|(r, m)| v.rem_euclid(m as i64) as u64 == r)
}

/// Integer roots of nonzero `p` in `[-bound, bound]` and in `class`. Sparse classes are
/// evaluated pointwise.
fn class_roots(p: &IntPolynomial, bound: i64, class: Option<(u64, u64)>) -> Vec<i64> {
    if let Some((r, m)) = class {
        let members = (2 * bound as u64) / m + 1;
        if members <= 4 * (p.degree().unwrap_or(0) as u64 + 1) {
            return class_values(r, Some(m), bound).filter(|&v| p.eval_i128(v as i128).is_zero()).collect();
        }
    }
    integer_roots(p, bound as u64).into_iter().filter(|&v| in_class(v, class)).collect()
}

/// Points of the curve, optionally restricted to `x ≡ cx`, `y ≡ cy (mod ell)`.
fn bruteforce_points(c: &PlanarCurve, class: Option<(u64, u64, u64)>, budget: &mut u64) -> Result<Vec<Point>> {
    let xclass = class.map(|(x, _, m)| (x, m));
    let (yr, ym) = class.map_or((0, None), |(_, y, m)| (y, Some(m)));
    let mut out = Vec::new();
    let charge = |n: u64, budget: &mut u64| -> Result<()> {
        *budget = budget.checked_sub(n).ok_or_else(|| Error::Budget("curve oracle scan".into()))?;
        Ok(())
    };
    let shape = special_shape(&c.f).map(|(k, p)| if k.is_negative() { (-k, -&p) } else { (k, p) });
    for y in class_values(yr, ym, c.by) {
        charge(1, budget)?;
        let yb = BigInt::from(y);
        if let Some((k, p)) = &shape {
            if let Some(x0) = perfect_square_part(&p.eval(&yb), k) {
                if let Some(x0) = x0.to_i64().filter(|x| *x <= c.bx) {
                    for x in if x0 == 0 { vec![0] } else { vec![-x0, x0] } {
                        if in_class(x, xclass) {
                            out.push((x, y));
                        }
                    }
                }
            }
            continue;
        }
        let g = c.f.at_y(&yb);
        if g.is_zero() {
            charge(2 * c.bx as u64 + 1, budget)?;
            let (xr, xm) = xclass.map_or((0, None), |(r, m)| (r, Some(m)));
            out.extend(class_values(xr, xm, c.bx).map(|x| (x, y)));
        } else {
            out.extend(class_roots(&g, c.bx, xclass).into_iter().map(|x| (x, y)));
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// All integer points of `C` by scanning `y`, with the default budget.
pub fn count_points_bruteforce(c: &PlanarCurve) -> Result<Vec<Point>> {
    count_points_bruteforce_with_budget(c, DEFAULT_BRUTE_BUDGET)
}

pub fn count_points_bruteforce_with_budget(c: &PlanarCurve, budget: u64) -> Result<Vec<Point>> {
    if 2 * c.by as u64 + 1 > budget {
        return Err(Error::Budget(format!("box {} exceeds oracle budget {budget}", c.by)));
    }
    let mut b = budget;
    bruteforce_points(c, None, &mut b)
}

#[derive(Clone, Debug)]
pub struct DetMethodOptions {
    /// Cap on the auxiliary degree `d′`; defaults to the curve degree.
    pub degree_cap: Option<usize>,
    /// Scan a class by brute force when no certified auxiliary polynomial exists.
    pub allow_fallback: bool,
    /// Keep the auxiliary polynomials in the report.
    pub keep_auxiliary: bool,
}

impl Default for DetMethodOptions {
    fn default() -> Self {
        DetMethodOptions { degree_cap: None, allow_fallback: true, keep_auxiliary: false }
    }
}

/// Auxiliary polynomial certified on the class of `residue = (x mod ell, y mod ell)`.
#[derive(Clone, Debug)]
pub struct AuxiliaryRecord {
    pub residue: (u64, u64),
    pub g: BiPoly,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct DetMethodReport {
    pub ell: u64,
    pub points: Vec<Point>,
    pub residue_points: usize,
    pub smooth_classes: usize,
    pub singular_classes: usize,
    pub fallback_classes: usize,
    pub factor_splits: usize,
    pub max_aux_degree: usize,
    #[serde(skip)]
    pub auxiliary: Vec<AuxiliaryRecord>,
}

#[derive(Default)]
struct ClassOutcome {
    points: Vec<Point>,
    smooth: bool,
    fallback: bool,
    splits: usize,
    aux_degree: usize,
    aux: Option<BiPoly>,
}

/// `ℓ = nextprime(2·B^{2/3} + 3)` with `B = max(bx, by)`, skipping divisors of the
/// leading-form content.
pub fn default_ell(c: &PlanarCurve) -> u64 {
    let b = c.bx.max(c.by).max(1) as f64;
    let content = c.f.leading_form_content();
    let mut ell = next_prime(2 * b.powf(2.0 / 3.0) as u64 + 3);
    while content.is_multiple_of(&BigInt::from(ell)) {
        ell = next_prime(ell + 1);
    }
    ell
}

/// Integer points of `C` by the ell-adic determinant method with default options.
pub fn count_points_detmethod(c: &PlanarCurve, ell: u64) -> Result<Vec<Point>> {
    Ok(detmethod_with(c, ell, &DetMethodOptions::default())?.points)
}

pub fn detmethod_with(c: &PlanarCurve, ell: u64, opts: &DetMethodOptions) -> Result<DetMethodReport> {
    if !is_prime_u64(ell) || ell >= 1 << 31 {
        return Err(Error::Precondition(format!("auxiliary modulus {ell} must be a prime below 2^31")));
    }
    if c.f.leading_form_content().is_multiple_of(&BigInt::from(ell)) {
        return Err(Error::Precondition(format!("{ell} divides the leading form content")));
    }
    if !c.f.is_squarefree() {
        return Err(Error::Precondition("curve polynomial is not squarefree".into()));
    }
    let cap = opts.degree_cap.unwrap_or_else(|| c.f.total_degree().unwrap()).max(1);
    let mut report = DetMethodReport { ell, ..Default::default() };
    let (y_part, x_part, rest) = split_one_variable_factors(&c.f);
    let factors = y_part.is_some() as usize + x_part.is_some() as usize + rest.is_some() as usize;
    report.factor_splits = factors.saturating_sub(1);
    if let Some(p) = &y_part {
        for y in integer_roots(p, c.by as u64) {
            report.points.extend((-c.bx..=c.bx).map(|x| (x, y)));
        }
    }
    if let Some(p) = &x_part {
        for x in integer_roots(p, c.bx as u64) {
            report.points.extend((-c.by..=c.by).map(|y| (x, y)));
        }
    }
    if let Some(rest) = rest {
        residue_scan(&c.with_poly(rest), ell, cap, opts, &mut report)?;
    }
    report.points.sort_unstable();
    report.points.dedup();
    Ok(report)
}

/// `f = Y(y) · X(x) · rest` with the one-variable factors split off (`None` when constant).
fn split_one_variable_factors(f: &BiPoly) -> (Option<IntPolynomial>, Option<IntPolynomial>, Option<BiPoly>) {
    let nonconstant = |p: IntPolynomial| (p.degree().unwrap_or(0) > 0).then_some(p);
    let y_part = f.content_x();
    let rest = f.primitive_part_x();
    let swapped = rest.swap();
    let x_part = swapped.content_x();
    let rest = swapped.primitive_part_x().swap();
    let rest = (rest.total_degree().unwrap_or(0) > 0).then_some(rest);
    (nonconstant(y_part), nonconstant(x_part), rest)
}

/// Residue points of `C` modulo `ell`, each class solved by [`process_class`].
fn residue_scan(c: &PlanarCurve, ell: u64, cap: usize, opts: &DetMethodOptions, report: &mut DetMethodReport) -> Result<()> {
    let ell_big = BigInt::from(ell);
    let fx = c.f.d_dx();
    let fy = c.f.d_dy();
    let per_row: Vec<Result<Vec<((u64, u64), ClassOutcome)>>> = (0..ell)
        .into_par_iter()
        .map(|yr| {
            let yb = BigInt::from(yr);
            let row = c.f.at_y(&yb);
            let xs: Vec<u64> = if is_zero_mod(row.coeffs(), ell) { (0..ell).collect() } else { roots_mod_prime(row.coeffs(), ell) };
            xs.into_iter()
                .map(|xr| {
                    let xb = BigInt::from(xr);
                    let unit_x = !fx.eval(&xb, &yb).is_multiple_of(&ell_big);
                    let unit_y = !fy.eval(&xb, &yb).is_multiple_of(&ell_big);
                    let outcome = process_class(c, xr, yr, ell, unit_x, unit_y, cap, opts)?;
                    Ok(((xr, yr), outcome))
                })
                .collect()
        })
        .collect();
    for row in per_row {
        for ((xr, yr), o) in row? {
            report.residue_points += 1;
            if o.smooth {
                report.smooth_classes += 1;
            } else {
                report.singular_classes += 1;
            }
            report.fallback_classes += o.fallback as usize;
            report.factor_splits += o.splits;
            report.max_aux_degree = report.max_aux_degree.max(o.aux_degree);
            if opts.keep_auxiliary {
                if let Some(g) = o.aux {
                    report.auxiliary.push(AuxiliaryRecord { residue: (xr, yr), g });
                }
            }
            report.points.extend(o.points);
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn process_class(
    c: &PlanarCurve,
    xr: u64,
    yr: u64,
    ell: u64,
    unit_x: bool,
    unit_y: bool,
    cap: usize,
    opts: &DetMethodOptions,
) -> Result<ClassOutcome> {
    let scan = |fallback: bool| -> Result<ClassOutcome> {
        let mut budget = u64::MAX;
        Ok(ClassOutcome { points: bruteforce_points(c, Some((xr, yr, ell)), &mut budget)?, fallback, ..Default::default() })
    };
    if !unit_x && !unit_y {
        return scan(false);
    }
    // Parametrize by y when f_x is a unit, else by x (on the swapped curve).
    let by_y = match (unit_x, unit_y) {
        (true, true) => orientation_cost(c, cap, ell) <= orientation_cost(&c.swapped(), cap, ell),
        (ux, _) => ux,
    };
    let (curve, (px, py)) = if by_y { (c.clone(), (xr, yr)) } else { (c.swapped(), (yr, xr)) };
    match branch_points(&curve, px, py, ell, cap)? {
        Some(found) => {
            let points = if by_y { found.points } else { found.points.into_iter().map(|(x, y)| (y, x)).collect() };
            let mut points = points;
            points.sort_unstable();
            Ok(ClassOutcome {
                points,
                smooth: true,
                fallback: false,
                splits: found.splits,
                aux_degree: found.aux_degree,
                aux: found.aux.map(|g| if by_y { g } else { g.swap() }),
            })
        }
        None if opts.allow_fallback => {
            let mut o = scan(true)?;
            o.smooth = true;
            Ok(o)
        }
        None => Err(Error::EllTooSmall { ell, cap }),
    }
}

/// Monomials `x^i y^j` of degree `≤ dprime` not divisible by the lex-leading monomial
/// of `f`, so no nonzero combination is a multiple of `f`.
fn monomials(f: &BiPoly, dprime: usize) -> Vec<(usize, usize)> {
    let dx = f.deg_x().unwrap_or(0);
    let e = f.rows().last().and_then(IntPolynomial::degree).unwrap_or(0);
    (0..=dprime).flat_map(|i| (0..=dprime - i).map(move |j| (i, j))).filter(|&(i, j)| i < dx || j < e).collect()
}

fn weight(bx: i64, by: i64, (i, j): (usize, usize)) -> BigInt {
    num_traits::pow(BigInt::from(bx.max(1)), i) * num_traits::pow(BigInt::from(by.max(1)), j)
}

/// Expected log size of the certificate relative to the modulus at the cap (lower is better).
fn orientation_cost(c: &PlanarCurve, cap: usize, ell: u64) -> f64 {
    let mons = monomials(&c.f, cap);
    let n = mons.len() as f64;
    if mons.len() < 2 {
        return f64::INFINITY;
    }
    let log_w: f64 = mons.iter().map(|&(i, j)| i as f64 * (c.bx.max(1) as f64).ln() + j as f64 * (c.by.max(1) as f64).ln()).sum();
    log_w / n - (n - 1.0) / 2.0 * (ell as f64).ln()
}

struct BranchPoints {
    points: Vec<Point>,
    splits: usize,
    aux_degree: usize,
    aux: Option<BiPoly>,
}

/// Points on the branch of `C` through `(px, py) mod ell`, where `f_x` is a unit.
/// `None` when no certified auxiliary polynomial exists up to the cap.
fn branch_points(c: &PlanarCurve, px: u64, py: u64, ell: u64, cap: usize) -> Result<Option<BranchPoints>> {
    let class = Some((px, py, ell));
    let f = &c.f;
    if let Some(points) = direct_points(c, px, py, ell)? {
        return Ok(Some(BranchPoints { points, splits: 0, aux_degree: 0, aux: None }));
    }
    for dprime in 1..=cap {
        let mons = monomials(f, dprime);
        if mons.len() < 2 {
            continue;
        }
        let Some(g) = auxiliary_polynomial(c, px, py, ell, &mons) else {
            continue;
        };
        let points = if g.deg_x() == Some(0) {
            let roots = class_roots(&g.rows()[0], c.by, Some((py, ell)));
            points_on_lines(c, roots, class)
        } else {
            let r = f.resultant_x(&g);
            if r.is_zero() {
                let h = f.gcd(&g);
                let other = f.div_exact(&h).expect("gcd divides");
                let ell_big = BigInt::from(ell);
                let (pxb, pyb) = (BigInt::from(px), BigInt::from(py));
                let factor = if h.eval(&pxb, &pyb).is_multiple_of(&ell_big) { h } else { other };
                debug_assert!(factor.eval(&pxb, &pyb).is_multiple_of(&ell_big));
                let sub = c.with_poly(factor);
                let Some(mut inner) = branch_points(&sub, px, py, ell, cap)? else {
                    return Ok(None);
                };
                inner.splits += 1;
                inner.aux_degree = inner.aux_degree.max(dprime);
                inner.aux = Some(g);
                return Ok(Some(inner));
            }
            let roots = class_roots(&r, c.by, Some((py, ell)));
            points_on_lines(c, roots, class)
        };
        return Ok(Some(BranchPoints { points, splits: 0, aux_degree: dprime, aux: Some(g) }));
    }
    Ok(None)
}

/// Points of `C` in the class on the horizontal lines `y ∈ ys`.
fn points_on_lines(c: &PlanarCurve, ys: Vec<i64>, class: Option<(u64, u64, u64)>) -> Vec<Point> {
    let (xr, yr, m) = class.unwrap();
    let mut out = Vec::new();
    for y in ys.into_iter().filter(|&y| in_class(y, Some((yr, m)))) {
        let row = c.f.at_y(&BigInt::from(y));
        if row.is_zero() {
            out.extend(class_values(xr, Some(m), c.bx).map(|x| (x, y)));
        } else {
            out.extend(class_roots(&row, c.bx, Some((xr, m))).into_iter().map(|x| (x, y)));
        }
    }
    out
}

/// Curves solved without an auxiliary polynomial: lines and curves in one variable.
fn direct_points(c: &PlanarCurve, px: u64, py: u64, ell: u64) -> Result<Option<Vec<Point>>> {
    let f = &c.f;
    let xclass = Some((px, ell));
    if f.deg_y() == Some(0) {
        let xs = class_roots(&f.at_y(&BigInt::zero()), c.bx, xclass);
        let ys: Vec<i64> = class_values(py, Some(ell), c.by).collect();
        return Ok(Some(xs.into_iter().flat_map(|x| ys.iter().map(move |&y| (x, y))).collect()));
    }
    if f.deg_x() == Some(0) {
        let ys = class_roots(&f.rows()[0], c.by, Some((py, ell)));
        return Ok(Some(points_on_lines(c, ys, Some((px, py, ell)))));
    }
    if f.total_degree() == Some(1) {
        let mut budget = u64::MAX;
        return Ok(Some(bruteforce_points(c, Some((px, py, ell)), &mut budget)?));
    }
    Ok(None)
}

/// Truncated power series arithmetic modulo `(m, s^k)`.
struct Series<'a> {
    m: &'a BigInt,
    k: usize,
}

impl Series<'_> {
    fn reduce(&self, mut a: Vec<BigInt>) -> Vec<BigInt> {
        a.resize(self.k, BigInt::zero());
        for c in a.iter_mut() {
            *c = c.mod_floor(self.m);
        }
        a
    }

    fn mul(&self, a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
        let mut out = vec![BigInt::zero(); self.k];
        for (i, x) in a.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.iter().enumerate().take(self.k - i) {
                out[i + j] += x * y;
            }
        }
        self.reduce(out)
    }

    fn constant(&self, c: &BigInt) -> Vec<BigInt> {
        self.reduce(vec![c.clone()])
    }

    fn add(&self, a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
        self.reduce(a.iter().zip(b).map(|(x, y)| x + y).collect())
    }

    fn inv(&self, a: &[BigInt]) -> Vec<BigInt> {
        let a0 = inv_mod_big(&a[0], self.m).expect("unit constant term");
        let mut out = vec![BigInt::zero(); self.k];
        out[0] = a0.clone();
        for n in 1..self.k {
            let mut acc = BigInt::zero();
            for j in 1..=n {
                acc += &a[j] * &out[n - j];
            }
            out[n] = (-(acc * &a0)).mod_floor(self.m);
        }
        out
    }

    fn poly(&self, p: &IntPolynomial, s: &[BigInt]) -> Vec<BigInt> {
        p.coeffs().iter().rev().fold(vec![BigInt::zero(); self.k], |acc, c| self.add(&self.mul(&acc, s), &self.constant(c)))
    }

    fn bipoly(&self, f: &BiPoly, x: &[BigInt], y: &[BigInt]) -> Vec<BigInt> {
        f.rows().iter().rev().fold(vec![BigInt::zero(); self.k], |acc, r| self.add(&self.mul(&acc, x), &self.poly(r, y)))
    }
}

/// The branch `x(s)` with `f(x(s), py + s) = 0` and `x(0) ≡ px`, modulo `(m, s^k)`.
fn branch_series(f: &BiPoly, px: u64, py: u64, m: &BigInt, k: usize) -> Vec<BigInt> {
    let ser = Series { m, k };
    let mut y = ser.constant(&BigInt::from(py));
    if k > 1 {
        y[1] = BigInt::one();
    }
    let fx = f.d_dx();
    let mut x = ser.constant(&BigInt::from(px));
    for _ in 0..(2 * k + 64) {
        let val = ser.bipoly(f, &x, &y);
        if val.iter().all(Zero::is_zero) {
            break;
        }
        let step = ser.mul(&val, &ser.inv(&ser.bipoly(&fx, &x, &y)));
        x = ser.reduce(x.iter().zip(&step).map(|(a, b)| a - b).collect());
    }
    debug_assert!(ser.bipoly(f, &x, &y).iter().all(Zero::is_zero));
    x
}

/// A certified auxiliary polynomial over `mons` vanishing on the branch through `(px, py)`.
fn auxiliary_polynomial(c: &PlanarCurve, px: u64, py: u64, ell: u64, mons: &[(usize, usize)]) -> Option<BiPoly> {
    let n = mons.len();
    let k = precision_exponent(n);
    let ell_big = BigInt::from(ell);
    let m = num_traits::pow(ell_big.clone(), k);
    let ser = Series { m: &m, k };
    let x_s = branch_series(&c.f, px, py, &m, k);
    // substitute s = ell·t
    let mut scale = BigInt::one();
    let mut x_t = Vec::with_capacity(k);
    for coeff in &x_s {
        x_t.push((coeff * &scale).mod_floor(&m));
        scale *= &ell_big;
    }
    let mut y_t = ser.constant(&BigInt::from(py));
    if k > 1 {
        y_t[1] = ell_big.mod_floor(&m);
    }
    let max_i = mons.iter().map(|t| t.0).max().unwrap();
    let max_j = mons.iter().map(|t| t.1).max().unwrap();
    let mut xp = vec![ser.constant(&BigInt::one())];
    for _ in 0..max_i {
        xp.push(ser.mul(xp.last().unwrap(), &x_t));
    }
    let mut yp = vec![ser.constant(&BigInt::one())];
    for _ in 0..max_j {
        yp.push(ser.mul(yp.last().unwrap(), &y_t));
    }
    let mut cmat = IntMatrix::zeros(k, n);
    for (col, &(i, j)) in mons.iter().enumerate() {
        let series = ser.mul(&xp[i], &yp[j]);
        for (row, v) in series.into_iter().enumerate() {
            cmat[(row, col)] = v;
        }
    }
    let kernel = congruence_kernel(&cmat, &m);
    let weights: Vec<BigInt> = mons.iter().map(|&t| weight(c.bx, c.by, t)).collect();
    let mut gram = IntMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v: BigInt = (0..n).map(|t| &kernel[(a, t)] * &kernel[(b, t)] * &weights[t] * &weights[t]).sum();
            gram[(a, b)] = v.clone();
            gram[(b, a)] = v;
        }
    }
    let t = lll_gram(&gram, 99, 100).ok()?;
    let reduced = &t * &kernel;
    let mut candidates: Vec<(BigInt, Vec<BigInt>)> = (0..n)
        .map(|r| {
            let row = reduced.row(r).to_vec();
            let height: BigInt = row.iter().zip(&weights).map(|(g, w)| g.abs() * w).sum();
            (height, row)
        })
        .filter(|(h, _)| !h.is_zero() && *h < m)
        .collect();
    candidates.sort();
    let (_, row) = candidates.into_iter().next()?;
    let terms: Vec<(usize, usize, BigInt)> = mons.iter().zip(row).map(|(&(i, j), g)| (i, j, g)).collect();
    Some(BiPoly::from_terms(&terms))
}

/// Precision `K` for `n` monomials. Beyond `n` the certificate margin no longer grows with `K`.
fn precision_exponent(n: usize) -> usize {
    n + 1
}

/// Which counter handled a fiber curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CountMethod {
    Bruteforce,
    Detmethod,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiberCountReport {
    pub count: u64,
    pub b1: u64,
    pub sqrt_b1: f64,
    pub degenerate: bool,
    pub method: CountMethod,
}

/// Points `(z1, x0)` with `|z1| ≤ b1`, `x0 ≥ 0` and `c·x0² = P(z1)`.
pub fn count_fiber_curve(fc: &FiberCurve, b1: u64) -> FiberCountReport {
    let b1 = b1.min(MAX_BOX as u64);
    let f = BiPoly::from_rows(vec![-&fc.poly, IntPolynomial::zero(), IntPolynomial::constant(fc.c.clone())]);
    let bound: BigInt = fc.poly.coeffs().iter().enumerate().map(|(k, p)| p.abs() * num_traits::pow(BigInt::from(b1), k)).sum();
    let bx: BigInt = isqrt_big(&(bound / &fc.c)).unwrap_or_default() + 1;
    let bx = bx.to_i64().filter(|b| *b <= MAX_BOX).unwrap_or(MAX_BOX);
    let curve = PlanarCurve { f, bx, by: b1 as i64 };
    let mut method = CountMethod::Bruteforce;
    let mut points = None;
    if !fc.degenerate && b1 >= DETMETHOD_MIN_B1 && bx < MAX_BOX && !fc.poly.is_zero() {
        let content = curve.f.leading_form_content();
        let mut ell = next_prime(b1);
        while content.is_multiple_of(&BigInt::from(ell)) {
            ell = next_prime(ell + 1);
        }
        if let Ok(p) = count_points_detmethod(&curve, ell) {
            method = CountMethod::Detmethod;
            points = Some(p);
        }
    }
    let points = points.unwrap_or_else(|| {
        let mut budget = u64::MAX;
        bruteforce_points(&curve, None, &mut budget).expect("unbounded budget")
    });
    FiberCountReport { count: points.iter().filter(|p| p.0 >= 0).count() as u64, b1, sqrt_b1: (b1 as f64).sqrt(), degenerate: fc.degenerate, method }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bp(terms: &[(usize, usize, i64)]) -> BiPoly {
        BiPoly::from_terms(terms)
    }

    fn pell() -> BiPoly {
        bp(&[(2, 0, 1), (0, 2, -2), (0, 0, -1)])
    }

    /// Naive scan of every box point.
    fn scan(c: &PlanarCurve) -> Vec<Point> {
        let mut out = Vec::new();
        for x in -c.bx..=c.bx {
            for y in -c.by..=c.by {
                if c.f.eval_i64(x, y).is_zero() {
                    out.push((x, y));
                }
            }
        }
        out.sort_unstable();
        out
    }

    #[test]
    fn oracle_examples() {
        let pts = count_points_bruteforce(&PlanarCurve::square_box(pell(), 100).unwrap()).unwrap();
        assert_eq!(pts.len(), 14);
        for (x, y) in [(1, 0), (3, 2), (17, 12), (99, 70)] {
            assert!(pts.contains(&(x, y)) && pts.contains(&(-x, -y)));
        }
        let quartic = bp(&[(2, 0, 1), (0, 4, -1)]);
        let c = PlanarCurve::new(quartic, 100, 10).unwrap();
        let pts = count_points_bruteforce(&c).unwrap();
        assert_eq!(pts.len(), 41);
        assert_eq!(pts.iter().filter(|p| p.0 >= 0).count(), 21);
        assert!(pts.iter().all(|&(x, y)| x.abs() == y * y));
        let empty = bp(&[(2, 0, 1), (0, 2, 1), (0, 0, 1)]);
        assert!(count_points_bruteforce(&PlanarCurve::square_box(empty, 500).unwrap()).unwrap().is_empty());
    }

    #[test]
    fn oracle_matches_scan_and_budget() {
        let curves = [pell(), bp(&[(1, 0, 1), (0, 1, -1)]), bp(&[(1, 1, 1), (0, 0, -12)]), bp(&[(0, 1, 1), (0, 0, -3)])];
        for f in curves {
            let c = PlanarCurve::square_box(f, 30).unwrap();
            assert_eq!(count_points_bruteforce(&c).unwrap(), scan(&c));
        }
        let c = PlanarCurve::square_box(pell(), 100).unwrap();
        assert!(matches!(count_points_bruteforce_with_budget(&c, 50), Err(Error::Budget(_))));
    }

    #[test]
    fn curve_validation() {
        assert!(PlanarCurve::square_box(BiPoly::zero(), 3).is_err());
        assert!(PlanarCurve::square_box(bp(&[(7, 0, 1)]), 3).is_err());
        assert!(PlanarCurve::new(pell(), -1, 3).is_err());
        let c = PlanarCurve::square_box(pell(), 10).unwrap();
        assert!(matches!(count_points_detmethod(&c, 100), Err(Error::Precondition(_))));
        let square = PlanarCurve::square_box(bp(&[(1, 0, 1), (0, 1, -1)]).mul(&bp(&[(1, 0, 1), (0, 1, -1)])), 10).unwrap();
        assert!(matches!(count_points_detmethod(&square, 101), Err(Error::Precondition(_))));
        let lead = PlanarCurve::square_box(bp(&[(2, 0, 7), (0, 2, 14), (0, 0, 1)]), 10).unwrap();
        assert!(matches!(count_points_detmethod(&lead, 7), Err(Error::Precondition(_))));
    }

    #[test]
    fn detmethod_pell() {
        let c = PlanarCurve::square_box(pell(), 100).unwrap();
        let oracle = count_points_bruteforce(&c).unwrap();
        assert_eq!(count_points_detmethod(&c, 101).unwrap(), oracle);
        let report = detmethod_with(&c, 101, &DetMethodOptions { keep_auxiliary: true, ..Default::default() }).unwrap();
        assert_eq!(report.points, oracle);
        assert!(report.smooth_classes > 0);
        assert_eq!(report.fallback_classes, 0);
        // A small modulus exercises classes that hold many points.
        assert_eq!(count_points_detmethod(&c, 13).unwrap(), oracle);
        let ell = default_ell(&c);
        assert!(is_prime_u64(ell) && ell > 2 * 21);
        assert_eq!(count_points_detmethod(&c, ell).unwrap(), oracle);
    }

    #[test]
    fn detmethod_reducible_and_lines() {
        let f = bp(&[(1, 0, 1), (0, 1, -1)]).mul(&bp(&[(1, 0, 1), (0, 1, 1), (0, 0, -1)]));
        let c = PlanarCurve::square_box(f, 50).unwrap();
        let oracle = count_points_bruteforce(&c).unwrap();
        assert_eq!(oracle, scan(&c));
        for ell in [53, 7, 101] {
            assert_eq!(count_points_detmethod(&c, ell).unwrap(), oracle, "ell = {ell}");
        }
        for f in [bp(&[(1, 0, 2), (0, 1, -3), (0, 0, 1)]), bp(&[(0, 1, 1), (0, 0, -4)]), bp(&[(2, 0, 1), (0, 0, -9)])] {
            let c = PlanarCurve::square_box(f, 40).unwrap();
            assert_eq!(count_points_detmethod(&c, 11).unwrap(), scan(&c));
        }
        let mixed = bp(&[(2, 0, 1), (0, 4, -1)]).mul(&bp(&[(0, 1, 1), (0, 0, -2)]));
        let c = PlanarCurve::new(mixed, 30, 6).unwrap();
        assert_eq!(count_points_detmethod(&c, 5).unwrap(), scan(&c));
    }

    #[test]
    fn detmethod_large_quartic() {
        let f = bp(&[(2, 0, 1), (0, 4, -1), (0, 0, -1)]);
        let c = PlanarCurve::square_box(f, 10_000).unwrap();
        let oracle = count_points_bruteforce(&c).unwrap();
        assert_eq!(oracle, vec![(-1, 0), (1, 0)]);
        assert_eq!(count_points_detmethod(&c, 10007).unwrap(), oracle);
    }

    #[test]
    fn auxiliary_polynomials_vanish_on_class_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let curves = [
            pell(),
            bp(&[(2, 0, 1), (0, 4, -1)]),
            bp(&[(2, 0, 1), (1, 1, 1), (0, 2, -1), (0, 0, -1)]),
            bp(&[(1, 0, 1), (0, 1, -1)]).mul(&bp(&[(1, 0, 1), (0, 1, 1), (0, 0, -1)])),
        ];
        for f in curves {
            let ell = [7u64, 13, 31][rng.gen_range(0..3)];
            let c = PlanarCurve::square_box(f, 60).unwrap();
            let oracle = count_points_bruteforce(&c).unwrap();
            let report = detmethod_with(&c, ell, &DetMethodOptions { keep_auxiliary: true, ..Default::default() }).unwrap();
            assert_eq!(report.points, oracle);
            for rec in &report.auxiliary {
                for &(x, y) in &oracle {
                    if x.rem_euclid(ell as i64) as u64 == rec.residue.0 && y.rem_euclid(ell as i64) as u64 == rec.residue.1 {
                        assert!(rec.g.eval_i64(x, y).is_zero(), "g = {:?} at {:?}", rec.g, (x, y));
                    }
                }
            }
        }
    }

    #[test]
    fn no_fallback_reports_small_modulus() {
        let f = bp(&[(2, 0, 1), (0, 3, -1), (1, 0, 1), (0, 0, -7)]);
        let c = PlanarCurve::square_box(f, 5000).unwrap();
        let opts = DetMethodOptions { degree_cap: Some(1), allow_fallback: false, keep_auxiliary: false };
        match detmethod_with(&c, 5, &opts) {
            Err(Error::EllTooSmall { ell: 5, cap: 1 }) => {}
            other => panic!("expected EllTooSmall, got {other:?}"),
        }
    }

    fn random_curve(rng: &mut ChaCha8Rng) -> BiPoly {
        loop {
            let d = rng.gen_range(1..=4);
            let nterms = rng.gen_range(1..=6);
            let mut terms: Vec<(usize, usize, i64)> = (0..nterms)
                .map(|_| {
                    let i = rng.gen_range(0..=d);
                    let j = rng.gen_range(0..=d - i);
                    (i, j, rng.gen_range(-50..=50))
                })
                .collect();
            let i = rng.gen_range(0..=d);
            terms.push((i, d - i, rng.gen_range(1..=50)));
            let f = BiPoly::from_terms(&terms);
            if !f.is_zero() && f.is_squarefree() && f.total_degree().unwrap() >= 1 {
                return f;
            }
        }
    }

    #[test]
    fn detmethod_matches_oracle_on_random_curves() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for case in 0..40 {
            let f = random_curve(&mut rng);
            let b = rng.gen_range(1..=300);
            let c = PlanarCurve::square_box(f.clone(), b).unwrap();
            let content = f.leading_form_content();
            let mut ell = next_prime(rng.gen_range(3..=2 * b as u64 + 3));
            while content.is_multiple_of(&BigInt::from(ell)) {
                ell = next_prime(ell + 1);
            }
            let oracle = count_points_bruteforce(&c).unwrap();
            assert_eq!(count_points_detmethod(&c, ell).unwrap(), oracle, "case {case}: f = {f:?}, box {b}, ell {ell}");
        }
    }

    #[test]
    fn fiber_curve_examples() {
        let c = BigInt::from(16);
        let z4 = IntPolynomial::from_i64(&[0, 0, 0, 0, 16]);
        let fc = FiberCurve { c: c.clone(), poly: z4, degenerate: true };
        for b1 in [0u64, 5, 100] {
            let r = count_fiber_curve(&fc, b1);
            assert_eq!(r.count, 2 * b1 + 1);
            assert_eq!(r.method, CountMethod::Bruteforce);
        }
        let constant = FiberCurve { c: c.clone(), poly: IntPolynomial::constant(16 * 49), degenerate: true };
        assert_eq!(count_fiber_curve(&constant, 70).count, 141);
        let negative = FiberCurve { c: c.clone(), poly: IntPolynomial::constant(-16), degenerate: false };
        assert_eq!(count_fiber_curve(&negative, 70).count, 0);
        // x0² = z1⁴ + 1 over 16, non-degenerate
        let quartic = FiberCurve { c: c.clone(), poly: IntPolynomial::from_i64(&[16, 0, 0, 0, 16]), degenerate: false };
        let r = count_fiber_curve(&quartic, 200);
        assert_eq!(r.method, CountMethod::Detmethod);
        assert_eq!(r.count, 1);
        assert!((r.sqrt_b1 - 200f64.sqrt()).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn fiber_count_matches_scan(coeffs in proptest::collection::vec(-40i64..=40, 1..=5), c in 1i64..=20, b1 in 60u64..=140) {
            let poly = IntPolynomial::from_i64(&coeffs);
            let degenerate = crate::exactmath::poly_square_root(&poly.scale(&BigInt::from(c))).is_some();
            let fc = FiberCurve { c: BigInt::from(c), poly: poly.clone(), degenerate };
            let expected = (-(b1 as i64)..=b1 as i64)
                .filter(|&z| perfect_square_part(&poly.eval_i128(z as i128), &BigInt::from(c)).is_some())
                .count() as u64;
            prop_assert_eq!(count_fiber_curve(&fc, b1).count, expected);
        }
    }
}
