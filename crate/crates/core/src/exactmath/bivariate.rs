//! Bivariate integer polynomials, stored as polynomials in `x` with coefficients in `Z[y]`.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::matrix::IntMatrix;
use super::poly::IntPolynomial;

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BiPoly {
    /// `rows[i]` is the coefficient of `x^i`; no trailing zero rows.
    rows: Vec<IntPolynomial>,
}

impl BiPoly {
    pub fn zero() -> Self {
        BiPoly { rows: Vec::new() }
    }

    pub fn from_rows(mut rows: Vec<IntPolynomial>) -> Self {
        while rows.last().is_some_and(IntPolynomial::is_zero) {
            rows.pop();
        }
        BiPoly { rows }
    }

    /// Sum of `c·x^i·y^j` over the given `(i, j, c)` terms.
    pub fn from_terms<T: Clone + Into<BigInt>>(terms: &[(usize, usize, T)]) -> Self {
        let dx = terms.iter().map(|t| t.0 + 1).max().unwrap_or(0);
        let mut rows = vec![Vec::<BigInt>::new(); dx];
        for (i, j, c) in terms {
            let row = &mut rows[*i];
            if row.len() <= *j {
                row.resize(j + 1, BigInt::zero());
            }
            row[*j] += c.clone().into();
        }
        Self::from_rows(rows.into_iter().map(IntPolynomial::new).collect())
    }

    /// The polynomial `p(y)`.
    pub fn from_y(p: IntPolynomial) -> Self {
        Self::from_rows(vec![p])
    }

    /// The polynomial `p(x)`.
    pub fn from_x(p: &IntPolynomial) -> Self {
        Self::from_rows(p.coeffs().iter().map(|c| IntPolynomial::constant(c.clone())).collect())
    }

    pub fn rows(&self) -> &[IntPolynomial] {
        &self.rows
    }

    pub fn is_zero(&self) -> bool {
        self.rows.is_empty()
    }

    /// Degree in `x`; `None` for zero.
    pub fn deg_x(&self) -> Option<usize> {
        self.rows.len().checked_sub(1)
    }

    /// Degree in `y`; `None` for zero.
    pub fn deg_y(&self) -> Option<usize> {
        self.rows.iter().filter_map(IntPolynomial::degree).max()
    }

    /// Total degree; `None` for zero.
    pub fn total_degree(&self) -> Option<usize> {
        self.terms().map(|(i, j, _)| i + j).max()
    }

    /// Nonzero terms `(i, j, c)` of `c·x^i·y^j`.
    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, &BigInt)> + '_ {
        self.rows.iter().enumerate().flat_map(|(i, r)| r.coeffs().iter().enumerate().filter(|(_, c)| !c.is_zero()).map(move |(j, c)| (i, j, c)))
    }

    /// Gcd of all integer coefficients.
    pub fn integer_content(&self) -> BigInt {
        self.terms().fold(BigInt::zero(), |g, (_, _, c)| g.gcd(c))
    }

    /// Gcd of the integer coefficients of the top-degree homogeneous part.
    pub fn leading_form_content(&self) -> BigInt {
        let d = self.total_degree().unwrap_or(0);
        self.terms().filter(|(i, j, _)| i + j == d).fold(BigInt::zero(), |g, (_, _, c)| g.gcd(c))
    }

    pub fn eval(&self, x: &BigInt, y: &BigInt) -> BigInt {
        self.rows.iter().rev().fold(BigInt::zero(), |acc, r| acc * x + r.eval(y))
    }

    pub fn eval_i64(&self, x: i64, y: i64) -> BigInt {
        self.eval(&BigInt::from(x), &BigInt::from(y))
    }

    /// `f(x, y0)` as a polynomial in `x`.
    pub fn at_y(&self, y: &BigInt) -> IntPolynomial {
        IntPolynomial::new(self.rows.iter().map(|r| r.eval(y)).collect())
    }

    /// `f(x0, y)` as a polynomial in `y`.
    pub fn at_x(&self, x: &BigInt) -> IntPolynomial {
        self.rows.iter().rev().fold(IntPolynomial::zero(), |acc, r| &(&acc * &IntPolynomial::constant(x.clone())) + r)
    }

    /// Swap the roles of `x` and `y`.
    pub fn swap(&self) -> Self {
        let terms: Vec<(usize, usize, BigInt)> = self.terms().map(|(i, j, c)| (j, i, c.clone())).collect();
        Self::from_terms(&terms)
    }

    pub fn d_dx(&self) -> Self {
        Self::from_rows(self.rows.iter().enumerate().skip(1).map(|(i, r)| r.scale(&BigInt::from(i))).collect())
    }

    pub fn d_dy(&self) -> Self {
        Self::from_rows(self.rows.iter().map(IntPolynomial::derivative).collect())
    }

    pub fn scale_y(&self, p: &IntPolynomial) -> Self {
        Self::from_rows(self.rows.iter().map(|r| r * p).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.rows.len().max(other.rows.len());
        Self::from_rows((0..n).map(|i| &self.row(i) + &other.row(i)).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        let n = self.rows.len().max(other.rows.len());
        Self::from_rows((0..n).map(|i| &self.row(i) - &other.row(i)).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![IntPolynomial::zero(); self.rows.len() + other.rows.len() - 1];
        for (i, a) in self.rows.iter().enumerate() {
            for (j, b) in other.rows.iter().enumerate() {
                out[i + j] = &out[i + j] + &(a * b);
            }
        }
        Self::from_rows(out)
    }

    fn row(&self, i: usize) -> IntPolynomial {
        self.rows.get(i).cloned().unwrap_or_default()
    }

    fn leading_row(&self) -> &IntPolynomial {
        self.rows.last().expect("nonzero")
    }

    fn shift_x(&self, k: usize) -> Self {
        let mut rows = vec![IntPolynomial::zero(); k];
        rows.extend(self.rows.iter().cloned());
        Self::from_rows(rows)
    }

    /// Content in `Z[y]`: gcd of the `x`-coefficients (sign normalized).
    pub fn content_x(&self) -> IntPolynomial {
        self.rows.iter().fold(IntPolynomial::zero(), |g, r| g.gcd(r))
    }

    /// Divide out the `Z[y]` content; leading coefficient has positive leading term.
    pub fn primitive_part_x(&self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let c = self.content_x();
        let mut out = Self::from_rows(self.rows.iter().map(|r| r.div_exact(&c).expect("content divides")).collect());
        if out.leading_row().leading().is_negative() {
            out = out.neg();
        }
        out
    }

    pub fn neg(&self) -> Self {
        Self::from_rows(self.rows.iter().map(|r| -r).collect())
    }

    /// Pseudo-remainder in `x` over `Z[y]`.
    pub fn pseudo_rem_x(&self, d: &Self) -> Self {
        let dd = d.deg_x().expect("pseudo-remainder by zero");
        let lc = d.leading_row().clone();
        let mut r = self.clone();
        while let Some(rd) = r.deg_x() {
            if rd < dd {
                break;
            }
            let lr = r.leading_row().clone();
            r = r.scale_y(&lc).sub(&d.scale_y(&lr).shift_x(rd - dd));
        }
        r
    }

    /// Exact division over `Z[y][x]`; `None` if `d` does not divide `self`.
    pub fn div_exact(&self, d: &Self) -> Option<Self> {
        let dd = d.deg_x()?;
        let lc = d.leading_row().clone();
        let mut r = self.clone();
        let mut q = vec![IntPolynomial::zero(); self.rows.len().saturating_sub(dd)];
        while let Some(rd) = r.deg_x() {
            if rd < dd {
                return None;
            }
            let c = r.leading_row().div_exact(&lc)?;
            r = r.sub(&d.scale_y(&c).shift_x(rd - dd));
            q[rd - dd] = c;
        }
        Some(Self::from_rows(q))
    }

    /// Gcd over `Z[y][x]`, normalized as in [`BiPoly::primitive_part_x`] times the content gcd.
    pub fn gcd(&self, other: &Self) -> Self {
        if self.is_zero() {
            return other.primitive_part_x().scale_y(&other.content_x());
        }
        if other.is_zero() {
            return self.primitive_part_x().scale_y(&self.content_x());
        }
        let content = self.content_x().gcd(&other.content_x());
        let (mut a, mut b) = (self.primitive_part_x(), other.primitive_part_x());
        if a.deg_x() < b.deg_x() {
            std::mem::swap(&mut a, &mut b);
        }
        while !b.is_zero() {
            let r = a.pseudo_rem_x(&b);
            a = b;
            b = r.primitive_part_x();
        }
        let a = if a.deg_x() == Some(0) { Self::from_y(IntPolynomial::constant(1)) } else { a.primitive_part_x() };
        a.scale_y(&content)
    }

    /// Squarefree in `Q[x, y]`.
    pub fn is_squarefree(&self) -> bool {
        if self.is_zero() {
            return false;
        }
        let content = self.content_x();
        if content.degree().unwrap_or(0) > 0 && content.gcd(&content.derivative()).degree().unwrap_or(0) > 0 {
            return false;
        }
        let pp = self.primitive_part_x();
        if pp.deg_x() == Some(0) {
            return true;
        }
        pp.gcd(&pp.d_dx()).deg_x() == Some(0)
    }

    /// Resultant in `x` as a polynomial in `y`, using the formal `x`-degrees.
    /// Computed by evaluation at `y = 0, 1, …` and exact Newton interpolation.
    pub fn resultant_x(&self, other: &Self) -> IntPolynomial {
        let m = self.deg_x().expect("nonzero");
        let n = other.deg_x().expect("nonzero");
        if n == 0 {
            return pow_poly(other.leading_row(), m);
        }
        if m == 0 {
            return pow_poly(self.leading_row(), n);
        }
        if n == 1 {
            // Res(f, g1·x + g0) = (-1)^m Σ f_i (-g0)^i g1^(m-i)
            let (g0, g1) = (&other.rows[0], &other.rows[1]);
            let neg_g0 = -g0;
            let mut acc = IntPolynomial::zero();
            for (i, fi) in self.rows.iter().enumerate() {
                acc = &acc + &(&(fi * &pow_poly(&neg_g0, i)) * &pow_poly(g1, m - i));
            }
            return if m % 2 == 1 { -&acc } else { acc };
        }
        let bound = m * other.deg_y().unwrap_or(0) + n * self.deg_y().unwrap_or(0);
        let values: Vec<BigInt> = (0..=bound)
            .map(|y| {
                let y = BigInt::from(y);
                let f: Vec<BigInt> = (0..=m).map(|i| self.rows[i].eval(&y)).collect();
                let g: Vec<BigInt> = (0..=n).map(|i| other.rows[i].eval(&y)).collect();
                formal_sylvester(&f, &g).det()
            })
            .collect();
        interpolate_consecutive(&values)
    }
}

fn pow_poly(p: &IntPolynomial, e: usize) -> IntPolynomial {
    (0..e).fold(IntPolynomial::constant(1), |acc, _| &acc * p)
}

/// Sylvester matrix with the given coefficient vectors (low degree first) as formal degrees.
fn formal_sylvester(f: &[BigInt], g: &[BigInt]) -> IntMatrix {
    let (m, n) = (f.len() - 1, g.len() - 1);
    let mut s = IntMatrix::zeros(m + n, m + n);
    for i in 0..n {
        for (k, c) in f.iter().rev().enumerate() {
            s[(i, i + k)] = c.clone();
        }
    }
    for i in 0..m {
        for (k, c) in g.iter().rev().enumerate() {
            s[(n + i, i + k)] = c.clone();
        }
    }
    s
}

/// The integer polynomial of degree `< values.len()` taking `values[k]` at `y = k`.
fn interpolate_consecutive(values: &[BigInt]) -> IntPolynomial {
    let mut diffs = values.to_vec();
    let mut newton = Vec::with_capacity(values.len());
    for _ in 0..values.len() {
        newton.push(diffs[0].clone());
        diffs = diffs.windows(2).map(|w| &w[1] - &w[0]).collect();
    }
    let mut out = IntPolynomial::zero();
    let mut falling = IntPolynomial::constant(1);
    let mut factorial = BigInt::one();
    for (k, d) in newton.iter().enumerate() {
        if k > 0 {
            factorial *= k;
            falling = &falling * &IntPolynomial::new(vec![BigInt::from(-(k as i64 - 1)), BigInt::one()]);
        }
        let (q, r) = d.div_rem(&factorial);
        debug_assert!(r.is_zero(), "integer polynomial has divisible finite differences");
        out = &out + &falling.scale(&q);
    }
    out
}

impl fmt::Debug for BiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self.terms().map(|(i, j, c)| format!("{c}*x^{i}*y^{j}")).collect();
        if terms.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", terms.join(" + "))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bp(terms: &[(usize, usize, i64)]) -> BiPoly {
        BiPoly::from_terms(terms)
    }

    #[test]
    fn degrees_and_evaluation() {
        let f = bp(&[(2, 0, 1), (0, 2, -2), (0, 0, -1)]);
        assert_eq!(f.deg_x(), Some(2));
        assert_eq!(f.deg_y(), Some(2));
        assert_eq!(f.total_degree(), Some(2));
        assert!(f.eval_i64(3, 2).is_zero());
        assert_eq!(f.eval_i64(1, 1), BigInt::from(-2));
        assert_eq!(f.at_y(&BigInt::from(2)), IntPolynomial::from_i64(&[-9, 0, 1]));
        assert_eq!(f.at_x(&BigInt::from(3)), IntPolynomial::from_i64(&[8, 0, -2]));
        assert_eq!(f.swap().eval_i64(2, 3), BigInt::zero());
    }

    #[test]
    fn resultant_of_circle_and_line() {
        // Res_x(x² + y² − 25, x − y) = 2y² − 25
        let f = bp(&[(2, 0, 1), (0, 2, 1), (0, 0, -25)]);
        let g = bp(&[(1, 0, 1), (0, 1, -1)]);
        assert_eq!(f.resultant_x(&g), IntPolynomial::from_i64(&[-25, 0, 2]));
    }

    #[test]
    fn gcd_and_division() {
        let a = bp(&[(1, 0, 1), (0, 1, -1)]);
        let b = bp(&[(1, 0, 1), (0, 1, 1), (0, 0, -1)]);
        let c = bp(&[(2, 0, 1), (0, 0, 3)]);
        let ab = a.mul(&b);
        let ac = a.mul(&c);
        assert_eq!(ab.gcd(&ac), a);
        assert_eq!(ab.div_exact(&a), Some(b.clone()));
        assert!(ab.is_squarefree());
        assert!(!a.mul(&a).is_squarefree());
        let y2 = BiPoly::from_y(IntPolynomial::from_i64(&[0, 0, 1]));
        assert!(!b.mul(&y2).is_squarefree());
        assert!(b.mul(&BiPoly::from_y(IntPolynomial::from_i64(&[0, 1]))).is_squarefree());
    }

    fn small_poly() -> impl Strategy<Value = BiPoly> {
        proptest::collection::vec((0usize..3, 0usize..3, -5i64..=5), 1..6).prop_map(|t| BiPoly::from_terms(&t))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn resultant_matches_pointwise_sylvester(f in small_poly(), g in small_poly(), y in -6i64..=6) {
            prop_assume!(!f.is_zero() && !g.is_zero());
            let r = f.resultant_x(&g);
            let yb = BigInt::from(y);
            let (m, n) = (f.deg_x().unwrap(), g.deg_x().unwrap());
            let fv: Vec<BigInt> = (0..=m).map(|i| f.rows()[i].eval(&yb)).collect();
            let gv: Vec<BigInt> = (0..=n).map(|i| g.rows()[i].eval(&yb)).collect();
            let direct = if m == 0 && n == 0 { BigInt::one() } else if n == 0 { num_traits::pow(gv[0].clone(), m) } else if m == 0 { num_traits::pow(fv[0].clone(), n) } else { formal_sylvester(&fv, &gv).det() };
            prop_assert_eq!(r.eval(&yb), direct);
        }

        #[test]
        fn product_divides_and_gcd_divides(f in small_poly(), g in small_poly()) {
            prop_assume!(!f.is_zero() && !g.is_zero() && g.deg_x().is_some());
            let h = f.mul(&g);
            prop_assert_eq!(h.div_exact(&g), Some(f.clone()));
            let d = h.gcd(&g);
            prop_assert!(h.div_exact(&d).is_some());
            prop_assert!(g.div_exact(&d).is_some());
        }
    }
}
