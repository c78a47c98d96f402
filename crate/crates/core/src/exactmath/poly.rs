//! Dense univariate polynomials over the integers.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::matrix::IntMatrix;
use crate::error::{Error, Result};

/// Integer polynomial, coefficients stored low degree first with no trailing zeros.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct IntPolynomial {
    coeffs: Vec<BigInt>,
}

impl IntPolynomial {
    pub fn zero() -> Self {
        IntPolynomial { coeffs: Vec::new() }
    }

    pub fn constant<T: Into<BigInt>>(c: T) -> Self {
        Self::new(vec![c.into()])
    }

    /// The monomial `t`.
    pub fn t() -> Self {
        Self::new(vec![BigInt::zero(), BigInt::one()])
    }

    pub fn new(mut coeffs: Vec<BigInt>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        IntPolynomial { coeffs }
    }

    pub fn from_i64(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| BigInt::from(c)).collect())
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    /// Coefficient of `t^i` (zero beyond the degree).
    pub fn coeff(&self, i: usize) -> BigInt {
        self.coeffs.get(i).cloned().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> BigInt {
        self.coeffs.last().cloned().unwrap_or_default()
    }

    pub fn eval(&self, t: &BigInt) -> BigInt {
        self.coeffs.iter().rev().fold(BigInt::zero(), |acc, c| acc * t + c)
    }

    pub fn eval_i128(&self, t: i128) -> BigInt {
        self.eval(&BigInt::from(t))
    }

    pub fn derivative(&self) -> Self {
        Self::new(self.coeffs.iter().enumerate().skip(1).map(|(i, c)| c * BigInt::from(i)).collect())
    }

    pub fn scale(&self, k: &BigInt) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    /// gcd of the coefficients (zero for the zero polynomial).
    pub fn content(&self) -> BigInt {
        self.coeffs.iter().fold(BigInt::zero(), |g, c| g.gcd(c))
    }

    /// Divide by the content and make the leading coefficient positive.
    pub fn primitive_part(&self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let mut g = self.content();
        if self.leading().is_negative() {
            g = -g;
        }
        Self::new(self.coeffs.iter().map(|c| c / &g).collect())
    }

    /// Pseudo-remainder of `self` by `d`: `lc(d)^(deg self - deg d + 1) · self mod d`.
    pub fn pseudo_rem(&self, d: &Self) -> Self {
        let dd = d.degree().expect("pseudo-remainder by zero polynomial");
        let lc = d.leading();
        let mut r = self.clone();
        while let Some(rd) = r.degree() {
            if rd < dd {
                break;
            }
            let lr = r.leading();
            let mut shifted = vec![BigInt::zero(); rd - dd];
            shifted.extend(d.coeffs.iter().map(|c| c * &lr));
            r = &r.scale(&lc) - &Self::new(shifted);
        }
        r
    }

    /// Exact division; `None` if `d` does not divide `self` over the integers.
    pub fn div_exact(&self, d: &Self) -> Option<Self> {
        let dd = d.degree()?;
        if self.is_zero() {
            return Some(Self::zero());
        }
        let lc = d.leading();
        let mut r = self.clone();
        let mut q = vec![BigInt::zero(); self.coeffs.len().saturating_sub(dd)];
        while let Some(rd) = r.degree() {
            if rd < dd {
                return None;
            }
            let (c, rem) = r.leading().div_rem(&lc);
            if !rem.is_zero() {
                return None;
            }
            let mut shifted = vec![BigInt::zero(); rd - dd];
            shifted.extend(d.coeffs.iter().map(|x| x * &c));
            q[rd - dd] = c;
            r = &r - &Self::new(shifted);
        }
        Some(Self::new(q))
    }

    /// Primitive gcd over the integers (positive leading coefficient).
    pub fn gcd(&self, other: &Self) -> Self {
        if self.is_zero() {
            return other.primitive_part();
        }
        if other.is_zero() {
            return self.primitive_part();
        }
        let content = self.content().gcd(&other.content());
        let (mut a, mut b) = (self.primitive_part(), other.primitive_part());
        if a.degree() < b.degree() {
            std::mem::swap(&mut a, &mut b);
        }
        while !b.is_zero() {
            let r = a.pseudo_rem(&b);
            a = b;
            b = r.primitive_part();
        }
        a.primitive_part().scale(&content)
    }

    /// Substitute `t -> a + b·t`.
    pub fn compose_linear(&self, a: &BigInt, b: &BigInt) -> Self {
        let lin = Self::new(vec![a.clone(), b.clone()]);
        let mut out = Self::zero();
        for c in self.coeffs.iter().rev() {
            out = &(&out * &lin) + &Self::constant(c.clone());
        }
        out
    }
}

impl Add for &IntPolynomial {
    type Output = IntPolynomial;
    fn add(self, rhs: &IntPolynomial) -> IntPolynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        IntPolynomial::new((0..n).map(|i| self.coeff(i) + rhs.coeff(i)).collect())
    }
}

impl Sub for &IntPolynomial {
    type Output = IntPolynomial;
    fn sub(self, rhs: &IntPolynomial) -> IntPolynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        IntPolynomial::new((0..n).map(|i| self.coeff(i) - rhs.coeff(i)).collect())
    }
}

impl Mul for &IntPolynomial {
    type Output = IntPolynomial;
    fn mul(self, rhs: &IntPolynomial) -> IntPolynomial {
        if self.is_zero() || rhs.is_zero() {
            return IntPolynomial::zero();
        }
        let mut out = vec![BigInt::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        IntPolynomial::new(out)
    }
}

impl Neg for &IntPolynomial {
    type Output = IntPolynomial;
    fn neg(self) -> IntPolynomial {
        IntPolynomial::new(self.coeffs.iter().map(|c| -c).collect())
    }
}

impl fmt::Debug for IntPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match i {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c}*t")?,
                _ => write!(f, "{c}*t^{i}")?,
            }
        }
        Ok(())
    }
}

/// Sylvester matrix of `f` (degree m) and `g` (degree n), size (m+n)×(m+n).
pub fn sylvester_matrix(f: &IntPolynomial, g: &IntPolynomial) -> Result<IntMatrix> {
    let m = f.degree().ok_or(Error::ZeroPolynomial)?;
    let n = g.degree().ok_or(Error::ZeroPolynomial)?;
    let size = m + n;
    if size == 0 {
        return Err(Error::Dimension("both polynomials are constant".into()));
    }
    let mut s = IntMatrix::zeros(size, size);
    for i in 0..n {
        for (k, c) in f.coeffs.iter().rev().enumerate() {
            s[(i, i + k)] = c.clone();
        }
    }
    for i in 0..m {
        for (k, c) in g.coeffs.iter().rev().enumerate() {
            s[(n + i, i + k)] = c.clone();
        }
    }
    Ok(s)
}

/// Sylvester resultant. A constant argument `c` against degree `d` gives `c^d`.
pub fn resultant(f: &IntPolynomial, g: &IntPolynomial) -> Result<BigInt> {
    let m = f.degree().ok_or(Error::ZeroPolynomial)?;
    let n = g.degree().ok_or(Error::ZeroPolynomial)?;
    if m == 0 && n == 0 {
        return Ok(BigInt::one());
    }
    Ok(sylvester_matrix(f, g)?.det())
}

/// `R` with `R² = P` over the integers (positive leading coefficient), if one exists.
/// A square in `Q[t]` with integer coefficients is already a square in `Z[t]`.
pub fn poly_square_root(p: &IntPolynomial) -> Option<IntPolynomial> {
    let Some(deg) = p.degree() else {
        return Some(IntPolynomial::zero());
    };
    if deg % 2 == 1 {
        return None;
    }
    let m = deg / 2;
    let lead = super::arith::exact_sqrt_big(&p.leading())?;
    let two_lead = &lead * 2;
    let mut r = vec![BigInt::zero(); m + 1];
    r[m] = lead;
    for k in 1..=m {
        // coefficient of t^(2m-k) in R² is 2·r_m·r_{m-k} + Σ r_i r_j over known i, j
        let target = 2 * m - k;
        let mut acc = p.coeff(target);
        for i in (m - k + 1)..=m {
            let j = target - i;
            if j > m || j < m - k + 1 {
                continue;
            }
            acc -= &r[i] * &r[j];
        }
        let (q, rem) = acc.div_rem(&two_lead);
        if !rem.is_zero() {
            return None;
        }
        r[m - k] = q;
    }
    let root = IntPolynomial::new(r);
    (&(&root * &root) == p).then_some(root)
}
