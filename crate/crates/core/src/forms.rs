//! Binary and quaternary integral quadratic forms in the doubled-Gram convention.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::exactmath::arith::{is_prime_u64, legendre};
use crate::exactmath::lattice::{lll_gram, short_vectors, ShortVectorOptions};
use crate::exactmath::IntMatrix;

/// Positive definite binary form `a·x² + b·xy + c·y²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BinaryForm {
    a: i64,
    b: i64,
    c: i64,
}

impl BinaryForm {
    pub fn new(a: i64, b: i64, c: i64) -> Result<Self> {
        let four_d = 4 * a as i128 * c as i128 - b as i128 * b as i128;
        if a <= 0 || four_d <= 0 {
            return Err(Error::NotPositiveDefinite(format!("binary form ({a},{b},{c})")));
        }
        if four_d > i64::MAX as i128 {
            return Err(Error::Overflow("binary discriminant"));
        }
        Ok(BinaryForm { a, b, c })
    }

    pub fn a(&self) -> i64 {
        self.a
    }

    pub fn b(&self) -> i64 {
        self.b
    }

    pub fn c(&self) -> i64 {
        self.c
    }

    /// `4ac − b²`, four times the discriminant `ac − b²/4`.
    pub fn four_d(&self) -> i64 {
        4 * self.a * self.c - self.b * self.b
    }

    /// Doubled Gram matrix `[[2a, b], [b, 2c]]`.
    pub fn gram2(&self) -> [[i64; 2]; 2] {
        [[2 * self.a, self.b], [self.b, 2 * self.c]]
    }

    pub fn eval(&self, x: i64, y: i64) -> i128 {
        let (x, y) = (x as i128, y as i128);
        self.a as i128 * x * x + self.b as i128 * x * y + self.c as i128 * y * y
    }

    /// Gauss-reduced if `|b| <= a <= c`, with `b >= 0` when `|b| = a` or `a = c`.
    pub fn is_reduced(&self) -> bool {
        let (a, b, c) = (self.a, self.b, self.c);
        b.abs() <= a && a <= c && (b >= 0 || (b.abs() != a && a != c))
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({ "binary": [self.a, self.b, self.c] })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let arr = v
            .get("binary")
            .and_then(|x| x.as_array())
            .filter(|a| a.len() == 3)
            .ok_or_else(|| Error::Dimension("expected {\"binary\": [a, b, c]}".into()))?;
        let n: Vec<i64> = arr.iter().map(|x| x.as_i64().ok_or_else(|| Error::Dimension("non-integer coefficient".into()))).collect::<Result<_>>()?;
        Self::new(n[0], n[1], n[2])
    }
}

/// Positive definite quaternary form stored as its doubled Gram matrix.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QuaternaryForm {
    gram2: IntMatrix,
    entries: [[i64; 4]; 4],
    det2: BigInt,
}

impl QuaternaryForm {
    pub fn from_gram2(m: &IntMatrix) -> Result<Self> {
        if m.rows() != 4 || m.cols() != 4 {
            return Err(Error::Dimension(format!("expected 4x4, got {}x{}", m.rows(), m.cols())));
        }
        if !m.is_symmetric() {
            return Err(Error::Dimension("gram2 must be symmetric".into()));
        }
        for i in 0..4 {
            if m[(i, i)].is_odd() {
                return Err(Error::OddDiagonal(i));
            }
        }
        // leading principal minors
        for k in 1..=4 {
            let mut sub = IntMatrix::zeros(k, k);
            for i in 0..k {
                for j in 0..k {
                    sub[(i, j)] = m[(i, j)].clone();
                }
            }
            if !sub.det().is_positive() {
                return Err(Error::NotPositiveDefinite(format!("leading minor {k} of gram2 is not positive")));
            }
        }
        let mut entries = [[0i64; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                entries[i][j] = m[(i, j)].to_i64().ok_or(Error::Overflow("gram2 entry"))?;
                if entries[i][j].abs() > 1 << 30 {
                    return Err(Error::Overflow("gram2 entry"));
                }
            }
        }
        Ok(QuaternaryForm { gram2: m.clone(), entries, det2: m.det() })
    }

    pub fn from_rows(rows: [[i64; 4]; 4]) -> Result<Self> {
        let v: Vec<Vec<i64>> = rows.iter().map(|r| r.to_vec()).collect();
        Self::from_gram2(&IntMatrix::from_rows(&v))
    }

    /// Diagonal form with the given doubled-Gram diagonal.
    pub fn diagonal(diag2: [i64; 4]) -> Result<Self> {
        Self::from_gram2(&IntMatrix::from_diagonal(&diag2))
    }

    /// The sum of four squares, `gram2 = 2·I`.
    pub fn sum_of_four_squares() -> Self {
        Self::diagonal([2, 2, 2, 2]).expect("valid form")
    }

    pub fn gram2(&self) -> &IntMatrix {
        &self.gram2
    }

    pub fn entries(&self) -> &[[i64; 4]; 4] {
        &self.entries
    }

    /// `det(gram2) = 16·disc(Q)`.
    pub fn det2(&self) -> &BigInt {
        &self.det2
    }

    /// Doubled pairing `uᵀ·gram2·v`.
    pub fn pairing(&self, u: &[i64; 4], v: &[i64; 4]) -> i128 {
        let mut s = 0i128;
        for i in 0..4 {
            let mut row = 0i128;
            for j in 0..4 {
                row += self.entries[i][j] as i128 * v[j] as i128;
            }
            s += u[i] as i128 * row;
        }
        s
    }

    /// `Q(v) = vᵀ·gram2·v / 2`.
    pub fn value(&self, v: &[i64; 4]) -> i128 {
        self.pairing(v, v) / 2
    }

    /// `Uᵀ·gram2·U` for a change of basis `U`.
    pub fn transform(&self, u: &IntMatrix) -> Result<Self> {
        Self::from_gram2(&u.congruent(&self.gram2))
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({ "quaternary_gram2": self.entries })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let rows = v
            .get("quaternary_gram2")
            .and_then(|x| x.as_array())
            .filter(|a| a.len() == 4)
            .ok_or_else(|| Error::Dimension("expected {\"quaternary_gram2\": 4x4}".into()))?;
        let mut out = [[0i64; 4]; 4];
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_array().filter(|r| r.len() == 4).ok_or_else(|| Error::Dimension("row of length 4".into()))?;
            for (j, x) in r.iter().enumerate() {
                out[i][j] = x.as_i64().ok_or_else(|| Error::Dimension("non-integer entry".into()))?;
            }
        }
        Self::from_rows(out)
    }
}

pub fn binary_from_coeffs(a: i64, b: i64, c: i64) -> Result<BinaryForm> {
    BinaryForm::new(a, b, c)
}

pub fn quaternary_from_gram2(m: &IntMatrix) -> Result<QuaternaryForm> {
    QuaternaryForm::from_gram2(m)
}

/// Equivalent Gauss-reduced form and the proper change of basis `U` (det 1) with
/// `Uᵀ·gram2(q)·U = gram2(reduced)`.
pub fn gauss_reduce(q: &BinaryForm) -> (BinaryForm, [[i64; 2]; 2]) {
    let (mut a, mut b, mut c) = (q.a as i128, q.b as i128, q.c as i128);
    let mut u = [[1i128, 0], [0, 1]];
    loop {
        // y-shift x -> x + k·y brings b into (-a, a]
        let k = Integer::div_floor(&(a - b), &(2 * a));
        if k != 0 {
            c += a * k * k + b * k;
            b += 2 * a * k;
            u = [[u[0][0], u[0][0] * k + u[0][1]], [u[1][0], u[1][0] * k + u[1][1]]];
        }
        if a > c || (a == c && b < 0) {
            // (x, y) -> (-y, x)
            std::mem::swap(&mut a, &mut c);
            b = -b;
            u = [[u[0][1], -u[0][0]], [u[1][1], -u[1][0]]];
            continue;
        }
        break;
    }
    let cast = |x: i128| x as i64;
    let reduced = BinaryForm { a: cast(a), b: cast(b), c: cast(c) };
    (reduced, [[cast(u[0][0]), cast(u[0][1])], [cast(u[1][0]), cast(u[1][1])]])
}

/// Least value of `Q` on nonzero integer vectors.
pub fn min_quaternary(q: &QuaternaryForm) -> BigInt {
    let t = lll_gram(q.gram2(), 99, 100).expect("positive definite");
    let g = t.transpose().congruent(q.gram2());
    let radius = (0..4).map(|i| g[(i, i)].clone()).min().expect("nonempty");
    let opts = ShortVectorOptions { one_per_pair: true, exact_norm: false };
    let vecs = short_vectors(&g, &radius, opts).expect("positive definite");
    let m = vecs.into_iter().map(|(_, n)| n).min().expect("radius attained");
    m / 2
}

pub fn is_primitive_binary(q: &BinaryForm) -> bool {
    q.a.gcd(&q.b).gcd(&q.c) == 1
}

/// Whether `−disc(q)·disc(Q)` is a nonzero square mod the odd prime `p`.
pub fn splitting_check(q: &BinaryForm, form: &QuaternaryForm, p: u64) -> Result<bool> {
    if p == 2 || !is_prime_u64(p) {
        return Err(Error::NotOddPrime(p));
    }
    let v = -BigInt::from(q.four_d()) * form.det2();
    Ok(legendre(&v, p) == 1)
}

/// `min(q)² >= kappa·fourD` for the reduced form; `kappa = 1/16` reads `min(q) >= √D/2`.
pub fn is_balanced(q: &BinaryForm, kappa_num: i64, kappa_den: i64) -> bool {
    let (r, _) = gauss_reduce(q);
    let m = r.a as i128;
    m * m * kappa_den as i128 >= kappa_num as i128 * q.four_d() as i128
}

/// All reduced primitive positive definite forms with `fourD` in `[lo, hi]`,
/// sorted by `(fourD, a, b, c)`.
pub fn reduced_primitive_forms(lo: i64, hi: i64) -> Vec<BinaryForm> {
    let mut out = Vec::new();
    let lo = lo.max(3);
    let mut a = 1i64;
    // reduced forms satisfy 3a² <= fourD
    while 3 * a * a <= hi {
        for b in -a..=a {
            let cmin = a.max((lo + b * b + 4 * a - 1) / (4 * a));
            let mut c = cmin;
            while 4 * a * c - b * b <= hi {
                let f = BinaryForm { a, b, c };
                if f.is_reduced() && f.four_d() >= lo && is_primitive_binary(&f) {
                    out.push(f);
                }
                c += 1;
            }
        }
        a += 1;
    }
    out.sort_by_key(|f| (f.four_d(), f.a, f.b, f.c));
    out
}

/// Evaluate a doubled Gram matrix on `u`, returning `uᵀ·G·u`.
pub fn gram_value(g: &IntMatrix, u: &[BigInt]) -> BigInt {
    u.iter().zip(g.mul_vec(u)).map(|(a, b)| a * b).sum()
}

/// Whether `U` has determinant `±1`.
pub fn is_unimodular(u: &IntMatrix) -> bool {
    u.is_square() && u.det().abs().is_one()
}
