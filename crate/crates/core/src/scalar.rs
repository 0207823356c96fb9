//! Number types that tensor components can be built from.
//!
//! [`Coefficient`] is the ring-like interface shared by symbolic expressions
//! and numbers, so the dense tensor algebra is written once. [`Scalar`] adds
//! what evaluation needs: reciprocals, transcendental functions and a
//! conversion to `f64` for residual reporting.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::expr::EvalError;

/// Matrix inversion failed because the matrix is (numerically) singular.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("matrix is singular (|det| = {det_abs:e})")]
pub struct SingularMatrix {
    pub det_abs: f64,
}

/// Relative determinant threshold below which a float matrix counts as singular.
pub const SINGULAR_DET_RTOL: f64 = 1e-12;

pub trait Coefficient: Clone + fmt::Debug + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn from_rational(r: &BigRational) -> Self;
    fn add(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    /// True only when the value is known to be exactly zero.
    fn is_zero(&self) -> bool;
    /// Equality used to validate symmetry metadata: exact for rationals,
    /// 1e-12 relative for floats, evaluation-based for expressions.
    fn approx_eq(&self, other: &Self) -> bool;
    /// Inverse of a row-major `n x n` matrix.
    fn invert_matrix(n: usize, entries: &[Self]) -> Result<Vec<Self>, SingularMatrix>;

    fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_rational(&BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    fn from_int(v: i64) -> Self {
        Self::from_ratio(v, 1)
    }

    fn scale(&self, num: i64, den: i64) -> Self {
        self.mul(&Self::from_ratio(num, den))
    }

    fn sum_of<'a, I>(items: I) -> Self
    where
        I: IntoIterator<Item = &'a Self>,
        Self: 'a,
    {
        items.into_iter().fold(Self::zero(), |acc, x| acc.add(x))
    }
}

/// A number type expressions can be evaluated in.
pub trait Scalar: Coefficient + PartialEq {
    /// Whether arithmetic in this type is exact.
    const EXACT: bool;
    /// Short mode name used in reports.
    const MODE: &'static str;

    fn recip(&self) -> Result<Self, EvalError>;
    fn sin(&self) -> Result<Self, EvalError>;
    fn cos(&self) -> Result<Self, EvalError>;
    fn exp(&self) -> Result<Self, EvalError>;
    fn to_f64(&self) -> f64;
    /// Converts a decimal sample coordinate into this number type.
    fn from_f64(v: f64) -> Self;

    fn abs_f64(&self) -> f64 {
        self.to_f64().abs()
    }

    /// Text form used in JSON output for exact values.
    fn exact_string(&self) -> String {
        self.to_f64().to_string()
    }

    fn powi(&self, exp: i64) -> Result<Self, EvalError> {
        let base = if exp < 0 { self.recip()? } else { self.clone() };
        let mut e = exp.unsigned_abs();
        let mut acc = Self::one();
        let mut sq = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&sq);
            }
            e >>= 1;
            if e > 0 {
                sq = sq.mul(&sq);
            }
        }
        Ok(acc)
    }
}

impl Coefficient for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_rational(r: &BigRational) -> Self {
        rational_to_f64(r)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn neg(&self) -> Self {
        -self
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn approx_eq(&self, other: &Self) -> bool {
        (self - other).abs() <= 1e-12 * (1.0 + self.abs().max(other.abs()))
    }
    fn invert_matrix(n: usize, entries: &[Self]) -> Result<Vec<Self>, SingularMatrix> {
        invert_f64(n, entries)
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;
    const MODE: &'static str = "float";

    fn recip(&self) -> Result<Self, EvalError> {
        if *self == 0.0 {
            Err(EvalError::Domain("reciprocal of zero".into()))
        } else {
            Ok(1.0 / self)
        }
    }
    fn sin(&self) -> Result<Self, EvalError> {
        Ok(f64::sin(*self))
    }
    fn cos(&self) -> Result<Self, EvalError> {
        Ok(f64::cos(*self))
    }
    fn exp(&self) -> Result<Self, EvalError> {
        Ok(f64::exp(*self))
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn from_f64(v: f64) -> Self {
        v
    }
}

impl Coefficient for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn neg(&self) -> Self {
        -self
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn approx_eq(&self, other: &Self) -> bool {
        self == other
    }
    fn invert_matrix(n: usize, entries: &[Self]) -> Result<Vec<Self>, SingularMatrix> {
        invert_exact(n, entries)
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;
    const MODE: &'static str = "rational";

    fn recip(&self) -> Result<Self, EvalError> {
        if Zero::is_zero(self) {
            Err(EvalError::Domain("reciprocal of zero".into()))
        } else {
            Ok(self.recip())
        }
    }
    fn sin(&self) -> Result<Self, EvalError> {
        Err(EvalError::Transcendental("sin"))
    }
    fn cos(&self) -> Result<Self, EvalError> {
        Err(EvalError::Transcendental("cos"))
    }
    fn exp(&self) -> Result<Self, EvalError> {
        Err(EvalError::Transcendental("exp"))
    }
    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }
    fn from_f64(v: f64) -> Self {
        BigRational::from_float(v).unwrap_or_else(Zero::zero)
    }
    fn abs_f64(&self) -> f64 {
        rational_to_f64(&self.abs())
    }
    fn exact_string(&self) -> String {
        self.to_string()
    }
}

pub(crate) fn rational_to_f64(r: &BigRational) -> f64 {
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => ToPrimitive::to_f64(r).unwrap_or(f64::NAN),
    }
}

fn invert_f64(n: usize, entries: &[f64]) -> Result<Vec<f64>, SingularMatrix> {
    let mut a = entries.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    let scale: f64 = (0..n)
        .map(|i| (0..n).map(|j| a[i * n + j].powi(2)).sum::<f64>().sqrt())
        .product();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs()))
            .unwrap_or(col);
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
                inv.swap(col * n + j, pivot * n + j);
            }
            det = -det;
        }
        let p = a[col * n + col];
        det *= p;
        if p == 0.0 {
            return Err(SingularMatrix { det_abs: 0.0 });
        }
        for j in 0..n {
            a[col * n + j] /= p;
            inv[col * n + j] /= p;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[row * n + col];
            if f != 0.0 {
                for j in 0..n {
                    a[row * n + j] -= f * a[col * n + j];
                    inv[row * n + j] -= f * inv[col * n + j];
                }
            }
        }
    }
    if !(det.abs() > SINGULAR_DET_RTOL * scale) {
        return Err(SingularMatrix { det_abs: det.abs() });
    }
    Ok(inv)
}

fn invert_exact(n: usize, entries: &[BigRational]) -> Result<Vec<BigRational>, SingularMatrix> {
    let mut a = entries.to_vec();
    let mut inv = vec![<BigRational as Zero>::zero(); n * n];
    for i in 0..n {
        inv[i * n + i] = <BigRational as One>::one();
    }
    for col in 0..n {
        let pivot = (col..n)
            .find(|&r| !Zero::is_zero(&a[r * n + col]))
            .ok_or(SingularMatrix { det_abs: 0.0 })?;
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
                inv.swap(col * n + j, pivot * n + j);
            }
        }
        let p = a[col * n + col].recip();
        for j in 0..n {
            a[col * n + j] = &a[col * n + j] * &p;
            inv[col * n + j] = &inv[col * n + j] * &p;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[row * n + col].clone();
            if !Zero::is_zero(&f) {
                for j in 0..n {
                    let da = &f * &a[col * n + j];
                    let di = &f * &inv[col * n + j];
                    a[row * n + j] -= da;
                    inv[row * n + j] -= di;
                }
            }
        }
    }
    Ok(inv)
}
