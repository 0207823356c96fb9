//! Dense component tensors on an `n`-dimensional chart.
//!
//! Components are stored with all contravariant slots first, then all
//! covariant slots, each index running over `0..n`, row-major. The same
//! [`Tensor`] type holds symbolic fields (`Tensor<Expr>`) and numeric values
//! at a point (`Tensor<f64>`, `Tensor<BigRational>`).

use num_rational::BigRational;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::expr::{EvalError, Expr, Tape};
use crate::scalar::{Coefficient, Scalar, SingularMatrix};

pub type TensorField = Tensor<Expr>;
pub type PointTensor<S> = Tensor<S>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TensorError {
    #[error("expected {expected} components, got {got}")]
    ComponentCount { expected: usize, got: usize },
    #[error("slot {slot} out of range for valence ({upper},{lower})")]
    SlotOutOfRange { slot: usize, upper: usize, lower: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("slots {0:?} mix contravariant and covariant positions")]
    MixedVariance(Vec<usize>),
    #[error("{kind:?} symmetry in slots {slots:?} does not hold")]
    SymmetryViolated { kind: SymmetryKind, slots: (usize, usize) },
    #[error("expected valence {expected:?}, got {got:?}")]
    Valence { expected: (usize, usize), got: (usize, usize) },
    #[error("operation needs dimension at least {min}, got {dim}")]
    DimensionTooSmall { min: usize, dim: usize },
    #[error(transparent)]
    Singular(#[from] SingularMatrix),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SymmetryKind {
    Symmetric,
    Skew,
}

/// Symmetry metadata for a pair of absolute slot positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Symmetry {
    pub kind: SymmetryKind,
    pub slots: (usize, usize),
}

impl Symmetry {
    pub fn symmetric(a: usize, b: usize) -> Self {
        Symmetry { kind: SymmetryKind::Symmetric, slots: (a, b) }
    }

    pub fn skew(a: usize, b: usize) -> Self {
        Symmetry { kind: SymmetryKind::Skew, slots: (a, b) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    dim: usize,
    upper: usize,
    lower: usize,
    data: Vec<T>,
    symmetries: Vec<Symmetry>,
}

/// Iterates all multi-indices of the given rank in storage order.
pub fn multi_indices(dim: usize, rank: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = dim.pow(rank as u32);
    (0..total).map(move |mut flat| {
        let mut idx = vec![0; rank];
        for slot in (0..rank).rev() {
            idx[slot] = flat % dim;
            flat /= dim;
        }
        idx
    })
}

impl<T> Tensor<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn valence(&self) -> (usize, usize) {
        (self.upper, self.lower)
    }

    pub fn rank(&self) -> usize {
        self.upper + self.lower
    }

    pub fn components(&self) -> &[T] {
        &self.data
    }

    pub fn into_components(self) -> Vec<T> {
        self.data
    }

    pub fn symmetries(&self) -> &[Symmetry] {
        &self.symmetries
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank());
        idx.iter().fold(0, |acc, &i| {
            debug_assert!(i < self.dim);
            acc * self.dim + i
        })
    }

    pub fn get(&self, idx: &[usize]) -> &T {
        &self.data[self.flat_index(idx)]
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Tensor<U> {
        Tensor {
            dim: self.dim,
            upper: self.upper,
            lower: self.lower,
            data: self.data.iter().map(f).collect(),
            symmetries: self.symmetries.clone(),
        }
    }

    pub fn expect_valence(&self, upper: usize, lower: usize) -> Result<(), TensorError> {
        if (self.upper, self.lower) == (upper, lower) {
            Ok(())
        } else {
            Err(TensorError::Valence { expected: (upper, lower), got: (self.upper, self.lower) })
        }
    }
}

impl<T: Coefficient> Tensor<T> {
    pub fn new(dim: usize, upper: usize, lower: usize, data: Vec<T>) -> Result<Self, TensorError> {
        let expected = dim.pow((upper + lower) as u32);
        if data.len() != expected {
            return Err(TensorError::ComponentCount { expected, got: data.len() });
        }
        Ok(Tensor { dim, upper, lower, data, symmetries: Vec::new() })
    }

    pub fn from_fn(dim: usize, upper: usize, lower: usize, mut f: impl FnMut(&[usize]) -> T) -> Self {
        let data = multi_indices(dim, upper + lower).map(|idx| f(&idx)).collect();
        Tensor { dim, upper, lower, data, symmetries: Vec::new() }
    }

    pub fn zeros(dim: usize, upper: usize, lower: usize) -> Self {
        Self::from_fn(dim, upper, lower, |_| T::zero())
    }

    pub fn scalar(dim: usize, value: T) -> Self {
        Tensor { dim, upper: 0, lower: 0, data: vec![value], symmetries: Vec::new() }
    }

    pub fn vector(values: Vec<T>) -> Self {
        let dim = values.len();
        Tensor { dim, upper: 1, lower: 0, data: values, symmetries: Vec::new() }
    }

    pub fn covector(values: Vec<T>) -> Self {
        let dim = values.len();
        Tensor { dim, upper: 0, lower: 1, data: values, symmetries: Vec::new() }
    }

    /// Row-major `n x n` matrix as a tensor of valence `(upper, lower)` with
    /// `upper + lower == 2`.
    pub fn matrix(dim: usize, upper: usize, rows: Vec<Vec<T>>) -> Result<Self, TensorError> {
        let data: Vec<T> = rows.into_iter().flatten().collect();
        Self::new(dim, upper, 2 - upper, data)
    }

    /// The identity `δ_a^b`, valence (1,1).
    pub fn kronecker_delta(dim: usize) -> Self {
        Self::from_fn(dim, 1, 1, |i| if i[0] == i[1] { T::one() } else { T::zero() })
    }

    pub fn scalar_value(&self) -> &T {
        debug_assert_eq!(self.rank(), 0);
        &self.data[0]
    }

    fn same_shape(&self, other: &Self) -> Result<(), TensorError> {
        if self.dim != other.dim {
            return Err(TensorError::DimensionMismatch(self.dim, other.dim));
        }
        if self.valence() != other.valence() {
            return Err(TensorError::Valence { expected: self.valence(), got: other.valence() });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, TensorError> {
        self.same_shape(other)?;
        Ok(self.zip(other, |a, b| a.add(b)))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, TensorError> {
        self.same_shape(other)?;
        Ok(self.zip(other, |a, b| a.sub(b)))
    }

    fn zip(&self, other: &Self, f: impl Fn(&T, &T) -> T) -> Self {
        Tensor {
            dim: self.dim,
            upper: self.upper,
            lower: self.lower,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(a, b)).collect(),
            symmetries: Vec::new(),
        }
    }

    pub fn scale(&self, factor: &T) -> Self {
        let mut out = self.map(|a| a.mul(factor));
        out.symmetries = self.symmetries.clone();
        out
    }

    pub fn neg(&self) -> Self {
        self.map(|a| a.neg())
    }

    /// Checks `kind` symmetry between two absolute slots.
    pub fn has_symmetry(&self, sym: Symmetry) -> bool {
        let (s, t) = sym.slots;
        if s >= self.rank() || t >= self.rank() || (s < self.upper) != (t < self.upper) {
            return false;
        }
        multi_indices(self.dim, self.rank()).all(|idx| {
            if idx[s] >= idx[t] {
                return true;
            }
            let mut swapped = idx.clone();
            swapped.swap(s, t);
            let a = self.get(&idx);
            let b = self.get(&swapped);
            match sym.kind {
                SymmetryKind::Symmetric => a.approx_eq(b),
                SymmetryKind::Skew => a.approx_eq(&b.neg()),
            }
        }) && (sym.kind == SymmetryKind::Symmetric
            || multi_indices(self.dim, self.rank()).filter(|i| i[s] == i[t]).all(|i| self.get(&i).approx_eq(&T::zero())))
    }

    /// Attaches validated symmetry metadata.
    pub fn with_symmetry(mut self, sym: Symmetry) -> Result<Self, TensorError> {
        self.require_symmetry(sym)?;
        if !self.symmetries.contains(&sym) {
            self.symmetries.push(sym);
        }
        Ok(self)
    }

    pub fn require_symmetry(&self, sym: Symmetry) -> Result<(), TensorError> {
        if self.has_symmetry(sym) {
            Ok(())
        } else {
            Err(TensorError::SymmetryViolated { kind: sym.kind, slots: sym.slots })
        }
    }

    /// Contracts contravariant slot `upper_slot` with covariant slot `lower_slot`
    /// (both counted within their own group).
    pub fn contract(&self, upper_slot: usize, lower_slot: usize) -> Result<Self, TensorError> {
        if upper_slot >= self.upper {
            return Err(TensorError::SlotOutOfRange { slot: upper_slot, upper: self.upper, lower: self.lower });
        }
        if lower_slot >= self.lower {
            return Err(TensorError::SlotOutOfRange { slot: lower_slot, upper: self.upper, lower: self.lower });
        }
        let u_abs = upper_slot;
        let l_abs = self.upper + lower_slot;
        let out = Self::from_fn(self.dim, self.upper - 1, self.lower - 1, |idx| {
            let mut full = Vec::with_capacity(self.rank());
            full.extend_from_slice(idx);
            // reinsert the summed pair at their absolute positions
            full.insert(u_abs, 0);
            full.insert(l_abs, 0);
            let terms: Vec<T> = (0..self.dim)
                .map(|k| {
                    full[u_abs] = k;
                    full[l_abs] = k;
                    self.get(&full).clone()
                })
                .collect();
            T::sum_of(&terms)
        });
        Ok(out)
    }

    /// Outer product; contravariant slots of `self` precede those of `other`,
    /// likewise for covariant slots.
    pub fn tensor_product(&self, other: &Self) -> Result<Self, TensorError> {
        if self.dim != other.dim {
            return Err(TensorError::DimensionMismatch(self.dim, other.dim));
        }
        let (p1, q1) = self.valence();
        let (p2, _) = other.valence();
        Ok(Self::from_fn(self.dim, p1 + p2, self.lower + other.lower, |idx| {
            let mut a = Vec::with_capacity(self.rank());
            a.extend_from_slice(&idx[..p1]);
            a.extend_from_slice(&idx[p1 + p2..p1 + p2 + q1]);
            let mut b = Vec::with_capacity(other.rank());
            b.extend_from_slice(&idx[p1..p1 + p2]);
            b.extend_from_slice(&idx[p1 + p2 + q1..]);
            self.get(&a).mul(other.get(&b))
        }))
    }

    /// Reorders slots: output slot `k` reads input slot `perm[k]`. Both
    /// groups must be permuted within themselves.
    pub fn permute_slots(&self, perm: &[usize]) -> Result<Self, TensorError> {
        let r = self.rank();
        let mut seen = vec![false; r];
        for (k, &p) in perm.iter().enumerate() {
            if p >= r || seen[p] || (k < self.upper) != (p < self.upper) || perm.len() != r {
                return Err(TensorError::MixedVariance(perm.to_vec()));
            }
            seen[p] = true;
        }
        Ok(Self::from_fn(self.dim, self.upper, self.lower, |idx| {
            let mut src = vec![0; r];
            for (k, &p) in perm.iter().enumerate() {
                src[p] = idx[k];
            }
            self.get(&src).clone()
        }))
    }

    fn check_same_variance(&self, slots: &[usize]) -> Result<(), TensorError> {
        let r = self.rank();
        if slots.iter().any(|&s| s >= r) {
            let slot = *slots.iter().find(|&&s| s >= r).unwrap();
            return Err(TensorError::SlotOutOfRange { slot, upper: self.upper, lower: self.lower });
        }
        let first_upper = slots.first().is_some_and(|&s| s < self.upper);
        if slots.iter().any(|&s| (s < self.upper) != first_upper) {
            return Err(TensorError::MixedVariance(slots.to_vec()));
        }
        Ok(())
    }

    fn average_over_permutations(&self, slots: &[usize], signed: bool) -> Result<Self, TensorError> {
        self.check_same_variance(slots)?;
        let perms = permutations(slots.len());
        let count = perms.len() as i64;
        let mut out = Self::from_fn(self.dim, self.upper, self.lower, |idx| {
            let terms: Vec<T> = perms
                .iter()
                .map(|(perm, parity)| {
                    let mut src = idx.to_vec();
                    for (k, &p) in perm.iter().enumerate() {
                        src[slots[k]] = idx[slots[p]];
                    }
                    let v = self.get(&src).clone();
                    if signed && *parity {
                        v.neg()
                    } else {
                        v
                    }
                })
                .collect();
            T::sum_of(&terms).scale(1, count)
        });
        if slots.len() == 2 {
            let kind = if signed { SymmetryKind::Skew } else { SymmetryKind::Symmetric };
            out.symmetries.push(Symmetry { kind, slots: (slots[0], slots[1]) });
        }
        Ok(out)
    }

    /// Projects onto the part symmetric in the given absolute slots.
    pub fn symmetrize(&self, slots: &[usize]) -> Result<Self, TensorError> {
        self.average_over_permutations(slots, false)
    }

    /// Projects onto the part skew in the given absolute slots.
    pub fn antisymmetrize(&self, slots: &[usize]) -> Result<Self, TensorError> {
        self.average_over_permutations(slots, true)
    }

    /// Lowers contravariant slot `upper_slot` with `metric` (valence (0,2)).
    /// The new covariant slot is appended after the existing ones.
    pub fn lower_index(&self, upper_slot: usize, metric: &Self) -> Result<Self, TensorError> {
        metric.expect_valence(0, 2)?;
        if upper_slot >= self.upper {
            return Err(TensorError::SlotOutOfRange { slot: upper_slot, upper: self.upper, lower: self.lower });
        }
        // T^{..a..}_{..} g_{ab}: product puts g's lowers last, contract a with g's first
        let prod = self.tensor_product(metric)?;
        prod.contract(upper_slot, self.lower)
    }

    /// Raises covariant slot `lower_slot` with the inverse of `metric`. The new
    /// contravariant slot is appended after the existing ones.
    pub fn raise_index(&self, lower_slot: usize, metric: &Self) -> Result<Self, TensorError> {
        metric.expect_valence(0, 2)?;
        let inverse = inverse_metric(metric)?;
        self.raise_with_inverse(lower_slot, &inverse)
    }

    /// Raises covariant slot `lower_slot` with a precomputed inverse metric.
    pub fn raise_with_inverse(&self, lower_slot: usize, inverse: &Self) -> Result<Self, TensorError> {
        inverse.expect_valence(2, 0)?;
        if lower_slot >= self.lower {
            return Err(TensorError::SlotOutOfRange { slot: lower_slot, upper: self.upper, lower: self.lower });
        }
        let prod = self.tensor_product(inverse)?;
        // contract g^{ab}'s first slot with the chosen lower slot
        prod.contract(self.upper, lower_slot)
    }

    /// Trace-free part of `U_a^{bc}` (valence (2,1), stored `[b][c][a]`) with
    /// `(b,c)` symmetric: `U - k (δ_a^b U_d^{dc} + δ_a^c U_d^{bd})`, `k = 1/(n+1)`.
    pub fn trace_free_sym(&self) -> Result<Self, TensorError> {
        self.expect_valence(2, 1)?;
        self.require_symmetry(Symmetry::symmetric(0, 1))?;
        Ok(self.remove_pair_traces(1, self.dim as i64 + 1))
    }

    /// Trace-free part of `U_a^{bc}` with `(b,c)` skew, `k = 1/(n-1)`.
    pub fn trace_free_skew(&self) -> Result<Self, TensorError> {
        self.expect_valence(2, 1)?;
        if self.dim < 2 {
            return Err(TensorError::DimensionTooSmall { min: 2, dim: self.dim });
        }
        self.require_symmetry(Symmetry::skew(0, 1))?;
        Ok(self.remove_pair_traces(1, self.dim as i64 - 1))
    }

    fn remove_pair_traces(&self, k_num: i64, k_den: i64) -> Self {
        let n = self.dim;
        let trace_first: Vec<T> = (0..n)
            .map(|c| T::sum_of(&(0..n).map(|d| self.get(&[d, c, d]).clone()).collect::<Vec<_>>()))
            .collect();
        let trace_second: Vec<T> = (0..n)
            .map(|b| T::sum_of(&(0..n).map(|d| self.get(&[b, d, d]).clone()).collect::<Vec<_>>()))
            .collect();
        let mut out = Self::from_fn(n, 2, 1, |i| {
            let (b, c, a) = (i[0], i[1], i[2]);
            let mut corr = T::zero();
            if a == b {
                corr = corr.add(&trace_first[c]);
            }
            if a == c {
                corr = corr.add(&trace_second[b]);
            }
            self.get(i).sub(&corr.scale(k_num, k_den))
        });
        out.symmetries = self.symmetries.clone();
        out
    }

    /// All single traces of a valence (2,1) tensor: over (a,b) and over (a,c).
    pub fn pair_traces(&self) -> Result<(Self, Self), TensorError> {
        self.expect_valence(2, 1)?;
        Ok((self.contract(0, 0)?, self.contract(1, 0)?))
    }
}

/// Coefficient `k` of the trace ansatz `k(δ_a^b U_d^{dc} + δ_a^c U_d^{bd})`,
/// obtained by solving the linear condition that the ansatz reproduce the
/// (a,b) trace of a tensor with the given `(b,c)` symmetry.
pub fn trace_coefficient(dim: usize, kind: SymmetryKind) -> Result<BigRational, TensorError> {
    // a fixed generic tensor; the solve does not depend on it
    let raw: Tensor<BigRational> =
        Tensor::from_fn(dim, 2, 1, |i| BigRational::from_integer((1 + i[0] + 3 * i[1] * i[1] + 5 * i[2] + i[0] * i[2]).into()));
    let u = match kind {
        SymmetryKind::Symmetric => raw.symmetrize(&[0, 1])?,
        SymmetryKind::Skew => raw.antisymmetrize(&[0, 1])?,
    };
    let delta = Tensor::<BigRational>::kronecker_delta(dim);
    let tr_first = u.contract(0, 0)?; // U_d^{dc}
    let tr_second = u.contract(1, 0)?; // U_d^{bd}
    // δ_a^b V^c with storage [b][c][a]
    let term1 = delta.tensor_product(&tr_first)?.permute_slots(&[0, 1, 2])?;
    let term2 = tr_second.tensor_product(&delta)?;
    let ansatz = term1.add(&term2)?;
    let lhs = ansatz.contract(0, 0)?; // coefficient of k
    let rhs = u.contract(0, 0)?;
    for c in 0..dim {
        let a = lhs.get(&[c]);
        if !Coefficient::is_zero(a) {
            return Ok(rhs.get(&[c]) / a);
        }
    }
    Err(TensorError::DimensionTooSmall { min: 2, dim })
}

/// Inverse metric `g^{ab}` of a valence (0,2) metric.
pub fn inverse_metric<T: Coefficient>(metric: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    metric.expect_valence(0, 2)?;
    let inv = T::invert_matrix(metric.dim(), metric.components())?;
    Tensor::new(metric.dim(), 2, 0, inv)
}

// Heap's algorithm; returns each permutation with its parity (true = odd).
fn permutations(k: usize) -> Vec<(Vec<usize>, bool)> {
    let mut out = Vec::new();
    let mut a: Vec<usize> = (0..k).collect();
    let mut c = vec![0; k];
    let mut odd = false;
    out.push((a.clone(), odd));
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            odd = !odd;
            out.push((a.clone(), odd));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

impl Tensor<Expr> {
    /// Evaluates every component at `point`.
    pub fn eval<S: Scalar>(&self, point: &[S]) -> Result<Tensor<S>, EvalError> {
        let tape = Tape::compile(&self.data);
        let vals = tape.eval(point)?;
        Ok(Tensor { dim: self.dim, upper: self.upper, lower: self.lower, data: vals, symmetries: self.symmetries.clone() })
    }

    /// Highest coordinate index referenced by any component.
    pub fn max_var(&self) -> Option<usize> {
        self.data.iter().filter_map(Expr::max_var).max()
    }

    /// Components evaluate identically to zero in the structural sense.
    pub fn is_structurally_zero(&self) -> bool {
        self.data.iter().all(Expr::is_const_zero)
    }
}

impl<S: Scalar> Tensor<S> {
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(Scalar::abs_f64).fold(0.0, f64::max)
    }

    pub fn to_f64(&self) -> Tensor<f64> {
        self.map(Scalar::to_f64)
    }

    pub fn from_parts_unchecked(dim: usize, upper: usize, lower: usize, data: Vec<S>) -> Self {
        Tensor { dim, upper, lower, data, symmetries: Vec::new() }
    }
}

/// JSON form `{"valence":[p,q],"dim":n,"components":[...]}`. Exact values
/// are written as `"p/q"` strings, floats as numbers.
impl<S: Scalar> Serialize for Tensor<S> {
    fn serialize<Z: Serializer>(&self, serializer: Z) -> Result<Z::Ok, Z::Error> {
        let mut st = serializer.serialize_struct("PointTensor", 3)?;
        st.serialize_field("valence", &[self.upper, self.lower])?;
        st.serialize_field("dim", &self.dim)?;
        if S::EXACT {
            let comps: Vec<String> = self.data.iter().map(Scalar::exact_string).collect();
            st.serialize_field("components", &comps)?;
        } else {
            let comps: Vec<f64> = self.data.iter().map(Scalar::to_f64).collect();
            st.serialize_field("components", &comps)?;
        }
        st.end()
    }
}

#[derive(Deserialize)]
struct PointTensorJson {
    valence: [usize; 2],
    dim: usize,
    components: Vec<f64>,
}

impl<'de> Deserialize<'de> for Tensor<f64> {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = PointTensorJson::deserialize(deserializer)?;
        Tensor::new(raw.dim, raw.valence[0], raw.valence[1], raw.components).map_err(serde::de::Error::custom)
    }
}
