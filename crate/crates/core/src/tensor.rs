//! Dense complex matrices, state vectors over labelled tensor factors, and
//! matrix-free local operations.
//!
//! Factor 0 is the leftmost tensor factor and composite basis indices are
//! big-endian in factor order, so `|q0 q1⟩` has index `q0 * d1 + q1`.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use nalgebra as na;
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

/// Default tolerance for Hermiticity and unitarity checks.
pub const HERMITIAN_TOL: f64 = 1e-10;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("duplicate target factor {0}")]
    DuplicateTarget(usize),
    #[error("factor {0} is out of range")]
    FactorOutOfRange(usize),
    #[error("matrix is not Hermitian (max |M - M†| = {0:.3e})")]
    NotHermitian(f64),
    #[error("control factor {0} must be a qubit outside the target list")]
    BadControl(usize),
    #[error("dimensions must be positive")]
    EmptyDimension,
}

pub type Result<T> = std::result::Result<T, TensorError>;

/// Dense row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(TensorError::EmptyDimension);
        }
        if data.len() != rows * cols {
            return Err(TensorError::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    /// Builds a square matrix from rows of complex entries.
    ///
    /// Panics if the rows are ragged; intended for literal constants.
    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let n = rows.len();
        let m = rows[0].len();
        let mut data = Vec::with_capacity(n * m);
        for r in rows {
            assert_eq!(r.len(), m, "ragged matrix literal");
            data.extend_from_slice(r);
        }
        ComplexMatrix { rows: n, cols: m, data }
    }

    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        Self::from_vec(rows, cols, entries.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn diag(entries: &[C64]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, &e) in entries.iter().enumerate() {
            m.data[i * n + i] = e;
        }
        m
    }

    pub fn diag_real(entries: &[f64]) -> Self {
        let v: Vec<C64> = entries.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::diag(&v)
    }

    /// `|u⟩⟨v|`
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        let mut m = Self::zeros(u.len(), v.len());
        for (i, a) in u.iter().enumerate() {
            for (j, b) in v.iter().enumerate() {
                m.data[i * v.len() + j] = a * b.conj();
            }
        }
        m
    }

    pub fn projector(v: &[C64]) -> Self {
        Self::outer(v, v)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> usize {
        debug_assert!(self.is_square());
        self.rows
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn dagger(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m.data[j * self.rows + i] = self.data[i * self.cols + j].conj();
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        m
    }

    pub fn conj(&self) -> Self {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Result<Self> {
        if self.cols != other.rows {
            return Err(TensorError::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if self.cols != v.len() {
            return Err(TensorError::DimensionMismatch {
                expected: self.cols,
                found: v.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }

    /// `⟨v|M|v⟩`
    pub fn expectation(&self, v: &[C64]) -> Result<C64> {
        let mv = self.mul_vec(v)?;
        Ok(v.iter().zip(&mv).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols))
            .map(|i| self.data[i * self.cols + i])
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest entry of `|M - M†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                let d = (self.data[i * n + j] - self.data[j * n + i].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.is_square()
            && self
                .dagger()
                .matmul(self)
                .map(|p| p.max_abs_diff(&Self::identity(self.rows)) <= tol)
                .unwrap_or(false)
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.data.iter().all(|z| z.im.abs() <= tol)
    }

    pub fn anticommutator(&self, other: &ComplexMatrix) -> Result<Self> {
        Ok(&self.matmul(other)? + &other.matmul(self)?)
    }

    pub(crate) fn to_na(&self) -> na::DMatrix<C64> {
        na::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_na(m: &na::DMatrix<C64>) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.data[i * m.ncols() + j] = m[(i, j)];
            }
        }
        out
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Add for ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: ComplexMatrix) -> ComplexMatrix {
        &self + &rhs
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Sub for ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: ComplexMatrix) -> ComplexMatrix {
        &self - &rhs
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale_real(-1.0)
    }
}

/// Matrix product; panics on a dimension mismatch; use [`ComplexMatrix::matmul`]
/// to get an error instead.
impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("matrix product dimension mismatch")
    }
}

impl Mul for ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: ComplexMatrix) -> ComplexMatrix {
        &self * &rhs
    }
}

impl Mul<f64> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: f64) -> ComplexMatrix {
        self.scale_real(rhs)
    }
}

impl fmt::Display for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols)
                .map(|j| {
                    let z = self[(i, j)];
                    format!("{:+.4}{:+.4}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Kronecker product; entry `(i1 i2, j1 j2) = a(i1, j1) b(i2, j2)`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut out = ComplexMatrix::zeros(rows, cols);
    for i1 in 0..a.rows {
        for j1 in 0..a.cols {
            let x = a.data[i1 * a.cols + j1];
            if x == ZERO {
                continue;
            }
            for i2 in 0..b.rows {
                let r = i1 * b.rows + i2;
                for j2 in 0..b.cols {
                    out.data[r * cols + j1 * b.cols + j2] = x * b.data[i2 * b.cols + j2];
                }
            }
        }
    }
    out
}

pub fn kron_all(factors: &[&ComplexMatrix]) -> ComplexMatrix {
    let mut acc = ComplexMatrix::identity(1);
    for f in factors {
        acc = kron(&acc, f);
    }
    acc
}

/// Vector Kronecker product.
pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x * y);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Factor {
    pub label: String,
    pub dim: usize,
}

impl Factor {
    pub fn new(label: impl Into<String>, dim: usize) -> Self {
        Factor {
            label: label.into(),
            dim,
        }
    }

    pub fn qubit(label: impl Into<String>) -> Self {
        Self::new(label, 2)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsystemIndex {
    pub label: String,
    pub position: usize,
}

/// Pure state on a product of labelled factors.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<C64>,
    factors: Vec<Factor>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<C64>, factors: Vec<Factor>) -> Result<Self> {
        if factors.iter().any(|f| f.dim == 0) {
            return Err(TensorError::EmptyDimension);
        }
        let dim: usize = factors.iter().map(|f| f.dim).product();
        if dim != amplitudes.len() {
            return Err(TensorError::DimensionMismatch {
                expected: dim,
                found: amplitudes.len(),
            });
        }
        Ok(StateVector { amplitudes, factors })
    }

    pub fn from_real(amplitudes: &[f64], factors: Vec<Factor>) -> Result<Self> {
        Self::new(amplitudes.iter().map(|&x| C64::new(x, 0.0)).collect(), factors)
    }

    pub fn basis(factors: Vec<Factor>, index: usize) -> Result<Self> {
        let dim: usize = factors.iter().map(|f| f.dim).product();
        if index >= dim {
            return Err(TensorError::DimensionMismatch {
                expected: dim,
                found: index,
            });
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Self::new(amps, factors)
    }

    pub fn zeros(factors: Vec<Factor>) -> Self {
        let dim: usize = factors.iter().map(|f| f.dim).product();
        StateVector {
            amplitudes: vec![ZERO; dim],
            factors,
        }
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor_dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.dim).collect()
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn subsystem(&self, label: &str) -> Option<SubsystemIndex> {
        self.factors
            .iter()
            .position(|f| f.label == label)
            .map(|position| SubsystemIndex {
                label: label.to_string(),
                position,
            })
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.amplitudes.iter().all(|z| z.im.abs() <= tol)
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &StateVector) -> C64 {
        assert_eq!(self.dim(), other.dim());
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn distance(&self, other: &StateVector) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&self, s: C64) -> StateVector {
        StateVector {
            amplitudes: self.amplitudes.iter().map(|z| z * s).collect(),
            factors: self.factors.clone(),
        }
    }

    pub fn add_scaled(&mut self, other: &StateVector, s: C64) {
        assert_eq!(self.dim(), other.dim());
        for (a, b) in self.amplitudes.iter_mut().zip(&other.amplitudes) {
            *a += s * b;
        }
    }

    /// `self ⊗ other`, factors concatenated.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        StateVector {
            amplitudes: kron_vec(&self.amplitudes, &other.amplitudes),
            factors,
        }
    }

    pub fn density(&self) -> ComplexMatrix {
        ComplexMatrix::projector(&self.amplitudes)
    }

    /// Reorders factors: factor `order[k]` of `self` becomes factor `k`.
    pub fn permute(&self, order: &[usize]) -> Result<StateVector> {
        check_targets(order, self.factors.len())?;
        if order.len() != self.factors.len() {
            return Err(TensorError::DimensionMismatch {
                expected: self.factors.len(),
                found: order.len(),
            });
        }
        let layout = Layout::new(&self.factor_dims());
        let new_factors: Vec<Factor> = order.iter().map(|&k| self.factors[k].clone()).collect();
        let src = layout.offsets(order);
        let amplitudes = src.iter().map(|&o| self.amplitudes[o]).collect();
        Ok(StateVector {
            amplitudes,
            factors: new_factors,
        })
    }

    /// Reduced density matrix on `keep`, in the listed order.
    pub fn reduced(&self, keep: &[usize]) -> Result<ComplexMatrix> {
        check_targets(keep, self.factors.len())?;
        let layout = Layout::new(&self.factor_dims());
        let kept = layout.offsets(keep);
        let rest = layout.offsets(&complement(keep, self.factors.len()));
        let dk = kept.len();
        let mut out = ComplexMatrix::zeros(dk, dk);
        for &t in &rest {
            for (i, &ki) in kept.iter().enumerate() {
                let a = self.amplitudes[ki + t];
                if a == ZERO {
                    continue;
                }
                for (j, &kj) in kept.iter().enumerate() {
                    out.data[i * dk + j] += a * self.amplitudes[kj + t].conj();
                }
            }
        }
        Ok(out)
    }
}

/// Strides and digit enumeration for a big-endian mixed-radix index.
#[derive(Clone, Debug)]
pub(crate) struct Layout {
    dims: Vec<usize>,
    strides: Vec<usize>,
}

impl Layout {
    pub(crate) fn new(dims: &[usize]) -> Self {
        let mut strides = vec![1; dims.len()];
        for k in (0..dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        Layout {
            dims: dims.to_vec(),
            strides,
        }
    }

    /// Offsets of every joint value of `factors`, big-endian in the listed order.
    pub(crate) fn offsets(&self, factors: &[usize]) -> Vec<usize> {
        let mut out = vec![0usize];
        for &f in factors {
            let mut next = Vec::with_capacity(out.len() * self.dims[f]);
            for &o in &out {
                for d in 0..self.dims[f] {
                    next.push(o + d * self.strides[f]);
                }
            }
            out = next;
        }
        out
    }
}

fn complement(factors: &[usize], n: usize) -> Vec<usize> {
    (0..n).filter(|k| !factors.contains(k)).collect()
}

fn check_targets(targets: &[usize], n: usize) -> Result<()> {
    for (i, &t) in targets.iter().enumerate() {
        if t >= n {
            return Err(TensorError::FactorOutOfRange(t));
        }
        if targets[..i].contains(&t) {
            return Err(TensorError::DuplicateTarget(t));
        }
    }
    Ok(())
}

fn check_op(op: &ComplexMatrix, dims: &[usize], targets: &[usize]) -> Result<()> {
    check_targets(targets, dims.len())?;
    if !op.is_square() {
        return Err(TensorError::NotSquare {
            rows: op.rows,
            cols: op.cols,
        });
    }
    let d: usize = targets.iter().map(|&t| dims[t]).product();
    if op.rows != d {
        return Err(TensorError::DimensionMismatch {
            expected: d,
            found: op.rows,
        });
    }
    Ok(())
}

fn apply_blocks(op: &ComplexMatrix, amps: &mut [C64], bases: &[usize], offs: &[usize]) {
    let k = offs.len();
    let mut x = vec![ZERO; k];
    for &b in bases {
        for (j, &o) in offs.iter().enumerate() {
            x[j] = amps[b + o];
        }
        for (i, &o) in offs.iter().enumerate() {
            let row = &op.data[i * k..(i + 1) * k];
            amps[b + o] = row.iter().zip(&x).map(|(a, b)| a * b).sum();
        }
    }
}

/// Applies `op` to the listed factors in place, leaving the rest untouched.
pub fn apply_local_in_place(op: &ComplexMatrix, targets: &[usize], v: &mut StateVector) -> Result<()> {
    let dims = v.factor_dims();
    check_op(op, &dims, targets)?;
    let layout = Layout::new(&dims);
    let offs = layout.offsets(targets);
    let bases = layout.offsets(&complement(targets, dims.len()));
    apply_blocks(op, &mut v.amplitudes, &bases, &offs);
    Ok(())
}

/// `(I ⊗ op ⊗ I) |v⟩` without building the padded operator.
pub fn apply_local(op: &ComplexMatrix, targets: &[usize], v: &StateVector) -> Result<StateVector> {
    let mut out = v.clone();
    apply_local_in_place(op, targets, &mut out)?;
    Ok(out)
}

/// Applies `op` to `targets` on the branch where qubit factor `control` is `|1⟩`.
pub fn apply_controlled_in_place(
    op: &ComplexMatrix,
    control: usize,
    targets: &[usize],
    v: &mut StateVector,
) -> Result<()> {
    let dims = v.factor_dims();
    check_op(op, &dims, targets)?;
    if control >= dims.len() || dims[control] != 2 || targets.contains(&control) {
        return Err(TensorError::BadControl(control));
    }
    let layout = Layout::new(&dims);
    let offs = layout.offsets(targets);
    let mut fixed: Vec<usize> = targets.to_vec();
    fixed.push(control);
    let bases: Vec<usize> = layout
        .offsets(&complement(&fixed, dims.len()))
        .into_iter()
        .map(|b| b + layout.strides[control])
        .collect();
    apply_blocks(op, &mut v.amplitudes, &bases, &offs);
    Ok(())
}

/// Traces out every factor not in `keep`; the result follows the order of `keep`.
pub fn partial_trace(m: &ComplexMatrix, keep: &[usize], factor_dims: &[usize]) -> Result<ComplexMatrix> {
    if !m.is_square() {
        return Err(TensorError::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    let dim: usize = factor_dims.iter().product();
    if dim != m.rows {
        return Err(TensorError::DimensionMismatch {
            expected: dim,
            found: m.rows,
        });
    }
    check_targets(keep, factor_dims.len())?;
    let layout = Layout::new(factor_dims);
    let kept = layout.offsets(keep);
    let rest = layout.offsets(&complement(keep, factor_dims.len()));
    let dk = kept.len();
    let mut out = ComplexMatrix::zeros(dk, dk);
    for (i, &ki) in kept.iter().enumerate() {
        for (j, &kj) in kept.iter().enumerate() {
            out.data[i * dk + j] = rest.iter().map(|&t| m.data[(ki + t) * dim + kj + t]).sum();
        }
    }
    Ok(out)
}

/// Transposes the listed factors of an operator on a product space.
pub fn partial_transpose(m: &ComplexMatrix, targets: &[usize], factor_dims: &[usize]) -> Result<ComplexMatrix> {
    let dim: usize = factor_dims.iter().product();
    if !m.is_square() || m.rows != dim {
        return Err(TensorError::DimensionMismatch {
            expected: dim,
            found: m.rows,
        });
    }
    check_targets(targets, factor_dims.len())?;
    let layout = Layout::new(factor_dims);
    let t_offs = layout.offsets(targets);
    let rest = layout.offsets(&complement(targets, factor_dims.len()));
    let mut out = ComplexMatrix::zeros(dim, dim);
    for &r1 in &rest {
        for &r2 in &rest {
            for &a in &t_offs {
                for &b in &t_offs {
                    // ⟨r1 a| M^T |r2 b⟩ = ⟨r1 b| M |r2 a⟩ on the transposed part
                    out.data[(r1 + a) * dim + r2 + b] = m.data[(r1 + b) * dim + r2 + a];
                }
            }
        }
    }
    Ok(out)
}

/// Hermitian eigendecomposition with eigenvalues in ascending order.
///
/// Eigenvectors are the columns of the returned matrix.
pub fn eigh(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    if !m.is_square() {
        return Err(TensorError::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    let defect = m.hermiticity_defect();
    if defect > HERMITIAN_TOL {
        return Err(TensorError::NotHermitian(defect));
    }
    let eig = na::SymmetricEigen::new(m.to_na());
    let n = m.rows;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vecs = ComplexMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        for row in 0..n {
            vecs.data[row * n + col] = eig.eigenvectors[(row, k)];
        }
    }
    Ok((values, vecs))
}

/// `V f(Λ) V†` for a Hermitian `m = V Λ V†`.
pub fn hermitian_function(m: &ComplexMatrix, f: impl Fn(f64) -> f64) -> Result<ComplexMatrix> {
    let (vals, vecs) = eigh(m)?;
    let n = m.rows;
    let mut out = ComplexMatrix::zeros(n, n);
    for (k, &lam) in vals.iter().enumerate() {
        let s = f(lam);
        if s == 0.0 {
            continue;
        }
        for i in 0..n {
            let vi = vecs.data[i * n + k] * s;
            for j in 0..n {
                out.data[i * n + j] += vi * vecs.data[j * n + k].conj();
            }
        }
    }
    Ok(out)
}

/// Replaces each eigenvalue by its sign, with zero mapped to +1.
///
/// Eigenvalues within `1e-12 · max(1, ‖m‖_max)` of zero count as zero, so
/// rounding noise on an exact kernel cannot flip the sign.
pub fn regularize(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let zero_tol = 1e-12 * m.max_abs().max(1.0);
    hermitian_function(m, |lam| if lam < -zero_tol { -1.0 } else { 1.0 })
}
