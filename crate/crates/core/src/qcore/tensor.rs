//! Plane-major matrices over the reals or the quaternions.
//!
//! A quaternion matrix is stored as four real matrices of the same shape
//! (the `r`, `i`, `j`, `k` planes) laid out back to back in one buffer. A
//! real matrix is the one-plane special case, which lets the real baselines
//! share every kernel with the quaternion layers.
//!
//! The matrix product is driven by a table of `(out, lhs, rhs, sign)` terms:
//! the Hamilton product has sixteen of them, real multiplication one. Each
//! term is a plain real GEMM between two planes.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::qcore::Quaternion;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algebra {
    Real,
    Quaternion,
}

/// One bilinear term of a product: `out[out] += sign * lhs[lhs] * rhs[rhs]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductTerm {
    pub out: usize,
    pub lhs: usize,
    pub rhs: usize,
    pub sign: f64,
}

const fn term(out: usize, lhs: usize, rhs: usize, sign: f64) -> ProductTerm {
    ProductTerm { out, lhs, rhs, sign }
}

const REAL_TERMS: [ProductTerm; 1] = [term(0, 0, 0, 1.0)];

// Hamilton product, grouped by output component.
const HAMILTON_TERMS: [ProductTerm; 16] = [
    term(0, 0, 0, 1.0),
    term(0, 1, 1, -1.0),
    term(0, 2, 2, -1.0),
    term(0, 3, 3, -1.0),
    term(1, 0, 1, 1.0),
    term(1, 1, 0, 1.0),
    term(1, 2, 3, 1.0),
    term(1, 3, 2, -1.0),
    term(2, 0, 2, 1.0),
    term(2, 1, 3, -1.0),
    term(2, 2, 0, 1.0),
    term(2, 3, 1, 1.0),
    term(3, 0, 3, 1.0),
    term(3, 1, 2, 1.0),
    term(3, 2, 1, -1.0),
    term(3, 3, 0, 1.0),
];

impl Algebra {
    /// Number of real components per element.
    #[inline]
    pub const fn dim(self) -> usize {
        match self {
            Algebra::Real => 1,
            Algebra::Quaternion => 4,
        }
    }

    pub fn product_terms(self) -> &'static [ProductTerm] {
        match self {
            Algebra::Real => &REAL_TERMS,
            Algebra::Quaternion => &HAMILTON_TERMS,
        }
    }

    /// Sign applied to plane `p` by conjugation.
    #[inline]
    pub fn conj_sign(self, p: usize) -> f64 {
        if p == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            Algebra::Real => "real",
            Algebra::Quaternion => "quaternion",
        }
    }
}

impl fmt::Display for Algebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, PartialEq)]
pub struct Tensor {
    algebra: Algebra,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("algebra", &self.algebra)
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("data", &self.data)
            .finish()
    }
}

impl Tensor {
    pub fn zeros(algebra: Algebra, rows: usize, cols: usize) -> Self {
        Self {
            algebra,
            rows,
            cols,
            data: vec![0.0; algebra.dim() * rows * cols],
        }
    }

    /// Builds a tensor from plane-major data (`dim` planes of `rows × cols`, row-major).
    pub fn from_data(algebra: Algebra, rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != algebra.dim() * rows * cols {
            return Err(shape_err(format!(
                "{} tensor {rows}x{cols} needs {} values, got {}",
                algebra,
                algebra.dim() * rows * cols,
                data.len()
            )));
        }
        Ok(Self { algebra, rows, cols, data })
    }

    pub fn from_planes(algebra: Algebra, rows: usize, cols: usize, planes: &[Vec<f64>]) -> Result<Self> {
        if planes.len() != algebra.dim() {
            return Err(shape_err(format!(
                "{} tensor needs {} planes, got {}",
                algebra,
                algebra.dim(),
                planes.len()
            )));
        }
        if let Some(p) = planes.iter().find(|p| p.len() != rows * cols) {
            return Err(shape_err(format!(
                "plane has {} values, expected {}",
                p.len(),
                rows * cols
            )));
        }
        Ok(Self {
            algebra,
            rows,
            cols,
            data: planes.concat(),
        })
    }

    /// Quaternion tensor from row-major quaternion entries.
    pub fn from_quaternions(rows: usize, cols: usize, entries: &[Quaternion]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(shape_err(format!(
                "{rows}x{cols} needs {} quaternions, got {}",
                rows * cols,
                entries.len()
            )));
        }
        let mut t = Self::zeros(Algebra::Quaternion, rows, cols);
        for (idx, q) in entries.iter().enumerate() {
            t.set_quat(idx / cols, idx % cols, *q);
        }
        Ok(t)
    }

    /// Real tensor from row-major values.
    pub fn real(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        Self::from_data(Algebra::Real, rows, cols, values)
    }

    /// Quaternion tensor whose diagonal holds the identity quaternion.
    pub fn identity(algebra: Algebra, n: usize) -> Self {
        let mut t = Self::zeros(algebra, n, n);
        for i in 0..n {
            t.plane_mut(0)[i * n + i] = 1.0;
        }
        t
    }

    #[inline]
    pub fn algebra(&self) -> Algebra {
        self.algebra
    }
    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }
    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }
    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
    #[inline]
    pub fn plane_len(&self) -> usize {
        self.rows * self.cols
    }
    /// Number of real scalars held.
    #[inline]
    pub fn real_len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn plane(&self, p: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[p * n..(p + 1) * n]
    }
    #[inline]
    pub fn plane_mut(&mut self, p: usize) -> &mut [f64] {
        let n = self.plane_len();
        &mut self.data[p * n..(p + 1) * n]
    }

    #[inline]
    pub fn get(&self, plane: usize, row: usize, col: usize) -> f64 {
        self.data[plane * self.plane_len() + row * self.cols + col]
    }
    #[inline]
    pub fn set(&mut self, plane: usize, row: usize, col: usize, v: f64) {
        let n = self.plane_len();
        self.data[plane * n + row * self.cols + col] = v;
    }

    /// Entry `(row, col)` of a quaternion tensor. Panics on a real tensor.
    pub fn quat(&self, row: usize, col: usize) -> Quaternion {
        assert_eq!(self.algebra, Algebra::Quaternion, "quat() on a real tensor");
        Quaternion::from_parts(
            self.get(0, row, col),
            self.get(1, row, col),
            self.get(2, row, col),
            self.get(3, row, col),
        )
    }

    pub fn set_quat(&mut self, row: usize, col: usize, q: Quaternion) {
        assert_eq!(self.algebra, Algebra::Quaternion, "set_quat() on a real tensor");
        for (p, v) in q.to_array().into_iter().enumerate() {
            self.set(p, row, col, v);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn expect_algebra(&self, algebra: Algebra) -> Result<()> {
        if self.algebra == algebra {
            Ok(())
        } else {
            Err(Error::AlgebraMismatch {
                expected: algebra.name(),
                found: self.algebra.name(),
            })
        }
    }

    pub(crate) fn expect_same_shape(&self, other: &Tensor, what: &str) -> Result<()> {
        self.expect_algebra(other.algebra)?;
        if self.shape() != other.shape() {
            return Err(shape_err(format!(
                "{what}: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            algebra: self.algebra,
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Element-wise combination of two equal-shape tensors. Panics on shape mismatch.
    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
        assert_eq!(self.algebra, other.algebra);
        assert_eq!(self.shape(), other.shape());
        Tensor {
            algebra: self.algebra,
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn add(&self, other: &Tensor) -> Tensor {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Tensor {
        self.zip_map(other, |a, b| a - b)
    }

    /// Component-wise product (`×` in the LSTM cell).
    pub fn hadamard(&self, other: &Tensor) -> Tensor {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Tensor {
        self.map(|v| v * s)
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        assert_eq!(self.algebra, other.algebra);
        assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Adds a column vector (`rows × 1`) to every column.
    pub fn add_column(&self, bias: &Tensor) -> Result<Tensor> {
        self.expect_algebra(bias.algebra)?;
        if bias.rows != self.rows || bias.cols != 1 {
            return Err(shape_err(format!(
                "bias {}x{} does not broadcast over {}x{}",
                bias.rows, bias.cols, self.rows, self.cols
            )));
        }
        let mut out = self.clone();
        let cols = self.cols;
        for p in 0..self.algebra.dim() {
            let b = bias.plane(p).to_vec();
            for (r, row) in out.plane_mut(p).chunks_mut(cols).enumerate() {
                row.iter_mut().for_each(|v| *v += b[r]);
            }
        }
        Ok(out)
    }

    /// Sums across columns, giving a `rows × 1` tensor.
    pub fn sum_columns(&self) -> Tensor {
        let mut out = Tensor::zeros(self.algebra, self.rows, 1);
        let cols = self.cols;
        for p in 0..self.algebra.dim() {
            let sums: Vec<f64> = self.plane(p).chunks(cols).map(|row| row.iter().sum()).collect();
            out.plane_mut(p).copy_from_slice(&sums);
        }
        out
    }

    /// Transpose with every element conjugated (`Aᴴ`). Equals the plain transpose for reals.
    pub fn conj_transpose(&self) -> Tensor {
        let mut out = Tensor::zeros(self.algebra, self.cols, self.rows);
        let (rows, cols) = (self.rows, self.cols);
        for p in 0..self.algebra.dim() {
            let s = self.algebra.conj_sign(p);
            let src = self.plane(p);
            let dst = out.plane_mut(p);
            for r in 0..rows {
                for c in 0..cols {
                    dst[c * rows + r] = s * src[r * cols + c];
                }
            }
        }
        out
    }

    /// Real view: element `(n, b)` becomes rows `dim*n .. dim*n+dim` of column `b`.
    pub fn to_real(&self) -> Tensor {
        if self.algebra == Algebra::Real {
            return self.clone();
        }
        let d = self.algebra.dim();
        let mut out = Tensor::zeros(Algebra::Real, self.rows * d, self.cols);
        for p in 0..d {
            for r in 0..self.rows {
                for c in 0..self.cols {
                    out.data[(r * d + p) * self.cols + c] = self.get(p, r, c);
                }
            }
        }
        out
    }

    /// Inverse of [`Tensor::to_real`]: packs consecutive groups of `dim` rows.
    pub fn from_real(real: &Tensor, algebra: Algebra) -> Result<Tensor> {
        real.expect_algebra(Algebra::Real)?;
        let d = algebra.dim();
        if real.rows % d != 0 {
            return Err(shape_err(format!(
                "{} real rows cannot be packed into {algebra} elements",
                real.rows
            )));
        }
        if d == 1 {
            return Ok(real.clone());
        }
        let rows = real.rows / d;
        let mut out = Tensor::zeros(algebra, rows, real.cols);
        for r in 0..rows {
            for p in 0..d {
                for c in 0..real.cols {
                    out.set(p, r, c, real.data[(r * d + p) * real.cols + c]);
                }
            }
        }
        Ok(out)
    }

    /// Converts between algebras through the real view.
    pub fn convert(&self, algebra: Algebra) -> Result<Tensor> {
        if self.algebra == algebra {
            Ok(self.clone())
        } else {
            Tensor::from_real(&self.to_real(), algebra)
        }
    }

    /// Stacks tensors vertically.
    pub fn concat_rows(parts: &[&Tensor]) -> Result<Tensor> {
        let first = parts.first().ok_or_else(|| shape_err("concat of zero tensors"))?;
        let (algebra, cols) = (first.algebra, first.cols);
        for p in parts {
            p.expect_algebra(algebra)?;
            if p.cols != cols {
                return Err(shape_err("concat_rows with differing column counts"));
            }
        }
        let rows: usize = parts.iter().map(|p| p.rows).sum();
        let mut out = Tensor::zeros(algebra, rows, cols);
        for plane in 0..algebra.dim() {
            let mut offset = 0;
            for p in parts {
                let src = p.plane(plane);
                out.plane_mut(plane)[offset..offset + src.len()].copy_from_slice(src);
                offset += src.len();
            }
        }
        Ok(out)
    }

    /// Rows `start .. start+len`.
    pub fn slice_rows(&self, start: usize, len: usize) -> Tensor {
        assert!(start + len <= self.rows);
        let mut out = Tensor::zeros(self.algebra, len, self.cols);
        for p in 0..self.algebra.dim() {
            let src = &self.plane(p)[start * self.cols..(start + len) * self.cols];
            out.plane_mut(p).copy_from_slice(src);
        }
        out
    }

    /// Squared Frobenius norm over all planes.
    pub fn norm_squared(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `out += sign * a · b` for row-major `a: m×k`, `b: k×n`.
#[inline]
pub(crate) fn gemm_acc(out: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize, sign: f64) {
    debug_assert_eq!(out.len(), m * n);
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    // 4×4 register tiles: each tile's accumulators stay in registers across
    // the whole `kk` loop. Every output still accumulates over `kk` in order,
    // starting from its current value, so tiling does not change results.
    let blocked = m - m % 4;
    let tiled = n - n % 4;
    for i in (0..blocked).step_by(4) {
        for j in (0..tiled).step_by(4) {
            let mut acc = [[0.0; 4]; 4];
            for (r, row) in acc.iter_mut().enumerate() {
                row.copy_from_slice(&out[(i + r) * n + j..(i + r) * n + j + 4]);
            }
            for kk in 0..k {
                let s = [
                    sign * a[i * k + kk],
                    sign * a[(i + 1) * k + kk],
                    sign * a[(i + 2) * k + kk],
                    sign * a[(i + 3) * k + kk],
                ];
                let bv: [f64; 4] = b[kk * n + j..kk * n + j + 4].try_into().unwrap();
                for r in 0..4 {
                    for c in 0..4 {
                        acc[r][c] += s[r] * bv[c];
                    }
                }
            }
            for (r, row) in acc.iter().enumerate() {
                out[(i + r) * n + j..(i + r) * n + j + 4].copy_from_slice(row);
            }
        }
        for j in tiled..n {
            for r in i..i + 4 {
                let mut acc = out[r * n + j];
                for kk in 0..k {
                    acc += sign * a[r * k + kk] * b[kk * n + j];
                }
                out[r * n + j] = acc;
            }
        }
    }
    for i in blocked..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        let a_row = &a[i * k..(i + 1) * k];
        for (kk, &av) in a_row.iter().enumerate() {
            let s = sign * av;
            let b_row = &b[kk * n..(kk + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += s * bv;
            }
        }
    }
}

/// Matrix product with entries multiplied by the algebra's product
/// (the Hamilton product for quaternion tensors).
pub fn qmatmul(w: &Tensor, x: &Tensor) -> Result<Tensor> {
    let mut out = Tensor::zeros(w.algebra, w.rows, x.cols);
    qmatmul_acc(&mut out, w, x)?;
    Ok(out)
}

/// `out += w · x`.
pub fn qmatmul_acc(out: &mut Tensor, w: &Tensor, x: &Tensor) -> Result<()> {
    w.expect_algebra(x.algebra)?;
    out.expect_algebra(w.algebra)?;
    if w.cols != x.rows {
        return Err(shape_err(format!(
            "inner dimensions differ: {}x{} · {}x{}",
            w.rows, w.cols, x.rows, x.cols
        )));
    }
    if out.shape() != (w.rows, x.cols) {
        return Err(shape_err(format!(
            "accumulator is {}x{}, product is {}x{}",
            out.rows, out.cols, w.rows, x.cols
        )));
    }
    let (m, k, n) = (w.rows, w.cols, x.cols);
    match w.algebra {
        Algebra::Real => gemm_acc(&mut out.data, &w.data, &x.data, m, k, n, 1.0),
        Algebra::Quaternion => hamilton_gemm_acc(&mut out.data, &w.data, &x.data, m, k, n),
    }
    Ok(())
}

/// Plane-major quaternion `out += a · b` evaluating all of [`HAMILTON_TERMS`]
/// in one sweep, so each weight and input quaternion is loaded once.
fn hamilton_gemm_acc(out: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    let (pa, pb, po) = (m * k, k * n, m * n);
    let ap: [&[f64]; 4] = std::array::from_fn(|p| &a[p * pa..(p + 1) * pa]);
    let bp: [&[f64]; 4] = std::array::from_fn(|p| &b[p * pb..(p + 1) * pb]);
    let (o0, rest) = out.split_at_mut(po);
    let (o1, rest) = rest.split_at_mut(po);
    let (o2, o3) = rest.split_at_mut(po);
    for i in 0..m {
        let rows = i * n..(i + 1) * n;
        let (r0, r1, r2, r3) = (
            &mut o0[rows.clone()],
            &mut o1[rows.clone()],
            &mut o2[rows.clone()],
            &mut o3[rows],
        );
        for kk in 0..k {
            let wq: [f64; 4] = std::array::from_fn(|p| ap[p][i * k + kk]);
            let ws: [f64; 16] = std::array::from_fn(|t| HAMILTON_TERMS[t].sign * wq[HAMILTON_TERMS[t].lhs]);
            let cols = kk * n..(kk + 1) * n;
            let (x0, x1, x2, x3) = (
                &bp[0][cols.clone()],
                &bp[1][cols.clone()],
                &bp[2][cols.clone()],
                &bp[3][cols],
            );
            for j in 0..n {
                let xq = [x0[j], x1[j], x2[j], x3[j]];
                let mut acc = [0.0; 4];
                for (t, term) in HAMILTON_TERMS.iter().enumerate() {
                    acc[term.out] += ws[t] * xq[term.rhs];
                }
                r0[j] += acc[0];
                r1[j] += acc[1];
                r2[j] += acc[2];
                r3[j] += acc[3];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::hamilton_product;

    fn sample(rows: usize, cols: usize, seed: u64) -> Tensor {
        let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        let data = (0..4 * rows * cols)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
            })
            .collect();
        Tensor::from_data(Algebra::Quaternion, rows, cols, data).unwrap()
    }

    #[test]
    fn element_readback_matches_planes() {
        let t = sample(3, 2, 7);
        for r in 0..3 {
            for c in 0..2 {
                let q = t.quat(r, c).to_array();
                for (p, v) in q.iter().enumerate() {
                    assert_eq!(*v, t.plane(p)[r * 2 + c]);
                }
            }
        }
    }

    #[test]
    fn matmul_entries_are_hamilton_sums() {
        let w = sample(3, 2, 1);
        let x = sample(2, 4, 2);
        let y = qmatmul(&w, &x).unwrap();
        for m in 0..3 {
            for b in 0..4 {
                let mut acc = Quaternion::ZERO;
                for n in 0..2 {
                    acc += hamilton_product(w.quat(m, n), x.quat(n, b));
                }
                assert!((y.quat(m, b) - acc).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn identity_and_zero_weights() {
        let x = sample(1, 1, 3);
        let id = Tensor::identity(Algebra::Quaternion, 1);
        assert_eq!(qmatmul(&id, &x).unwrap(), x);
        let zero = Tensor::zeros(Algebra::Quaternion, 2, 1);
        assert_eq!(qmatmul(&zero, &x).unwrap(), Tensor::zeros(Algebra::Quaternion, 2, 1));
    }

    #[test]
    fn inner_dimension_mismatch() {
        let err = qmatmul(&sample(2, 3, 1), &sample(2, 3, 2)).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn real_view_round_trip() {
        let t = sample(3, 5, 9);
        let real = t.to_real();
        assert_eq!(real.shape(), (12, 5));
        assert_eq!(real.get(0, 4 + 2, 1), t.get(2, 1, 1));
        assert_eq!(Tensor::from_real(&real, Algebra::Quaternion).unwrap(), t);
        assert!(Tensor::from_real(&Tensor::zeros(Algebra::Real, 6, 1), Algebra::Quaternion).is_err());
    }

    #[test]
    fn conj_transpose_entries() {
        let t = sample(2, 3, 4);
        let h = t.conj_transpose();
        for r in 0..2 {
            for c in 0..3 {
                assert_eq!(h.quat(c, r), t.quat(r, c).conjugate());
            }
        }
    }

    #[test]
    fn bias_broadcast_and_column_sum() {
        let t = sample(2, 3, 5);
        let b = sample(2, 1, 6);
        let out = t.add_column(&b).unwrap();
        assert_eq!(out.quat(1, 2), t.quat(1, 2) + b.quat(1, 0));
        let s = t.sum_columns();
        assert!((s.quat(0, 0) - (t.quat(0, 0) + t.quat(0, 1) + t.quat(0, 2))).norm() < 1e-15);
    }

    #[test]
    fn concat_and_slice() {
        let a = sample(2, 3, 1);
        let b = sample(1, 3, 2);
        let c = Tensor::concat_rows(&[&a, &b]).unwrap();
        assert_eq!(c.slice_rows(0, 2), a);
        assert_eq!(c.slice_rows(2, 1), b);
    }
}
