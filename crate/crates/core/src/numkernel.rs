//! Dense complex matrix kernel.
//!
//! Every other module realizes operators as [`CMatrix`] values and makes its
//! rank decisions through [`herm_eig`] / [`rank_kernel`], so null spaces of
//! Gram matrices are always detected from a Hermitian eigendecomposition.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Shorthand for a complex scalar.
#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Relative rank cutoff and residual pass threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub rtol: f64,
    pub ctol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rtol: 1e-10, ctol: 1e-8 }
    }
}

impl Tolerance {
    pub fn new(rtol: f64, ctol: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rtol) || !rtol.is_finite() {
            return Err(Error::InvalidConfig(format!("rtol {rtol} outside [0, 1)")));
        }
        if !(ctol > 0.0) || !ctol.is_finite() {
            return Err(Error::InvalidConfig(format!("ctol {ctol} must be positive")));
        }
        Ok(Tolerance { rtol, ctol })
    }

    /// Pass threshold `ctol * (1 + scale)`.
    pub fn threshold(&self, scale: f64) -> f64 {
        self.ctol * (1.0 + scale)
    }
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn ensure_finite(m: &CMatrix) -> Result<()> {
    if is_finite(m) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

fn ensure_square(m: &CMatrix) -> Result<()> {
    if m.nrows() == m.ncols() {
        Ok(())
    } else {
        Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() })
    }
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Kronecker product `a ⊗ b` with row index `i * b.nrows() + k`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == Complex64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = s * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Eigenvalues in ascending order with matching unitary eigenvector matrix.
#[derive(Clone, Debug)]
pub struct HermEig {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermEig {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

pub fn herm_eig(m: &CMatrix, tol: &Tolerance) -> Result<HermEig> {
    ensure_square(m)?;
    ensure_finite(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(HermEig { values: Vec::new(), vectors: CMatrix::zeros(0, 0) });
    }
    let herm = (m + m.adjoint()) * c(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    let out = HermEig { values, vectors };
    // Frobenius bounds the operator norm of the skew part from above.
    let skew = frobenius(&(m - m.adjoint()));
    if skew > tol.threshold(out.max_abs()) {
        return Err(Error::NonHermitian { residual: skew });
    }
    Ok(out)
}

/// Rank decision for a positive semidefinite matrix.
#[derive(Clone, Debug)]
pub struct RankKernel {
    pub rank: usize,
    /// Orthonormal eigenvectors of the kept eigenvalues, largest first.
    pub range_basis: CMatrix,
    /// Orthonormal eigenvectors spanning the numerical kernel.
    pub kernel_basis: CMatrix,
    /// Kept eigenvalues, matching the columns of `range_basis`.
    pub kept: Vec<f64>,
    pub min_eigenvalue: f64,
}

pub fn rank_kernel(g: &CMatrix, tol: &Tolerance) -> Result<RankKernel> {
    rank_kernel_scaled(g, 0.0, tol)
}

/// Rank decision with eigenvalues below `rtol·max(λ_max, scale)` treated as
/// null, where `scale` is an a priori size of `g`. A Gram matrix assembled
/// from O(1) data whose entries all cancel to rounding level then has rank 0.
pub fn rank_kernel_scaled(g: &CMatrix, scale: f64, tol: &Tolerance) -> Result<RankKernel> {
    let eig = herm_eig(g, tol)?;
    let n = g.nrows();
    let lmax = eig.values.last().copied().unwrap_or(0.0).max(0.0);
    let lmin = eig.values.first().copied().unwrap_or(0.0);
    if lmin < -tol.threshold(eig.max_abs().max(scale)) {
        return Err(Error::NotPsd { min_eigenvalue: lmin });
    }
    let cutoff = tol.rtol * lmax.max(scale);
    let keep: Vec<usize> = if lmax > 0.0 { (0..n).rev().filter(|&i| eig.values[i] > cutoff).collect() } else { Vec::new() };
    let drop: Vec<usize> = (0..n).filter(|i| !keep.contains(i)).collect();
    let gather = |idx: &[usize]| CMatrix::from_fn(n, idx.len(), |r, k| eig.vectors[(r, idx[k])]);
    Ok(RankKernel {
        rank: keep.len(),
        range_basis: gather(&keep),
        kernel_basis: gather(&drop),
        kept: keep.iter().map(|&i| eig.values[i]).collect(),
        min_eigenvalue: lmin,
    })
}

/// Largest singular value.
pub fn operator_norm(m: &CMatrix) -> Result<f64> {
    ensure_finite(m)?;
    Ok(operator_norm_unchecked(m))
}

/// Largest singular value without the finiteness gate; NaN propagates.
pub fn operator_norm_unchecked(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().singular_values().iter().fold(0.0_f64, |acc, s| acc.max(*s))
}

/// Number of singular values above `rtol` times the largest one.
pub fn numerical_rank(m: &CMatrix, tol: &Tolerance) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.iter().fold(0.0_f64, |a, s| a.max(*s));
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > tol.rtol * smax).count()
}

pub fn pseudo_inverse(m: &CMatrix, tol: &Tolerance) -> Result<CMatrix> {
    ensure_finite(m)?;
    let (r, cdim) = m.shape();
    if r == 0 || cdim == 0 {
        return Ok(CMatrix::zeros(cdim, r));
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let vt = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.iter().fold(0.0_f64, |a, s| a.max(*s));
    let cutoff = tol.rtol * smax;
    let k = svd.singular_values.len();
    let mut sinv = CMatrix::zeros(k, k);
    for i in 0..k {
        let s = svd.singular_values[i];
        if smax > 0.0 && s > cutoff {
            sinv[(i, i)] = c(1.0 / s, 0.0);
        }
    }
    Ok(vt.adjoint() * sinv * u.adjoint())
}

/// Principal square root and inverse square root of a positive definite matrix.
pub fn pd_sqrt_pair(g: &CMatrix, tol: &Tolerance) -> Result<(CMatrix, CMatrix)> {
    let eig = herm_eig(g, tol)?;
    let n = g.nrows();
    if n == 0 {
        return Ok((CMatrix::zeros(0, 0), CMatrix::zeros(0, 0)));
    }
    if eig.values[0] <= 0.0 {
        return Err(Error::SingularGram);
    }
    let v = &eig.vectors;
    let mut sq = v.clone();
    let mut isq = v.clone();
    for k in 0..n {
        let s = eig.values[k].sqrt();
        for r in 0..n {
            sq[(r, k)] *= s;
            isq[(r, k)] /= s;
        }
    }
    Ok((&sq * v.adjoint(), &isq * v.adjoint()))
}

/// Wire form of a matrix: row-major `[re, im]` pairs.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MatrixWire {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl From<&CMatrix> for MatrixWire {
    fn from(m: &CMatrix) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for r in 0..m.nrows() {
            for col in 0..m.ncols() {
                let z = m[(r, col)];
                data.push([z.re, z.im]);
            }
        }
        MatrixWire { rows: m.nrows(), cols: m.ncols(), data }
    }
}

impl TryFrom<MatrixWire> for CMatrix {
    type Error = Error;

    fn try_from(w: MatrixWire) -> Result<CMatrix> {
        if w.data.len() != w.rows * w.cols {
            return Err(Error::Validation(format!("matrix {}x{} carries {} entries", w.rows, w.cols, w.data.len())));
        }
        let m = CMatrix::from_fn(w.rows, w.cols, |r, k| {
            let [re, im] = w.data[r * w.cols + k];
            c(re, im)
        });
        ensure_finite(&m)?;
        Ok(m)
    }
}

/// `serde(with = ...)` adapter for a single matrix field.
pub mod matrix_serde {
    use super::{CMatrix, MatrixWire};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        MatrixWire::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        let w = MatrixWire::deserialize(d)?;
        CMatrix::try_from(w).map_err(serde::de::Error::custom)
    }
}

/// `serde(with = ...)` adapter for a list of matrices.
pub mod matrix_vec_serde {
    use super::{CMatrix, MatrixWire};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(ms: &[CMatrix], s: S) -> Result<S::Ok, S::Error> {
        let wires: Vec<MatrixWire> = ms.iter().map(MatrixWire::from).collect();
        wires.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CMatrix>, D::Error> {
        let wires = Vec::<MatrixWire>::deserialize(d)?;
        wires.into_iter().map(|w| CMatrix::try_from(w).map_err(serde::de::Error::custom)).collect()
    }
}
