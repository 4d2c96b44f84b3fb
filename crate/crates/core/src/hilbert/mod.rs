//! Hilbert modules over finite-dimensional C*-algebras.
//!
//! A module is stored in coordinates `ℂ^d`. The right action of the
//! coefficient algebra `B` is a list of matrices `R(E_k)`, one per matrix unit
//! (so `x·b = R(b) x` and `R(b₁b₂) = R(b₂)R(b₁)`), and the inner product is a
//! list of matrices `P_k` with `⟨x, y⟩ = Σ_k (x† P_k y) E_k`. The scalarized
//! Gram matrix `G = Σ_{k diagonal} P_k` realizes `τ(⟨x, y⟩) = x† G y`, and all
//! null-space decisions go through its eigendecomposition.

mod maps;
mod tensor;

pub use maps::*;
pub use tensor::*;

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::cstar::AlgebraShape;
use crate::error::{Error, Result};
use crate::numkernel::{
    c, frobenius, herm_eig, identity, is_finite, kron, operator_norm_unchecked, pd_sqrt_pair, rank_kernel_scaled, CMatrix, CVector,
    MatrixWire, Tolerance,
};
use crate::random::{gaussian_matrix, haar_unitary, index, Rng64};

pub type ModuleRef = Arc<HilbertModule>;

/// Coordinate module data with a possibly degenerate inner product.
#[derive(Clone, Debug, PartialEq)]
pub struct PreModule {
    pub algebra: AlgebraShape,
    pub dim: usize,
    pub action: Vec<CMatrix>,
    pub pairing: Vec<CMatrix>,
    /// A priori size of the Gram matrix for the rank decision; 0 means
    /// relative to its largest eigenvalue only.
    pub scale: f64,
}

/// Residuals of the module axioms on basis elements.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModuleAxiomReport {
    pub hermitian_symmetry: f64,
    pub right_linearity: f64,
    pub action_homomorphism: f64,
    pub unit_action: f64,
    pub min_gram_eigenvalue: f64,
}

impl ModuleAxiomReport {
    pub fn passes(&self, tol: &Tolerance, scale: f64) -> bool {
        let t = tol.threshold(scale);
        self.hermitian_symmetry <= t
            && self.right_linearity <= t
            && self.action_homomorphism <= t
            && self.unit_action <= t
            && self.min_gram_eigenvalue >= -t
    }
}

impl PreModule {
    pub fn new(algebra: AlgebraShape, dim: usize, action: Vec<CMatrix>, pairing: Vec<CMatrix>) -> Result<Self> {
        let nb = algebra.dim();
        if action.len() != nb || pairing.len() != nb {
            return Err(Error::ShapeMismatch(format!(
                "expected {nb} action and pairing matrices, got {} and {}",
                action.len(),
                pairing.len()
            )));
        }
        for m in action.iter().chain(&pairing) {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::ShapeMismatch(format!("expected {dim}x{dim} matrices")));
            }
            if !is_finite(m) {
                return Err(Error::NonFinite);
            }
        }
        Ok(PreModule { algebra, dim, action, pairing, scale: 0.0 })
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn gram(&self) -> CMatrix {
        let mut g = CMatrix::zeros(self.dim, self.dim);
        for k in self.algebra.diagonal_units() {
            g += &self.pairing[k];
        }
        g
    }

    /// Largest Frobenius norm over action and pairing matrices.
    pub fn scale(&self) -> f64 {
        self.action.iter().chain(&self.pairing).map(frobenius).fold(0.0, f64::max)
    }

    /// Evaluates the module axioms on all basis elements.
    pub fn axiom_report(&self, tol: &Tolerance) -> Result<ModuleAxiomReport> {
        let alg = &self.algebra;
        let nb = alg.dim();
        let mut herm = 0.0_f64;
        for k in 0..nb {
            let r = frobenius(&(&self.pairing[alg.star_index(k)] - self.pairing[k].adjoint()));
            herm = herm.max(r);
        }
        let mut lin = 0.0_f64;
        for m in 0..nb {
            let um = alg.unit(m);
            for j in 0..nb {
                let uj = alg.unit(j);
                let lhs = &self.pairing[j] * &self.action[m];
                let r = if uj.block == um.block && uj.col == um.col {
                    frobenius(&(lhs - &self.pairing[alg.index(uj.block, uj.row, um.row)]))
                } else {
                    frobenius(&lhs)
                };
                lin = lin.max(r);
            }
        }
        let mut hom = 0.0_f64;
        for k in 0..nb {
            for m in 0..nb {
                let rhs = &self.action[m] * &self.action[k];
                let r = match alg.unit_product(k, m) {
                    Some(j) => frobenius(&(&self.action[j] - rhs)),
                    None => frobenius(&rhs),
                };
                hom = hom.max(r);
            }
        }
        let mut unit = CMatrix::zeros(self.dim, self.dim);
        for k in alg.diagonal_units() {
            unit += &self.action[k];
        }
        let unit_action = frobenius(&(unit - identity(self.dim)));
        let min_gram_eigenvalue = herm_eig(&self.gram(), tol)?.values.first().copied().unwrap_or(0.0);
        Ok(ModuleAxiomReport { hermitian_symmetry: herm, right_linearity: lin, action_homomorphism: hom, unit_action, min_gram_eigenvalue })
    }
}

/// Output of [`quotient_by_null`]: the module, the quotient map `q` and the
/// section `s` (with `q s = I`), and an orthonormal basis of the null space.
#[derive(Clone, Debug)]
pub struct Quotient {
    pub module: HilbertModule,
    pub q: CMatrix,
    pub s: CMatrix,
    pub kernel: CMatrix,
}

/// Divides a pre-module by the null space of its Gram matrix.
pub fn quotient_by_null(pre: &PreModule, tol: &Tolerance) -> Result<Quotient> {
    let rk = rank_kernel_scaled(&pre.gram(), pre.scale, tol)?;
    let s = rk.range_basis;
    let q = s.adjoint();
    let kernel = rk.kernel_basis;
    if kernel.ncols() > 0 {
        for r in &pre.action {
            let leak = operator_norm_unchecked(&(&q * r * &kernel));
            if leak > tol.threshold(operator_norm_unchecked(r)) {
                return Err(Error::SubmoduleViolation { residual: leak });
            }
        }
    }
    let action: Vec<CMatrix> = pre.action.iter().map(|r| &q * r * &s).collect();
    let pairing: Vec<CMatrix> = pre.pairing.iter().map(|p| &q * p * &s).collect();
    let module = HilbertModule::from_trusted(pre.algebra.clone(), rk.rank, action, pairing)?;
    Ok(Quotient { module, q, s, kernel })
}

/// A nondegenerate module with cached Gram data.
#[derive(Debug)]
pub struct HilbertModule {
    algebra: AlgebraShape,
    dim: usize,
    action: Vec<CMatrix>,
    pairing: Vec<CMatrix>,
    gram: CMatrix,
    gram_inv: CMatrix,
    gram_sqrt: CMatrix,
    gram_inv_sqrt: CMatrix,
    structure: OnceLock<std::result::Result<ModuleStructure, String>>,
}

impl Clone for HilbertModule {
    fn clone(&self) -> Self {
        HilbertModule {
            algebra: self.algebra.clone(),
            dim: self.dim,
            action: self.action.clone(),
            pairing: self.pairing.clone(),
            gram: self.gram.clone(),
            gram_inv: self.gram_inv.clone(),
            gram_sqrt: self.gram_sqrt.clone(),
            gram_inv_sqrt: self.gram_inv_sqrt.clone(),
            structure: OnceLock::new(),
        }
    }
}

impl PartialEq for HilbertModule {
    fn eq(&self, other: &Self) -> bool {
        self.algebra == other.algebra && self.dim == other.dim && self.action == other.action && self.pairing == other.pairing
    }
}

#[derive(Clone, Serialize, Deserialize)]
struct ModuleWire {
    algebra: AlgebraShape,
    dim: usize,
    action: Vec<MatrixWire>,
    pairing: Vec<MatrixWire>,
}

impl Serialize for HilbertModule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ModuleWire {
            algebra: self.algebra.clone(),
            dim: self.dim,
            action: self.action.iter().map(MatrixWire::from).collect(),
            pairing: self.pairing.iter().map(MatrixWire::from).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for HilbertModule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = ModuleWire::deserialize(d)?;
        let conv = |v: Vec<MatrixWire>| v.into_iter().map(CMatrix::try_from).collect::<Result<Vec<_>>>();
        let build = || -> Result<HilbertModule> {
            let pre = PreModule::new(w.algebra.clone(), w.dim, conv(w.action.clone())?, conv(w.pairing.clone())?)?;
            HilbertModule::new(pre, &Tolerance::default())
        };
        build().map_err(serde::de::Error::custom)
    }
}

impl HilbertModule {
    /// Validates the module axioms and nondegeneracy of the Gram matrix.
    pub fn new(pre: PreModule, tol: &Tolerance) -> Result<Self> {
        let report = pre.axiom_report(tol)?;
        if !report.passes(tol, pre.scale()) {
            return Err(Error::Validation(format!("module axioms fail: {report:?}")));
        }
        let eig = herm_eig(&pre.gram(), tol)?;
        if let (Some(lo), Some(hi)) = (eig.values.first(), eig.values.last()) {
            if *lo <= tol.rtol * hi.max(0.0) {
                return Err(Error::SingularGram);
            }
        }
        HilbertModule::from_trusted(pre.algebra, pre.dim, pre.action, pre.pairing)
    }

    /// Builds the caches without re-checking the axioms.
    pub(crate) fn from_trusted(algebra: AlgebraShape, dim: usize, action: Vec<CMatrix>, pairing: Vec<CMatrix>) -> Result<Self> {
        let mut gram = CMatrix::zeros(dim, dim);
        for k in algebra.diagonal_units() {
            gram += &pairing[k];
        }
        gram = (&gram + gram.adjoint()) * c(0.5, 0.0);
        let (gram_sqrt, gram_inv_sqrt) = pd_sqrt_pair(&gram, &Tolerance::default())?;
        let gram_inv = &gram_inv_sqrt * &gram_inv_sqrt;
        Ok(HilbertModule { algebra, dim, action, pairing, gram, gram_inv, gram_sqrt, gram_inv_sqrt, structure: OnceLock::new() })
    }

    /// `⊕ᵢ M_{mᵢ×nᵢ}` with `⟨x, y⟩ = x*y`; coordinate `(i; r, c)` sits at
    /// `Σ_{j<i} m_j n_j + r nᵢ + c`.
    pub fn standard(algebra: &AlgebraShape, mult: &[usize]) -> Result<Self> {
        if mult.len() != algebra.num_blocks() {
            return Err(Error::ShapeMismatch("one multiplicity per block required".into()));
        }
        let dim: usize = mult.iter().zip(algebra.blocks()).map(|(m, n)| m * n).sum();
        let nb = algebra.dim();
        let mut action = vec![CMatrix::zeros(dim, dim); nb];
        let mut pairing = vec![CMatrix::zeros(dim, dim); nb];
        let mut off = 0;
        for (i, (&m, &n)) in mult.iter().zip(algebra.blocks()).enumerate() {
            for k in 0..n {
                for l in 0..n {
                    let idx = algebra.index(i, k, l);
                    for r in 0..m {
                        action[idx][(off + r * n + l, off + r * n + k)] = c(1.0, 0.0);
                        pairing[idx][(off + r * n + k, off + r * n + l)] = c(1.0, 0.0);
                    }
                }
            }
            off += m * n;
        }
        HilbertModule::from_trusted(algebra.clone(), dim, action, pairing)
    }

    /// The algebra as a right module over itself, `⟨x, y⟩ = x*y`.
    pub fn over_itself(algebra: &AlgebraShape) -> Self {
        HilbertModule::standard(algebra, algebra.blocks()).expect("standard module is nondegenerate")
    }

    /// The same module in new coordinates `x' = T x`.
    pub fn transport(&self, t: &CMatrix, tol: &Tolerance) -> Result<Self> {
        if t.nrows() != self.dim || t.ncols() != self.dim {
            return Err(Error::ShapeMismatch("coordinate change size".into()));
        }
        let t_inv = crate::numkernel::pseudo_inverse(t, tol)?;
        let check = operator_norm_unchecked(&(&t_inv * t - identity(self.dim)));
        if check > tol.ctol {
            return Err(Error::Validation("coordinate change is not invertible".into()));
        }
        let action = self.action.iter().map(|r| t * r * &t_inv).collect();
        let pairing = self.pairing.iter().map(|p| t_inv.adjoint() * p * &t_inv).collect();
        HilbertModule::from_trusted(self.algebra.clone(), self.dim, action, pairing)
    }

    /// Orthogonal direct sum `E₁ ⊕ E₂`.
    pub fn direct_sum(a: &HilbertModule, b: &HilbertModule) -> Result<Self> {
        if a.algebra != b.algebra {
            return Err(Error::ShapeMismatch("direct sum over different algebras".into()));
        }
        let dim = a.dim + b.dim;
        let join = |x: &CMatrix, y: &CMatrix| {
            let mut m = CMatrix::zeros(dim, dim);
            m.view_mut((0, 0), (a.dim, a.dim)).copy_from(x);
            m.view_mut((a.dim, a.dim), (b.dim, b.dim)).copy_from(y);
            m
        };
        let action = a.action.iter().zip(&b.action).map(|(x, y)| join(x, y)).collect();
        let pairing = a.pairing.iter().zip(&b.pairing).map(|(x, y)| join(x, y)).collect();
        HilbertModule::from_trusted(a.algebra.clone(), dim, action, pairing)
    }

    pub fn algebra(&self) -> &AlgebraShape {
        &self.algebra
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn action(&self) -> &[CMatrix] {
        &self.action
    }

    pub fn pairing(&self) -> &[CMatrix] {
        &self.pairing
    }

    pub fn gram(&self) -> &CMatrix {
        &self.gram
    }

    pub fn gram_inv(&self) -> &CMatrix {
        &self.gram_inv
    }

    pub fn gram_sqrt(&self) -> &CMatrix {
        &self.gram_sqrt
    }

    pub fn gram_inv_sqrt(&self) -> &CMatrix {
        &self.gram_inv_sqrt
    }

    pub fn to_pre(&self) -> PreModule {
        PreModule { algebra: self.algebra.clone(), dim: self.dim, action: self.action.clone(), pairing: self.pairing.clone(), scale: 0.0 }
    }

    /// Matrix of `x ↦ x·b`.
    pub fn action_of(&self, b: &CVector) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for (k, r) in self.action.iter().enumerate() {
            if b[k] != c(0.0, 0.0) {
                m += r * b[k];
            }
        }
        m
    }

    /// Coordinates of `⟨x, y⟩` in the matrix-unit basis of the algebra.
    pub fn inner(&self, x: &CVector, y: &CVector) -> CVector {
        let xa = x.adjoint();
        CVector::from_iterator(self.pairing.len(), self.pairing.iter().map(|p| (&xa * p * y)[(0, 0)]))
    }

    /// `‖x‖ = ‖⟨x, x⟩‖^{1/2}`.
    pub fn vector_norm(&self, x: &CVector) -> f64 {
        self.algebra.norm(&self.inner(x, x)).sqrt()
    }

    /// Hilbert-space realization `G^{1/2} T G^{-1/2}` of an operator on the module.
    pub fn realize(&self, t: &CMatrix) -> CMatrix {
        &self.gram_sqrt * t * &self.gram_inv_sqrt
    }

    /// Residual of `T R(b) = R(b) T` over the basis for an endomorphism.
    pub fn linearity_residual(&self, t: &CMatrix) -> f64 {
        linearity_residual_between(self, self, t)
    }

    /// Decomposition `E ≅ ⊕ᵢ M_{mᵢ×nᵢ}`, computed once and cached.
    pub fn structure(&self) -> Result<&ModuleStructure> {
        let r = self.structure.get_or_init(|| compute_structure(self).map_err(|e| e.to_string()));
        r.as_ref().map_err(|e| Error::Validation(format!("module structure: {e}")))
    }
}

/// Residual of `T R_src(b) = R_tgt(b) T` over basis units, relative to the
/// Frobenius scale of `T`.
pub fn linearity_residual_between(src: &HilbertModule, tgt: &HilbertModule, t: &CMatrix) -> f64 {
    src.action.iter().zip(&tgt.action).map(|(rs, rt)| operator_norm_unchecked(&(t * rs - rt * t))).fold(0.0, f64::max)
}

/// Isomorphism onto the standard module `⊕ᵢ M_{mᵢ×nᵢ}`.
///
/// `s` maps standard coordinates to module coordinates and satisfies
/// `s† G s = I`; `s_inv = s† G`.
#[derive(Clone, Debug)]
pub struct ModuleStructure {
    pub mult: Vec<usize>,
    pub s: CMatrix,
    pub s_inv: CMatrix,
}

impl ModuleStructure {
    /// Offsets of each block inside the standard coordinates.
    pub fn offsets(&self, algebra: &AlgebraShape) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.mult.len());
        let mut off = 0;
        for (m, n) in self.mult.iter().zip(algebra.blocks()) {
            out.push(off);
            off += m * n;
        }
        out
    }

    /// Embeds blockwise multiplicity matrices `Xᵢ` as `⊕ Xᵢ ⊗ I_{nᵢ}`.
    pub fn embed(target: &ModuleStructure, source: &ModuleStructure, algebra: &AlgebraShape, xs: &[CMatrix]) -> CMatrix {
        let rows: usize = target.mult.iter().zip(algebra.blocks()).map(|(m, n)| m * n).sum();
        let cols: usize = source.mult.iter().zip(algebra.blocks()).map(|(m, n)| m * n).sum();
        let mut out = CMatrix::zeros(rows, cols);
        let to = target.offsets(algebra);
        let so = source.offsets(algebra);
        for (i, &n) in algebra.blocks().iter().enumerate() {
            let blk = kron(&xs[i], &identity(n));
            if blk.nrows() > 0 && blk.ncols() > 0 {
                out.view_mut((to[i], so[i]), (blk.nrows(), blk.ncols())).copy_from(&blk);
            }
        }
        out
    }

    /// Extracts the multiplicity parts `Xᵢ` of a map given in standard coordinates.
    pub fn extract(target: &ModuleStructure, source: &ModuleStructure, algebra: &AlgebraShape, m: &CMatrix) -> Vec<CMatrix> {
        let to = target.offsets(algebra);
        let so = source.offsets(algebra);
        algebra
            .blocks()
            .iter()
            .enumerate()
            .map(|(i, &n)| CMatrix::from_fn(target.mult[i], source.mult[i], |r, s| m[(to[i] + r * n, so[i] + s * n)]))
            .collect()
    }
}

fn compute_structure(e: &HilbertModule) -> Result<ModuleStructure> {
    let alg = &e.algebra;
    let tol = Tolerance::default();
    let mut mult = Vec::new();
    let mut cols: Vec<CVector> = Vec::new();
    for (i, &n) in alg.blocks().iter().enumerate() {
        let p = &e.action[alg.index(i, 0, 0)];
        let ph = e.realize(p);
        let ph = (&ph + ph.adjoint()) * c(0.5, 0.0);
        let eig = herm_eig(&ph, &tol)?;
        let range: Vec<usize> = (0..e.dim).filter(|&k| eig.values[k] > 0.5).collect();
        mult.push(range.len());
        for &k in &range {
            let v = &e.gram_inv_sqrt * eig.vectors.column(k);
            for col in 0..n {
                cols.push(&e.action[alg.index(i, 0, col)] * &v);
            }
        }
    }
    if cols.len() != e.dim {
        return Err(Error::Validation(format!("decomposition found {} of {} dimensions", cols.len(), e.dim)));
    }
    let s = if cols.is_empty() { CMatrix::zeros(0, 0) } else { CMatrix::from_columns(&cols) };
    let s_inv = s.adjoint() * &e.gram;
    let err = operator_norm_unchecked(&(&s_inv * &s - identity(e.dim)));
    if err > 1e-6 {
        return Err(Error::Validation(format!("decomposition is not unitary (residual {err:e})")));
    }
    Ok(ModuleStructure { mult, s, s_inv })
}

/// Random multiplicities with total dimension in `1..=max_dim`.
pub fn random_multiplicities(algebra: &AlgebraShape, max_dim: usize, rng: &mut Rng64) -> Result<Vec<usize>> {
    let min_n = *algebra.blocks().iter().min().expect("nonempty shape");
    if min_n > max_dim {
        return Err(Error::InvalidConfig(format!("module dimension cap {max_dim} below smallest block {min_n}")));
    }
    loop {
        let mult: Vec<usize> = algebra.blocks().iter().map(|&n| index(rng, max_dim / n + 1).min(2)).collect();
        let dim: usize = mult.iter().zip(algebra.blocks()).map(|(m, n)| m * n).sum();
        if dim >= 1 && dim <= max_dim {
            return Ok(mult);
        }
    }
}

/// Random well-conditioned invertible matrix `U diag(σ) V` with σ in [0.5, 2].
pub fn random_coordinate_change(rng: &mut Rng64, n: usize) -> CMatrix {
    let u = haar_unitary(rng, n);
    let v = haar_unitary(rng, n);
    let sig = CVector::from_iterator(
        n,
        (0..n).map(|_| {
            let t: f64 = rand::Rng::random_range(rng, -1.0..1.0);
            c(2f64.powf(t), 0.0)
        }),
    );
    u * CMatrix::from_diagonal(&sig) * v
}

/// Random module over `algebra` of dimension at most `max_dim`, presented in
/// non-orthonormal coordinates.
pub fn random_module(algebra: &AlgebraShape, max_dim: usize, rng: &mut Rng64) -> Result<HilbertModule> {
    let mult = random_multiplicities(algebra, max_dim, rng)?;
    let std = HilbertModule::standard(algebra, &mult)?;
    let t = random_coordinate_change(rng, std.dim());
    std.transport(&t, &Tolerance::default())
}

/// Random `B`-linear map `source → target`.
pub fn random_linear_map(source: &HilbertModule, target: &HilbertModule, rng: &mut Rng64) -> Result<CMatrix> {
    let ss = source.structure()?;
    let ts = target.structure()?;
    let xs: Vec<CMatrix> = ss.mult.iter().zip(&ts.mult).map(|(&m1, &m2)| gaussian_matrix(rng, m2, m1)).collect();
    Ok(&ts.s * ModuleStructure::embed(ts, ss, source.algebra(), &xs) * &ss.s_inv)
}

/// Random `B`-linear unitary on `module`.
pub fn random_unitary_map(module: &HilbertModule, rng: &mut Rng64) -> Result<CMatrix> {
    let st = module.structure()?;
    let xs: Vec<CMatrix> = st.mult.iter().map(|&m| haar_unitary(rng, m)).collect();
    Ok(&st.s * ModuleStructure::embed(st, st, module.algebra(), &xs) * &st.s_inv)
}

#[cfg(test)]
mod tests;
