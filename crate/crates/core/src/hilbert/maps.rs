//! Adjointable and twisted-linear maps between Hilbert modules.

use crate::cstar::Automorphism;
use crate::error::{Error, Result};
use crate::numkernel::{identity, operator_norm_unchecked, CMatrix, CVector, Tolerance};

use super::{linearity_residual_between, HilbertModule, ModuleRef};

/// A `B`-linear map, adjointable by finite dimensionality.
#[derive(Clone, Debug)]
pub struct ModuleMap {
    pub source: ModuleRef,
    pub target: ModuleRef,
    pub matrix: CMatrix,
}

impl ModuleMap {
    /// Checks `M R_src(b) = R_tgt(b) M` on all basis units.
    pub fn new(source: ModuleRef, target: ModuleRef, matrix: CMatrix, tol: &Tolerance) -> Result<Self> {
        let m = ModuleMap::unchecked(source, target, matrix)?;
        let r = m.linearity_residual();
        if r > tol.threshold(operator_norm_unchecked(&m.matrix)) {
            return Err(Error::NonLinearMap { residual: r });
        }
        Ok(m)
    }

    /// Skips the linearity gate; shapes are still checked.
    pub fn unchecked(source: ModuleRef, target: ModuleRef, matrix: CMatrix) -> Result<Self> {
        if source.algebra() != target.algebra() {
            return Err(Error::ShapeMismatch("modules over different algebras".into()));
        }
        if matrix.nrows() != target.dim() || matrix.ncols() != source.dim() {
            return Err(Error::ShapeMismatch(format!(
                "map matrix {}x{} between modules of dims {} and {}",
                matrix.nrows(),
                matrix.ncols(),
                source.dim(),
                target.dim()
            )));
        }
        Ok(ModuleMap { source, target, matrix })
    }

    pub fn identity(module: &ModuleRef) -> Self {
        ModuleMap { source: module.clone(), target: module.clone(), matrix: identity(module.dim()) }
    }

    pub fn linearity_residual(&self) -> f64 {
        linearity_residual_between(&self.source, &self.target, &self.matrix)
    }

    pub fn apply(&self, x: &CVector) -> CVector {
        &self.matrix * x
    }

    /// `self ∘ first`.
    pub fn after(&self, first: &ModuleMap) -> Result<ModuleMap> {
        if first.matrix.nrows() != self.matrix.ncols() || first.target.algebra() != self.source.algebra() {
            return Err(Error::ShapeMismatch("maps are not composable".into()));
        }
        Ok(ModuleMap { source: first.source.clone(), target: self.target.clone(), matrix: &self.matrix * &first.matrix })
    }

    pub fn adjoint(&self) -> ModuleMap {
        ModuleMap {
            source: self.target.clone(),
            target: self.source.clone(),
            matrix: adjoint_matrix(&self.source, &self.target, &self.matrix),
        }
    }

    pub fn norm(&self) -> f64 {
        map_norm(&self.source, &self.target, &self.matrix)
    }

    /// `max(‖η*η − 1‖, ‖ηη* − 1‖)` in the operator norms of the modules.
    pub fn unitarity_residual(&self) -> f64 {
        unitarity_residual(&self.source, &self.target, &self.matrix)
    }
}

/// `η* = G_src⁻¹ η† G_tgt`.
pub fn adjoint_matrix(src: &HilbertModule, tgt: &HilbertModule, m: &CMatrix) -> CMatrix {
    src.gram_inv() * m.adjoint() * tgt.gram()
}

/// Operator norm `‖G_tgt^{1/2} M G_src^{-1/2}‖`.
pub fn map_norm(src: &HilbertModule, tgt: &HilbertModule, m: &CMatrix) -> f64 {
    operator_norm_unchecked(&(tgt.gram_sqrt() * m * src.gram_inv_sqrt()))
}

pub fn unitarity_residual(src: &HilbertModule, tgt: &HilbertModule, m: &CMatrix) -> f64 {
    let adj = adjoint_matrix(src, tgt, m);
    let a = map_norm(src, src, &(&adj * m - identity(src.dim())));
    let b = map_norm(tgt, tgt, &(m * &adj - identity(tgt.dim())));
    a.max(b)
}

pub fn adjoint_map(eta: &ModuleMap) -> ModuleMap {
    eta.adjoint()
}

pub fn module_operator_norm(eta: &ModuleMap) -> f64 {
    eta.norm()
}

/// Largest `‖⟨η eᵢ, eⱼ⟩ − ⟨eᵢ, ξ eⱼ⟩‖` over basis pairs, for a candidate adjoint `ξ`.
pub fn adjoint_identity_residual(src: &HilbertModule, tgt: &HilbertModule, eta: &CMatrix, xi: &CMatrix) -> f64 {
    let alg = src.algebra();
    // Coordinate k of ⟨η eᵢ, eⱼ⟩ is (η† P^tgt_k)_{ij}; of ⟨eᵢ, ξ eⱼ⟩ it is (P^src_k ξ)_{ij}.
    let diffs: Vec<CMatrix> = tgt.pairing().iter().zip(src.pairing()).map(|(pt, ps)| eta.adjoint() * pt - ps * xi).collect();
    let mut worst = 0.0_f64;
    for i in 0..src.dim() {
        for j in 0..tgt.dim() {
            let v = CVector::from_iterator(alg.dim(), diffs.iter().map(|d| d[(i, j)]));
            worst = worst.max(alg.norm(&v));
        }
    }
    worst
}

/// `θ_{x,y}: z ↦ x·⟨y, z⟩`.
pub fn rank_one_operator(module: &ModuleRef, x: &CVector, y: &CVector) -> ModuleMap {
    let d = module.dim();
    let mut m = CMatrix::zeros(d, d);
    for (r, p) in module.action().iter().zip(module.pairing()) {
        let left = r * x;
        let right = y.adjoint() * p;
        m += left * right;
    }
    ModuleMap { source: module.clone(), target: module.clone(), matrix: m }
}

/// A map with `T(x·b) = T(x)·α(b)`.
#[derive(Clone, Debug)]
pub struct AlphaLinearMap {
    pub source: ModuleRef,
    pub target: ModuleRef,
    pub twist: Automorphism,
    pub matrix: CMatrix,
}

impl AlphaLinearMap {
    pub fn new(source: ModuleRef, target: ModuleRef, twist: Automorphism, matrix: CMatrix, tol: &Tolerance) -> Result<Self> {
        if twist.shape() != source.algebra() || source.algebra() != target.algebra() {
            return Err(Error::ShapeMismatch("twist does not act on the coefficient algebra".into()));
        }
        if matrix.nrows() != target.dim() || matrix.ncols() != source.dim() {
            return Err(Error::ShapeMismatch("twisted map matrix size".into()));
        }
        let m = AlphaLinearMap { source, target, twist, matrix };
        let r = m.twisted_linearity_residual();
        if r > tol.threshold(operator_norm_unchecked(&m.matrix)) {
            return Err(Error::NonLinearMap { residual: r });
        }
        Ok(m)
    }

    /// Largest `‖M R_src(E_k) − R_tgt(α(E_k)) M‖`.
    pub fn twisted_linearity_residual(&self) -> f64 {
        let alg = self.source.algebra();
        (0..alg.dim())
            .map(|k| {
                let ab = self.twist.apply(&alg.basis_vector(k));
                let rt = self.target.action_of(&ab);
                operator_norm_unchecked(&(&self.matrix * &self.source.action()[k] - rt * &self.matrix))
            })
            .fold(0.0, f64::max)
    }

    /// Largest `‖⟨T eᵢ, T eⱼ⟩ − α(⟨eᵢ, eⱼ⟩)‖` over basis pairs.
    pub fn twisted_pairing_residual(&self) -> f64 {
        twisted_pairing_residual(&self.source, &self.target, &self.twist, &self.matrix)
    }
}

/// Largest `‖⟨T eᵢ, T eⱼ⟩_tgt − α(⟨eᵢ, eⱼ⟩_src)‖` over basis pairs.
pub fn twisted_pairing_residual(src: &HilbertModule, tgt: &HilbertModule, alpha: &Automorphism, t: &CMatrix) -> f64 {
    let alg = src.algebra();
    let nb = alg.dim();
    let d = src.dim();
    // Pairing matrices transported by T: coordinate k of ⟨T eᵢ, T eⱼ⟩.
    let lhs: Vec<CMatrix> = tgt.pairing().iter().map(|p| t.adjoint() * p * t).collect();
    let mut worst = 0.0_f64;
    for i in 0..d {
        for j in 0..d {
            let src_ij = CVector::from_iterator(nb, src.pairing().iter().map(|p| p[(i, j)]));
            let rhs = alpha.apply(&src_ij);
            let l = CVector::from_iterator(nb, lhs.iter().map(|p| p[(i, j)]));
            worst = worst.max(alg.norm(&(l - rhs)));
        }
    }
    worst
}
