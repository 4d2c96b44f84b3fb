//! Interior tensor products and the canonical maps between them.
//!
//! `E ⊗_π F` is realized on the pre-space `ℂ^{d_E} ⊗ ℂ^{d_F}` (index
//! `e * d_F + f`) and divided by the null space of its Gram matrix. Maps
//! between tensor products are written on pre-spaces and pushed through the
//! quotient map / section pair after checking that null spaces are preserved.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cstar::{Automorphism, StarMap};
use crate::error::{Error, Result};
use crate::numkernel::{identity, kron, operator_norm_unchecked, CMatrix, Tolerance};

use super::{quotient_by_null, AlphaLinearMap, HilbertModule, ModuleMap, ModuleRef, PreModule};

/// `E ⊗_π F` with its quotient data.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TensorModule {
    pub module: ModuleRef,
    #[serde(with = "crate::numkernel::matrix_serde")]
    pub q: CMatrix,
    #[serde(with = "crate::numkernel::matrix_serde")]
    pub s: CMatrix,
    #[serde(with = "crate::numkernel::matrix_serde")]
    pub kernel: CMatrix,
    pub left_dim: usize,
    pub right_dim: usize,
}

impl TensorModule {
    pub fn pre_dim(&self) -> usize {
        self.left_dim * self.right_dim
    }
}

/// Pre-module of `E ⊗_π F`, where `pi[k]` is the operator on `F` assigned to
/// the k-th matrix unit of `E`'s coefficient algebra.
pub fn balanced_pre_module(e: &HilbertModule, f: &HilbertModule, pi: &[CMatrix]) -> Result<PreModule> {
    if pi.len() != e.algebra().dim() {
        return Err(Error::ShapeMismatch(format!("{} operators supplied for an algebra of dimension {}", pi.len(), e.algebra().dim())));
    }
    if pi.iter().any(|p| p.nrows() != f.dim() || p.ncols() != f.dim()) {
        return Err(Error::ShapeMismatch("operators do not act on the right factor".into()));
    }
    let de = e.dim();
    let df = f.dim();
    let dim = de * df;
    let id_e = identity(de);
    let action: Vec<CMatrix> = f.action().iter().map(|r| kron(&id_e, r)).collect();
    let live: Vec<usize> = (0..pi.len()).filter(|&k| e.pairing()[k].iter().any(|z| z.norm() > 0.0)).collect();
    let mut pairing = Vec::with_capacity(f.pairing().len());
    for pf in f.pairing() {
        let mut acc = CMatrix::zeros(dim, dim);
        if pf.iter().any(|z| z.norm() > 0.0) {
            for &k in &live {
                acc += kron(&e.pairing()[k], &(pf * &pi[k]));
            }
        }
        pairing.push(acc);
    }
    let pi_norm = live.iter().map(|&k| operator_norm_unchecked(&pi[k])).fold(0.0, f64::max);
    let scale = operator_norm_unchecked(e.gram()) * operator_norm_unchecked(f.gram()) * pi_norm;
    Ok(PreModule::new(f.algebra().clone(), dim, action, pairing)?.with_scale(scale))
}

pub fn balanced_tensor(e: &HilbertModule, f: &HilbertModule, pi: &[CMatrix], tol: &Tolerance) -> Result<TensorModule> {
    let pre = balanced_pre_module(e, f, pi)?;
    let quot = quotient_by_null(&pre, tol)?;
    Ok(TensorModule { module: Arc::new(quot.module), q: quot.q, s: quot.s, kernel: quot.kernel, left_dim: e.dim(), right_dim: f.dim() })
}

/// Pushes a pre-space map through the quotients: `q_tgt · M · s_src`, after
/// checking `q_tgt · M · ker_src ≈ 0`.
pub fn descend(m: &CMatrix, src: &TensorModule, tgt_q: &CMatrix, tol: &Tolerance) -> Result<CMatrix> {
    if src.kernel.ncols() > 0 {
        let leak = operator_norm_unchecked(&(tgt_q * (m * &src.kernel)));
        if leak > tol.threshold(operator_norm_unchecked(m)) {
            return Err(Error::WellDefinednessViolation { residual: leak });
        }
    }
    Ok(tgt_q * (m * &src.s))
}

/// `T ⊗ I` between two tensor products sharing the right factor.
pub fn tensor_map(t: &CMatrix, src: &TensorModule, tgt: &TensorModule, tol: &Tolerance) -> Result<CMatrix> {
    if src.right_dim != tgt.right_dim || t.ncols() != src.left_dim || t.nrows() != tgt.left_dim {
        return Err(Error::ShapeMismatch("tensor factors do not match".into()));
    }
    let big = kron(t, &identity(src.right_dim));
    descend(&big, src, &tgt.q, tol)
}

/// Operators `L_C(ρ(E_k))` realizing `ρ: B → C` as a left action on `C_C`.
pub fn left_action_of(rho: &StarMap) -> Vec<CMatrix> {
    (0..rho.domain.dim()).map(|k| rho.codomain.left_mult_matrix(&rho.matrix.column(k).into_owned())).collect()
}

/// `E ⊗_ρ C` for a unital *-homomorphism `ρ: B → C`.
pub fn tensor_with_algebra(e: &HilbertModule, rho: &StarMap, tol: &Tolerance) -> Result<TensorModule> {
    if e.algebra() != &rho.domain {
        return Err(Error::ShapeMismatch("homomorphism domain differs from the coefficient algebra".into()));
    }
    let c_mod = HilbertModule::over_itself(&rho.codomain);
    balanced_tensor(e, &c_mod, &left_action_of(rho), tol)
}

/// Pre-space map `x ⊗ b ↦ x·(m b)` from `ℂ^{d_E} ⊗ ℂ^{d_C}` to `E`, where `m`
/// maps coordinates of `C` to coordinates of `E`'s coefficient algebra.
fn action_premap(e: &HilbertModule, m: &CMatrix) -> CMatrix {
    let de = e.dim();
    let dc = m.ncols();
    let mut out = CMatrix::zeros(de, de * dc);
    for b in 0..dc {
        let r = e.action_of(&m.column(b).into_owned());
        for q in 0..de {
            out.set_column(q * dc + b, &r.column(q));
        }
    }
    out
}

/// `ι: E ⊗_inc B → E`, `[x ⊗ b] ↦ x b`, with the tensor module it starts from.
pub fn inclusion_unitary(e: &ModuleRef, tol: &Tolerance) -> Result<(TensorModule, ModuleMap)> {
    let t = tensor_with_algebra(e, &StarMap::identity(e.algebra()), tol)?;
    let m = inclusion_on(e, &t);
    Ok((t.clone(), ModuleMap::unchecked(t.module.clone(), e.clone(), m)?))
}

/// Matrix of `ι` for an already built `E ⊗_inc B`.
pub fn inclusion_on(e: &HilbertModule, t: &TensorModule) -> CMatrix {
    action_premap(e, &identity(e.algebra().dim())) * &t.s
}

/// `V_ρ: x ↦ [x ⊗ 1_C]`, a map `E → E ⊗_ρ C`.
pub fn v_rho(t: &TensorModule) -> CMatrix {
    let unit = t.module.algebra().unit_coords();
    let u = CMatrix::from_column_slice(unit.len(), 1, unit.as_slice());
    &t.q * kron(&identity(t.left_dim), &u)
}

/// Twisted module `E ⊗_α B` and the α⁻¹-linear unitary `[x ⊗ b] ↦ x α⁻¹(b)`.
pub fn twist_unitary(e: &ModuleRef, alpha: &Automorphism, tol: &Tolerance) -> Result<(TensorModule, AlphaLinearMap)> {
    if alpha.shape() != e.algebra() {
        return Err(Error::ShapeMismatch("automorphism acts on a different algebra".into()));
    }
    let t = tensor_with_algebra(e, &alpha.map, tol)?;
    let pre = action_premap(e, &alpha.inverse.matrix);
    let u = descend_to_module(&pre, &t, tol)?;
    let map = AlphaLinearMap::new(t.module.clone(), e.clone(), alpha.inverted(), u, tol)?;
    Ok((t, map))
}

/// `pre · s` after checking `pre · ker ≈ 0`.
fn descend_to_module(pre: &CMatrix, t: &TensorModule, tol: &Tolerance) -> Result<CMatrix> {
    if t.kernel.ncols() > 0 {
        let leak = operator_norm_unchecked(&(pre * &t.kernel));
        if leak > tol.threshold(operator_norm_unchecked(pre)) {
            return Err(Error::WellDefinednessViolation { residual: leak });
        }
    }
    Ok(pre * &t.s)
}

/// Transport `T ↦ T ∘ U` of an α-linear map to a `B`-linear map on `E₁ ⊗_α B`.
pub fn alpha_transport(
    t: &AlphaLinearMap,
    alpha: &Automorphism,
    twist: &(TensorModule, AlphaLinearMap),
    tol: &Tolerance,
) -> Result<ModuleMap> {
    let mismatch = t.twist.distance(alpha);
    if mismatch > tol.ctol {
        return Err(Error::TwistMismatch { residual: mismatch });
    }
    let (tm, u) = twist;
    if u.target.dim() != t.source.dim() {
        return Err(Error::ShapeMismatch("twisted module belongs to another module".into()));
    }
    ModuleMap::new(tm.module.clone(), t.target.clone(), &t.matrix * &u.matrix, tol)
}

/// Inverse transport `S ↦ S ∘ U⁻¹`, returning an α-linear map `E₁ → E₂`.
pub fn alpha_untransport(
    s: &ModuleMap,
    alpha: &Automorphism,
    twist: &(TensorModule, AlphaLinearMap),
    tol: &Tolerance,
) -> Result<AlphaLinearMap> {
    let (_, u) = twist;
    let u_inv = crate::numkernel::pseudo_inverse(&u.matrix, tol)?;
    AlphaLinearMap::new(u.target.clone(), s.target.clone(), alpha.clone(), &s.matrix * u_inv, tol)
}

/// `(E ⊗_{ρ₁} C) ⊗_{ρ₂} D → E ⊗_{ρ₂ρ₁} D`, `(x ⊗ c) ⊗ d ↦ x ⊗ ρ₂(c) d`.
pub fn composition_unitary_on(inner: &TensorModule, outer: &TensorModule, combined: &TensorModule, rho2: &StarMap) -> Result<CMatrix> {
    let dc = rho2.domain.dim();
    let dd = rho2.codomain.dim();
    if inner.right_dim != dc || outer.right_dim != dd || combined.right_dim != dd || outer.left_dim != inner.module.dim() {
        return Err(Error::ShapeMismatch("tensor chain does not match the homomorphism".into()));
    }
    let de = inner.left_dim;
    let mut mult = CMatrix::zeros(dd, dc * dd);
    for cidx in 0..dc {
        let l = rho2.codomain.left_mult_matrix(&rho2.matrix.column(cidx).into_owned());
        for d in 0..dd {
            mult.set_column(cidx * dd + d, &l.column(d));
        }
    }
    let lift = kron(&inner.s, &identity(dd)) * &outer.s;
    Ok(&combined.q * (kron(&identity(de), &mult) * lift))
}

/// All three tensor products and the composition unitary between them.
pub struct CompositionData {
    pub inner: TensorModule,
    pub outer: TensorModule,
    pub combined: TensorModule,
    pub unitary: CMatrix,
}

pub fn composition_unitary(e: &HilbertModule, rho1: &StarMap, rho2: &StarMap, tol: &Tolerance) -> Result<CompositionData> {
    let inner = tensor_with_algebra(e, rho1, tol)?;
    let outer = tensor_with_algebra(&inner.module, rho2, tol)?;
    let combined = tensor_with_algebra(e, &rho2.after(rho1)?, tol)?;
    let unitary = composition_unitary_on(&inner, &outer, &combined, rho2)?;
    Ok(CompositionData { inner, outer, combined, unitary })
}
