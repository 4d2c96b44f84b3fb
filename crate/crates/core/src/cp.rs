//! Completely positive maps `φ: A → L(E)`, correspondences, and intertwiners.

use serde::{Deserialize, Serialize};

use crate::cstar::{AlgebraShape, Automorphism, StarMap};
use crate::error::{Error, Result};
use crate::hilbert::{
    adjoint_matrix, linearity_residual_between, map_norm, random_coordinate_change, HilbertModule, ModuleMap, ModuleRef, ModuleStructure,
};
use crate::numkernel::{c, frobenius, herm_eig, identity, operator_norm_unchecked, CMatrix, CVector, Tolerance};
use crate::random::{gaussian_matrix, haar_unitary, index, Rng64};

/// A linear map from `A` into the adjointable operators of a module, given by
/// the images of the matrix units of `A`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "CPMapWire")]
pub struct CPMap {
    pub algebra: AlgebraShape,
    pub module: ModuleRef,
    #[serde(with = "crate::numkernel::matrix_vec_serde")]
    pub images: Vec<CMatrix>,
    /// Always true: every map out of a unital algebra is strict.
    pub strict: bool,
}

#[derive(Deserialize)]
struct CPMapWire {
    algebra: AlgebraShape,
    module: ModuleRef,
    #[serde(with = "crate::numkernel::matrix_vec_serde")]
    images: Vec<CMatrix>,
    strict: bool,
}

impl TryFrom<CPMapWire> for CPMap {
    type Error = Error;

    fn try_from(w: CPMapWire) -> Result<Self> {
        if !w.strict {
            return Err(Error::Validation("non-strict maps are not supported".into()));
        }
        CPMap::new(w.algebra, w.module, w.images, &Tolerance::default())
    }
}

impl CPMap {
    /// Checks shapes and linearity of every image over the module's algebra.
    pub fn new(algebra: AlgebraShape, module: ModuleRef, images: Vec<CMatrix>, tol: &Tolerance) -> Result<Self> {
        let m = CPMap::unchecked(algebra, module, images)?;
        let (res, scale) = m.linearity_residual();
        if res > tol.threshold(scale) {
            return Err(Error::NonLinearMap { residual: res });
        }
        Ok(m)
    }

    pub fn unchecked(algebra: AlgebraShape, module: ModuleRef, images: Vec<CMatrix>) -> Result<Self> {
        if images.len() != algebra.dim() {
            return Err(Error::ShapeMismatch(format!("{} images for an algebra of dimension {}", images.len(), algebra.dim())));
        }
        let d = module.dim();
        if images.iter().any(|m| m.nrows() != d || m.ncols() != d) {
            return Err(Error::ShapeMismatch(format!("images must be {d}x{d}")));
        }
        if !images.iter().all(crate::numkernel::is_finite) {
            return Err(Error::NonFinite);
        }
        Ok(CPMap { algebra, module, images, strict: true })
    }

    /// `(max residual, max image norm)` of `φ(E_k) R(b) = R(b) φ(E_k)`.
    pub fn linearity_residual(&self) -> (f64, f64) {
        let mut res = 0.0_f64;
        let mut scale = 0.0_f64;
        for img in &self.images {
            res = res.max(linearity_residual_between(&self.module, &self.module, img));
            scale = scale.max(operator_norm_unchecked(img));
        }
        (res, scale)
    }

    pub fn apply(&self, a: &CVector) -> CMatrix {
        let d = self.module.dim();
        let mut out = CMatrix::zeros(d, d);
        for (k, img) in self.images.iter().enumerate() {
            if a[k] != c(0.0, 0.0) {
                out += img * a[k];
            }
        }
        out
    }

    /// `‖φ‖` taken as the largest module norm of a basis image.
    pub fn norm(&self) -> f64 {
        self.images.iter().map(|m| map_norm(&self.module, &self.module, m)).fold(0.0, f64::max)
    }

    /// Largest `‖φ(E_k*) − φ(E_k)*‖`.
    pub fn hermiticity_residual(&self) -> f64 {
        (0..self.algebra.dim())
            .map(|k| {
                let lhs = &self.images[self.algebra.star_index(k)];
                let rhs = adjoint_matrix(&self.module, &self.module, &self.images[k]);
                map_norm(&self.module, &self.module, &(lhs - rhs))
            })
            .fold(0.0, f64::max)
    }

    /// Largest `‖φ(E_k E_m) − φ(E_k)φ(E_m)‖`.
    pub fn multiplicativity_residual(&self) -> f64 {
        let alg = &self.algebra;
        let d = self.module.dim();
        let mut worst = 0.0_f64;
        for k in 0..alg.dim() {
            for m in 0..alg.dim() {
                let prod = &self.images[k] * &self.images[m];
                let lhs = match alg.unit_product(k, m) {
                    Some(j) => self.images[j].clone(),
                    None => CMatrix::zeros(d, d),
                };
                worst = worst.max(map_norm(&self.module, &self.module, &(lhs - prod)));
            }
        }
        worst
    }

    pub fn unitality_residual(&self) -> f64 {
        let one = self.apply(&self.algebra.unit_coords());
        map_norm(&self.module, &self.module, &(one - identity(self.module.dim())))
    }

    /// True when the map is a unital *-homomorphism within tolerance.
    pub fn is_correspondence(&self, tol: &Tolerance) -> bool {
        let scale = self.norm();
        self.multiplicativity_residual() <= tol.threshold(scale * scale)
            && self.unitality_residual() <= tol.threshold(scale)
            && self.hermiticity_residual() <= tol.threshold(scale)
    }

    /// `a ↦ W φ(α⁻¹(a)) W⁻¹` on the target of the bijection `W`.
    pub fn conjugated(&self, target: ModuleRef, w: &CMatrix, alpha: &Automorphism, tol: &Tolerance) -> Result<CPMap> {
        let w_inv = crate::numkernel::pseudo_inverse(w, tol)?;
        let images = (0..self.algebra.dim())
            .map(|k| {
                let a = alpha.apply_inverse(&self.algebra.basis_vector(k));
                w * self.apply(&a) * &w_inv
            })
            .collect();
        CPMap::unchecked(self.algebra.clone(), target, images)
    }

    /// Conjugate of the map by an adjointable operator `T`: `a ↦ T* φ(a) T`,
    /// landing on `T`'s source.
    pub fn compressed(&self, source: ModuleRef, t: &CMatrix) -> Result<CPMap> {
        let adj = adjoint_matrix(&source, &self.module, t);
        let images = self.images.iter().map(|m| &adj * m * t).collect();
        CPMap::unchecked(self.algebra.clone(), source, images)
    }
}

/// A CP map whose images are multiplicative, unital and adjoint-preserving.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "CPMap", into = "CPMap")]
pub struct Correspondence(CPMap);

impl Correspondence {
    pub fn new(phi: CPMap, tol: &Tolerance) -> Result<Self> {
        let (lin, scale) = phi.linearity_residual();
        if lin > tol.threshold(scale) {
            return Err(Error::NonLinearMap { residual: lin });
        }
        if !phi.is_correspondence(tol) {
            return Err(Error::Validation(format!(
                "not a unital *-homomorphism (multiplicativity {:e}, unitality {:e})",
                phi.multiplicativity_residual(),
                phi.unitality_residual()
            )));
        }
        Ok(Correspondence(phi))
    }

    pub fn map(&self) -> &CPMap {
        &self.0
    }

    pub fn into_map(self) -> CPMap {
        self.0
    }
}

impl TryFrom<CPMap> for Correspondence {
    type Error = Error;

    fn try_from(phi: CPMap) -> Result<Self> {
        Correspondence::new(phi, &Tolerance::default())
    }
}

impl From<Correspondence> for CPMap {
    fn from(c: Correspondence) -> CPMap {
        c.0
    }
}

/// Outcome of the Choi criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpReport {
    pub is_cp: bool,
    pub min_choi_eigenvalue: Vec<f64>,
    pub hermiticity: f64,
}

impl CpReport {
    pub fn min_eigenvalue(&self) -> f64 {
        self.min_choi_eigenvalue.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Choi test per block of `A`, through the Hilbert-space realization of `L(E)`.
pub fn check_cp(phi: &CPMap, tol: &Tolerance) -> Result<CpReport> {
    let (lin, scale) = phi.linearity_residual();
    if lin > tol.threshold(scale) {
        return Err(Error::NonLinearMap { residual: lin });
    }
    let d = phi.module.dim();
    let alg = &phi.algebra;
    let realized: Vec<CMatrix> = phi.images.iter().map(|m| phi.module.realize(m)).collect();
    let mut mins = Vec::with_capacity(alg.num_blocks());
    let mut is_cp = true;
    let mut herm = 0.0_f64;
    for (i, &n) in alg.blocks().iter().enumerate() {
        let mut choi = CMatrix::zeros(n * d, n * d);
        for k in 0..n {
            for l in 0..n {
                if d > 0 {
                    choi.view_mut((k * d, l * d), (d, d)).copy_from(&realized[alg.index(i, k, l)]);
                }
            }
        }
        let skew = frobenius(&(&choi - choi.adjoint()));
        let h = (&choi + choi.adjoint()) * c(0.5, 0.0);
        let eig = herm_eig(&h, tol)?;
        let lo = eig.values.first().copied().unwrap_or(0.0);
        let thr = tol.threshold(eig.max_abs());
        if skew > thr || lo < -thr {
            is_cp = false;
        }
        herm = herm.max(skew);
        mins.push(lo);
    }
    Ok(CpReport { is_cp, min_choi_eigenvalue: mins, hermiticity: herm })
}

/// Random CP map built from Kraus operators on the standard decomposition of
/// the module. `kraus_rank` operators are drawn per block pair, and each is
/// dropped with probability `sparsity` so that degenerate maps also appear.
pub fn random_cp_with(algebra: &AlgebraShape, module: &ModuleRef, kraus_rank: usize, sparsity: f64, rng: &mut Rng64) -> Result<CPMap> {
    let st = module.structure()?;
    let balg = module.algebra();
    let mut kraus: Vec<Vec<Vec<CMatrix>>> = Vec::new();
    for &m in &st.mult {
        let mut per_a = Vec::new();
        for &n in algebra.blocks() {
            let mut ops = Vec::new();
            for _ in 0..kraus_rank {
                if !crate::random::coin(rng, sparsity) {
                    ops.push(gaussian_matrix(rng, n, m));
                }
            }
            per_a.push(ops);
        }
        kraus.push(per_a);
    }
    let mut images = Vec::with_capacity(algebra.dim());
    for unit in algebra.units() {
        let xs: Vec<CMatrix> = st
            .mult
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                let mut acc = CMatrix::zeros(m, m);
                for k in &kraus[i][unit.block] {
                    acc += k.row(unit.row).adjoint() * k.row(unit.col);
                }
                acc
            })
            .collect();
        images.push(&st.s * ModuleStructure::embed(st, st, balg, &xs) * &st.s_inv);
    }
    CPMap::unchecked(algebra.clone(), module.clone(), images)
}

/// Random CP map with Kraus rank 1 or 2 and occasional degeneracy.
pub fn random_cp(algebra: &AlgebraShape, module: &ModuleRef, rng: &mut Rng64) -> Result<CPMap> {
    let rank = 1 + index(rng, 2);
    random_cp_with(algebra, module, rank, 0.25, rng)
}

/// Random unital *-homomorphism `A → L(E)` together with its module.
///
/// Block `i` of `B` receives `c_{ij}` copies of block `j` of `A`; the module is
/// `⊕ᵢ M_{mᵢ×nᵢ}` with `mᵢ = Σ_j c_{ij} n_j`, presented in random coordinates.
pub fn random_correspondence(algebra: &AlgebraShape, coeff: &AlgebraShape, max_dim: usize, rng: &mut Rng64) -> Result<CPMap> {
    let na = algebra.blocks();
    let nb = coeff.blocks();
    let min_a = *na.iter().min().expect("nonempty");
    let min_b = *nb.iter().min().expect("nonempty");
    if min_a * min_b > max_dim {
        return Err(Error::InvalidConfig("module cap too small for a correspondence".into()));
    }
    let (mult, m) = loop {
        let mult: Vec<Vec<usize>> = nb.iter().map(|_| na.iter().map(|_| index(rng, 2)).collect()).collect();
        let m: Vec<usize> = mult.iter().map(|row| row.iter().zip(na).map(|(c, n)| c * n).sum()).collect();
        let dim: usize = m.iter().zip(nb).map(|(a, b)| a * b).sum();
        if dim >= 1 && dim <= max_dim {
            break (mult, m);
        }
    };
    let std = HilbertModule::standard(coeff, &m)?;
    let st_mult = m.clone();
    let mut images = Vec::with_capacity(algebra.dim());
    let ws: Vec<CMatrix> = m.iter().map(|&mi| haar_unitary(rng, mi)).collect();
    for unit in algebra.units() {
        let xs: Vec<CMatrix> = m
            .iter()
            .enumerate()
            .map(|(i, &mi)| {
                let mut e = CMatrix::zeros(mi, mi);
                let mut off = 0;
                for (j, &n) in na.iter().enumerate() {
                    for _ in 0..mult[i][j] {
                        if j == unit.block {
                            e[(off + unit.row, off + unit.col)] = c(1.0, 0.0);
                        }
                        off += n;
                    }
                }
                &ws[i] * e * ws[i].adjoint()
            })
            .collect();
        let fake = ModuleStructure { mult: st_mult.clone(), s: identity(std.dim()), s_inv: identity(std.dim()) };
        images.push(ModuleStructure::embed(&fake, &fake, coeff, &xs));
    }
    let t = random_coordinate_change(rng, std.dim());
    let tol = Tolerance::default();
    let module = std::sync::Arc::new(std.transport(&t, &tol)?);
    let t_inv = crate::numkernel::pseudo_inverse(&t, &tol)?;
    let images = images.iter().map(|x| &t * x * &t_inv).collect();
    CPMap::unchecked(algebra.clone(), module, images)
}

/// Morphism data `(η, α)` between two CP maps.
#[derive(Clone, Debug)]
pub struct Intertwiner {
    pub eta: ModuleMap,
    pub alpha: Automorphism,
}

impl Intertwiner {
    /// `(η₂η₁, α₂α₁)`.
    pub fn after(&self, first: &Intertwiner) -> Result<Intertwiner> {
        Ok(Intertwiner { eta: self.eta.after(&first.eta)?, alpha: self.alpha.after(&first.alpha)? })
    }

    pub fn identity(phi: &CPMap) -> Intertwiner {
        Intertwiner { eta: ModuleMap::identity(&phi.module), alpha: Automorphism::identity(&phi.algebra) }
    }
}

/// Basis of `{η B-linear : φ₂(α(a)) η = η φ₁(a) for all a}`.
///
/// `B`-linearity is built in by solving for the multiplicity blocks of the
/// standard decompositions of both modules, where the intertwining equations
/// decouple block by block.
pub fn intertwiner_space(phi1: &CPMap, phi2: &CPMap, alpha: &Automorphism, tol: &Tolerance) -> Result<Vec<CMatrix>> {
    if phi1.algebra != phi2.algebra || phi1.module.algebra() != phi2.module.algebra() || alpha.shape() != &phi1.algebra {
        return Err(Error::ShapeMismatch("intertwiner endpoints do not share algebras".into()));
    }
    let balg = phi1.module.algebra();
    let s1 = phi1.module.structure()?;
    let s2 = phi2.module.structure()?;
    let alg = &phi1.algebra;
    let mut y1 = Vec::with_capacity(alg.dim());
    let mut y2 = Vec::with_capacity(alg.dim());
    for k in 0..alg.dim() {
        let std1 = &s1.s_inv * &phi1.images[k] * &s1.s;
        let std2 = &s2.s_inv * phi2.apply(&alpha.apply(&alg.basis_vector(k))) * &s2.s;
        y1.push(ModuleStructure::extract(s1, s1, balg, &std1));
        y2.push(ModuleStructure::extract(s2, s2, balg, &std2));
    }
    let mut systems = Vec::new();
    // Floor the cutoff at the map norms so an all-noise system keeps its kernel.
    let mut smax = phi1.norm().max(phi2.norm());
    for i in 0..balg.num_blocks() {
        let (m1, m2) = (s1.mult[i], s2.mult[i]);
        if m1 == 0 || m2 == 0 {
            systems.push(None);
            continue;
        }
        let unknowns = m1 * m2;
        let mut cons = CMatrix::zeros(alg.dim() * unknowns, unknowns);
        for k in 0..alg.dim() {
            // Column-major vec: vec(Y₂X − XY₁) = (I ⊗ Y₂ − Y₁ᵀ ⊗ I) vec(X).
            let blk = crate::numkernel::kron(&identity(m1), &y2[k][i]) - crate::numkernel::kron(&y1[k][i].transpose(), &identity(m2));
            cons.view_mut((k * unknowns, 0), (unknowns, unknowns)).copy_from(&blk);
        }
        let svd = cons.svd(false, true);
        smax = smax.max(svd.singular_values.iter().fold(0.0, |a: f64, s| a.max(*s)));
        systems.push(Some(svd));
    }
    let mut basis = Vec::new();
    for (i, sys) in systems.into_iter().enumerate() {
        let Some(svd) = sys else { continue };
        let (m1, m2) = (s1.mult[i], s2.mult[i]);
        let vt = svd.v_t.expect("right singular vectors requested");
        for (r, s) in svd.singular_values.iter().enumerate() {
            if smax > 0.0 && *s > tol.rtol * smax {
                continue;
            }
            let v = vt.row(r).adjoint();
            let x = CMatrix::from_column_slice(m2, m1, v.as_slice());
            let xs: Vec<CMatrix> =
                (0..balg.num_blocks()).map(|j| if j == i { x.clone() } else { CMatrix::zeros(s2.mult[j], s1.mult[j]) }).collect();
            basis.push(&s2.s * ModuleStructure::embed(s2, s1, balg, &xs) * &s1.s_inv);
        }
    }
    Ok(basis)
}

/// Residuals of the intertwining condition and of the consequences that
/// `(η, α)` satisfies automatically.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorphismReport {
    pub intertwining: f64,
    pub adjoint_side: f64,
    pub commutation: f64,
    pub threshold: f64,
}

impl MorphismReport {
    pub fn max(&self) -> f64 {
        self.intertwining.max(self.adjoint_side).max(self.commutation)
    }

    pub fn passes(&self) -> bool {
        self.max() <= self.threshold
    }
}

/// Threshold `ctol·(1 + (1+‖η‖)²·max(1, ‖φ₁‖, ‖φ₂‖))` for morphism residuals.
pub fn morphism_threshold(eta_norm: f64, phi1: &CPMap, phi2: &CPMap, tol: &Tolerance) -> f64 {
    let phis = 1f64.max(phi1.norm()).max(phi2.norm());
    tol.threshold((1.0 + eta_norm).powi(2) * phis)
}

pub fn check_morphism(m: &Intertwiner, phi1: &CPMap, phi2: &CPMap, tol: &Tolerance) -> Result<MorphismReport> {
    let e1 = &phi1.module;
    let e2 = &phi2.module;
    let eta = &m.eta.matrix;
    if eta.nrows() != e2.dim() || eta.ncols() != e1.dim() || m.alpha.shape() != &phi1.algebra || phi1.algebra != phi2.algebra {
        return Err(Error::ShapeMismatch("morphism does not connect the given maps".into()));
    }
    let adj = adjoint_matrix(e1, e2, eta);
    let ee = &adj * eta;
    let alg = &phi1.algebra;
    let mut inter = 0.0_f64;
    let mut adjs = 0.0_f64;
    let mut comm = 0.0_f64;
    for k in 0..alg.dim() {
        let p1 = &phi1.images[k];
        let p2 = phi2.apply(&m.alpha.apply(&alg.basis_vector(k)));
        inter = inter.max(map_norm(e1, e2, &(&p2 * eta - eta * p1)));
        adjs = adjs.max(map_norm(e2, e1, &(&adj * &p2 - p1 * &adj)));
        comm = comm.max(map_norm(e1, e1, &(p1 * &ee - &ee * p1)));
    }
    Ok(MorphismReport {
        intertwining: inter,
        adjoint_side: adjs,
        commutation: comm,
        threshold: morphism_threshold(map_norm(e1, e2, eta), phi1, phi2, tol),
    })
}

/// `‖η(x) − ξ(x)‖ + ‖α(a) − α'(a)‖`.
pub fn hom_pseudometric(m1: &Intertwiner, m2: &Intertwiner, x: &CVector, a: &CVector) -> Result<f64> {
    if m1.eta.matrix.shape() != m2.eta.matrix.shape() || m1.alpha.shape() != m2.alpha.shape() {
        return Err(Error::ShapeMismatch("morphisms have different endpoints".into()));
    }
    let dx = (&m1.eta.matrix - &m2.eta.matrix) * x;
    let da = m1.alpha.apply(a) - m2.alpha.apply(a);
    Ok(m1.eta.target.vector_norm(&dx) + m1.alpha.shape().norm(&da))
}

/// Two sides of the bounded-sum inequality for a family `(aᵢ, xᵢ)`:
/// `‖Σ ⟨xᵢ, φ(aᵢ*aⱼ) T xⱼ⟩‖` and `‖T‖·‖Σ ⟨xᵢ, φ(aᵢ*aⱼ) xⱼ⟩‖`.
pub fn bounded_sum_sides(phi: &CPMap, t: &CMatrix, family: &[(CVector, CVector)]) -> (f64, f64) {
    let alg = &phi.algebra;
    let e = &phi.module;
    let nb = e.algebra().dim();
    let mut with_t = CVector::zeros(nb);
    let mut plain = CVector::zeros(nb);
    for (ai, xi) in family {
        for (aj, xj) in family {
            let p = phi.apply(&alg.product(&alg.star(ai), aj));
            with_t += e.inner(xi, &(&p * (t * xj)));
            plain += e.inner(xi, &(&p * xj));
        }
    }
    let balg = e.algebra();
    (balg.norm(&with_t), map_norm(e, e, t) * balg.norm(&plain))
}

/// Largest violation of `0 ⪯ φ(a*a)η*η ⪯ ‖η‖² φ(a*a)` on the realization:
/// the maximum of the negative spectral parts and the non-Hermitian parts.
pub fn sandwich_violation(phi: &CPMap, eta_star_eta: &CMatrix, eta_norm: f64, a: &CVector) -> f64 {
    let alg = &phi.algebra;
    let e = &phi.module;
    let p = phi.apply(&alg.product(&alg.star(a), a));
    let lower = e.realize(&(&p * eta_star_eta));
    let upper = e.realize(&(&p * c(eta_norm * eta_norm, 0.0) - &p * eta_star_eta));
    let mut worst = 0.0_f64;
    for m in [lower, upper] {
        let skew = operator_norm_unchecked(&(&m - m.adjoint()));
        let h = (&m + m.adjoint()) * c(0.5, 0.0);
        let lo = h.symmetric_eigenvalues().iter().fold(f64::INFINITY, |x, v| x.min(*v));
        worst = worst.max(skew).max(-lo.min(0.0));
    }
    worst
}

/// Random element of the intertwiner space, normalized to unit norm; `None`
/// when only zero intertwines.
pub fn random_intertwiner(phi1: &CPMap, phi2: &CPMap, alpha: &Automorphism, rng: &mut Rng64, tol: &Tolerance) -> Result<Option<CMatrix>> {
    let basis = intertwiner_space(phi1, phi2, alpha, tol)?;
    if basis.is_empty() {
        return Ok(None);
    }
    let mut eta = CMatrix::zeros(phi2.module.dim(), phi1.module.dim());
    for b in &basis {
        eta += b * crate::random::gaussian(rng);
    }
    let n = map_norm(&phi1.module, &phi2.module, &eta);
    if n == 0.0 {
        return Ok(None);
    }
    Ok(Some(eta * c(1.0 / n, 0.0)))
}

/// The unital *-homomorphism `a ↦ ρ(a)` acting on `C` by left multiplication.
pub fn left_multiplication_map(rho: &StarMap) -> Result<CPMap> {
    let module = std::sync::Arc::new(HilbertModule::over_itself(&rho.codomain));
    let images = crate::hilbert::left_action_of(rho);
    CPMap::unchecked(rho.domain.clone(), module, images)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cstar::{random_automorphism, AlgebraElement};
    use crate::hilbert::{random_module, random_unitary_map};
    use crate::random::rng_from_seed;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn shape(b: &[usize]) -> AlgebraShape {
        AlgebraShape::new(b.to_vec()).unwrap()
    }

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    const SHAPES: [&[usize]; 5] = [&[1], &[2], &[3], &[2, 2], &[1, 2]];

    fn rand_vec(rng: &mut Rng64, n: usize) -> CVector {
        gaussian_matrix(rng, n, 1).column(0).into_owned()
    }

    fn scalar_module(n: usize) -> ModuleRef {
        Arc::new(HilbertModule::standard(&AlgebraShape::scalars(), &[n]).unwrap())
    }

    #[test]
    fn correspondences_are_cp() {
        let mut rng = rng_from_seed(1);
        for a in SHAPES {
            for b in [&[1usize][..], &[2], &[1, 2]] {
                let phi = random_correspondence(&shape(a), &shape(b), 12, &mut rng).unwrap();
                assert!(phi.is_correspondence(&tol()));
                let rep = check_cp(&phi, &tol()).unwrap();
                assert!(rep.is_cp, "{rep:?}");
            }
        }
    }

    #[test]
    fn transpose_is_not_cp() {
        let a = shape(&[2]);
        let e = scalar_module(2);
        let images: Vec<CMatrix> = a
            .units()
            .iter()
            .map(|u| {
                let mut m = CMatrix::zeros(2, 2);
                m[(u.col, u.row)] = c(1.0, 0.0);
                m
            })
            .collect();
        let phi = CPMap::new(a, e, images, &tol()).unwrap();
        let rep = check_cp(&phi, &tol()).unwrap();
        assert!(!rep.is_cp);
        assert!((rep.min_eigenvalue() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_cp_is_deterministic_and_certified() {
        for (i, a) in SHAPES.iter().enumerate() {
            for (j, b) in SHAPES.iter().enumerate() {
                let seed = (10 * i + j) as u64;
                let e = Arc::new(random_module(&shape(b), 6, &mut rng_from_seed(seed)).unwrap());
                let phi = random_cp(&shape(a), &e, &mut rng_from_seed(seed + 1000)).unwrap();
                let again = random_cp(&shape(a), &e, &mut rng_from_seed(seed + 1000)).unwrap();
                assert_eq!(phi.images, again.images);
                assert!(check_cp(&phi, &tol()).unwrap().is_cp);
                let scale = phi.norm();
                assert!(phi.hermiticity_residual() <= tol().threshold(scale));
                let (lin, s) = phi.linearity_residual();
                assert!(lin <= tol().threshold(s));
                let one = phi.module.realize(&phi.apply(&phi.algebra.unit_coords()));
                let h = (&one + one.adjoint()) * c(0.5, 0.0);
                let lo = herm_eig(&h, &tol()).unwrap().values.first().copied().unwrap_or(0.0);
                assert!(lo >= -tol().threshold(scale));
            }
        }
    }

    #[test]
    fn non_linear_images_are_rejected() {
        let e = Arc::new(random_module(&shape(&[1, 2]), 6, &mut rng_from_seed(3)).unwrap());
        let mut rng = rng_from_seed(4);
        let images = vec![gaussian_matrix(&mut rng, e.dim(), e.dim())];
        let phi = CPMap::unchecked(AlgebraShape::scalars(), e, images).unwrap();
        assert!(matches!(check_cp(&phi, &tol()), Err(Error::NonLinearMap { .. })));
    }

    #[test]
    fn cp_preserved_by_unitary_conjugation() {
        let mut rng = rng_from_seed(5);
        for a in SHAPES {
            let e = Arc::new(random_module(&shape(&[1, 2]), 6, &mut rng).unwrap());
            let phi = random_cp(&shape(a), &e, &mut rng).unwrap();
            let w = random_unitary_map(&e, &mut rng).unwrap();
            let id = Automorphism::identity(&phi.algebra);
            let conj = phi.conjugated(e.clone(), &w, &id, &tol()).unwrap();
            assert!(check_cp(&conj, &tol()).unwrap().is_cp);
        }
    }

    #[test]
    fn identity_belongs_to_self_intertwiners() {
        let mut rng = rng_from_seed(6);
        let e = Arc::new(random_module(&shape(&[1, 2]), 6, &mut rng).unwrap());
        let phi = random_cp(&shape(&[2]), &e, &mut rng).unwrap();
        let id = Automorphism::identity(&phi.algebra);
        let basis = intertwiner_space(&phi, &phi, &id, &tol()).unwrap();
        // Project the identity onto the span and check nothing is lost.
        let n = e.dim();
        let cols: Vec<CVector> = basis.iter().map(|b| CVector::from_column_slice(b.as_slice())).collect();
        let span = CMatrix::from_columns(&cols);
        let target = CVector::from_column_slice(identity(n).as_slice());
        let coef = crate::numkernel::pseudo_inverse(&span, &tol()).unwrap() * &target;
        assert!((&span * coef - target).norm() < 1e-8);
    }

    #[test]
    fn conjugating_unitary_belongs_to_intertwiners() {
        let mut rng = rng_from_seed(7);
        for a in SHAPES {
            let e = Arc::new(random_module(&shape(&[2, 2]), 6, &mut rng).unwrap());
            let phi = random_cp(&shape(a), &e, &mut rng).unwrap();
            let alpha = random_automorphism(&phi.algebra, &mut rng);
            let w = random_unitary_map(&e, &mut rng).unwrap();
            let phi2 = phi.conjugated(e.clone(), &w, &alpha, &tol()).unwrap();
            let m = Intertwiner { eta: ModuleMap::new(e.clone(), e.clone(), w.clone(), &tol()).unwrap(), alpha: alpha.clone() };
            assert!(check_morphism(&m, &phi, &phi2, &tol()).unwrap().passes());
            let basis = intertwiner_space(&phi, &phi2, &alpha, &tol()).unwrap();
            assert!(!basis.is_empty());
            for b in &basis {
                let mm = Intertwiner { eta: ModuleMap::unchecked(e.clone(), e.clone(), b.clone()).unwrap(), alpha: alpha.clone() };
                assert!(check_morphism(&mm, &phi, &phi2, &tol()).unwrap().passes());
                assert!(mm.eta.linearity_residual() < 1e-8);
            }
        }
    }

    #[test]
    fn irreducible_correspondence_has_scalar_commutant() {
        // M₂ acting on ℂ² over ℂ is irreducible.
        let a = shape(&[2]);
        let e = scalar_module(2);
        let images: Vec<CMatrix> = a
            .units()
            .iter()
            .map(|u| {
                let mut m = CMatrix::zeros(2, 2);
                m[(u.row, u.col)] = c(1.0, 0.0);
                m
            })
            .collect();
        let phi = CPMap::new(a.clone(), e, images, &tol()).unwrap();
        assert!(phi.is_correspondence(&tol()));
        let basis = intertwiner_space(&phi, &phi, &Automorphism::identity(&a), &tol()).unwrap();
        assert_eq!(basis.len(), 1);
        // Two copies give the commutant M₂.
        let images2: Vec<CMatrix> = phi.images.iter().map(|m| crate::numkernel::kron(&identity(2), m)).collect();
        let phi2 = CPMap::new(a.clone(), scalar_module(4), images2, &tol()).unwrap();
        assert_eq!(intertwiner_space(&phi2, &phi2, &Automorphism::identity(&a), &tol()).unwrap().len(), 4);
    }

    #[test]
    fn perturbed_morphism_fails() {
        let mut rng = rng_from_seed(8);
        let e = Arc::new(random_module(&shape(&[1, 2]), 6, &mut rng).unwrap());
        let phi = random_cp(&shape(&[2]), &e, &mut rng).unwrap();
        let id = Intertwiner::identity(&phi);
        let r = check_morphism(&id, &phi, &phi, &tol()).unwrap();
        assert!(r.max() < 1e-12);
        let z = crate::hilbert::random_linear_map(&e, &e, &mut rng).unwrap();
        let zn = map_norm(&e, &e, &z);
        let bad = Intertwiner {
            eta: ModuleMap::unchecked(e.clone(), e.clone(), identity(e.dim()) + z * c(0.1 / zn, 0.0)).unwrap(),
            alpha: id.alpha.clone(),
        };
        let r = check_morphism(&bad, &phi, &phi, &tol()).unwrap();
        assert!(!r.passes());
        assert!(r.intertwining >= 0.01 * 0.1);
    }

    #[test]
    fn pseudometric_examples() {
        let e = scalar_module(3);
        let a = shape(&[2]);
        let mut rng = rng_from_seed(9);
        let eta = gaussian_matrix(&mut rng, 3, 3);
        let alpha = random_automorphism(&a, &mut rng);
        let m1 = Intertwiner { eta: ModuleMap::unchecked(e.clone(), e.clone(), eta.clone()).unwrap(), alpha: alpha.clone() };
        let x = rand_vec(&mut rng, 3);
        let av = rand_vec(&mut rng, 4);
        assert_eq!(hom_pseudometric(&m1, &m1, &x, &av).unwrap(), 0.0);
        let delta = 0.37;
        let m2 = Intertwiner { eta: ModuleMap::unchecked(e.clone(), e.clone(), &eta + identity(3) * c(delta, 0.0)).unwrap(), alpha };
        let d = hom_pseudometric(&m1, &m2, &x, &av).unwrap();
        assert!((d - delta * x.norm()).abs() < 1e-12);
    }

    #[test]
    fn pseudometric_triangle_inequality() {
        let mut rng = rng_from_seed(10);
        let e = Arc::new(random_module(&shape(&[1, 2]), 6, &mut rng).unwrap());
        let a = shape(&[1, 2]);
        for _ in 0..100 {
            let ms: Vec<Intertwiner> = (0..3)
                .map(|_| Intertwiner {
                    eta: ModuleMap::unchecked(e.clone(), e.clone(), crate::hilbert::random_linear_map(&e, &e, &mut rng).unwrap()).unwrap(),
                    alpha: random_automorphism(&a, &mut rng),
                })
                .collect();
            let x = rand_vec(&mut rng, e.dim());
            let av = rand_vec(&mut rng, a.dim());
            let d01 = hom_pseudometric(&ms[0], &ms[1], &x, &av).unwrap();
            let d12 = hom_pseudometric(&ms[1], &ms[2], &x, &av).unwrap();
            let d02 = hom_pseudometric(&ms[0], &ms[2], &x, &av).unwrap();
            let d10 = hom_pseudometric(&ms[1], &ms[0], &x, &av).unwrap();
            assert!(d02 <= d01 + d12 + 1e-10);
            assert!((d01 - d10).abs() < 1e-12);
        }
    }

    #[test]
    fn lemma_inequalities_on_samples() {
        let mut rng = rng_from_seed(11);
        for a in SHAPES {
            let e = Arc::new(random_module(&shape(&[1, 2]), 6, &mut rng).unwrap());
            let phi = random_cp(&shape(a), &e, &mut rng).unwrap();
            // A second object reached through a direct sum so η is not unitary.
            let alpha = random_automorphism(&phi.algebra, &mut rng);
            let w = random_unitary_map(&e, &mut rng).unwrap();
            let phi2 = phi.conjugated(e.clone(), &w, &alpha, &tol()).unwrap();
            let Some(eta) = random_intertwiner(&phi, &phi2, &alpha, &mut rng, &tol()).unwrap() else { continue };
            let adj = adjoint_matrix(&e, &e, &eta);
            let en = map_norm(&e, &e, &eta);
            for n in 1..=4 {
                let fam: Vec<(CVector, CVector)> =
                    (0..n).map(|_| (rand_vec(&mut rng, phi.algebra.dim()), rand_vec(&mut rng, e.dim()))).collect();
                let (lhs, rhs) = bounded_sum_sides(&phi, &(&adj * &eta), &fam);
                assert!(lhs <= rhs + tol().threshold(rhs));
                let (lhs2, rhs2) = bounded_sum_sides(&phi2, &(&eta * &adj), &fam);
                assert!(lhs2 <= rhs2 + tol().threshold(rhs2));
                let av = &fam[0].0;
                assert!(sandwich_violation(&phi, &(&adj * &eta), en, av) <= tol().threshold(phi.norm() * en * en * av.norm().powi(2)));
            }
        }
    }

    #[test]
    fn left_multiplication_map_is_a_correspondence() {
        let mut rng = rng_from_seed(12);
        let (_, rho) = crate::cstar::random_hom_and_codomain(&shape(&[1, 2]), 3, 2, &mut rng).unwrap();
        let phi = left_multiplication_map(&rho).unwrap();
        assert!(phi.is_correspondence(&tol()));
        let unit = AlgebraElement::unit(&phi.algebra);
        assert!(phi.apply(&unit.coords()).iter().all(|z| z.re.is_finite()));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn prop_generated_maps_preserve_adjoints(seed in any::<u64>(), ai in 0usize..5, bi in 0usize..5) {
            let mut rng = rng_from_seed(seed);
            let e = Arc::new(random_module(&shape(SHAPES[bi]), 6, &mut rng).unwrap());
            let phi = random_cp(&shape(SHAPES[ai]), &e, &mut rng).unwrap();
            prop_assert!(phi.hermiticity_residual() <= tol().threshold(phi.norm()));
        }
    }
}
