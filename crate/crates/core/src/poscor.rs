//! Interior tensor products as a functor on CP maps, and the category whose
//! objects are CP maps `A → L(E_B)` with `B` allowed to vary.
//!
//! A morphism `(E_B, φ) → (E_C, ψ)` is a unital *-homomorphism `ρ: B → C`
//! together with an intertwiner `(η, α)` from `(E ⊗_ρ C, φ ⊗ 1)` to `(E_C, ψ)`.

use serde::{Deserialize, Serialize};

use crate::cp::random_cp;
use crate::cp::{check_cp, check_morphism, CPMap, Correspondence, Intertwiner, MorphismReport};
use crate::cstar::{check_star_map, AlgebraShape, Automorphism, StarMap};
use crate::cstar::{random_automorphism, random_hom_and_codomain};
use crate::error::{Error, Result};
use crate::hilbert::{
    adjoint_matrix, balanced_tensor, composition_unitary_on, descend, inclusion_on, linearity_residual_between, map_norm, tensor_map,
    tensor_with_algebra, v_rho, HilbertModule, ModuleMap, ModuleRef, TensorModule,
};
use crate::hilbert::{random_module, random_unitary_map};
use crate::ksgns::{ksgns, ksgns_lift, KsgnsTriple};
use crate::numkernel::{identity, kron, operator_norm_unchecked, CMatrix, CVector, Tolerance};
use crate::random::{coin, Rng64};

/// `E ⊗_π F` for a correspondence `π: B → L(F)`.
pub fn interior_tensor(e: &HilbertModule, f: &HilbertModule, pi: &Correspondence, tol: &Tolerance) -> Result<TensorModule> {
    let pi = pi.map();
    if pi.algebra != *e.algebra() || pi.module.as_ref() != f {
        return Err(Error::ShapeMismatch("correspondence does not connect the factors".into()));
    }
    balanced_tensor(e, f, &pi.images, tol)
}

/// Largest `‖[x E_k ⊗ y] − [x ⊗ π(E_k) y]‖` over basis elements, measured as
/// maps from the pre-space into the tensor product.
pub fn balanced_relation_residual(e: &HilbertModule, pi: &[CMatrix], tm: &TensorModule) -> f64 {
    let df = tm.right_dim;
    let g = tm.module.gram_sqrt();
    e.action()
        .iter()
        .zip(pi)
        .map(|(r, p)| {
            let diff = kron(r, &identity(df)) - kron(&identity(e.dim()), p);
            crate::numkernel::operator_norm_unchecked(&(g * (&tm.q * diff)))
        })
        .fold(0.0, f64::max)
}

/// `T ⊗ I` on `E ⊗_π F`.
pub fn tensor_extend_operator(t: &ModuleMap, tm: &TensorModule, tol: &Tolerance) -> Result<ModuleMap> {
    let m = tensor_map(&t.matrix, tm, tm, tol)?;
    ModuleMap::unchecked(tm.module.clone(), tm.module.clone(), m)
}

/// `a ↦ φ(a) ⊗ I` on `E ⊗_π F`.
///
/// When every image is at rounding level relative to `φ` the extension is
/// the zero map, and it is returned as exact zeros so that later rank
/// decisions do not see noise as structure.
pub fn tensor_extend_cp(phi: &CPMap, tm: &TensorModule, tol: &Tolerance) -> Result<CPMap> {
    let mut images = phi.images.iter().map(|m| tensor_map(m, tm, tm, tol)).collect::<Result<Vec<_>>>()?;
    let size = |ms: &[CMatrix]| ms.iter().map(operator_norm_unchecked).fold(0.0, f64::max);
    if size(&images) <= tol.rtol * size(&phi.images) {
        images.iter_mut().for_each(|m| m.fill(Default::default()));
    }
    CPMap::unchecked(phi.algebra.clone(), tm.module.clone(), images)
}

/// `(η ⊗ I, α)` between `E₁ ⊗_π F` and `E₂ ⊗_π F`.
pub fn tensor_functor_morphism(m: &Intertwiner, t1: &TensorModule, t2: &TensorModule, tol: &Tolerance) -> Result<Intertwiner> {
    let hat = tensor_map(&m.eta.matrix, t1, t2, tol)?;
    Ok(Intertwiner { eta: ModuleMap::unchecked(t1.module.clone(), t2.module.clone(), hat)?, alpha: m.alpha.clone() })
}

/// Both sides of the commutation of tensoring with dilation, and the unitary
/// `V: A ⊗_{φ̃} (E ⊗_π F) → (A ⊗_φ E) ⊗_π F` between them.
#[derive(Clone, Debug)]
pub struct CommutingData {
    pub tensor: TensorModule,
    pub extended: CPMap,
    pub left: KsgnsTriple,
    pub right: TensorModule,
    pub unitary: CMatrix,
}

impl CommutingData {
    /// `π̃_φ(a) = π_φ(a) ⊗ I` on the right-hand side.
    pub fn right_representation(&self, t: &KsgnsTriple, tol: &Tolerance) -> Result<CPMap> {
        tensor_extend_cp(&t.representation, &self.right, tol)
    }

    /// Largest `‖V π_{φ̃}(E_k) − π̃_φ(E_k) V‖`.
    pub fn intertwining_residual(&self, t: &KsgnsTriple, tol: &Tolerance) -> Result<f64> {
        let rhs = self.right_representation(t, tol)?;
        let src = &self.left.dilation.module;
        let tgt = &self.right.module;
        Ok(self
            .left
            .representation
            .images
            .iter()
            .zip(&rhs.images)
            .map(|(l, r)| map_norm(src, tgt, &(&self.unitary * l - r * &self.unitary)))
            .fold(0.0, f64::max))
    }
}

/// `V` for `(E, φ)` given through its dilation `t`, and a correspondence
/// `π: B → L(F)`.
pub fn commuting_unitary(t: &KsgnsTriple, f: &HilbertModule, pi: &[CMatrix], tol: &Tolerance) -> Result<CommutingData> {
    let tensor = balanced_tensor(&t.source.module, f, pi, tol)?;
    let extended = tensor_extend_cp(&t.source, &tensor, tol)?;
    let right = balanced_tensor(&t.dilation.module, f, pi, tol)?;
    commuting_unitary_on(t, tensor, extended, right, tol)
}

fn commuting_unitary_on(
    t: &KsgnsTriple,
    tensor: TensorModule,
    extended: CPMap,
    right: TensorModule,
    tol: &Tolerance,
) -> Result<CommutingData> {
    let left = ksgns(&extended, tol)?;
    let da = t.algebra().dim();
    // a ⊗ [x ⊗ f] ↦ [a ⊗ x] ⊗ f through the common pre-space A ⊗ E ⊗ F.
    let through = kron(&t.dilation.q, &identity(tensor.right_dim)) * kron(&identity(da), &tensor.s);
    let unitary = descend(&through, &left.dilation, &right.q, tol)?;
    Ok(CommutingData { tensor, extended, left, right, unitary })
}

/// A CP map `A → L(E_B)` carrying an identity label.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PosCorObject {
    pub label: String,
    pub phi: CPMap,
}

impl PosCorObject {
    pub fn new(label: impl Into<String>, phi: CPMap, tol: &Tolerance) -> Result<Self> {
        let rep = check_cp(&phi, tol)?;
        if !rep.is_cp {
            return Err(Error::NotCp { min_eigenvalue: rep.min_eigenvalue() });
        }
        Ok(PosCorObject { label: label.into(), phi })
    }

    pub fn coefficient_algebra(&self) -> &AlgebraShape {
        self.phi.module.algebra()
    }

    pub fn module(&self) -> &ModuleRef {
        &self.phi.module
    }

    /// Whether the object lies in the full subcategory of correspondences.
    pub fn is_correspondence(&self, tol: &Tolerance) -> bool {
        self.phi.is_correspondence(tol)
    }
}

/// `(ρ, (η, α))` with the tensor module `E ⊗_ρ C` and `φ ⊗ 1` cached.
#[derive(Clone, Debug)]
pub struct PosCorMorphism {
    pub dom: String,
    pub cod: String,
    pub rho: StarMap,
    pub tensor: TensorModule,
    pub extended: CPMap,
    pub eta: ModuleMap,
    pub alpha: Automorphism,
}

/// Residuals of the conditions every morphism must satisfy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorphismInvariants {
    pub star_map: f64,
    pub linearity: f64,
    pub intertwining: MorphismReport,
}

impl MorphismInvariants {
    pub fn passes(&self, tol: &Tolerance) -> bool {
        self.star_map <= tol.ctol && self.linearity <= tol.threshold(1.0) && self.intertwining.passes()
    }

    pub fn max(&self) -> f64 {
        self.star_map.max(self.linearity).max(self.intertwining.max())
    }
}

impl PosCorMorphism {
    /// Validated morphism with `η` given on `E ⊗_ρ C`.
    pub fn new(dom: &PosCorObject, cod: &PosCorObject, rho: StarMap, eta: CMatrix, alpha: Automorphism, tol: &Tolerance) -> Result<Self> {
        let m = PosCorMorphism::unchecked(dom, cod, rho, eta, alpha, tol)?;
        let inv = m.invariants(cod, tol)?;
        if !inv.passes(tol) {
            return Err(Error::Validation(format!("morphism conditions fail (residual {:e})", inv.max())));
        }
        Ok(m)
    }

    /// Builds the cached data without checking the morphism conditions.
    pub fn unchecked(
        dom: &PosCorObject,
        cod: &PosCorObject,
        rho: StarMap,
        eta: CMatrix,
        alpha: Automorphism,
        tol: &Tolerance,
    ) -> Result<Self> {
        if rho.domain != *dom.coefficient_algebra() || rho.codomain != *cod.coefficient_algebra() {
            return Err(Error::ShapeMismatch("homomorphism does not connect the coefficient algebras".into()));
        }
        if alpha.shape() != &dom.phi.algebra || dom.phi.algebra != cod.phi.algebra {
            return Err(Error::ShapeMismatch("objects act through different algebras".into()));
        }
        let tensor = tensor_with_algebra(dom.module(), &rho, tol)?;
        let extended = tensor_extend_cp(&dom.phi, &tensor, tol)?;
        let eta = ModuleMap::unchecked(tensor.module.clone(), cod.module().clone(), eta)?;
        Ok(PosCorMorphism { dom: dom.label.clone(), cod: cod.label.clone(), rho, tensor, extended, eta, alpha })
    }

    pub fn intertwiner(&self) -> Intertwiner {
        Intertwiner { eta: self.eta.clone(), alpha: self.alpha.clone() }
    }

    pub fn invariants(&self, cod: &PosCorObject, tol: &Tolerance) -> Result<MorphismInvariants> {
        if cod.label != self.cod {
            return Err(Error::ObjectMismatch(format!("expected codomain {}, got {}", self.cod, cod.label)));
        }
        Ok(MorphismInvariants {
            star_map: check_star_map(&self.rho).max(),
            linearity: linearity_residual_between(&self.tensor.module, cod.module(), &self.eta.matrix) / (1.0 + self.eta.norm()),
            intertwining: check_morphism(&self.intertwiner(), &self.extended, &cod.phi, tol)?,
        })
    }

    /// `x ↦ η[x ⊗ 1]`, which determines `η` and does not depend on the
    /// coordinates chosen for `E ⊗_ρ C`.
    pub fn restricted(&self) -> CMatrix {
        &self.eta.matrix * v_rho(&self.tensor)
    }
}

/// `‖η(x⊗1) − η'(x⊗1)‖ + ‖α(a) − α'(a)‖ + ‖ρ(b) − ρ'(b)‖`.
pub fn poscor_pseudometric(m1: &PosCorMorphism, m2: &PosCorMorphism, b: &CVector, x: &CVector, a: &CVector) -> Result<f64> {
    if m1.dom != m2.dom || m1.cod != m2.cod {
        return Err(Error::ObjectMismatch("morphisms have different endpoints".into()));
    }
    let dx = (m1.restricted() - m2.restricted()) * x;
    let da = m1.alpha.apply(a) - m2.alpha.apply(a);
    let db = m1.rho.apply(b) - m2.rho.apply(b);
    Ok(m1.eta.target.vector_norm(&dx) + m1.alpha.shape().norm(&da) + m1.rho.codomain.norm(&db))
}

/// Coordinate-free distance between parallel morphisms.
pub fn morphism_distance(m1: &PosCorMorphism, m2: &PosCorMorphism, dom: &PosCorObject) -> Result<f64> {
    if m1.dom != m2.dom || m1.cod != m2.cod || dom.label != m1.dom {
        return Err(Error::ObjectMismatch("morphisms are not parallel".into()));
    }
    let eta = map_norm(dom.module(), &m1.eta.target, &(m1.restricted() - m2.restricted()));
    Ok(eta + m1.rho.distance(&m2.rho) + m1.alpha.distance(&m2.alpha))
}

/// `(inc, (ι, 1_A))`.
pub fn poscor_identity(obj: &PosCorObject, tol: &Tolerance) -> Result<PosCorMorphism> {
    let b = obj.coefficient_algebra().clone();
    let rho = StarMap::identity(&b);
    let tensor = tensor_with_algebra(obj.module(), &rho, tol)?;
    let iota = inclusion_on(obj.module(), &tensor);
    let extended = tensor_extend_cp(&obj.phi, &tensor, tol)?;
    Ok(PosCorMorphism {
        dom: obj.label.clone(),
        cod: obj.label.clone(),
        rho,
        eta: ModuleMap::unchecked(tensor.module.clone(), obj.module().clone(), iota)?,
        tensor,
        extended,
        alpha: Automorphism::identity(&obj.phi.algebra),
    })
}

/// `(ρ₂ρ₁, (η₂ ∘ (η₁ ⊗ I) ∘ U⁻¹, α₂α₁))` where `U` identifies
/// `(E ⊗_{ρ₁} C) ⊗_{ρ₂} D` with `E ⊗_{ρ₂ρ₁} D`.
pub fn poscor_compose(m2: &PosCorMorphism, m1: &PosCorMorphism, dom: &PosCorObject, tol: &Tolerance) -> Result<PosCorMorphism> {
    if m1.cod != m2.dom {
        return Err(Error::ObjectMismatch(format!("{} is not {}", m1.cod, m2.dom)));
    }
    if dom.label != m1.dom {
        return Err(Error::ObjectMismatch(format!("domain object {} is not {}", dom.label, m1.dom)));
    }
    let rho = m2.rho.after(&m1.rho)?;
    let outer = tensor_with_algebra(&m1.tensor.module, &m2.rho, tol)?;
    let combined = tensor_with_algebra(dom.module(), &rho, tol)?;
    let u = composition_unitary_on(&m1.tensor, &outer, &combined, &m2.rho)?;
    let u_inv = adjoint_matrix(&outer.module, &combined.module, &u);
    let hat = tensor_map(&m1.eta.matrix, &outer, &m2.tensor, tol)?;
    let eta = &m2.eta.matrix * hat * u_inv;
    let extended = tensor_extend_cp(&dom.phi, &combined, tol)?;
    Ok(PosCorMorphism {
        dom: m1.dom.clone(),
        cod: m2.cod.clone(),
        rho,
        eta: ModuleMap::unchecked(combined.module.clone(), m2.eta.target.clone(), eta)?,
        tensor: combined,
        extended,
        alpha: m2.alpha.after(&m1.alpha)?,
    })
}

/// An object together with its dilation, seen as the object `(F_φ, π_φ)`.
#[derive(Clone, Debug)]
pub struct DilatedObject {
    pub object: PosCorObject,
    pub triple: KsgnsTriple,
}

impl DilatedObject {
    pub fn new(obj: &PosCorObject, tol: &Tolerance) -> Result<Self> {
        let triple = ksgns(&obj.phi, tol)?;
        Ok(DilatedObject { object: PosCorObject { label: format!("ksgns({})", obj.label), phi: triple.representation.clone() }, triple })
    }
}

/// `(ρ, (η̃ ∘ V⁻¹, α))` from `(F_φ, π_φ)` to `(F_ψ, π_ψ)`.
pub fn ksgns_functor_poscor(m: &PosCorMorphism, dom: &DilatedObject, cod: &DilatedObject, tol: &Tolerance) -> Result<PosCorMorphism> {
    let t = &dom.triple;
    let right = tensor_with_algebra(&t.dilation.module, &m.rho, tol)?;
    let data = commuting_unitary_on(t, m.tensor.clone(), m.extended.clone(), right, tol)?;
    let lifted = ksgns_lift(&m.intertwiner(), &data.left, &cod.triple, tol)?;
    let v_inv = adjoint_matrix(&data.left.dilation.module, &data.right.module, &data.unitary);
    let eta = &lifted.eta.matrix * v_inv;
    let extended = tensor_extend_cp(&t.representation, &data.right, tol)?;
    Ok(PosCorMorphism {
        dom: dom.object.label.clone(),
        cod: cod.object.label.clone(),
        rho: m.rho.clone(),
        eta: ModuleMap::unchecked(data.right.module.clone(), cod.triple.dilation.module.clone(), eta)?,
        tensor: data.right,
        extended,
        alpha: m.alpha.clone(),
    })
}

/// `(inc, (V_{π_φ} ∘ ι, 1_A))` from the dilation of an object to the dilation
/// of that dilation.
pub fn idempotency_morphism(once: &DilatedObject, twice: &DilatedObject, tol: &Tolerance) -> Result<PosCorMorphism> {
    let obj = &once.object;
    let mut id = poscor_identity(obj, tol)?;
    let eta = &twice.triple.embedding * &id.eta.matrix;
    id.cod = twice.object.label.clone();
    id.eta = ModuleMap::unchecked(id.tensor.module.clone(), twice.triple.dilation.module.clone(), eta)?;
    Ok(id)
}

/// Maximal residuals of the category laws over a sampled diagram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawReport {
    pub left_identity: f64,
    pub right_identity: f64,
    pub associativity: f64,
    pub composite_invariants: f64,
    /// Indices of morphisms whose own conditions fail.
    pub failing_morphisms: Vec<usize>,
    pub passes: bool,
}

/// Audits identities, associativity, and the morphism conditions of every
/// morphism and every composable pair.
pub fn check_category_laws(objects: &[PosCorObject], morphisms: &[PosCorMorphism], tol: &Tolerance) -> Result<LawReport> {
    let find = |label: &str| -> Result<&PosCorObject> {
        objects.iter().find(|o| o.label == label).ok_or_else(|| Error::ObjectMismatch(format!("unknown object {label}")))
    };
    let mut failing = Vec::new();
    for (i, m) in morphisms.iter().enumerate() {
        if !m.invariants(find(&m.cod)?, tol)?.passes(tol) {
            failing.push(i);
        }
    }
    let mut left = 0.0_f64;
    let mut right = 0.0_f64;
    for (i, m) in morphisms.iter().enumerate() {
        if failing.contains(&i) {
            continue;
        }
        let dom = find(&m.dom)?;
        let cod = find(&m.cod)?;
        let via_dom = poscor_compose(m, &poscor_identity(dom, tol)?, dom, tol)?;
        right = right.max(morphism_distance(&via_dom, m, dom)?);
        let via_cod = poscor_compose(&poscor_identity(cod, tol)?, m, dom, tol)?;
        left = left.max(morphism_distance(&via_cod, m, dom)?);
    }
    let mut assoc = 0.0_f64;
    let mut composite = 0.0_f64;
    for (i, f) in morphisms.iter().enumerate() {
        for (j, g) in morphisms.iter().enumerate() {
            if f.cod != g.dom || failing.contains(&i) || failing.contains(&j) {
                continue;
            }
            let fdom = find(&f.dom)?;
            let gf = poscor_compose(g, f, fdom, tol)?;
            let inv = gf.invariants(find(&gf.cod)?, tol)?;
            if !inv.passes(tol) {
                composite = composite.max(inv.max());
            }
            for (k, h) in morphisms.iter().enumerate() {
                if g.cod != h.dom || failing.contains(&k) {
                    continue;
                }
                let h_gf = poscor_compose(h, &gf, fdom, tol)?;
                let hg = poscor_compose(h, g, find(&g.dom)?, tol)?;
                let hg_f = poscor_compose(&hg, f, fdom, tol)?;
                assoc = assoc.max(morphism_distance(&h_gf, &hg_f, fdom)?);
            }
        }
    }
    let passes = failing.is_empty() && left <= tol.ctol && right <= tol.ctol && assoc <= tol.ctol && composite == 0.0;
    Ok(LawReport {
        left_identity: left,
        right_identity: right,
        associativity: assoc,
        composite_invariants: composite,
        failing_morphisms: failing,
        passes,
    })
}

/// Random object `(E, φ)` with `E` over `B` of dimension at most `max_dim`.
pub fn random_object(
    label: impl Into<String>,
    a: &AlgebraShape,
    b: &AlgebraShape,
    max_dim: usize,
    rng: &mut Rng64,
) -> Result<PosCorObject> {
    let e = std::sync::Arc::new(random_module(b, max_dim, rng)?);
    Ok(PosCorObject { label: label.into(), phi: random_cp(a, &e, rng)? })
}

/// Random morphism out of `dom` into a freshly built codomain.
///
/// The codomain module is `(E ⊗_ρ C) ⊕ E'`, where `E'` is an optional random
/// summand; `ψ` conjugates `φ ⊗ 1` by a random unitary and automorphism on
/// the first summand and is a random CP map on `E'`.
pub fn random_morphism(
    dom: &PosCorObject,
    label: impl Into<String>,
    max_block: usize,
    rng: &mut Rng64,
    tol: &Tolerance,
) -> Result<(PosCorObject, PosCorMorphism)> {
    let (c_shape, rho) = random_hom_and_codomain(dom.coefficient_algebra(), max_block, 2, rng)?;
    let tensor = tensor_with_algebra(dom.module(), &rho, tol)?;
    let extended = tensor_extend_cp(&dom.phi, &tensor, tol)?;
    let alpha = random_automorphism(&dom.phi.algebra, rng);
    let w = random_unitary_map(&tensor.module, rng)?;
    let conj = extended.conjugated(tensor.module.clone(), &w, &alpha, tol)?;
    let (psi, eta) = if coin(rng, 0.5) {
        let extra = std::sync::Arc::new(random_module(&c_shape, 2, rng)?);
        let other = random_cp(&dom.phi.algebra, &extra, rng)?;
        let sum = std::sync::Arc::new(HilbertModule::direct_sum(&tensor.module, &extra)?);
        let (d1, d2) = (tensor.module.dim(), extra.dim());
        let images = conj
            .images
            .iter()
            .zip(&other.images)
            .map(|(x, y)| {
                let mut m = CMatrix::zeros(d1 + d2, d1 + d2);
                m.view_mut((0, 0), (d1, d1)).copy_from(x);
                m.view_mut((d1, d1), (d2, d2)).copy_from(y);
                m
            })
            .collect();
        let mut eta = CMatrix::zeros(d1 + d2, d1);
        eta.view_mut((0, 0), (d1, d1)).copy_from(&w);
        (CPMap::unchecked(dom.phi.algebra.clone(), sum, images)?, eta)
    } else {
        (conj, w)
    };
    let cod = PosCorObject { label: label.into(), phi: psi };
    let m = PosCorMorphism::new(dom, &cod, rho, eta, alpha, tol)?;
    Ok((cod, m))
}
