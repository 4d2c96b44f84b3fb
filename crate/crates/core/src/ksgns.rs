//! The KSGNS dilation of a CP map, the lift of intertwiners through it, and
//! the checks that make its functorial behaviour observable.
//!
//! For `φ: A → L(E)` the dilation lives on `A ⊗ E` (pre-index `p * d_E + q`)
//! with pairing `⟨a ⊗ x, a' ⊗ x'⟩ = ⟨x, φ(a*a') x'⟩`, divided by its null space.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cp::{check_cp, check_morphism, hom_pseudometric, CPMap, Intertwiner};
use crate::cstar::{AlgebraElement, AlgebraShape, Automorphism};
use crate::error::{Error, Result};
use crate::hilbert::{adjoint_matrix, balanced_tensor, descend, map_norm, HilbertModule, ModuleMap, TensorModule};
use crate::numkernel::{identity, kron, numerical_rank, pseudo_inverse, CMatrix, CVector, Tolerance};

/// `(F_φ, π_φ, V_φ)` together with the quotient data of `A ⊗ E`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KsgnsTriple {
    pub source: CPMap,
    pub dilation: TensorModule,
    /// `π_φ`, a unital *-homomorphism into `L(F_φ)`.
    pub representation: CPMap,
    /// `V_φ: E → F_φ`.
    #[serde(with = "crate::numkernel::matrix_serde")]
    pub embedding: CMatrix,
}

impl KsgnsTriple {
    pub fn algebra(&self) -> &AlgebraShape {
        &self.source.algebra
    }

    pub fn dim(&self) -> usize {
        self.dilation.module.dim()
    }

    pub fn embedding_map(&self) -> ModuleMap {
        ModuleMap::unchecked(self.source.module.clone(), self.dilation.module.clone(), self.embedding.clone())
            .expect("embedding shape is fixed at construction")
    }

    /// Largest `‖V* π(E_k) V − φ(E_k)‖`.
    pub fn reconstruction_residual(&self) -> f64 {
        let e = &self.source.module;
        let f = &self.dilation.module;
        let v_adj = adjoint_matrix(e, f, &self.embedding);
        self.representation
            .images
            .iter()
            .zip(&self.source.images)
            .map(|(pi, phi)| map_norm(e, e, &(&v_adj * pi * &self.embedding - phi)))
            .fold(0.0, f64::max)
    }

    /// Columns `π(E_p) V e_q`, realized in orthonormal coordinates of `F_φ`.
    pub fn spanning_matrix(&self) -> CMatrix {
        let de = self.source.module.dim();
        let f = &self.dilation.module;
        let mut cols = CMatrix::zeros(f.dim(), self.algebra().dim() * de);
        for (p, pi) in self.representation.images.iter().enumerate() {
            let block = f.gram_sqrt() * (pi * &self.embedding);
            cols.view_mut((0, p * de), (f.dim(), de)).copy_from(&block);
        }
        cols
    }

    pub fn spanning_rank(&self, tol: &Tolerance) -> usize {
        numerical_rank(&self.spanning_matrix(), tol)
    }

    /// `‖V*[a ⊗ y] − φ(a) y‖` over the pre-basis, as operator norms per `a`.
    pub fn embedding_adjoint_residual(&self) -> f64 {
        let e = &self.source.module;
        let f = &self.dilation.module;
        let de = e.dim();
        let v_adj = adjoint_matrix(e, f, &self.embedding);
        (0..self.algebra().dim())
            .map(|p| {
                let pre = self.dilation.q.columns(p * de, de).into_owned();
                map_norm(e, e, &(&v_adj * pre - &self.source.images[p]))
            })
            .fold(0.0, f64::max)
    }
}

/// Builds the dilation of a CP map, verifying that left multiplication
/// descends and that both defining conditions hold.
pub fn ksgns(phi: &CPMap, tol: &Tolerance) -> Result<KsgnsTriple> {
    let rep = check_cp(phi, tol)?;
    if !rep.is_cp {
        return Err(Error::NotCp { min_eigenvalue: rep.min_eigenvalue() });
    }
    let alg = &phi.algebra;
    let e = &phi.module;
    let a_mod = HilbertModule::over_itself(alg);
    let dilation = balanced_tensor(&a_mod, e, &phi.images, tol)?;
    let f = dilation.module.clone();
    let id_e = identity(e.dim());
    let mut images = Vec::with_capacity(alg.dim());
    for k in 0..alg.dim() {
        let pre = kron(&alg.left_mult_matrix(&alg.basis_vector(k)), &id_e);
        let img = descend(&pre, &dilation, &dilation.q, tol).map_err(|err| match err {
            Error::WellDefinednessViolation { residual } => Error::SubmoduleViolation { residual },
            other => other,
        })?;
        images.push(img);
    }
    let unit = CMatrix::from_column_slice(alg.dim(), 1, alg.unit_coords().as_slice());
    let embedding = &dilation.q * kron(&unit, &id_e);
    let representation = CPMap::unchecked(alg.clone(), f.clone(), images)?;
    let triple = KsgnsTriple { source: phi.clone(), dilation, representation, embedding };
    let rank = triple.spanning_rank(tol);
    if rank != f.dim() {
        return Err(Error::SpanningFailure { rank, dim: f.dim() });
    }
    let recon = triple.reconstruction_residual();
    if recon > tol.threshold(phi.norm()) {
        return Err(Error::Validation(format!("dilation does not reconstruct the map (residual {recon:e})")));
    }
    Ok(triple)
}

/// Pre-space operator `M_α ⊗ η` on `A ⊗ E₁ → A ⊗ E₂`.
fn lift_premap(m: &Intertwiner) -> CMatrix {
    kron(&m.alpha.map.matrix, &m.eta.matrix)
}

/// `η̃ [a ⊗ x] = [α(a) ⊗ η x]`, paired with the same automorphism.
pub fn ksgns_lift(m: &Intertwiner, t1: &KsgnsTriple, t2: &KsgnsTriple, tol: &Tolerance) -> Result<Intertwiner> {
    if m.eta.matrix.ncols() != t1.source.module.dim() || m.eta.matrix.nrows() != t2.source.module.dim() {
        return Err(Error::ShapeMismatch("morphism does not connect the dilated maps".into()));
    }
    let tilde = descend(&lift_premap(m), &t1.dilation, &t2.dilation.q, tol)?;
    Ok(Intertwiner { eta: ModuleMap::unchecked(t1.dilation.module.clone(), t2.dilation.module.clone(), tilde)?, alpha: m.alpha.clone() })
}

/// Residuals of the properties a lifted morphism must satisfy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftReport {
    /// `‖η̃‖ − ‖η‖`, which must not be positive beyond tolerance.
    pub norm_excess: f64,
    /// `η̃*[a ⊗ y] = [α⁻¹(a) ⊗ η* y]` on the pre-basis.
    pub adjoint_formula: f64,
    /// Intertwining of the representations.
    pub morphism: f64,
    pub morphism_threshold: f64,
    /// `η̃ V₁ = V₂ η`.
    pub embedding_naturality: f64,
}

impl LiftReport {
    pub fn passes(&self, tol: &Tolerance, eta_norm: f64) -> bool {
        let thr = tol.threshold(eta_norm);
        self.norm_excess <= thr
            && self.adjoint_formula <= thr
            && self.morphism <= self.morphism_threshold
            && self.embedding_naturality <= thr
    }
}

pub fn check_lift(m: &Intertwiner, lifted: &Intertwiner, t1: &KsgnsTriple, t2: &KsgnsTriple, tol: &Tolerance) -> Result<LiftReport> {
    let e1 = &t1.source.module;
    let e2 = &t2.source.module;
    let f1 = &t1.dilation.module;
    let f2 = &t2.dilation.module;
    let eta = &m.eta.matrix;
    let tilde = &lifted.eta.matrix;
    let norm_excess = map_norm(f1, f2, tilde) - map_norm(e1, e2, eta);
    let tilde_adj = adjoint_matrix(f1, f2, tilde);
    let expected = &t1.dilation.q * kron(&m.alpha.inverse.matrix, &adjoint_matrix(e1, e2, eta));
    let adjoint_formula = crate::numkernel::operator_norm_unchecked(&(f1.gram_sqrt() * (tilde_adj * &t2.dilation.q - expected)));
    let morph = check_morphism(lifted, &t1.representation, &t2.representation, tol)?;
    let embedding_naturality = map_norm(e1, f2, &(tilde * &t1.embedding - &t2.embedding * eta));
    Ok(LiftReport { norm_excess, adjoint_formula, morphism: morph.max(), morphism_threshold: morph.threshold, embedding_naturality })
}

/// Dilation of `(F_φ, π_φ)` and its embedding `F_φ → F_{π_φ}`, which is a
/// unitary because `π_φ` is a unital *-homomorphism.
pub fn idempotency_unitary(t: &KsgnsTriple, tol: &Tolerance) -> Result<(KsgnsTriple, ModuleMap)> {
    let second = ksgns(&t.representation, tol)?;
    let map = second.embedding_map();
    Ok((second, map))
}

/// Solves for the `B`-linear map `U: F_φ → F'` with `U π_φ(a) V_φ = π'(a) V'`,
/// using that the vectors `π_φ(a_p) V_φ e_q` span `F_φ`.
pub fn uniqueness_unitary(t: &KsgnsTriple, pi_prime: &[CMatrix], v_prime: &CMatrix, tol: &Tolerance) -> Result<CMatrix> {
    let alg = t.algebra();
    let de = t.source.module.dim();
    if pi_prime.len() != alg.dim() || v_prime.ncols() != de {
        return Err(Error::ShapeMismatch("second triple does not match".into()));
    }
    let df = t.dim();
    let dp = v_prime.nrows();
    let mut x = CMatrix::zeros(df, alg.dim() * de);
    let mut y = CMatrix::zeros(dp, alg.dim() * de);
    for p in 0..alg.dim() {
        x.view_mut((0, p * de), (df, de)).copy_from(&(&t.representation.images[p] * &t.embedding));
        y.view_mut((0, p * de), (dp, de)).copy_from(&(&pi_prime[p] * v_prime));
    }
    Ok(y * pseudo_inverse(&x, tol)?)
}

/// Distances of a path of morphisms to its limit, before and after lifting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub input_distances: Vec<f64>,
    pub lifted_distances: Vec<f64>,
    /// Largest observed ratio lifted / input over steps with nonzero input.
    pub constant_estimate: f64,
    /// `10·max(1, ‖η‖·‖φ₂‖)`.
    pub constant_bound: f64,
    pub final_distance: f64,
    pub passes: bool,
}

/// Lifts every morphism of `path` and of its `limit`, and compares the
/// pseudo-metric distances on samples `(x, a)` with their lifted versions
/// on `(V x, a)` and `(π(a) V x, a)`.
pub fn continuity_probe(
    path: &[Intertwiner],
    limit: &Intertwiner,
    t1: &KsgnsTriple,
    t2: &KsgnsTriple,
    samples: &[(CVector, CVector)],
    tol: &Tolerance,
) -> Result<ContinuityReport> {
    if path.is_empty() || samples.is_empty() {
        return Err(Error::InvalidConfig("continuity probe needs a path and samples".into()));
    }
    let lim_lift = ksgns_lift(limit, t1, t2, tol)?;
    let pushed: Vec<(CVector, CVector)> = samples
        .iter()
        .flat_map(|(x, a)| {
            let vx = &t1.embedding * x;
            let pvx = t1.representation.apply(a) * &vx;
            [(vx, a.clone()), (pvx, a.clone())]
        })
        .collect();
    let mut input = Vec::with_capacity(path.len());
    let mut lifted = Vec::with_capacity(path.len());
    for m in path {
        let report = check_morphism(m, &t1.source, &t2.source, tol)?;
        if !report.passes() {
            return Err(Error::Validation(format!("path element is not a morphism (residual {:e})", report.max())));
        }
        let lm = ksgns_lift(m, t1, t2, tol)?;
        let mut d_in = 0.0_f64;
        for (x, a) in samples {
            d_in = d_in.max(hom_pseudometric(m, limit, x, a)?);
        }
        let mut d_out = 0.0_f64;
        for (x, a) in &pushed {
            d_out = d_out.max(hom_pseudometric(&lm, &lim_lift, x, a)?);
        }
        input.push(d_in);
        lifted.push(d_out);
    }
    let last_in = *input.last().expect("nonempty path");
    if last_in > 10.0 * tol.ctol {
        return Err(Error::NonConvergentInput { final_distance: last_in });
    }
    let sample_scale = samples
        .iter()
        .map(|(_, a)| {
            let pa = t1.representation.apply(a);
            1.0 + map_norm(&t1.dilation.module, &t1.dilation.module, &pa)
        })
        .fold(1.0, f64::max);
    let constant_estimate = input.iter().zip(&lifted).filter(|(i, _)| **i > 0.0).map(|(i, o)| o / i).fold(0.0, f64::max);
    let eta_norm = limit.eta.norm();
    let constant_bound = 10.0 * sample_scale * 1f64.max(eta_norm * t2.source.norm());
    let final_distance = *lifted.last().expect("nonempty path");
    let zero_ok = input.iter().zip(&lifted).all(|(i, o)| *i > 0.0 || *o <= tol.threshold(eta_norm));
    let passes = constant_estimate <= constant_bound && final_distance <= 10.0 * tol.ctol && zero_ok;
    Ok(ContinuityReport { input_distances: input, lifted_distances: lifted, constant_estimate, constant_bound, final_distance, passes })
}

/// Step sizes `10^{-t/2}` for `t = 1..=steps`.
pub fn geometric_schedule(steps: usize) -> Vec<f64> {
    (1..=steps).map(|t| 10f64.powf(-(t as f64) / 2.0)).collect()
}

/// `m_t = (η + ε_t·η', α)` along the geometric schedule.
pub fn linear_path(limit: &Intertwiner, direction: &CMatrix, steps: usize) -> Result<Vec<Intertwiner>> {
    geometric_schedule(steps)
        .into_iter()
        .map(|eps| {
            Ok(Intertwiner {
                eta: ModuleMap::unchecked(
                    limit.eta.source.clone(),
                    limit.eta.target.clone(),
                    &limit.eta.matrix + direction * crate::numkernel::c(eps, 0.0),
                )?,
                alpha: limit.alpha.clone(),
            })
        })
        .collect()
}

/// `exp(iεH)` blockwise for Hermitian blocks `h`.
pub fn exp_i_hermitian(shape: &AlgebraShape, h: &[CMatrix], eps: f64) -> Result<AlgebraElement> {
    let blocks = h
        .iter()
        .map(|hb| {
            let eig = hb.clone().symmetric_eigen();
            let phases = CMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::from_polar(1.0, eps * l)));
            &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
        })
        .collect();
    AlgebraElement::new(shape.clone(), blocks)
}

/// Morphisms `(η φ₁(u_t), α ∘ Ad u_t)` with `u_t = exp(iε_t H)`, converging to
/// `(η, α)`. They intertwine when `φ₁` is a *-homomorphism.
pub fn inner_path(limit: &Intertwiner, phi1: &CPMap, h: &[CMatrix], steps: usize) -> Result<Vec<Intertwiner>> {
    geometric_schedule(steps)
        .into_iter()
        .map(|eps| {
            let u = exp_i_hermitian(&phi1.algebra, h, eps)?;
            let ad = Automorphism::inner(&u)?;
            Ok(Intertwiner {
                eta: ModuleMap::unchecked(limit.eta.source.clone(), limit.eta.target.clone(), &limit.eta.matrix * phi1.apply(&u.coords()))?,
                alpha: limit.alpha.after(&ad)?,
            })
        })
        .collect()
}
