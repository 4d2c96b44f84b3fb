//! Finite-group actions, equivariant CP maps and their covariant dilation.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cp::{random_cp, CPMap};
use crate::cstar::{AlgebraShape, Automorphism};
use crate::error::{Error, Result};
use crate::hilbert::{
    adjoint_matrix, descend, map_norm, random_coordinate_change, random_unitary_map, tensor_with_algebra, twisted_pairing_residual,
    unitarity_residual, v_rho, HilbertModule, ModuleMap, ModuleRef,
};
use crate::ksgns::{ksgns, uniqueness_unitary, KsgnsTriple};
use crate::numkernel::{c, identity, kron, pseudo_inverse, CMatrix, CVector, Tolerance};
use crate::poscor::{
    ksgns_functor_poscor, morphism_distance, poscor_compose, poscor_identity, DilatedObject, PosCorMorphism, PosCorObject,
};
use crate::random::{haar_unitary, index, Rng64};

/// A finite group given by its multiplication table, `table[g][h] = gh`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GroupWire", into = "GroupWire")]
pub struct FiniteGroup {
    name: String,
    table: Vec<Vec<usize>>,
    identity: usize,
    inverse: Vec<usize>,
}

#[derive(Clone, Serialize, Deserialize)]
struct GroupWire {
    name: String,
    table: Vec<Vec<usize>>,
}

impl TryFrom<GroupWire> for FiniteGroup {
    type Error = Error;

    fn try_from(w: GroupWire) -> Result<Self> {
        FiniteGroup::from_table(w.name, w.table)
    }
}

impl From<FiniteGroup> for GroupWire {
    fn from(g: FiniteGroup) -> Self {
        GroupWire { name: g.name, table: g.table }
    }
}

impl FiniteGroup {
    /// Validates closure, associativity, identity and inverses exactly.
    pub fn from_table(name: impl Into<String>, table: Vec<Vec<usize>>) -> Result<Self> {
        let n = table.len();
        if n == 0 || table.iter().any(|row| row.len() != n || row.iter().any(|&x| x >= n)) {
            return Err(Error::InvalidConfig("multiplication table is not square over its elements".into()));
        }
        for a in 0..n {
            for b in 0..n {
                for cc in 0..n {
                    if table[table[a][b]][cc] != table[a][table[b][cc]] {
                        return Err(Error::InvalidConfig("multiplication table is not associative".into()));
                    }
                }
            }
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|g| table[e][g] == g && table[g][e] == g))
            .ok_or_else(|| Error::InvalidConfig("no identity element".into()))?;
        let inverse = (0..n)
            .map(|g| {
                (0..n)
                    .find(|&h| table[g][h] == identity && table[h][g] == identity)
                    .ok_or_else(|| Error::InvalidConfig(format!("element {g} has no inverse")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FiniteGroup { name: name.into(), table, identity, inverse })
    }

    pub fn trivial() -> Self {
        FiniteGroup::cyclic(1)
    }

    pub fn cyclic(n: usize) -> Self {
        let table = (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect();
        FiniteGroup::from_table(format!("Z{n}"), table).expect("cyclic table is a group")
    }

    /// Group of all permutations of `n` points, composed as functions.
    pub fn symmetric(n: usize) -> Self {
        let perms = permutations(n);
        let pos = |p: &Vec<usize>| perms.iter().position(|q| q == p).expect("closed under composition");
        let table = perms.iter().map(|a| perms.iter().map(|b| pos(&b.iter().map(|&i| a[i]).collect())).collect()).collect();
        FiniteGroup::from_table(format!("S{n}"), table).expect("permutation table is a group")
    }

    /// Symmetries of a regular `n`-gon, order `2n`.
    pub fn dihedral(n: usize) -> Self {
        // Element (s, r) stands for flip^s · rot^r.
        let idx = |s: usize, r: usize| s * n + r;
        let mut table = vec![vec![0; 2 * n]; 2 * n];
        for s1 in 0..2 {
            for r1 in 0..n {
                for s2 in 0..2 {
                    for r2 in 0..n {
                        let r = if s2 == 0 { (r1 + r2) % n } else { (n - r1 % n + r2) % n };
                        table[idx(s1, r1)][idx(s2, r2)] = idx((s1 + s2) % 2, r);
                    }
                }
            }
        }
        FiniteGroup::from_table(format!("D{n}"), table).expect("dihedral table is a group")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn order(&self) -> usize {
        self.table.len()
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn mul(&self, g: usize, h: usize) -> usize {
        self.table[g][h]
    }

    pub fn inv(&self, g: usize) -> usize {
        self.inverse[g]
    }

    pub fn table(&self) -> &[Vec<usize>] {
        &self.table
    }

    /// Subgroup generated by `gens`.
    pub fn closure(&self, gens: &[usize]) -> BTreeSet<usize> {
        let mut set: BTreeSet<usize> = BTreeSet::from([self.identity]);
        let mut frontier: Vec<usize> = vec![self.identity];
        while let Some(x) = frontier.pop() {
            for &g in gens {
                let y = self.mul(x, g);
                if set.insert(y) {
                    frontier.push(y);
                }
            }
        }
        set
    }

    /// All subgroups, found as closures of subsets of at most three elements.
    pub fn subgroups(&self) -> Vec<BTreeSet<usize>> {
        let n = self.order();
        let mut out: Vec<BTreeSet<usize>> = Vec::new();
        let mut push = |s: BTreeSet<usize>| {
            if !out.contains(&s) {
                out.push(s);
            }
        };
        for a in 0..n {
            for b in a..n {
                for cc in b..n {
                    push(self.closure(&[a, b, cc]));
                }
            }
        }
        out.sort_by_key(|s| (s.len(), s.iter().copied().collect::<Vec<_>>()));
        out
    }

    /// Left cosets `gH`, each sorted, in order of their smallest element.
    pub fn cosets(&self, h: &BTreeSet<usize>) -> Vec<BTreeSet<usize>> {
        let mut out: Vec<BTreeSet<usize>> = Vec::new();
        for g in 0..self.order() {
            let coset: BTreeSet<usize> = h.iter().map(|&x| self.mul(g, x)).collect();
            if !out.contains(&coset) {
                out.push(coset);
            }
        }
        out
    }

    /// Left multiplication on the cosets of `h`, one permutation per element.
    pub fn coset_action(&self, h: &BTreeSet<usize>) -> Vec<Vec<usize>> {
        let cosets = self.cosets(h);
        (0..self.order())
            .map(|g| {
                cosets
                    .iter()
                    .map(|cs| {
                        let rep = *cs.iter().next().expect("cosets are nonempty");
                        let image = self.mul(g, rep);
                        cosets.iter().position(|d| d.contains(&image)).expect("cosets partition the group")
                    })
                    .collect()
            })
            .collect()
    }

    /// Random action on `n` points as a disjoint union of coset actions.
    pub fn random_permutation_action(&self, n: usize, rng: &mut Rng64) -> Vec<Vec<usize>> {
        let subgroups = self.subgroups();
        let mut perms: Vec<Vec<usize>> = vec![Vec::new(); self.order()];
        let mut used = 0;
        while used < n {
            let fits: Vec<&BTreeSet<usize>> = subgroups.iter().filter(|h| self.order() / h.len() <= n - used).collect();
            let h = fits[index(rng, fits.len())];
            let action = self.coset_action(h);
            for (g, p) in action.iter().enumerate() {
                perms[g].extend(p.iter().map(|&i| i + used));
            }
            used += self.order() / h.len();
        }
        perms
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

/// Permutation matrix with `e_i ↦ e_{p(i)}`.
pub fn permutation_matrix(p: &[usize]) -> CMatrix {
    let n = p.len();
    let mut m = CMatrix::zeros(n, n);
    for (i, &j) in p.iter().enumerate() {
        m[(j, i)] = c(1.0, 0.0);
    }
    m
}

/// `(A, G, α)` with one automorphism per group element.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicalSystem {
    pub algebra: AlgebraShape,
    pub action: Vec<Automorphism>,
}

impl DynamicalSystem {
    pub fn trivial(algebra: &AlgebraShape, group: &FiniteGroup) -> Self {
        DynamicalSystem { algebra: algebra.clone(), action: vec![Automorphism::identity(algebra); group.order()] }
    }

    /// `max(‖α_e − id‖, max ‖α_g α_h − α_{gh}‖)`.
    pub fn action_residual(&self, group: &FiniteGroup) -> Result<f64> {
        if self.action.len() != group.order() {
            return Err(Error::ShapeMismatch("one automorphism per group element expected".into()));
        }
        let mut worst = self.action[group.identity()].distance(&Automorphism::identity(&self.algebra));
        for g in 0..group.order() {
            for h in 0..group.order() {
                let gh = self.action[g].after(&self.action[h])?;
                worst = worst.max(gh.distance(&self.action[group.mul(g, h)]));
            }
        }
        Ok(worst)
    }
}

/// Random action of `group` on `shape`: blocks of equal size are permuted by
/// a random permutation action, and inside blocks the group acts by
/// conjugation with a unitary permutation representation in random bases.
pub fn random_action(shape: &AlgebraShape, group: &FiniteGroup, rng: &mut Rng64) -> Result<DynamicalSystem> {
    let blocks = shape.blocks();
    let k = blocks.len();
    let mut block_perm: Vec<Vec<usize>> = vec![(0..k).collect(); group.order()];
    let mut inner_rep: Vec<Vec<CMatrix>> = vec![Vec::new(); k];
    let sizes: BTreeSet<usize> = blocks.iter().copied().collect();
    for &size in &sizes {
        let members: Vec<usize> = (0..k).filter(|&i| blocks[i] == size).collect();
        let on_blocks = group.random_permutation_action(members.len(), rng);
        let on_points = group.random_permutation_action(size, rng);
        for g in 0..group.order() {
            for (j, &i) in members.iter().enumerate() {
                block_perm[g][i] = members[on_blocks[g][j]];
            }
        }
        for &i in &members {
            inner_rep[i] = on_points.iter().map(|p| permutation_matrix(p)).collect();
        }
    }
    let bases: Vec<CMatrix> = blocks.iter().map(|&n| haar_unitary(rng, n)).collect();
    let action = (0..group.order())
        .map(|g| {
            let unitaries: Vec<CMatrix> = (0..k).map(|i| &bases[block_perm[g][i]] * &inner_rep[i][g] * bases[i].adjoint()).collect();
            Automorphism::from_parts(shape, &block_perm[g], &unitaries)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DynamicalSystem { algebra: shape.clone(), action })
}

/// A CP map `φ: A → L(E)` with `β_g`-adjointable unitaries `U_g` on `E`
/// satisfying `U_g φ(a) = φ(α_g(a)) U_g`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EquivariantCorrespondence {
    pub group: FiniteGroup,
    pub source: DynamicalSystem,
    pub coefficients: DynamicalSystem,
    pub phi: CPMap,
    #[serde(with = "crate::numkernel::matrix_vec_serde")]
    pub unitaries: Vec<CMatrix>,
}

/// Residuals of the equivariance conditions, with the element where the
/// largest one occurs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivariantReport {
    pub actions: f64,
    pub identity: f64,
    pub homomorphism: f64,
    pub twisted_linearity: f64,
    pub pairing_twist: f64,
    pub covariance: f64,
    pub threshold: f64,
    pub worst_check: String,
    pub worst_element: usize,
}

impl EquivariantReport {
    pub fn max(&self) -> f64 {
        [self.actions, self.identity, self.homomorphism, self.twisted_linearity, self.pairing_twist, self.covariance]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn passes(&self) -> bool {
        self.max() <= self.threshold
    }
}

pub fn check_equivariant(cor: &EquivariantCorrespondence, tol: &Tolerance) -> Result<EquivariantReport> {
    let g_ord = cor.group.order();
    let e = &cor.phi.module;
    let d = e.dim();
    if cor.unitaries.len() != g_ord || cor.unitaries.iter().any(|u| u.shape() != (d, d)) {
        return Err(Error::ShapeMismatch("one unitary on the module per group element expected".into()));
    }
    if cor.source.algebra != cor.phi.algebra || cor.coefficients.algebra != *e.algebra() {
        return Err(Error::ShapeMismatch("actions do not match the map".into()));
    }
    let mut worst = (0.0_f64, String::from("actions"), cor.group.identity());
    let mut note = |r: f64, name: &str, g: usize| {
        if r > worst.0 {
            worst = (r, name.to_string(), g);
        }
        r
    };
    let actions =
        note(cor.source.action_residual(&cor.group)?.max(cor.coefficients.action_residual(&cor.group)?), "actions", cor.group.identity());
    let identity_res = note(map_norm(e, e, &(&cor.unitaries[cor.group.identity()] - identity(d))), "identity", cor.group.identity());
    let alg_a = &cor.phi.algebra;
    let alg_b = e.algebra();
    let mut hom = 0.0_f64;
    let mut lin = 0.0_f64;
    let mut pair = 0.0_f64;
    let mut cov = 0.0_f64;
    let mut unorm = 0.0_f64;
    for g in 0..g_ord {
        let u = &cor.unitaries[g];
        unorm = unorm.max(map_norm(e, e, u));
        for h in 0..g_ord {
            let r = map_norm(e, e, &(u * &cor.unitaries[h] - &cor.unitaries[cor.group.mul(g, h)]));
            hom = hom.max(note(r, "homomorphism", g));
        }
        let beta = &cor.coefficients.action[g];
        for k in 0..alg_b.dim() {
            let rb = e.action_of(&beta.apply(&alg_b.basis_vector(k)));
            lin = lin.max(note(map_norm(e, e, &(u * &e.action()[k] - rb * u)), "twisted_linearity", g));
        }
        pair = pair.max(note(twisted_pairing_residual(e, e, beta, u), "pairing_twist", g));
        let alpha = &cor.source.action[g];
        for k in 0..alg_a.dim() {
            let lhs = u * &cor.phi.images[k];
            let rhs = cor.phi.apply(&alpha.apply(&alg_a.basis_vector(k))) * u;
            cov = cov.max(note(map_norm(e, e, &(lhs - rhs)), "covariance", g));
        }
    }
    let scale = unorm * unorm * 1f64.max(cor.phi.norm());
    Ok(EquivariantReport {
        actions,
        identity: identity_res,
        homomorphism: hom,
        twisted_linearity: lin,
        pairing_twist: pair,
        covariance: cov,
        threshold: tol.threshold(scale),
        worst_check: worst.1,
        worst_element: worst.2,
    })
}

/// `a ↦ (1/|G|) Σ_h U_h φ₀(α_h⁻¹(a)) U_h⁻¹`, the covariant part of `φ₀`.
pub fn average_cp(phi0: &CPMap, group: &FiniteGroup, alpha: &DynamicalSystem, unitaries: &[CMatrix], tol: &Tolerance) -> Result<CPMap> {
    let alg = &phi0.algebra;
    let d = phi0.module.dim();
    let weight = c(1.0 / group.order() as f64, 0.0);
    let inverses = unitaries.iter().map(|u| pseudo_inverse(u, tol)).collect::<Result<Vec<_>>>()?;
    let images = (0..alg.dim())
        .map(|k| {
            let mut acc = CMatrix::zeros(d, d);
            for h in 0..group.order() {
                let a = alpha.action[h].apply_inverse(&alg.basis_vector(k));
                acc += &unitaries[h] * phi0.apply(&a) * &inverses[h];
            }
            acc * weight
        })
        .collect();
    CPMap::unchecked(alg.clone(), phi0.module.clone(), images)
}

/// `B^{⊕n}` with `U_g = P(g) ⊗ β_g` for a permutation action `P` on `n` copies.
pub fn covariant_module(beta: &DynamicalSystem, perms: &[Vec<usize>]) -> Result<(HilbertModule, Vec<CMatrix>)> {
    let n = perms.first().map(|p| p.len()).unwrap_or(0);
    if n == 0 {
        return Err(Error::InvalidConfig("module needs at least one copy".into()));
    }
    let one = HilbertModule::over_itself(&beta.algebra);
    let mut module = one.clone();
    for _ in 1..n {
        module = HilbertModule::direct_sum(&module, &one)?;
    }
    let unitaries = perms.iter().zip(&beta.action).map(|(p, b)| kron(&permutation_matrix(p), &b.map.matrix)).collect();
    Ok((module, unitaries))
}

/// Random equivariant CP map: random actions on `A` and `B`, the module
/// `B^{⊕n}` in random coordinates, and a group-averaged random CP map.
pub fn random_equivariant(
    a: &AlgebraShape,
    b: &AlgebraShape,
    group: &FiniteGroup,
    max_dim: usize,
    rng: &mut Rng64,
    tol: &Tolerance,
) -> Result<EquivariantCorrespondence> {
    let db = b.dim();
    if db > max_dim {
        return Err(Error::InvalidConfig(format!("coefficient algebra of dimension {db} exceeds the module cap {max_dim}")));
    }
    let source = random_action(a, group, rng)?;
    let coefficients = random_action(b, group, rng)?;
    let copies = 1 + index(rng, max_dim / db);
    let perms = group.random_permutation_action(copies, rng);
    let (std, us) = covariant_module(&coefficients, &perms)?;
    let t = random_coordinate_change(rng, std.dim());
    let t_inv = pseudo_inverse(&t, tol)?;
    let module: ModuleRef = Arc::new(std.transport(&t, tol)?);
    let unitaries: Vec<CMatrix> = us.iter().map(|u| &t * u * &t_inv).collect();
    let phi0 = random_cp(a, &module, rng)?;
    let phi = average_cp(&phi0, group, &source, &unitaries, tol)?;
    Ok(EquivariantCorrespondence { group: group.clone(), source, coefficients, phi, unitaries })
}

/// The per-element morphisms `(β_g, (U_g ∘ V_{β_g}⁻¹, α_g))` of the functor
/// determined by an equivariant correspondence, with their law residuals.
#[derive(Clone, Debug)]
pub struct FunctorData {
    pub object: PosCorObject,
    pub morphisms: Vec<PosCorMorphism>,
    /// `max ‖F(g)∘F(h) − F(gh)‖`.
    pub composition: f64,
    /// `‖F(e) − id‖`.
    pub identity: f64,
    /// Largest unitarity residual of the `η_g`.
    pub unitarity: f64,
    /// `max ‖η_g ∘ V_{β_g} − U_g‖`.
    pub round_trip: f64,
}

pub fn correspondence_to_functor(cor: &EquivariantCorrespondence, tol: &Tolerance) -> Result<FunctorData> {
    let object = PosCorObject { label: "E".into(), phi: cor.phi.clone() };
    let e = cor.phi.module.clone();
    let mut morphisms = Vec::with_capacity(cor.group.order());
    let mut unitarity = 0.0_f64;
    let mut round_trip = 0.0_f64;
    for g in 0..cor.group.order() {
        let beta = &cor.coefficients.action[g];
        let t = tensor_with_algebra(&e, &beta.map, tol)?;
        let v = v_rho(&t);
        let eta = &cor.unitaries[g] * pseudo_inverse(&v, tol)?;
        let m = PosCorMorphism::unchecked(&object, &object, beta.map.clone(), eta, cor.source.action[g].clone(), tol)?;
        unitarity = unitarity.max(m.eta.unitarity_residual());
        round_trip = round_trip.max(map_norm(&e, &e, &(&m.eta.matrix * &v - &cor.unitaries[g])));
        morphisms.push(m);
    }
    let mut composition = 0.0_f64;
    for g in 0..cor.group.order() {
        for h in 0..cor.group.order() {
            let gh = poscor_compose(&morphisms[g], &morphisms[h], &object, tol)?;
            composition = composition.max(morphism_distance(&gh, &morphisms[cor.group.mul(g, h)], &object)?);
        }
    }
    let id = poscor_identity(&object, tol)?;
    let identity = morphism_distance(&morphisms[cor.group.identity()], &id, &object)?;
    Ok(FunctorData { object, morphisms, composition, identity, unitarity, round_trip })
}

/// A dilation triple `(F, π, V)` with unitaries `Ũ_g` on `F`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DilationQuadruple {
    pub triple: KsgnsTriple,
    #[serde(with = "crate::numkernel::matrix_vec_serde")]
    pub unitaries: Vec<CMatrix>,
}

impl DilationQuadruple {
    /// Conjugate by a `B`-linear unitary `Z` on `F`: `π' = ZπZ*`, `V' = ZV`, `Ũ' = ZŨZ*`.
    pub fn conjugated(&self, z: &CMatrix) -> Result<DilationQuadruple> {
        let f = &self.triple.dilation.module;
        let z_adj = adjoint_matrix(f, f, z);
        let images = self.triple.representation.images.iter().map(|p| z * p * &z_adj).collect();
        let mut triple = self.triple.clone();
        triple.representation = CPMap::unchecked(triple.representation.algebra.clone(), f.clone(), images)?;
        triple.embedding = z * &self.triple.embedding;
        Ok(DilationQuadruple { triple, unitaries: self.unitaries.iter().map(|u| z * u * &z_adj).collect() })
    }

    /// The dilated data `((F, π), Ũ)` as an equivariant correspondence.
    pub fn as_correspondence(&self, cor: &EquivariantCorrespondence) -> EquivariantCorrespondence {
        EquivariantCorrespondence {
            group: cor.group.clone(),
            source: cor.source.clone(),
            coefficients: cor.coefficients.clone(),
            phi: self.triple.representation.clone(),
            unitaries: self.unitaries.clone(),
        }
    }
}

/// `Ũ_g [a ⊗ x] = [α_g(a) ⊗ U_g x]` on the dilation of `φ`.
pub fn dilate(cor: &EquivariantCorrespondence, tol: &Tolerance) -> Result<DilationQuadruple> {
    let triple = ksgns(&cor.phi, tol)?;
    let unitaries = (0..cor.group.order())
        .map(|g| {
            let pre = kron(&cor.source.action[g].map.matrix, &cor.unitaries[g]);
            descend(&pre, &triple.dilation, &triple.dilation.q, tol)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DilationQuadruple { triple, unitaries })
}

/// `Ũ_g = η'_g ∘ V'_{β_g}` where `(β_g, (η'_g, α_g))` is the image of the
/// morphism of `g` under the dilation functor.
pub fn categorical_unitaries(cor: &EquivariantCorrespondence, triple: &KsgnsTriple, tol: &Tolerance) -> Result<Vec<CMatrix>> {
    let functor = correspondence_to_functor(cor, tol)?;
    let dil = DilatedObject {
        object: PosCorObject { label: format!("ksgns({})", functor.object.label), phi: triple.representation.clone() },
        triple: triple.clone(),
    };
    functor
        .morphisms
        .iter()
        .map(|m| {
            let lifted = ksgns_functor_poscor(m, &dil, &dil, tol)?;
            Ok(&lifted.eta.matrix * v_rho(&lifted.tensor))
        })
        .collect()
}

/// Residuals of the four dilation conditions and the gap between the two
/// constructions of `Ũ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DilationReport {
    pub equivariance: EquivariantReport,
    pub spanning_rank: usize,
    pub dim: usize,
    pub reconstruction: f64,
    pub embedding_covariance: f64,
    pub direct_vs_categorical: f64,
    pub threshold: f64,
}

impl DilationReport {
    pub fn max(&self) -> f64 {
        self.equivariance.max().max(self.reconstruction).max(self.embedding_covariance).max(self.direct_vs_categorical)
    }

    pub fn passes(&self) -> bool {
        self.equivariance.passes() && self.spanning_rank == self.dim && self.max() <= self.threshold
    }
}

pub fn check_dilation(cor: &EquivariantCorrespondence, q: &DilationQuadruple, tol: &Tolerance) -> Result<DilationReport> {
    let equivariance = check_equivariant(&q.as_correspondence(cor), tol)?;
    let e = &cor.phi.module;
    let f = &q.triple.dilation.module;
    let categorical = categorical_unitaries(cor, &q.triple, tol)?;
    let mut embedding_covariance = 0.0_f64;
    let mut gap = 0.0_f64;
    for g in 0..cor.group.order() {
        let lhs = &q.triple.embedding * &cor.unitaries[g];
        let rhs = &q.unitaries[g] * &q.triple.embedding;
        embedding_covariance = embedding_covariance.max(map_norm(e, f, &(lhs - rhs)));
        gap = gap.max(map_norm(f, f, &(&q.unitaries[g] - &categorical[g])));
    }
    Ok(DilationReport {
        equivariance,
        spanning_rank: q.triple.spanning_rank(tol),
        dim: f.dim(),
        reconstruction: q.triple.reconstruction_residual(),
        embedding_covariance,
        direct_vs_categorical: gap,
        threshold: tol.threshold(1f64.max(cor.phi.norm())),
    })
}

/// Residuals of the unitary identifying two dilations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub unitarity: f64,
    pub representation: f64,
    pub embedding: f64,
    pub unitaries: f64,
}

impl UniquenessReport {
    pub fn max(&self) -> f64 {
        self.unitarity.max(self.representation).max(self.embedding).max(self.unitaries)
    }
}

/// Solves `W π'(a_p) V' e_q = π(a_p) V e_q` for `W: F' → F`.
pub fn dilation_uniqueness(q1: &DilationQuadruple, q2: &DilationQuadruple, tol: &Tolerance) -> Result<(ModuleMap, UniquenessReport)> {
    for t in [&q1.triple, &q2.triple] {
        let rank = t.spanning_rank(tol);
        if rank < t.dim() {
            return Err(Error::SpanningFailure { rank, dim: t.dim() });
        }
    }
    let w = uniqueness_unitary(&q2.triple, &q1.triple.representation.images, &q1.triple.embedding, tol)?;
    let (f1, f2) = (&q1.triple.dilation.module, &q2.triple.dilation.module);
    let e = &q1.triple.source.module;
    let w_adj = adjoint_matrix(f2, f1, &w);
    let conj_gap =
        |xs: &[CMatrix], ys: &[CMatrix]| xs.iter().zip(ys).map(|(x1, x2)| map_norm(f1, f1, &(&w * x2 * &w_adj - x1))).fold(0.0, f64::max);
    let report = UniquenessReport {
        unitarity: unitarity_residual(f2, f1, &w),
        representation: conj_gap(&q1.triple.representation.images, &q2.triple.representation.images),
        embedding: map_norm(e, f1, &(&w * &q2.triple.embedding - &q1.triple.embedding)),
        unitaries: conj_gap(&q1.unitaries, &q2.unitaries),
    };
    Ok((ModuleMap::unchecked(f2.clone(), f1.clone(), w)?, report))
}

/// A second dilation `ZπZ*, ZV, ZŨZ*` for a random `B`-linear unitary `Z`,
/// returned with `Z`.
pub fn planted_quadruple(q: &DilationQuadruple, rng: &mut Rng64) -> Result<(DilationQuadruple, CMatrix)> {
    let z = random_unitary_map(&q.triple.dilation.module, rng)?;
    Ok((q.conjugated(&z)?, z))
}

/// The faithful state `a ↦ 0.7 a₀₀ + 0.3 a₁₁` on `M₂`, invariant under
/// `Ad diag(1, −1)`, as a `Z₂`-equivariant map into `L(ℂ)`.
pub fn gns_example() -> Result<EquivariantCorrespondence> {
    let a = AlgebraShape::new(vec![2])?;
    let group = FiniteGroup::cyclic(2);
    let flip = Automorphism::from_parts(&a, &[0], &[CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]))])?;
    let source = DynamicalSystem { algebra: a.clone(), action: vec![Automorphism::identity(&a), flip] };
    let scalars = AlgebraShape::scalars();
    let module: ModuleRef = Arc::new(HilbertModule::over_itself(&scalars));
    let weights = [[0.7, 0.0], [0.0, 0.3]];
    let images = a.units().iter().map(|u| CMatrix::from_element(1, 1, c(weights[u.row][u.col], 0.0))).collect();
    let phi = CPMap::new(a, module, images, &Tolerance::default())?;
    Ok(EquivariantCorrespondence {
        coefficients: DynamicalSystem::trivial(&scalars, &group),
        group,
        source,
        phi,
        unitaries: vec![identity(1), identity(1)],
    })
}
