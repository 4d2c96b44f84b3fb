use serde::{Deserialize, Serialize};

use super::{checks, Suite, SuiteConfig};
use crate::cp::{intertwiner_space, random_correspondence, random_cp, random_intertwiner, CPMap, Intertwiner};
use crate::cstar::{random_automorphism, random_hom_and_codomain, AlgebraShape, Automorphism, StarMap};
use crate::equivariant::{dilate, random_equivariant, DynamicalSystem, EquivariantCorrespondence, FiniteGroup};
use crate::error::{Error, Result};
use crate::hilbert::{map_norm, random_module, random_unitary_map, HilbertModule, ModuleMap, ModuleRef};
use crate::numkernel::{c, identity, pseudo_inverse, CMatrix, Tolerance};
use crate::poscor::{poscor_compose, poscor_identity, random_morphism, random_object, PosCorMorphism, PosCorObject};
use crate::random::{gaussian_matrix, index, rng_from_seed, Rng64};

/// A map `A → L(E)` stored without validation, so that corrupted inputs
/// still load and are reported by the checks.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MapData {
    pub algebra: AlgebraShape,
    pub module: ModuleRef,
    #[serde(with = "crate::numkernel::matrix_vec_serde")]
    pub images: Vec<CMatrix>,
}

impl MapData {
    pub fn to_map(&self) -> Result<CPMap> {
        CPMap::unchecked(self.algebra.clone(), self.module.clone(), self.images.clone())
    }
}

impl From<&CPMap> for MapData {
    fn from(m: &CPMap) -> Self {
        MapData { algebra: m.algebra.clone(), module: m.module.clone(), images: m.images.clone() }
    }
}

/// `(η, α)` between two stored maps.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MorphismData {
    #[serde(with = "crate::numkernel::matrix_serde")]
    pub eta: CMatrix,
    pub alpha: Automorphism,
}

impl MorphismData {
    pub fn to_intertwiner(&self, src: &ModuleRef, tgt: &ModuleRef) -> Result<Intertwiner> {
        Ok(Intertwiner { eta: ModuleMap::unchecked(src.clone(), tgt.clone(), self.eta.clone())?, alpha: self.alpha.clone() })
    }
}

/// A morphism `(ρ, (η, α))` between objects given by index.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArrowData {
    pub dom: usize,
    pub cod: usize,
    pub rho: StarMap,
    #[serde(with = "crate::numkernel::matrix_serde")]
    pub eta: CMatrix,
    pub alpha: Automorphism,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InstanceData {
    Ksgns {
        phi: MapData,
    },
    /// `φ₁ → φ₂ → φ₃` with two morphisms.
    Lift {
        maps: Vec<MapData>,
        morphisms: Vec<MorphismData>,
    },
    Idempotency {
        maps: Vec<MapData>,
        morphism: MorphismData,
    },
    /// A morphism `φ₁ → φ₂`, a correspondence `π: B → L(F)` and homomorphisms
    /// `ρ₁: B → C`, `ρ₂: C → D`.
    Tensor {
        maps: Vec<MapData>,
        morphism: MorphismData,
        pi: MapData,
        rho1: StarMap,
        rho2: StarMap,
    },
    Category {
        objects: Vec<(String, MapData)>,
        arrows: Vec<ArrowData>,
    },
    Equivariant {
        correspondence: EquivariantCorrespondence,
    },
    Dilation {
        correspondence: EquivariantCorrespondence,
    },
    /// The path `(η + ε_t·direction, α)` converging to `limit`.
    Continuity {
        maps: Vec<MapData>,
        limit: MorphismData,
        #[serde(with = "crate::numkernel::matrix_serde")]
        direction: CMatrix,
        steps: usize,
    },
    /// A correspondence and the unitary conjugating its dilation into a second one.
    Uniqueness {
        correspondence: EquivariantCorrespondence,
        #[serde(with = "crate::numkernel::matrix_serde")]
        planted: CMatrix,
    },
}

impl InstanceData {
    pub fn suite(&self) -> Suite {
        match self {
            InstanceData::Ksgns { .. } => Suite::Ksgns,
            InstanceData::Lift { .. } => Suite::Lift,
            InstanceData::Idempotency { .. } => Suite::Idempotency,
            InstanceData::Tensor { .. } => Suite::Tensor,
            InstanceData::Category { .. } => Suite::Category,
            InstanceData::Equivariant { .. } => Suite::Equivariant,
            InstanceData::Dilation { .. } => Suite::Dilation,
            InstanceData::Continuity { .. } => Suite::Continuity,
            InstanceData::Uniqueness { .. } => Suite::Uniqueness,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Instance {
    pub seed: u64,
    pub data: InstanceData,
}

const PATH_STEPS: usize = 20;

struct Gen<'a> {
    shapes: Vec<AlgebraShape>,
    config: &'a SuiteConfig,
    tol: Tolerance,
}

impl Gen<'_> {
    fn shape(&self, rng: &mut Rng64, fits: impl Fn(&AlgebraShape) -> bool) -> AlgebraShape {
        let ok: Vec<&AlgebraShape> = self.shapes.iter().filter(|s| fits(s)).collect();
        if ok.is_empty() {
            return AlgebraShape::scalars();
        }
        ok[index(rng, ok.len())].clone()
    }

    fn max_dim(&self) -> usize {
        self.config.caps.max_module_dim
    }

    /// A random CP map `A → L(E)` with `dim E` within the module cap.
    fn cp_input(&self, rng: &mut Rng64) -> Result<CPMap> {
        let cap = self.max_dim();
        let a = self.shape(rng, |_| true);
        let b = self.shape(rng, |s| s.blocks().iter().min().is_some_and(|&n| n <= cap));
        let e: ModuleRef = std::sync::Arc::new(random_module(&b, cap, rng)?);
        random_cp(&a, &e, rng)
    }

    /// A CP map, a conjugated copy and a random nonzero intertwiner between
    /// them, rejecting maps for which every linear map intertwines.
    fn morphism_pair(&self, rng: &mut Rng64) -> Result<(CPMap, CPMap, Intertwiner)> {
        for _ in 0..64 {
            let phi1 = self.cp_input(rng)?;
            let e = phi1.module.clone();
            let alpha = random_automorphism(&phi1.algebra, rng);
            let w = random_unitary_map(&e, rng)?;
            let phi2 = phi1.conjugated(e.clone(), &w, &alpha, &self.tol)?;
            let space = intertwiner_space(&phi1, &phi2, &alpha, &self.tol)?;
            if space.len() >= e.dim() * e.dim() {
                continue;
            }
            let eta = random_intertwiner(&phi1, &phi2, &alpha, rng, &self.tol)?.unwrap_or(w);
            let m = Intertwiner { eta: ModuleMap::unchecked(e.clone(), e, eta)?, alpha };
            return Ok((phi1, phi2, m));
        }
        Err(Error::InvalidConfig("caps admit only maps with trivial intertwining".into()))
    }

    fn groups(&self) -> Vec<FiniteGroup> {
        let all = [FiniteGroup::cyclic(2), FiniteGroup::cyclic(3), FiniteGroup::cyclic(4), FiniteGroup::symmetric(3)];
        let ok: Vec<FiniteGroup> = all.into_iter().filter(|g| g.order() <= self.config.caps.max_group_order).collect();
        if ok.is_empty() {
            vec![FiniteGroup::trivial()]
        } else {
            ok
        }
    }

    /// For the trivial group the map is drawn exactly as for the plain
    /// dilation suite, so both suites see the same input for the same seed.
    fn equivariant(&self, rng: &mut Rng64, index: usize) -> Result<EquivariantCorrespondence> {
        let groups = self.groups();
        let group = &groups[index % groups.len()];
        if group.order() == 1 {
            let phi = self.cp_input(rng)?;
            return Ok(EquivariantCorrespondence {
                group: group.clone(),
                source: DynamicalSystem::trivial(&phi.algebra, group),
                coefficients: DynamicalSystem::trivial(phi.module.algebra(), group),
                unitaries: vec![identity(phi.module.dim())],
                phi,
            });
        }
        let cap = self.max_dim();
        let a = self.shape(rng, |_| true);
        let b = self.shape(rng, |s| s.dim() <= cap);
        random_equivariant(&a, &b, group, cap, rng, &self.tol)
    }
}

fn maps(list: &[&CPMap]) -> Vec<MapData> {
    list.iter().map(|m| MapData::from(*m)).collect()
}

fn morphism(m: &Intertwiner) -> MorphismData {
    MorphismData { eta: m.eta.matrix.clone(), alpha: m.alpha.clone() }
}

/// Draws instance `index` of `suite`, deterministic in the configuration,
/// and certifies its hypotheses before returning it.
/// A random morphism whose codomain module is nonzero with dimension at most
/// `bound`.
fn bounded_morphism(
    dom: &PosCorObject,
    label: &str,
    bound: usize,
    rng: &mut Rng64,
    tol: &Tolerance,
) -> Result<(PosCorObject, PosCorMorphism)> {
    for _ in 0..64 {
        let (cod, m) = random_morphism(dom, label, 2, rng, tol)?;
        if (1..=bound).contains(&cod.module().dim()) {
            return Ok((cod, m));
        }
    }
    Err(Error::Validation(format!("no morphism out of {} with codomain dimension in 1..={bound}", dom.label)))
}

pub fn generate_instance(config: &SuiteConfig, suite: Suite, index: usize) -> Result<Instance> {
    let seed = config.instance_seed(suite, index);
    let gen = Gen { shapes: config.shapes()?, config, tol: config.tolerance };
    let mut rng = rng_from_seed(seed);
    let rng = &mut rng;
    let tol = &gen.tol;
    let data = match suite {
        Suite::Ksgns => InstanceData::Ksgns { phi: MapData::from(&gen.cp_input(rng)?) },
        Suite::Lift => {
            let (phi1, phi2, m1) = gen.morphism_pair(rng)?;
            let alpha2 = random_automorphism(&phi1.algebra, rng);
            let w2 = random_unitary_map(&phi2.module, rng)?;
            let phi3 = phi2.conjugated(phi2.module.clone(), &w2, &alpha2, tol)?;
            let m2 = MorphismData { eta: w2, alpha: alpha2 };
            InstanceData::Lift { maps: maps(&[&phi1, &phi2, &phi3]), morphisms: vec![morphism(&m1), m2] }
        }
        Suite::Idempotency => {
            let (phi1, phi2, m) = gen.morphism_pair(rng)?;
            InstanceData::Idempotency { maps: maps(&[&phi1, &phi2]), morphism: morphism(&m) }
        }
        Suite::Tensor => {
            let (phi1, phi2, m) = gen.morphism_pair(rng)?;
            let b = phi1.module.algebra().clone();
            let cap = gen.max_dim();
            let min_b = *b.blocks().iter().min().expect("nonempty");
            let c_shape = gen.shape(rng, |s| s.blocks().iter().min().is_some_and(|&n| n * min_b <= cap));
            let pi = random_correspondence(&b, &c_shape, cap, rng)?;
            let max_block = config.caps.max_block.max(*b.blocks().iter().max().expect("nonempty"));
            let (mid, rho1) = random_hom_and_codomain(&b, max_block, config.caps.max_blocks, rng)?;
            let (_, rho2) = random_hom_and_codomain(&mid, max_block, config.caps.max_blocks, rng)?;
            InstanceData::Tensor { maps: maps(&[&phi1, &phi2]), morphism: morphism(&m), pi: MapData::from(&pi), rho1, rho2 }
        }
        Suite::Category => {
            let a = gen.shape(rng, |_| true);
            let b = gen.shape(rng, |s| s.blocks().iter().all(|&n| n <= 2));
            let o0 = random_object("o0", &a, &b, gen.max_dim().min(3), rng)?;
            let bound = 2 * gen.max_dim();
            let (o1, m1) = bounded_morphism(&o0, "o1", bound, rng, tol)?;
            let (o2, m2) = bounded_morphism(&o1, "o2", bound, rng, tol)?;
            let m21 = poscor_compose(&m2, &m1, &o0, tol)?;
            let objects = [&o0, &o1, &o2];
            let mut arrows: Vec<(PosCorMorphism, usize, usize)> =
                objects.iter().enumerate().map(|(i, o)| Ok((poscor_identity(o, tol)?, i, i))).collect::<Result<_>>()?;
            arrows.extend([(m1, 0, 1), (m2, 1, 2), (m21, 0, 2)]);
            InstanceData::Category {
                objects: objects.iter().map(|o| (o.label.clone(), MapData::from(&o.phi))).collect(),
                arrows: arrows
                    .into_iter()
                    .map(|(m, dom, cod)| ArrowData { dom, cod, rho: m.rho, eta: m.eta.matrix, alpha: m.alpha })
                    .collect(),
            }
        }
        Suite::Equivariant => InstanceData::Equivariant { correspondence: gen.equivariant(rng, index)? },
        Suite::Dilation => InstanceData::Dilation { correspondence: gen.equivariant(rng, index)? },
        Suite::Continuity => {
            let (phi1, phi2, m) = gen.morphism_pair(rng)?;
            let direction = random_intertwiner(&phi1, &phi2, &m.alpha, rng, tol)?.unwrap_or_else(|| m.eta.matrix.clone());
            InstanceData::Continuity { maps: maps(&[&phi1, &phi2]), limit: morphism(&m), direction, steps: PATH_STEPS }
        }
        Suite::Uniqueness => {
            let correspondence = gen.equivariant(rng, index)?;
            let q = dilate(&correspondence, tol)?;
            let planted = random_unitary_map(&q.triple.dilation.module, rng)?;
            InstanceData::Uniqueness { correspondence, planted }
        }
    };
    let instance = Instance { seed, data };
    if let Some(bad) = checks::hypotheses(&instance, tol).into_iter().find(|r| !r.pass) {
        return Err(Error::Validation(format!("generated {suite} instance {seed} fails {} (residual {:e})", bad.check_name, bad.residual)));
    }
    Ok(instance)
}

/// Relative size of injected perturbations.
const FAULT_SIZE: f64 = 0.1;

/// Random direction of norm `size` measured by `norm`, with its component in
/// the span of `avoid` removed (Frobenius projection).
fn perturbation(
    rows: usize,
    cols: usize,
    avoid: &[CMatrix],
    size: f64,
    norm: impl Fn(&CMatrix) -> f64,
    rng: &mut Rng64,
    tol: &Tolerance,
) -> Result<CMatrix> {
    let g = gaussian_matrix(rng, rows, cols);
    let raw = norm(&g);
    let g = if avoid.is_empty() {
        g
    } else {
        let mut basis = CMatrix::zeros(rows * cols, avoid.len());
        for (j, b) in avoid.iter().enumerate() {
            basis.set_column(j, &CMatrix::from_column_slice(rows * cols, 1, b.as_slice()).column(0));
        }
        let v = CMatrix::from_column_slice(rows * cols, 1, g.as_slice());
        let proj = &basis * (pseudo_inverse(&basis, tol)? * &v);
        CMatrix::from_column_slice(rows, cols, (v - proj).as_slice())
    };
    let n = norm(&g);
    if !(n > 1e-6 * raw) {
        return Err(Error::Validation("perturbation vanished".into()));
    }
    Ok(g * c(size / n, 0.0))
}

/// Corrupts the instance by a relative perturbation of size 0.1 in a
/// direction that leaves the set of valid inputs.
pub fn inject_fault(instance: &Instance, rng: &mut Rng64, tol: &Tolerance) -> Result<Instance> {
    let mut out = instance.clone();
    let corrupt_morphism = |maps: &[MapData], m: &mut MorphismData, rng: &mut Rng64| -> Result<()> {
        let (p1, p2) = (maps[0].to_map()?, maps[1].to_map()?);
        let space = intertwiner_space(&p1, &p2, &m.alpha, tol)?;
        let (e1, e2) = (&p1.module, &p2.module);
        let size = FAULT_SIZE * map_norm(e1, e2, &m.eta).max(1.0);
        m.eta += perturbation(e2.dim(), e1.dim(), &space, size, |x| map_norm(e1, e2, x), rng, tol)?;
        Ok(())
    };
    let corrupt_images = |phi: &mut MapData, rng: &mut Rng64| {
        let e = phi.module.clone();
        let scale = phi.images.iter().map(|m| map_norm(&e, &e, m)).fold(1.0, f64::max);
        for img in &mut phi.images {
            let g = gaussian_matrix(rng, e.dim(), e.dim());
            let n = map_norm(&e, &e, &g);
            *img += g * c(FAULT_SIZE * scale / n, 0.0);
        }
    };
    let corrupt_unitaries = |cor: &mut EquivariantCorrespondence, rng: &mut Rng64| -> Result<()> {
        let g = (0..cor.group.order()).find(|&g| g != cor.group.identity()).unwrap_or(cor.group.identity());
        let e = cor.phi.module.clone();
        cor.unitaries[g] += perturbation(e.dim(), e.dim(), &[], FAULT_SIZE, |x| map_norm(&e, &e, x), rng, tol)?;
        Ok(())
    };
    match &mut out.data {
        InstanceData::Ksgns { phi } => corrupt_images(phi, rng),
        InstanceData::Lift { maps, morphisms } => corrupt_morphism(maps, &mut morphisms[0], rng)?,
        InstanceData::Idempotency { maps, morphism } => corrupt_morphism(maps, morphism, rng)?,
        InstanceData::Tensor { pi, .. } => corrupt_images(pi, rng),
        InstanceData::Category { objects, arrows } => {
            // The first non-identity arrow that admits an invalid direction; an
            // arrow out of a zero module has none.
            let mut done = false;
            for arrow in arrows.iter_mut().filter(|a| a.dom != a.cod) {
                let dom = PosCorObject { label: objects[arrow.dom].0.clone(), phi: objects[arrow.dom].1.to_map()? };
                let cod = PosCorObject { label: objects[arrow.cod].0.clone(), phi: objects[arrow.cod].1.to_map()? };
                let m = PosCorMorphism::unchecked(&dom, &cod, arrow.rho.clone(), arrow.eta.clone(), arrow.alpha.clone(), tol)?;
                let space = intertwiner_space(&m.extended, &cod.phi, &m.alpha, tol)?;
                let src: &HilbertModule = &m.tensor.module;
                let tgt: &HilbertModule = cod.module();
                let size = FAULT_SIZE * map_norm(src, tgt, &arrow.eta).max(1.0);
                if let Ok(p) = perturbation(tgt.dim(), src.dim(), &space, size, |x| map_norm(src, tgt, x), rng, tol) {
                    arrow.eta += p;
                    done = true;
                    break;
                }
            }
            if !done {
                return Err(Error::Validation("no arrow admits an invalid perturbation".into()));
            }
        }
        InstanceData::Equivariant { correspondence } | InstanceData::Dilation { correspondence } => corrupt_unitaries(correspondence, rng)?,
        InstanceData::Continuity { maps, limit, .. } => corrupt_morphism(maps, limit, rng)?,
        InstanceData::Uniqueness { correspondence, planted } => {
            let f = dilate(correspondence, tol)?.triple.dilation.module;
            *planted += perturbation(f.dim(), f.dim(), &[], FAULT_SIZE, |x| map_norm(&f, &f, x), rng, tol)?;
        }
    }
    Ok(out)
}
