use super::instances::{ArrowData, Instance, InstanceData, MapData, MorphismData};
use super::{Record, Suite};
use crate::cp::{bounded_sum_sides, check_cp, check_morphism, sandwich_violation, CPMap, Intertwiner};
use crate::cstar::{check_star_map, StarMap};
use crate::equivariant::{
    check_dilation, check_equivariant, correspondence_to_functor, dilate, dilation_uniqueness, EquivariantCorrespondence,
};
use crate::error::{Error, Result};
use crate::hilbert::{
    adjoint_matrix, composition_unitary, inclusion_unitary, linearity_residual_between, map_norm, tensor_map, unitarity_residual, ModuleRef,
};
use crate::ksgns::{check_lift, continuity_probe, idempotency_unitary, ksgns, ksgns_lift, linear_path, KsgnsTriple};
use crate::numkernel::{identity, CVector, Tolerance};
use crate::poscor::{
    check_category_laws, commuting_unitary, ksgns_functor_poscor, morphism_distance, poscor_compose, poscor_identity,
    tensor_functor_morphism, DilatedObject, PosCorMorphism, PosCorObject,
};
use crate::random::{gaussian_matrix, rng_from_seed, Rng64};

const CP: &str = "completely positive map";
const MORPHISM: &str = "morphism of CP maps";
const KSGNS: &str = "KSGNS construction";
const LIFT: &str = "lifting of morphisms";
const ENDOFUNCTOR: &str = "KSGNS endofunctor";
const IDEMPOTENCY: &str = "idempotency of KSGNS";
const TENSOR: &str = "tensor functor";
const INCLUSION: &str = "inclusion tensor functor";
const COMPOSITION: &str = "composition and tensor";
const CATEGORY: &str = "category laws of PosCor";
const POSCOR_MORPHISM: &str = "morphism of PosCor";
const FUNCTOR_POSCOR: &str = "KSGNS functor on PosCor";
const BOUNDED_SUM: &str = "bounded sum lemma";
const SANDWICH: &str = "order bounds lemma";
const EQUIVARIANT: &str = "equivariant correspondence";
const AS_FUNCTOR: &str = "equivariant correspondences as functors";
const DILATION: &str = "equivariant dilation";
const UNIQUENESS: &str = "uniqueness of the equivariant dilation";
const CONTINUITY: &str = "continuity of the KSGNS lift";

/// Collects records for one instance.
struct Sink {
    suite: Suite,
    seed: u64,
    records: Vec<Record>,
}

impl Sink {
    fn new(instance: &Instance) -> Sink {
        Sink { suite: instance.data.suite(), seed: instance.seed, records: Vec::new() }
    }

    fn push(&mut self, check: impl Into<String>, theorem: &str, residual: f64, threshold: f64) {
        let pass = residual.is_finite() && residual <= threshold;
        self.records.push(Record {
            suite: self.suite,
            instance_seed: self.seed,
            check_name: check.into(),
            theorem: theorem.into(),
            residual: if residual.is_finite() { residual } else { f64::MAX },
            threshold,
            pass,
            wall_time: 0.0,
            error: None,
        });
    }

    fn fail(&mut self, check: impl Into<String>, theorem: &str, err: &Error) {
        self.records.push(Record {
            suite: self.suite,
            instance_seed: self.seed,
            check_name: check.into(),
            theorem: theorem.into(),
            residual: f64::MAX,
            threshold: 0.0,
            pass: false,
            wall_time: 0.0,
            error: Some(err.to_string()),
        });
    }

    /// Runs `f`, turning an error into a failing record named `check`.
    fn guard<T>(&mut self, check: &str, theorem: &str, f: impl FnOnce(&mut Sink) -> Result<T>) -> Option<T> {
        match f(self) {
            Ok(v) => Some(v),
            Err(e) => {
                self.fail(check, theorem, &e);
                None
            }
        }
    }

    fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }
}

/// Records of the hypotheses only; generated instances must pass these.
pub fn hypotheses(instance: &Instance, tol: &Tolerance) -> Vec<Record> {
    let mut sink = Sink::new(instance);
    let theorem = theorem_of(instance.data.suite());
    sink.guard("hypotheses", theorem, |s| hypotheses_into(s, &instance.data, tol));
    sink.records
}

/// Hypothesis records followed, when they pass, by the conclusions.
pub fn evaluate(instance: &Instance, tol: &Tolerance) -> Vec<Record> {
    let mut sink = Sink::new(instance);
    let theorem = theorem_of(instance.data.suite());
    let ok = sink.guard("hypotheses", theorem, |s| hypotheses_into(s, &instance.data, tol)).is_some() && sink.all_pass();
    if ok {
        sink.guard("construction", theorem, |s| conclusions(s, instance, tol));
    }
    sink.records
}

fn theorem_of(suite: Suite) -> &'static str {
    match suite {
        Suite::Ksgns => KSGNS,
        Suite::Lift => ENDOFUNCTOR,
        Suite::Idempotency => IDEMPOTENCY,
        Suite::Tensor => TENSOR,
        Suite::Category => CATEGORY,
        Suite::Equivariant => AS_FUNCTOR,
        Suite::Dilation => DILATION,
        Suite::Continuity => CONTINUITY,
        Suite::Uniqueness => UNIQUENESS,
    }
}

fn cp_records(s: &mut Sink, name: &str, phi: &CPMap, tol: &Tolerance) {
    let (lin, scale) = phi.linearity_residual();
    s.push(format!("{name}_linearity"), CP, lin, tol.threshold(scale));
    match check_cp(phi, tol) {
        Ok(rep) => {
            let neg = (-rep.min_eigenvalue()).max(0.0);
            let n = phi.algebra.blocks().iter().copied().max().unwrap_or(1) as f64;
            s.push(format!("{name}_choi"), CP, rep.hermiticity.max(neg), tol.threshold(n * phi.norm()));
        }
        Err(e) => s.fail(format!("{name}_choi"), CP, &e),
    }
}

fn correspondence_records(s: &mut Sink, name: &str, pi: &CPMap, tol: &Tolerance) {
    cp_records(s, name, pi, tol);
    let scale = 1f64.max(pi.norm());
    s.push(format!("{name}_hermiticity"), CP, pi.hermiticity_residual(), tol.threshold(scale));
    s.push(format!("{name}_multiplicativity"), CP, pi.multiplicativity_residual(), tol.threshold(scale * scale));
    s.push(format!("{name}_unitality"), CP, pi.unitality_residual(), tol.threshold(1.0));
}

fn morphism_records(s: &mut Sink, name: &str, m: &Intertwiner, phi1: &CPMap, phi2: &CPMap, tol: &Tolerance) -> Result<()> {
    let (e1, e2) = (&phi1.module, &phi2.module);
    let norm = map_norm(e1, e2, &m.eta.matrix);
    s.push(format!("{name}_linearity"), MORPHISM, linearity_residual_between(e1, e2, &m.eta.matrix), tol.threshold(norm));
    let rep = check_morphism(m, phi1, phi2, tol)?;
    s.push(format!("{name}_intertwining"), MORPHISM, rep.max(), rep.threshold);
    Ok(())
}

fn star_map_records(s: &mut Sink, name: &str, rho: &StarMap, tol: &Tolerance) {
    s.push(format!("{name}_star_homomorphism"), TENSOR, check_star_map(rho).max(), tol.threshold(1.0));
}

fn equivariant_records(s: &mut Sink, cor: &EquivariantCorrespondence, tol: &Tolerance) -> Result<()> {
    cp_records(s, "phi", &cor.phi, tol);
    let rep = check_equivariant(cor, tol)?;
    for (name, r) in [
        ("actions", rep.actions),
        ("unitary_identity", rep.identity),
        ("unitary_homomorphism", rep.homomorphism),
        ("unitary_twisted_linearity", rep.twisted_linearity),
        ("unitary_pairing_twist", rep.pairing_twist),
        ("covariance", rep.covariance),
    ] {
        s.push(name, EQUIVARIANT, r, rep.threshold);
    }
    Ok(())
}

fn hypotheses_into(s: &mut Sink, data: &InstanceData, tol: &Tolerance) -> Result<()> {
    match data {
        InstanceData::Ksgns { phi } => cp_records(s, "phi", &phi.to_map()?, tol),
        InstanceData::Lift { maps, morphisms } => {
            let phis = to_maps(maps, 3)?;
            for (i, p) in phis.iter().enumerate() {
                cp_records(s, &format!("phi{}", i + 1), p, tol);
            }
            for (i, m) in morphisms.iter().enumerate().take(2) {
                let it = m.to_intertwiner(&phis[i].module, &phis[i + 1].module)?;
                morphism_records(s, &format!("m{}", i + 1), &it, &phis[i], &phis[i + 1], tol)?;
            }
        }
        InstanceData::Idempotency { maps, morphism } | InstanceData::Tensor { maps, morphism, .. } => {
            let phis = to_maps(maps, 2)?;
            cp_records(s, "phi1", &phis[0], tol);
            cp_records(s, "phi2", &phis[1], tol);
            let m = morphism.to_intertwiner(&phis[0].module, &phis[1].module)?;
            morphism_records(s, "m", &m, &phis[0], &phis[1], tol)?;
            if let InstanceData::Tensor { pi, rho1, rho2, .. } = data {
                correspondence_records(s, "pi", &pi.to_map()?, tol);
                star_map_records(s, "rho1", rho1, tol);
                star_map_records(s, "rho2", rho2, tol);
            }
        }
        InstanceData::Category { objects, arrows } => {
            let objs = to_objects(objects)?;
            for o in &objs {
                cp_records(s, &o.label, &o.phi, tol);
            }
            for (i, a) in arrows.iter().enumerate() {
                let m = to_arrow(a, &objs, tol)?;
                let inv = m.invariants(&objs[a.cod], tol)?;
                let name = format!("arrow{i}");
                s.push(format!("{name}_star_homomorphism"), POSCOR_MORPHISM, inv.star_map, tol.ctol);
                s.push(format!("{name}_linearity"), POSCOR_MORPHISM, inv.linearity, tol.threshold(1.0));
                s.push(format!("{name}_intertwining"), POSCOR_MORPHISM, inv.intertwining.max(), inv.intertwining.threshold);
            }
        }
        InstanceData::Equivariant { correspondence } | InstanceData::Dilation { correspondence } => {
            equivariant_records(s, correspondence, tol)?
        }
        InstanceData::Uniqueness { correspondence, planted } => {
            equivariant_records(s, correspondence, tol)?;
            let f = dilate(correspondence, tol)?.triple.dilation.module;
            s.push("planted_unitarity", UNIQUENESS, unitarity_residual(&f, &f, planted), tol.ctol);
            s.push("planted_linearity", UNIQUENESS, f.linearity_residual(planted), tol.ctol);
        }
        InstanceData::Continuity { maps, limit, direction, .. } => {
            let phis = to_maps(maps, 2)?;
            cp_records(s, "phi1", &phis[0], tol);
            cp_records(s, "phi2", &phis[1], tol);
            let m = limit.to_intertwiner(&phis[0].module, &phis[1].module)?;
            morphism_records(s, "limit", &m, &phis[0], &phis[1], tol)?;
            let dir =
                MorphismData { eta: direction.clone(), alpha: limit.alpha.clone() }.to_intertwiner(&phis[0].module, &phis[1].module)?;
            morphism_records(s, "direction", &dir, &phis[0], &phis[1], tol)?;
        }
    }
    Ok(())
}

fn to_maps(maps: &[MapData], n: usize) -> Result<Vec<CPMap>> {
    if maps.len() != n {
        return Err(Error::ShapeMismatch(format!("expected {n} maps, found {}", maps.len())));
    }
    maps.iter().map(MapData::to_map).collect()
}

fn to_objects(objects: &[(String, MapData)]) -> Result<Vec<PosCorObject>> {
    objects.iter().map(|(label, m)| Ok(PosCorObject { label: label.clone(), phi: m.to_map()? })).collect()
}

fn to_arrow(a: &ArrowData, objs: &[PosCorObject], tol: &Tolerance) -> Result<PosCorMorphism> {
    let (dom, cod) = (
        objs.get(a.dom).ok_or_else(|| Error::ObjectMismatch(format!("no object {}", a.dom)))?,
        objs.get(a.cod).ok_or_else(|| Error::ObjectMismatch(format!("no object {}", a.cod)))?,
    );
    PosCorMorphism::unchecked(dom, cod, a.rho.clone(), a.eta.clone(), a.alpha.clone(), tol)
}

fn rand_vec(rng: &mut Rng64, n: usize) -> CVector {
    gaussian_matrix(rng, n, 1).column(0).into_owned()
}

fn conclusions(s: &mut Sink, instance: &Instance, tol: &Tolerance) -> Result<()> {
    match &instance.data {
        InstanceData::Ksgns { phi } => ksgns_checks(s, &phi.to_map()?, tol),
        InstanceData::Lift { maps, morphisms } => lift_checks(s, instance.seed, maps, morphisms, tol),
        InstanceData::Idempotency { maps, morphism } => idempotency_checks(s, maps, morphism, tol),
        InstanceData::Tensor { maps, morphism, pi, rho1, rho2 } => tensor_checks(s, maps, morphism, &pi.to_map()?, rho1, rho2, tol),
        InstanceData::Category { objects, arrows } => category_checks(s, objects, arrows, tol),
        InstanceData::Equivariant { correspondence } => functor_checks(s, correspondence, tol),
        InstanceData::Dilation { correspondence } => dilation_checks(s, correspondence, tol),
        InstanceData::Continuity { maps, limit, direction, steps } => {
            continuity_checks(s, instance.seed, maps, limit, direction, *steps, tol)
        }
        InstanceData::Uniqueness { correspondence, planted } => uniqueness_checks(s, correspondence, planted, tol),
    }
}

fn ksgns_checks(s: &mut Sink, phi: &CPMap, tol: &Tolerance) -> Result<()> {
    let t = ksgns(phi, tol)?;
    triple_records(s, "", &t, tol);
    Ok(())
}

fn triple_records(s: &mut Sink, prefix: &str, t: &KsgnsTriple, tol: &Tolerance) {
    let scale = 1f64.max(t.source.norm());
    s.push(format!("{prefix}reconstruction"), KSGNS, t.reconstruction_residual(), tol.threshold(scale));
    s.push(format!("{prefix}spanning_deficit"), KSGNS, (t.dim() - t.spanning_rank(tol).min(t.dim())) as f64, 0.0);
    s.push(format!("{prefix}embedding_adjoint"), KSGNS, t.embedding_adjoint_residual(), tol.threshold(scale));
    let rep = &t.representation;
    s.push(format!("{prefix}representation_multiplicativity"), KSGNS, rep.multiplicativity_residual(), tol.threshold(1.0));
    s.push(format!("{prefix}representation_unitality"), KSGNS, rep.unitality_residual(), tol.threshold(1.0));
}

fn lift_checks(s: &mut Sink, seed: u64, maps: &[MapData], morphisms: &[MorphismData], tol: &Tolerance) -> Result<()> {
    let phis = to_maps(maps, 3)?;
    let ts = phis.iter().map(|p| ksgns(p, tol)).collect::<Result<Vec<_>>>()?;
    let ms = (0..2).map(|i| morphisms[i].to_intertwiner(&phis[i].module, &phis[i + 1].module)).collect::<Result<Vec<_>>>()?;
    let mut lifted = Vec::new();
    for i in 0..2 {
        let l = ksgns_lift(&ms[i], &ts[i], &ts[i + 1], tol)?;
        let rep = check_lift(&ms[i], &l, &ts[i], &ts[i + 1], tol)?;
        let thr = tol.threshold(ms[i].eta.norm());
        let name = format!("m{}", i + 1);
        s.push(format!("{name}_lift_contraction"), LIFT, rep.norm_excess.max(0.0), thr);
        s.push(format!("{name}_lift_adjoint_formula"), LIFT, rep.adjoint_formula, thr);
        s.push(format!("{name}_lift_intertwining"), LIFT, rep.morphism, rep.morphism_threshold);
        s.push(format!("{name}_lift_embedding_naturality"), LIFT, rep.embedding_naturality, thr);
        lifted.push(l);
    }
    let f1 = &ts[0].dilation.module;
    let f3 = &ts[2].dilation.module;
    let id = ksgns_lift(&Intertwiner::identity(&phis[0]), &ts[0], &ts[0], tol)?;
    s.push("lift_identity", ENDOFUNCTOR, map_norm(f1, f1, &(&id.eta.matrix - identity(f1.dim()))), tol.ctol);
    let whole = ksgns_lift(&ms[1].after(&ms[0])?, &ts[0], &ts[2], tol)?;
    let parts = lifted[1].after(&lifted[0])?;
    let scale = ms[0].eta.norm() * ms[1].eta.norm();
    s.push("lift_composition", ENDOFUNCTOR, map_norm(f1, f3, &(&whole.eta.matrix - &parts.eta.matrix)), tol.threshold(scale));
    lemma_records(s, seed, &phis[0], &phis[1], &ms[0], tol);
    Ok(())
}

/// Sampled operator inequalities for the first morphism, with families of
/// size 1 to 4 drawn from the instance seed.
fn lemma_records(s: &mut Sink, seed: u64, phi1: &CPMap, phi2: &CPMap, m: &Intertwiner, tol: &Tolerance) {
    let mut rng = rng_from_seed(seed ^ 0x5A5A_5A5A);
    let (e1, e2) = (&phi1.module, &phi2.module);
    let eta = &m.eta.matrix;
    let adj = adjoint_matrix(e1, e2, eta);
    let en = map_norm(e1, e2, eta);
    let mut bounded = 0.0_f64;
    let mut sandwich = 0.0_f64;
    for n in 1..=4 {
        let fam: Vec<(CVector, CVector)> = (0..n).map(|_| (rand_vec(&mut rng, phi1.algebra.dim()), rand_vec(&mut rng, e1.dim()))).collect();
        let (lhs, rhs) = bounded_sum_sides(phi1, &(&adj * eta), &fam);
        bounded = bounded.max((lhs - rhs).max(0.0) / (1.0 + rhs));
        let fam2: Vec<(CVector, CVector)> = fam.iter().map(|(a, _)| (a.clone(), rand_vec(&mut rng, e2.dim()))).collect();
        let (lhs2, rhs2) = bounded_sum_sides(phi2, &(eta * &adj), &fam2);
        bounded = bounded.max((lhs2 - rhs2).max(0.0) / (1.0 + rhs2));
        let a = &fam[0].0;
        let v = sandwich_violation(phi1, &(&adj * eta), en, a);
        sandwich = sandwich.max(v / (1.0 + phi1.norm() * en * en * a.norm().powi(2)));
    }
    s.push("bounded_sum", BOUNDED_SUM, bounded, tol.ctol);
    s.push("order_bounds", SANDWICH, sandwich, tol.ctol);
}

fn idempotency_checks(s: &mut Sink, maps: &[MapData], morphism: &MorphismData, tol: &Tolerance) -> Result<()> {
    let phis = to_maps(maps, 2)?;
    let m = morphism.to_intertwiner(&phis[0].module, &phis[1].module)?;
    let t1 = ksgns(&phis[0], tol)?;
    let t2 = ksgns(&phis[1], tol)?;
    let (tt1, v1) = idempotency_unitary(&t1, tol)?;
    let (tt2, v2) = idempotency_unitary(&t2, tol)?;
    s.push("unitarity", IDEMPOTENCY, v1.unitarity_residual().max(v2.unitarity_residual()), tol.ctol);
    s.push("dimension_gap", IDEMPOTENCY, (tt1.dim() as f64 - t1.dim() as f64).abs(), 0.0);
    let lifted = ksgns_lift(&m, &t1, &t2, tol)?;
    let twice = ksgns_lift(&lifted, &tt1, &tt2, tol)?;
    let lhs = &v2.matrix * &lifted.eta.matrix;
    let rhs = &twice.eta.matrix * &v1.matrix;
    s.push("naturality", IDEMPOTENCY, map_norm(&t1.dilation.module, &tt2.dilation.module, &(lhs - rhs)), tol.threshold(m.eta.norm()));
    let f = &t1.dilation.module;
    let back = adjoint_matrix(f, &tt1.dilation.module, &v1.matrix);
    let rep = t1
        .representation
        .images
        .iter()
        .zip(&tt1.representation.images)
        .map(|(p, pp)| map_norm(f, f, &(&back * pp * &v1.matrix - p)))
        .fold(0.0, f64::max);
    s.push("representation_compatibility", IDEMPOTENCY, rep, tol.ctol);
    Ok(())
}

fn tensor_checks(
    s: &mut Sink,
    maps: &[MapData],
    morphism: &MorphismData,
    pi: &CPMap,
    rho1: &StarMap,
    rho2: &StarMap,
    tol: &Tolerance,
) -> Result<()> {
    let phis = to_maps(maps, 2)?;
    let e: &ModuleRef = &phis[0].module;
    let m = morphism.to_intertwiner(e, &phis[1].module)?;
    let eta_norm = m.eta.norm();
    let t1 = ksgns(&phis[0], tol)?;
    let t2 = ksgns(&phis[1], tol)?;
    let d1 = commuting_unitary(&t1, &pi.module, &pi.images, tol)?;
    let d2 = commuting_unitary(&t2, &pi.module, &pi.images, tol)?;
    let unit = unitarity_residual(&d1.left.dilation.module, &d1.right.module, &d1.unitary).max(unitarity_residual(
        &d2.left.dilation.module,
        &d2.right.module,
        &d2.unitary,
    ));
    s.push("commuting_unitarity", TENSOR, unit, tol.ctol);
    let inter = d1.intertwining_residual(&t1, tol)?.max(d2.intertwining_residual(&t2, tol)?);
    s.push("commuting_intertwining", TENSOR, inter, tol.ctol);
    let hat = tensor_functor_morphism(&m, &d1.tensor, &d2.tensor, tol)?;
    let rep = check_morphism(&hat, &d1.extended, &d2.extended, tol)?;
    s.push("tensored_morphism", TENSOR, rep.max(), rep.threshold);
    s.push("tensored_contraction", TENSOR, (hat.eta.norm() - eta_norm).max(0.0), tol.threshold(eta_norm));
    let hat_tilde = ksgns_lift(&hat, &d1.left, &d2.left, tol)?;
    let tilde = ksgns_lift(&m, &t1, &t2, tol)?;
    let tilde_hat = tensor_functor_morphism(&tilde, &d1.right, &d2.right, tol)?;
    let lhs = &tilde_hat.eta.matrix * &d1.unitary;
    let rhs = &d2.unitary * &hat_tilde.eta.matrix;
    s.push("commuting_naturality", TENSOR, map_norm(&d1.left.dilation.module, &d2.right.module, &(lhs - rhs)), tol.threshold(eta_norm));

    // The morphism acts on one module, so its tensor extensions are endomorphisms.
    let eta = &m.eta.matrix;
    let (t, iota) = inclusion_unitary(e, tol)?;
    s.push("inclusion_unitarity", INCLUSION, iota.unitarity_residual(), tol.ctol);
    let ext = tensor_map(eta, &t, &t, tol)?;
    s.push("inclusion_naturality", INCLUSION, map_norm(&t.module, e, &(&iota.matrix * ext - eta * &iota.matrix)), tol.threshold(eta_norm));
    let cd = composition_unitary(e, rho1, rho2, tol)?;
    s.push("composition_unitarity", COMPOSITION, unitarity_residual(&cd.outer.module, &cd.combined.module, &cd.unitary), tol.ctol);
    let inner_t = tensor_map(eta, &cd.inner, &cd.inner, tol)?;
    let outer_t = tensor_map(&inner_t, &cd.outer, &cd.outer, tol)?;
    let comb_t = tensor_map(eta, &cd.combined, &cd.combined, tol)?;
    s.push(
        "composition_naturality",
        COMPOSITION,
        map_norm(&cd.outer.module, &cd.combined.module, &(&cd.unitary * outer_t - comb_t * &cd.unitary)),
        tol.threshold(eta_norm),
    );
    Ok(())
}

fn category_checks(s: &mut Sink, objects: &[(String, MapData)], arrows: &[ArrowData], tol: &Tolerance) -> Result<()> {
    let objs = to_objects(objects)?;
    let ms = arrows.iter().map(|a| to_arrow(a, &objs, tol)).collect::<Result<Vec<_>>>()?;
    let rep = check_category_laws(&objs, &ms, tol)?;
    s.push("left_identity", CATEGORY, rep.left_identity, tol.ctol);
    s.push("right_identity", CATEGORY, rep.right_identity, tol.ctol);
    s.push("associativity", CATEGORY, rep.associativity, tol.ctol);
    s.push("composite_conditions", CATEGORY, rep.composite_invariants, 0.0);

    let dil = objs.iter().map(|o| DilatedObject::new(o, tol)).collect::<Result<Vec<_>>>()?;
    let mut identity_gap = 0.0_f64;
    for (o, d) in objs.iter().zip(&dil) {
        let lifted = ksgns_functor_poscor(&poscor_identity(o, tol)?, d, d, tol)?;
        identity_gap = identity_gap.max(morphism_distance(&lifted, &poscor_identity(&d.object, tol)?, &d.object)?);
    }
    let mut composition_gap = 0.0_f64;
    for (a, m) in arrows.iter().zip(&ms) {
        for (b, n) in arrows.iter().zip(&ms) {
            if b.dom != a.cod || a.dom == a.cod || b.dom == b.cod {
                continue;
            }
            let whole = ksgns_functor_poscor(&poscor_compose(n, m, &objs[a.dom], tol)?, &dil[a.dom], &dil[b.cod], tol)?;
            let first = ksgns_functor_poscor(m, &dil[a.dom], &dil[a.cod], tol)?;
            let second = ksgns_functor_poscor(n, &dil[b.dom], &dil[b.cod], tol)?;
            let parts = poscor_compose(&second, &first, &dil[a.dom].object, tol)?;
            composition_gap = composition_gap.max(morphism_distance(&whole, &parts, &dil[a.dom].object)?);
        }
    }
    s.push("functor_identity", FUNCTOR_POSCOR, identity_gap, tol.ctol);
    s.push("functor_composition", FUNCTOR_POSCOR, composition_gap, tol.threshold(1.0));
    Ok(())
}

fn functor_checks(s: &mut Sink, cor: &EquivariantCorrespondence, tol: &Tolerance) -> Result<()> {
    let f = correspondence_to_functor(cor, tol)?;
    let scale = 1f64.max(cor.phi.norm());
    s.push("functor_composition", AS_FUNCTOR, f.composition, tol.threshold(scale));
    s.push("functor_identity", AS_FUNCTOR, f.identity, tol.threshold(scale));
    s.push("functor_unitarity", AS_FUNCTOR, f.unitarity, tol.ctol);
    s.push("functor_round_trip", AS_FUNCTOR, f.round_trip, tol.ctol);
    for (g, m) in f.morphisms.iter().enumerate() {
        let inv = m.invariants(&f.object, tol)?;
        s.push(format!("functor_g{g}_intertwining"), AS_FUNCTOR, inv.intertwining.max(), inv.intertwining.threshold);
        s.push(format!("functor_g{g}_linearity"), AS_FUNCTOR, inv.linearity, tol.threshold(1.0));
    }
    Ok(())
}

fn dilation_checks(s: &mut Sink, cor: &EquivariantCorrespondence, tol: &Tolerance) -> Result<()> {
    let q = dilate(cor, tol)?;
    let rep = check_dilation(cor, &q, tol)?;
    let eq = &rep.equivariance;
    for (name, r) in [
        ("dilated_homomorphism", eq.homomorphism.max(eq.identity)),
        ("dilated_twisted_linearity", eq.twisted_linearity),
        ("dilated_pairing_twist", eq.pairing_twist),
        ("dilated_covariance", eq.covariance),
    ] {
        s.push(name, DILATION, r, eq.threshold);
    }
    s.push("spanning_deficit", DILATION, (rep.dim - rep.spanning_rank.min(rep.dim)) as f64, 0.0);
    s.push("reconstruction", DILATION, rep.reconstruction, rep.threshold);
    s.push("embedding_covariance", DILATION, rep.embedding_covariance, rep.threshold);
    s.push("direct_vs_categorical", DILATION, rep.direct_vs_categorical, rep.threshold);
    Ok(())
}

fn continuity_checks(
    s: &mut Sink,
    seed: u64,
    maps: &[MapData],
    limit: &MorphismData,
    direction: &crate::numkernel::CMatrix,
    steps: usize,
    tol: &Tolerance,
) -> Result<()> {
    let phis = to_maps(maps, 2)?;
    let m = limit.to_intertwiner(&phis[0].module, &phis[1].module)?;
    let t1 = ksgns(&phis[0], tol)?;
    let t2 = ksgns(&phis[1], tol)?;
    let path = linear_path(&m, direction, steps)?;
    let mut rng = rng_from_seed(seed ^ 0xC0FF_EE00);
    let samples: Vec<(CVector, CVector)> =
        (0..3).map(|_| (rand_vec(&mut rng, phis[0].module.dim()), rand_vec(&mut rng, phis[0].algebra.dim()))).collect();
    let rep = continuity_probe(&path, &m, &t1, &t2, &samples, tol)?;
    let jitter = rep.lifted_distances.windows(2).map(|w| (w[1] - w[0]).max(0.0)).fold(0.0, f64::max);
    s.push("monotone_decay", CONTINUITY, jitter, 0.1 * tol.ctol);
    s.push("final_distance", CONTINUITY, rep.final_distance, 10.0 * tol.ctol);
    let excess = (rep.constant_estimate - rep.constant_bound).max(0.0) / rep.constant_bound;
    s.push("lipschitz_excess", CONTINUITY, excess, 0.0);
    Ok(())
}

fn uniqueness_checks(s: &mut Sink, cor: &EquivariantCorrespondence, planted: &crate::numkernel::CMatrix, tol: &Tolerance) -> Result<()> {
    let q = dilate(cor, tol)?;
    let q2 = q.conjugated(planted)?;
    let (w, rep) = dilation_uniqueness(&q, &q2, tol)?;
    let f = &q.triple.dilation.module;
    let z_inv = adjoint_matrix(f, f, planted);
    s.push("planted_recovery", UNIQUENESS, map_norm(f, f, &(&w.matrix - z_inv)), 10.0 * tol.ctol);
    s.push("unitarity", UNIQUENESS, rep.unitarity, tol.ctol);
    s.push("representation", UNIQUENESS, rep.representation, tol.ctol);
    s.push("embedding", UNIQUENESS, rep.embedding, tol.ctol);
    s.push("unitaries", UNIQUENESS, rep.unitaries, tol.ctol);
    Ok(())
}
