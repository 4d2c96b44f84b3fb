//! Acceptance suite: every criterion runs at its stated size and tolerance
//! and prints one PASS/FAIL line. Exits nonzero when any criterion fails.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use ksgns_core::cp::CPMap;
use ksgns_core::cstar::AlgebraShape;
use ksgns_core::equivariant::{dilate, DynamicalSystem, EquivariantCorrespondence, FiniteGroup};
use ksgns_core::harness::{generate_suite, inject_fault, run_instances, Caps, Instance, InstanceData, Record, Suite, SuiteConfig};
use ksgns_core::hilbert::HilbertModule;
use ksgns_core::ksgns::ksgns;
use ksgns_core::numkernel::{c, identity, operator_norm, CMatrix, Tolerance};
use ksgns_core::random::rng_from_seed;
use nalgebra::DMatrix;

const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn config(suite: Suite, instances: usize) -> SuiteConfig {
    SuiteConfig {
        seed: SEED,
        suites: vec![suite],
        caps: Caps { instances_per_suite: instances, ..Caps::default() },
        ..SuiteConfig::default()
    }
}

fn instances(config: &SuiteConfig, suite: Suite) -> Vec<Instance> {
    config.validate().expect("valid configuration");
    generate_suite(config, suite).expect("generation succeeds")
}

fn evaluate(instances: &[Instance]) -> Vec<Record> {
    run_instances(instances, &Tolerance::default(), jobs()).expect("runner starts").records
}

/// How a named check is judged.
#[derive(Clone, Copy)]
enum Bound {
    /// `residual ≤ value`.
    Flat(f64),
    /// The record's own scaled threshold.
    Recorded,
}

/// Every record must pass its own threshold, and each named check must be
/// present once per instance and meet its bound.
fn judge(records: &[Record], count: usize, checks: &[(&str, Bound)]) -> Outcome {
    let failing = records.iter().filter(|r| !r.pass).count();
    let mut worst = 0.0_f64;
    let mut problems = Vec::new();
    if failing > 0 {
        let first = records.iter().find(|r| !r.pass).unwrap();
        problems.push(format!("{failing} failing records, first {} {:e}", first.check_name, first.residual));
    }
    for &(name, bound) in checks {
        let matching: Vec<&Record> = records.iter().filter(|r| r.check_name == name).collect();
        if matching.len() < count {
            problems.push(format!("{name} seen {} of {count} times", matching.len()));
        }
        for r in matching {
            let limit = match bound {
                Bound::Flat(v) => v,
                Bound::Recorded => r.threshold,
            };
            worst = worst.max(r.residual);
            if !(r.residual <= limit) {
                problems.push(format!("{name} residual {:e} > {limit:e}", r.residual));
            }
        }
    }
    Outcome {
        pass: problems.is_empty(),
        detail: if problems.is_empty() {
            format!("{count} instances, {} records, worst named residual {worst:.2e}", records.len())
        } else {
            problems.truncate(3);
            problems.join("; ")
        },
    }
}

fn ksgns_config() -> SuiteConfig {
    let mut cfg = config(Suite::Ksgns, 200);
    cfg.shapes = Some(vec![vec![1], vec![2], vec![3], vec![2, 2], vec![1, 2]]);
    cfg.caps.max_block = 3;
    cfg.caps.max_module_dim = 6;
    cfg
}

fn reconstruction() -> Outcome {
    let cfg = ksgns_config();
    let inst = instances(&cfg, Suite::Ksgns);
    judge(&evaluate(&inst), inst.len(), &[("reconstruction", Bound::Recorded), ("spanning_deficit", Bound::Flat(0.0))])
}

/// A state `a ↦ Σ w_kl a_kl` on `M₂` as a map into `L(ℂ)`.
fn state(weights: [[f64; 2]; 2]) -> CPMap {
    let a = AlgebraShape::new(vec![2]).unwrap();
    let scalars = AlgebraShape::scalars();
    let module = Arc::new(HilbertModule::over_itself(&scalars));
    let images = a.units().iter().map(|u| CMatrix::from_element(1, 1, c(weights[u.row][u.col], 0.0))).collect();
    CPMap::new(a, module, images, &Tolerance::default()).unwrap()
}

/// Rank of the Gram matrix `⟨E_ij, E_kl⟩ = ω(E_ji E_kl) = δ_ik ω(E_jl)`,
/// computed from scratch.
fn gram_rank(weights: [[f64; 2]; 2]) -> usize {
    let g = DMatrix::from_fn(4, 4, |r, s| {
        let (i, j, k, l) = (r / 2, r % 2, s / 2, s % 2);
        if i == k {
            weights[j][l]
        } else {
            0.0
        }
    });
    g.svd(false, false).singular_values.iter().filter(|&&v| v > 1e-12).count()
}

fn gns_dimensions() -> Outcome {
    let tol = Tolerance::default();
    let cases = [("trace state", [[0.5, 0.0], [0.0, 0.5]], 4), ("pure state", [[1.0, 0.0], [0.0, 0.0]], 2)];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, w, expected) in cases {
        let oracle = gram_rank(w);
        let dim = ksgns(&state(w), &tol).unwrap().dim();
        pass &= oracle == expected && dim == expected;
        parts.push(format!("{name}: dim {dim}, oracle {oracle}, expected {expected}"));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn endofunctor() -> Outcome {
    let inst = instances(&config(Suite::Lift, 100), Suite::Lift);
    judge(
        &evaluate(&inst),
        inst.len(),
        &[
            ("lift_identity", Bound::Flat(1e-8)),
            ("lift_composition", Bound::Flat(1e-8)),
            ("m1_lift_contraction", Bound::Flat(1e-8)),
            ("m2_lift_contraction", Bound::Flat(1e-8)),
        ],
    )
}

fn idempotency() -> Outcome {
    let inst = instances(&config(Suite::Idempotency, 100), Suite::Idempotency);
    judge(
        &evaluate(&inst),
        inst.len(),
        &[("unitarity", Bound::Flat(1e-8)), ("naturality", Bound::Flat(1e-8)), ("dimension_gap", Bound::Flat(0.0))],
    )
}

fn tensor() -> Outcome {
    let inst = instances(&config(Suite::Tensor, 100), Suite::Tensor);
    judge(
        &evaluate(&inst),
        inst.len(),
        &[
            ("commuting_unitarity", Bound::Flat(1e-8)),
            ("commuting_naturality", Bound::Flat(1e-8)),
            ("inclusion_unitarity", Bound::Flat(1e-8)),
            ("inclusion_naturality", Bound::Flat(1e-8)),
            ("composition_unitarity", Bound::Flat(1e-8)),
            ("composition_naturality", Bound::Flat(1e-8)),
        ],
    )
}

fn category() -> Outcome {
    let inst = instances(&config(Suite::Category, 50), Suite::Category);
    let shape_ok = inst.iter().all(|i| match &i.data {
        InstanceData::Category { objects, arrows } => objects.len() == 3 && arrows.len() == 6,
        _ => false,
    });
    let mut out = judge(
        &evaluate(&inst),
        inst.len(),
        &[("left_identity", Bound::Flat(1e-8)), ("right_identity", Bound::Flat(1e-8)), ("associativity", Bound::Flat(1e-8))],
    );
    if !shape_ok {
        out.pass = false;
        out.detail = format!("diagram is not 3 objects / 6 morphisms; {}", out.detail);
    }
    out
}

fn lemmas() -> Outcome {
    // Each lift instance samples one family for every size n = 1..=4.
    let inst = instances(&config(Suite::Lift, 50), Suite::Lift);
    let mut out = judge(&evaluate(&inst), inst.len(), &[("bounded_sum", Bound::Flat(1e-8)), ("order_bounds", Bound::Flat(1e-8))]);
    out.detail = format!("{} sampled families; {}", 4 * inst.len(), out.detail);
    out
}

fn dilation() -> Outcome {
    let inst = instances(&config(Suite::Dilation, 200), Suite::Dilation);
    let mut by_group: BTreeMap<String, Vec<Instance>> = BTreeMap::new();
    for i in inst {
        if let InstanceData::Dilation { correspondence } = &i.data {
            by_group.entry(correspondence.group.name().to_string()).or_default().push(i.clone());
        }
    }
    let checks = [
        ("dilated_homomorphism", Bound::Flat(1e-8)),
        ("dilated_twisted_linearity", Bound::Flat(1e-8)),
        ("dilated_pairing_twist", Bound::Flat(1e-8)),
        ("dilated_covariance", Bound::Flat(1e-8)),
        ("reconstruction", Bound::Flat(1e-8)),
        ("embedding_covariance", Bound::Flat(1e-8)),
        ("spanning_deficit", Bound::Flat(0.0)),
        ("direct_vs_categorical", Bound::Flat(1e-8)),
    ];
    let mut pass = by_group.len() == 4;
    let mut parts = Vec::new();
    for (name, group) in &by_group {
        let out = judge(&evaluate(group), group.len(), &checks);
        pass &= out.pass && group.len() == 50;
        parts.push(format!("{name}: {} {}", group.len(), if out.pass { "ok".to_string() } else { out.detail }));
    }
    let (same, total) = trivial_group_matches_plain_ksgns();
    pass &= same == total;
    parts.push(format!("trivial group identical to plain KSGNS on {same} of {total}"));
    Outcome { pass, detail: parts.join("; ") }
}

/// Reruns the reconstruction instances as trivial-group correspondences: the
/// dilation triple must match bit for bit and the dilated unitary must be the
/// identity up to rounding.
fn trivial_group_matches_plain_ksgns() -> (usize, usize) {
    let tol = Tolerance::default();
    let group = FiniteGroup::trivial();
    let inst = instances(&ksgns_config(), Suite::Ksgns);
    let same = inst
        .iter()
        .filter(|i| {
            let InstanceData::Ksgns { phi } = &i.data else { return false };
            let phi = phi.to_map().unwrap();
            let plain = ksgns(&phi, &tol).unwrap();
            let cor = EquivariantCorrespondence {
                group: group.clone(),
                source: DynamicalSystem::trivial(&phi.algebra, &group),
                coefficients: DynamicalSystem::trivial(phi.module.algebra(), &group),
                unitaries: vec![identity(phi.module.dim())],
                phi,
            };
            let q = dilate(&cor, &tol).unwrap();
            q.triple.embedding == plain.embedding
                && q.triple.representation.images == plain.representation.images
                && operator_norm(&(&q.unitaries[0] - identity(plain.dim()))).unwrap() <= 1e-12
        })
        .count();
    (same, inst.len())
}

fn uniqueness() -> Outcome {
    let inst = instances(&config(Suite::Uniqueness, 50), Suite::Uniqueness);
    judge(
        &evaluate(&inst),
        inst.len(),
        &[
            ("planted_recovery", Bound::Flat(1e-7)),
            ("unitarity", Bound::Flat(1e-8)),
            ("representation", Bound::Flat(1e-8)),
            ("embedding", Bound::Flat(1e-8)),
            ("unitaries", Bound::Flat(1e-8)),
        ],
    )
}

fn continuity() -> Outcome {
    let inst = instances(&config(Suite::Continuity, 50), Suite::Continuity);
    let steps_ok = inst.iter().all(|i| matches!(&i.data, InstanceData::Continuity { steps, .. } if *steps == 20));
    let mut out = judge(&evaluate(&inst), inst.len(), &[("monotone_decay", Bound::Flat(1e-9)), ("final_distance", Bound::Flat(1e-7))]);
    if !steps_ok {
        out.pass = false;
        out.detail = format!("paths are not 20 steps; {}", out.detail);
    }
    out
}

/// Theorems a corrupted instance of each suite may be reported under.
fn expected_theorems(suite: Suite) -> &'static [&'static str] {
    match suite {
        Suite::Ksgns | Suite::Tensor => &["completely positive map"],
        Suite::Lift | Suite::Idempotency | Suite::Continuity => &["morphism of CP maps"],
        Suite::Category => &["morphism of PosCor"],
        Suite::Equivariant | Suite::Dilation => &["equivariant correspondence"],
        Suite::Uniqueness => &["uniqueness of the equivariant dilation"],
    }
}

fn fault_injection() -> Outcome {
    let tol = Tolerance::default();
    let per_suite = 50usize.div_ceil(Suite::ALL.len());
    let mut pool = Vec::new();
    for suite in Suite::ALL {
        pool.extend(instances(&config(suite, per_suite), suite));
    }
    let mut corrupted = Vec::new();
    for k in 0..50 {
        let suite = Suite::ALL[k % Suite::ALL.len()];
        let base = pool.iter().filter(|i| i.data.suite() == suite).nth(k / Suite::ALL.len()).unwrap();
        let mut rng = rng_from_seed(SEED ^ k as u64);
        corrupted.push(inject_fault(base, &mut rng, &tol).unwrap());
    }
    let mut false_passes = Vec::new();
    let mut misnamed = Vec::new();
    for inst in &corrupted {
        let records = evaluate(std::slice::from_ref(inst));
        match records.iter().find(|r| !r.pass) {
            None => false_passes.push(format!("{} {}", inst.data.suite(), inst.seed)),
            Some(r) if !expected_theorems(inst.data.suite()).contains(&r.theorem.as_str()) => {
                misnamed.push(format!("{}: {}", inst.data.suite(), r.theorem))
            }
            Some(_) => {}
        }
    }
    Outcome {
        pass: false_passes.is_empty() && misnamed.is_empty(),
        detail: format!(
            "{} injections, {} false passes{}, {} misattributed{}",
            corrupted.len(),
            false_passes.len(),
            false_passes.first().map(|m| format!(" ({m})")).unwrap_or_default(),
            misnamed.len(),
            misnamed.first().map(|m| format!(" ({m})")).unwrap_or_default()
        ),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("KSGNS reconstruction and spanning", reconstruction),
        ("GNS dimensions against a Gram-rank oracle", gns_dimensions),
        ("KSGNS endofunctor laws and contraction", endofunctor),
        ("idempotency unitary and naturality", idempotency),
        ("tensor functor unitaries", tensor),
        ("category laws", category),
        ("lemma inequalities", lemmas),
        ("equivariant dilation", dilation),
        ("uniqueness of the dilation", uniqueness),
        ("continuity probes", continuity),
        ("fault injection", fault_injection),
    ];
    // `ACCEPTANCE_ONLY=3,11` runs a subset.
    let only: Option<Vec<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let out = run();
        if !out.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2}  {}  {name}  ({:.1} s)  {}",
            i + 1,
            if out.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            out.detail
        );
    }
    println!("{} of {ran} acceptance criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
