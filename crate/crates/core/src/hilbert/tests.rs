use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::cstar::{random_automorphism, random_unital_hom, AlgebraElement, StarMap};
use crate::numkernel::{c, frobenius, identity, kron, operator_norm, CMatrix, CVector, Tolerance};
use crate::random::{gaussian_matrix, rng_from_seed, Rng64};

fn shape(b: &[usize]) -> AlgebraShape {
    AlgebraShape::new(b.to_vec()).unwrap()
}

fn tol() -> Tolerance {
    Tolerance::default()
}

fn rand_vec(rng: &mut Rng64, n: usize) -> CVector {
    gaussian_matrix(rng, n, 1).column(0).into_owned()
}

fn module(b: &[usize], max_dim: usize, seed: u64) -> ModuleRef {
    Arc::new(random_module(&shape(b), max_dim, &mut rng_from_seed(seed)).unwrap())
}

const SHAPES: [&[usize]; 5] = [&[1], &[2], &[3], &[2, 2], &[1, 2]];

#[test]
fn random_modules_satisfy_axioms() {
    for (i, b) in SHAPES.iter().enumerate() {
        for seed in 0..5 {
            let e = module(b, 6, 100 * i as u64 + seed);
            let rep = e.to_pre().axiom_report(&tol()).unwrap();
            assert!(rep.passes(&tol(), 10.0), "{rep:?}");
            assert!(rep.min_gram_eigenvalue > 0.0);
        }
    }
}

#[test]
fn structure_is_gram_unitary_and_linear() {
    for (i, b) in SHAPES.iter().enumerate() {
        let e = module(b, 6, 7 + i as u64);
        let st = e.structure().unwrap();
        let sgs = st.s.adjoint() * e.gram() * &st.s;
        assert!(operator_norm(&(sgs - identity(e.dim()))).unwrap() < 1e-9);
        let mut rng = rng_from_seed(i as u64);
        let f = module(b, 6, 70 + i as u64);
        let m = random_linear_map(&e, &f, &mut rng).unwrap();
        assert!(linearity_residual_between(&e, &f, &m) < 1e-9);
        let u = random_unitary_map(&e, &mut rng).unwrap();
        assert!(unitarity_residual(&e, &e, &u) < 1e-9);
    }
}

#[test]
fn quotient_of_nondegenerate_input_keeps_dimension() {
    let e = module(&[1, 2], 6, 1);
    let quot = quotient_by_null(&e.to_pre(), &tol()).unwrap();
    assert_eq!(quot.module.dim(), e.dim());
    assert!(operator_norm(&(&quot.q * &quot.s - identity(e.dim()))).unwrap() < 1e-12);
}

#[test]
fn quotient_of_zero_pairing_is_zero_dimensional() {
    let b = shape(&[2]);
    let e = HilbertModule::standard(&b, &[2]).unwrap();
    let mut pre = e.to_pre();
    for p in &mut pre.pairing {
        *p = CMatrix::zeros(pre.dim, pre.dim);
    }
    let quot = quotient_by_null(&pre, &tol()).unwrap();
    assert_eq!(quot.module.dim(), 0);
    assert_eq!(quot.kernel.ncols(), 4);
}

#[test]
fn quotient_of_rank_one_scalar_gram() {
    let b = shape(&[1]);
    let g = CMatrix::from_element(2, 2, c(1.0, 0.0));
    let pre = PreModule::new(b, 2, vec![identity(2)], vec![g]).unwrap();
    let quot = quotient_by_null(&pre, &tol()).unwrap();
    assert_eq!(quot.module.dim(), 1);
    // The kept eigenvalue of [[1,1],[1,1]] is 2.
    assert!((quot.module.gram()[(0, 0)].re - 2.0).abs() < 1e-12);
}

#[test]
fn quotient_rejects_non_invariant_null_space() {
    let b = shape(&[1, 1]);
    // Null vector e₁ is moved onto e₀ by the action of the first unit.
    let mut r0 = CMatrix::zeros(2, 2);
    r0[(0, 1)] = c(1.0, 0.0);
    r0[(0, 0)] = c(1.0, 0.0);
    let mut r1 = identity(2) - &r0;
    r1[(0, 1)] = c(-1.0, 0.0);
    let p0 = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]));
    let pre = PreModule::new(b, 2, vec![r0, r1], vec![p0, CMatrix::zeros(2, 2)]).unwrap();
    assert!(matches!(quotient_by_null(&pre, &tol()), Err(Error::SubmoduleViolation { .. })));
}

#[test]
fn quotient_kills_exactly_the_null_vectors() {
    let mut rng = rng_from_seed(3);
    let b = shape(&[1, 2]);
    let e = HilbertModule::standard(&b, &[1, 2]).unwrap();
    // Duplicate coordinates through a tall map to create a null space.
    let t = gaussian_matrix(&mut rng, e.dim(), e.dim() + 3);
    let tp = crate::numkernel::pseudo_inverse(&t, &tol()).unwrap();
    let pre = PreModule::new(
        b.clone(),
        e.dim() + 3,
        e.action().iter().map(|r| &tp * r * &t).collect(),
        e.pairing().iter().map(|p| t.adjoint() * p * &t).collect(),
    )
    .unwrap();
    let g = pre.gram();
    let quot = quotient_by_null(&pre, &tol()).unwrap();
    assert_eq!(quot.module.dim(), e.dim());
    let lmax = operator_norm(&g).unwrap();
    for k in 0..quot.kernel.ncols() {
        let z = quot.kernel.column(k);
        assert!((z.adjoint() * &g * z)[(0, 0)].norm() <= tol().ctol * lmax);
    }
}

#[test]
fn adjoint_examples() {
    let e = module(&[2], 4, 5);
    let id = ModuleMap::identity(&e);
    assert!(operator_norm(&(adjoint_map(&id).matrix - identity(e.dim()))).unwrap() < 1e-10);
    let s = Arc::new(HilbertModule::standard(&shape(&[1]), &[3]).unwrap());
    let mut rng = rng_from_seed(1);
    let m = gaussian_matrix(&mut rng, 3, 3);
    let eta = ModuleMap::new(s.clone(), s.clone(), m.clone(), &tol()).unwrap();
    assert!(frobenius(&(eta.adjoint().matrix - m.adjoint())) < 1e-12);
}

#[test]
fn adjoint_identity_on_random_maps() {
    for (i, b) in SHAPES.iter().enumerate() {
        let mut rng = rng_from_seed(40 + i as u64);
        let e = module(b, 6, 10 + i as u64);
        let f = module(b, 6, 20 + i as u64);
        let m = random_linear_map(&e, &f, &mut rng).unwrap();
        let eta = ModuleMap::new(e.clone(), f.clone(), m, &tol()).unwrap();
        let adj = eta.adjoint();
        let n = eta.norm();
        assert!(adjoint_identity_residual(&e, &f, &eta.matrix, &adj.matrix) <= tol().threshold(n));
        assert!(frobenius(&(adj.adjoint().matrix - &eta.matrix)) <= tol().threshold(n));
        assert!(adj.linearity_residual() <= tol().threshold(n));
    }
}

#[test]
fn adjoint_is_unique_under_perturbation() {
    let mut rng = rng_from_seed(2);
    let e = module(&[1, 2], 6, 2);
    let f = module(&[1, 2], 6, 3);
    let m = random_linear_map(&e, &f, &mut rng).unwrap();
    let adj = adjoint_matrix(&e, &f, &m);
    let z = random_linear_map(&f, &e, &mut rng).unwrap();
    let perturbed = &adj + z * c(1e-3, 0.0);
    assert!(adjoint_identity_residual(&e, &f, &m, &adj) < 1e-9);
    assert!(adjoint_identity_residual(&e, &f, &m, &perturbed) > 1e-6);
}

#[test]
fn module_norm_examples_and_c_star_identity() {
    let e = module(&[2, 2], 6, 11);
    assert!((ModuleMap::identity(&e).norm() - 1.0).abs() < 1e-10);
    let zero = ModuleMap::unchecked(e.clone(), e.clone(), CMatrix::zeros(e.dim(), e.dim())).unwrap();
    assert_eq!(zero.norm(), 0.0);
    let mut rng = rng_from_seed(12);
    for (i, b) in SHAPES.iter().enumerate() {
        let e = module(b, 6, 30 + i as u64);
        let f = module(b, 6, 35 + i as u64);
        let eta = ModuleMap::unchecked(e.clone(), f.clone(), random_linear_map(&e, &f, &mut rng).unwrap()).unwrap();
        let n = eta.norm();
        let nn = eta.adjoint().after(&eta).unwrap().norm();
        assert!((n * n - nn).abs() <= 1e-8 * (1.0 + n * n));
    }
}

#[test]
fn module_norm_is_submultiplicative() {
    let mut rng = rng_from_seed(13);
    let e = module(&[1, 2], 3, 14);
    for _ in 0..20 {
        let a = random_linear_map(&e, &e, &mut rng).unwrap();
        let b = random_linear_map(&e, &e, &mut rng).unwrap();
        assert!(map_norm(&e, &e, &(&a * &b)) <= map_norm(&e, &e, &a) * map_norm(&e, &e, &b) + 1e-8);
    }
}

#[test]
fn rank_one_operator_examples() {
    let mut rng = rng_from_seed(4);
    let e = module(&[1, 2], 6, 4);
    let x = rand_vec(&mut rng, e.dim());
    let zero = rank_one_operator(&e, &x, &CVector::zeros(e.dim()));
    assert_eq!(frobenius(&zero.matrix), 0.0);

    let s = Arc::new(HilbertModule::standard(&shape(&[1]), &[3]).unwrap());
    let x = rand_vec(&mut rng, 3);
    let y = rand_vec(&mut rng, 3);
    let th = rank_one_operator(&s, &x, &y);
    assert!(frobenius(&(th.matrix - &x * y.adjoint())) < 1e-12);
}

#[test]
fn rank_one_operator_unfolds_and_has_swapped_adjoint() {
    let mut rng = rng_from_seed(5);
    for (i, b) in SHAPES.iter().enumerate() {
        let e = module(b, 6, 50 + i as u64);
        let x = rand_vec(&mut rng, e.dim());
        let y = rand_vec(&mut rng, e.dim());
        let z = rand_vec(&mut rng, e.dim());
        let th = rank_one_operator(&e, &x, &y);
        let direct = e.action_of(&e.inner(&y, &z)) * &x;
        assert!((th.apply(&z) - direct).norm() < 1e-9 * (1.0 + x.norm() * y.norm() * z.norm()));
        let swapped = rank_one_operator(&e, &y, &x);
        let scale = th.norm();
        assert!(operator_norm(&(th.adjoint().matrix - swapped.matrix)).unwrap() <= tol().threshold(scale));
        assert!(th.linearity_residual() <= tol().threshold(scale));
    }
}

#[test]
fn scalarized_cauchy_schwarz() {
    let mut rng = rng_from_seed(6);
    for (i, b) in SHAPES.iter().enumerate() {
        let e = module(b, 6, 60 + i as u64);
        for _ in 0..20 {
            let x = rand_vec(&mut rng, e.dim());
            let y = rand_vec(&mut rng, e.dim());
            let alg = e.algebra();
            let xy = alg.trace(&e.inner(&x, &y)).norm_sqr();
            let xx = alg.trace(&e.inner(&x, &x)).re;
            let yy = alg.trace(&e.inner(&y, &y)).re;
            assert!(xy <= xx * yy + tol().ctol * (1.0 + xx * yy));
        }
    }
}

#[test]
fn inclusion_unitary_examples() {
    let b = shape(&[1, 2]);
    let bb: ModuleRef = Arc::new(HilbertModule::over_itself(&b));
    let (t, iota) = inclusion_unitary(&bb, &tol()).unwrap();
    assert_eq!(t.module.dim(), b.dim());
    assert!(iota.unitarity_residual() < 1e-8);
    // ι[1 ⊗ b] = b.
    let mut rng = rng_from_seed(7);
    let x = rand_vec(&mut rng, b.dim());
    let pre =
        kron(&CMatrix::from_column_slice(b.dim(), 1, b.unit_coords().as_slice()), &CMatrix::from_column_slice(b.dim(), 1, x.as_slice()));
    let img = &iota.matrix * (&t.q * pre);
    assert!((img.column(0) - &x).norm() < 1e-9);

    for (i, s) in SHAPES.iter().enumerate() {
        let e = module(s, 6, 80 + i as u64);
        let (t, iota) = inclusion_unitary(&e, &tol()).unwrap();
        assert_eq!(t.module.dim(), e.dim());
        assert!(iota.linearity_residual() < 1e-8);
        let inv = iota.adjoint();
        for _ in 0..50 {
            let x = rand_vec(&mut rng, e.dim());
            assert!((iota.apply(&inv.apply(&x)) - &x).norm() <= 1e-8 * (1.0 + x.norm()));
        }
        // V_inc coincides with ι*.
        assert!(operator_norm(&(v_rho(&t) - inv.matrix)).unwrap() < 1e-8);
    }
}

#[test]
fn v_rho_is_twisted_linear_contraction() {
    let mut rng = rng_from_seed(8);
    let e = module(&[2], 4, 8);
    let rho = random_unital_hom(&shape(&[2]), &shape(&[2, 2]), &mut rng).unwrap();
    let t = tensor_with_algebra(&e, &rho, &tol()).unwrap();
    let v = v_rho(&t);
    assert_eq!((&v * CVector::zeros(e.dim())).norm(), 0.0);
    for _ in 0..20 {
        let x = rand_vec(&mut rng, e.dim());
        let vx = &v * &x;
        assert!(t.module.vector_norm(&vx) <= e.vector_norm(&x) + 1e-8);
        for k in 0..e.algebra().dim() {
            let bk = e.algebra().basis_vector(k);
            let lhs = &v * (e.action_of(&bk) * &x);
            let rhs = t.module.action_of(&rho.apply(&bk)) * &vx;
            assert!((lhs - rhs).norm() < 1e-8 * (1.0 + x.norm()));
        }
    }
}

#[test]
fn twist_unitary_identity_and_self_module() {
    let e = module(&[1, 2], 6, 9);
    let id = crate::cstar::Automorphism::identity(e.algebra());
    let (t, u) = twist_unitary(&e, &id, &tol()).unwrap();
    assert_eq!(t.module.dim(), e.dim());
    let (_, iota) = inclusion_unitary(&e, &tol()).unwrap();
    assert!(operator_norm(&(&u.matrix - &iota.matrix)).unwrap() < 1e-8);

    let mut rng = rng_from_seed(9);
    for s in SHAPES {
        let b = shape(s);
        let bb: ModuleRef = Arc::new(HilbertModule::over_itself(&b));
        let alpha = random_automorphism(&b, &mut rng);
        let (t, u) = twist_unitary(&bb, &alpha, &tol()).unwrap();
        assert_eq!(t.module.dim(), b.dim());
        assert!(u.twisted_pairing_residual() < 1e-8);
    }
}

#[test]
fn twist_unitary_preserves_norms() {
    let mut rng = rng_from_seed(10);
    let e = module(&[2, 2], 6, 10);
    let alpha = random_automorphism(e.algebra(), &mut rng);
    let (t, u) = twist_unitary(&e, &alpha, &tol()).unwrap();
    assert!(u.twisted_pairing_residual() < 1e-8);
    for _ in 0..50 {
        let x = rand_vec(&mut rng, t.module.dim());
        let lhs = e.vector_norm(&(&u.matrix * &x));
        let rhs = t.module.vector_norm(&x);
        assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + rhs));
    }
}

/// `x ↦ (P ⊗ M_α) x` on `B^{⊕n}`: an α-linear, α-adjointable unitary.
fn permuted_twist(b: &AlgebraShape, n: usize, alpha: &crate::cstar::Automorphism, rng: &mut Rng64) -> (ModuleRef, CMatrix) {
    let e: ModuleRef = Arc::new(HilbertModule::standard(b, &b.blocks().iter().map(|&k| k * n).collect::<Vec<_>>()).unwrap());
    let mut perm = CMatrix::zeros(n, n);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.rotate_left(crate::random::index(rng, n.max(1)));
    for (i, &j) in idx.iter().enumerate() {
        perm[(j, i)] = c(1.0, 0.0);
    }
    // Standard coordinates of B^{⊕n} interleave copies inside each block, so
    // assemble the map from the direct-sum picture and reorder.
    let direct = kron(&perm, &alpha.map.matrix);
    let d = b.dim();
    let mut reorder = CMatrix::zeros(n * d, n * d);
    let mut off = 0;
    for (i, &k) in b.blocks().iter().enumerate() {
        for copy in 0..n {
            for r in 0..k {
                for col in 0..k {
                    let std_idx = off + (copy * k + r) * k + col;
                    let sum_idx = copy * d + b.index(i, r, col);
                    reorder[(std_idx, sum_idx)] = c(1.0, 0.0);
                }
            }
        }
        off += n * k * k;
    }
    let m = &reorder * direct * reorder.transpose();
    (e, m)
}

#[test]
fn alpha_transport_round_trip_and_unitarity() {
    let mut rng = rng_from_seed(11);
    for s in SHAPES {
        let b = shape(s);
        let alpha = random_automorphism(&b, &mut rng);
        let (e, m) = permuted_twist(&b, 2, &alpha, &mut rng);
        let t = AlphaLinearMap::new(e.clone(), e.clone(), alpha.clone(), m, &tol()).unwrap();
        assert!(t.twisted_pairing_residual() < 1e-8);
        let tw = twist_unitary(&e, &alpha, &tol()).unwrap();
        let moved = alpha_transport(&t, &alpha, &tw, &tol()).unwrap();
        assert!(moved.unitarity_residual() < 1e-8);
        let back = alpha_untransport(&moved, &alpha, &tw, &tol()).unwrap();
        assert!(operator_norm(&(back.matrix - &t.matrix)).unwrap() < 1e-8);
        // Transporting U⁻¹ itself gives the identity.
        let u_inv = crate::numkernel::pseudo_inverse(&tw.1.matrix, &tol()).unwrap();
        let tinv = AlphaLinearMap::new(e.clone(), tw.0.module.clone(), alpha.clone(), u_inv, &tol()).unwrap();
        let ident = alpha_transport(&tinv, &alpha, &tw, &tol()).unwrap();
        assert!(operator_norm(&(ident.matrix - identity(tw.0.module.dim()))).unwrap() < 1e-8);
        // A wrong twist is rejected.
        let other = random_automorphism(&b, &mut rng);
        if other.distance(&alpha) > 1e-3 {
            assert!(matches!(alpha_transport(&t, &other, &tw, &tol()), Err(Error::TwistMismatch { .. })));
        }
    }
}

#[test]
fn alpha_transport_with_identity_twist_is_inclusion() {
    let mut rng = rng_from_seed(12);
    let e = module(&[1, 2], 6, 12);
    let id = crate::cstar::Automorphism::identity(e.algebra());
    let m = random_linear_map(&e, &e, &mut rng).unwrap();
    let t = AlphaLinearMap::new(e.clone(), e.clone(), id.clone(), m.clone(), &tol()).unwrap();
    let tw = twist_unitary(&e, &id, &tol()).unwrap();
    let moved = alpha_transport(&t, &id, &tw, &tol()).unwrap();
    let (_, iota) = inclusion_unitary(&e, &tol()).unwrap();
    assert!(operator_norm(&(moved.matrix - m * &iota.matrix)).unwrap() < 1e-8);
}

#[test]
fn composition_unitary_examples() {
    let mut rng = rng_from_seed(13);
    let b = shape(&[2]);
    let e = module(&[2], 4, 13);
    let id = StarMap::identity(&b);
    let data = composition_unitary(&e, &id, &id, &tol()).unwrap();
    assert!(unitarity_residual(&data.outer.module, &data.combined.module, &data.unitary) < 1e-8);
    // With identity maps the unitary is ι_combined* ∘ ι_inner ∘ ι_outer.
    let i_outer = inclusion_on(&data.inner.module, &data.outer);
    let i_inner = inclusion_on(&e, &data.inner);
    let i_comb = inclusion_on(&e, &data.combined);
    let expected = crate::numkernel::pseudo_inverse(&i_comb, &tol()).unwrap() * i_inner * i_outer;
    assert!(operator_norm(&(&data.unitary - expected)).unwrap() < 1e-8);

    let c2 = shape(&[2, 2]);
    let d4 = shape(&[4]);
    for _ in 0..5 {
        let r1 = random_unital_hom(&b, &c2, &mut rng).unwrap();
        let r2 = random_unital_hom(&c2, &d4, &mut rng).unwrap();
        let data = composition_unitary(&e, &r1, &r2, &tol()).unwrap();
        assert_eq!(data.outer.module.dim(), data.combined.module.dim());
        assert!(unitarity_residual(&data.outer.module, &data.combined.module, &data.unitary) < 1e-8);
        assert!(linearity_residual_between(&data.outer.module, &data.combined.module, &data.unitary) < 1e-8);
    }
}

#[test]
fn diagram_composite_of_v_maps() {
    let mut rng = rng_from_seed(14);
    let b = shape(&[1, 2]);
    let e = module(&[1, 2], 3, 14);
    for _ in 0..10 {
        let (cs, rho) = crate::cstar::random_hom_and_codomain(&b, 3, 2, &mut rng).unwrap();
        let (_, chi) = crate::cstar::random_hom_and_codomain(&cs, 3, 1, &mut rng).unwrap();
        let data = composition_unitary(&e, &rho, &chi, &tol()).unwrap();
        let lhs = &data.unitary * v_rho(&data.outer) * v_rho(&data.inner);
        let rhs = v_rho(&data.combined);
        assert!(operator_norm(&(lhs - rhs)).unwrap() < 1e-8);
    }
}

#[test]
fn diagram_square_for_tensored_maps() {
    let mut rng = rng_from_seed(15);
    let b2 = shape(&[2]);
    let e = module(&[1, 2], 6, 15);
    let rho = random_unital_hom(e.algebra(), &b2, &mut rng)
        .unwrap_or_else(|_| crate::cstar::star_hom_from_multiplicities(e.algebra(), &b2, &[vec![0, 1]], &[identity(2)]).unwrap());
    let t = tensor_with_algebra(&e, &rho, &tol()).unwrap();
    let e2 = module(&[2], 6, 16);
    let eta = random_linear_map(&t.module, &e2, &mut rng).unwrap();
    let (_, chi) = crate::cstar::random_hom_and_codomain(&b2, 2, 2, &mut rng).unwrap();
    let t_left = tensor_with_algebra(&t.module, &chi, &tol()).unwrap();
    let t_right = tensor_with_algebra(&e2, &chi, &tol()).unwrap();
    let hat = tensor_map(&eta, &t_left, &t_right, &tol()).unwrap();
    let lhs = hat * v_rho(&t_left);
    let rhs = v_rho(&t_right) * &eta;
    assert!(operator_norm(&(lhs - rhs)).unwrap() <= tol().threshold(operator_norm(&eta).unwrap()));
}

#[test]
fn module_json_round_trip() {
    let e = module(&[1, 2], 6, 17);
    let txt = serde_json::to_string(&*e).unwrap();
    let back: HilbertModule = serde_json::from_str(&txt).unwrap();
    assert_eq!(&back, &*e);
    let mut bad = e.to_pre();
    bad.pairing[0] = bad.pairing[0].clone() * c(-1.0, 0.0);
    assert!(HilbertModule::new(bad, &tol()).is_err());
}

#[test]
fn element_inner_product_matches_algebra_for_self_module() {
    let b = shape(&[1, 2]);
    let bb = HilbertModule::over_itself(&b);
    let mut rng = rng_from_seed(18);
    let x = rand_vec(&mut rng, b.dim());
    let y = rand_vec(&mut rng, b.dim());
    let expected = AlgebraElement::from_coords(&b, &x).adjoint().mul(&AlgebraElement::from_coords(&b, &y)).unwrap();
    assert!((bb.inner(&x, &y) - expected.coords()).norm() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn prop_theta_adjoint(seed in any::<u64>(), which in 0usize..5) {
        let mut rng = rng_from_seed(seed);
        let e = Arc::new(random_module(&shape(SHAPES[which]), 6, &mut rng).unwrap());
        let x = rand_vec(&mut rng, e.dim());
        let y = rand_vec(&mut rng, e.dim());
        let th = rank_one_operator(&e, &x, &y);
        let sw = rank_one_operator(&e, &y, &x);
        prop_assert!(operator_norm(&(th.adjoint().matrix - sw.matrix)).unwrap() <= tol().threshold(th.norm()));
    }

    #[test]
    fn prop_quotient_gram_positive_definite(seed in any::<u64>(), extra in 0usize..4) {
        let mut rng = rng_from_seed(seed);
        let b = shape(&[1, 2]);
        let e = random_module(&b, 6, &mut rng).unwrap();
        let t = gaussian_matrix(&mut rng, e.dim(), e.dim() + extra);
        let tp = crate::numkernel::pseudo_inverse(&t, &tol()).unwrap();
        let pre = PreModule::new(
            b,
            e.dim() + extra,
            e.action().iter().map(|r| &tp * r * &t).collect(),
            e.pairing().iter().map(|p| t.adjoint() * p * &t).collect(),
        ).unwrap();
        let quot = quotient_by_null(&pre, &tol()).unwrap();
        prop_assert_eq!(quot.module.dim(), e.dim());
        let lo = crate::numkernel::herm_eig(quot.module.gram(), &tol()).unwrap().values[0];
        prop_assert!(lo > 0.0);
    }
}
