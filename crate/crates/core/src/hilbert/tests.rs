use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::algebra::{AlgebraShape, Element, LinearMap};
use crate::condexp::{group_average_ce, tensor_state_ce, trace_ce, validate_ce, weighted_corner_ce, CondExp};
use crate::inclusion::Embedding;
use crate::linalg::{self, re, CMat, CVec};
use crate::tol::Tolerances;

fn tol() -> Tolerances {
    Tolerances::default()
}

fn ex1() -> CondExp {
    trace_ce(&Embedding::scalars(&AlgebraShape::full(2)), &[1.0], &tol()).unwrap()
}

fn identity_ce(shape: &AlgebraShape) -> CondExp {
    let w = vec![1.0; shape.num_blocks()];
    trace_ce(&Embedding::identity(shape), &w, &tol()).unwrap()
}

fn pinching() -> CondExp {
    let emb = Embedding::new(AlgebraShape::diagonal(2), AlgebraShape::full(2), vec![vec![1, 1]], None).unwrap();
    trace_ce(&emb, &[1.0], &tol()).unwrap()
}

fn diag(vals: &[f64]) -> CMat {
    CMat::from_diagonal(&CVec::from_vec(vals.iter().map(|&v| re(v)).collect()))
}

fn random_trace_ce(seed: u64) -> CondExp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sub = AlgebraShape::new(vec![2, 1]).unwrap();
    let amb = AlgebraShape::new(vec![3, 5]).unwrap();
    let us = vec![linalg::haar_unitary(3, &mut rng), linalg::haar_unitary(5, &mut rng)];
    let emb = Embedding::new(sub, amb, vec![vec![1, 1], vec![2, 1]], Some(us)).unwrap();
    trace_ce(&emb, &[0.7, 1.9], &tol()).unwrap()
}

fn scalar_multiple(x: &Element) -> Option<f64> {
    let c = x.block(0)[(0, 0)].re;
    (x.distance(&Element::scalar(x.shape(), re(c))) < 1e-9).then_some(c)
}

#[test]
fn gram_operator_examples() {
    let e = ex1();
    let scaled: Vec<Element> = Element::basis(e.shape()).iter().map(|b| b * 2f64.sqrt()).collect();
    let q = gram_operator(&e, &scaled);
    assert!(linalg::max_abs(&(&q.blocks()[0] - CMat::identity(4, 4))) < 1e-14);
    let q = gram_operator(&e, &Element::basis(e.shape()));
    assert!(linalg::max_abs(&(&q.blocks()[0] - CMat::identity(4, 4) * re(0.5))) < 1e-14);
    assert!((q.entry(1, 1).block(0)[(0, 0)].re - 0.5).abs() < 1e-15);

    let id = identity_ce(&AlgebraShape::full(3));
    let q = gram_operator(&id, &[Element::identity(id.shape())]);
    assert!(linalg::max_abs(&(&q.blocks()[0] - CMat::identity(3, 3))) < 1e-14);
}

#[test]
fn quasi_basis_for_ex1_and_identity() {
    let qb = quasi_basis(&ex1()).unwrap();
    assert_eq!(qb.vectors.len(), 4);
    assert_eq!(qb.gram_pinv_rank, 4);
    assert!(qb.reconstruction_residual < 1e-12);

    let id = identity_ce(&AlgebraShape::new(vec![2, 1]).unwrap());
    let qb = quasi_basis_from_generators(&id, &[Element::identity(id.shape())], 1e-8).unwrap();
    assert!(qb.vectors[0].distance(&Element::identity(id.shape())) < 1e-12);
}

#[test]
fn quasi_basis_weights_for_three_point_reflection() {
    let e = group_average_ce(3, &[1, 0, 2], None, &tol()).unwrap();
    let qb = quasi_basis(&e).unwrap();
    let weights: Vec<f64> = qb.vectors.iter().map(|u| u.max_abs()).collect();
    let s = 2f64.sqrt();
    for (w, expected) in weights.iter().zip([s, s, 1.0]) {
        assert!((w - expected).abs() < 1e-12, "{weights:?}");
    }
    for (k, u) in qb.vectors.iter().enumerate() {
        assert!(u.block(k)[(0, 0)].norm() > 0.0);
        assert!(u.max_abs() - u.block(k)[(0, 0)].norm() < 1e-15);
    }
}

#[test]
fn index_values_on_paper_examples() {
    let ind = index_element(&ex1()).unwrap();
    assert!(ind.value.distance(&Element::scalar(ind.value.shape(), re(4.0))) < 1e-12);
    assert!((ind.norm - 4.0).abs() < 1e-12);

    let id = index_element(&identity_ce(&AlgebraShape::new(vec![2, 2]).unwrap())).unwrap();
    assert!((id.norm - 1.0).abs() < 1e-12 && (id.min_spectrum - 1.0).abs() < 1e-12);

    let expected = 2.0 + 10.0 / 3.0 + 5.0;
    for h in [1, 2] {
        let e = tensor_state_ce(h, &diag(&[0.5, 0.3, 0.2]), &tol()).unwrap();
        let ind = index_element(&e).unwrap();
        let c = scalar_multiple(&ind.value).expect("scalar index");
        assert!((c - expected).abs() < 1e-9 * expected);
    }

    let e = weighted_corner_ce(&AlgebraShape::full(1), 1.0 / 3.0, &tol()).unwrap();
    assert!((index_element(&e).unwrap().norm - 4.5).abs() < 1e-10);
}

#[test]
fn commutative_index_is_pointwise() {
    let e = group_average_ce(3, &[1, 0, 2], None, &tol()).unwrap();
    let ind = index_element(&e).unwrap();
    let pointwise: Vec<f64> = ind.value.blocks().iter().map(|b| b[(0, 0)].re).collect();
    for (v, expected) in pointwise.iter().zip([2.0, 2.0, 1.0]) {
        assert!((v - expected).abs() < 1e-12);
    }
}

#[test]
fn module_and_frame_routes_agree() {
    for seed in [1, 2, 3] {
        let e = random_trace_ce(seed);
        let frame = index_element(&e).unwrap();
        let bc = basic_construction(&e).unwrap();
        assert!(bc.index().distance(&frame.value) < 1e-9 * frame.norm);
        assert!(frame.basis_independence < 1e-9);
    }
}

#[test]
fn basic_construction_shapes() {
    let bc = basic_construction(&ex1()).unwrap();
    assert_eq!(bc.shape().blocks(), &[4]);
    assert_eq!(bc.jones().rank(1e-8), 1);
    assert!(bc.jones().is_projection(1e-12));

    let s = AlgebraShape::new(vec![2, 1]).unwrap();
    let bc = basic_construction(&identity_ce(&s)).unwrap();
    assert_eq!(bc.shape().blocks(), &[1, 2]);
    assert!(bc.jones().distance(&Element::identity(bc.shape())) < 1e-12);

    let bc = basic_construction(&pinching()).unwrap();
    assert_eq!(bc.shape().blocks(), &[2, 2]);
}

#[test]
fn theta_and_jones_relations_hold() {
    for e in [ex1(), pinching(), random_trace_ce(4), weighted_corner_ce(&AlgebraShape::new(vec![1, 2]).unwrap(), 0.3, &tol()).unwrap()] {
        let bc = basic_construction(&e).unwrap();
        assert!(bc.theta_residual < 1e-12, "{}", bc.theta_residual);
        assert!(bc.jones_relation_residual < 1e-12, "{}", bc.jones_relation_residual);
    }
}

/// Oracle: the commutant of right multiplication by `ι(B)` inside all linear
/// operators on `A`, by brute-force null space.
fn right_commutant_dim(e: &CondExp) -> usize {
    let shape = e.shape();
    let n = shape.dim();
    let gens = e.embedding().generators();
    let mut rows = Vec::new();
    for g in &gens {
        let r = LinearMap::from_fn(shape, shape, |x| x * g);
        rows.push(r.matrix().clone());
    }
    // T R - R T = 0, vectorized over T (n × n, row-major)
    let mut stacked = CMat::zeros(gens.len() * n * n, n * n);
    for (k, r) in rows.iter().enumerate() {
        for a in 0..n {
            for b in 0..n {
                let col = a * n + b;
                for c in 0..n {
                    // (T R)[a,c] += T[a,b] R[b,c]
                    stacked[(k * n * n + a * n + c, col)] += r[(b, c)];
                    // (R T)[c,b] += R[c,a] T[a,b]
                    stacked[(k * n * n + c * n + b, col)] -= r[(c, a)];
                }
            }
        }
    }
    linalg::null_space(&stacked, 1e-9).ncols()
}

#[test]
fn a1_matches_commutant_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let us = vec![linalg::haar_unitary(2, &mut rng), linalg::haar_unitary(3, &mut rng)];
    let small = Embedding::new(
        AlgebraShape::diagonal(2),
        AlgebraShape::new(vec![2, 3]).unwrap(),
        vec![vec![1, 1], vec![2, 1]],
        Some(us),
    )
    .unwrap();
    let small = trace_ce(&small, &[1.3, 0.4], &tol()).unwrap();
    for e in [ex1(), pinching(), small] {
        let bc = basic_construction(&e).unwrap();
        assert_eq!(bc.shape().dim(), right_commutant_dim(&e));
        // every element of A₁ is right-B-linear and adjointable with adjoint T*
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = Element::random(bc.shape(), &mut rng);
        let x = Element::random(e.shape(), &mut rng);
        let y = Element::random(e.shape(), &mut rng);
        let b = e.embedding().embed(&Element::random(e.sub_shape(), &mut rng)).unwrap();
        assert!(bc.act(&t, &(&x * &b)).distance(&(&bc.act(&t, &x) * &b)) < 1e-10);
        let lhs = e.apply(&(&bc.act(&t, &x).adjoint() * &y));
        let rhs = e.apply(&(&x.adjoint() * &bc.act(&t.adjoint(), &y)));
        assert!(lhs.distance(&rhs) < 1e-10);
    }
}

#[test]
fn next_expectation_is_validated_with_inverse_index_on_e() {
    for e in [ex1(), random_trace_ce(6)] {
        let bc = basic_construction(&e).unwrap();
        let next = next_expectation(&bc, &tol()).unwrap();
        assert!(next.validation.all_passed());
        assert!(next.jones_image_residual < 1e-10);
        assert!(validate_ce(&next.expectation, &tol()).all_passed());
    }
    let e = ex1();
    let next = next_expectation(&basic_construction(&e).unwrap(), &tol()).unwrap();
    let img = next.expectation.apply(basic_construction(&e).unwrap().jones());
    assert!(img.distance(&Element::scalar(img.shape(), re(0.25))) < 1e-12);

    let s = AlgebraShape::full(2);
    let id = identity_ce(&s);
    let next = next_expectation(&basic_construction(&id).unwrap(), &tol()).unwrap();
    assert!(next.expectation.map().distance(&LinearMap::identity(next.expectation.shape())) < 1e-12);
}

#[test]
fn tower_of_ex1() {
    let tower = jones_tower(&ex1(), 3, DEFAULT_DIM_BUDGET, &tol()).unwrap();
    let shapes: Vec<Vec<usize>> = tower.levels.iter().map(|l| l.algebra_shape.blocks().to_vec()).collect();
    assert_eq!(shapes, vec![vec![2], vec![4], vec![8], vec![16]]);
    for level in &tower.levels {
        assert_eq!(scalar_multiple(&level.index.value).map(|c| (c - 4.0).abs() < 1e-9), Some(true));
        if let Some(Stabilization::Checked { passed, .. }) = level.stabilization {
            assert!(passed);
        }
    }
    assert!(!tower.truncated);
    let tower = jones_tower(&ex1(), 3, 64, &tol()).unwrap();
    assert!(tower.truncated);
    assert_eq!(tower.levels.len(), 3);
}

#[test]
fn tower_of_identity_is_trivial() {
    let tower = jones_tower(&identity_ce(&AlgebraShape::full(2)), 2, 100, &tol()).unwrap();
    for level in &tower.levels {
        assert_eq!(level.algebra_shape.blocks(), &[2]);
        assert!((level.index.norm - 1.0).abs() < 1e-12);
    }
}

#[test]
fn stinespring_examples() {
    let id = identity_ce(&AlgebraShape::new(vec![2, 1]).unwrap());
    let s = stinespring(&id).unwrap();
    assert_eq!(s.module_dim, id.shape().dim());
    assert_eq!(s.gram_rank, Some(id.shape().dim()));

    let s = stinespring(&ex1()).unwrap();
    assert!(s.residual < 1e-12);
    assert_eq!(s.module_dim, 16);
    assert_eq!(s.gram_rank, Some(16));

    let e = group_average_ce(3, &[1, 0, 2], None, &tol()).unwrap();
    let s = stinespring(&e).unwrap();
    assert_eq!(s.module_dim, 5);
    assert_eq!(s.gram_rank, Some(5));

    let s = stinespring(&random_trace_ce(7)).unwrap();
    assert!(s.is_dense());
    assert!(s.residual < 1e-10);
}

