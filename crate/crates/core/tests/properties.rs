use findex_core::condexp::{trace_ce, validate_ce, CondExp};
use findex_core::constants::{compute_k, compute_l, k_ratio, kadison_check, pimsner_popa_check, BlockVector};
use findex_core::corpus::random_scenario;
use findex_core::hilbert::{basic_construction, index_element, next_expectation, quasi_basis};
use findex_core::linalg::{self, re};
use findex_core::tol::integer_part;
use findex_core::{AlgebraShape, Element, Embedding, Tolerances};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tol() -> Tolerances {
    Tolerances::default()
}

fn scenario_ce(seed: u64) -> CondExp {
    let s = random_scenario(seed, 2, 4);
    s.build(&s.tolerances.resolve()).unwrap()
}

fn pinching(n: usize) -> CondExp {
    let emb = Embedding::new(AlgebraShape::diagonal(n), AlgebraShape::full(n), vec![vec![1; n]], None).unwrap();
    trace_ce(&emb, &[1.0], &tol()).unwrap()
}

// Normalized trace on M_n: the orthonormal matrix units scaled by √n form a
// quasi-basis, so Ind = n·n² / n = n², and ξ = η = e_0 gives K = n.
#[test]
fn scalar_trace_oracle() {
    for n in 1..=4 {
        let e = trace_ce(&Embedding::scalars(&AlgebraShape::full(n)), &[1.0], &tol()).unwrap();
        let nn = (n * n) as f64;
        assert!((compute_k(&e, 8, 3).value - n as f64).abs() < 1e-9);
        assert!((compute_l(&e).value - nn).abs() < 1e-9);
        let ind = index_element(&e).unwrap();
        assert!(ind.value.distance(&Element::scalar(e.shape(), re(nn))) < 1e-9);
    }
}

// Pinching onto the diagonal: the matrix units e_ij are a quasi-basis with
// Σ e_ij e_ji = n·1; the all-ones vector gives K = n.
#[test]
fn pinching_oracle() {
    for n in 2..=5 {
        let e = pinching(n);
        assert!((compute_k(&e, 8, 5).value - n as f64).abs() < 1e-9);
        assert!((compute_l(&e).value - n as f64).abs() < 1e-9);
        let ind = index_element(&e).unwrap();
        assert!(ind.value.distance(&Element::scalar(e.shape(), re(n as f64))) < 1e-9);
    }
}

fn sampled_k_lower_bound(e: &CondExp, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = e.shape();
    let mut best = 0.0_f64;
    for s in 0..samples {
        let block = s % shape.num_blocks();
        let n = shape.block(block);
        let xi = BlockVector {
            block,
            vector: linalg::gaussian_unit_vector(n, &mut rng),
        };
        let eta = BlockVector {
            block,
            vector: linalg::gaussian_unit_vector(n, &mut rng),
        };
        best = best.max(k_ratio(e.map(), &xi, &eta)).max(k_ratio(e.map(), &xi, &xi));
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn constants_sandwich_and_index(seed in 0u64..100_000) {
        let e = scenario_ce(seed);
        let k = compute_k(&e, 8, seed).value;
        let l = compute_l(&e).value;
        prop_assert!(k <= l + 1e-9);
        prop_assert!(l <= k * integer_part(k) + 1e-6);
        prop_assert!(!(1.0 + 1e-9..=2.0 - 1e-6).contains(&k));
        let ind = index_element(&e).unwrap();
        prop_assert!((ind.norm - l).abs() <= 1e-8 * l.max(1.0));
        prop_assert!(ind.is_central && ind.min_spectrum >= 1.0 - 1e-9);
        // no sampled pair beats the certified maximum
        prop_assert!(sampled_k_lower_bound(&e, 400, seed) <= k + 1e-9);
    }

    #[test]
    fn quasi_basis_reconstructs(seed in 0u64..100_000) {
        let e = scenario_ce(seed);
        let qb = quasi_basis(&e).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Element::random(e.shape(), &mut rng);
        let rebuilt = qb.vectors.iter().fold(Element::zeros(e.shape()), |acc, u| {
            &acc + &(u * &e.apply(&(&u.adjoint() * &x)))
        });
        prop_assert!(rebuilt.distance(&x) <= 1e-9 * x.frobenius_norm());
    }

    #[test]
    fn kadison_and_pimsner_popa_hold(seed in 0u64..100_000) {
        let e = scenario_ce(seed);
        let k = compute_k(&e, 8, seed).value;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        for _ in 0..10 {
            let a = Element::random_self_adjoint(e.shape(), &mut rng);
            let a = &a * (1.0 / a.operator_norm());
            prop_assert!(kadison_check(&e, k, &a, 1e-9).unwrap().passed(1e-8));
        }
        prop_assert!(pimsner_popa_check(&e, k, 10, seed).passed(1e-8));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn basic_construction_expectation_is_valid(seed in 0u64..100_000) {
        let e = scenario_ce(seed);
        let bc = basic_construction(&e).unwrap();
        let next = next_expectation(&bc, &tol()).unwrap();
        prop_assert!(next.validation.all_passed());
        prop_assert!(validate_ce(&next.expectation, &tol()).all_passed());
        prop_assert!(next.jones_image_residual <= 1e-8);
        // e is a projection and e·π(x)·e = π(E(x))·e
        let jones = bc.jones();
        prop_assert!((jones * jones).distance(jones) < 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Element::random(e.shape(), &mut rng);
        let pi = bc.pi();
        let lhs = &(jones * &pi.embed(&x).unwrap()) * jones;
        let rhs = &pi.embed(&e.apply(&x)).unwrap() * jones;
        prop_assert!(lhs.distance(&rhs) < 1e-9 * x.frobenius_norm().max(1.0));
    }
}
