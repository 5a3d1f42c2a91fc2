//! Seeded random trace-expectation scenarios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::scenario::{CheckId, EmbeddingSpec, ExpectationSpec, Scenario, ToleranceOverrides};
use crate::linalg;

const MAX_TRIES: usize = 1000;
const MAX_MULTIPLICITY: usize = 2;

/// A random unital inclusion with Haar block unitaries and random positive
/// trace weights. Every block of `A` and `B` has dimension at most
/// `max_block_dim`, and each algebra has at most `max_blocks` blocks.
pub fn random_scenario(seed: u64, max_blocks: usize, max_block_dim: usize) -> Scenario {
    let max_blocks = max_blocks.max(1);
    let max_block_dim = max_block_dim.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (sub, amb, inclusion) = (0..MAX_TRIES)
        .find_map(|_| draw_inclusion(&mut rng, max_blocks, max_block_dim))
        .unwrap_or_else(|| {
            let m = rng.random_range(1..=max_block_dim);
            (vec![m], vec![m], vec![vec![1]])
        });
    let unitaries = amb.iter().map(|&n| linalg::haar_unitary(n, &mut rng)).collect();
    let weights = amb.iter().map(|_| rng.random_range(0.2..2.0)).collect();
    Scenario {
        name: format!("random-{seed}"),
        seed,
        expectation: ExpectationSpec::Trace {
            embedding: EmbeddingSpec {
                sub_blocks: sub,
                amb_blocks: amb,
                inclusion,
                unitaries: Some(unitaries),
            },
            weights,
        },
        tolerances: ToleranceOverrides::default(),
        restarts: None,
        tower_levels: None,
        checks: CheckId::default_set()
            .into_iter()
            .filter(|&c| c != CheckId::Tower)
            .collect(),
        expected_violations: Vec::new(),
    }
}

type Drawn = (Vec<usize>, Vec<usize>, Vec<Vec<usize>>);

fn draw_inclusion(rng: &mut ChaCha8Rng, max_blocks: usize, max_block_dim: usize) -> Option<Drawn> {
    let kb = rng.random_range(1..=max_blocks);
    let ka = rng.random_range(1..=max_blocks);
    let sub: Vec<usize> = (0..kb).map(|_| rng.random_range(1..=max_block_dim)).collect();
    let inclusion: Vec<Vec<usize>> = (0..ka)
        .map(|_| (0..kb).map(|_| rng.random_range(0..=MAX_MULTIPLICITY)).collect())
        .collect();
    let amb: Vec<usize> = inclusion
        .iter()
        .map(|row| row.iter().zip(&sub).map(|(l, m)| l * m).sum())
        .collect();
    let rows_ok = amb.iter().all(|&n| (1..=max_block_dim).contains(&n));
    let cols_ok = (0..kb).all(|j| inclusion.iter().any(|row| row[j] > 0));
    (rows_ok && cols_ok).then_some((sub, amb, inclusion))
}
