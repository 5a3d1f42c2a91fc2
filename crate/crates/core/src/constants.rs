//! The positivity constant `K(E)`, the complete-positivity constant `L(E)`,
//! and the pointwise inequalities they control.
//!
//! `K(E)` is maximized directly as a quotient by an alternating see-saw over
//! block-supported unit vectors. `L(E)` is the top of a generalized
//! eigenvalue pencil of Choi matrices, evaluated one block pair at a time.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{Element, LinearMap};
use crate::condexp::{CondExp, Params};
use crate::error::{Error, Result};
use crate::linalg::{self, re, CMat, CVec};

/// A unit vector living in one block of a multi-matrix algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    pub block: usize,
    pub vector: CVec,
}

impl BlockVector {
    pub fn basis(n: usize, block: usize, k: usize) -> Self {
        let mut v = CVec::zeros(n);
        v[k] = re(1.0);
        Self { block, vector: v }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Seesaw,
    ChoiPencil,
    ClosedForm,
}

#[derive(Debug, Clone)]
pub struct Certificate {
    /// `f64::INFINITY` when no finite constant exists.
    pub value: f64,
    pub witness_xi: Option<BlockVector>,
    pub witness_eta: Option<BlockVector>,
    pub residual: f64,
    pub method: Method,
    pub restarts_used: usize,
    pub converged: bool,
}

impl Certificate {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

#[derive(Debug, Clone)]
pub struct Margin {
    pub value: f64,
    pub xi: BlockVector,
    pub eta: BlockVector,
    pub converged: bool,
    pub restarts: usize,
}

const SEESAW_MAX_ITER: usize = 5000;
const SEESAW_REL_STEP: f64 = 1e-14;
/// Eigenvalues below this count as zero denominators.
const NULL_EIGENVALUE: f64 = 1e-12;
/// Squared weight outside the support that signals an unbounded quotient.
const NULL_WEIGHT: f64 = 1e-9;

fn rng_for(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

fn outer(v: &CVec) -> CMat {
    v * v.adjoint()
}

fn normalized(v: CVec) -> CVec {
    let n = v.norm();
    if n > 0.0 {
        v / re(n)
    } else {
        v
    }
}

/// Minimal eigenpair over all blocks; ties go to the lowest block.
fn min_over_blocks(x: &Element) -> (f64, BlockVector) {
    let mut best: Option<(f64, BlockVector)> = None;
    for (i, b) in x.blocks().iter().enumerate() {
        let (v, vec) = linalg::min_eigenpair(b);
        if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
            best = Some((v, BlockVector { block: i, vector: vec }));
        }
    }
    best.expect("shapes have at least one block")
}

/// `min Re⟨η, Φ(ξξ*)η⟩` over unit `ξ` in a single block and unit `η`.
///
/// Each restart starts from a seeded random `ξ` in block `r mod #blocks`
/// and alternates minimal-eigenvector updates; the lowest stationary value
/// over all restarts is returned with its witness pair.
pub fn positivity_margin(phi: &LinearMap, restarts: usize, seed: u64) -> Margin {
    let shape = phi.domain().clone();
    let runs = restarts.max(shape.num_blocks());
    let results: Vec<Margin> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(seed, r);
            let block = r % shape.num_blocks();
            let xi = linalg::gaussian_unit_vector(shape.block(block), &mut rng);
            margin_run(phi, BlockVector { block, vector: xi })
        })
        .collect();
    let mut best = results
        .into_iter()
        .reduce(|a, b| if b.value < a.value { b } else { a })
        .unwrap();
    best.restarts = runs;
    best
}

fn margin_run(phi: &LinearMap, mut xi: BlockVector) -> Margin {
    let mut prev = f64::INFINITY;
    let converged;
    let mut eta;
    let mut value;
    let mut iter = 0;
    loop {
        let img = phi.apply_from_block(xi.block, &outer(&xi.vector));
        let img = img.map_blocks(linalg::hermitian_part);
        (value, eta) = min_over_blocks(&img);
        let back = phi.apply_adjoint_from_block(eta.block, &outer(&eta.vector));
        let back = back.map_blocks(linalg::hermitian_part);
        let (v2, next_xi) = min_over_blocks(&back);
        iter += 1;
        if prev - v2 <= SEESAW_REL_STEP * (1.0 + v2.abs()) || iter >= SEESAW_MAX_ITER {
            converged = iter < SEESAW_MAX_ITER;
            if v2 < value {
                // keep the pair that attains the reported value
                xi = next_xi;
                let img = phi.apply_from_block(xi.block, &outer(&xi.vector));
                let (v3, e3) = min_over_blocks(&img.map_blocks(linalg::hermitian_part));
                value = v3;
                eta = e3;
            }
            break;
        }
        prev = v2;
        xi = next_xi;
    }
    Margin {
        value,
        xi,
        eta,
        converged,
        restarts: 1,
    }
}

/// The quotient `|⟨ξ,η⟩|² / ⟨η, E(ξξ*)η⟩` for `ξ`, `η` in the same block.
pub fn k_ratio(map: &LinearMap, xi: &BlockVector, eta: &BlockVector) -> f64 {
    if xi.block != eta.block {
        return 0.0;
    }
    let num = xi.vector.dotc(&eta.vector).norm_sqr();
    let img = map.apply_from_block(xi.block, &outer(&xi.vector));
    let den = eta.vector.dotc(&(img.block(xi.block) * &eta.vector)).re;
    if den <= 0.0 {
        if num > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        num / den
    }
}

enum Step {
    Next(CVec),
    Unbounded(CVec),
}

/// Maximizer of `|⟨v,w⟩|² / ⟨w, M w⟩` over `w`, namely `M⁺v`, or a null
/// direction of `M` when `v` carries weight there.
fn quotient_step(m: &CMat, v: &CVec) -> Step {
    let (vals, vecs) = linalg::herm_eig(&linalg::hermitian_part(m));
    let mut null = CVec::zeros(v.len());
    let mut next = CVec::zeros(v.len());
    for (k, &lam) in vals.iter().enumerate() {
        let col = vecs.column(k);
        let coef = col.dotc(v);
        if lam < NULL_EIGENVALUE {
            null += col * coef;
        } else {
            next += col * (coef / re(lam));
        }
    }
    if null.norm_squared() > NULL_WEIGHT {
        Step::Unbounded(normalized(null))
    } else {
        Step::Next(normalized(next))
    }
}

struct KRun {
    value: f64,
    xi: BlockVector,
    eta: BlockVector,
    converged: bool,
}

fn k_run(map: &LinearMap, adj: &LinearMap, mut xi: BlockVector) -> KRun {
    let b = xi.block;
    let mut prev = 0.0;
    let mut iter = 0;
    loop {
        let m = map.apply_from_block(b, &outer(&xi.vector));
        let eta = match quotient_step(m.block(b), &xi.vector) {
            Step::Next(v) => BlockVector { block: b, vector: v },
            Step::Unbounded(v) => {
                return KRun {
                    value: f64::INFINITY,
                    eta: BlockVector { block: b, vector: v },
                    xi,
                    converged: true,
                }
            }
        };
        let n = adj.apply_from_block(b, &outer(&eta.vector));
        let next = match quotient_step(n.block(b), &eta.vector) {
            Step::Next(v) => BlockVector { block: b, vector: v },
            Step::Unbounded(v) => {
                return KRun {
                    value: f64::INFINITY,
                    xi: BlockVector { block: b, vector: v },
                    eta,
                    converged: true,
                }
            }
        };
        let value = k_ratio(map, &next, &eta);
        iter += 1;
        let stalled = value - prev <= SEESAW_REL_STEP * value.abs();
        if stalled || iter >= SEESAW_MAX_ITER {
            let (xi, value) = if value >= prev {
                (next, value)
            } else {
                let v = k_ratio(map, &xi, &eta);
                (xi, v)
            };
            return KRun {
                value,
                xi,
                eta,
                converged: stalled,
            };
        }
        prev = value;
        xi = next;
    }
}

/// See-saw maximization of the `K` quotient from `restarts` seeded starts.
pub fn k_seesaw(map: &LinearMap, restarts: usize, seed: u64) -> Certificate {
    let shape = map.domain().clone();
    let adj = map.adjoint();
    let runs = restarts.max(shape.num_blocks());
    let results: Vec<KRun> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(seed, r);
            let block = r % shape.num_blocks();
            let xi = linalg::gaussian_unit_vector(shape.block(block), &mut rng);
            k_run(map, &adj, BlockVector { block, vector: xi })
        })
        .collect();
    let converged = results.iter().all(|r| r.converged);
    let best = results
        .into_iter()
        .reduce(|a, b| if b.value > a.value { b } else { a })
        .unwrap();
    let residual = if best.value.is_finite() {
        (best.value - k_ratio(map, &best.xi, &best.eta)).abs()
    } else {
        0.0
    };
    Certificate {
        value: best.value,
        witness_xi: Some(best.xi),
        witness_eta: Some(best.eta),
        residual,
        method: Method::Seesaw,
        restarts_used: runs,
        converged,
    }
}

/// Closed-form `K` with its witness for the families where one is known.
fn closed_form_k(e: &CondExp) -> Option<(f64, BlockVector)> {
    match e.params() {
        Params::WeightedCorner { n_shape, lambda } => {
            let n0 = 2 * n_shape.block(0);
            let m0 = n_shape.block(0);
            if *lambda <= 0.5 {
                Some((1.0 / lambda, BlockVector::basis(n0, 0, 0)))
            } else {
                Some((1.0 / (1.0 - lambda), BlockVector::basis(n0, 0, m0)))
            }
        }
        Params::TensorState { h_dim: _, density } => {
            let k = density.nrows();
            let (lmin, v) = linalg::min_eigenpair(density);
            let n = e.shape().block(0);
            // e_0 ⊗ v in lexicographic order
            let mut w = CVec::zeros(n);
            for s in 0..k {
                w[s] = v[s];
            }
            Some((1.0 / lmin, BlockVector { block: 0, vector: w }))
        }
        Params::GroupAverage { point_weights, .. } => {
            let (p, &w) = point_weights
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))?;
            Some((1.0 / w, BlockVector::basis(1, p, 0)))
        }
        _ => None,
    }
}

/// `K(E)`: closed form where available (cross-checked by a short see-saw
/// run and downgraded on disagreement), otherwise the see-saw maximum.
pub fn compute_k(e: &CondExp, restarts: usize, seed: u64) -> Certificate {
    let map = e.map();
    match closed_form_k(e) {
        Some((value, witness)) => {
            let check = k_seesaw(map, restarts.clamp(1, 8), seed);
            if check.value > value + 1e-8 {
                return check;
            }
            let residual = (value - k_ratio(map, &witness, &witness)).abs();
            Certificate {
                value,
                witness_eta: Some(witness.clone()),
                witness_xi: Some(witness),
                residual,
                method: Method::ClosedForm,
                restarts_used: check.restarts_used,
                converged: check.converged,
            }
        }
        None => k_seesaw(map, restarts, seed),
    }
}

/// Choi matrix of the block pair `(s, t)`:
/// `C[(i,k),(j,l)] = Φ(e^s_ij)_t[k,l]`.
pub fn choi_block(map: &LinearMap, s: usize, t: usize) -> CMat {
    let dom = map.domain();
    let cod = map.codomain();
    let (ns, nt) = (dom.block(s), cod.block(t));
    let (os, ot) = (dom.vec_offset(s), cod.vec_offset(t));
    let m = map.matrix();
    CMat::from_fn(ns * nt, ns * nt, |row, col| {
        let (i, k) = (row / nt, row % nt);
        let (j, l) = (col / nt, col % nt);
        m[(ot + k * nt + l, os + i * ns + j)]
    })
}

/// `ωω*` with `ω = Σ e_i ⊗ e_i`, the Choi matrix of the identity on `M_n`.
fn identity_choi(n: usize) -> CMat {
    let mut omega = CVec::zeros(n * n);
    for i in 0..n {
        omega[i * n + i] = re(1.0);
    }
    outer(&omega)
}

const PENCIL_SUPPORT: f64 = 1e-10;
const PENCIL_RANGE: f64 = 1e-8;

/// `L(E)`: the least `L` with `L·C_E − C_id ⪰ 0`, where the Choi matrices
/// are taken over the ambient full matrix algebra. Both split into block
/// pairs, and `C_id` lives on diagonal pairs only.
pub fn compute_l(e: &CondExp) -> Certificate {
    let map = e.map();
    let shape = e.shape();
    let nb = shape.num_blocks();
    let pairs: Vec<(usize, usize)> = (0..nb).flat_map(|s| (0..nb).map(move |t| (s, t))).collect();
    let chois: Vec<CMat> = pairs.par_iter().map(|&(s, t)| choi_block(map, s, t)).collect();
    let eigs: Vec<Vec<f64>> = chois.par_iter().map(linalg::herm_eigenvalues).collect();
    let global_max = eigs
        .iter()
        .flat_map(|v| v.iter())
        .fold(0.0_f64, |a, &v| a.max(v.abs()));

    let infinite = |residual: f64, witness: Option<BlockVector>| Certificate {
        value: f64::INFINITY,
        witness_xi: witness,
        witness_eta: None,
        residual,
        method: Method::ChoiPencil,
        restarts_used: 0,
        converged: true,
    };

    // off-diagonal pairs only need C_E ⪰ 0
    for (idx, &(s, t)) in pairs.iter().enumerate() {
        let lmin = eigs[idx].first().copied().unwrap_or(0.0);
        if lmin < -PENCIL_RANGE * global_max.max(1.0) {
            let (_, v) = linalg::min_eigenpair(&chois[idx]);
            let _ = t;
            return infinite(-lmin, Some(BlockVector { block: s, vector: v }));
        }
    }

    let mut value = 0.0_f64;
    let mut witness = None;
    for (idx, &(s, t)) in pairs.iter().enumerate() {
        if s != t {
            continue;
        }
        let n = shape.block(s);
        let block_max = eigs[idx].last().copied().unwrap_or(0.0).abs();
        let cutoff = if block_max > 0.0 {
            PENCIL_SUPPORT * global_max / block_max
        } else {
            PENCIL_SUPPORT
        };
        match linalg::pencil_max(&identity_choi(n), &chois[idx], cutoff, PENCIL_RANGE) {
            None => {
                return infinite(1.0, Some(BlockVector { block: s, vector: CVec::zeros(n * n) }))
            }
            Some(p) => {
                if p.value > value || witness.is_none() {
                    value = value.max(p.value);
                    witness = Some(BlockVector { block: s, vector: p.vector });
                }
            }
        }
    }

    // λ_min(L·C_E − C_id) relative to L, over all pairs
    let residual = pairs
        .iter()
        .enumerate()
        .map(|(idx, &(s, t))| {
            let mut m = &chois[idx] * re(value);
            if s == t {
                m -= identity_choi(shape.block(s));
            }
            linalg::min_eigenvalue(&m) / value.max(1.0)
        })
        .fold(f64::INFINITY, f64::min);

    Certificate {
        value,
        witness_xi: witness,
        witness_eta: None,
        residual,
        method: Method::ChoiPencil,
        restarts_used: 0,
        converged: true,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KadisonReport {
    /// `λ_min((E(a) − a)²)`.
    pub left_min: f64,
    /// `λ_min((K − 1)(E(a²) − E(a)²) − (E(a) − a)²)`.
    pub right_min: f64,
}

impl KadisonReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.left_min >= -tol && self.right_min >= -tol
    }
}

/// Checks `0 ⪯ (E(a) − a)² ⪯ (K − 1)(E(a²) − E(a)²)` for self-adjoint `a`.
pub fn kadison_check(e: &CondExp, k: f64, a: &Element, tol: f64) -> Result<KadisonReport> {
    let defect = a.self_adjoint_defect();
    if defect > tol * a.max_abs().max(1.0) {
        return Err(Error::NotSelfAdjoint { defect });
    }
    let ea = e.apply(a);
    let d = &ea - a;
    let left = &d * &d;
    let var = &e.apply(&(a * a)) - &(&ea * &ea);
    let right = &(&var * (k - 1.0)) - &left;
    Ok(KadisonReport {
        left_min: left.map_blocks(linalg::hermitian_part).min_eigenvalue(),
        right_min: right.map_blocks(linalg::hermitian_part).min_eigenvalue(),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct PimsnerPopaReport {
    pub samples: usize,
    /// Smallest `λ_min(K(ε + E(a*a)) − a*a)` over samples and both `ε`.
    pub min_eigenvalue: f64,
    /// Smallest `K·‖E(a*a)‖ − ‖a‖²`.
    pub norm_margin: f64,
}

impl PimsnerPopaReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.min_eigenvalue >= -tol && self.norm_margin >= -tol
    }
}

pub const PIMSNER_POPA_EPSILONS: [f64; 2] = [1e-3, 1e-6];

/// Checks `K(ε + E(a*a)) ⪰ a*a` and `‖a‖² ≤ K‖E(a*a)‖` on seeded random
/// elements scaled to unit norm.
pub fn pimsner_popa_check(e: &CondExp, k: f64, samples: usize, seed: u64) -> PimsnerPopaReport {
    let shape = e.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_eig = f64::INFINITY;
    let mut norm_margin = f64::INFINITY;
    for _ in 0..samples {
        let a = Element::random(shape, &mut rng);
        let a = &a * (1.0 / a.operator_norm());
        let (m, nm) = pimsner_popa_single(e, k, &a);
        min_eig = min_eig.min(m);
        norm_margin = norm_margin.min(nm);
    }
    PimsnerPopaReport {
        samples,
        min_eigenvalue: min_eig,
        norm_margin,
    }
}

fn pimsner_popa_single(e: &CondExp, k: f64, a: &Element) -> (f64, f64) {
    let shape = e.shape();
    let asa = &a.adjoint() * a;
    let easa = e.apply(&asa);
    let mut min_eig = f64::INFINITY;
    for eps in PIMSNER_POPA_EPSILONS {
        let lhs = &(&Element::scalar(shape, re(eps)) + &easa) * k;
        let gap = (&lhs - &asa).map_blocks(linalg::hermitian_part);
        min_eig = min_eig.min(gap.min_eigenvalue());
    }
    let nm = k * easa.operator_norm() - a.operator_norm().powi(2);
    (min_eig, nm)
}
