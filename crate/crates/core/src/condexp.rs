//! Conditional expectations `E: A → ι(B)` and their validation.
//!
//! Four constructor families are provided: the trace-preserving expectation
//! for any faithful trace, state slices `M_h ⊗ M_k → M_h ⊗ 1`, the weighted
//! corner maps `M_2(N) → N`, and averages over finite abelian permutation
//! actions on `ℂ^n`. Every constructor tabulates its formula into a dense
//! [`LinearMap`] and validates the expectation axioms before returning.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{generating_set, AlgebraShape, Element, LinearMap};
use crate::constants::positivity_margin;
use crate::error::{Error, Result};
use crate::inclusion::Embedding;
use crate::linalg::{self, re, CMat, C64};
use crate::tol::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectationKind {
    Trace,
    TensorState,
    WeightedCorner,
    GroupAverage,
    Custom,
}

impl fmt::Display for ExpectationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Trace => "trace",
            Self::TensorState => "tensor_state",
            Self::WeightedCorner => "weighted_corner",
            Self::GroupAverage => "group_average",
            Self::Custom => "custom",
        };
        f.write_str(s)
    }
}

/// Kind-specific parameters; enough to re-derive the map.
#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    Trace {
        weights: Vec<f64>,
    },
    TensorState {
        h_dim: usize,
        density: CMat,
    },
    WeightedCorner {
        n_shape: AlgebraShape,
        lambda: f64,
    },
    GroupAverage {
        generators: Vec<Vec<usize>>,
        orbits: Vec<Vec<usize>>,
        /// Weight of each point inside its orbit; sums to 1 per orbit.
        point_weights: Vec<f64>,
        uniform: bool,
    },
    Custom,
}

#[derive(Debug, Clone)]
pub struct CondExp {
    embedding: Embedding,
    map: LinearMap,
    params: Params,
}

impl CondExp {
    pub fn embedding(&self) -> &Embedding {
        &self.embedding
    }

    pub fn map(&self) -> &LinearMap {
        &self.map
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn kind(&self) -> ExpectationKind {
        match self.params {
            Params::Trace { .. } => ExpectationKind::Trace,
            Params::TensorState { .. } => ExpectationKind::TensorState,
            Params::WeightedCorner { .. } => ExpectationKind::WeightedCorner,
            Params::GroupAverage { .. } => ExpectationKind::GroupAverage,
            Params::Custom => ExpectationKind::Custom,
        }
    }

    pub fn shape(&self) -> &AlgebraShape {
        self.embedding.amb_shape()
    }

    pub fn sub_shape(&self) -> &AlgebraShape {
        self.embedding.sub_shape()
    }

    pub fn apply(&self, x: &Element) -> Element {
        self.map.apply(x)
    }

    /// `E(x)` read back as an element of `B`.
    pub fn apply_to_sub(&self, x: &Element) -> Element {
        self.embedding.pullback_unchecked(&self.map.apply(x))
    }

    /// Evaluates the defining formula directly, bypassing the dense map.
    /// Custom expectations have no formula and fall back to the map.
    pub fn eval_direct(&self, x: &Element) -> Element {
        let e = &self.embedding;
        match &self.params {
            Params::Trace { weights } => e.embed(&trace_compress(e, weights, x)).unwrap(),
            Params::TensorState { h_dim, density } => {
                e.embed(&state_slice(*h_dim, density, x)).unwrap()
            }
            Params::WeightedCorner { n_shape, lambda } => {
                e.embed(&corner_mix(n_shape, *lambda, x)).unwrap()
            }
            Params::GroupAverage {
                generators,
                orbits,
                point_weights,
                uniform,
            } => {
                if *uniform {
                    repeated_average(generators, x)
                } else {
                    orbit_average(orbits, point_weights, x)
                }
            }
            Params::Custom => self.map.apply(x),
        }
    }

    /// A map that has not been checked against the expectation axioms.
    /// Use [`validate_ce`] to obtain a report.
    pub fn custom_unchecked(embedding: Embedding, map: LinearMap) -> Result<Self> {
        if map.domain() != embedding.amb_shape() || map.codomain() != embedding.amb_shape() {
            return Err(Error::InvalidParameter(
                "custom map must act on the ambient algebra".into(),
            ));
        }
        Ok(Self {
            embedding,
            map,
            params: Params::Custom,
        })
    }

    /// A map onto `ι(B)` given densely, validated before return.
    pub fn from_map(embedding: Embedding, map: LinearMap, tol: &Tolerances) -> Result<Self> {
        Self::custom_unchecked(embedding, map)?.validated(tol)
    }

    fn tabulate(embedding: Embedding, params: Params) -> Self {
        let stub = Self {
            map: LinearMap::identity(embedding.amb_shape()),
            embedding,
            params,
        };
        let map = LinearMap::from_fn(stub.shape(), stub.shape(), |x| stub.eval_direct(x));
        Self { map, ..stub }
    }

    fn validated(self, tol: &Tolerances) -> Result<Self> {
        let report = validate_ce(&self, tol);
        match report.first_failure() {
            None => Ok(self),
            Some(check) => Err(Error::Validation {
                axiom: check.axiom.to_string(),
                residual: check.residual,
            }),
        }
    }
}

/// `b_j[k,l] = τ(ι(f_lk) x) / τ(ι(f_ll))` for `τ = Σ w_i Tr`.
fn trace_compress(e: &Embedding, weights: &[f64], x: &Element) -> Element {
    let sub = e.sub_shape();
    let amb = e.amb_shape();
    let mut blocks: Vec<CMat> = sub.blocks().iter().map(|&m| CMat::zeros(m, m)).collect();
    let mut norms = vec![0.0; sub.num_blocks()];
    for i in 0..amb.num_blocks() {
        let y = if e.has_trivial_unitaries() {
            x.block(i).clone()
        } else {
            e.unitaries()[i].adjoint() * x.block(i) * &e.unitaries()[i]
        };
        for j in 0..sub.num_blocks() {
            let m = sub.block(j);
            for r in 0..e.multiplicity(i, j) {
                let off = e.copy_offset(i, j, r);
                blocks[j] += y.view((off, off), (m, m)) * re(weights[i]);
                norms[j] += weights[i];
            }
        }
    }
    let blocks = blocks
        .into_iter()
        .zip(norms)
        .map(|(b, c)| b / re(c))
        .collect();
    Element::from_blocks(sub.clone(), blocks).unwrap()
}

/// `Σ_{s,s'} C[s,s'] X[(t,s'),(t',s)]`, i.e. `T·Tr(CS)` on `T ⊗ S`.
fn state_slice(h: usize, density: &CMat, x: &Element) -> Element {
    let k = density.nrows();
    let xm = x.block(0);
    let b = CMat::from_fn(h, h, |t, tp| {
        let mut acc = re(0.0);
        for s in 0..k {
            for sp in 0..k {
                acc += density[(s, sp)] * xm[(t * k + sp, tp * k + s)];
            }
        }
        acc
    });
    Element::from_blocks(AlgebraShape::full(h), vec![b]).unwrap()
}

/// `λ a + (1-λ) d` for every block `[[a, b], [c, d]]` of `M_2(N)`.
fn corner_mix(n_shape: &AlgebraShape, lambda: f64, x: &Element) -> Element {
    let blocks = n_shape
        .blocks()
        .iter()
        .enumerate()
        .map(|(j, &m)| {
            let xb = x.block(j);
            xb.view((0, 0), (m, m)) * re(lambda) + xb.view((m, m), (m, m)) * re(1.0 - lambda)
        })
        .collect();
    Element::from_blocks(n_shape.clone(), blocks).unwrap()
}

fn diagonal_values(x: &Element) -> Vec<C64> {
    x.blocks().iter().map(|b| b[(0, 0)]).collect()
}

fn from_diagonal_values(v: &[C64]) -> Element {
    let shape = AlgebraShape::diagonal(v.len());
    let blocks = v.iter().map(|&z| CMat::from_element(1, 1, z)).collect();
    Element::from_blocks(shape, blocks).unwrap()
}

fn orbit_average(orbits: &[Vec<usize>], weights: &[f64], x: &Element) -> Element {
    let f = diagonal_values(x);
    let mut out = vec![re(0.0); f.len()];
    for orbit in orbits {
        let avg: C64 = orbit.iter().map(|&p| f[p] * re(weights[p])).sum();
        for &p in orbit {
            out[p] = avg;
        }
    }
    from_diagonal_values(&out)
}

/// Averages over the cyclic group of each generator in turn; for commuting
/// generators this is the average over the whole group.
fn repeated_average(generators: &[Vec<usize>], x: &Element) -> Element {
    let mut f = diagonal_values(x);
    for g in generators {
        let ord = permutation_order(g);
        let mut acc = vec![re(0.0); f.len()];
        for (p, slot) in acc.iter_mut().enumerate() {
            let mut q = p;
            for _ in 0..ord {
                *slot += f[q];
                q = g[q];
            }
        }
        f = acc.into_iter().map(|z| z / re(ord as f64)).collect();
    }
    from_diagonal_values(&f)
}

fn permutation_order(g: &[usize]) -> usize {
    let mut ord = 1;
    let mut cur: Vec<usize> = g.to_vec();
    while cur.iter().enumerate().any(|(i, &v)| i != v) {
        cur = cur.iter().map(|&v| g[v]).collect();
        ord += 1;
    }
    ord
}

/// τ-orthogonal projection of `A` onto `ι(B)` for `τ = Σ_i w_i Tr(x_i)`.
pub fn trace_ce(embedding: &Embedding, weights: &[f64], tol: &Tolerances) -> Result<CondExp> {
    let amb = embedding.amb_shape();
    if weights.len() != amb.num_blocks() {
        return Err(Error::InvalidParameter(format!(
            "{} trace weights for {} blocks",
            weights.len(),
            amb.num_blocks()
        )));
    }
    if let Some(i) = weights.iter().position(|&w| w <= 0.0 || !w.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "trace weight {i} must be positive and finite"
        )));
    }
    CondExp::tabulate(
        embedding.clone(),
        Params::Trace {
            weights: weights.to_vec(),
        },
    )
    .validated(tol)
}

/// `E(T ⊗ S) = T ⊗ Tr(C S) 1_k` on `M_h ⊗ M_k`, lexicographic tensor order.
pub fn tensor_state_ce(h_dim: usize, density: &CMat, tol: &Tolerances) -> Result<CondExp> {
    let k = density.nrows();
    if h_dim == 0 || k == 0 || density.ncols() != k {
        return Err(Error::InvalidParameter(
            "need h >= 1 and a square density matrix".into(),
        ));
    }
    if linalg::hermiticity_defect(density) > tol.abs {
        return Err(Error::InvalidParameter("density matrix is not self-adjoint".into()));
    }
    let trace = density.trace();
    if (trace - re(1.0)).norm() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "density matrix has trace {:.6}, a state needs trace 1",
            trace.re
        )));
    }
    let lmin = linalg::min_eigenvalue(density);
    if lmin < -tol.abs {
        return Err(Error::InvalidParameter("density matrix is not positive".into()));
    }
    if lmin <= tol.abs {
        return Err(Error::InvalidParameter(format!(
            "density matrix is singular (smallest eigenvalue {lmin:.3e}); the expectation would not be faithful"
        )));
    }
    let n = h_dim * k;
    // maps canonical index r*h + t to lexicographic t*k + r
    let mut u = CMat::zeros(n, n);
    for r in 0..k {
        for t in 0..h_dim {
            u[(t * k + r, r * h_dim + t)] = re(1.0);
        }
    }
    let embedding = Embedding::new(
        AlgebraShape::full(h_dim),
        AlgebraShape::full(n),
        vec![vec![k]],
        Some(vec![u]),
    )?;
    CondExp::tabulate(
        embedding,
        Params::TensorState {
            h_dim,
            density: linalg::hermitian_part(density),
        },
    )
    .validated(tol)
}

/// `E_λ([[a, b], [c, d]]) = (λa + (1-λ)d)·1` on `M_2(N)`.
pub fn weighted_corner_ce(n_shape: &AlgebraShape, lambda: f64, tol: &Tolerances) -> Result<CondExp> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "weight {lambda} outside the open interval (0, 1)"
        )));
    }
    let amb = AlgebraShape::new(n_shape.blocks().iter().map(|m| 2 * m).collect())?;
    let k = n_shape.num_blocks();
    let inclusion = (0..k).map(|i| (0..k).map(|j| if i == j { 2 } else { 0 }).collect()).collect();
    let embedding = Embedding::new(n_shape.clone(), amb, inclusion, None)?;
    CondExp::tabulate(
        embedding,
        Params::WeightedCorner {
            n_shape: n_shape.clone(),
            lambda,
        },
    )
    .validated(tol)
}

/// `E(f)(x) = (f(x) + f(σx)) / 2` on `ℂ^n`, or the weighted orbit state when
/// `weights` is given (normalized per orbit).
pub fn group_average_ce(
    space_size: usize,
    involution: &[usize],
    weights: Option<&[f64]>,
    tol: &Tolerances,
) -> Result<CondExp> {
    check_permutation(space_size, involution)?;
    if involution.iter().enumerate().any(|(i, &s)| involution[s] != i) {
        return Err(Error::InvalidParameter("permutation is not an involution".into()));
    }
    abelian_average_ce(space_size, &[involution.to_vec()], weights, tol)
}

/// Average over the abelian group generated by commuting permutations.
pub fn abelian_average_ce(
    space_size: usize,
    generators: &[Vec<usize>],
    weights: Option<&[f64]>,
    tol: &Tolerances,
) -> Result<CondExp> {
    if space_size == 0 {
        return Err(Error::InvalidParameter("empty space".into()));
    }
    for g in generators {
        check_permutation(space_size, g)?;
    }
    for (a, g) in generators.iter().enumerate() {
        for h in &generators[a + 1..] {
            if (0..space_size).any(|p| g[h[p]] != h[g[p]]) {
                return Err(Error::InvalidParameter("generators do not commute".into()));
            }
        }
    }
    let orbits = orbits_of(space_size, generators);
    let point_weights = match weights {
        None => {
            let mut w = vec![0.0; space_size];
            for orbit in &orbits {
                for &p in orbit {
                    w[p] = 1.0 / orbit.len() as f64;
                }
            }
            w
        }
        Some(ws) => {
            if ws.len() != space_size || ws.iter().any(|&w| w <= 0.0 || !w.is_finite()) {
                return Err(Error::InvalidParameter(
                    "one positive weight per point is required".into(),
                ));
            }
            let mut w = ws.to_vec();
            for orbit in &orbits {
                let total: f64 = orbit.iter().map(|&p| ws[p]).sum();
                for &p in orbit {
                    w[p] = ws[p] / total;
                }
            }
            w
        }
    };
    let inclusion = (0..space_size)
        .map(|p| orbits.iter().map(|o| usize::from(o.contains(&p))).collect())
        .collect();
    let embedding = Embedding::new(
        AlgebraShape::diagonal(orbits.len()),
        AlgebraShape::diagonal(space_size),
        inclusion,
        None,
    )?;
    CondExp::tabulate(
        embedding,
        Params::GroupAverage {
            generators: generators.to_vec(),
            orbits,
            point_weights,
            uniform: weights.is_none(),
        },
    )
    .validated(tol)
}

fn check_permutation(n: usize, p: &[usize]) -> Result<()> {
    let mut seen = vec![false; n];
    if p.len() != n {
        return Err(Error::InvalidParameter(format!(
            "permutation of length {} on a space of size {n}",
            p.len()
        )));
    }
    for &v in p {
        if v >= n || seen[v] {
            return Err(Error::InvalidParameter("not a permutation".into()));
        }
        seen[v] = true;
    }
    Ok(())
}

/// Orbits ordered by their smallest point.
fn orbits_of(n: usize, generators: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut label = vec![usize::MAX; n];
    let mut orbits = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let id = orbits.len();
        let mut orbit = vec![start];
        label[start] = id;
        let mut k = 0;
        while k < orbit.len() {
            let p = orbit[k];
            for g in generators {
                if label[g[p]] == usize::MAX {
                    label[g[p]] = id;
                    orbit.push(g[p]);
                }
            }
            k += 1;
        }
        orbit.sort_unstable();
        orbits.push(orbit);
    }
    orbits
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    Idempotent,
    Unital,
    Range,
    Bimodule,
    Positive,
    Faithful,
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Idempotent => "idempotent",
            Self::Unital => "unital",
            Self::Range => "range",
            Self::Bimodule => "bimodule",
            Self::Positive => "positive",
            Self::Faithful => "faithful",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct AxiomCheck {
    pub axiom: Axiom,
    pub passed: bool,
    pub residual: f64,
    /// Input exhibiting the violation, when one was found.
    pub witness: Option<Element>,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<AxiomCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&AxiomCheck> {
        self.checks.iter().find(|c| !c.passed)
    }

    pub fn get(&self, axiom: Axiom) -> &AxiomCheck {
        self.checks.iter().find(|c| c.axiom == axiom).expect("every axiom is checked")
    }
}

/// Above this linear dimension, linear identities are checked on seeded
/// random elements instead of the full matrix-unit basis.
const DENSE_CHECK_DIM: usize = 64;
/// A nonzero linear residual vanishes on a Gaussian input with probability
/// zero, so a handful of samples suffices.
const SAMPLED_INPUTS: usize = 8;

fn check(axiom: Axiom, residual: f64, bound: f64, witness: Option<Element>) -> AxiomCheck {
    let passed = residual <= bound;
    AxiomCheck {
        axiom,
        passed,
        residual,
        witness: if passed { None } else { witness },
    }
}

/// Algebra generators of `B`: per block the minimal projection `f_00`, the
/// shifts `f_{k,k+1}`, `f_{k+1,k}`, and the block identity.
/// The matrix-unit basis when `dim ≤ dense_limit`, otherwise `samples`
/// seeded random elements.
pub(crate) fn spanning_inputs(
    shape: &AlgebraShape,
    dense_limit: usize,
    samples: usize,
    seed: u64,
) -> Vec<Element> {
    if shape.dim() <= dense_limit {
        Element::basis(shape)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..samples).map(|_| Element::random(shape, &mut rng)).collect()
    }
}

/// Checks all six expectation axioms. Failures are data, each carrying the
/// residual and a violating input.
pub fn validate_ce(e: &CondExp, tol: &Tolerances) -> ValidationReport {
    let shape = e.shape();
    let emb = e.embedding();
    let bound = 1e-10;
    let inputs = spanning_inputs(shape, DENSE_CHECK_DIM, SAMPLED_INPUTS, 0x5eed);
    let images: Vec<Element> = inputs.iter().map(|x| e.apply(x)).collect();

    let mut worst = (0.0, None);
    let track = |r: f64, w: &Element, worst: &mut (f64, Option<Element>)| {
        if r > worst.0 {
            *worst = (r, Some(w.clone()));
        }
    };

    for (x, ex) in inputs.iter().zip(&images) {
        let r = e.apply(ex).distance(ex);
        track(r, x, &mut worst);
    }
    let idempotent = check(Axiom::Idempotent, worst.0, bound, worst.1.take());

    let one = Element::identity(shape);
    let unital = check(Axiom::Unital, e.apply(&one).distance(&one), bound, Some(one.clone()));

    let mut worst = (0.0, None);
    for (x, ex) in inputs.iter().zip(&images) {
        let back = emb.embed(&emb.pullback_unchecked(ex)).unwrap();
        track(back.distance(ex), x, &mut worst);
    }
    let range = check(Axiom::Range, worst.0, bound, worst.1.take());

    let mut worst = (0.0, None);
    for g in generating_set(emb.sub_shape()) {
        let ig = emb.embed(&g).unwrap();
        for (x, ex) in inputs.iter().zip(&images) {
            let scale = x.max_abs().max(1.0);
            let left = e.apply(&(&ig * x)).distance(&(&ig * ex)) / scale;
            let right = e.apply(&(x * &ig)).distance(&(ex * &ig)) / scale;
            track(left.max(right), x, &mut worst);
        }
    }
    let bimodule = check(Axiom::Bimodule, worst.0, bound, worst.1.take());

    let margin = positivity_margin(e.map(), 8, 0x9051);
    let positive = AxiomCheck {
        axiom: Axiom::Positive,
        passed: margin.value >= -tol.abs,
        residual: (-margin.value).max(0.0),
        witness: (margin.value < -tol.abs)
            .then(|| Element::rank_one(shape, margin.xi.block, &margin.xi.vector)),
    };

    // Tr∘E(x) = <E†(1), x>: E is faithful iff the density E†(1) is invertible
    let density = e.map().adjoint().apply(&one);
    let dmin = density.min_eigenvalue();
    let faithful_witness = (dmin <= tol.abs).then(|| {
        let (bi, _) = density
            .blocks()
            .iter()
            .enumerate()
            .map(|(i, b)| (i, linalg::min_eigenvalue(b)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let (_, v) = linalg::min_eigenpair(density.block(bi));
        Element::rank_one(shape, bi, &v)
    });
    let faithful = AxiomCheck {
        axiom: Axiom::Faithful,
        passed: dmin > tol.abs,
        residual: (tol.abs - dmin).max(0.0),
        witness: faithful_witness,
    };

    ValidationReport {
        checks: vec![idempotent, unital, range, bimodule, positive, faithful],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, CVec};
    use proptest::prelude::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn diag(vals: &[f64]) -> CMat {
        CMat::from_diagonal(&CVec::from_vec(vals.iter().map(|&v| re(v)).collect()))
    }

    fn m2_general() -> Element {
        let s = AlgebraShape::full(2);
        let b = CMat::from_row_slice(2, 2, &[re(1.0), c(2.0, 1.0), re(-3.0), c(0.5, 4.0)]);
        Element::from_blocks(s, vec![b]).unwrap()
    }

    #[test]
    fn trace_ce_scalars_in_m2_is_normalized_trace() {
        let e = trace_ce(&Embedding::scalars(&AlgebraShape::full(2)), &[1.0], &tol()).unwrap();
        let x = m2_general();
        let expected = Element::scalar(&AlgebraShape::full(2), x.trace() / re(2.0));
        assert!(e.apply(&x).distance(&expected) < 1e-14);
    }

    #[test]
    fn trace_ce_identity_embedding_is_identity() {
        let s = AlgebraShape::new(vec![2, 1]).unwrap();
        let e = trace_ce(&Embedding::identity(&s), &[1.0, 3.0], &tol()).unwrap();
        assert!(e.map().distance(&LinearMap::identity(&s)) < 1e-14);
    }

    #[test]
    fn trace_ce_diagonal_is_pinching() {
        let emb = Embedding::new(
            AlgebraShape::diagonal(2),
            AlgebraShape::full(2),
            vec![vec![1, 1]],
            None,
        )
        .unwrap();
        let e = trace_ce(&emb, &[1.0], &tol()).unwrap();
        let x = m2_general();
        let mut expected = x.clone();
        expected.block_mut(0)[(0, 1)] = re(0.0);
        expected.block_mut(0)[(1, 0)] = re(0.0);
        assert!(e.apply(&x).distance(&expected) < 1e-14);
    }

    #[test]
    fn tensor_state_reduces_to_trace_case() {
        let e = tensor_state_ce(1, &diag(&[0.5, 0.5]), &tol()).unwrap();
        let x = m2_general();
        let expected = Element::scalar(&AlgebraShape::full(2), x.trace() / re(2.0));
        assert!(e.apply(&x).distance(&expected) < 1e-14);
    }

    #[test]
    fn tensor_state_matches_product_formula() {
        let cm = CMat::from_row_slice(2, 2, &[re(0.7), c(0.1, 0.2), c(0.1, -0.2), re(0.3)]);
        let e = tensor_state_ce(2, &cm, &tol()).unwrap();
        let t = CMat::from_row_slice(2, 2, &[re(1.0), c(0.0, 2.0), re(-1.0), re(3.0)]);
        let s = CMat::from_row_slice(2, 2, &[re(2.0), re(1.0), c(0.0, 1.0), re(-1.0)]);
        let x = Element::from_blocks(AlgebraShape::full(4), vec![t.kronecker(&s)]).unwrap();
        let tr = (&cm * &s).trace();
        let expected = t.kronecker(&CMat::identity(2, 2)) * tr;
        assert!(linalg::max_abs(&(e.apply(&x).block(0) - expected)) < 1e-13);
    }

    #[test]
    fn tensor_state_rejects_singular_and_non_states() {
        assert!(matches!(
            tensor_state_ce(1, &diag(&[1.0, 0.0]), &tol()),
            Err(Error::InvalidParameter(_))
        ));
        assert!(tensor_state_ce(1, &diag(&[0.5, 0.6]), &tol()).is_err());
        assert!(tensor_state_ce(1, &diag(&[1.5, -0.5]), &tol()).is_err());
    }

    #[test]
    fn weighted_corner_half_is_ex1_map() {
        let n = AlgebraShape::full(1);
        let e = weighted_corner_ce(&n, 0.5, &tol()).unwrap();
        let x = m2_general();
        let expected = Element::scalar(&AlgebraShape::full(2), x.trace() / re(2.0));
        assert!(e.apply(&x).distance(&expected) < 1e-14);
        assert!(weighted_corner_ce(&n, 0.0, &tol()).is_err());
        assert!(weighted_corner_ce(&n, 1.0, &tol()).is_err());
    }

    #[test]
    fn weighted_corner_over_matrix_algebra() {
        let n = AlgebraShape::new(vec![2, 1]).unwrap();
        let e = weighted_corner_ce(&n, 1.0 / 3.0, &tol()).unwrap();
        assert_eq!(e.shape().blocks(), &[4, 2]);
        assert!(validate_ce(&e, &tol()).all_passed());
    }

    #[test]
    fn group_average_swap_and_fixed_point() {
        let e = group_average_ce(2, &[1, 0], None, &tol()).unwrap();
        let x = from_diagonal_values(&[re(1.0), re(3.0)]);
        assert!(e.apply(&x).distance(&from_diagonal_values(&[re(2.0), re(2.0)])) < 1e-14);

        let e = group_average_ce(3, &[1, 0, 2], None, &tol()).unwrap();
        assert_eq!(e.sub_shape().num_blocks(), 2);
        let x = from_diagonal_values(&[re(1.0), re(3.0), re(7.0)]);
        assert!(e.apply(&x).distance(&from_diagonal_values(&[re(2.0), re(2.0), re(7.0)])) < 1e-14);

        let id = group_average_ce(3, &[0, 1, 2], None, &tol()).unwrap();
        assert!(id.map().distance(&LinearMap::identity(id.shape())) < 1e-15);
    }

    #[test]
    fn group_average_rejects_non_involution() {
        assert!(group_average_ce(3, &[1, 2, 0], None, &tol()).is_err());
        assert!(group_average_ce(3, &[0, 0, 2], None, &tol()).is_err());
    }

    #[test]
    fn abelian_average_over_z2_squared() {
        // two commuting involutions on four points: one orbit of size 4
        let g1 = vec![1, 0, 3, 2];
        let g2 = vec![2, 3, 0, 1];
        let e = abelian_average_ce(4, &[g1, g2], None, &tol()).unwrap();
        assert_eq!(e.sub_shape().num_blocks(), 1);
        let x = from_diagonal_values(&[re(1.0), re(2.0), re(3.0), re(6.0)]);
        assert!(e.apply(&x).distance(&Element::scalar(e.shape(), re(3.0))) < 1e-14);
    }

    #[test]
    fn group_average_is_invariant_under_the_action() {
        let sigma = vec![3, 2, 1, 0, 4];
        let e = group_average_ce(5, &sigma, None, &tol()).unwrap();
        let shape = e.shape().clone();
        let act = LinearMap::from_fn(&shape, &shape, |x| {
            let f = diagonal_values(x);
            from_diagonal_values(&sigma.iter().map(|&s| f[s]).collect::<Vec<_>>())
        });
        assert!(e.map().compose(&act).distance(e.map()) < 1e-15);
    }

    #[test]
    fn unnormalized_trace_fails_unitality() {
        let s = AlgebraShape::full(2);
        let emb = Embedding::scalars(&s);
        let map = LinearMap::from_fn(&s, &s, |x| Element::scalar(&s, x.trace()));
        let e = CondExp::custom_unchecked(emb, map).unwrap();
        let report = validate_ce(&e, &tol());
        let unital = report.get(Axiom::Unital);
        assert!(!unital.passed);
        assert!((unital.residual - 1.0).abs() < 1e-14);
    }

    #[test]
    fn skewed_pinching_fails_bimodule_with_witness() {
        let s = AlgebraShape::full(2);
        let emb = Embedding::new(AlgebraShape::diagonal(2), s.clone(), vec![vec![1, 1]], None).unwrap();
        let pinch = trace_ce(&emb, &[1.0], &tol()).unwrap();
        let sim = CMat::from_row_slice(2, 2, &[re(1.0), re(1.0), re(0.0), re(1.0)]);
        let sim_inv = sim.clone().try_inverse().unwrap();
        let map = LinearMap::from_fn(&s, &s, |x| {
            let y = Element::from_blocks(s.clone(), vec![&sim * x.block(0) * &sim_inv]).unwrap();
            pinch.apply(&y)
        });
        let e = CondExp::custom_unchecked(emb, map).unwrap();
        let report = validate_ce(&e, &tol());
        assert!(report.get(Axiom::Idempotent).passed);
        assert!(report.get(Axiom::Unital).passed);
        let bim = report.get(Axiom::Bimodule);
        assert!(!bim.passed);
        // the recorded witness really violates the identity for some generator
        let w = bim.witness.as_ref().expect("witness recorded");
        let violated = generating_set(e.sub_shape()).iter().any(|g| {
            let ig = e.embedding().embed(g).unwrap();
            e.apply(&(&ig * w)).distance(&(&ig * &e.apply(w))) > 1e-6
                || e.apply(&(w * &ig)).distance(&(&e.apply(w) * &ig)) > 1e-6
        });
        assert!(violated);
    }

    #[test]
    fn non_faithful_state_is_flagged() {
        let s = AlgebraShape::full(2);
        let emb = Embedding::scalars(&s);
        let map = LinearMap::from_fn(&s, &s, |x| Element::scalar(&s, x.block(0)[(0, 0)]));
        let e = CondExp::custom_unchecked(emb, map).unwrap();
        let report = validate_ce(&e, &tol());
        assert!(report.get(Axiom::Positive).passed);
        assert!(!report.get(Axiom::Faithful).passed);
        assert!(report.get(Axiom::Faithful).witness.is_some());
    }

    #[test]
    fn fixed_points_on_b_matrix_units() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let sub = AlgebraShape::new(vec![2, 1]).unwrap();
        let amb = AlgebraShape::new(vec![3, 5]).unwrap();
        let us = vec![linalg::haar_unitary(3, &mut rng), linalg::haar_unitary(5, &mut rng)];
        let emb = Embedding::new(sub.clone(), amb, vec![vec![1, 1], vec![2, 1]], Some(us)).unwrap();
        let e = trace_ce(&emb, &[0.3, 1.7], &tol()).unwrap();
        for b in Element::basis(&sub) {
            let ib = emb.embed(&b).unwrap();
            assert!(e.apply(&ib).distance(&ib) < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn trace_ce_is_tau_symmetric(seed in any::<u64>(), w0 in 0.1f64..5.0, w1 in 0.1f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sub = AlgebraShape::new(vec![1, 2]).unwrap();
            let amb = AlgebraShape::new(vec![3, 4]).unwrap();
            let us = vec![linalg::haar_unitary(3, &mut rng), linalg::haar_unitary(4, &mut rng)];
            let emb = Embedding::new(sub, amb.clone(), vec![vec![1, 1], vec![2, 1]], Some(us)).unwrap();
            let weights = [w0, w1];
            let e = trace_ce(&emb, &weights, &tol()).unwrap();
            let tau = |z: &Element| -> C64 {
                z.blocks().iter().zip(weights).map(|(b, w)| b.trace() * re(w)).sum()
            };
            let x = Element::random(&amb, &mut rng);
            let y = Element::random(&amb, &mut rng);
            let lhs = tau(&(&e.apply(&x) * &y));
            let rhs = tau(&(&x * &e.apply(&y)));
            prop_assert!((lhs - rhs).norm() < 1e-10 * (1.0 + lhs.norm()));
        }

        #[test]
        fn dense_map_matches_direct_formula(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cm = {
                let g = linalg::gaussian_matrix(3, 3, &mut rng);
                let p = &g * g.adjoint() + CMat::identity(3, 3) * re(0.1);
                let t = p.trace();
                p / t
            };
            let maps = vec![
                tensor_state_ce(2, &cm, &tol()).unwrap(),
                weighted_corner_ce(&AlgebraShape::new(vec![2, 1]).unwrap(), 0.3, &tol()).unwrap(),
                group_average_ce(6, &[5, 4, 3, 2, 1, 0], Some(&[1.0, 2.0, 3.0, 1.0, 1.0, 2.0]), &tol()).unwrap(),
                abelian_average_ce(4, &[vec![1, 0, 3, 2], vec![2, 3, 0, 1]], None, &tol()).unwrap(),
            ];
            for e in maps {
                let x = Element::random(e.shape(), &mut rng);
                let via_map = e.apply(&x);
                let direct = e.eval_direct(&x);
                prop_assert!(via_map.distance(&direct) <= 1e-12 * direct.max_abs().max(1.0));
            }
        }
    }
}
