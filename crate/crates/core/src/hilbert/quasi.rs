//! Module frames, quasi-bases and the Watatani index.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::{AlgebraShape, Element};
use crate::condexp::{spanning_inputs, CondExp};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

/// Frames over the full matrix-unit basis are used up to this dimension of `A`.
pub const FULL_BASIS_DIM: usize = 64;
const RECONSTRUCTION_DENSE_DIM: usize = 64;
const RECONSTRUCTION_SAMPLES: usize = 8;
const GRAM_SUPPORT: f64 = 1e-10;

/// `Q_kl = E(g_k* g_l)` stored per B-block `j` as one `(m·m_j)`-square
/// matrix indexed by `(generator, column)`.
#[derive(Debug, Clone)]
pub struct GramOperator {
    generators: usize,
    sub: AlgebraShape,
    blocks: Vec<CMat>,
}

impl GramOperator {
    pub fn generators(&self) -> usize {
        self.generators
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    /// The entry `Q_kl` as an element of `B`.
    pub fn entry(&self, k: usize, l: usize) -> Element {
        let blocks = self
            .blocks
            .iter()
            .enumerate()
            .map(|(j, q)| {
                let m = self.sub.block(j);
                q.view((k * m, l * m), (m, m)).into_owned()
            })
            .collect();
        Element::from_blocks(self.sub.clone(), blocks).unwrap()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .map(linalg::min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn gram_operator(e: &CondExp, generators: &[Element]) -> GramOperator {
    let emb = e.embedding();
    let sub = emb.sub_shape().clone();
    let m = generators.len();
    let mut blocks: Vec<CMat> = sub
        .blocks()
        .iter()
        .map(|&mj| CMat::zeros(m * mj, m * mj))
        .collect();
    let adjoints: Vec<Element> = generators.iter().map(Element::adjoint).collect();
    for k in 0..m {
        for l in k..m {
            let q = emb.pullback_unchecked(&e.apply(&(&adjoints[k] * &generators[l])));
            for (j, qj) in blocks.iter_mut().enumerate() {
                let mj = sub.block(j);
                let b = q.block(j);
                qj.view_mut((k * mj, l * mj), (mj, mj)).copy_from(b);
                if k != l {
                    qj.view_mut((l * mj, k * mj), (mj, mj)).copy_from(&b.adjoint());
                }
            }
        }
    }
    GramOperator {
        generators: m,
        sub,
        blocks,
    }
}

#[derive(Debug, Clone)]
pub struct QuasiBasis {
    pub vectors: Vec<Element>,
    /// Total rank of the Gram operator over all B-blocks.
    pub gram_pinv_rank: usize,
    pub reconstruction_residual: f64,
}

impl QuasiBasis {
    /// `Σ u_i u_i*`.
    pub fn index_value(&self, shape: &AlgebraShape) -> Element {
        self.vectors
            .iter()
            .fold(Element::zeros(shape), |acc, u| &acc + &(u * &u.adjoint()))
    }
}

/// Largest relative error of `Σ u_i E(u_i* x) = x` over a spanning set.
pub fn reconstruction_residual(e: &CondExp, vectors: &[Element]) -> f64 {
    let inputs = spanning_inputs(e.shape(), RECONSTRUCTION_DENSE_DIM, RECONSTRUCTION_SAMPLES, 0xba5e);
    let adjoints: Vec<Element> = vectors.iter().map(Element::adjoint).collect();
    inputs
        .iter()
        .map(|x| {
            let rebuilt = vectors
                .iter()
                .zip(&adjoints)
                .fold(Element::zeros(e.shape()), |acc, (u, us)| {
                    &acc + &(u * &e.apply(&(us * x)))
                });
            rebuilt.distance(x) / x.frobenius_norm().max(1e-300)
        })
        .fold(0.0, f64::max)
}

/// Frame route: `u = g·Q^{+1/2}` with the pseudo-inverse square root taken
/// inside the matrices over `B`.
pub fn quasi_basis_from_generators(e: &CondExp, generators: &[Element], tol: f64) -> Result<QuasiBasis> {
    let emb = e.embedding();
    let sub = emb.sub_shape();
    let q = gram_operator(e, generators);
    let mut rank = 0;
    let roots: Vec<CMat> = q
        .blocks
        .iter()
        .map(|qj| {
            let (r, k) = linalg::psd_pinv_sqrt(qj, GRAM_SUPPORT);
            rank += k;
            r
        })
        .collect();
    let m = generators.len();
    let vectors: Vec<Element> = (0..m)
        .map(|i| {
            (0..m).fold(Element::zeros(e.shape()), |acc, k| {
                let blocks = roots
                    .iter()
                    .enumerate()
                    .map(|(j, r)| {
                        let mj = sub.block(j);
                        r.view((k * mj, i * mj), (mj, mj)).into_owned()
                    })
                    .collect();
                let coeff = Element::from_blocks(sub.clone(), blocks).unwrap();
                &acc + &(&generators[k] * &emb.embed(&coeff).unwrap())
            })
        })
        .collect();
    let residual = reconstruction_residual(e, &vectors);
    if residual > tol {
        return Err(Error::Reconstruction { residual });
    }
    Ok(QuasiBasis {
        vectors,
        gram_pinv_rank: rank,
        reconstruction_residual: residual,
    })
}

/// Enough random generators to span `A` as a right `B`-module, plus slack.
pub fn random_generators(e: &CondExp, extra: usize, seed: u64) -> Vec<Element> {
    let dims = e.embedding().dual_dims();
    let needed = dims
        .iter()
        .zip(e.sub_shape().blocks())
        .map(|(&d, &m)| d.div_ceil(m))
        .max()
        .unwrap_or(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..needed + extra)
        .map(|_| Element::random(e.shape(), &mut rng))
        .collect()
}

/// The default generator set: the matrix-unit basis for small algebras,
/// seeded random generators otherwise.
pub fn default_generators(e: &CondExp) -> Vec<Element> {
    if e.shape().dim() <= FULL_BASIS_DIM {
        Element::basis(e.shape())
    } else {
        random_generators(e, 1, 0x9e4)
    }
}

pub fn quasi_basis(e: &CondExp) -> Result<QuasiBasis> {
    quasi_basis_from_generators(e, &default_generators(e), 1e-8)
}

#[derive(Debug, Clone)]
pub struct IndexElement {
    pub value: Element,
    pub norm: f64,
    pub is_central: bool,
    pub min_spectrum: f64,
    /// Relative distance to the index computed from a second generator set.
    pub basis_independence: f64,
    pub quasi_basis_size: usize,
    pub reconstruction_residual: f64,
}

impl IndexElement {
    /// Checks the index invariants on an already computed value.
    pub fn from_value(value: Element, basis_independence: f64, size: usize, residual: f64) -> Result<Self> {
        let norm = value.operator_norm();
        let central_defect = value.centrality_defect();
        let is_central = central_defect <= 1e-9 * norm.max(1.0);
        if !is_central {
            return Err(Error::IndexInvariant(format!(
                "index is not central (defect {central_defect:.3e})"
            )));
        }
        let min_spectrum = value.map_blocks(linalg::hermitian_part).min_eigenvalue();
        if min_spectrum < 1.0 - 1e-8 {
            return Err(Error::IndexInvariant(format!(
                "index has spectral value {min_spectrum:.12} below 1"
            )));
        }
        Ok(Self {
            value,
            norm,
            is_central,
            min_spectrum,
            basis_independence,
            quasi_basis_size: size,
            reconstruction_residual: residual,
        })
    }

    pub fn inverse(&self) -> Element {
        self.value.functional_calculus(|v| 1.0 / v)
    }
}

/// `Ind(E) = Σ u_i u_i*`, recomputed from an independent random frame.
pub fn index_element(e: &CondExp) -> Result<IndexElement> {
    let qb = quasi_basis(e)?;
    let value = qb.index_value(e.shape());
    let second = quasi_basis_from_generators(e, &random_generators(e, 2, 0x5ec0), 1e-8)?;
    let other = second.index_value(e.shape());
    let rel = value.distance(&other) / value.max_abs().max(1.0);
    if rel > 1e-8 {
        return Err(Error::IndexInvariant(format!(
            "index depends on the generator set (relative difference {rel:.3e})"
        )));
    }
    IndexElement::from_value(value, rel, qb.vectors.len(), qb.reconstruction_residual)
}
