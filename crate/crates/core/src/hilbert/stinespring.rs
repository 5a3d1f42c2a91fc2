//! The Stinespring-type dilation of a finite-index expectation.
//!
//! The module `M` is the completion of `A ⊗ A` under
//! `⟨a⊗x, b⊗y⟩ = E(x* E(a*b) y)`. The map `a⊗x ↦ π(a) e π(x)` is isometric
//! onto `A₁` with the inner product `E(F₁(S*T))`, so `M ≅ A₁`,
//! `V(x) = e π(x)` and `V*(S) = F₁(eS)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::Element;
use crate::condexp::CondExp;
use crate::error::{Error, Result};
use crate::hilbert::basic::{basic_construction, BasicConstruction};
use crate::linalg::{self, CMat};

const RESIDUAL_DENSE_DIM: usize = 64;
const DENSITY_DENSE_PAIRS: usize = 4096;
/// The direct Gram form on `A ⊗ A` has `dim(A)²` rows.
const GRAM_ROUTE_DIM: usize = 16;
const SAMPLES: usize = 16;
const RANK_CUTOFF: f64 = 1e-8;
/// Relative eigenvalue cutoff for Gram matrices of spanning columns.
const GRAM_EIG_CUTOFF: f64 = 1e-12;
const DILATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Stinespring {
    basic: BasicConstruction,
    /// `dim_ℂ M`, the rank of `span{π(a₁) e π(a₂)}` inside `A₁`.
    pub module_dim: usize,
    /// Rank of the scalar Gram form `Tr∘E(x* E(a*b) y)` on `A ⊗ A`, when small.
    pub gram_rank: Option<usize>,
    /// Largest `‖V* π(a) V(x) − E(a) x‖` over the tested pairs.
    pub residual: f64,
    /// Largest `‖V*V(x) − x‖`.
    pub isometry_residual: f64,
}

impl Stinespring {
    pub fn basic(&self) -> &BasicConstruction {
        &self.basic
    }

    pub fn pi(&self, a: &Element) -> Element {
        self.basic.pi().embed(a).unwrap()
    }

    pub fn v(&self, x: &Element) -> Element {
        self.basic.jones() * &self.pi(x)
    }

    pub fn v_adjoint(&self, s: &Element) -> Element {
        self.basic.f1(&(self.basic.jones() * s))
    }

    /// Whether `span{π(a₁)V(a₂)}` fills `A₁`.
    pub fn is_dense(&self) -> bool {
        self.module_dim == self.basic.shape().dim()
    }
}

fn inputs(e: &CondExp, seed: u64) -> Vec<Element> {
    if e.shape().dim() <= RESIDUAL_DENSE_DIM {
        Element::basis(e.shape())
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..SAMPLES).map(|_| Element::random(e.shape(), &mut rng)).collect()
    }
}

pub fn stinespring(e: &CondExp) -> Result<Stinespring> {
    let basic = basic_construction(e)?;
    let mut out = Stinespring {
        basic,
        module_dim: 0,
        gram_rank: None,
        residual: 0.0,
        isometry_residual: 0.0,
    };
    let xs = inputs(e, 0x5717);
    let images: Vec<Element> = xs.iter().map(|x| out.v(x)).collect();
    let mut residual = 0.0_f64;
    let mut iso = 0.0_f64;
    for (x, vx) in xs.iter().zip(&images) {
        iso = iso.max(out.v_adjoint(vx).distance(x) / x.frobenius_norm());
        for a in &xs {
            let lhs = out.v_adjoint(&(&out.pi(a) * vx));
            let rhs = &e.apply(a) * x;
            let scale = a.frobenius_norm() * x.frobenius_norm();
            residual = residual.max(lhs.distance(&rhs) / scale);
        }
    }
    out.residual = residual;
    out.isometry_residual = iso;
    if residual > DILATION_TOL || iso > DILATION_TOL {
        return Err(Error::Dilation {
            residual: residual.max(iso),
        });
    }
    out.module_dim = span_rank(e, &out);
    if e.shape().dim() <= GRAM_ROUTE_DIM {
        out.gram_rank = Some(gram_form_rank(e));
    }
    Ok(out)
}

/// Rank of `span{π(a₁) e π(a₂)}`, from all basis pairs when affordable.
fn span_rank(e: &CondExp, s: &Stinespring) -> usize {
    let shape = e.shape();
    let a1_dim = s.basic.shape().dim();
    let pairs: Vec<(Element, Element)> = if shape.dim() * shape.dim() <= DENSITY_DENSE_PAIRS {
        let basis = Element::basis(shape);
        basis
            .iter()
            .flat_map(|a| basis.iter().map(move |b| (a.clone(), b.clone())))
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0xde5e);
        (0..a1_dim + SAMPLES)
            .map(|_| (Element::random(shape, &mut rng), Element::random(shape, &mut rng)))
            .collect()
    };
    // rank via the a1_dim-square Gram matrix of the spanning columns
    let mut gram = CMat::zeros(a1_dim, a1_dim);
    for (a, b) in &pairs {
        let col = (&s.pi(a) * &s.v(b)).vectorize();
        gram.gerc(linalg::re(1.0), &col, &col, linalg::re(1.0));
    }
    let vals = linalg::herm_eigenvalues(&gram);
    let top = vals.last().copied().unwrap_or(0.0);
    vals.iter().filter(|&&v| v > GRAM_EIG_CUTOFF * top).count()
}

/// Rank of `((a,x),(b,y)) ↦ Tr(E(x* E(a*b) y))` over basis tensors.
fn gram_form_rank(e: &CondExp) -> usize {
    let basis = Element::basis(e.shape());
    let d = basis.len();
    let inner: Vec<Vec<Element>> = basis
        .iter()
        .map(|a| basis.iter().map(|b| e.apply(&(&a.adjoint() * b))).collect())
        .collect();
    let n = d * d;
    let mut g = CMat::zeros(n, n);
    for ai in 0..d {
        for xi in 0..d {
            let xs = basis[xi].adjoint();
            for bi in 0..d {
                let left = &xs * &inner[ai][bi];
                for yi in 0..d {
                    let val = e.apply(&(&left * &basis[yi])).trace();
                    g[(ai * d + xi, bi * d + yi)] = val;
                }
            }
        }
    }
    linalg::numerical_rank(&linalg::hermitian_part(&g), RANK_CUTOFF)
}
