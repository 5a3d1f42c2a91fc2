//! The Jones basic construction, the dual expectation `E₁` and the tower.
//!
//! `A` is a right `B`-module with inner product `E(x*y)`. In the strip
//! coordinates `Z_j` of [`ModuleLayout`] the inner product reads
//! `Z_j(x)* G_j Z_j(y)` for a positive matrix `G_j` commuting with the left
//! action of `A`, so `W_j = G_j^{1/2} Z_j` are orthonormal coordinates and the
//! adjointable operators are `A₁ = ⊕_j M_{d_j}` acting on `W_j` from the left.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::{AlgebraShape, Element, LinearMap};
use crate::condexp::{validate_ce, CondExp, ValidationReport};
use crate::error::{Error, Result};
use crate::hilbert::quasi::{index_element, IndexElement};
use crate::inclusion::{Embedding, ModuleLayout};
use crate::linalg::{self, re, CMat, CVec};
use crate::tol::Tolerances;

const GRAM_FLOOR: f64 = 1e-12;
const THETA_DENSE_DIM: usize = 16;
const RELATION_DENSE_DIM: usize = 64;
const SAMPLES: usize = 6;

#[derive(Debug, Clone)]
pub struct BasicConstruction {
    shape: AlgebraShape,
    /// `order[k]` is the B-block whose module operators form A₁-block `k`.
    order: Vec<usize>,
    position: Vec<usize>,
    layout: ModuleLayout,
    gram_sqrt: Vec<CMat>,
    gram_inv_sqrt: Vec<CMat>,
    pi: Embedding,
    jones: Element,
    quasi_basis: Vec<Element>,
    index: Element,
    /// Largest `‖π(a₂) e π(a₁)* − θ_{a₁,a₂}‖` over the tested pairs.
    pub theta_residual: f64,
    /// Largest `‖e π(a) e − π(E(a)) e‖` over a spanning set.
    pub jones_relation_residual: f64,
}

/// The functional `y ↦ ι⁻¹(E(y))_j[0,0]` as a row acting on vectorized `y`.
fn corner_functional(e: &CondExp, j: usize) -> CVec {
    let emb = e.embedding();
    let amb = emb.amb_shape();
    let i = (0..amb.num_blocks())
        .find(|&i| emb.multiplicity(i, j) > 0)
        .expect("injective embedding");
    let n = amb.block(i);
    let off = emb.copy_offset(i, j, 0);
    let w: CVec = if emb.has_trivial_unitaries() {
        let mut w = CVec::zeros(n);
        w[off] = re(1.0);
        w
    } else {
        emb.unitaries()[i].column(off).into_owned()
    };
    let rows = e.map().matrix().rows(amb.vec_offset(i), n * n);
    let mut coeff = CVec::zeros(n * n);
    for k in 0..n {
        for l in 0..n {
            coeff[k * n + l] = w[k].conj() * w[l];
        }
    }
    rows.transpose() * coeff
}

fn spanning(shape: &AlgebraShape, dense: usize, seed: u64) -> Vec<Element> {
    if shape.dim() <= dense {
        Element::basis(shape)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..SAMPLES).map(|_| Element::random(shape, &mut rng)).collect()
    }
}

impl BasicConstruction {
    /// `A₁` with blocks in canonical order (ascending dimension, then B-block).
    pub fn shape(&self) -> &AlgebraShape {
        &self.shape
    }

    pub fn block_order(&self) -> &[usize] {
        &self.order
    }

    /// `π_E: A → A₁`, left multiplication.
    pub fn pi(&self) -> &Embedding {
        &self.pi
    }

    /// The Jones projection `e = θ_{1,1}`.
    pub fn jones(&self) -> &Element {
        &self.jones
    }

    /// The module-coordinate quasi-basis `u_{j,p}` with `W_j(u_{j,p}) = e_p e_0ᵀ`.
    pub fn quasi_basis(&self) -> &[Element] {
        &self.quasi_basis
    }

    /// `Σ u_{j,p} u_{j,p}*`.
    pub fn index(&self) -> &Element {
        &self.index
    }

    /// Orthonormal module coordinates `W_j(x)`, indexed by B-block.
    pub fn coords(&self, x: &Element) -> Vec<CMat> {
        self.layout
            .to_coords(x)
            .into_iter()
            .zip(&self.gram_sqrt)
            .map(|(z, g)| g * z)
            .collect()
    }

    pub fn from_coords(&self, w: &[CMat]) -> Element {
        let z: Vec<CMat> = w.iter().zip(&self.gram_inv_sqrt).map(|(w, g)| g * w).collect();
        self.layout.from_coords(&z)
    }

    /// `T(x)` for a module operator `T ∈ A₁`.
    pub fn act(&self, t: &Element, x: &Element) -> Element {
        let w: Vec<CMat> = self
            .coords(x)
            .into_iter()
            .enumerate()
            .map(|(j, wj)| t.block(self.position[j]) * wj)
            .collect();
        self.from_coords(&w)
    }

    /// `θ_{a₁,a₂}: x ↦ a₂ E(a₁* x)` as an element of `A₁`.
    pub fn theta(&self, a1: &Element, a2: &Element) -> Element {
        let w1 = self.coords(a1);
        let w2 = self.coords(a2);
        let blocks = self
            .order
            .iter()
            .map(|&j| &w2[j] * w1[j].adjoint())
            .collect();
        Element::from_blocks(self.shape.clone(), blocks).unwrap()
    }

    /// `F₁(T) = Σ T(u_i) u_i*`, so that `F₁(θ_{a₁,a₂}) = a₂ a₁*`.
    ///
    /// Block `i` of the result sums the strip-diagonal blocks of
    /// `G_j^{-1/2} T_j G_j^{-1/2}` over the copies of `B_j` inside `A_i`.
    pub fn f1(&self, t: &Element) -> Element {
        let amb = self.layout.embedding().amb_shape();
        let mut out: Vec<CMat> = amb.blocks().iter().map(|&n| CMat::zeros(n, n)).collect();
        for (j, g) in self.gram_inv_sqrt.iter().enumerate() {
            let s = g * t.block(self.position[j]) * g;
            for (i, row) in self.layout.strips(j) {
                let n = amb.block(i);
                out[i] += s.view((row, row), (n, n));
            }
        }
        Element::from_blocks(amb.clone(), out).unwrap()
    }
}

/// Builds `A₁ = End_B(A)`, `e`, `π_E` and the module quasi-basis.
pub fn basic_construction(e: &CondExp) -> Result<BasicConstruction> {
    let emb = e.embedding();
    let sub = emb.sub_shape();
    let layout = emb.module_layout();
    let dims = layout.dims().to_vec();

    let mut gram_sqrt = Vec::with_capacity(sub.num_blocks());
    let mut gram_inv_sqrt = Vec::with_capacity(sub.num_blocks());
    for (j, &d) in dims.iter().enumerate() {
        let phi = corner_functional(e, j);
        let cols: Vec<Element> = (0..d)
            .map(|p| {
                let mut v = CVec::zeros(d);
                v[p] = re(1.0);
                layout.column_element(j, &v)
            })
            .collect();
        let mut g = CMat::zeros(d, d);
        for p in 0..d {
            let xp = cols[p].adjoint();
            for q in p..d {
                let v = (&xp * &cols[q]).vectorize();
                let val = phi.dot(&v);
                g[(p, q)] = val;
                g[(q, p)] = val.conj();
            }
        }
        let (vals, vecs) = linalg::herm_eig(&g);
        if vals[0] <= GRAM_FLOOR * vals[d - 1].max(1.0) {
            return Err(Error::InfiniteIndex);
        }
        gram_sqrt.push(linalg::spectral_apply(&vals, &vecs, f64::sqrt));
        gram_inv_sqrt.push(linalg::spectral_apply(&vals, &vecs, |v| 1.0 / v.sqrt()));
    }

    let mut order: Vec<usize> = (0..dims.len()).collect();
    order.sort_by_key(|&j| (dims[j], j));
    let mut position = vec![0; order.len()];
    for (k, &j) in order.iter().enumerate() {
        position[j] = k;
    }
    let shape = AlgebraShape::new(order.iter().map(|&j| dims[j]).collect())?;
    let amb = emb.amb_shape();
    let inclusion = order
        .iter()
        .map(|&j| (0..amb.num_blocks()).map(|i| emb.multiplicity(i, j)).collect())
        .collect();
    let pi = Embedding::new(amb.clone(), shape.clone(), inclusion, None)?;

    let mut quasi_basis = Vec::new();
    for (j, &d) in dims.iter().enumerate() {
        for p in 0..d {
            let v = gram_inv_sqrt[j].column(p).into_owned();
            quasi_basis.push(layout.column_element(j, &v));
        }
    }
    let index = quasi_basis
        .iter()
        .fold(Element::zeros(amb), |acc, u| &acc + &(u * &u.adjoint()));

    let mut bc = BasicConstruction {
        shape,
        order,
        position,
        layout,
        gram_sqrt,
        gram_inv_sqrt,
        pi,
        jones: Element::zeros(&AlgebraShape::full(1)),
        quasi_basis,
        index,
        theta_residual: 0.0,
        jones_relation_residual: 0.0,
    };
    let one = Element::identity(amb);
    bc.jones = bc.theta(&one, &one);
    bc.theta_residual = theta_residual(e, &bc);
    bc.jones_relation_residual = jones_relation_residual(e, &bc);
    Ok(bc)
}

/// Compares `π(a₂) e π(a₁)*` with the operator `x ↦ a₂ E(a₁* x)` evaluated
/// column by column on the module basis.
fn theta_residual(e: &CondExp, bc: &BasicConstruction) -> f64 {
    let shape = e.shape();
    let inputs = spanning(shape, THETA_DENSE_DIM, 0x7e7a);
    let pairs: Vec<(&Element, &Element)> = if shape.dim() <= THETA_DENSE_DIM {
        inputs.iter().flat_map(|a| inputs.iter().map(move |b| (a, b))).collect()
    } else {
        inputs.iter().zip(inputs.iter().rev()).collect()
    };
    let mut worst = 0.0_f64;
    for (a1, a2) in pairs {
        let via_pi = &(&bc.pi.embed(a2).unwrap() * &bc.jones) * &bc.pi.embed(a1).unwrap().adjoint();
        let a1s = a1.adjoint();
        let mut blocks: Vec<CMat> = bc.shape.blocks().iter().map(|&d| CMat::zeros(d, d)).collect();
        let mut idx = 0;
        for (j, &d) in bc.layout.dims().iter().enumerate() {
            for p in 0..d {
                let image = a2 * &e.apply(&(&a1s * &bc.quasi_basis[idx]));
                let w = bc.coords(&image);
                blocks[bc.position[j]].set_column(p, &w[j].column(0));
                idx += 1;
            }
        }
        let direct = Element::from_blocks(bc.shape.clone(), blocks).unwrap();
        let scale = a1.frobenius_norm() * a2.frobenius_norm();
        worst = worst.max(via_pi.distance(&direct) / scale.max(1e-300));
    }
    worst
}

fn jones_relation_residual(e: &CondExp, bc: &BasicConstruction) -> f64 {
    let inputs = spanning(e.shape(), RELATION_DENSE_DIM, 0x10e5);
    inputs
        .iter()
        .map(|a| {
            let lhs = &(&bc.jones * &bc.pi.embed(a).unwrap()) * &bc.jones;
            let rhs = &bc.pi.embed(&e.apply(a)).unwrap() * &bc.jones;
            lhs.distance(&rhs) / a.frobenius_norm().max(1e-300)
        })
        .fold(0.0, f64::max)
}

/// `E₁ = π_E(Ind(E)⁻¹)·F₁` as a validated expectation `A₁ → π_E(A)`,
/// together with its validation report and `‖E₁(e) − π(Ind⁻¹)‖`.
#[derive(Debug, Clone)]
pub struct NextExpectation {
    pub expectation: CondExp,
    pub validation: ValidationReport,
    pub jones_image_residual: f64,
}

pub fn next_expectation(bc: &BasicConstruction, tol: &Tolerances) -> Result<NextExpectation> {
    let ind_inv = bc.index.map_blocks(linalg::hermitian_part).functional_calculus(|v| 1.0 / v);
    let pi = bc.pi.clone();
    let map = LinearMap::from_fn(&bc.shape, &bc.shape, |t| {
        pi.embed(&(&ind_inv * &bc.f1(t))).unwrap()
    });
    let expectation = CondExp::custom_unchecked(pi.clone(), map)?;
    let validation = validate_ce(&expectation, tol);
    if let Some(check) = validation.first_failure() {
        return Err(Error::Validation {
            axiom: check.axiom.to_string(),
            residual: check.residual,
        });
    }
    let jones_image_residual = expectation.apply(&bc.jones).distance(&pi.embed(&ind_inv).unwrap());
    if jones_image_residual > 1e-8 {
        return Err(Error::IndexInvariant(format!(
            "E₁(e) differs from the inverse index by {jones_image_residual:.3e}"
        )));
    }
    Ok(NextExpectation {
        expectation,
        validation,
        jones_image_residual,
    })
}

#[derive(Debug, Clone)]
pub enum Stabilization {
    /// `‖Ind(E_k) − π(Ind(E_{k-1}))‖`.
    Checked { residual: f64, passed: bool },
    /// `Ind(E_{k-1})` is not in the center of the lower algebra.
    Skipped,
}

#[derive(Debug, Clone)]
pub struct TowerLevel {
    pub level: usize,
    pub algebra_shape: AlgebraShape,
    /// `E_k: A_k → A_{k-1}`; level 0 holds the original expectation.
    pub expectation: CondExp,
    /// `e_k ∈ A_k`, absent at level 0.
    pub jones_projection: Option<Element>,
    pub index: IndexElement,
    pub jones_image_residual: Option<f64>,
    pub projection_defect: Option<f64>,
    pub stabilization: Option<Stabilization>,
    pub theta_residual: Option<f64>,
    pub jones_relation_residual: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Tower {
    pub levels: Vec<TowerLevel>,
    /// The next level would have exceeded the dimension budget.
    pub truncated: bool,
}

/// Bounds the vector-space dimension of the next algebra; its expectation is
/// stored as a dense square matrix of that size.
pub const DEFAULT_DIM_BUDGET: usize = 4096;

/// Whether `x ∈ ι(Z(B))`.
fn in_embedded_center(emb: &Embedding, x: &Element, tol: f64) -> bool {
    match emb.pullback(x, tol) {
        Some(b) => b.centrality_defect() <= tol * b.max_abs().max(1.0),
        None => false,
    }
}

/// Iterates the basic construction `levels` times or until the next
/// algebra's dimension `Σ d_j²` would exceed `dim_budget`.
pub fn jones_tower(e: &CondExp, levels: usize, dim_budget: usize, tol: &Tolerances) -> Result<Tower> {
    let index = index_element(e)?;
    let mut out = vec![TowerLevel {
        level: 0,
        algebra_shape: e.shape().clone(),
        expectation: e.clone(),
        jones_projection: None,
        index,
        jones_image_residual: None,
        projection_defect: None,
        stabilization: None,
        theta_residual: None,
        jones_relation_residual: None,
    }];
    let mut truncated = false;
    for level in 1..=levels {
        let prev = out.last().unwrap();
        let next_dim: usize = prev.expectation.embedding().dual_dims().iter().map(|d| d * d).sum();
        if next_dim > dim_budget {
            truncated = true;
            break;
        }
        let bc = basic_construction(&prev.expectation)?;
        let next = next_expectation(&bc, tol)?;
        let index = index_element(&next.expectation)?;
        let prev_ind = &prev.index.value;
        let stabilization = if in_embedded_center(prev.expectation.embedding(), prev_ind, 1e-9) {
            let residual = index.value.distance(&bc.pi().embed(prev_ind).unwrap());
            Stabilization::Checked {
                residual,
                passed: residual <= 1e-8 * prev_ind.max_abs().max(1.0),
            }
        } else {
            Stabilization::Skipped
        };
        let jones = bc.jones().clone();
        let projection_defect = (&jones * &jones).distance(&jones).max(jones.self_adjoint_defect());
        out.push(TowerLevel {
            level,
            algebra_shape: bc.shape().clone(),
            expectation: next.expectation,
            jones_projection: Some(jones),
            index,
            jones_image_residual: Some(next.jones_image_residual),
            projection_defect: Some(projection_defect),
            stabilization: Some(stabilization),
            theta_residual: Some(bc.theta_residual),
            jones_relation_residual: Some(bc.jones_relation_residual),
        });
    }
    Ok(Tower {
        levels: out,
        truncated,
    })
}
