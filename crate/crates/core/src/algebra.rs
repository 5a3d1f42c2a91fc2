//! Multi-matrix algebras `⊕ M_{n_i}(ℂ)`, their elements, and linear maps
//! between them.
//!
//! Elements are stored block by block; the ambient `(Σ n_i)`-square picture
//! is never materialized here. Vectorization is block-major and row-major
//! within a block, which is also the serialized layout.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, re, CMat, CVec, C64};

/// Block dimensions of a multi-matrix algebra.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct AlgebraShape {
    blocks: Vec<usize>,
}

impl TryFrom<Vec<usize>> for AlgebraShape {
    type Error = Error;
    fn try_from(blocks: Vec<usize>) -> Result<Self> {
        Self::new(blocks)
    }
}

impl From<AlgebraShape> for Vec<usize> {
    fn from(s: AlgebraShape) -> Self {
        s.blocks
    }
}

impl AlgebraShape {
    pub fn new(blocks: Vec<usize>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidShape("no blocks".into()));
        }
        if let Some(pos) = blocks.iter().position(|&n| n == 0) {
            return Err(Error::InvalidShape(format!("block {pos} has dimension 0")));
        }
        Ok(Self { blocks })
    }

    /// `M_n`.
    pub fn full(n: usize) -> Self {
        Self::new(vec![n]).expect("n >= 1")
    }

    /// `ℂ^n` as `n` one-dimensional blocks.
    pub fn diagonal(n: usize) -> Self {
        Self::new(vec![1; n]).expect("n >= 1")
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, i: usize) -> usize {
        self.blocks[i]
    }

    /// `Σ n_i`, the size of the defining representation.
    pub fn ambient_dim(&self) -> usize {
        self.blocks.iter().sum()
    }

    /// Linear dimension `Σ n_i²`.
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|n| n * n).sum()
    }

    pub fn is_commutative(&self) -> bool {
        self.blocks.iter().all(|&n| n == 1)
    }

    /// Offset of block `i` in the vectorized layout.
    pub fn vec_offset(&self, i: usize) -> usize {
        self.blocks[..i].iter().map(|n| n * n).sum()
    }

    /// Offset of block `i` along the ambient diagonal.
    pub fn ambient_offset(&self, i: usize) -> usize {
        self.blocks[..i].iter().sum()
    }

    /// Inverse of the vectorization index: `(block, row, col)`.
    pub fn locate(&self, mut k: usize) -> (usize, usize, usize) {
        for (i, &n) in self.blocks.iter().enumerate() {
            if k < n * n {
                return (i, k / n, k % n);
            }
            k -= n * n;
        }
        panic!("vectorization index out of range");
    }
}

impl fmt::Display for AlgebraShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.blocks.iter().map(|n| format!("M{n}")).collect();
        write!(f, "{}", parts.join("⊕"))
    }
}

/// A block-diagonal element of a multi-matrix algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    shape: AlgebraShape,
    blocks: Vec<CMat>,
}

/// One eigenvalue of a self-adjoint element, tagged with its block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralValue {
    pub value: f64,
    pub block: usize,
}

impl Element {
    pub fn from_blocks(shape: AlgebraShape, blocks: Vec<CMat>) -> Result<Self> {
        if blocks.len() != shape.num_blocks()
            || blocks
                .iter()
                .zip(shape.blocks())
                .any(|(m, &n)| m.nrows() != n || m.ncols() != n)
        {
            return Err(Error::ShapeMismatch {
                expected: shape.blocks().to_vec(),
                got: blocks.iter().map(|m| m.nrows()).collect(),
            });
        }
        Ok(Self { shape, blocks })
    }

    pub fn zeros(shape: &AlgebraShape) -> Self {
        let blocks = shape.blocks().iter().map(|&n| CMat::zeros(n, n)).collect();
        Self { shape: shape.clone(), blocks }
    }

    pub fn identity(shape: &AlgebraShape) -> Self {
        let blocks = shape.blocks().iter().map(|&n| CMat::identity(n, n)).collect();
        Self { shape: shape.clone(), blocks }
    }

    pub fn scalar(shape: &AlgebraShape, z: C64) -> Self {
        Self::identity(shape) * z
    }

    /// Matrix unit `e_{rc}` inside block `block`.
    pub fn matrix_unit(shape: &AlgebraShape, block: usize, r: usize, c: usize) -> Self {
        let mut e = Self::zeros(shape);
        e.blocks[block][(r, c)] = re(1.0);
        e
    }

    /// Identity of block `block`, zero elsewhere.
    pub fn block_identity(shape: &AlgebraShape, block: usize) -> Self {
        let mut e = Self::zeros(shape);
        let n = shape.block(block);
        e.blocks[block] = CMat::identity(n, n);
        e
    }

    /// Every matrix unit, in vectorization order.
    pub fn basis(shape: &AlgebraShape) -> Vec<Self> {
        (0..shape.dim())
            .map(|k| {
                let (i, r, c) = shape.locate(k);
                Self::matrix_unit(shape, i, r, c)
            })
            .collect()
    }

    /// Entries i.i.d. standard complex Gaussian.
    pub fn random<R: Rng + ?Sized>(shape: &AlgebraShape, rng: &mut R) -> Self {
        let blocks = shape
            .blocks()
            .iter()
            .map(|&n| linalg::gaussian_matrix(n, n, rng))
            .collect();
        Self { shape: shape.clone(), blocks }
    }

    pub fn random_self_adjoint<R: Rng + ?Sized>(shape: &AlgebraShape, rng: &mut R) -> Self {
        let x = Self::random(shape, rng);
        let blocks = x.blocks.iter().map(linalg::hermitian_part).collect();
        Self { shape: shape.clone(), blocks }
    }

    /// `ξξ*` for a unit vector `ξ` living in block `block`.
    pub fn rank_one(shape: &AlgebraShape, block: usize, xi: &CVec) -> Self {
        let mut e = Self::zeros(shape);
        e.blocks[block] = xi * xi.adjoint();
        e
    }

    pub fn shape(&self) -> &AlgebraShape {
        &self.shape
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &CMat {
        &self.blocks[i]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut CMat {
        &mut self.blocks[i]
    }

    pub fn into_blocks(self) -> Vec<CMat> {
        self.blocks
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                expected: self.shape.blocks().to_vec(),
                got: other.shape.blocks().to_vec(),
            });
        }
        Ok(())
    }

    /// Blockwise product.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(self.zip_with(other, |a, b| a * b))
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&CMat, &CMat) -> CMat) -> Self {
        let blocks = self.blocks.iter().zip(&other.blocks).map(|(a, b)| f(a, b)).collect();
        Self { shape: self.shape.clone(), blocks }
    }

    pub fn map_blocks(&self, f: impl Fn(&CMat) -> CMat) -> Self {
        Self {
            shape: self.shape.clone(),
            blocks: self.blocks.iter().map(f).collect(),
        }
    }

    pub fn adjoint(&self) -> Self {
        self.map_blocks(|m| m.adjoint())
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self * other - other * self
    }

    /// Unnormalized ambient trace `Σ Tr(x_i)`.
    pub fn trace(&self) -> C64 {
        self.blocks.iter().map(|m| m.trace()).sum()
    }

    /// Hilbert-Schmidt inner product `Tr(x* y)`, conjugate-linear in `self`.
    pub fn hs_inner(&self, other: &Self) -> C64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum::<C64>())
            .sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.blocks.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
    }

    /// Largest entry modulus, used for residuals.
    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().map(linalg::max_abs).fold(0.0, f64::max)
    }

    pub fn distance(&self, other: &Self) -> f64 {
        (self - other).max_abs()
    }

    pub fn self_adjoint_defect(&self) -> f64 {
        self.blocks.iter().map(linalg::hermiticity_defect).fold(0.0, f64::max)
    }

    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        self.self_adjoint_defect() <= tol * self.max_abs().max(1.0)
    }

    /// Blockwise Hermitian eigenvalues, ascending; ties broken by block index.
    pub fn spectrum(&self, tol: f64) -> Result<Vec<SpectralValue>> {
        let defect = self.self_adjoint_defect();
        if defect > tol * self.max_abs().max(1.0) {
            return Err(Error::NotSelfAdjoint { defect });
        }
        let mut out: Vec<SpectralValue> = self
            .blocks
            .iter()
            .enumerate()
            .flat_map(|(i, m)| {
                linalg::herm_eigenvalues(m)
                    .into_iter()
                    .map(move |value| SpectralValue { value, block: i })
            })
            .collect();
        out.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.block.cmp(&b.block)));
        Ok(out)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .map(linalg::min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }

    /// `max_i ‖x_i‖` (largest singular value over blocks).
    pub fn operator_norm(&self) -> f64 {
        self.blocks.iter().map(linalg::spectral_norm).fold(0.0, f64::max)
    }

    pub fn is_positive(&self, tol: f64) -> bool {
        let scale = self.max_abs().max(1.0);
        self.is_self_adjoint(tol) && self.min_eigenvalue() >= -tol * scale
    }

    /// Self-adjoint idempotent within `tol`.
    pub fn is_projection(&self, tol: f64) -> bool {
        self.is_self_adjoint(tol) && (self * self).distance(self) <= tol * self.max_abs().max(1.0)
    }

    /// Rank of the element as an ambient operator.
    pub fn rank(&self, rel_cutoff: f64) -> usize {
        let top = self.operator_norm();
        if top == 0.0 {
            return 0;
        }
        self.blocks
            .iter()
            .map(|m| {
                linalg::singular_values(m)
                    .iter()
                    .filter(|&&s| s > rel_cutoff * top)
                    .count()
            })
            .sum()
    }

    /// `true` if every block is a multiple of its identity.
    pub fn is_central(&self, tol: f64) -> bool {
        self.centrality_defect() <= tol * self.max_abs().max(1.0)
    }

    pub fn centrality_defect(&self) -> f64 {
        self.blocks
            .iter()
            .map(|m| {
                let n = m.nrows();
                let avg = m.trace() / re(n as f64);
                linalg::max_abs(&(m - CMat::identity(n, n) * avg))
            })
            .fold(0.0, f64::max)
    }

    /// Inverse, blockwise. `None` if some block is singular.
    pub fn try_inverse(&self) -> Option<Self> {
        let blocks: Option<Vec<CMat>> = self.blocks.iter().map(|m| m.clone().try_inverse()).collect();
        blocks.map(|blocks| Self { shape: self.shape.clone(), blocks })
    }

    /// Applies a real function to the spectrum of a self-adjoint element.
    pub fn functional_calculus(&self, f: impl Fn(f64) -> f64) -> Self {
        self.map_blocks(|m| {
            let (vals, vecs) = linalg::herm_eig(m);
            linalg::spectral_apply(&vals, &vecs, &f)
        })
    }

    pub fn vectorize(&self) -> CVec {
        let mut v = CVec::zeros(self.shape.dim());
        let mut k = 0;
        for m in &self.blocks {
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    v[k] = m[(r, c)];
                    k += 1;
                }
            }
        }
        v
    }

    pub fn devectorize(shape: &AlgebraShape, v: &CVec) -> Result<Self> {
        if v.len() != shape.dim() {
            return Err(Error::InvalidShape(format!(
                "vector of length {} for algebra of dimension {}",
                v.len(),
                shape.dim()
            )));
        }
        let mut k = 0;
        let blocks = shape
            .blocks()
            .iter()
            .map(|&n| {
                let m = DMatrix::from_fn(n, n, |r, c| v[k + r * n + c]);
                k += n * n;
                m
            })
            .collect();
        Ok(Self { shape: shape.clone(), blocks })
    }

    /// The block-diagonal ambient matrix of size `Σ n_i`.
    pub fn to_ambient(&self) -> CMat {
        let n = self.shape.ambient_dim();
        let mut out = CMat::zeros(n, n);
        let mut off = 0;
        for m in &self.blocks {
            let k = m.nrows();
            out.view_mut((off, off), (k, k)).copy_from(m);
            off += k;
        }
        out
    }
}

impl Add for &Element {
    type Output = Element;
    fn add(self, rhs: &Element) -> Element {
        assert_eq!(self.shape, rhs.shape, "shape mismatch in addition");
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &Element {
    type Output = Element;
    fn sub(self, rhs: &Element) -> Element {
        assert_eq!(self.shape, rhs.shape, "shape mismatch in subtraction");
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Add for Element {
    type Output = Element;
    fn add(self, rhs: Element) -> Element {
        &self + &rhs
    }
}

impl Sub for Element {
    type Output = Element;
    fn sub(self, rhs: Element) -> Element {
        &self - &rhs
    }
}

impl Mul for &Element {
    type Output = Element;
    fn mul(self, rhs: &Element) -> Element {
        self.multiply(rhs).expect("shape mismatch in product")
    }
}

impl Mul for Element {
    type Output = Element;
    fn mul(self, rhs: Element) -> Element {
        &self * &rhs
    }
}

impl Mul<C64> for Element {
    type Output = Element;
    fn mul(mut self, z: C64) -> Element {
        for m in &mut self.blocks {
            *m *= z;
        }
        self
    }
}

impl Mul<C64> for &Element {
    type Output = Element;
    fn mul(self, z: C64) -> Element {
        self.clone() * z
    }
}

impl Mul<f64> for &Element {
    type Output = Element;
    fn mul(self, s: f64) -> Element {
        self.clone() * re(s)
    }
}

impl Mul<f64> for Element {
    type Output = Element;
    fn mul(self, s: f64) -> Element {
        self * re(s)
    }
}

impl Neg for Element {
    type Output = Element;
    fn neg(self) -> Element {
        self * re(-1.0)
    }
}

/// The block identities: a basis of the center, one element per block.
pub fn center_basis(shape: &AlgebraShape) -> Vec<Element> {
    (0..shape.num_blocks())
        .map(|i| Element::block_identity(shape, i))
        .collect()
}

/// A small *-generating set: per block the identity, `e_00` and the
/// neighbouring matrix units `e_{k,k+1}`, `e_{k+1,k}`.
pub fn generating_set(shape: &AlgebraShape) -> Vec<Element> {
    let mut out = Vec::new();
    for j in 0..shape.num_blocks() {
        let m = shape.block(j);
        out.push(Element::block_identity(shape, j));
        out.push(Element::matrix_unit(shape, j, 0, 0));
        for k in 0..m.saturating_sub(1) {
            out.push(Element::matrix_unit(shape, j, k, k + 1));
            out.push(Element::matrix_unit(shape, j, k + 1, k));
        }
    }
    out
}

/// A linear map between multi-matrix algebras, as a dense matrix on the
/// vectorized (block-coordinate) layout.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    domain: AlgebraShape,
    codomain: AlgebraShape,
    matrix: CMat,
}

impl LinearMap {
    pub fn from_matrix(domain: AlgebraShape, codomain: AlgebraShape, matrix: CMat) -> Result<Self> {
        if matrix.nrows() != codomain.dim() || matrix.ncols() != domain.dim() {
            return Err(Error::InvalidShape(format!(
                "map matrix is {}x{}, expected {}x{}",
                matrix.nrows(),
                matrix.ncols(),
                codomain.dim(),
                domain.dim()
            )));
        }
        Ok(Self { domain, codomain, matrix })
    }

    /// Tabulates `f` on the matrix units of `domain`.
    pub fn from_fn(
        domain: &AlgebraShape,
        codomain: &AlgebraShape,
        f: impl Fn(&Element) -> Element,
    ) -> Self {
        let mut matrix = CMat::zeros(codomain.dim(), domain.dim());
        for (k, e) in Element::basis(domain).iter().enumerate() {
            let out = f(e);
            assert_eq!(out.shape(), codomain, "map output has the wrong shape");
            matrix.set_column(k, &out.vectorize());
        }
        Self {
            domain: domain.clone(),
            codomain: codomain.clone(),
            matrix,
        }
    }

    pub fn identity(shape: &AlgebraShape) -> Self {
        let d = shape.dim();
        Self {
            domain: shape.clone(),
            codomain: shape.clone(),
            matrix: CMat::identity(d, d),
        }
    }

    pub fn domain(&self) -> &AlgebraShape {
        &self.domain
    }

    pub fn codomain(&self) -> &AlgebraShape {
        &self.codomain
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn apply(&self, x: &Element) -> Element {
        assert_eq!(x.shape(), &self.domain, "map applied to element of wrong shape");
        let v = &self.matrix * x.vectorize();
        Element::devectorize(&self.codomain, &v).expect("dimensions agree")
    }

    /// Applies the map to an element supported in a single domain block,
    /// touching only the matching columns.
    pub fn apply_from_block(&self, block: usize, m: &CMat) -> Element {
        let n = self.domain.block(block);
        let off = self.domain.vec_offset(block);
        let mut v = CVec::zeros(self.codomain.dim());
        for p in 0..n {
            for q in 0..n {
                let z = m[(p, q)];
                if z != re(0.0) {
                    v.axpy(z, &self.matrix.column(off + p * n + q), re(1.0));
                }
            }
        }
        Element::devectorize(&self.codomain, &v).expect("dimensions agree")
    }

    /// Adjoint map applied to an element supported in one codomain block.
    pub fn apply_adjoint_from_block(&self, block: usize, m: &CMat) -> Element {
        let n = self.codomain.block(block);
        let off = self.codomain.vec_offset(block);
        let rows = self.matrix.rows(off, n * n);
        let mut w = CVec::zeros(n * n);
        for p in 0..n {
            for q in 0..n {
                w[p * n + q] = m[(p, q)];
            }
        }
        let v = rows.adjoint() * w;
        Element::devectorize(&self.domain, &v).expect("dimensions agree")
    }

    /// Adjoint with respect to the Hilbert-Schmidt inner products.
    pub fn adjoint(&self) -> Self {
        Self {
            domain: self.codomain.clone(),
            codomain: self.domain.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &Self) -> Self {
        assert_eq!(inner.codomain, self.domain, "composition shape mismatch");
        Self {
            domain: inner.domain.clone(),
            codomain: self.codomain.clone(),
            matrix: &self.matrix * &inner.matrix,
        }
    }

    /// `s * self + t * other`.
    pub fn combine(&self, s: f64, other: &Self, t: f64) -> Self {
        assert_eq!(self.domain, other.domain);
        assert_eq!(self.codomain, other.codomain);
        Self {
            domain: self.domain.clone(),
            codomain: self.codomain.clone(),
            matrix: &self.matrix * re(s) + &other.matrix * re(t),
        }
    }

    /// `scale * self - id`.
    pub fn scaled_minus_identity(&self, scale: f64) -> Self {
        self.combine(scale, &Self::identity(&self.domain), -1.0)
    }

    pub fn distance(&self, other: &Self) -> f64 {
        linalg::max_abs(&(&self.matrix - &other.matrix))
    }
}
