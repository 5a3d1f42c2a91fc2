//! Unital inclusions `B ⊆ A` of multi-matrix algebras.
//!
//! An inclusion is described by its inclusion matrix `Λ` (rows indexed by
//! the blocks of `A`, columns by the blocks of `B`) together with one unitary
//! per block of `A`. Block `i` of `ι(b)` is `U_i (⊕_j 1_{Λ_ij} ⊗ b_j) U_i*`,
//! where the direct sum runs over `j` outermost and copies innermost.

use crate::algebra::{center_basis, generating_set, AlgebraShape, Element};
use crate::error::{Error, Result};
use crate::linalg::{self, re, CMat};

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    sub: AlgebraShape,
    amb: AlgebraShape,
    inclusion: Vec<Vec<usize>>,
    unitaries: Vec<CMat>,
    trivial_unitaries: bool,
}

impl Embedding {
    /// Validates unitality, injectivity and unitarity of the block unitaries.
    /// `None` for `unitaries` means identity in every block.
    pub fn new(
        sub: AlgebraShape,
        amb: AlgebraShape,
        inclusion: Vec<Vec<usize>>,
        unitaries: Option<Vec<CMat>>,
    ) -> Result<Self> {
        if inclusion.len() != amb.num_blocks() {
            return Err(Error::InvalidEmbedding(format!(
                "inclusion matrix has {} rows, A has {} blocks",
                inclusion.len(),
                amb.num_blocks()
            )));
        }
        for (i, row) in inclusion.iter().enumerate() {
            if row.len() != sub.num_blocks() {
                return Err(Error::InvalidEmbedding(format!(
                    "row {i} of the inclusion matrix has {} entries, B has {} blocks",
                    row.len(),
                    sub.num_blocks()
                )));
            }
            let got: usize = row.iter().zip(sub.blocks()).map(|(l, m)| l * m).sum();
            if got != amb.block(i) {
                return Err(Error::Unitality {
                    block: i,
                    expected: amb.block(i),
                    got,
                });
            }
        }
        for j in 0..sub.num_blocks() {
            if inclusion.iter().all(|row| row[j] == 0) {
                return Err(Error::InvalidEmbedding(format!(
                    "B-block {j} is not embedded anywhere (map not injective)"
                )));
            }
        }
        let trivial_unitaries = unitaries.is_none();
        let unitaries = match unitaries {
            None => amb.blocks().iter().map(|&n| CMat::identity(n, n)).collect(),
            Some(us) => {
                if us.len() != amb.num_blocks() {
                    return Err(Error::InvalidEmbedding(format!(
                        "{} unitaries for {} blocks",
                        us.len(),
                        amb.num_blocks()
                    )));
                }
                for (i, u) in us.iter().enumerate() {
                    let n = amb.block(i);
                    if u.nrows() != n || u.ncols() != n {
                        return Err(Error::InvalidEmbedding(format!(
                            "unitary {i} is {}x{}, block has dimension {n}",
                            u.nrows(),
                            u.ncols()
                        )));
                    }
                    let defect = linalg::max_abs(&(u * u.adjoint() - CMat::identity(n, n)));
                    if defect > 1e-10 {
                        return Err(Error::InvalidEmbedding(format!(
                            "unitary {i} is not unitary (defect {defect:.3e})"
                        )));
                    }
                }
                us
            }
        };
        Ok(Self {
            sub,
            amb,
            inclusion,
            unitaries,
            trivial_unitaries,
        })
    }

    pub fn identity(shape: &AlgebraShape) -> Self {
        let k = shape.num_blocks();
        let inclusion = (0..k).map(|i| (0..k).map(|j| usize::from(i == j)).collect()).collect();
        Self::new(shape.clone(), shape.clone(), inclusion, None).expect("identity is valid")
    }

    /// `ℂ·1 ⊆ A`.
    pub fn scalars(amb: &AlgebraShape) -> Self {
        let inclusion = amb.blocks().iter().map(|&n| vec![n]).collect();
        Self::new(AlgebraShape::full(1), amb.clone(), inclusion, None).expect("scalars embed")
    }

    pub fn sub_shape(&self) -> &AlgebraShape {
        &self.sub
    }

    pub fn amb_shape(&self) -> &AlgebraShape {
        &self.amb
    }

    pub fn inclusion_matrix(&self) -> &[Vec<usize>] {
        &self.inclusion
    }

    pub fn unitaries(&self) -> &[CMat] {
        &self.unitaries
    }

    pub fn has_trivial_unitaries(&self) -> bool {
        self.trivial_unitaries
    }

    pub fn multiplicity(&self, i: usize, j: usize) -> usize {
        self.inclusion[i][j]
    }

    /// Column offset of copy `r` of B-block `j` inside A-block `i`.
    pub fn copy_offset(&self, i: usize, j: usize, r: usize) -> usize {
        let before: usize = (0..j).map(|jj| self.inclusion[i][jj] * self.sub.block(jj)).sum();
        before + r * self.sub.block(j)
    }

    fn conj_in(&self, i: usize, m: CMat) -> CMat {
        if self.trivial_unitaries {
            m
        } else {
            &self.unitaries[i] * m * self.unitaries[i].adjoint()
        }
    }

    fn conj_out(&self, i: usize, m: &CMat) -> CMat {
        if self.trivial_unitaries {
            m.clone()
        } else {
            self.unitaries[i].adjoint() * m * &self.unitaries[i]
        }
    }

    /// `ι(b)`.
    pub fn embed(&self, b: &Element) -> Result<Element> {
        if b.shape() != &self.sub {
            return Err(Error::ShapeMismatch {
                expected: self.sub.blocks().to_vec(),
                got: b.shape().blocks().to_vec(),
            });
        }
        let blocks = (0..self.amb.num_blocks())
            .map(|i| {
                let n = self.amb.block(i);
                let mut d = CMat::zeros(n, n);
                for j in 0..self.sub.num_blocks() {
                    let m = self.sub.block(j);
                    for r in 0..self.inclusion[i][j] {
                        let off = self.copy_offset(i, j, r);
                        d.view_mut((off, off), (m, m)).copy_from(b.block(j));
                    }
                }
                self.conj_in(i, d)
            })
            .collect();
        Element::from_blocks(self.amb.clone(), blocks)
    }

    /// Reads off `b` from an element assumed to lie in `ι(B)`; no check.
    pub fn pullback_unchecked(&self, a: &Element) -> Element {
        let blocks = (0..self.sub.num_blocks())
            .map(|j| {
                let i = (0..self.amb.num_blocks())
                    .find(|&i| self.inclusion[i][j] > 0)
                    .expect("injective embedding");
                let y = self.conj_out(i, a.block(i));
                let off = self.copy_offset(i, j, 0);
                let m = self.sub.block(j);
                y.view((off, off), (m, m)).into_owned()
            })
            .collect();
        Element::from_blocks(self.sub.clone(), blocks).expect("shape by construction")
    }

    /// `ι⁻¹(a)` if `a ∈ ι(B)` within `tol` (scaled by `‖a‖`).
    pub fn pullback(&self, a: &Element, tol: f64) -> Option<Element> {
        if a.shape() != &self.amb {
            return None;
        }
        let b = self.pullback_unchecked(a);
        let back = self.embed(&b).ok()?;
        (back.distance(a) <= tol * a.max_abs().max(1.0)).then_some(b)
    }

    /// The matrix units of every B-block pushed through `ι`.
    pub fn generators(&self) -> Vec<Element> {
        Element::basis(&self.sub)
            .iter()
            .map(|e| self.embed(e).expect("shape by construction"))
            .collect()
    }

    /// `ι` applied to a small *-generating set of `B`.
    pub fn generating_set(&self) -> Vec<Element> {
        generating_set(&self.sub)
            .iter()
            .map(|e| self.embed(e).expect("shape by construction"))
            .collect()
    }

    /// Largest violation of the *-homomorphism identities on matrix units.
    pub fn homomorphism_defect(&self) -> f64 {
        let basis = Element::basis(&self.sub);
        let images: Vec<Element> = basis.iter().map(|b| self.embed(b).unwrap()).collect();
        let mut worst = self
            .embed(&Element::identity(&self.sub))
            .unwrap()
            .distance(&Element::identity(&self.amb));
        for (x, ix) in basis.iter().zip(&images) {
            worst = worst.max(self.embed(&x.adjoint()).unwrap().distance(&ix.adjoint()));
            for (y, iy) in basis.iter().zip(&images) {
                let lhs = self.embed(&(x * y)).unwrap();
                worst = worst.max(lhs.distance(&(ix * iy)));
            }
        }
        worst
    }

    /// Coordinates of `A` as a right `B`-module.
    pub fn module_layout(&self) -> ModuleLayout {
        ModuleLayout::new(self)
    }

    /// `Λᵀ n`: block sizes of the commutant of right multiplication by `B`.
    pub fn dual_dims(&self) -> Vec<usize> {
        (0..self.sub.num_blocks())
            .map(|j| {
                (0..self.amb.num_blocks())
                    .map(|i| self.inclusion[i][j] * self.amb.block(i))
                    .sum()
            })
            .collect()
    }
}

/// A list of linearly independent elements spanning a subspace of `A`.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    pub ambient: AlgebraShape,
    pub vectors: Vec<Element>,
    pub dim: usize,
}

impl SubspaceBasis {
    /// Smallest eigenvalue of the Hilbert-Schmidt Gram matrix after
    /// normalizing each vector.
    pub fn gram_min_eigenvalue(&self) -> f64 {
        let k = self.vectors.len();
        if k == 0 {
            return 0.0;
        }
        let normed: Vec<Element> = self
            .vectors
            .iter()
            .map(|v| v * (1.0 / v.frobenius_norm()))
            .collect();
        let g = CMat::from_fn(k, k, |r, c| normed[r].hs_inner(&normed[c]));
        linalg::min_eigenvalue(&g)
    }

    /// Distance from `x` to the span, in Frobenius norm.
    pub fn residual(&self, x: &Element) -> f64 {
        let k = self.vectors.len();
        if k == 0 {
            return x.frobenius_norm();
        }
        let g = CMat::from_fn(k, k, |r, c| self.vectors[r].hs_inner(&self.vectors[c]));
        let rhs = nalgebra::DVector::from_fn(k, |r, _| self.vectors[r].hs_inner(x));
        let coeff = linalg::psd_pinv(&g, 1e-12) * rhs;
        let mut proj = Element::zeros(&self.ambient);
        for (v, z) in self.vectors.iter().zip(coeff.iter()) {
            proj = proj + v * *z;
        }
        (x - &proj).frobenius_norm()
    }

    pub fn contains(&self, x: &Element, tol: f64) -> bool {
        self.residual(x) <= tol * x.frobenius_norm().max(1.0)
    }
}

/// `B' ∩ A`, computed block by block as the null space of the stacked
/// commutator operators `x ↦ [x, ι(g)]` over a *-generating set of `B`.
pub fn relative_commutant(e: &Embedding, rank_cutoff: f64) -> SubspaceBasis {
    let amb = e.amb_shape();
    let gens = e.generating_set();
    let mut vectors = Vec::new();
    for i in 0..amb.num_blocks() {
        let n = amb.block(i);
        let nn = n * n;
        let mut stacked = CMat::zeros(gens.len() * nn, nn);
        for (gi, g) in gens.iter().enumerate() {
            let gb = g.block(i);
            // column k is vec([e_k, g]) in row-major order
            for k in 0..nn {
                let (r, c) = (k / n, k % n);
                for p in 0..n {
                    for q in 0..n {
                        let mut v = re(0.0);
                        if p == r {
                            v += gb[(c, q)];
                        }
                        if q == c {
                            v -= gb[(p, r)];
                        }
                        stacked[(gi * nn + p * n + q, k)] = v;
                    }
                }
            }
        }
        // ‖[x, g]‖ ≤ 2‖g‖‖x‖, so the cutoff is relative to that bound and
        // not to the largest singular value, which may itself be rounding
        let scale = gens.iter().map(|g| linalg::spectral_norm(g.block(i))).fold(0.0, f64::max);
        let ns = linalg::null_space_below(&stacked, rank_cutoff * 2.0 * scale);
        for col in 0..ns.ncols() {
            let mut x = Element::zeros(amb);
            let blk = x.block_mut(i);
            for k in 0..nn {
                blk[(k / n, k % n)] = ns[(k, col)];
            }
            vectors.push(x);
        }
    }
    let dim = vectors.len();
    SubspaceBasis {
        ambient: amb.clone(),
        vectors,
        dim,
    }
}

/// `Z(ι(B))` as a subspace of `A`: the embedded block identities of `B`.
pub fn embedded_center(e: &Embedding) -> Vec<Element> {
    center_basis(e.sub_shape())
        .iter()
        .map(|z| e.embed(z).expect("shape by construction"))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrthogonalFamily {
    /// Largest number of pairwise orthogonal non-zero projections of `A`
    /// summing to `p`.
    pub family_size: usize,
    /// `dim(pAp)`.
    pub corner_dim: usize,
}

/// Checks that `p` is a minimal projection of `ι(B)` and counts how far it
/// splits inside `A`.
pub fn max_orthogonal_family(e: &Embedding, p: &Element, tol: f64) -> Result<OrthogonalFamily> {
    if p.shape() != e.amb_shape() {
        return Err(Error::ShapeMismatch {
            expected: e.amb_shape().blocks().to_vec(),
            got: p.shape().blocks().to_vec(),
        });
    }
    if !p.is_projection(tol) {
        return Err(Error::NotMinimalProjection("not a projection".into()));
    }
    let b = e
        .pullback(p, tol)
        .ok_or_else(|| Error::NotMinimalProjection("not in the image of B".into()))?;
    let b_rank = b.rank(1e-8);
    if b_rank != 1 {
        return Err(Error::NotMinimalProjection(format!(
            "rank {b_rank} in B, minimal projections have rank 1"
        )));
    }
    let ranks: Vec<usize> = p
        .blocks()
        .iter()
        .map(|m| linalg::numerical_rank(m, 1e-8))
        .collect();
    Ok(OrthogonalFamily {
        family_size: ranks.iter().sum(),
        corner_dim: ranks.iter().map(|r| r * r).sum(),
    })
}

/// Coordinates identifying `A`, as a right `B`-module, with
/// `⊕_j ℂ^{d_j} ⊗ (row vectors of length m_j)`.
///
/// For B-block `j`, the `d_j × m_j` matrix `Z_j(x)` stacks the column strips
/// of `x_i U_i` that carry a copy of `j`, ordered by A-block and then copy.
/// Right multiplication by `ι(b)` becomes `Z_j ↦ Z_j b_j`, so the commutant
/// of the right action is `⊕_j M_{d_j}` acting by left multiplication.
#[derive(Debug, Clone)]
pub struct ModuleLayout {
    embedding: Embedding,
    dims: Vec<usize>,
    /// Per B-block: `(A-block, column offset, row offset in Z_j)`.
    strips: Vec<Vec<(usize, usize, usize)>>,
}

impl ModuleLayout {
    fn new(e: &Embedding) -> Self {
        let sub = e.sub_shape();
        let amb = e.amb_shape();
        let mut strips = vec![Vec::new(); sub.num_blocks()];
        let mut dims = vec![0; sub.num_blocks()];
        for (j, strip) in strips.iter_mut().enumerate() {
            for i in 0..amb.num_blocks() {
                for r in 0..e.multiplicity(i, j) {
                    strip.push((i, e.copy_offset(i, j, r), dims[j]));
                    dims[j] += amb.block(i);
                }
            }
        }
        Self {
            embedding: e.clone(),
            dims,
            strips,
        }
    }

    pub fn embedding(&self) -> &Embedding {
        &self.embedding
    }

    /// `d_j` for every B-block.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// `(A-block, row offset in Z_j)` for every strip of B-block `j`.
    pub fn strips(&self, j: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.strips[j].iter().map(|&(i, _, row)| (i, row))
    }

    pub fn to_coords(&self, x: &Element) -> Vec<CMat> {
        let e = &self.embedding;
        let y: Vec<CMat> = (0..e.amb_shape().num_blocks())
            .map(|i| {
                if e.has_trivial_unitaries() {
                    x.block(i).clone()
                } else {
                    x.block(i) * &e.unitaries()[i]
                }
            })
            .collect();
        (0..e.sub_shape().num_blocks())
            .map(|j| {
                let m = e.sub_shape().block(j);
                let mut z = CMat::zeros(self.dims[j], m);
                for &(i, col, row) in &self.strips[j] {
                    let n = e.amb_shape().block(i);
                    z.view_mut((row, 0), (n, m)).copy_from(&y[i].view((0, col), (n, m)));
                }
                z
            })
            .collect()
    }

    pub fn from_coords(&self, z: &[CMat]) -> Element {
        let e = &self.embedding;
        let amb = e.amb_shape();
        let mut y: Vec<CMat> = amb.blocks().iter().map(|&n| CMat::zeros(n, n)).collect();
        for (j, zj) in z.iter().enumerate() {
            let m = e.sub_shape().block(j);
            for &(i, col, row) in &self.strips[j] {
                let n = amb.block(i);
                y[i].view_mut((0, col), (n, m)).copy_from(&zj.view((row, 0), (n, m)));
            }
        }
        let blocks = y
            .into_iter()
            .enumerate()
            .map(|(i, yi)| {
                if e.has_trivial_unitaries() {
                    yi
                } else {
                    yi * e.unitaries()[i].adjoint()
                }
            })
            .collect();
        Element::from_blocks(amb.clone(), blocks).expect("shape by construction")
    }

    /// The element whose coordinates are `v e_0ᵀ` in block `j`, zero elsewhere.
    pub fn column_element(&self, j: usize, v: &nalgebra::DVector<crate::linalg::C64>) -> Element {
        let sub = self.embedding.sub_shape();
        let z: Vec<CMat> = (0..sub.num_blocks())
            .map(|jj| {
                let mut m = CMat::zeros(self.dims[jj], sub.block(jj));
                if jj == j {
                    m.set_column(0, v);
                }
                m
            })
            .collect();
        self.from_coords(&z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CVec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag_c2_in_m2() -> Embedding {
        Embedding::new(
            AlgebraShape::diagonal(2),
            AlgebraShape::full(2),
            vec![vec![1, 1]],
            None,
        )
        .unwrap()
    }

    fn random_embedding(seed: u64) -> Embedding {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sub = AlgebraShape::new(vec![2, 1]).unwrap();
        let amb = AlgebraShape::new(vec![5, 3]).unwrap();
        let us = vec![linalg::haar_unitary(5, &mut rng), linalg::haar_unitary(3, &mut rng)];
        Embedding::new(sub, amb, vec![vec![2, 1], vec![1, 1]], Some(us)).unwrap()
    }

    #[test]
    fn scalar_embedding_gives_multiples_of_identity() {
        let e = Embedding::scalars(&AlgebraShape::full(2));
        let mu = Element::scalar(&AlgebraShape::full(1), crate::linalg::c(0.3, -1.0));
        let img = e.embed(&mu).unwrap();
        assert_eq!(img, Element::scalar(&AlgebraShape::full(2), crate::linalg::c(0.3, -1.0)));
    }

    #[test]
    fn identity_and_diagonal_embeddings() {
        let s = AlgebraShape::new(vec![2, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = Element::random(&s, &mut rng);
        assert_eq!(Embedding::identity(&s).embed(&b).unwrap(), b);

        let e = diag_c2_in_m2();
        let mut b = Element::zeros(e.sub_shape());
        b.block_mut(0)[(0, 0)] = re(2.0);
        b.block_mut(1)[(0, 0)] = re(-5.0);
        let img = e.embed(&b).unwrap();
        assert_eq!(img.block(0)[(0, 0)], re(2.0));
        assert_eq!(img.block(0)[(1, 1)], re(-5.0));
        assert_eq!(img.block(0)[(0, 1)], re(0.0));
    }

    #[test]
    fn unitality_error_names_block() {
        let err = Embedding::new(
            AlgebraShape::full(1),
            AlgebraShape::new(vec![2, 3]).unwrap(),
            vec![vec![2], vec![2]],
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Unitality { block: 1, expected: 3, got: 2 }));
    }

    #[test]
    fn embedding_is_a_star_homomorphism() {
        let e = random_embedding(4);
        assert!(e.homomorphism_defect() < 1e-10);
    }

    #[test]
    fn relative_commutant_examples() {
        let scal = Embedding::scalars(&AlgebraShape::full(2));
        assert_eq!(relative_commutant(&scal, 1e-8).dim, 4);

        let id = Embedding::identity(&AlgebraShape::full(2));
        assert_eq!(relative_commutant(&id, 1e-8).dim, 1);

        // hand solution: [x, diag(1,0)] = 0 forces x off-diagonal entries to vanish
        let rc = relative_commutant(&diag_c2_in_m2(), 1e-8);
        assert_eq!(rc.dim, 2);
        for v in &rc.vectors {
            assert!(v.block(0)[(0, 1)].norm() < 1e-12 && v.block(0)[(1, 0)].norm() < 1e-12);
        }
    }

    #[test]
    fn relative_commutant_contains_both_centers() {
        let e = random_embedding(8);
        let rc = relative_commutant(&e, 1e-8);
        // Σ_j Λ_ij² per A-block
        assert_eq!(rc.dim, 4 + 1 + 1 + 1);
        assert!(rc.gram_min_eigenvalue() > 1e-9);
        for z in embedded_center(&e).iter().chain(center_basis(e.amb_shape()).iter()) {
            assert!(rc.contains(z, 1e-9));
        }
        assert!(embedded_center(&e).len() <= rc.dim);
    }

    #[test]
    fn commutant_of_rotated_scalars_is_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let amb = AlgebraShape::full(2);
        let u = linalg::haar_unitary(2, &mut rng);
        let e = Embedding::new(AlgebraShape::full(1), amb, vec![vec![2]], Some(vec![u])).unwrap();
        assert_eq!(relative_commutant(&e, 1e-8).dim, 4);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        #[test]
        fn commutant_dimension_is_sum_of_squared_multiplicities(
            seed in 0u64..1000,
            m in proptest::collection::vec(1usize..3, 1..3),
            rows in proptest::collection::vec(proptest::collection::vec(0usize..3, 2), 1..3),
        ) {
            let inclusion: Vec<Vec<usize>> = rows.iter().map(|r| r[..m.len()].to_vec()).collect();
            let amb: Vec<usize> = inclusion.iter().map(|r| r.iter().zip(&m).map(|(l, d)| l * d).sum()).collect();
            proptest::prop_assume!(amb.iter().all(|&n| n > 0));
            proptest::prop_assume!((0..m.len()).all(|j| inclusion.iter().any(|r| r[j] > 0)));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let us = amb.iter().map(|&n| linalg::haar_unitary(n, &mut rng)).collect();
            let e = Embedding::new(
                AlgebraShape::new(m).unwrap(),
                AlgebraShape::new(amb).unwrap(),
                inclusion.clone(),
                Some(us),
            )
            .unwrap();
            let expected: usize = inclusion.iter().flatten().map(|l| l * l).sum();
            proptest::prop_assert_eq!(relative_commutant(&e, 1e-8).dim, expected);
        }
    }

    #[test]
    fn identity_commutant_is_center() {
        let s = AlgebraShape::new(vec![3, 1, 2]).unwrap();
        let rc = relative_commutant(&Embedding::identity(&s), 1e-8);
        assert_eq!(rc.dim, 3);
        for z in center_basis(&s) {
            assert!(rc.contains(&z, 1e-9));
        }
    }

    #[test]
    fn embedding_inflates_spectra() {
        let e = random_embedding(12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = Element::random_self_adjoint(e.sub_shape(), &mut rng);
        let sb: Vec<f64> = b.spectrum(1e-9).unwrap().iter().map(|v| v.value).collect();
        let mut expected = Vec::new();
        for j in 0..2 {
            let mult: usize = (0..2).map(|i| e.multiplicity(i, j)).sum();
            let vals = linalg::herm_eigenvalues(b.block(j));
            for _ in 0..mult {
                expected.extend(vals.iter().copied());
            }
        }
        expected.sort_by(f64::total_cmp);
        let got: Vec<f64> = e.embed(&b).unwrap().spectrum(1e-9).unwrap().iter().map(|v| v.value).collect();
        assert_eq!(got.len(), expected.len());
        for (g, x) in got.iter().zip(&expected) {
            assert!((g - x).abs() < 1e-10);
        }
        assert!(!sb.is_empty());
    }

    #[test]
    fn orthogonal_family_examples() {
        let scal2 = Embedding::scalars(&AlgebraShape::full(2));
        let one = Element::identity(&AlgebraShape::full(2));
        let f = max_orthogonal_family(&scal2, &one, 1e-9).unwrap();
        assert_eq!((f.family_size, f.corner_dim), (2, 4));

        let scal3 = Embedding::scalars(&AlgebraShape::full(3));
        let f = max_orthogonal_family(&scal3, &Element::identity(&AlgebraShape::full(3)), 1e-9).unwrap();
        assert_eq!((f.family_size, f.corner_dim), (3, 9));

        let s = AlgebraShape::full(2);
        let id = Embedding::identity(&s);
        let p = Element::matrix_unit(&s, 0, 0, 0);
        let f = max_orthogonal_family(&id, &p, 1e-9).unwrap();
        assert_eq!((f.family_size, f.corner_dim), (1, 1));
    }

    #[test]
    fn orthogonal_family_rejects_non_minimal() {
        let s = AlgebraShape::full(2);
        let id = Embedding::identity(&s);
        assert!(max_orthogonal_family(&id, &Element::identity(&s), 1e-9).is_err());
        let e12 = Element::matrix_unit(&s, 0, 0, 1);
        assert!(max_orthogonal_family(&id, &e12, 1e-9).is_err());
        // a projection of A outside ι(B)
        let scal = Embedding::scalars(&s);
        let p = Element::matrix_unit(&s, 0, 0, 0);
        assert!(max_orthogonal_family(&scal, &p, 1e-9).is_err());
    }

    #[test]
    fn module_layout_round_trip_and_right_action() {
        let e = random_embedding(21);
        let layout = e.module_layout();
        assert_eq!(layout.dims(), e.dual_dims().as_slice());
        assert_eq!(layout.dims(), &[13, 8]);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = Element::random(e.amb_shape(), &mut rng);
        let z = layout.to_coords(&x);
        assert!(layout.from_coords(&z).distance(&x) < 1e-12);

        let b = Element::random(e.sub_shape(), &mut rng);
        let xb = &x * &e.embed(&b).unwrap();
        let zb = layout.to_coords(&xb);
        for j in 0..2 {
            assert!(linalg::max_abs(&(&zb[j] - &z[j] * b.block(j))) < 1e-10);
        }
        let v = CVec::from_element(13, re(1.0));
        let back = layout.to_coords(&layout.column_element(0, &v));
        assert!((back[0].column(0) - &v).norm() < 1e-12);
        assert!(linalg::max_abs(&back[1]) < 1e-12);
    }
}
