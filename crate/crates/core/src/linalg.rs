//! Dense complex linear algebra helpers shared by every module.
//!
//! Everything here works on `nalgebra` dynamic matrices of `Complex<f64>`.
//! Hermitian inputs are symmetrized before decomposition so that rounding
//! noise in the strictly-lower triangle cannot leak into the spectrum.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    Complex::new(x, 0.0)
}

/// `(m + m*) / 2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * re(0.5)
}

/// Largest entrywise deviation from self-adjointness.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    (m - m.adjoint()).iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
///
/// Columns of the returned matrix are the matching orthonormal eigenvectors.
pub fn herm_eig(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMat::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
    (values, vectors)
}

pub fn herm_eigenvalues(m: &CMat) -> Vec<f64> {
    herm_eig(m).0
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    herm_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// Minimal eigenpair of a Hermitian matrix.
pub fn min_eigenpair(m: &CMat) -> (f64, CVec) {
    let (vals, vecs) = herm_eig(m);
    (vals[0], vecs.column(0).into_owned())
}

/// Builds `V f(D) V*` from a Hermitian eigen-decomposition.
pub fn spectral_apply(vals: &[f64], vecs: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let n = vals.len();
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        let s = re(f(v));
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    &scaled * vecs.adjoint()
}

/// Square root of a positive semidefinite matrix (negative noise clipped).
pub fn psd_sqrt(m: &CMat) -> CMat {
    let (vals, vecs) = herm_eig(m);
    spectral_apply(&vals, &vecs, |v| v.max(0.0).sqrt())
}

/// Support cutoff for a PSD spectrum: `rel * max(|λ|)`.
fn support_threshold(vals: &[f64], rel: f64) -> f64 {
    let top = vals.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    rel * top
}

/// Pseudo-inverse square root of a PSD matrix and the rank of its support.
pub fn psd_pinv_sqrt(m: &CMat, rel_cutoff: f64) -> (CMat, usize) {
    let (vals, vecs) = herm_eig(m);
    let thr = support_threshold(&vals, rel_cutoff);
    let rank = vals.iter().filter(|&&v| v > thr).count();
    let out = spectral_apply(&vals, &vecs, |v| if v > thr { 1.0 / v.sqrt() } else { 0.0 });
    (out, rank)
}

/// Moore-Penrose pseudo-inverse of a PSD matrix.
pub fn psd_pinv(m: &CMat, rel_cutoff: f64) -> CMat {
    let (vals, vecs) = herm_eig(m);
    let thr = support_threshold(&vals, rel_cutoff);
    spectral_apply(&vals, &vecs, |v| if v > thr { 1.0 / v } else { 0.0 })
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Rank with a singular-value cutoff relative to the largest singular value.
pub fn numerical_rank(m: &CMat, rel_cutoff: f64) -> usize {
    let sv = singular_values(m);
    match sv.first() {
        Some(&top) if top > 0.0 => sv.iter().filter(|&&s| s > rel_cutoff * top).count(),
        _ => 0,
    }
}

/// Orthonormal basis (as columns) of the null space of `m`.
///
/// The cutoff is relative to the largest singular value; an all-zero matrix
/// has the whole domain as null space.
pub fn null_space(m: &CMat, rel_cutoff: f64) -> CMat {
    let top = singular_values(m).first().copied().unwrap_or(0.0);
    null_space_below(m, rel_cutoff * top)
}

/// Right singular vectors whose singular value is at most `threshold`.
pub fn null_space_below(m: &CMat, threshold: f64) -> CMat {
    let cols = m.ncols();
    if cols == 0 {
        return CMat::zeros(0, 0);
    }
    // pad to at least square so the SVD carries a full right basis
    let padded = if m.nrows() < cols {
        let mut p = CMat::zeros(cols, cols);
        p.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let keep: Vec<usize> = (0..cols)
        .filter(|&k| svd.singular_values[k] <= threshold)
        .collect();
    let mut basis = CMat::zeros(cols, keep.len());
    for (out, &k) in keep.iter().enumerate() {
        for r in 0..cols {
            basis[(r, out)] = v_t[(k, r)].conj();
        }
    }
    basis
}

/// Largest generalized eigenvalue of the pencil `(num, den)` restricted to
/// the support of `den`, i.e. the least `t` with `t*den - num ⪰ 0`.
///
/// Returns `None` when `num` has weight outside `supp(den)` above
/// `range_tol * ‖num‖`; that is the "no finite t exists" outcome.
pub fn pencil_max(
    num: &CMat,
    den: &CMat,
    support_cutoff: f64,
    range_tol: f64,
) -> Option<PencilMax> {
    let (vals, vecs) = herm_eig(den);
    let thr = support_threshold(&vals, support_cutoff);
    let supp: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] > thr).collect();
    let n = num.nrows();
    let num_scale = num.iter().fold(0.0_f64, |a, z| a.max(z.norm())).max(1e-300);

    // component of num outside supp(den): (1-P) num (1-P)
    let mut proj = CMat::zeros(n, n);
    for &k in &supp {
        let v = vecs.column(k);
        proj += v * v.adjoint();
    }
    let comp = CMat::identity(n, n) - &proj;
    let outside = &comp * num * &comp;
    let outside_norm = outside.iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    if outside_norm > range_tol * num_scale {
        return None;
    }
    let cross = &comp * num * &proj;
    let cross_norm = cross.iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    if cross_norm > range_tol.sqrt() * num_scale {
        return None;
    }

    let inv_sqrt = spectral_apply(&vals, &vecs, |v| if v > thr { 1.0 / v.sqrt() } else { 0.0 });
    let reduced = &inv_sqrt * num * &inv_sqrt;
    let (rvals, rvecs) = herm_eig(&reduced);
    let top = *rvals.last().unwrap_or(&0.0);
    let w = rvecs.column(rvals.len().saturating_sub(1)).into_owned();
    let mut vector = &inv_sqrt * w;
    let nrm = vector.norm();
    if nrm > 0.0 {
        vector /= re(nrm);
    }
    Some(PencilMax {
        value: top.max(0.0),
        vector,
        support_rank: supp.len(),
    })
}

#[derive(Debug, Clone)]
pub struct PencilMax {
    pub value: f64,
    pub vector: CVec,
    pub support_rank: usize,
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        c(a, b) * std::f64::consts::FRAC_1_SQRT_2
    })
}

pub fn gaussian_unit_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVec {
    let m = gaussian_matrix(n, 1, rng);
    let v = m.column(0).into_owned();
    let nrm = v.norm();
    v / re(nrm)
}

/// Haar-distributed unitary from the QR factorization of a complex
/// Ginibre matrix, with the phases of `diag(R)` divided out.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let g = gaussian_matrix(n, n, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / re(d.norm()) } else { re(1.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |a, z| a.max(z.norm()))
}

pub fn spectral_norm(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}
