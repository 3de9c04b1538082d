//! Tensor products, partial traces and matrix decompositions.
//!
//! Eigen- and singular-value decompositions are delegated to `nalgebra`; this
//! module fixes the ordering and phase conventions on top of them so that
//! every result is deterministic.

use nalgebra::linalg::{SymmetricEigen, SVD};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{dim_mismatch, Error, Result};
use crate::matrix::{c, CMatrix, MAX_DIM, ZERO};

/// Input to [`eigh`] must be Hermitian to this (absolute, scaled by the
/// largest entry when that exceeds one) tolerance.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalues down to `-PSD_CLAMP` are round-off and clamp to zero.
pub const PSD_CLAMP: f64 = 1e-10;
/// Eigenvalues below `-PSD_REJECT` mean the argument is not PSD.
pub const PSD_REJECT: f64 = 1e-6;

const SVD_MAX_ITERS: usize = 10_000;

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let rows = a.rows() * b.rows();
    let cols = a.cols() * b.cols();
    if rows > MAX_DIM || cols > MAX_DIM {
        return Err(Error::DimensionTooLarge(rows.max(cols)));
    }
    Ok(kron_unchecked(a, b))
}

/// Kronecker product of several factors, left to right.
pub fn kron_all(factors: &[&CMatrix]) -> Result<CMatrix> {
    let (first, rest) = factors
        .split_first()
        .expect("kron_all needs at least one factor");
    rest.iter()
        .try_fold((*first).clone(), |acc, f| kron(&acc, f))
}

pub(crate) fn kron_unchecked(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (br, bc) = b.shape();
    CMatrix::from_fn(a.rows() * br, a.cols() * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

/// Offsets into a row-major multi-index for every assignment of the listed
/// factors, enumerated with the first listed factor most significant.
fn factor_offsets(dims: &[usize], strides: &[usize], factors: &[usize]) -> Vec<usize> {
    let mut offsets = vec![0usize];
    for &f in factors {
        let mut next = Vec::with_capacity(offsets.len() * dims[f]);
        for &o in &offsets {
            for x in 0..dims[f] {
                next.push(o + x * strides[f]);
            }
        }
        offsets = next;
    }
    offsets
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// Partial trace of `a` over every factor not listed in `keep`.
///
/// `factor_dims` lists subsystem dimensions with the first factor most
/// significant. The kept factors appear in ascending index order in the
/// result. An empty `keep` returns the full trace as a `1 × 1` matrix.
pub fn partial_trace(a: &CMatrix, factor_dims: &[usize], keep: &[usize]) -> Result<CMatrix> {
    let n = a.ensure_square()?;
    let total: usize = factor_dims.iter().product();
    if total != n || factor_dims.contains(&0) {
        return Err(Error::InvalidPartialTrace(format!(
            "factor dims {factor_dims:?} do not multiply to side length {n}"
        )));
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if let Some(&bad) = kept.iter().find(|&&k| k >= factor_dims.len()) {
        return Err(Error::InvalidPartialTrace(format!(
            "factor index {bad} out of range for {} factors",
            factor_dims.len()
        )));
    }
    let traced: Vec<usize> = (0..factor_dims.len())
        .filter(|i| !kept.contains(i))
        .collect();
    let st = strides(factor_dims);
    let keep_off = factor_offsets(factor_dims, &st, &kept);
    let trace_off = factor_offsets(factor_dims, &st, &traced);

    let dk = keep_off.len();
    let mut out = CMatrix::zeros(dk, dk);
    for (i, &oi) in keep_off.iter().enumerate() {
        for (j, &oj) in keep_off.iter().enumerate() {
            out[(i, j)] = trace_off.iter().map(|&t| a[(oi + t, oj + t)]).sum();
        }
    }
    Ok(out)
}

/// Hermitian eigendecomposition with ascending eigenvalues.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the order of `values`.
    pub vectors: CMatrix,
}

impl Eigh {
    /// `W·diag(f(λ))·W†`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let w = &self.vectors;
        let fv: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let mut out = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = ZERO;
                for k in 0..n {
                    if fv[k] != 0.0 {
                        acc += w[(i, k)] * fv[k] * w[(j, k)].conj();
                    }
                }
                out[(i, j)] = acc;
            }
        }
        out
    }
}

fn check_hermitian(a: &CMatrix) -> Result<()> {
    a.ensure_square()?;
    let scale = a.max_abs().max(1.0);
    let defect = a.hermitian_defect();
    if defect > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian(defect));
    }
    Ok(())
}

/// Multiplies each column by a phase so that its largest-modulus entry
/// (lowest index among near-ties) is real and positive.
fn normalize_column_phases(v: &mut CMatrix) {
    for j in 0..v.cols() {
        let max = (0..v.rows()).map(|i| v[(i, j)].norm()).fold(0.0, f64::max);
        if max == 0.0 {
            continue;
        }
        let pivot = (0..v.rows())
            .find(|&i| v[(i, j)].norm() >= max * (1.0 - 1e-9))
            .unwrap();
        let z = v[(pivot, j)];
        let phase = z.conj() / z.norm();
        for i in 0..v.rows() {
            v[(i, j)] *= phase;
        }
    }
}

/// Eigendecomposition of a Hermitian matrix; eigenvalues ascending.
pub fn eigh(a: &CMatrix) -> Result<Eigh> {
    check_hermitian(a)?;
    let h = a.hermitian_part();
    let eig =
        SymmetricEigen::try_new(h.to_nalgebra(), f64::EPSILON, 0).ok_or(Error::NoConvergence {
            what: "Hermitian eigen",
        })?;
    let n = h.rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    normalize_column_phases(&mut vectors);
    Ok(Eigh { values, vectors })
}

/// Eigenvalues only, ascending.
pub fn eigvalsh(a: &CMatrix) -> Result<Vec<f64>> {
    check_hermitian(a)?;
    let h = a.hermitian_part().to_nalgebra();
    let mut vals: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

fn check_psd_spectrum(values: &[f64]) -> Result<()> {
    match values.first() {
        Some(&min) if min < -PSD_REJECT => Err(Error::NotPsd(min)),
        _ => Ok(()),
    }
}

/// Principal square root of a PSD matrix.
pub fn psd_sqrt(a: &CMatrix) -> Result<CMatrix> {
    let e = eigh(a)?;
    check_psd_spectrum(&e.values)?;
    Ok(e.reconstruct_with(|l| l.max(0.0).sqrt()))
}

/// Pseudo-inverse square root: eigenvalues above `eps` are inverted, the rest
/// map to zero.
pub fn psd_inv_sqrt(a: &CMatrix, eps: f64) -> Result<CMatrix> {
    let e = eigh(a)?;
    check_psd_spectrum(&e.values)?;
    Ok(e.reconstruct_with(|l| if l > eps { 1.0 / l.sqrt() } else { 0.0 }))
}

/// `Tr √a` for PSD `a`.
pub fn trace_sqrt(a: &CMatrix) -> Result<f64> {
    let vals = eigvalsh(a)?;
    check_psd_spectrum(&vals)?;
    Ok(vals.iter().map(|&l| l.max(0.0).sqrt()).sum())
}

/// Thin singular value decomposition `a = U·diag(s)·V†`.
#[derive(Clone, Debug)]
pub struct Svd {
    /// `rows × r` with orthonormal columns, `r = min(rows, cols)`.
    pub u: CMatrix,
    /// Non-increasing.
    pub s: Vec<f64>,
    /// `cols × r` with orthonormal columns.
    pub v: CMatrix,
}

/// SVD with singular values sorted in non-increasing order.
pub fn svd_descending(a: &CMatrix) -> Result<Svd> {
    let svd = SVD::try_new_unordered(a.to_nalgebra(), true, true, f64::EPSILON, SVD_MAX_ITERS)
        .ok_or(Error::NoConvergence {
            what: "singular value",
        })?;
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let r = svd.singular_values.len();
    let mut order: Vec<usize> = (0..r).collect();
    // Stable sort keeps the decomposition's own order among equal values.
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    let s = order.iter().map(|&k| svd.singular_values[k]).collect();
    let u = CMatrix::from_fn(a.rows(), r, |i, j| u[(i, order[j])]);
    let v = CMatrix::from_fn(a.cols(), r, |i, j| v_t[(order[j], i)].conj());
    Ok(Svd { u, s, v })
}

/// Unitary factor of the polar decomposition, `U·V†` from the SVD.
///
/// For singular input the right null space is mapped onto the left null
/// space by the unitary factor of their overlap `U₀†V₀`. When the two null
/// spaces coincide this is the identity on them, so `diag(3, 0) ↦ I`.
pub fn polar_unitary(a: &CMatrix) -> Result<CMatrix> {
    let n = a.ensure_square()?;
    let svd = svd_descending(a)?;
    let cutoff = svd.s.first().copied().unwrap_or(0.0) * n as f64 * 1e-13;
    let rank = svd.s.iter().take_while(|&&s| s > cutoff).count();
    let range = svd
        .u
        .block(0, 0, n, rank)
        .matmul(&svd.v.block(0, 0, n, rank).adjoint());
    if rank == n {
        return Ok(range);
    }
    let u0 = svd.u.block(0, rank, n, n - rank);
    let v0 = svd.v.block(0, rank, n, n - rank);
    let overlap = svd_descending(&u0.adjoint().matmul(&v0))?;
    let pairing = overlap.u.matmul(&overlap.v.adjoint());
    Ok(&range + &u0.matmul(&pairing).matmul(&v0.adjoint()))
}

/// Haar-distributed unitary: the QR factor `Q` of a complex Gaussian matrix,
/// with the phases of `R`'s diagonal moved into `Q`.
pub fn haar_random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    assert!(n >= 1, "unitary dimension must be positive");
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let z = CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re * scale, im * scale)
    });
    let qr = z.to_nalgebra().qr();
    let q = qr.q();
    let r = qr.r();
    CMatrix::from_fn(n, n, |i, j| {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        q[(i, j)] * phase
    })
}

/// Checks `a` is `rows × cols`.
pub(crate) fn expect_shape(
    a: &CMatrix,
    rows: usize,
    cols: usize,
    context: &'static str,
) -> Result<()> {
    if a.shape() != (rows, cols) {
        return Err(dim_mismatch(
            context,
            format!("{rows}x{cols}"),
            format!("{}x{}", a.rows(), a.cols()),
        ));
    }
    Ok(())
}
