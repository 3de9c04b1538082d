//! Independent checks: finite-difference matrix derivatives, brute-force
//! Γ search and random-search lower bounds on the achievable fidelity.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channels::KrausChannel;
use crate::error::{Error, Result};
use crate::linalg::{haar_random_unitary, kron, kron_unchecked, partial_trace, trace_sqrt};
use crate::matrix::{c, CMatrix};
use crate::optimizer::{fidelity_data, GammaMatrix, GammaObjective, Problem};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Relative error below which an identity counts as verified.
pub const GRAD_TOL: f64 = 1e-5;

/// The trace identities checked by [`check_trace_gradients`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceIdentity {
    /// `∂/∂Z Tr[AZ] = Aᵗ`
    D2a,
    /// `∂/∂Z Tr[AZ†] = 0`
    D2b,
    /// `∂/∂Z Tr[ZZ†] = Z*`
    D4a,
    /// `∂/∂Z Tr[AZ†Z] = Z*Aᵗ`
    D4b,
    /// `∂/∂Z Tr[A(Z ⊗ I)] = (Tr₂ A)ᵗ`
    D5,
}

impl TraceIdentity {
    pub const ALL: [TraceIdentity; 5] = [Self::D2a, Self::D2b, Self::D4a, Self::D4b, Self::D5];

    pub fn name(self) -> &'static str {
        match self {
            Self::D2a => "d2a",
            Self::D2b => "d2b",
            Self::D4a => "d4a",
            Self::D4b => "d4b",
            Self::D5 => "d5",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub identity_name: TraceIdentity,
    /// Side of `Z`; for `d5` also the side of the identity factor.
    pub matrix_dims: Vec<usize>,
    pub trials: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

const TRACED_DIM: usize = 2;

fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

fn evaluate(id: TraceIdentity, a: &CMatrix, z: &CMatrix) -> Complex64 {
    match id {
        TraceIdentity::D2a => a.trace_of_product(z),
        TraceIdentity::D2b => a.trace_of_product(&z.adjoint()),
        TraceIdentity::D4a => z.trace_of_product(&z.adjoint()),
        TraceIdentity::D4b => a.matmul(&z.adjoint()).trace_of_product(z),
        TraceIdentity::D5 => a.trace_of_product(&kron_unchecked(z, &CMatrix::identity(TRACED_DIM))),
    }
}

fn analytic(id: TraceIdentity, a: &CMatrix, z: &CMatrix) -> CMatrix {
    match id {
        TraceIdentity::D2a => a.transpose(),
        TraceIdentity::D2b => CMatrix::zeros(z.rows(), z.cols()),
        TraceIdentity::D4a => z.conj(),
        TraceIdentity::D4b => z.conj().matmul(&a.transpose()),
        TraceIdentity::D5 => partial_trace(a, &[z.rows(), TRACED_DIM], &[0])
            .expect("square by construction")
            .transpose(),
    }
}

/// Wirtinger derivative `½(∂/∂x − i·∂/∂y)` of `f` at every entry of `z`,
/// by central differences.
pub fn numeric_gradient(f: impl Fn(&CMatrix) -> Complex64, z: &CMatrix, h: f64) -> CMatrix {
    let mut out = CMatrix::zeros(z.rows(), z.cols());
    let mut probe = z.clone();
    for i in 0..z.rows() {
        for j in 0..z.cols() {
            let z0 = z[(i, j)];
            let mut diff = |step: Complex64| {
                probe[(i, j)] = z0 + step;
                let plus = f(&probe);
                probe[(i, j)] = z0 - step;
                let minus = f(&probe);
                probe[(i, j)] = z0;
                (plus - minus) / (2.0 * h)
            };
            let dx = diff(c(h, 0.0));
            let dy = diff(c(0.0, h));
            out[(i, j)] = (dx - dy * c(0.0, 1.0)) * 0.5;
        }
    }
    out
}

/// Checks each identity for `Z` of side 3 and 4 over `trials` random
/// draws of `A` and `Z`.
pub fn check_trace_gradients<R: Rng + ?Sized>(
    rng: &mut R,
    trials: usize,
) -> Result<Vec<GradCheckReport>> {
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let mut reports = Vec::new();
    for id in TraceIdentity::ALL {
        for n in [3usize, 4] {
            let a_dim = if id == TraceIdentity::D5 {
                n * TRACED_DIM
            } else {
                n
            };
            let mut worst = 0.0f64;
            for _ in 0..trials {
                let a = random_matrix(rng, a_dim, a_dim);
                let z = random_matrix(rng, n, n);
                let num = numeric_gradient(|zz| evaluate(id, &a, zz), &z, FD_STEP);
                let ana = analytic(id, &a, &z);
                let err = num.max_abs_diff(&ana) / ana.max_abs().max(1.0);
                worst = worst.max(err);
            }
            let matrix_dims = if id == TraceIdentity::D5 {
                vec![n, TRACED_DIM]
            } else {
                vec![n]
            };
            reports.push(GradCheckReport {
                identity_name: id,
                matrix_dims,
                trials,
                max_rel_error: worst,
                passed: worst <= GRAD_TOL,
            });
        }
    }
    Ok(reports)
}

/// Exhaustive search over `Γ = (I + x σ_x + y σ_y + z σ_z)/2` on a cubic
/// grid of the given spacing; points outside the Bloch ball are pushed
/// radially onto its surface.
pub fn gamma_grid_search(channel: &KrausChannel, resolution: f64) -> Result<(GammaMatrix, f64)> {
    gamma_grid_search_objective(&GammaObjective::for_channel(channel), resolution)
}

pub fn gamma_grid_search_objective(
    obj: &GammaObjective,
    resolution: f64,
) -> Result<(GammaMatrix, f64)> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::Config(format!(
            "grid resolution must be positive, got {resolution}"
        )));
    }
    match obj.m() {
        1 => {
            let g = GammaMatrix::maximally_mixed(1);
            let v = obj.value(g.matrix())?;
            Ok((g, v))
        }
        2 => grid_qubit(obj, resolution),
        m => Err(Error::InvalidGamma(format!(
            "grid search needs m_E <= 2, got {m}"
        ))),
    }
}

fn bloch_gamma(x: f64, y: f64, z: f64) -> CMatrix {
    CMatrix::from_rows(&[
        vec![c((1.0 + z) / 2.0, 0.0), c(x / 2.0, -y / 2.0)],
        vec![c(x / 2.0, y / 2.0), c((1.0 - z) / 2.0, 0.0)],
    ])
}

fn grid_qubit(obj: &GammaObjective, resolution: f64) -> Result<(GammaMatrix, f64)> {
    let basis: Vec<CMatrix> = [
        (0.0, 0.0, 0.0),
        (1.0, 0.0, 0.0),
        (0.0, 1.0, 0.0),
        (0.0, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| obj.operator(&bloch_gamma(x, y, z)))
    .collect::<Result<_>>()?;
    // M(x, y, z) = M0 + x·(Mx − M0) + y·(My − M0) + z·(Mz − M0)
    let m0 = basis[0].clone();
    let dirs: Vec<CMatrix> = basis[1..].iter().map(|m| m - &m0).collect();
    let qubit = m0.rows() == 2;

    let steps = (2.0 / resolution).ceil() as usize;
    let coord = |i: usize| (-1.0 + i as f64 * resolution).min(1.0);
    let mut best = (f64::NEG_INFINITY, (0.0, 0.0, 0.0));
    for i in 0..=steps {
        for j in 0..=steps {
            for k in 0..=steps {
                let (mut x, mut y, mut z) = (coord(i), coord(j), coord(k));
                let r2 = x * x + y * y + z * z;
                if r2 > 1.0 {
                    let r = r2.sqrt();
                    x /= r;
                    y /= r;
                    z /= r;
                }
                let v = if qubit {
                    let entry = |a: usize, b: usize| {
                        m0[(a, b)] + dirs[0][(a, b)] * x + dirs[1][(a, b)] * y + dirs[2][(a, b)] * z
                    };
                    let (p, q, off) = (entry(0, 0).re, entry(1, 1).re, entry(0, 1));
                    let det = (p * q - off.norm_sqr()).max(0.0);
                    (p + q + 2.0 * det.sqrt()).max(0.0).sqrt()
                } else {
                    let m = &(&(&m0 + &dirs[0].scale_real(x)) + &dirs[1].scale_real(y))
                        + &dirs[2].scale_real(z);
                    trace_sqrt(&m.hermitian_part())?
                };
                if v > best.0 {
                    best = (v, (x, y, z));
                }
            }
        }
    }
    let (x, y, z) = best.1;
    Ok((GammaMatrix::new(bloch_gamma(x, y, z))?, best.0))
}

/// Best data fidelity over random encodings and single-unitary recoveries.
/// The first sample is `C′ = I`, `R = I`; `candidates` lists further
/// `(C′, R stack)` pairs that are always evaluated.
pub fn random_search_fidelity<R: Rng + ?Sized>(
    problem: &Problem,
    l_dat: &CMatrix,
    samples: usize,
    rng: &mut R,
    candidates: &[(CMatrix, CMatrix)],
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::Config("samples must be at least 1".into()));
    }
    let layout = problem.layout();
    let d_rec = CMatrix::identity(layout.d_rec());
    let eval = |c_prime: &CMatrix, r_stack: &CMatrix| -> Result<f64> {
        fidelity_data(
            r_stack,
            problem.channel(),
            &kron(c_prime, &d_rec)?,
            problem.entangler(),
            layout,
            problem.output_factor(),
            l_dat,
        )
    };
    let mut best = eval(
        &CMatrix::identity(layout.d_code()),
        &CMatrix::identity(layout.d()),
    )?;
    for (c_prime, r_stack) in candidates {
        best = best.max(eval(c_prime, r_stack)?);
    }
    for _ in 1..samples {
        let c_prime = haar_random_unitary(layout.d_code(), rng);
        let r = haar_random_unitary(layout.d(), rng);
        best = best.max(eval(&c_prime, &r)?);
    }
    Ok(best)
}
