//! Alternating optimization of encoding and recovery.
//!
//! The distance between the corrected channel and a target unitary `L` is
//!
//! ```text
//! δ = Σ_{r,e} ‖R_r E_e C U J − μ_re L J‖²
//! ```
//!
//! where `C = C′ ⊗ I_rec`, `U` is the entangler and `J` embeds the inputs
//! the distance is measured on. Each outer iteration solves the concave
//! Γ-problem, turns its solution into a recovery through an SVD, refits the
//! coefficient matrix `Δ = [μ_re]` and then updates the encoding by a polar
//! projection. Every step can only decrease `δ`.

mod alternate;
mod fidelity;
mod gamma;
mod problem;
mod steps;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigvalsh, HERMITIAN_TOL, PSD_CLAMP};
use crate::matrix::CMatrix;

pub use alternate::{alternate, alternate_with_seeds, residuals, Residuals, RunSummary};
pub use fidelity::{data_channel_kraus, fidelity_data, fidelity_full, Normalization};
pub use gamma::{gamma_objective, solve_gamma, solve_gamma_from, GammaObjective, GammaSolution};
pub use problem::{Domain, Problem};
pub use steps::{
    delta_from_gamma, distance_delta, distance_delta_blocks, encoding_project,
    encoding_unconstrained, recovery_from_delta, refit_delta, Refit,
};

/// Tolerance on `‖Δ‖² = 1`.
pub const DELTA_NORM_TOL: f64 = 1e-10;

/// The `m_R × m_E` coefficient matrix `[μ_re]`, normalized to unit
/// Frobenius norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CMatrix", into = "CMatrix")]
pub struct DeltaMatrix {
    entries: CMatrix,
}

impl DeltaMatrix {
    pub fn new(entries: CMatrix) -> Result<Self> {
        let n2 = entries.norm_sqr();
        if (n2 - 1.0).abs() > DELTA_NORM_TOL || !entries.all_finite() {
            return Err(Error::DeltaNorm(n2));
        }
        Ok(Self { entries })
    }

    /// Rescales `entries` to unit norm. Fails on the zero matrix.
    pub fn normalized(entries: CMatrix) -> Result<Self> {
        let n = entries.frobenius_norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::DeltaNorm(n * n));
        }
        Ok(Self {
            entries: entries.scale_real(1.0 / n),
        })
    }

    /// All `m_R · m_E` coefficients equal.
    pub fn uniform(m_r: usize, m_e: usize) -> Self {
        let v = 1.0 / ((m_r * m_e) as f64).sqrt();
        Self {
            entries: CMatrix::from_fn(m_r, m_e, |_, _| crate::matrix::c(v, 0.0)),
        }
    }

    pub fn m_r(&self) -> usize {
        self.entries.rows()
    }

    pub fn m_e(&self) -> usize {
        self.entries.cols()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    /// `Γ = Δ†Δ`.
    pub fn gamma(&self) -> GammaMatrix {
        let g = self
            .entries
            .adjoint()
            .matmul(&self.entries)
            .hermitian_part();
        GammaMatrix { entries: g }
    }
}

impl TryFrom<CMatrix> for DeltaMatrix {
    type Error = Error;

    fn try_from(m: CMatrix) -> Result<Self> {
        Self::new(m)
    }
}

impl From<DeltaMatrix> for CMatrix {
    fn from(d: DeltaMatrix) -> Self {
        d.entries
    }
}

/// A density matrix over Kraus indices: Hermitian, PSD, unit trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CMatrix", into = "CMatrix")]
pub struct GammaMatrix {
    entries: CMatrix,
}

impl GammaMatrix {
    pub fn new(entries: CMatrix) -> Result<Self> {
        let n = entries.ensure_square()?;
        if n == 0 {
            return Err(Error::InvalidGamma("empty matrix".into()));
        }
        let herm = entries.hermitian_defect();
        if herm > HERMITIAN_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let tr = entries.trace().re;
        if (tr - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidGamma(format!("trace is {tr}, expected 1")));
        }
        let min = eigvalsh(&entries)?[0];
        if min < -PSD_CLAMP {
            return Err(Error::NotPsd(min));
        }
        Ok(Self {
            entries: entries.hermitian_part(),
        })
    }

    /// `I/m`, the maximally mixed starting point.
    pub fn maximally_mixed(m: usize) -> Self {
        Self {
            entries: CMatrix::identity(m).scale_real(1.0 / m as f64),
        }
    }

    pub(crate) fn from_unchecked(entries: CMatrix) -> Self {
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }
}

impl TryFrom<CMatrix> for GammaMatrix {
    type Error = Error;

    fn try_from(m: CMatrix) -> Result<Self> {
        Self::new(m)
    }
}

impl From<GammaMatrix> for CMatrix {
    fn from(g: GammaMatrix) -> Self {
        g.entries
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub max_outer_iters: usize,
    /// Stop once an outer iteration decreases δ by less than this.
    pub tol_outer: f64,
    pub gamma_max_iters: usize,
    /// Stop the Γ-solver once the objective increases by less than this.
    pub gamma_tol: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Eigenvalues at or below this are treated as zero when inverting.
    pub psd_eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_outer_iters: 500,
            tol_outer: 1e-9,
            gamma_max_iters: 2000,
            gamma_tol: 1e-10,
            restarts: 10,
            seed: 0,
            psd_eps: 1e-12,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tol_outer", self.tol_outer),
            ("gamma_tol", self.gamma_tol),
            ("psd_eps", self.psd_eps),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if self.max_outer_iters == 0 || self.gamma_max_iters == 0 {
            return Err(Error::Config("iteration caps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a `.toml` or `.json` file, chosen by extension.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Self::from_toml_str(&text),
            Some("json") => Self::from_json_str(&text),
            _ => Err(Error::Config(format!(
                "{}: config files must end in .json or .toml",
                path.display()
            ))),
        }
    }
}

/// State of one alternating-optimization run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptState {
    /// Encoding on data ⊗ encoding.
    pub c_prime: CMatrix,
    /// Recovery Kraus operators stacked vertically (`m_R·d × d`).
    pub r_stack: CMatrix,
    pub delta: DeltaMatrix,
    pub delta_history: Vec<f64>,
    /// Normalized channel fidelity after each iteration.
    pub fidelity_history: Vec<f64>,
    pub iteration: usize,
    pub converged: bool,
    /// Index of the restart this state came from.
    pub restart: usize,
    /// Set when a refit met all-zero overlaps and fell back to a uniform Δ.
    pub degenerate: bool,
}

impl OptState {
    /// Final distance.
    pub fn delta_value(&self) -> f64 {
        self.delta_history.last().copied().unwrap_or(f64::INFINITY)
    }

    pub fn fidelity(&self) -> f64 {
        self.fidelity_history.last().copied().unwrap_or(0.0)
    }

    /// The recovery Kraus operators `R_r`.
    pub fn recovery_kraus(&self) -> Vec<CMatrix> {
        let d = self.r_stack.cols();
        self.r_stack.split_rows(d)
    }
}
