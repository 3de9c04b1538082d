use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, Result};
use crate::linalg::{eigvalsh, haar_random_unitary};
use crate::matrix::CMatrix;

use super::gamma::{solve_gamma_from, GammaObjective};
use super::problem::Problem;
use super::steps::{distance_in, encoding_in, overlaps_in, recovery_in, refit_in};
use super::{delta_from_gamma, encoding_project, GammaMatrix, OptState, OptimizerConfig};

/// Slack allowed when checking that δ never increases.
const MONOTONE_SLACK: f64 = 1e-10;

/// One line per restart, for reporting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub restart: usize,
    pub delta: f64,
    pub fidelity: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl From<&OptState> for RunSummary {
    fn from(s: &OptState) -> Self {
        Self {
            restart: s.restart,
            delta: s.delta_value(),
            fidelity: s.fidelity(),
            iterations: s.iteration,
            converged: s.converged,
        }
    }
}

/// Best-of-restarts optimization. Restart 0 starts from `C′ = I`, the rest
/// from Haar-random encodings drawn from `config.seed`.
pub fn alternate(problem: &Problem, config: &OptimizerConfig) -> Result<OptState> {
    alternate_with_seeds(problem, config, &[]).map(|(best, _)| best)
}

/// Like [`alternate`], with extra starting encodings appended after the
/// random restarts. Returns the best state and a summary of every run.
pub fn alternate_with_seeds(
    problem: &Problem,
    config: &OptimizerConfig,
    seeds: &[CMatrix],
) -> Result<(OptState, Vec<RunSummary>)> {
    config.validate()?;
    let n = problem.layout().d_code();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut starts = vec![CMatrix::identity(n)];
    for _ in 1..config.restarts {
        starts.push(haar_random_unitary(n, &mut rng));
    }
    for s in seeds {
        if s.shape() != (n, n) {
            return Err(dim_mismatch(
                "seed encoding",
                format!("{n}x{n}"),
                format!("{}x{}", s.rows(), s.cols()),
            ));
        }
        starts.push(s.clone());
    }

    let mut best: Option<OptState> = None;
    let mut summaries = Vec::with_capacity(starts.len());
    for (restart, c0) in starts.into_iter().enumerate() {
        let state = run_single(problem, config, c0, restart)?;
        summaries.push(RunSummary::from(&state));
        let better = match &best {
            None => true,
            Some(b) => state.delta_value() < b.delta_value() - 1e-12,
        };
        if better {
            best = Some(state);
        }
    }
    Ok((best.expect("at least one restart"), summaries))
}

/// One alternating run from the encoding `c0`.
pub(crate) fn run_single(
    problem: &Problem,
    config: &OptimizerConfig,
    c0: CMatrix,
    restart: usize,
) -> Result<OptState> {
    let layout = *problem.layout();
    let d = layout.d();
    let k = problem.k() as f64;
    let kraus = problem.channel().kraus();
    let target_in = problem.target_in();
    let tail = problem.entangler().matmul(problem.input());
    let fidelity_of = |dist: f64| ((2.0 * k - dist) / (2.0 * k)).powi(2);

    let mut c = c0;
    let mut warm = GammaMatrix::maximally_mixed(kraus.len());
    let mut state: Option<OptState> = None;
    let mut delta_history = Vec::new();
    let mut fidelity_history = Vec::new();
    let mut converged = false;
    let mut degenerate = false;

    for _ in 0..config.max_outer_iters {
        let enc = problem.encoder(&c)?;
        let factors: Vec<CMatrix> = kraus.iter().map(|e| e.matmul(&enc)).collect();
        let sol = solve_gamma_from(
            &GammaObjective::from_factors(&factors)?,
            warm.clone(),
            config,
        )?;
        let delta = delta_from_gamma(&sol.gamma)?;
        let (r_stack, _) = recovery_in(kraus, &delta, &enc, target_in)?;
        let blocks = r_stack.split_rows(d);
        let fit = refit_in(&blocks, kraus, &enc, target_in);

        let c_bar = encoding_in(&blocks, kraus, &fit.delta, target_in, &tail, &layout)?;
        let c_next = encoding_project(&c_bar)?;
        let fit_next = refit_in(&blocks, kraus, &problem.encoder(&c_next)?, target_in);
        let (fit, c_kept) = if fit_next.distance <= fit.distance {
            (fit_next, c_next)
        } else {
            (fit, c)
        };
        c = c_kept;
        degenerate |= fit.degenerate;

        let prev = delta_history.last().copied();
        delta_history.push(fit.distance);
        fidelity_history.push(fidelity_of(fit.distance));
        warm = fit.delta.gamma();
        state = Some(OptState {
            c_prime: c.clone(),
            r_stack,
            delta: fit.delta,
            delta_history: Vec::new(),
            fidelity_history: Vec::new(),
            iteration: delta_history.len(),
            converged: false,
            restart,
            degenerate,
        });
        if let Some(p) = prev {
            if p - fit.distance < config.tol_outer {
                converged = true;
                break;
            }
        }
    }
    let mut state = state.expect("max_outer_iters is at least 1");
    state.delta_history = delta_history;
    state.fidelity_history = fidelity_history;
    state.converged = converged;
    Ok(state)
}

/// Constraint and consistency residuals of a state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `max |R†R − I|`.
    pub recovery_isometry: f64,
    /// `max |C′†C′ − I|`.
    pub encoding_unitarity: f64,
    /// `|Tr Γ − 1|` for `Γ = Δ†Δ`.
    pub gamma_trace: f64,
    pub gamma_min_eigenvalue: f64,
    /// `|‖Δ‖² − 1|`.
    pub delta_norm: f64,
    /// Recorded δ against a direct evaluation of the distance.
    pub distance_consistency: f64,
    /// `Σ|t_re|²/k²` against `((2k − δ)/2k)²`.
    pub fidelity_consistency: f64,
    /// Largest increase between consecutive δ values.
    pub max_delta_increase: f64,
}

impl Residuals {
    pub fn within_tolerances(&self) -> bool {
        self.recovery_isometry <= 1e-8
            && self.encoding_unitarity <= 1e-8
            && self.gamma_trace <= 1e-10
            && self.gamma_min_eigenvalue >= -1e-10
            && self.delta_norm <= 1e-10
            && self.distance_consistency <= 1e-9
            && self.fidelity_consistency <= 1e-8
            && self.max_delta_increase <= MONOTONE_SLACK
    }
}

pub fn residuals(problem: &Problem, state: &OptState) -> Result<Residuals> {
    let d = problem.layout().d();
    let k = problem.k() as f64;
    let enc = problem.encoder(&state.c_prime)?;
    let blocks = state.recovery_kraus();
    if blocks.first().map(CMatrix::rows) != Some(d) {
        return Err(dim_mismatch("recovery operator", d, state.r_stack.cols()));
    }
    let kraus = problem.channel().kraus();
    let gamma = state.delta.gamma();
    let dist = state.delta_value();
    let direct = distance_in(&blocks, kraus, &state.delta, &enc, problem.target_in());
    let t = overlaps_in(&blocks, kraus, &enc, problem.target_in());
    let max_increase = state
        .delta_history
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    Ok(Residuals {
        recovery_isometry: state.r_stack.isometry_defect(),
        encoding_unitarity: state.c_prime.isometry_defect(),
        gamma_trace: (gamma.matrix().trace().re - 1.0).abs(),
        gamma_min_eigenvalue: eigvalsh(gamma.matrix())?[0],
        delta_norm: (state.delta.matrix().norm_sqr() - 1.0).abs(),
        distance_consistency: (direct - dist).abs(),
        fidelity_consistency: (t.norm_sqr() / (k * k) - ((2.0 * k - dist) / (2.0 * k)).powi(2))
            .abs(),
        max_delta_increase: max_increase,
    })
}
