//! The concave Γ-problem: maximize `Tr √(Σ_ij Γ_ij F_i F_j†)` over density
//! matrices Γ, solved by Frank–Wolfe with projected-gradient acceleration.

use crate::channels::KrausChannel;
use crate::error::{dim_mismatch, Error, Result};
use crate::linalg::{eigh, psd_inv_sqrt, svd_descending, trace_sqrt};
use crate::matrix::{CMatrix, ZERO};

use super::{GammaMatrix, OptimizerConfig};

const LINE_SEARCH_EVALS: usize = 80;
const PG_BACKTRACKS: usize = 40;
/// Sufficient-increase constant of the backtracking search.
const ARMIJO: f64 = 1e-4;

/// `Γ ↦ Tr √M(Γ)` for a fixed family of `d × k` operators `F_i`.
#[derive(Clone, Debug)]
pub struct GammaObjective {
    /// `[F_1 … F_m]`, `d × m·k`.
    stacked: CMatrix,
    /// `stacked` expressed in an orthonormal basis of its column space.
    /// `M` restricted to that space has no structural zero eigenvalues,
    /// whose rounding noise would otherwise enter `Tr √M` at the `√ε` level.
    reduced: CMatrix,
    m: usize,
    k: usize,
}

impl GammaObjective {
    /// Objective of the bare channel, `F_i = E_i`.
    pub fn for_channel(channel: &KrausChannel) -> Self {
        Self::from_factors(channel.kraus()).expect("Kraus operators share one shape")
    }

    pub fn from_factors(factors: &[CMatrix]) -> Result<Self> {
        let first = factors
            .first()
            .ok_or_else(|| Error::InvalidGamma("no operators given".into()))?;
        let shape = first.shape();
        if let Some(bad) = factors.iter().find(|f| f.shape() != shape) {
            return Err(dim_mismatch(
                "Γ-objective operator",
                format!("{}x{}", shape.0, shape.1),
                format!("{}x{}", bad.rows(), bad.cols()),
            ));
        }
        let stacked = CMatrix::hstack(factors);
        let svd = svd_descending(&stacked)?;
        let top = svd.s.first().copied().unwrap_or(0.0);
        let cutoff = top * stacked.rows().max(stacked.cols()) as f64 * f64::EPSILON;
        let rank = svd.s.iter().take_while(|&&v| v > cutoff).count().max(1);
        let basis = svd.u.block(0, 0, stacked.rows(), rank);
        let reduced = basis.adjoint().matmul(&stacked);
        Ok(Self {
            stacked,
            reduced,
            m: factors.len(),
            k: shape.1,
        })
    }

    /// Number of operators, the side of Γ.
    pub fn m(&self) -> usize {
        self.m
    }

    fn check(&self, gamma: &CMatrix) -> Result<()> {
        if gamma.shape() != (self.m, self.m) {
            return Err(dim_mismatch(
                "Γ",
                format!("{0}x{0}", self.m),
                format!("{}x{}", gamma.rows(), gamma.cols()),
            ));
        }
        Ok(())
    }

    /// `M(Γ) = Σ_ij Γ_ij F_i F_j†`.
    pub fn operator(&self, gamma: &CMatrix) -> Result<CMatrix> {
        self.check(gamma)?;
        Ok(self.build(&self.stacked, gamma))
    }

    /// `M(Γ)` on the column space of the `F_i`; same nonzero spectrum.
    fn reduced_operator(&self, gamma: &CMatrix) -> Result<CMatrix> {
        self.check(gamma)?;
        Ok(self.build(&self.reduced, gamma))
    }

    fn build(&self, stacked: &CMatrix, gamma: &CMatrix) -> CMatrix {
        let (m, k) = (self.m, self.k);
        let d = stacked.rows();
        // W = [F_1 … F_m]·(Γ ⊗ I_k), so block j of W is Σ_i Γ_ij F_i.
        let mut w = CMatrix::zeros(d, m * k);
        for j in 0..m {
            for i in 0..m {
                let g = gamma[(i, j)];
                if g == ZERO {
                    continue;
                }
                for row in 0..d {
                    for x in 0..k {
                        w[(row, j * k + x)] += g * stacked[(row, i * k + x)];
                    }
                }
            }
        }
        w.matmul(&stacked.adjoint()).hermitian_part()
    }

    pub fn value(&self, gamma: &CMatrix) -> Result<f64> {
        trace_sqrt(&self.reduced_operator(gamma)?)
    }

    /// The Hermitian matrix `H` with `H_ab = ½ Tr(F_a† M^{-1/2} F_b)`, so
    /// that the directional derivative along `S − Γ` is `Tr H(S − Γ)`.
    pub fn gradient(&self, gamma: &CMatrix, eps: f64) -> Result<CMatrix> {
        let n = psd_inv_sqrt(&self.reduced_operator(gamma)?, eps)?;
        let p = self.reduced.adjoint().matmul(&n).matmul(&self.reduced);
        let k = self.k;
        let h = CMatrix::from_fn(self.m, self.m, |a, b| {
            (0..k)
                .map(|x| p[(a * k + x, b * k + x)])
                .sum::<num_complex::Complex64>()
                * 0.5
        });
        Ok(h.hermitian_part())
    }
}

/// `Tr √(Σ_ij Γ_ij E_i E_j†)`.
pub fn gamma_objective(gamma: &GammaMatrix, channel: &KrausChannel) -> Result<f64> {
    GammaObjective::for_channel(channel).value(gamma.matrix())
}

#[derive(Clone, Debug)]
pub struct GammaSolution {
    pub gamma: GammaMatrix,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Last Frank–Wolfe duality gap, an upper bound on the remaining
    /// suboptimality.
    pub gap: f64,
}

/// Maximizes the channel's Γ-objective starting from `I/m_E`.
pub fn solve_gamma(channel: &KrausChannel, config: &OptimizerConfig) -> Result<GammaSolution> {
    let obj = GammaObjective::for_channel(channel);
    solve_gamma_from(&obj, GammaMatrix::maximally_mixed(obj.m()), config)
}

/// Frank–Wolfe from an arbitrary feasible starting point. Iterates stay
/// feasible and the objective never decreases.
///
/// Each iteration first tries a projected-gradient step (Barzilai–Borwein
/// length, Armijo backtracking) and falls back to a Frank–Wolfe step toward
/// the top eigenvector of the gradient when that step gains too little. The
/// projection zeroes small eigenvalues exactly, which removes the slow tail
/// plain Frank–Wolfe shows when the optimum has low rank. The Frank–Wolfe
/// gap is the convergence certificate.
pub fn solve_gamma_from(
    obj: &GammaObjective,
    start: GammaMatrix,
    config: &OptimizerConfig,
) -> Result<GammaSolution> {
    let m = obj.m();
    if start.dim() != m {
        return Err(dim_mismatch("starting Γ", m, start.dim()));
    }
    let mut gamma = start.matrix().clone();
    let mut op = obj.reduced_operator(&gamma)?;
    let mut value = trace_sqrt(&op)?;
    let mut gap = f64::INFINITY;

    if m == 1 {
        return Ok(GammaSolution {
            gamma: start,
            objective: value,
            iterations: 0,
            converged: true,
            gap: 0.0,
        });
    }

    // A rank-deficient start hides directions in which the objective grows
    // with infinite slope from the pseudo-inverse gradient. One line search
    // toward I/m recovers them.
    let mixed = GammaMatrix::maximally_mixed(m);
    if gamma.max_abs_diff(mixed.matrix()) > 0.0 {
        let op_mixed = obj.reduced_operator(mixed.matrix())?;
        step_toward(
            &mut gamma,
            &mut op,
            &mut value,
            mixed.matrix(),
            &op_mixed,
            config.psd_eps,
        )?;
    }

    let mut step = 1.0;
    let mut last: Option<(CMatrix, CMatrix)> = None;
    for it in 1..=config.gamma_max_iters {
        let before = value;
        let h = obj.gradient(&gamma, config.psd_eps)?;
        let e = eigh(&h)?;
        gap = e.values[m - 1] - h.trace_of_product(&gamma).re;
        if gap < config.gamma_tol {
            return Ok(done(gamma, value, it - 1, true, gap));
        }

        if let Some((g_prev, h_prev)) = &last {
            let s = &gamma - g_prev;
            let y = &h - h_prev;
            let sy = s.inner(&y).re.abs();
            if sy > 0.0 {
                step = (s.norm_sqr() / sy).clamp(1e-10, 1e10);
            }
        }
        last = Some((gamma.clone(), h.clone()));
        for _ in 0..PG_BACKTRACKS {
            let cand = project_to_spectrahedron(&(&gamma + &h.scale_real(step)))?;
            let moved = &cand - &gamma;
            if moved.max_abs() < 1e-15 {
                break;
            }
            let cand_op = obj.reduced_operator(&cand)?;
            let v = trace_sqrt(&cand_op)?;
            if v > value && v >= value + ARMIJO * h.trace_of_product(&moved).re {
                gamma = cand;
                op = cand_op;
                value = v;
                break;
            }
            step *= 0.5;
        }

        if value - before < config.gamma_tol.max(0.1 * gap * gap) {
            let vertex = e.vectors.column_at(m - 1);
            let s = vertex.outer(&vertex);
            let op_s = obj.reduced_operator(&s)?;
            step_toward(&mut gamma, &mut op, &mut value, &s, &op_s, config.psd_eps)?;
        }
        if value - before < config.gamma_tol {
            return Ok(done(gamma, value, it, true, gap));
        }
    }
    Ok(done(gamma, value, config.gamma_max_iters, false, gap))
}

/// Euclidean projection onto the trace-one PSD matrices: eigenvalues are
/// projected onto the probability simplex.
fn project_to_spectrahedron(a: &CMatrix) -> Result<CMatrix> {
    let e = eigh(&a.hermitian_part())?;
    let mut sorted = e.values.clone();
    sorted.sort_by(|x, y| y.total_cmp(x));
    let mut cumulative = 0.0;
    let mut shift = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        cumulative += v;
        let candidate = (cumulative - 1.0) / (i + 1) as f64;
        if v - candidate > 0.0 {
            shift = candidate;
        }
    }
    Ok(e.reconstruct_with(|l| (l - shift).max(0.0))
        .hermitian_part())
}

/// Moves `gamma` toward `target` by the exact line-search step, updating the
/// cached operator and value. Leaves everything untouched when no step
/// improves the objective.
fn step_toward(
    gamma: &mut CMatrix,
    op: &mut CMatrix,
    value: &mut f64,
    target: &CMatrix,
    op_target: &CMatrix,
    eps: f64,
) -> Result<()> {
    let (t, best) = line_search(op, op_target, *value, eps)?;
    if t > 0.0 && best > *value {
        *gamma = (&*gamma + &(target - &*gamma).scale_real(t)).hermitian_part();
        *op = (&*op + &(op_target - &*op).scale_real(t)).hermitian_part();
        *value = best;
    }
    Ok(())
}

fn done(
    gamma: CMatrix,
    objective: f64,
    iterations: usize,
    converged: bool,
    gap: f64,
) -> GammaSolution {
    let tr = gamma.trace().re;
    let gamma = GammaMatrix::from_unchecked(gamma.scale_real(1.0 / tr));
    GammaSolution {
        gamma,
        objective,
        iterations,
        converged,
        gap,
    }
}

/// Value and slope of `t ↦ Tr √(A + t·D)`.
fn value_and_slope(a: &CMatrix, d: &CMatrix, t: f64, eps: f64) -> Result<(f64, f64)> {
    let e = eigh(&(a + &d.scale_real(t)).hermitian_part())?;
    let proj = e.vectors.adjoint().matmul(d).matmul(&e.vectors);
    let mut f = 0.0;
    let mut g = 0.0;
    for (i, &l) in e.values.iter().enumerate() {
        let l = l.max(0.0);
        f += l.sqrt();
        if l > eps {
            g += 0.5 * proj[(i, i)].re / l.sqrt();
        }
    }
    Ok((f, g))
}

/// Maximizes the concave `t ↦ Tr √((1−t)A + tB)` on `[0, 1]` by a
/// safeguarded secant search on the slope. Returns the best point seen,
/// which is `t = 0` when nothing beats the current value `f0`.
fn line_search(a: &CMatrix, b: &CMatrix, f0: f64, eps: f64) -> Result<(f64, f64)> {
    let d = b - a;
    let mut best = (0.0, f0);
    let (f1, _) = value_and_slope(a, &d, 1.0, eps)?;
    if f1 > best.1 {
        best = (1.0, f1);
    }
    // Eigenvalues that vanish at an endpoint contribute unbounded slopes the
    // pseudo-inverse cannot see, so both endpoint slopes are taken as
    // infinite and only interior slopes steer the search. Bisection runs
    // until both sides of the bracket carry finite slopes, then Illinois
    // false position takes over.
    let (mut lo, mut g_lo) = (0.0f64, f64::INFINITY);
    let (mut hi, mut g_hi) = (1.0f64, f64::NEG_INFINITY);
    let mut side = 0i8;
    for _ in 0..LINE_SEARCH_EVALS {
        if hi - lo < 1e-13 {
            break;
        }
        let t = if g_lo.is_finite() && g_hi.is_finite() {
            let x = lo + (hi - lo) * g_lo / (g_lo - g_hi);
            if x > lo && x < hi {
                x
            } else {
                0.5 * (lo + hi)
            }
        } else {
            0.5 * (lo + hi)
        };
        let (f, g) = value_and_slope(a, &d, t, eps)?;
        if f > best.1 {
            best = (t, f);
        }
        if g > 0.0 {
            lo = t;
            g_lo = g;
            if side == 1 && g_hi.is_finite() {
                g_hi *= 0.5;
            }
            side = 1;
        } else if g < 0.0 {
            hi = t;
            g_hi = g;
            if side == -1 && g_lo.is_finite() {
                g_lo *= 0.5;
            }
            side = -1;
        } else {
            break;
        }
    }
    Ok(best)
}
