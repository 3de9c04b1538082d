//! The individual updates of the alternating loop.
//!
//! The public functions measure the distance on the whole system space,
//! with operators given explicitly. The `*_in` variants take the encoder
//! `K = C·U·J` and the target `T = L·J` restricted to an input domain `J`
//! and are what the loop itself uses.

use num_complex::Complex64;

use crate::channels::KrausChannel;
use crate::error::{dim_mismatch, Result};
use crate::layout::SystemLayout;
use crate::linalg::{expect_shape, kron, partial_trace, polar_unitary, psd_sqrt, svd_descending};
use crate::matrix::{CMatrix, ZERO};

use super::{DeltaMatrix, GammaMatrix};

fn check_ops(channel: &KrausChannel, ops: &[(&CMatrix, &'static str)]) -> Result<usize> {
    let d = channel.dim();
    for (m, what) in ops {
        expect_shape(m, d, d, what)?;
    }
    Ok(d)
}

fn check_stack(r_stack: &CMatrix, d: usize, m_r: Option<usize>) -> Result<Vec<CMatrix>> {
    if r_stack.cols() != d || !r_stack.rows().is_multiple_of(d) || r_stack.rows() == 0 {
        return Err(dim_mismatch(
            "recovery stack",
            format!("(m_R*{d})x{d}"),
            format!("{}x{}", r_stack.rows(), r_stack.cols()),
        ));
    }
    let blocks = r_stack.split_rows(d);
    if let Some(m) = m_r {
        if blocks.len() != m {
            return Err(dim_mismatch("recovery operator count", m, blocks.len()));
        }
    }
    Ok(blocks)
}

/// `δ = Σ_{r,e} ‖R_r E_e C U − μ_re L‖²`, summed term by term.
pub fn distance_delta(
    r_stack: &CMatrix,
    channel: &KrausChannel,
    c_full: &CMatrix,
    u: &CMatrix,
    delta: &DeltaMatrix,
    l: &CMatrix,
) -> Result<f64> {
    let d = check_ops(
        channel,
        &[(c_full, "encoding"), (u, "entangler"), (l, "target")],
    )?;
    if delta.m_e() != channel.len() {
        return Err(dim_mismatch("Δ columns", channel.len(), delta.m_e()));
    }
    let blocks = check_stack(r_stack, d, Some(delta.m_r()))?;
    Ok(distance_in(
        &blocks,
        channel.kraus(),
        delta,
        &c_full.matmul(u),
        l,
    ))
}

pub(crate) fn distance_in(
    r_blocks: &[CMatrix],
    kraus: &[CMatrix],
    delta: &DeltaMatrix,
    enc: &CMatrix,
    target_in: &CMatrix,
) -> f64 {
    let mu = delta.matrix();
    let mut total = 0.0;
    for (r, rr) in r_blocks.iter().enumerate() {
        for (e, ee) in kraus.iter().enumerate() {
            let diff = &rr.matmul(ee).matmul(enc) - &target_in.scale(mu[(r, e)]);
            total += diff.norm_sqr();
        }
    }
    total
}

/// The same distance in block form, `‖R·E·(I_{m_E} ⊗ CU) − Δ ⊗ L‖²`.
pub fn distance_delta_blocks(
    r_stack: &CMatrix,
    channel: &KrausChannel,
    c_full: &CMatrix,
    u: &CMatrix,
    delta: &DeltaMatrix,
    l: &CMatrix,
) -> Result<f64> {
    let d = check_ops(
        channel,
        &[(c_full, "encoding"), (u, "entangler"), (l, "target")],
    )?;
    check_stack(r_stack, d, Some(delta.m_r()))?;
    let e_block = channel.block_row();
    let lifted = kron(&CMatrix::identity(channel.len()), &c_full.matmul(u))?;
    let lhs = r_stack.matmul(&e_block).matmul(&lifted);
    let rhs = kron(delta.matrix(), l)?;
    Ok((&lhs - &rhs).norm_sqr())
}

/// `Δ = Γ^{1/2}`, so `Δ†Δ = Γ` and `m_R = m_E`.
pub fn delta_from_gamma(gamma: &GammaMatrix) -> Result<DeltaMatrix> {
    DeltaMatrix::normalized(psd_sqrt(gamma.matrix())?)
}

/// Optimal recovery for fixed encoding and Δ: with `X = E(Δ† ⊗ C U L†)`
/// and `X = U_X S V_X†`, returns `R = V_X U_X†`.
pub fn recovery_from_delta(
    channel: &KrausChannel,
    delta: &DeltaMatrix,
    c_full: &CMatrix,
    u: &CMatrix,
    l: &CMatrix,
) -> Result<CMatrix> {
    check_ops(
        channel,
        &[(c_full, "encoding"), (u, "entangler"), (l, "target")],
    )?;
    if delta.m_e() != channel.len() {
        return Err(dim_mismatch("Δ columns", channel.len(), delta.m_e()));
    }
    Ok(recovery_in(channel.kraus(), delta, &c_full.matmul(u), l)?.0)
}

/// Returns the stacked recovery and the attained `Re Tr(R X) = Σ s_i`.
pub(crate) fn recovery_in(
    kraus: &[CMatrix],
    delta: &DeltaMatrix,
    enc: &CMatrix,
    target_in: &CMatrix,
) -> Result<(CMatrix, f64)> {
    let mu = delta.matrix();
    let tail = enc.matmul(&target_in.adjoint());
    let pieces: Vec<CMatrix> = kraus.iter().map(|e| e.matmul(&tail)).collect();
    let d = tail.rows();
    let blocks: Vec<CMatrix> = (0..delta.m_r())
        .map(|r| {
            let mut x = CMatrix::zeros(d, d);
            for (e, p) in pieces.iter().enumerate() {
                let w = mu[(r, e)].conj();
                if w != ZERO {
                    x += &p.scale(w);
                }
            }
            x
        })
        .collect();
    let x = CMatrix::hstack(&blocks);
    let svd = svd_descending(&x)?;
    let r = svd.v.matmul(&svd.u.adjoint());
    Ok((r, svd.s.iter().sum()))
}

/// `t_re = Tr(T† R_r E_e K)`.
pub(crate) fn overlaps_in(
    r_blocks: &[CMatrix],
    kraus: &[CMatrix],
    enc: &CMatrix,
    target_in: &CMatrix,
) -> CMatrix {
    let t_adj = target_in.adjoint();
    let left: Vec<CMatrix> = r_blocks.iter().map(|r| t_adj.matmul(r)).collect();
    let right: Vec<CMatrix> = kraus.iter().map(|e| e.matmul(enc)).collect();
    CMatrix::from_fn(r_blocks.len(), kraus.len(), |r, e| {
        left[r].trace_of_product(&right[e])
    })
}

/// Unconstrained minimizer of δ over the encoding,
/// `C̄′ = (1/d_rec)·Tr_rec[Σ μ_re (R_r E_e)† L U†]`.
pub fn encoding_unconstrained(
    r_stack: &CMatrix,
    channel: &KrausChannel,
    delta: &DeltaMatrix,
    l: &CMatrix,
    u: &CMatrix,
    layout: &SystemLayout,
) -> Result<CMatrix> {
    let d = check_ops(channel, &[(u, "entangler"), (l, "target")])?;
    if d != layout.d() {
        return Err(dim_mismatch("channel vs layout", layout.d(), d));
    }
    let blocks = check_stack(r_stack, d, Some(delta.m_r()))?;
    encoding_in(&blocks, channel.kraus(), delta, l, u, layout)
}

/// `C̄′ = (1/d_rec)·Tr_rec[Σ μ_re (R_r E_e)† T J† U†]`, where `tail = U·J`.
pub(crate) fn encoding_in(
    r_blocks: &[CMatrix],
    kraus: &[CMatrix],
    delta: &DeltaMatrix,
    target_in: &CMatrix,
    tail: &CMatrix,
    layout: &SystemLayout,
) -> Result<CMatrix> {
    let mu = delta.matrix();
    let d = layout.d();
    let mut sum = CMatrix::zeros(d, d);
    for (e, ee) in kraus.iter().enumerate() {
        let mut acc = CMatrix::zeros(d, d);
        for (r, rr) in r_blocks.iter().enumerate() {
            let w: Complex64 = mu[(r, e)];
            if w != ZERO {
                acc += &rr.adjoint().scale(w);
            }
        }
        sum += &ee.adjoint().matmul(&acc);
    }
    let a = sum.matmul(target_in).matmul(&tail.adjoint());
    let reduced = partial_trace(&a, &[layout.d_code(), layout.d_rec()], &[0])?;
    Ok(reduced.scale_real(1.0 / layout.d_rec() as f64))
}

/// Nearest unitary to `c_bar`, which minimizes δ among unitary encodings.
pub fn encoding_project(c_bar: &CMatrix) -> Result<CMatrix> {
    polar_unitary(c_bar)
}

/// Result of [`refit_delta`].
#[derive(Clone, Debug)]
pub struct Refit {
    pub delta: DeltaMatrix,
    /// δ at the refitted Δ.
    pub distance: f64,
    /// All overlaps vanished; `delta` is the uniform fallback.
    pub degenerate: bool,
}

/// Best Δ for fixed recovery and encoding: `μ_re ∝ Tr(L† R_r E_e C U)`,
/// giving `δ = 2d − 2·‖t‖`.
pub fn refit_delta(
    r_stack: &CMatrix,
    channel: &KrausChannel,
    c_full: &CMatrix,
    u: &CMatrix,
    l: &CMatrix,
) -> Result<Refit> {
    let d = check_ops(
        channel,
        &[(c_full, "encoding"), (u, "entangler"), (l, "target")],
    )?;
    let blocks = check_stack(r_stack, d, None)?;
    Ok(refit_in(&blocks, channel.kraus(), &c_full.matmul(u), l))
}

pub(crate) fn refit_in(
    r_blocks: &[CMatrix],
    kraus: &[CMatrix],
    enc: &CMatrix,
    target_in: &CMatrix,
) -> Refit {
    let t = overlaps_in(r_blocks, kraus, enc, target_in);
    let k = target_in.cols() as f64;
    let norm = t.frobenius_norm();
    match DeltaMatrix::normalized(t) {
        Ok(delta) => Refit {
            delta,
            distance: (2.0 * k - 2.0 * norm).max(0.0),
            degenerate: false,
        },
        Err(_) => Refit {
            delta: DeltaMatrix::uniform(r_blocks.len(), kraus.len()),
            distance: 2.0 * k,
            degenerate: true,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{bit_flip, depolarizing, lift_iid};
    use crate::linalg::haar_random_unitary;
    use crate::optimizer::{gamma_objective, solve_gamma, OptimizerConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_delta(rng: &mut ChaCha8Rng, m_r: usize, m_e: usize) -> DeltaMatrix {
        let g = haar_random_unitary(m_r.max(m_e), rng);
        DeltaMatrix::normalized(g.block(0, 0, m_r, m_e)).unwrap()
    }

    fn random_stack(rng: &mut ChaCha8Rng, m_r: usize, d: usize) -> CMatrix {
        haar_random_unitary(m_r * d, rng).block(0, 0, m_r * d, d)
    }

    #[test]
    fn perfect_identity_setup() {
        let ch = KrausChannel::identity(2);
        let id = CMatrix::identity(2);
        let delta = DeltaMatrix::new(CMatrix::identity(1)).unwrap();
        assert!(distance_delta(&id, &ch, &id, &id, &delta, &id).unwrap() < 1e-15);
        let r = recovery_from_delta(&ch, &delta, &id, &id, &id).unwrap();
        assert!(r.max_abs_diff(&id) < 1e-12);
        let refit = refit_delta(&id, &ch, &id, &id, &id).unwrap();
        assert!(refit.distance < 1e-15);
        assert!((refit.delta.matrix()[(0, 0)].re - 1.0).abs() < 1e-15);
        let layout = SystemLayout::unprotected_qubit();
        let cb = encoding_unconstrained(&id, &ch, &delta, &id, &id, &layout).unwrap();
        assert!(cb.max_abs_diff(&id) < 1e-15);
    }

    #[test]
    fn elementwise_and_block_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let layout = SystemLayout::qubits_2_2_2();
        let ch = lift_iid(&depolarizing(0.3).unwrap(), &layout).unwrap();
        for _ in 0..5 {
            let m_r = 3;
            let r = random_stack(&mut rng, m_r, 8);
            let c_full = kron(&haar_random_unitary(4, &mut rng), &CMatrix::identity(2)).unwrap();
            let u = haar_random_unitary(8, &mut rng);
            let l = haar_random_unitary(8, &mut rng);
            let delta = random_delta(&mut rng, m_r, ch.len());
            let a = distance_delta(&r, &ch, &c_full, &u, &delta, &l).unwrap();
            let b = distance_delta_blocks(&r, &ch, &c_full, &u, &delta, &l).unwrap();
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn recovery_attains_gamma_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let ch = lift_iid(&bit_flip(0.27).unwrap(), &SystemLayout::qubits_2_2_2()).unwrap();
        for _ in 0..5 {
            let c_full = kron(&haar_random_unitary(4, &mut rng), &CMatrix::identity(2)).unwrap();
            let u = haar_random_unitary(8, &mut rng);
            let l = haar_random_unitary(8, &mut rng);
            let delta = random_delta(&mut rng, ch.len(), ch.len());
            let (r, achieved) = recovery_in(ch.kraus(), &delta, &c_full.matmul(&u), &l).unwrap();
            assert!(r.isometry_defect() < 1e-9);
            let want = gamma_objective(&delta.gamma(), &ch).unwrap();
            assert!((achieved - want).abs() < 1e-8, "{achieved} vs {want}");
            // Re Tr(R X) recomputed from the overlaps.
            let t = overlaps_in(&r.split_rows(8), ch.kraus(), &c_full.matmul(&u), &l);
            let re: f64 = (0..t.rows())
                .flat_map(|i| (0..t.cols()).map(move |j| (i, j)))
                .map(|(i, j)| (delta.matrix()[(i, j)].conj() * t[(i, j)]).re)
                .sum();
            assert!((re - want).abs() < 1e-8);
        }
    }

    #[test]
    fn bit_flip_recovery_alone_gives_one_minus_p() {
        let p = 0.19;
        let ch = bit_flip(p).unwrap();
        let sol = solve_gamma(&ch, &OptimizerConfig::default()).unwrap();
        let delta = delta_from_gamma(&sol.gamma).unwrap();
        let id = CMatrix::identity(2);
        let r = recovery_from_delta(&ch, &delta, &id, &id, &id).unwrap();
        let dist = distance_delta(&r, &ch, &id, &id, &delta, &id).unwrap();
        assert!((dist - 0.4).abs() < 1e-6, "{dist}");
        let refit = refit_delta(&r, &ch, &id, &id, &id).unwrap();
        let fid = ((4.0 - refit.distance) / 4.0).powi(2);
        assert!((fid - (1.0 - p)).abs() < 1e-6);
    }

    #[test]
    fn refit_closed_form_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let ch = lift_iid(&depolarizing(0.2).unwrap(), &SystemLayout::qubits_2_2_2()).unwrap();
        for _ in 0..5 {
            let m_r = 4;
            let r = random_stack(&mut rng, m_r, 8);
            let c_full = kron(&haar_random_unitary(4, &mut rng), &CMatrix::identity(2)).unwrap();
            let u = haar_random_unitary(8, &mut rng);
            let l = haar_random_unitary(8, &mut rng);
            let refit = refit_delta(&r, &ch, &c_full, &u, &l).unwrap();
            let direct = distance_delta(&r, &ch, &c_full, &u, &refit.delta, &l).unwrap();
            assert!((direct - refit.distance).abs() < 1e-9);
            let other = random_delta(&mut rng, m_r, ch.len());
            assert!(distance_delta(&r, &ch, &c_full, &u, &other, &l).unwrap() >= direct - 1e-12);
        }
    }

    #[test]
    fn refit_degenerate_falls_back_to_uniform() {
        let ch = KrausChannel::identity(2);
        let id = CMatrix::identity(2);
        let x = crate::gates::pauli_x();
        let refit = refit_delta(&x, &ch, &id, &id, &id).unwrap();
        assert!(refit.degenerate);
        assert!((refit.distance - 4.0).abs() < 1e-15);
    }

    #[test]
    fn projection_beats_random_unitaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let layout = SystemLayout::qubits_2_2_2();
        let ch = lift_iid(&bit_flip(0.3).unwrap(), &layout).unwrap();
        let u = crate::channels::entangler(&layout).unwrap();
        let l = haar_random_unitary(8, &mut rng);
        let r = random_stack(&mut rng, 4, 8);
        let delta = random_delta(&mut rng, 4, 4);
        let cb = encoding_unconstrained(&r, &ch, &delta, &l, &u, &layout).unwrap();
        let cp = encoding_project(&cb).unwrap();
        assert!(cp.is_unitary(1e-10));
        let dist = |c: &CMatrix| {
            let cf = kron(c, &CMatrix::identity(2)).unwrap();
            distance_delta(&r, &ch, &cf, &u, &delta, &l).unwrap()
        };
        let best = dist(&cp);
        for _ in 0..50 {
            assert!(best <= dist(&haar_random_unitary(4, &mut rng)) + 1e-12);
        }
    }

    #[test]
    fn projection_examples() {
        assert!(
            encoding_project(&CMatrix::identity(3).scale_real(0.3))
                .unwrap()
                .max_abs_diff(&CMatrix::identity(3))
                < 1e-12
        );
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let v = haar_random_unitary(4, &mut rng);
        assert!(encoding_project(&v).unwrap().max_abs_diff(&v) < 1e-10);
    }

    #[test]
    fn delta_from_gamma_examples() {
        let g = GammaMatrix::new(CMatrix::diag_real(&[1.0, 0.0])).unwrap();
        assert!(
            delta_from_gamma(&g)
                .unwrap()
                .matrix()
                .max_abs_diff(&CMatrix::diag_real(&[1.0, 0.0]))
                < 1e-12
        );
        let h = GammaMatrix::maximally_mixed(2);
        let want = CMatrix::identity(2).scale_real(std::f64::consts::FRAC_1_SQRT_2);
        assert!(delta_from_gamma(&h).unwrap().matrix().max_abs_diff(&want) < 1e-12);
    }
}
