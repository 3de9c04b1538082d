use eaqec::channels::{bit_flip, bit_phase_flip, depolarizing, entangler, lift_iid};
use eaqec::linalg::{haar_random_unitary, kron, partial_trace};
use eaqec::matrix::c;
use eaqec::optimizer::{alternate, solve_gamma, Domain, OptimizerConfig, Problem};
use eaqec::oracle::{gamma_grid_search, random_search_fidelity};
use eaqec::{CMatrix, KrausChannel, SystemLayout, TargetSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Entanglement fidelity of the data map by simulating the whole procedure
/// on half of a Bell pair with a reference qubit, then reading off
/// ⟨Φ|ρ_ref,out|Φ⟩.
fn simulated_fidelity(
    channel: &KrausChannel,
    layout: &SystemLayout,
    c_prime: &CMatrix,
    r_stack: &CMatrix,
    entangle: bool,
    output_index: usize,
) -> f64 {
    let d = layout.d();
    let u = if entangle {
        entangler(layout).unwrap()
    } else {
        CMatrix::identity(d)
    };
    let enc = kron(c_prime, &CMatrix::identity(layout.d_rec()))
        .unwrap()
        .matmul(&u);
    let anc = layout.d_enc() * layout.d_rec();
    let mut rho = CMatrix::zeros(2 * d, 2 * d);
    for r in r_stack.split_rows(d) {
        for e in channel.kraus() {
            let op = r.matmul(e).matmul(&enc);
            // Σ_i |i⟩_ref ⊗ op|i, 0⟩ / √2
            let mut psi = CMatrix::zeros(2 * d, 1);
            for i in 0..2 {
                let col = op.column_at(i * anc);
                for row in 0..d {
                    psi[(i * d + row, 0)] = col[(row, 0)].scale(std::f64::consts::FRAC_1_SQRT_2);
                }
            }
            rho += &psi.matmul(&psi.adjoint());
        }
    }
    let dims = [2, layout.d_dat(), layout.d_enc(), layout.d_rec()];
    let reduced = partial_trace(&rho, &dims, &[0, 1 + output_index]).unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let phi = CMatrix::column(&[c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0)]);
    phi.adjoint().matmul(&reduced).matmul(&phi)[(0, 0)].re
}

fn random_two_kraus(rng: &mut ChaCha8Rng) -> KrausChannel {
    let u = haar_random_unitary(4, rng);
    KrausChannel::new(2, u.block(0, 0, 4, 2).split_rows(2)).unwrap()
}

#[test]
fn data_fidelity_matches_state_simulation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let layout = SystemLayout::qubits_2_2_2();
    for (target, entangle, out) in [
        (TargetSpec::Identity, false, 0),
        (TargetSpec::Identity, true, 0),
        (TargetSpec::SwapDataToRecovery, true, 2),
    ] {
        for _ in 0..5 {
            let ch = lift_iid(&depolarizing(0.27).unwrap(), &layout).unwrap();
            let problem =
                Problem::new(ch.clone(), layout, &target, entangle, Domain::Prepared).unwrap();
            let c_prime = haar_random_unitary(4, &mut rng);
            let r = CMatrix::vstack(&[
                haar_random_unitary(8, &mut rng).scale_real(0.6),
                haar_random_unitary(8, &mut rng).scale_real(0.8),
            ]);
            let got = problem.data_fidelity(&c_prime, &r).unwrap();
            let want = simulated_fidelity(&ch, &layout, &c_prime, &r, entangle, out);
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }
}

#[test]
fn optimized_fidelity_matches_simulation() {
    let layout = SystemLayout::qubits_2_2_2();
    let ch = lift_iid(&bit_phase_flip(0.3).unwrap(), &layout).unwrap();
    let problem = Problem::new(
        ch.clone(),
        layout,
        &TargetSpec::SwapDataToRecovery,
        true,
        Domain::Prepared,
    )
    .unwrap();
    let cfg = OptimizerConfig {
        restarts: 3,
        ..OptimizerConfig::default()
    };
    let state = alternate(&problem, &cfg).unwrap();
    let got = problem
        .data_fidelity(&state.c_prime, &state.r_stack)
        .unwrap();
    let want = simulated_fidelity(&ch, &layout, &state.c_prime, &state.r_stack, true, 2);
    assert!((got - want).abs() < 1e-12);
}

#[test]
fn gamma_solver_agrees_with_grid_on_random_channels() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = OptimizerConfig::default();
    for _ in 0..10 {
        let ch = random_two_kraus(&mut rng);
        let sol = solve_gamma(&ch, &cfg).unwrap();
        let (_, grid) = gamma_grid_search(&ch, 0.01).unwrap();
        assert!(
            sol.objective >= grid - 1e-9,
            "solver {} below grid {grid}",
            sol.objective
        );
        assert!(
            sol.objective - grid <= 1e-3,
            "solver {} far above grid {grid}",
            sol.objective
        );
    }
}

#[test]
fn bit_flip_gamma_value() {
    let cfg = OptimizerConfig::default();
    for p in [0.05, 0.1, 0.19, 0.3, 0.45] {
        let sol = solve_gamma(&bit_flip(p).unwrap(), &cfg).unwrap();
        assert!((sol.objective - 2.0 * (1.0 - p).sqrt()).abs() < 1e-6);
    }
}

#[test]
fn optimizer_beats_random_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let layout = SystemLayout::qubits_2_2_2();
    let cfg = OptimizerConfig {
        restarts: 4,
        ..OptimizerConfig::default()
    };
    for (ch, target, ea) in [
        (bit_flip(0.2).unwrap(), TargetSpec::Identity, false),
        (depolarizing(0.4).unwrap(), TargetSpec::Identity, false),
        (
            bit_phase_flip(0.5).unwrap(),
            TargetSpec::SwapDataToRecovery,
            true,
        ),
    ] {
        let problem = Problem::new(
            lift_iid(&ch, &layout).unwrap(),
            layout,
            &target,
            ea,
            Domain::Prepared,
        )
        .unwrap();
        let state = alternate(&problem, &cfg).unwrap();
        let optimized = problem
            .data_fidelity(&state.c_prime, &state.r_stack)
            .unwrap();
        let lower =
            random_search_fidelity(&problem, &CMatrix::identity(2), 300, &mut rng, &[]).unwrap();
        assert!(optimized >= lower - 1e-9, "{optimized} < {lower}");
    }
}

#[test]
fn bit_flip_without_recovery_ancilla() {
    let layout = SystemLayout::new(2, 2, 1).unwrap();
    let cfg = OptimizerConfig {
        restarts: 4,
        ..OptimizerConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for p in [0.1, 0.25, 0.4] {
        let ch = lift_iid(&bit_flip(p).unwrap(), &layout).unwrap();
        let problem =
            Problem::new(ch, layout, &TargetSpec::Identity, false, Domain::Prepared).unwrap();
        let state = alternate(&problem, &cfg).unwrap();
        let f = problem
            .data_fidelity(&state.c_prime, &state.r_stack)
            .unwrap();
        let lower =
            random_search_fidelity(&problem, &CMatrix::identity(2), 200, &mut rng, &[]).unwrap();
        assert!(f >= 1.0 - p - 1e-9, "p = {p}: {f}");
        assert!(f >= lower - 1e-9, "p = {p}: {f} < {lower}");
    }
}
