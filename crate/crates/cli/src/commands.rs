use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use eaqec::channel_io::channel_from_json;
use eaqec::optimizer::{
    alternate_with_seeds, fidelity_full, residuals, solve_gamma_from, GammaMatrix, GammaObjective,
    Normalization, OptimizerConfig, Problem,
};
use eaqec::oracle::{check_trace_gradients, gamma_grid_search_objective};
use eaqec::teleport::{
    best_pair_fidelity, build_protocol, unitary_mixture, verify_deferred, verify_protocol,
    TwoUnitaryChannel,
};
use eaqec::{KrausChannel, SystemLayout};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::setup::{lift_to_layout, ChannelSource, Preset};
use crate::sweep::{describe, render_csv, render_json, run_sweep, SweepSpec};
use crate::{ExitStatus, Format};

/// Writes to `path`, or to stdout when there is none or it is `-`.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) if p != Path::new("-") => {
            std::fs::write(p, text).with_context(|| format!("out: cannot write {}", p.display()))
        }
        _ => {
            print!("{text}");
            Ok(())
        }
    }
}

pub struct OptimizeRequest {
    pub channel: ChannelSource,
    pub p: f64,
    pub layout: SystemLayout,
    pub target: eaqec::TargetSpec,
    pub entangle: bool,
    pub domain: eaqec::optimizer::Domain,
    pub config: OptimizerConfig,
    pub format: Format,
}

pub fn optimize(req: &OptimizeRequest, out: Option<&Path>) -> Result<ExitStatus> {
    let channel = req.channel.system_channel(req.p, &req.layout)?;
    let problem = Problem::new(channel, req.layout, &req.target, req.entangle, req.domain)?;
    let (state, runs) = alternate_with_seeds(&problem, &req.config, &[])?;
    let res = residuals(&problem, &state)?;
    let f_data = problem.data_fidelity(&state.c_prime, &state.r_stack)?;
    let f_full = fidelity_full(
        &state.r_stack,
        problem.channel(),
        &problem.c_full(&state.c_prime)?,
        problem.entangler(),
        problem.target(),
        &req.layout,
        Normalization::Normalized,
    )?;

    let mut report = String::new();
    let _ = writeln!(
        report,
        "channel {} p={} layout {} entangle {} domain {:?}",
        req.channel.label(),
        req.p,
        req.layout,
        if req.entangle { "on" } else { "off" },
        req.domain
    );
    for r in &runs {
        let _ = writeln!(
            report,
            "restart {:>3}: delta {:.12} fidelity {:.12} iterations {} converged {}",
            r.restart, r.delta, r.fidelity, r.iterations, r.converged
        );
    }
    let _ = writeln!(report, "best restart: {}", state.restart);
    let history: Vec<String> = state
        .delta_history
        .iter()
        .map(|d| format!("{d:.12}"))
        .collect();
    let _ = writeln!(report, "delta history: {}", history.join(" "));
    let _ = writeln!(report, "fidelity_data: {f_data:.12}");
    let _ = writeln!(report, "fidelity_norm: {:.12}", state.fidelity());
    let _ = writeln!(report, "fidelity_full: {f_full:.12}");
    let _ = writeln!(report, "residuals: {}", serde_json::to_string(&res)?);
    print!("{report}");

    if let Some(path) = out {
        let text = match req.format {
            Format::Json => {
                let doc = json!({
                    "fidelity_data": f_data,
                    "fidelity_norm": state.fidelity(),
                    "fidelity_full": f_full,
                    "residuals": res,
                    "runs": runs,
                    "state": state,
                });
                serde_json::to_string_pretty(&doc)? + "\n"
            }
            Format::Csv => {
                let mut t = String::from("iteration,delta,fidelity_norm\n");
                for (i, (d, f)) in state
                    .delta_history
                    .iter()
                    .zip(&state.fidelity_history)
                    .enumerate()
                {
                    let _ = writeln!(t, "{},{d:.12},{f:.12}", i + 1);
                }
                t
            }
        };
        emit(Some(path), &text)?;
    }
    if !res.within_tolerances() {
        eprintln!("warning: residuals exceed their tolerances");
    }
    Ok(if state.converged {
        ExitStatus::Success
    } else {
        ExitStatus::NotConverged
    })
}

pub fn sweep(spec: &SweepSpec, format: Format, out: Option<&Path>) -> Result<ExitStatus> {
    let rows = run_sweep(spec)?;
    let meta = describe(spec);
    let text = match format {
        Format::Csv => render_csv(&rows, &meta),
        Format::Json => render_json(&rows, &meta)?,
    };
    emit(out, &text)?;
    if rows.iter().all(|r| r.converged) {
        Ok(ExitStatus::Success)
    } else {
        eprintln!("warning: some optimizations hit the iteration cap");
        Ok(ExitStatus::NotConverged)
    }
}

/// Verified fidelity at or above this counts as perfect correction.
pub const TELEPORT_TOL: f64 = 1e-9;

#[derive(Debug, Serialize)]
pub struct TeleportReport {
    pub channel: String,
    pub two_unitary: bool,
    pub fidelity: f64,
    pub deferred_fidelity: Option<f64>,
    /// For mixtures of more than two unitaries: the term pair whose protocol
    /// did best.
    pub best_pair: Option<(usize, usize)>,
    pub verified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub circuit: Option<String>,
}

enum TeleportInput {
    Two(TwoUnitaryChannel),
    Mixture {
        terms: Vec<(f64, eaqec::CMatrix)>,
        noise: KrausChannel,
    },
}

fn teleport_input(spec: &str, p: f64, layout: &SystemLayout) -> Result<TeleportInput> {
    if let Some(preset) = Preset::parse(spec) {
        if let Some(two) = preset.two_unitary(p)? {
            return Ok(TeleportInput::Two(two));
        }
        let noise = lift_to_layout(&preset.qubit_channel(p)?, layout)?;
        return Ok(TeleportInput::Mixture {
            terms: preset.unitary_terms(p),
            noise,
        });
    }
    let text = std::fs::read_to_string(spec)
        .with_context(|| format!("channel: {spec:?} is neither a preset nor a readable file"))?;
    if let Ok(two) = TwoUnitaryChannel::from_json(&text) {
        return Ok(TeleportInput::Two(two));
    }
    let ch = channel_from_json(&text).with_context(|| format!("channel: {spec}"))?;
    if let Some(two) = TwoUnitaryChannel::from_channel(&ch) {
        return Ok(TeleportInput::Two(two));
    }
    match unitary_mixture(&ch) {
        Some(terms) => {
            let noise = lift_to_layout(&ch, layout)?;
            Ok(TeleportInput::Mixture { terms, noise })
        }
        None => bail!(
            "channel: {spec} is not a mixture of unitaries, so no teleportation protocol applies"
        ),
    }
}

/// Builds the protocol for `spec` at noise `p` and checks it against the
/// channel.
pub fn teleport_report(
    spec: &str,
    p: f64,
    layout: &SystemLayout,
    dump_circuit: bool,
) -> Result<TeleportReport> {
    if *layout != SystemLayout::qubits_2_2_2() {
        bail!("layout: teleportation needs 2,2,2, got {layout}");
    }
    let report = match teleport_input(spec, p, layout)? {
        TeleportInput::Two(two) => {
            let protocol = build_protocol(&two, layout)?;
            let noise = two.system_noise(layout)?;
            let fidelity = verify_protocol(&protocol, &noise)?;
            let deferred = verify_deferred(&protocol, &noise)?;
            TeleportReport {
                channel: spec.to_string(),
                two_unitary: true,
                fidelity,
                deferred_fidelity: Some(deferred),
                best_pair: None,
                verified: fidelity >= 1.0 - TELEPORT_TOL && deferred >= 1.0 - TELEPORT_TOL,
                circuit: dump_circuit.then(|| protocol.circuit()),
            }
        }
        TeleportInput::Mixture { terms, noise } => {
            let (fidelity, i, j) = if terms.len() < 2 {
                // A single unitary: pair it with itself.
                let two = TwoUnitaryChannel::new(terms[0].1.clone(), terms[0].1.clone(), 0.0)?;
                (
                    verify_protocol(&build_protocol(&two, layout)?, &noise)?,
                    0,
                    0,
                )
            } else {
                best_pair_fidelity(&terms, layout, &noise)?
            };
            TeleportReport {
                channel: spec.to_string(),
                two_unitary: false,
                fidelity,
                deferred_fidelity: None,
                best_pair: Some((i, j)),
                verified: fidelity >= 1.0 - TELEPORT_TOL,
                circuit: None,
            }
        }
    };
    Ok(report)
}

pub fn teleport(
    spec: &str,
    p: f64,
    layout: &SystemLayout,
    dump_circuit: bool,
    out: Option<&Path>,
) -> Result<ExitStatus> {
    let report = teleport_report(spec, p, layout, dump_circuit)?;
    println!("fidelity: {:.12}", report.fidelity);
    if let Some(d) = report.deferred_fidelity {
        println!("deferred fidelity: {d:.12}");
    }
    if let Some(c) = &report.circuit {
        print!("{c}");
    }
    if let Some(path) = out {
        emit(Some(path), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    }
    if report.verified {
        Ok(ExitStatus::Success)
    } else {
        eprintln!(
            "verification failed: best fidelity {:.12} is below 1",
            report.fidelity
        );
        Ok(ExitStatus::VerificationFailed)
    }
}

/// Solver against grid search, for one pair of operators.
#[derive(Debug, Serialize)]
pub struct GammaCheck {
    pub operators: Vec<usize>,
    pub solver: f64,
    pub grid: f64,
    pub difference: f64,
    pub passed: bool,
}

/// Largest allowed gap between the Γ-solver and the grid search.
pub const GRID_TOL: f64 = 1e-3;

/// Compares the Γ-solver with grid search for the channel itself when it
/// has at most two Kraus operators, and otherwise for every pair of them.
pub fn gamma_checks(
    channel: &KrausChannel,
    resolution: f64,
    config: &OptimizerConfig,
) -> Result<Vec<GammaCheck>> {
    let m = channel.len();
    let subsets: Vec<Vec<usize>> = if m <= 2 {
        vec![(0..m).collect()]
    } else {
        (0..m)
            .flat_map(|i| (i + 1..m).map(move |j| vec![i, j]))
            .collect()
    };
    let mut out = Vec::with_capacity(subsets.len());
    for subset in subsets {
        let ops: Vec<_> = subset.iter().map(|&i| channel.kraus()[i].clone()).collect();
        let obj = GammaObjective::from_factors(&ops)?;
        let solved = solve_gamma_from(&obj, GammaMatrix::maximally_mixed(obj.m()), config)?;
        let (_, grid) = gamma_grid_search_objective(&obj, resolution)?;
        let difference = (solved.objective - grid).abs();
        out.push(GammaCheck {
            operators: subset,
            solver: solved.objective,
            grid,
            difference,
            passed: difference <= GRID_TOL,
        });
    }
    Ok(out)
}

pub struct OracleRequest {
    pub trials: usize,
    pub seed: u64,
    pub channel: ChannelSource,
    pub p: f64,
    pub resolution: f64,
    pub config: OptimizerConfig,
}

pub fn oracle(req: &OracleRequest, out: Option<&Path>) -> Result<ExitStatus> {
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    let grads = check_trace_gradients(&mut rng, req.trials)?;
    let channel = match &req.channel {
        ChannelSource::Preset(p) => p.qubit_channel(req.p)?,
        ChannelSource::File(ch) => ch.clone(),
    };
    let gammas = gamma_checks(&channel, req.resolution, &req.config)?;
    let passed = grads.iter().all(|g| g.passed) && gammas.iter().all(|g| g.passed);
    let doc = json!({
        "seed": req.seed,
        "trials": req.trials,
        "gradient_checks": grads,
        "channel": req.channel.label(),
        "p": req.p,
        "grid_resolution": req.resolution,
        "gamma_checks": gammas,
        "passed": passed,
    });
    emit(out, &(serde_json::to_string_pretty(&doc)? + "\n"))?;
    Ok(if passed {
        ExitStatus::Success
    } else {
        ExitStatus::VerificationFailed
    })
}

pub fn validate(path: &Path) -> Result<ExitStatus> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("channel: cannot read {}", path.display()))?;
    let ch = channel_from_json(&text).with_context(|| format!("channel: {}", path.display()))?;
    println!(
        "ok: dim {} with {} Kraus operators, trace-preservation defect {:e}{}",
        ch.dim(),
        ch.len(),
        ch.tp_defect(),
        ch.name()
            .map(|n| format!(", name {n:?}"))
            .unwrap_or_default()
    );
    Ok(ExitStatus::Success)
}
