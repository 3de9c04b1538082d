//! Noise sweeps over the three protection scenarios.

use std::fmt::Write as _;

use anyhow::{bail, Context, Result};
use eaqec::optimizer::{alternate_with_seeds, Domain, OptimizerConfig, Problem};
use eaqec::teleport::{build_protocol, TwoUnitaryChannel};
use eaqec::{CMatrix, SystemLayout, TargetSpec};
use rayon::prelude::*;
use serde::Serialize;

use crate::setup::ChannelSource;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// One bare qubit through the channel, no correction.
    Unprotected,
    /// Encoding and recovery ancillas start in a product state.
    Standard,
    /// Encoding and recovery ancillas share ebits.
    Ea,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Unprotected, Scenario::Standard, Scenario::Ea];

    pub fn name(self) -> &'static str {
        match self {
            Self::Unprotected => "unprotected",
            Self::Standard => "standard",
            Self::Ea => "ea",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "unprotected" => Ok(Self::Unprotected),
            "standard" => Ok(Self::Standard),
            "ea" => Ok(Self::Ea),
            other => bail!(
                "scenarios: unknown scenario {other:?} (expected unprotected, standard or ea)"
            ),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub channel: ChannelSource,
    pub p_values: Vec<f64>,
    pub scenarios: Vec<Scenario>,
    /// Layout of the protected scenarios.
    pub layout: SystemLayout,
    pub domain: Domain,
    pub config: OptimizerConfig,
    /// Add the teleportation encoding as an extra start in the `ea`
    /// scenario whenever the channel is a two-unitary channel.
    pub teleport_seed: bool,
    /// Worker threads; 0 uses the machine's parallelism.
    pub jobs: usize,
}

impl SweepSpec {
    pub fn new(channel: ChannelSource, p_values: Vec<f64>) -> Self {
        Self {
            channel,
            p_values,
            scenarios: Scenario::ALL.to_vec(),
            layout: SystemLayout::qubits_2_2_2(),
            domain: Domain::Prepared,
            config: OptimizerConfig::default(),
            teleport_seed: true,
            jobs: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_values.is_empty() {
            bail!("p-grid: no noise values to sweep");
        }
        if let Some(p) = self.p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            bail!("p-grid: value {p} is outside [0, 1]");
        }
        if self.scenarios.is_empty() {
            bail!("scenarios: at least one scenario is required");
        }
        if self.scenarios.contains(&Scenario::Ea) && !self.layout.supports_entanglement() {
            bail!(
                "layout: {} cannot hold ebits (needs d_enc = d_rec)",
                self.layout
            );
        }
        self.config.validate().context("config")?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub p: f64,
    pub scenario: Scenario,
    pub fidelity_data: f64,
    pub fidelity_norm: f64,
    pub delta: f64,
    pub iterations: usize,
    pub restart: usize,
    pub converged: bool,
    pub seed: u64,
}

pub const CSV_HEADER: &str =
    "p,scenario,fidelity_data,fidelity_norm,delta,iterations,restart,converged,seed";

/// Runs every `(p, scenario)` pair and returns the rows ordered by `p`
/// and then by scenario.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let mut scenarios = spec.scenarios.clone();
    scenarios.sort();
    scenarios.dedup();
    let tasks: Vec<(usize, f64, Scenario)> = spec
        .p_values
        .iter()
        .enumerate()
        .flat_map(|(i, &p)| scenarios.iter().map(move |&s| (i, p, s)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs)
        .build()
        .context("jobs: cannot start worker pool")?;
    let mut rows: Vec<(usize, SweepRow)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(i, p, s)| run_point(spec, p, s).map(|row| (i, row)))
            .collect::<Result<Vec<_>>>()
    })?;
    rows.sort_by_key(|(i, r)| (*i, r.scenario));
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

/// One row of the sweep.
pub fn run_point(spec: &SweepSpec, p: f64, scenario: Scenario) -> Result<SweepRow> {
    let seed = spec.config.seed;
    let (layout, target, entangle) = match scenario {
        Scenario::Unprotected => (
            SystemLayout::unprotected_qubit(),
            TargetSpec::Identity,
            false,
        ),
        Scenario::Standard => (spec.layout, TargetSpec::Identity, false),
        Scenario::Ea => (spec.layout, TargetSpec::SwapDataToRecovery, true),
    };
    let channel = spec
        .channel
        .system_channel(p, &layout)
        .with_context(|| format!("p = {p}, scenario {}", scenario.name()))?;
    let problem = Problem::new(channel, layout, &target, entangle, spec.domain)?;

    if scenario == Scenario::Unprotected {
        let id_c = CMatrix::identity(layout.d_code());
        let id_r = CMatrix::identity(layout.d());
        let fit = problem.evaluate(&id_c, &id_r)?;
        return Ok(SweepRow {
            p,
            scenario,
            fidelity_data: problem.data_fidelity(&id_c, &id_r)?,
            fidelity_norm: problem.fidelity_from_distance(fit.distance),
            delta: fit.distance,
            iterations: 0,
            restart: 0,
            converged: true,
            seed,
        });
    }

    let mut seeds = Vec::new();
    if scenario == Scenario::Ea && spec.teleport_seed && layout == SystemLayout::qubits_2_2_2() {
        if let Some(two) = two_unitary_form(&spec.channel, p)? {
            seeds.push(build_protocol(&two, &layout)?.transmitted_encoding());
        }
    }
    let (state, _) = alternate_with_seeds(&problem, &spec.config, &seeds)?;
    Ok(SweepRow {
        p,
        scenario,
        fidelity_data: problem.data_fidelity(&state.c_prime, &state.r_stack)?,
        fidelity_norm: state.fidelity(),
        delta: state.delta_value(),
        iterations: state.iteration,
        restart: state.restart,
        converged: state.converged,
        seed,
    })
}

fn two_unitary_form(source: &ChannelSource, p: f64) -> Result<Option<TwoUnitaryChannel>> {
    match source {
        ChannelSource::Preset(preset) => preset.two_unitary(p),
        ChannelSource::File(ch) if ch.dim() == 2 || ch.dim() == 4 => {
            Ok(TwoUnitaryChannel::from_channel(ch))
        }
        ChannelSource::File(_) => Ok(None),
    }
}

fn fixed(x: f64) -> String {
    let x = if x.abs() < 5e-13 { 0.0 } else { x };
    format!("{x:.12}")
}

/// CSV text: `#` metadata lines, the header, one line per row.
pub fn render_csv(rows: &[SweepRow], meta: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in meta {
        let _ = writeln!(out, "# {k}: {v}");
    }
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.p,
            r.scenario.name(),
            fixed(r.fidelity_data),
            fixed(r.fidelity_norm),
            fixed(r.delta),
            r.iterations,
            r.restart,
            r.converged,
            r.seed
        );
    }
    out
}

/// The CSV without its `#` lines.
pub fn csv_body(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}

pub fn render_json(rows: &[SweepRow], meta: &[(String, String)]) -> Result<String> {
    let meta: serde_json::Map<String, serde_json::Value> = meta
        .iter()
        .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
        .collect();
    let doc = serde_json::json!({ "meta": meta, "rows": rows });
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

/// Metadata describing a sweep, for the `#` lines of the CSV.
pub fn describe(spec: &SweepSpec) -> Vec<(String, String)> {
    let cfg = &spec.config;
    vec![
        ("channel".into(), spec.channel.label()),
        ("layout".into(), spec.layout.to_string()),
        ("domain".into(), format!("{:?}", spec.domain).to_lowercase()),
        (
            "scenarios".into(),
            spec.scenarios
                .iter()
                .map(|s| s.name())
                .collect::<Vec<_>>()
                .join(","),
        ),
        ("restarts".into(), cfg.restarts.to_string()),
        ("seed".into(), cfg.seed.to_string()),
        ("tol_outer".into(), format!("{:e}", cfg.tol_outer)),
        ("max_outer_iters".into(), cfg.max_outer_iters.to_string()),
        ("teleport_seed".into(), spec.teleport_seed.to_string()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(preset: &str, p: Vec<f64>) -> SweepSpec {
        let mut spec = SweepSpec::new(ChannelSource::resolve(preset).unwrap(), p);
        spec.config.restarts = 2;
        spec.jobs = 1;
        spec
    }

    #[test]
    fn unprotected_rows_are_one_minus_p() {
        let mut spec = quick("depolarizing", vec![0.0, 0.3, 1.0]);
        spec.scenarios = vec![Scenario::Unprotected];
        let rows = run_sweep(&spec).unwrap();
        assert_eq!(rows.len(), 3);
        for r in rows {
            assert!((r.fidelity_data - (1.0 - r.p)).abs() < 1e-12, "{r:?}");
            assert_eq!(r.iterations, 0);
        }
    }

    #[test]
    fn rows_are_sorted() {
        let mut spec = quick("bit-flip", vec![0.2, 0.1]);
        spec.scenarios = vec![Scenario::Ea, Scenario::Unprotected];
        let rows = run_sweep(&spec).unwrap();
        let order: Vec<(f64, Scenario)> = rows.iter().map(|r| (r.p, r.scenario)).collect();
        assert_eq!(
            order,
            vec![
                (0.2, Scenario::Unprotected),
                (0.2, Scenario::Ea),
                (0.1, Scenario::Unprotected),
                (0.1, Scenario::Ea)
            ]
        );
    }

    #[test]
    fn csv_shape() {
        let row = SweepRow {
            p: 0.25,
            scenario: Scenario::Standard,
            fidelity_data: 0.75,
            fidelity_norm: -1e-15,
            delta: 0.5,
            iterations: 3,
            restart: 1,
            converged: true,
            seed: 9,
        };
        let text = render_csv(&[row], &[("channel".into(), "bit-flip".into())]);
        assert_eq!(
            text,
            "# channel: bit-flip\n".to_string()
                + CSV_HEADER
                + "\n0.25,standard,0.750000000000,0.000000000000,0.500000000000,3,1,true,9\n"
        );
        assert_eq!(csv_body(&text).lines().count(), 2);
    }

    #[test]
    fn spec_validation() {
        let mut spec = quick("bit-flip", vec![]);
        assert!(spec.validate().is_err());
        spec.p_values = vec![0.5];
        spec.scenarios.clear();
        assert!(spec.validate().is_err());
        spec.scenarios = vec![Scenario::Ea];
        spec.layout = SystemLayout::new(2, 2, 1).unwrap();
        assert!(spec.validate().unwrap_err().to_string().contains("layout"));
    }
}
