//! Turning command-line values into the inputs of the library.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use eaqec::channel_io::channel_from_json;
use eaqec::channels::{bit_flip, bit_phase_flip, depolarizing, lift_iid};
use eaqec::gates::{pauli_x, pauli_y, pauli_z};
use eaqec::optimizer::OptimizerConfig;
use eaqec::teleport::TwoUnitaryChannel;
use eaqec::{CMatrix, KrausChannel, SystemLayout, TargetSpec};

pub const PRESETS: [&str; 4] = ["identity", "bit-flip", "bit-phase-flip", "depolarizing"];

/// A channel named on the command line.
#[derive(Clone, Debug)]
pub enum ChannelSource {
    Preset(Preset),
    File(KrausChannel),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Identity,
    BitFlip,
    BitPhaseFlip,
    Depolarizing,
}

impl Preset {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "identity" => Some(Self::Identity),
            "bit-flip" => Some(Self::BitFlip),
            "bit-phase-flip" => Some(Self::BitPhaseFlip),
            "depolarizing" => Some(Self::Depolarizing),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::BitFlip => "bit-flip",
            Self::BitPhaseFlip => "bit-phase-flip",
            Self::Depolarizing => "depolarizing",
        }
    }

    /// The single-qubit channel at noise level `p`.
    pub fn qubit_channel(self, p: f64) -> Result<KrausChannel> {
        let ch = match self {
            Self::Identity => KrausChannel::identity(2).named("identity"),
            Self::BitFlip => bit_flip(p)?,
            Self::BitPhaseFlip => bit_phase_flip(p)?,
            Self::Depolarizing => depolarizing(p)?,
        };
        Ok(ch)
    }

    /// The channel as a mixture of unitaries `(probability, unitary)`.
    pub fn unitary_terms(self, p: f64) -> Vec<(f64, CMatrix)> {
        let id = CMatrix::identity(2);
        match self {
            Self::Identity => vec![(1.0, id)],
            Self::BitFlip => vec![(1.0 - p, id), (p, pauli_x())],
            Self::BitPhaseFlip => vec![(1.0 - p, id), (p / 2.0, pauli_x()), (p / 2.0, pauli_z())],
            Self::Depolarizing => vec![
                (1.0 - p, id),
                (p / 3.0, pauli_x()),
                (p / 3.0, pauli_y()),
                (p / 3.0, pauli_z()),
            ],
        }
    }

    /// The two-unitary form, for presets that have one.
    pub fn two_unitary(self, p: f64) -> Result<Option<TwoUnitaryChannel>> {
        Ok(match self {
            Self::Identity => Some(TwoUnitaryChannel::identity(2)?),
            Self::BitFlip => Some(TwoUnitaryChannel::bit_flip(p)?),
            _ => None,
        })
    }
}

impl ChannelSource {
    /// A preset name, or else a path to a channel JSON file.
    pub fn resolve(spec: &str) -> Result<Self> {
        if let Some(p) = Preset::parse(spec) {
            return Ok(Self::Preset(p));
        }
        let path = Path::new(spec);
        if !path.exists() {
            bail!(
                "channel: {spec:?} is neither a preset ({}) nor an existing file",
                PRESETS.join(", ")
            );
        }
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("channel: cannot read {spec}"))?;
        let ch = channel_from_json(&text).with_context(|| format!("channel: {spec}"))?;
        Ok(Self::File(ch))
    }

    pub fn label(&self) -> String {
        match self {
            Self::Preset(p) => p.name().to_string(),
            Self::File(ch) => ch.name().unwrap_or("custom").to_string(),
        }
    }

    /// The channel on the full system space of `layout`. Single-qubit
    /// channels act independently on every transmitted qubit; a channel on
    /// the transmitted space is extended by the identity on the recovery
    /// factor; a channel on the whole space is used as given.
    pub fn system_channel(&self, p: f64, layout: &SystemLayout) -> Result<KrausChannel> {
        let ch = match self {
            Self::Preset(preset) => preset.qubit_channel(p)?,
            Self::File(ch) => ch.clone(),
        };
        lift_to_layout(&ch, layout)
    }
}

pub fn lift_to_layout(ch: &KrausChannel, layout: &SystemLayout) -> Result<KrausChannel> {
    let dim = ch.dim();
    if dim == layout.d() {
        Ok(ch.clone())
    } else if dim == layout.d_code() {
        Ok(ch.tensor_identity(layout.d_rec())?)
    } else if dim == 2 {
        lift_iid(ch, layout).map_err(|e| anyhow!("channel: {e}"))
    } else {
        bail!(
            "channel: dimension {dim} fits neither a qubit, the transmitted space ({}) nor the full system ({}) of layout {layout}",
            layout.d_code(),
            layout.d()
        )
    }
}

pub fn parse_layout(text: &str) -> Result<SystemLayout> {
    text.parse::<SystemLayout>()
        .map_err(|e| anyhow!("layout: {e}"))
}

pub fn parse_target(text: &str) -> Result<TargetSpec> {
    match text {
        "identity" => Ok(TargetSpec::Identity),
        "swap" => Ok(TargetSpec::SwapDataToRecovery),
        path => {
            let body = std::fs::read_to_string(path).with_context(|| {
                format!("target: {path:?} is not identity, swap or a readable file")
            })?;
            let m: CMatrix =
                serde_json::from_str(&body).with_context(|| format!("target: {path}"))?;
            Ok(TargetSpec::Custom(m))
        }
    }
}

pub fn parse_switch(name: &str, text: &str) -> Result<bool> {
    match text {
        "on" => Ok(true),
        "off" => Ok(false),
        other => bail!("{name}: expected on or off, got {other:?}"),
    }
}

pub fn check_probability(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        bail!("p: {p} is outside [0, 1]");
    }
    Ok(p)
}

/// `start:stop:step`, inclusive of `stop` up to rounding.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        bail!("p-grid: expected start:stop:step, got {text:?}");
    }
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| anyhow!("p-grid: {s:?} is not a number"))
    };
    let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
    if step.is_nan() || step <= 0.0 {
        bail!("p-grid: step must be positive");
    }
    if stop < start {
        bail!("p-grid: stop {stop} is below start {start}");
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    let values: Vec<f64> = (0..n)
        .map(|i| round_grid(start + i as f64 * step))
        .collect();
    for &p in &values {
        if !(0.0..=1.0).contains(&p) {
            bail!("p-grid: value {p} is outside [0, 1]");
        }
    }
    Ok(values)
}

/// Removes accumulated rounding so that `0.1 + 2·0.1` prints as `0.3`.
pub fn round_grid(p: f64) -> f64 {
    (p * 1e12).round() / 1e12
}

/// Defaults, then the config file, then individual flags.
pub fn optimizer_config(
    file: Option<&Path>,
    restarts: Option<usize>,
    seed: Option<u64>,
    tol: Option<f64>,
    max_iters: Option<usize>,
) -> Result<OptimizerConfig> {
    let mut cfg = match file {
        Some(path) => OptimizerConfig::load(path).map_err(|e| anyhow!("config: {e}"))?,
        None => OptimizerConfig::default(),
    };
    if let Some(r) = restarts {
        cfg.restarts = r;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = tol {
        cfg.tol_outer = t;
    }
    if let Some(m) = max_iters {
        cfg.max_outer_iters = m;
    }
    cfg.validate().map_err(|e| anyhow!("config: {e}"))?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(
            parse_grid("0:1:0.25").unwrap(),
            vec![0.0, 0.25, 0.5, 0.75, 1.0]
        );
        let g = parse_grid("0:1:0.05").unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(g[6], 0.3);
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("0:1.5:0.5").is_err());
    }

    #[test]
    fn layout_errors_name_the_field() {
        let e = parse_layout("2,x,2").unwrap_err().to_string();
        assert!(e.contains("layout"), "{e}");
        assert_eq!(parse_layout("2,2,2").unwrap(), SystemLayout::qubits_2_2_2());
    }

    #[test]
    fn presets_resolve() {
        for name in PRESETS {
            let src = ChannelSource::resolve(name).unwrap();
            let ch = src
                .system_channel(0.2, &SystemLayout::qubits_2_2_2())
                .unwrap();
            assert_eq!(ch.dim(), 8);
            assert!(ch.tp_defect() < 1e-12);
        }
        assert!(ChannelSource::resolve("no-such-channel").is_err());
    }

    #[test]
    fn terms_match_kraus() {
        for preset in [Preset::BitFlip, Preset::BitPhaseFlip, Preset::Depolarizing] {
            let ch = preset.qubit_channel(0.3).unwrap();
            let terms = preset.unitary_terms(0.3);
            assert_eq!(ch.len(), terms.len());
            for (k, (w, u)) in ch.kraus().iter().zip(&terms) {
                assert!(k.max_abs_diff(&u.scale_real(w.sqrt())) < 1e-15);
            }
        }
    }
}
