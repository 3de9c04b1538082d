//! Perfect error correction for channels that apply one of two unitaries,
//! by teleporting the data through one ebit.
//!
//! For `E(ρ) = (1−p)·V₁ρV₁† + p·V₂ρV₂†` Alice undoes `V₁` in advance, which
//! leaves the noise as either the identity or `W = V₂V₁†`. She then maps
//! the Bell basis of (data, encoding) onto an eigenbasis of `W`, so the
//! noise only multiplies each branch by a phase. Bob measures in that
//! eigenbasis and applies the Pauli correction of ordinary teleportation
//! to the recovery qubit.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde_json::Value;

use crate::channel_io::fmt_f64;
use crate::channels::{bell_basis, entangler, lift_iid, random_unitary, KrausChannel};
use crate::error::{dim_mismatch, Error, Result};
use crate::gates::{pauli_x, pauli_z};
use crate::layout::{Factor, SystemLayout};
use crate::linalg::{eigh, kron};
use crate::matrix::{c, CMatrix};
use crate::optimizer::fidelity_data;

/// Mixing weight used to turn the unitary `W` into one Hermitian matrix
/// `(W+W†)/2 + α(W−W†)/2i` sharing its eigenvectors.
const MIX_WEIGHTS: [f64; 4] = [
    0.617_273_912_3,
    1.414_927_353_1,
    -0.383_619_477_2,
    2.903_158_614_7,
];

/// `E(ρ) = (1−p)·V₁ρV₁† + p·V₂ρV₂†`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoUnitaryChannel {
    v1: CMatrix,
    v2: CMatrix,
    p: f64,
}

impl TwoUnitaryChannel {
    pub fn new(v1: CMatrix, v2: CMatrix, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProbability(p));
        }
        let n = v1.ensure_square()?;
        if v2.shape() != (n, n) {
            return Err(dim_mismatch(
                "V₂",
                format!("{n}x{n}"),
                format!("{}x{}", v2.rows(), v2.cols()),
            ));
        }
        if n != 2 && n != 4 {
            return Err(Error::InvalidLayout(format!(
                "two-unitary channels act on one or two qubits, got dimension {n}"
            )));
        }
        for v in [&v1, &v2] {
            let defect = v.isometry_defect();
            if defect > 1e-10 {
                return Err(Error::NotUnitary(defect));
            }
        }
        Ok(Self { v1, v2, p })
    }

    /// Bit flip on every transmitted qubit: `V₁ = I`, `V₂ = σ_x`.
    pub fn bit_flip(p: f64) -> Result<Self> {
        Self::new(CMatrix::identity(2), pauli_x(), p)
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(CMatrix::identity(dim), CMatrix::identity(dim), 0.0)
    }

    pub fn v1(&self) -> &CMatrix {
        &self.v1
    }

    pub fn v2(&self) -> &CMatrix {
        &self.v2
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.v1.rows()
    }

    /// The channel on its own dimension.
    pub fn kraus(&self) -> Result<KrausChannel> {
        random_unitary(&[(1.0 - self.p, self.v1.clone()), (self.p, self.v2.clone())])
    }

    /// Noise on the full system: a one-qubit channel acts independently on
    /// data and encoding qubits, a two-qubit channel acts on the pair
    /// jointly. The recovery qubit is untouched in both cases.
    pub fn system_noise(&self, layout: &SystemLayout) -> Result<KrausChannel> {
        let base = self.kraus()?;
        match self.dim() {
            2 => lift_iid(&base, layout),
            _ => {
                if layout.d_code() != 4 {
                    return Err(dim_mismatch("transmitted dimension", 4, layout.d_code()));
                }
                base.tensor_identity(layout.d_rec())
            }
        }
    }

    /// The two-unitary form of a channel whose nonzero Kraus operators are
    /// multiples of at most two unitaries.
    pub fn from_channel(channel: &KrausChannel) -> Option<Self> {
        let terms = unitary_mixture(channel)?;
        match terms.as_slice() {
            [(_, v)] => Self::new(v.clone(), v.clone(), 0.0).ok(),
            [(_, v1), (p, v2)] => Self::new(v1.clone(), v2.clone(), *p).ok(),
            _ => None,
        }
    }

    /// Reads `{"dim": n, "p": p, "v1": [[re, im], ...], "v2": [...]}` with
    /// row-major entries.
    pub fn from_json(text: &str) -> Result<Self> {
        let root: Value = serde_json::from_str(text)?;
        let dim = root
            .get("dim")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Schema("\"dim\" must be a positive integer".into()))?
            as usize;
        let p = root
            .get("p")
            .and_then(Value::as_f64)
            .ok_or_else(|| Error::Schema("\"p\" must be a number".into()))?;
        let read = |key: &str| -> Result<CMatrix> {
            let entries = root.get(key).and_then(Value::as_array).ok_or_else(|| {
                Error::Schema(format!("\"{key}\" must be an array of [re, im] pairs"))
            })?;
            if entries.len() != dim * dim {
                return Err(Error::Schema(format!(
                    "\"{key}\" has {} entries, expected {}",
                    entries.len(),
                    dim * dim
                )));
            }
            let data = entries
                .iter()
                .map(|e| match e.as_array().map(Vec::as_slice) {
                    Some([re, im]) => Some(c(re.as_f64()?, im.as_f64()?)),
                    _ => None,
                })
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| {
                    Error::Schema(format!("\"{key}\" has an entry that is not [re, im]"))
                })?;
            CMatrix::from_vec(dim, dim, data)
        };
        Self::new(read("v1")?, read("v2")?, p)
    }

    pub fn to_json(&self) -> String {
        let entries = |m: &CMatrix| {
            m.as_slice()
                .iter()
                .map(|z| format!("[{}, {}]", fmt_f64(z.re), fmt_f64(z.im)))
                .collect::<Vec<_>>()
                .join(", ")
        };
        format!(
            "{{\n  \"dim\": {},\n  \"p\": {},\n  \"v1\": [{}],\n  \"v2\": [{}]\n}}\n",
            self.dim(),
            fmt_f64(self.p),
            entries(&self.v1),
            entries(&self.v2)
        )
    }
}

/// Eigenvectors of `W = V₂V₁†` with their eigenvalues.
#[derive(Clone, Debug)]
pub struct Eigenbasis {
    /// Unit column vectors.
    pub vectors: Vec<CMatrix>,
    /// Unit-modulus eigenvalues, in the order of `vectors`.
    pub phases: Vec<Complex64>,
}

/// Writes a channel as `Σ_i p_i V_i ρ V_i†` when every Kraus operator is a
/// multiple of a unitary. Zero operators are dropped.
pub fn unitary_mixture(channel: &KrausChannel) -> Option<Vec<(f64, CMatrix)>> {
    let dim = channel.dim();
    let mut terms = Vec::new();
    for k in channel.kraus() {
        let gram = k.adjoint().matmul(k);
        let w = gram.trace().re / dim as f64;
        if w <= 1e-14 {
            continue;
        }
        if gram.max_abs_diff(&CMatrix::identity(dim).scale_real(w)) > 1e-10 {
            return None;
        }
        terms.push((w, k.scale_real(1.0 / w.sqrt())));
    }
    Some(terms)
}

/// Orthonormal eigenbasis of `V₂V₁†`, ordered by eigenvalue angle in
/// `[0, 2π)`. Each vector's largest entry is real and positive.
pub fn eigenbasis(channel: &TwoUnitaryChannel) -> Result<Eigenbasis> {
    let w = channel.v2.matmul(&channel.v1.adjoint());
    unitary_eigenbasis(&w)
}

fn unitary_eigenbasis(w: &CMatrix) -> Result<Eigenbasis> {
    let n = w.rows();
    let w_adj = w.adjoint();
    let re_part = (w + &w_adj).scale_real(0.5);
    let im_part = (w - &w_adj).scale(c(0.0, -0.5));
    for alpha in MIX_WEIGHTS {
        let a = (&re_part + &im_part.scale_real(alpha)).hermitian_part();
        let e = eigh(&a)?;
        let mut pairs: Vec<(f64, CMatrix, Complex64)> = Vec::with_capacity(n);
        let mut ok = true;
        for j in 0..n {
            let v = e.vectors.column_at(j);
            let wv = w.matmul(&v);
            let lambda = v.inner(&wv);
            if (&wv - &v.scale(lambda)).max_abs() > 1e-9 {
                ok = false;
                break;
            }
            let lambda = lambda / lambda.norm();
            let mut angle = lambda.arg().rem_euclid(std::f64::consts::TAU);
            if std::f64::consts::TAU - angle < 1e-9 {
                angle = 0.0;
            }
            pairs.push((angle, v, lambda));
        }
        if ok {
            // stable: equal angles keep the decomposition's order
            pairs.sort_by(|a, b| {
                if (a.0 - b.0).abs() < 1e-9 {
                    std::cmp::Ordering::Equal
                } else {
                    a.0.total_cmp(&b.0)
                }
            });
            let (vectors, phases) = pairs.into_iter().map(|(_, v, l)| (v, l)).unzip();
            return Ok(Eigenbasis { vectors, phases });
        }
    }
    Err(Error::NoConvergence {
        what: "unitary eigen",
    })
}

/// The teleportation-based encoding and recovery for layout `(2, 2, 2)`.
#[derive(Clone, Debug)]
pub struct TeleportProtocol {
    /// `V₁†` on the transmitted pair (per qubit for one-qubit channels).
    pub pre_rotation: CMatrix,
    /// `C = Σ_k |w_k⟩⟨B_k|` on (data, encoding).
    pub encoding: CMatrix,
    /// The measurement basis `w_k` on the transmitted pair.
    pub basis: Vec<CMatrix>,
    /// Pauli applied to the recovery qubit after outcome `k`.
    pub corrections: Vec<CMatrix>,
    /// `|00⟩⟨w_k| ⊗ correction_k`, one operator per outcome.
    pub recovery_kraus: Vec<CMatrix>,
    pub layout: SystemLayout,
}

impl TeleportProtocol {
    /// What Alice applies before transmission: pre-rotation after encoding.
    pub fn transmitted_encoding(&self) -> CMatrix {
        self.pre_rotation.matmul(&self.encoding)
    }

    /// Recovery operators stacked vertically.
    pub fn recovery_stack(&self) -> CMatrix {
        CMatrix::vstack(&self.recovery_kraus)
    }

    /// Coherent version of the recovery: the measurement becomes the
    /// basis change `|w_k⟩ ↦ |k⟩` and the corrections become controlled
    /// gates, giving a single unitary.
    pub fn deferred_recovery(&self) -> CMatrix {
        let mut r = CMatrix::zeros(8, 8);
        for (k, (w, corr)) in self.basis.iter().zip(&self.corrections).enumerate() {
            let relabel = CMatrix::basis_ket(4, k).outer(w);
            r += &kron(&relabel, corr).expect("8x8");
        }
        r
    }

    /// Plain-text gate list, one gate per line.
    pub fn circuit(&self) -> String {
        let mut out = String::new();
        out.push_str("# qubits: q0 data, q1 encoding, q2 recovery\n");
        out.push_str("H q1\nCNOT q1 q2\n");
        let _ = writeln!(
            out,
            "UNITARY q0 q1 {}",
            matrix_literal(&self.transmitted_encoding())
        );
        out.push_str("CHANNEL q0 q1\n");
        let rotate = CMatrix::vstack(&self.basis.iter().map(CMatrix::adjoint).collect::<Vec<_>>());
        let _ = writeln!(out, "UNITARY q0 q1 {}", matrix_literal(&rotate));
        out.push_str("MEASURE q0 -> m0\nMEASURE q1 -> m1\n");
        for (k, corr) in self.corrections.iter().enumerate() {
            let gates = pauli_label(corr);
            if !gates.is_empty() {
                let _ = writeln!(out, "IF m0={} m1={} {}", k >> 1, k & 1, gates);
            }
        }
        out
    }
}

fn matrix_literal(m: &CMatrix) -> String {
    let rows: Vec<String> = (0..m.rows())
        .map(|i| {
            let cols: Vec<String> = (0..m.cols())
                .map(|j| {
                    let z = m[(i, j)];
                    format!("{:.6}{:+.6}i", z.re, z.im)
                })
                .collect();
            format!("[{}]", cols.join(", "))
        })
        .collect();
    format!("[{}]", rows.join(", "))
}

/// `X q2`, `Z q2`, both, or nothing, matching a correction up to phase.
fn pauli_label(corr: &CMatrix) -> String {
    let x = pauli_x();
    let z = pauli_z();
    let candidates = [
        (CMatrix::identity(2), ""),
        (x.clone(), "X q2"),
        (z.clone(), "Z q2"),
        (x.matmul(&z), "Z q2; X q2"),
    ];
    for (m, label) in candidates {
        let overlap = m.adjoint().trace_of_product(corr).norm();
        if (overlap - 2.0).abs() < 1e-9 {
            return label.to_string();
        }
    }
    format!("UNITARY q2 {}", matrix_literal(corr))
}

/// The Pauli `P_k` with `|ψ⟩|Φ⁺⟩ = ½ Σ_k |B_k⟩ ⊗ P_k|ψ⟩`, i.e.
/// `P_k = 2·(⟨B_k| ⊗ I)(I ⊗ |Φ⁺⟩)`.
fn teleport_paulis() -> Vec<CMatrix> {
    let bells = bell_basis();
    let phi = &bells[0];
    let lift = kron(&CMatrix::identity(2), phi).expect("8x2");
    bells
        .iter()
        .map(|b| {
            kron(&b.adjoint(), &CMatrix::identity(2))
                .expect("2x8")
                .matmul(&lift)
                .scale_real(2.0)
        })
        .collect()
}

pub fn build_protocol(
    channel: &TwoUnitaryChannel,
    layout: &SystemLayout,
) -> Result<TeleportProtocol> {
    if *layout != SystemLayout::qubits_2_2_2() {
        return Err(Error::InvalidLayout(format!(
            "teleportation needs layout 2,2,2, got {layout}"
        )));
    }
    let basis = eigenbasis(channel)?;
    let (pre_rotation, vectors) = match channel.dim() {
        2 => {
            let v1a = channel.v1.adjoint();
            let pre = kron(&v1a, &v1a)?;
            let mut prods = Vec::with_capacity(4);
            for a in &basis.vectors {
                for b in &basis.vectors {
                    prods.push(kron(a, b)?);
                }
            }
            (pre, prods)
        }
        _ => (channel.v1.adjoint(), basis.vectors),
    };
    let bells = bell_basis();
    let mut encoding = CMatrix::zeros(4, 4);
    for (w, b) in vectors.iter().zip(&bells) {
        encoding += &w.outer(b);
    }
    let corrections: Vec<CMatrix> = teleport_paulis().iter().map(CMatrix::adjoint).collect();
    let reset = CMatrix::basis_ket(4, 0);
    let recovery_kraus = vectors
        .iter()
        .zip(&corrections)
        .map(|(w, corr)| kron(&reset.outer(w), corr))
        .collect::<Result<Vec<_>>>()?;
    Ok(TeleportProtocol {
        pre_rotation,
        encoding,
        basis: vectors,
        corrections,
        recovery_kraus,
        layout: *layout,
    })
}

/// Entanglement fidelity of data → recovery qubit when `noise` acts
/// between encoding and recovery.
pub fn verify_protocol(protocol: &TeleportProtocol, noise: &KrausChannel) -> Result<f64> {
    verify_with_recovery(protocol, noise, &protocol.recovery_stack())
}

/// Same as [`verify_protocol`] with the coherent recovery.
pub fn verify_deferred(protocol: &TeleportProtocol, noise: &KrausChannel) -> Result<f64> {
    verify_with_recovery(protocol, noise, &protocol.deferred_recovery())
}

fn verify_with_recovery(
    protocol: &TeleportProtocol,
    noise: &KrausChannel,
    r_stack: &CMatrix,
) -> Result<f64> {
    let layout = protocol.layout;
    if noise.dim() != layout.d() {
        return Err(dim_mismatch("noise channel", layout.d(), noise.dim()));
    }
    let c_full = kron(
        &protocol.transmitted_encoding(),
        &CMatrix::identity(layout.d_rec()),
    )?;
    let u = entangler(&layout)?;
    fidelity_data(
        r_stack,
        noise,
        &c_full,
        &u,
        &layout,
        Factor::Recovery,
        &CMatrix::identity(2),
    )
}

/// For a mixture of unitaries that is not a two-unitary channel, builds the
/// protocol for every ordered pair of its terms and reports the best
/// fidelity reached against the true noise, with the pair's indices.
pub fn best_pair_fidelity(
    terms: &[(f64, CMatrix)],
    layout: &SystemLayout,
    noise: &KrausChannel,
) -> Result<(f64, usize, usize)> {
    let mut best = (f64::NEG_INFINITY, 0, 0);
    for i in 0..terms.len() {
        for j in 0..terms.len() {
            if i == j {
                continue;
            }
            let pair = TwoUnitaryChannel::new(terms[i].1.clone(), terms[j].1.clone(), 0.5)?;
            let f = verify_protocol(&build_protocol(&pair, layout)?, noise)?;
            if f > best.0 {
                best = (f, i, j);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::haar_random_unitary;
    use crate::matrix::ONE;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ket(entries: &[f64]) -> CMatrix {
        CMatrix::from_real(entries.len(), 1, entries)
    }

    #[test]
    fn eigenbasis_examples() {
        let id = eigenbasis(&TwoUnitaryChannel::identity(2).unwrap()).unwrap();
        assert!(id.vectors[0].max_abs_diff(&ket(&[1.0, 0.0])) < 1e-12);
        assert!(id.vectors[1].max_abs_diff(&ket(&[0.0, 1.0])) < 1e-12);
        assert!(id.phases.iter().all(|z| (z - ONE).norm() < 1e-12));

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bf = eigenbasis(&TwoUnitaryChannel::bit_flip(0.3).unwrap()).unwrap();
        assert!(bf.vectors[0].max_abs_diff(&ket(&[h, h])) < 1e-12);
        assert!(bf.vectors[1].max_abs_diff(&ket(&[h, -h])) < 1e-12);
        assert!((bf.phases[0] - ONE).norm() < 1e-12);
        assert!((bf.phases[1] + ONE).norm() < 1e-12);

        let z = eigenbasis(&TwoUnitaryChannel::new(CMatrix::identity(2), pauli_z(), 0.5).unwrap())
            .unwrap();
        assert!(z.vectors[0].max_abs_diff(&ket(&[1.0, 0.0])) < 1e-12);
        assert!(z.vectors[1].max_abs_diff(&ket(&[0.0, 1.0])) < 1e-12);
    }

    #[test]
    fn bit_flip_encoding_matches_plus_minus_products() {
        let protocol = build_protocol(
            &TwoUnitaryChannel::bit_flip(0.2).unwrap(),
            &SystemLayout::qubits_2_2_2(),
        )
        .unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = ket(&[h, h]);
        let minus = ket(&[h, -h]);
        let want = [
            (&plus, &plus),
            (&plus, &minus),
            (&minus, &plus),
            (&minus, &minus),
        ];
        let bells = bell_basis();
        for (b, (a, c2)) in bells.iter().zip(want) {
            let img = protocol.encoding.matmul(b);
            assert!(img.max_abs_diff(&kron(a, c2).unwrap()) < 1e-12);
        }
        assert!(protocol.encoding.is_unitary(1e-10));
    }

    #[test]
    fn corrections_are_the_teleportation_paulis() {
        let p = teleport_paulis();
        let x = pauli_x();
        let z = pauli_z();
        assert!(p[0].max_abs_diff(&CMatrix::identity(2)) < 1e-12);
        assert!(p[1].max_abs_diff(&z) < 1e-12);
        assert!(p[2].max_abs_diff(&x) < 1e-12);
        assert!(p.iter().all(|m| m.is_unitary(1e-12)));
    }

    #[test]
    fn recovery_is_trace_preserving() {
        let protocol = build_protocol(
            &TwoUnitaryChannel::bit_flip(0.4).unwrap(),
            &SystemLayout::qubits_2_2_2(),
        )
        .unwrap();
        let mut sum = CMatrix::zeros(8, 8);
        for k in &protocol.recovery_kraus {
            sum += &k.adjoint().matmul(k);
        }
        assert!(sum.max_abs_diff(&CMatrix::identity(8)) < 1e-10);
        assert!(protocol.deferred_recovery().is_unitary(1e-10));
    }

    #[test]
    fn bit_flip_is_corrected_for_every_p() {
        let layout = SystemLayout::qubits_2_2_2();
        for i in 0..=10 {
            let ch = TwoUnitaryChannel::bit_flip(i as f64 / 10.0).unwrap();
            let protocol = build_protocol(&ch, &layout).unwrap();
            let noise = ch.system_noise(&layout).unwrap();
            assert!((verify_protocol(&protocol, &noise).unwrap() - 1.0).abs() < 1e-9);
            assert!((verify_deferred(&protocol, &noise).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn random_joint_channels_are_corrected() {
        let layout = SystemLayout::qubits_2_2_2();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let ch = TwoUnitaryChannel::new(
                haar_random_unitary(4, &mut rng),
                haar_random_unitary(4, &mut rng),
                rng.random_range(0.0..1.0),
            )
            .unwrap();
            let protocol = build_protocol(&ch, &layout).unwrap();
            let f = verify_protocol(&protocol, &ch.system_noise(&layout).unwrap()).unwrap();
            assert!((f - 1.0).abs() < 1e-9, "{f}");
        }
    }

    #[test]
    fn fixed_known_unitary_is_undone() {
        let layout = SystemLayout::qubits_2_2_2();
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let v = haar_random_unitary(4, &mut rng);
        let ch = TwoUnitaryChannel::new(v.clone(), v, 0.6).unwrap();
        let protocol = build_protocol(&ch, &layout).unwrap();
        let f = verify_protocol(&protocol, &ch.system_noise(&layout).unwrap()).unwrap();
        assert!((f - 1.0).abs() < 1e-9);
    }

    #[test]
    fn noiseless_is_exact() {
        let layout = SystemLayout::qubits_2_2_2();
        let protocol = build_protocol(&TwoUnitaryChannel::identity(2).unwrap(), &layout).unwrap();
        let f = verify_protocol(&protocol, &KrausChannel::identity(8)).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn depolarizing_is_not_corrected() {
        let layout = SystemLayout::qubits_2_2_2();
        let p = 0.3;
        let w = p / 3.0;
        let terms = vec![
            (1.0 - p, CMatrix::identity(2)),
            (w, pauli_x()),
            (w, crate::gates::pauli_y()),
            (w, pauli_z()),
        ];
        let noise = lift_iid(&random_unitary(&terms).unwrap(), &layout).unwrap();
        let (f, _, _) = best_pair_fidelity(&terms, &layout, &noise).unwrap();
        assert!(f < 1.0 - 1e-3, "{f}");
    }

    #[test]
    fn rejects_other_layouts() {
        let ch = TwoUnitaryChannel::bit_flip(0.1).unwrap();
        assert!(build_protocol(&ch, &SystemLayout::new(2, 2, 1).unwrap()).is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let ch = TwoUnitaryChannel::new(
            haar_random_unitary(4, &mut rng),
            haar_random_unitary(4, &mut rng),
            0.25,
        )
        .unwrap();
        let back = TwoUnitaryChannel::from_json(&ch.to_json()).unwrap();
        assert_eq!(back, ch);
        assert!(
            TwoUnitaryChannel::from_json(r#"{"dim": 2, "p": 0.1, "v1": [[1,0]], "v2": []}"#)
                .is_err()
        );
    }

    #[test]
    fn circuit_mentions_corrections() {
        let protocol = build_protocol(
            &TwoUnitaryChannel::bit_flip(0.2).unwrap(),
            &SystemLayout::qubits_2_2_2(),
        )
        .unwrap();
        let text = protocol.circuit();
        assert!(text.contains("IF m0=1 m1=0 X q2"));
        assert!(text.contains("IF m0=0 m1=1 Z q2"));
        assert!(text.starts_with("# qubits"));
    }

    #[test]
    fn mixtures_are_recognized() {
        let bf = crate::channels::bit_flip(0.3).unwrap();
        let two = TwoUnitaryChannel::from_channel(&bf).unwrap();
        assert!((two.p() - 0.3).abs() < 1e-12);
        assert!(two.v2().max_abs_diff(&pauli_x()) < 1e-12);
        let dep = crate::channels::depolarizing(0.3).unwrap();
        assert_eq!(unitary_mixture(&dep).unwrap().len(), 4);
        assert!(TwoUnitaryChannel::from_channel(&dep).is_none());
        let clean = crate::channels::bit_flip(0.0).unwrap();
        assert_eq!(TwoUnitaryChannel::from_channel(&clean).unwrap().p(), 0.0);
        let amp = KrausChannel::new(
            2,
            vec![
                CMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, 0.6f64.sqrt()]),
                CMatrix::from_real(2, 2, &[0.0, 0.4f64.sqrt(), 0.0, 0.0]),
            ],
        )
        .unwrap();
        assert!(unitary_mixture(&amp).is_none());
    }
}
