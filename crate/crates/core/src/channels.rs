//! Kraus-form quantum channels, standard noise models, the ebit-preparing
//! entangler, the Bell basis and Pauli twirling.

use serde_json::{Map, Value};

use crate::error::{dim_mismatch, Error, Result};
use crate::gates::{cnot, embed, hadamard, log2_exact, pauli_x, pauli_y, pauli_z, swap_qubits};
use crate::layout::{Factor, SystemLayout};
use crate::linalg::{eigvalsh, kron, kron_unchecked};
use crate::matrix::{c, CMatrix, ZERO};

/// Trace-preservation tolerance applied to constructed channels.
pub const TP_TOL: f64 = 1e-10;
/// Trace-preservation tolerance applied to channels loaded from files.
pub const TP_TOL_LOAD: f64 = 1e-8;

/// A validated CPTP map `ρ ↦ Σ_e E_e ρ E_e†`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    dim: usize,
    kraus: Vec<CMatrix>,
    name: Option<String>,
    params: Map<String, Value>,
}

impl KrausChannel {
    pub fn new(dim: usize, kraus: Vec<CMatrix>) -> Result<Self> {
        Self::with_tolerance(dim, kraus, TP_TOL)
    }

    pub fn with_tolerance(dim: usize, kraus: Vec<CMatrix>, tol: f64) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::Schema(
                "a channel needs at least one Kraus operator".into(),
            ));
        }
        if kraus.len() > dim * dim {
            return Err(Error::Schema(format!(
                "{} Kraus operators exceed the bound d^2 = {}",
                kraus.len(),
                dim * dim
            )));
        }
        for k in &kraus {
            if k.shape() != (dim, dim) {
                return Err(dim_mismatch(
                    "Kraus operator",
                    format!("{dim}x{dim}"),
                    format!("{}x{}", k.rows(), k.cols()),
                ));
            }
            if !k.all_finite() {
                return Err(Error::Schema(
                    "Kraus operator has non-finite entries".into(),
                ));
            }
        }
        let defect = tp_defect(dim, &kraus);
        if defect > tol {
            return Err(Error::NotTracePreserving {
                defect,
                tolerance: tol,
            });
        }
        Ok(Self {
            dim,
            kraus,
            name: None,
            params: Map::new(),
        })
    }

    /// The noiseless channel on `dim` dimensions.
    pub fn identity(dim: usize) -> Self {
        Self::new(dim, vec![CMatrix::identity(dim)])
            .expect("identity is trace preserving")
            .named("identity")
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = Some(name.to_string());
        self
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), Value::from(value));
        self
    }

    pub(crate) fn with_params(mut self, params: Map<String, Value>) -> Self {
        self.params = params;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    /// Number of Kraus operators, `m_E`.
    pub fn len(&self) -> usize {
        self.kraus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kraus.is_empty()
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn params(&self) -> &Map<String, Value> {
        &self.params
    }

    /// Max deviation of `Σ E†E` from the identity.
    pub fn tp_defect(&self) -> f64 {
        tp_defect(self.dim, &self.kraus)
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        assert_eq!(
            rho.shape(),
            (self.dim, self.dim),
            "state dimension mismatch"
        );
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for k in &self.kraus {
            out += &k.matmul(rho).matmul(&k.adjoint());
        }
        out
    }

    /// The `d × m_E·d` block row `[E₁ … E_m]`.
    pub fn block_row(&self) -> CMatrix {
        CMatrix::hstack(&self.kraus)
    }

    /// `self ⊗ I_extra`, leaving a trailing subsystem untouched.
    pub fn tensor_identity(&self, extra: usize) -> Result<Self> {
        let id = CMatrix::identity(extra);
        let kraus = self
            .kraus
            .iter()
            .map(|k| kron(k, &id))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Self::new(self.dim * extra, kraus)?;
        out.name = self.name.clone();
        out.params = self.params.clone();
        Ok(out)
    }
}

fn tp_defect(dim: usize, kraus: &[CMatrix]) -> f64 {
    let mut sum = CMatrix::zeros(dim, dim);
    for k in kraus {
        sum += &k.adjoint().matmul(k);
    }
    sum.max_abs_diff(&CMatrix::identity(dim))
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::InvalidProbability(p));
    }
    Ok(())
}

/// `{√(1−p)·I, √p·σ_x}`.
pub fn bit_flip(p: f64) -> Result<KrausChannel> {
    check_probability(p)?;
    let k = vec![
        CMatrix::identity(2).scale_real((1.0 - p).sqrt()),
        pauli_x().scale_real(p.sqrt()),
    ];
    Ok(KrausChannel::new(2, k)?
        .named("bit-flip")
        .with_param("p", p))
}

/// `{√(1−p)·I, √(p/2)·σ_x, √(p/2)·σ_z}`.
pub fn bit_phase_flip(p: f64) -> Result<KrausChannel> {
    check_probability(p)?;
    let k = vec![
        CMatrix::identity(2).scale_real((1.0 - p).sqrt()),
        pauli_x().scale_real((p / 2.0).sqrt()),
        pauli_z().scale_real((p / 2.0).sqrt()),
    ];
    Ok(KrausChannel::new(2, k)?
        .named("bit-phase-flip")
        .with_param("p", p))
}

/// `{√(1−p)·I, √(p/3)·σ_x, √(p/3)·σ_y, √(p/3)·σ_z}`.
pub fn depolarizing(p: f64) -> Result<KrausChannel> {
    check_probability(p)?;
    let w = (p / 3.0).sqrt();
    let k = vec![
        CMatrix::identity(2).scale_real((1.0 - p).sqrt()),
        pauli_x().scale_real(w),
        pauli_y().scale_real(w),
        pauli_z().scale_real(w),
    ];
    Ok(KrausChannel::new(2, k)?
        .named("depolarizing")
        .with_param("p", p))
}

/// `ρ ↦ Σ_i p_i V_i ρ V_i†` with Kraus operators `√p_i · V_i`.
pub fn random_unitary(terms: &[(f64, CMatrix)]) -> Result<KrausChannel> {
    let (_, first) = terms
        .first()
        .ok_or_else(|| Error::Schema("random unitary channel needs at least one term".into()))?;
    let dim = first.ensure_square()?;
    let mut total = 0.0;
    let mut kraus = Vec::with_capacity(terms.len());
    for (p, v) in terms {
        check_probability(*p)?;
        if v.shape() != (dim, dim) {
            return Err(dim_mismatch(
                "random unitary term",
                format!("{dim}x{dim}"),
                format!("{}x{}", v.rows(), v.cols()),
            ));
        }
        let defect = v.isometry_defect();
        if defect > 1e-10 {
            return Err(Error::NotUnitary(defect));
        }
        total += p;
        kraus.push(v.scale_real(p.sqrt()));
    }
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::ProbabilitySum(total));
    }
    Ok(KrausChannel::new(dim, kraus)?.named("random-unitary"))
}

/// Independent copies of a single-qubit channel on every data and encoding
/// qubit, identity on the recovery factor.
pub fn lift_iid(base: &KrausChannel, layout: &SystemLayout) -> Result<KrausChannel> {
    if base.dim() != 2 {
        return Err(Error::InvalidLayout(format!(
            "i.i.d. lifting needs a single-qubit base channel, got dimension {}",
            base.dim()
        )));
    }
    let n_dat = layout
        .qubits_in(Factor::Data)
        .ok_or_else(|| Error::InvalidLayout("d_dat is not a power of two".into()))?;
    let n_enc = layout
        .qubits_in(Factor::Encoding)
        .ok_or_else(|| Error::InvalidLayout("d_enc is not a power of two".into()))?;
    let n = n_dat + n_enc;
    let mut ops: Vec<CMatrix> = vec![CMatrix::identity(1)];
    for _ in 0..n {
        ops = ops
            .iter()
            .flat_map(|acc| base.kraus().iter().map(move |k| kron_unchecked(acc, k)))
            .collect();
    }
    let rec = CMatrix::identity(layout.d_rec());
    let kraus = ops
        .iter()
        .map(|k| kron(k, &rec))
        .collect::<Result<Vec<_>>>()?;
    let mut out = KrausChannel::new(layout.d(), kraus)?;
    out.name = base.name.clone().map(|n| format!("{n} (iid)"));
    out.params = base.params.clone();
    Ok(out)
}

/// `U = I_dat ⊗ U_anc`: Hadamard on each encoding qubit followed by a CNOT
/// onto the matching recovery qubit, preparing one ebit per pair from
/// `|0…0⟩`.
pub fn entangler(layout: &SystemLayout) -> Result<CMatrix> {
    if !layout.supports_entanglement() {
        return Err(Error::InvalidLayout(format!(
            "entangler needs d_enc = d_rec, got {} and {}",
            layout.d_enc(),
            layout.d_rec()
        )));
    }
    let pairs = log2_exact(layout.d_enc())
        .ok_or_else(|| Error::InvalidLayout("d_enc is not a power of two".into()))?;
    let n = 2 * pairs;
    let mut u_anc = CMatrix::identity(1 << n);
    for k in 0..pairs {
        let step = embed(&cnot(), &[k, pairs + k], n).matmul(&embed(&hadamard(), &[k], n));
        u_anc = step.matmul(&u_anc);
    }
    kron(&CMatrix::identity(layout.d_dat()), &u_anc)
}

/// Bell basis `B₁ = (|00⟩+|11⟩)/√2`, `B₂ = (|00⟩−|11⟩)/√2`,
/// `B₃ = (|10⟩+|01⟩)/√2`, `B₄ = (|10⟩−|01⟩)/√2` as column vectors.
pub fn bell_basis() -> [CMatrix; 4] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let v = |a: [f64; 4]| CMatrix::column(&a.map(|x| c(x * h, 0.0)));
    // amplitudes ordered |00>, |01>, |10>, |11>
    [
        v([1.0, 0.0, 0.0, 1.0]),
        v([1.0, 0.0, 0.0, -1.0]),
        v([0.0, 1.0, 1.0, 0.0]),
        v([0.0, -1.0, 1.0, 0.0]),
    ]
}

/// Checks Hermiticity, unit trace and positivity to `tol`.
pub fn validate_density(rho: &CMatrix, tol: f64) -> Result<()> {
    rho.ensure_square()?;
    let herm = rho.hermitian_defect();
    if herm > tol {
        return Err(Error::InvalidDensityMatrix(format!(
            "not Hermitian (defect {herm:e})"
        )));
    }
    let tr = rho.trace();
    if (tr - c(1.0, 0.0)).norm() > tol {
        return Err(Error::InvalidDensityMatrix(format!("trace is {tr}")));
    }
    let min = eigvalsh(rho)?[0];
    if min < -tol {
        return Err(Error::InvalidDensityMatrix(format!(
            "negative eigenvalue {min:e}"
        )));
    }
    Ok(())
}

/// Pauli twirl `(ρ + σ_xρσ_x + σ_yρσ_y + σ_zρσ_z)/4` of a qubit state.
pub fn twirl(rho: &CMatrix) -> Result<CMatrix> {
    if rho.shape() != (2, 2) {
        return Err(dim_mismatch(
            "twirl",
            "2x2",
            format!("{}x{}", rho.rows(), rho.cols()),
        ));
    }
    validate_density(rho, 1e-10)?;
    let mut out = rho.clone();
    for p in [pauli_x(), pauli_y(), pauli_z()] {
        out += &p.matmul(rho).matmul(&p);
    }
    Ok(out.scale_real(0.25))
}

/// Which unitary the whole error-correction procedure should implement.
#[derive(Clone, Debug, PartialEq)]
pub enum TargetSpec {
    Identity,
    /// Moves the data into the recovery factor.
    SwapDataToRecovery,
    Custom(CMatrix),
}

impl TargetSpec {
    /// The target unitary `L` on the full system space.
    pub fn materialize(&self, layout: &SystemLayout) -> Result<CMatrix> {
        let d = layout.d();
        let l = match self {
            TargetSpec::Identity => CMatrix::identity(d),
            TargetSpec::SwapDataToRecovery => swap_data_recovery(layout)?,
            TargetSpec::Custom(m) => {
                if m.shape() != (d, d) {
                    return Err(dim_mismatch(
                        "custom target",
                        format!("{d}x{d}"),
                        format!("{}x{}", m.rows(), m.cols()),
                    ));
                }
                m.clone()
            }
        };
        let defect = l.isometry_defect();
        if defect > 1e-10 {
            return Err(Error::NotUnitary(defect));
        }
        Ok(l)
    }

    /// The factor that holds the data after the target acts.
    pub fn output_factor(&self) -> Factor {
        match self {
            TargetSpec::SwapDataToRecovery => Factor::Recovery,
            _ => Factor::Data,
        }
    }
}

fn swap_data_recovery(layout: &SystemLayout) -> Result<CMatrix> {
    let (dd, de, dr) = (layout.d_dat(), layout.d_enc(), layout.d_rec());
    if dd != dr {
        return Err(Error::InvalidLayout(format!(
            "swap target needs d_dat = d_rec, got {dd} and {dr}"
        )));
    }
    if let (Some(nd), Some(ne)) = (log2_exact(dd), log2_exact(de)) {
        // qubit-level construction when every factor is a qubit register
        if nd == 1 && ne <= 1 {
            return Ok(swap_qubits(0, nd + ne, 2 * nd + ne));
        }
    }
    let d = layout.d();
    let mut l = CMatrix::zeros(d, d);
    for a in 0..dd {
        for b in 0..de {
            for cc in 0..dr {
                let from = (a * de + b) * dr + cc;
                let to = (cc * de + b) * dr + a;
                l[(to, from)] = c(1.0, 0.0);
            }
        }
    }
    debug_assert!(l.as_slice().iter().filter(|z| **z != ZERO).count() == d);
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{haar_random_unitary, partial_trace};
    use crate::matrix::ONE;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ket0() -> CMatrix {
        CMatrix::basis_ket(2, 0)
    }

    fn random_density(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        let g = CMatrix::from_fn(n, n, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let rho = g.matmul(&g.adjoint());
        let t = rho.trace();
        rho.scale(t.inv())
    }

    #[test]
    fn bit_flip_examples() {
        let ch = bit_flip(0.0).unwrap();
        assert_eq!(ch.len(), 2);
        assert!(ch.tp_defect() < 1e-15);
        let rho = ket0().outer(&ket0());
        let flipped = bit_flip(1.0).unwrap().apply(&rho);
        assert!(flipped.max_abs_diff(&CMatrix::diag_real(&[0.0, 1.0])) < 1e-15);
        let half = bit_flip(0.5).unwrap().apply(&rho);
        assert!(half.max_abs_diff(&CMatrix::identity(2).scale_real(0.5)) < 1e-15);
        assert!(matches!(bit_flip(1.5), Err(Error::InvalidProbability(_))));
        assert!(bit_flip(-0.1).is_err());
    }

    #[test]
    fn bit_phase_flip_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random_density(&mut rng, 2);
        assert!(bit_phase_flip(0.0).unwrap().apply(&rho).max_abs_diff(&rho) < 1e-15);

        let sym = bit_phase_flip(2.0 / 3.0).unwrap().apply(&rho);
        let mut expected = rho.clone();
        for p in [pauli_x(), pauli_z()] {
            expected += &p.matmul(&rho).matmul(&p);
        }
        assert!(sym.max_abs_diff(&expected.scale_real(1.0 / 3.0)) < 1e-15);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = CMatrix::from_real(2, 1, &[h, h]);
        let out = bit_phase_flip(1.0).unwrap().apply(&plus.outer(&plus));
        assert!(out.max_abs_diff(&CMatrix::identity(2).scale_real(0.5)) < 1e-15);
    }

    #[test]
    fn depolarizing_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ch = depolarizing(0.75).unwrap();
        for _ in 0..10 {
            let rho = random_density(&mut rng, 2);
            assert!(
                ch.apply(&rho)
                    .max_abs_diff(&CMatrix::identity(2).scale_real(0.5))
                    < 1e-14
            );
        }
        let out = depolarizing(0.3).unwrap().apply(&ket0().outer(&ket0()));
        assert!(out.max_abs_diff(&CMatrix::diag_real(&[0.8, 0.2])) < 1e-15);
        let rho = random_density(&mut rng, 2);
        assert!(depolarizing(0.0).unwrap().apply(&rho).max_abs_diff(&rho) < 1e-15);
    }

    #[test]
    fn random_unitary_examples() {
        let id = random_unitary(&[(1.0, CMatrix::identity(2))]).unwrap();
        assert_eq!(id.kraus(), &[CMatrix::identity(2)]);
        let p = 0.3;
        let ru = random_unitary(&[(1.0 - p, CMatrix::identity(2)), (p, pauli_x())]).unwrap();
        assert_eq!(ru.kraus(), bit_flip(p).unwrap().kraus());

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let a: f64 = rng.random_range(0.0..1.0);
            let terms = vec![
                (a, haar_random_unitary(4, &mut rng)),
                (1.0 - a, haar_random_unitary(4, &mut rng)),
            ];
            let ch = random_unitary(&terms).unwrap();
            assert!(
                ch.apply(&CMatrix::identity(4))
                    .max_abs_diff(&CMatrix::identity(4))
                    < 1e-10
            );
        }
        assert!(matches!(
            random_unitary(&[(0.5, CMatrix::identity(2)), (0.4, pauli_x())]),
            Err(Error::ProbabilitySum(_))
        ));
        assert!(matches!(
            random_unitary(&[(1.0, CMatrix::diag_real(&[1.0, 2.0]))]),
            Err(Error::NotUnitary(_))
        ));
    }

    #[test]
    fn lift_bit_flip_layout_222() {
        let p = 0.2;
        let lifted = lift_iid(&bit_flip(p).unwrap(), &SystemLayout::qubits_2_2_2()).unwrap();
        assert_eq!(lifted.len(), 4);
        let id = CMatrix::identity(2);
        let x = pauli_x();
        let expected = [
            (1.0 - p, &id, &id),
            ((p * (1.0 - p)).sqrt(), &id, &x),
            (((1.0 - p) * p).sqrt(), &x, &id),
            (p, &x, &x),
        ];
        for (op, (w, a, b)) in lifted.kraus().iter().zip(expected) {
            let want = crate::linalg::kron_all(&[a, b, &id]).unwrap().scale_real(w);
            assert!(op.max_abs_diff(&want) < 1e-15);
        }
        assert!(lifted.tp_defect() < 1e-14);
        let id_lift = lift_iid(&KrausChannel::identity(2), &SystemLayout::qubits_2_2_2()).unwrap();
        assert_eq!(id_lift.kraus(), &[CMatrix::identity(8)]);
    }

    #[test]
    fn lift_tp_for_random_bases() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let layout = SystemLayout::new(2, 2, 2).unwrap();
        for _ in 0..20 {
            let a: f64 = rng.random_range(0.0..1.0);
            let base = random_unitary(&[
                (a, haar_random_unitary(2, &mut rng)),
                (1.0 - a, haar_random_unitary(2, &mut rng)),
            ])
            .unwrap();
            let lifted = lift_iid(&base, &layout).unwrap();
            assert!(lifted.tp_defect() < 1e-10);
        }
    }

    #[test]
    fn lift_factorizes_on_product_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let layout = SystemLayout::qubits_2_2_2();
        let base = depolarizing(0.37).unwrap();
        let lifted = lift_iid(&base, &layout).unwrap();
        for _ in 0..5 {
            let (ra, rb, rr) = (
                random_density(&mut rng, 2),
                random_density(&mut rng, 2),
                random_density(&mut rng, 2),
            );
            let input = crate::linalg::kron_all(&[&ra, &rb, &rr]).unwrap();
            let want = crate::linalg::kron_all(&[&base.apply(&ra), &base.apply(&rb), &rr]).unwrap();
            assert!(lifted.apply(&input).max_abs_diff(&want) < 1e-10);
        }
    }

    #[test]
    fn lift_rejects_non_qubit() {
        let layout = SystemLayout::new(3, 1, 1).unwrap();
        assert!(lift_iid(&bit_flip(0.1).unwrap(), &layout).is_err());
        let two = KrausChannel::identity(4);
        assert!(lift_iid(&two, &SystemLayout::qubits_2_2_2()).is_err());
    }

    #[test]
    fn entangler_prepares_bell_pair() {
        let layout = SystemLayout::qubits_2_2_2();
        let u = entangler(&layout).unwrap();
        assert!(u.is_unitary(1e-10));
        let (a, b) = (c(0.6, 0.0), c(0.0, 0.8));
        let mut input = CMatrix::zeros(8, 1);
        input[(0, 0)] = a; // |000>
        input[(4, 0)] = b; // |100>
        let out = u.matmul(&input);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut want = CMatrix::zeros(8, 1);
        want[(0, 0)] = a * h; // |000>
        want[(3, 0)] = a * h; // |011>
        want[(4, 0)] = b * h; // |100>
        want[(7, 0)] = b * h; // |111>
        assert!(out.max_abs_diff(&want) < 1e-15);

        assert_eq!(
            entangler(&SystemLayout::unprotected_qubit()).unwrap(),
            CMatrix::identity(2)
        );
        assert!(entangler(&SystemLayout::new(2, 2, 1).unwrap()).is_err());
    }

    #[test]
    fn entangler_ancilla_marginals_are_maximally_mixed() {
        let layout = SystemLayout::new(2, 4, 4).unwrap();
        let u = entangler(&layout).unwrap();
        let psi = u.matmul(&CMatrix::basis_ket(layout.d(), 0));
        let rho = psi.outer(&psi);
        // factors: data, enc qubit 0, enc qubit 1, rec qubit 0, rec qubit 1
        for q in 1..5 {
            let red = partial_trace(&rho, &[2, 2, 2, 2, 2], &[q]).unwrap();
            assert!(red.max_abs_diff(&CMatrix::identity(2).scale_real(0.5)) < 1e-12);
        }
    }

    #[test]
    fn bell_basis_properties() {
        let b = bell_basis();
        for i in 0..4 {
            for j in 0..4 {
                let ip = b[i].inner(&b[j]);
                let want = if i == j { ONE } else { ZERO };
                assert!((ip - want).norm() < 1e-15);
            }
            let rho = b[i].outer(&b[i]);
            for keep in [0, 1] {
                let red = partial_trace(&rho, &[2, 2], &[keep]).unwrap();
                assert!(red.max_abs_diff(&CMatrix::identity(2).scale_real(0.5)) < 1e-15);
            }
        }
        let mut sum = CMatrix::zeros(4, 4);
        for v in &b {
            sum += &v.outer(v);
        }
        assert!(sum.max_abs_diff(&CMatrix::identity(4)) < 1e-15);
    }

    #[test]
    fn twirl_examples() {
        let half = CMatrix::identity(2).scale_real(0.5);
        assert!(twirl(&ket0().outer(&ket0())).unwrap().max_abs_diff(&half) < 1e-15);
        assert!(twirl(&half).unwrap().max_abs_diff(&half) < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let rho = random_density(&mut rng, 2);
            assert!(twirl(&rho).unwrap().max_abs_diff(&half) < 1e-12);
        }
        assert!(twirl(&CMatrix::diag_real(&[1.5, -0.5])).is_err());
        assert!(twirl(&CMatrix::identity(2)).is_err());
    }

    #[test]
    fn swap_target() {
        let layout = SystemLayout::qubits_2_2_2();
        let l = TargetSpec::SwapDataToRecovery.materialize(&layout).unwrap();
        // |100> -> |001>
        assert_eq!(l[(1, 4)], ONE);
        assert_eq!(l[(2, 2)], ONE);
        let qutrit = SystemLayout::new(3, 2, 3).unwrap();
        let lq = TargetSpec::SwapDataToRecovery.materialize(&qutrit).unwrap();
        assert!(lq.is_unitary(1e-14));
        assert!(TargetSpec::SwapDataToRecovery
            .materialize(&SystemLayout::new(2, 2, 1).unwrap())
            .is_err());
        assert!(TargetSpec::Custom(CMatrix::diag_real(&[1.0, 2.0]))
            .materialize(&SystemLayout::unprotected_qubit())
            .is_err());
    }
}
