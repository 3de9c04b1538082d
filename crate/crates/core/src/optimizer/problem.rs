use serde::{Deserialize, Serialize};

use crate::channels::{entangler, KrausChannel, TargetSpec};
use crate::error::{dim_mismatch, Error, Result};
use crate::layout::{Factor, SystemLayout};
use crate::linalg::kron;
use crate::matrix::CMatrix;

use super::fidelity::fidelity_data;
use super::steps::{refit_in, Refit};

/// Inputs on which the distance is measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// Data states with every ancilla starting in `|0…0⟩`, the situation
    /// the procedure is actually used in.
    #[default]
    Prepared,
    /// The whole system space. Here `‖R E (C U)‖` does not depend on the
    /// encoding, so the optimum is the same for every `C′`.
    Full,
}

impl std::str::FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prepared" => Ok(Domain::Prepared),
            "full" => Ok(Domain::Full),
            other => Err(Error::Config(format!(
                "unknown domain {other:?} (expected prepared or full)"
            ))),
        }
    }
}

/// Everything that stays fixed during one optimization.
#[derive(Clone, Debug)]
pub struct Problem {
    layout: SystemLayout,
    channel: KrausChannel,
    entangler: CMatrix,
    target: CMatrix,
    output: Factor,
    domain: Domain,
    /// `J`, `d × k`.
    input: CMatrix,
    /// `L·J`.
    target_in: CMatrix,
}

impl Problem {
    /// With `entangle` set the ancillas are prepared in ebits by
    /// [`entangler`]; otherwise `U = I`.
    pub fn new(
        channel: KrausChannel,
        layout: SystemLayout,
        target: &TargetSpec,
        entangle: bool,
        domain: Domain,
    ) -> Result<Self> {
        let u = if entangle {
            entangler(&layout)?
        } else {
            CMatrix::identity(layout.d())
        };
        let l = target.materialize(&layout)?;
        Self::from_parts(channel, layout, u, l, target.output_factor(), domain)
    }

    pub fn from_parts(
        channel: KrausChannel,
        layout: SystemLayout,
        entangler: CMatrix,
        target: CMatrix,
        output: Factor,
        domain: Domain,
    ) -> Result<Self> {
        let d = layout.d();
        if channel.dim() != d {
            return Err(dim_mismatch("channel", d, channel.dim()));
        }
        for (what, m) in [("entangler", &entangler), ("target", &target)] {
            if m.shape() != (d, d) {
                return Err(dim_mismatch(
                    what,
                    format!("{d}x{d}"),
                    format!("{}x{}", m.rows(), m.cols()),
                ));
            }
            let defect = m.isometry_defect();
            if defect > 1e-10 {
                return Err(Error::NotUnitary(defect));
            }
        }
        if layout.dim_of(output) != layout.d_dat() {
            return Err(Error::InvalidLayout(format!(
                "output factor {output:?} has dimension {}, data has {}",
                layout.dim_of(output),
                layout.d_dat()
            )));
        }
        let input = match domain {
            Domain::Prepared => layout.prepared_input(),
            Domain::Full => CMatrix::identity(d),
        };
        let target_in = target.matmul(&input);
        Ok(Self {
            layout,
            channel,
            entangler,
            target,
            output,
            domain,
            input,
            target_in,
        })
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn channel(&self) -> &KrausChannel {
        &self.channel
    }

    pub fn entangler(&self) -> &CMatrix {
        &self.entangler
    }

    pub fn target(&self) -> &CMatrix {
        &self.target
    }

    pub fn output_factor(&self) -> Factor {
        self.output
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn input(&self) -> &CMatrix {
        &self.input
    }

    pub(crate) fn target_in(&self) -> &CMatrix {
        &self.target_in
    }

    /// Dimension `k` of the input domain, so that `δ ∈ [0, 4k]`.
    pub fn k(&self) -> usize {
        self.input.cols()
    }

    /// `C′ ⊗ I_rec`.
    pub fn c_full(&self, c_prime: &CMatrix) -> Result<CMatrix> {
        let n = self.layout.d_code();
        if c_prime.shape() != (n, n) {
            return Err(dim_mismatch(
                "encoding",
                format!("{n}x{n}"),
                format!("{}x{}", c_prime.rows(), c_prime.cols()),
            ));
        }
        kron(c_prime, &CMatrix::identity(self.layout.d_rec()))
    }

    /// The encoder `K = (C′ ⊗ I_rec)·U·J`.
    pub fn encoder(&self, c_prime: &CMatrix) -> Result<CMatrix> {
        Ok(self
            .c_full(c_prime)?
            .matmul(&self.entangler)
            .matmul(&self.input))
    }

    /// The refitted Δ and distance δ of an encoding and stacked recovery.
    pub fn evaluate(&self, c_prime: &CMatrix, r_stack: &CMatrix) -> Result<Refit> {
        let d = self.layout.d();
        if r_stack.cols() != d || !r_stack.rows().is_multiple_of(d) || r_stack.rows() == 0 {
            return Err(dim_mismatch(
                "stacked recovery",
                format!("(m·{d})x{d}"),
                format!("{}x{}", r_stack.rows(), r_stack.cols()),
            ));
        }
        let enc = self.encoder(c_prime)?;
        Ok(refit_in(
            &r_stack.split_rows(d),
            self.channel.kraus(),
            &enc,
            &self.target_in,
        ))
    }

    /// `((2k − δ)/2k)²`, the normalized channel fidelity belonging to δ.
    pub fn fidelity_from_distance(&self, distance: f64) -> f64 {
        let k = self.k() as f64;
        ((2.0 * k - distance) / (2.0 * k)).powi(2)
    }

    /// Data fidelity against `L_dat = I` on the output factor.
    pub fn data_fidelity(&self, c_prime: &CMatrix, r_stack: &CMatrix) -> Result<f64> {
        fidelity_data(
            r_stack,
            &self.channel,
            &self.c_full(c_prime)?,
            &self.entangler,
            &self.layout,
            self.output,
            &CMatrix::identity(self.layout.d_dat()),
        )
    }

    /// `F_e = E_e·K` for every Kraus operator of the channel.
    pub fn factors(&self, c_prime: &CMatrix) -> Result<Vec<CMatrix>> {
        let k = self.encoder(c_prime)?;
        Ok(self.channel.kraus().iter().map(|e| e.matmul(&k)).collect())
    }
}
