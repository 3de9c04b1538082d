//! Subsystem dimensions and the global tensor ordering
//! `data ⊗ encoding ⊗ recovery`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::log2_exact;
use crate::matrix::{CMatrix, MAX_DIM, ONE};

/// One of the three tensor factors of the system space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Factor {
    Data,
    Encoding,
    Recovery,
}

impl Factor {
    pub const ALL: [Factor; 3] = [Factor::Data, Factor::Encoding, Factor::Recovery];

    /// Position in the tensor product.
    pub fn index(self) -> usize {
        match self {
            Factor::Data => 0,
            Factor::Encoding => 1,
            Factor::Recovery => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "LayoutRepr", into = "LayoutRepr")]
pub struct SystemLayout {
    d_dat: usize,
    d_enc: usize,
    d_rec: usize,
}

impl SystemLayout {
    pub fn new(d_dat: usize, d_enc: usize, d_rec: usize) -> Result<Self> {
        if d_dat < 2 {
            return Err(Error::InvalidLayout(format!(
                "d_dat must be at least 2, got {d_dat}"
            )));
        }
        if d_enc == 0 || d_rec == 0 {
            return Err(Error::InvalidLayout(
                "ancilla dimensions must be positive".into(),
            ));
        }
        let d = d_dat
            .checked_mul(d_enc)
            .and_then(|x| x.checked_mul(d_rec))
            .unwrap_or(usize::MAX);
        if d > MAX_DIM {
            return Err(Error::DimensionTooLarge(d));
        }
        Ok(Self {
            d_dat,
            d_enc,
            d_rec,
        })
    }

    /// One data qubit, one encoding qubit, one recovery qubit.
    pub fn qubits_2_2_2() -> Self {
        Self {
            d_dat: 2,
            d_enc: 2,
            d_rec: 2,
        }
    }

    /// A bare data qubit with no ancillas.
    pub fn unprotected_qubit() -> Self {
        Self {
            d_dat: 2,
            d_enc: 1,
            d_rec: 1,
        }
    }

    pub fn d_dat(&self) -> usize {
        self.d_dat
    }

    pub fn d_enc(&self) -> usize {
        self.d_enc
    }

    pub fn d_rec(&self) -> usize {
        self.d_rec
    }

    pub fn d_anc(&self) -> usize {
        self.d_enc * self.d_rec
    }

    /// Full system dimension `d = d_dat · d_anc`.
    pub fn d(&self) -> usize {
        self.d_dat * self.d_anc()
    }

    /// Dimension of the space the encoding acts on, `d_dat · d_enc`.
    pub fn d_code(&self) -> usize {
        self.d_dat * self.d_enc
    }

    pub fn dim_of(&self, f: Factor) -> usize {
        match f {
            Factor::Data => self.d_dat,
            Factor::Encoding => self.d_enc,
            Factor::Recovery => self.d_rec,
        }
    }

    pub fn factor_dims(&self) -> [usize; 3] {
        [self.d_dat, self.d_enc, self.d_rec]
    }

    /// Whether encoding and recovery ancillas can be paired into ebits.
    pub fn supports_entanglement(&self) -> bool {
        self.d_enc == self.d_rec
    }

    /// Number of qubits in a factor, if its dimension is a power of two.
    pub fn qubits_in(&self, f: Factor) -> Option<usize> {
        log2_exact(self.dim_of(f))
    }

    /// Embedding `I_dat ⊗ |0…0⟩_anc` of the data space into the system
    /// space (`d × d_dat`).
    pub fn prepared_input(&self) -> CMatrix {
        let mut j = CMatrix::zeros(self.d(), self.d_dat);
        let stride = self.d_anc();
        for x in 0..self.d_dat {
            j[(x * stride, x)] = ONE;
        }
        j
    }
}

impl std::fmt::Display for SystemLayout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{}", self.d_dat, self.d_enc, self.d_rec)
    }
}

impl std::str::FromStr for SystemLayout {
    type Err = Error;

    /// Parses `d_dat,d_enc,d_rec`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::InvalidLayout(format!(
                "layout must be d_dat,d_enc,d_rec (got {s:?})"
            )));
        }
        let mut dims = [0usize; 3];
        for (slot, p) in dims.iter_mut().zip(&parts) {
            *slot = p.parse().map_err(|_| {
                Error::InvalidLayout(format!("layout entry {p:?} is not an integer"))
            })?;
        }
        Self::new(dims[0], dims[1], dims[2])
    }
}

#[derive(Serialize, Deserialize)]
struct LayoutRepr {
    d_dat: usize,
    d_enc: usize,
    d_rec: usize,
}

impl From<SystemLayout> for LayoutRepr {
    fn from(l: SystemLayout) -> Self {
        Self {
            d_dat: l.d_dat,
            d_enc: l.d_enc,
            d_rec: l.d_rec,
        }
    }
}

impl TryFrom<LayoutRepr> for SystemLayout {
    type Error = Error;

    fn try_from(r: LayoutRepr) -> Result<Self> {
        SystemLayout::new(r.d_dat, r.d_enc, r.d_rec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_dimensions() {
        let l = SystemLayout::new(2, 4, 4).unwrap();
        assert_eq!(l.d_anc(), 16);
        assert_eq!(l.d(), 32);
        assert_eq!(l.d_code(), 8);
        assert!(l.supports_entanglement());
        assert_eq!(l.qubits_in(Factor::Encoding), Some(2));
    }

    #[test]
    fn rejects_bad_layouts() {
        assert!(SystemLayout::new(1, 2, 2).is_err());
        assert!(SystemLayout::new(2, 0, 2).is_err());
        assert!(matches!(
            SystemLayout::new(64, 64, 2),
            Err(Error::DimensionTooLarge(8192))
        ));
        assert!("2,2".parse::<SystemLayout>().is_err());
        assert!("2,x,2".parse::<SystemLayout>().is_err());
    }

    #[test]
    fn parse_and_display() {
        let l: SystemLayout = "2, 2, 1".parse().unwrap();
        assert_eq!(l, SystemLayout::new(2, 2, 1).unwrap());
        assert_eq!(l.to_string(), "2,2,1");
    }

    #[test]
    fn prepared_input_is_isometry() {
        let l = SystemLayout::qubits_2_2_2();
        let j = l.prepared_input();
        assert_eq!(j.shape(), (8, 2));
        assert!(j.isometry_defect() < 1e-15);
        assert_eq!(j[(4, 1)], ONE);
    }
}
