use serde::{Deserialize, Serialize};

use crate::channels::KrausChannel;
use crate::error::{dim_mismatch, Error, Result};
use crate::layout::{Factor, SystemLayout};
use crate::linalg::expect_shape;
use crate::matrix::{CMatrix, ZERO};

use super::steps::overlaps_in;

/// Divisor used by [`fidelity_full`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// `1/d_dat²`. Exceeds one when `L` acts on ancillas too.
    DataDim,
    /// `1/d²`, always within `[0, 1]`.
    Normalized,
}

/// Channel fidelity `Σ_{r,e} |Tr L† R_r E_e C U|²` over the full space.
pub fn fidelity_full(
    r_stack: &CMatrix,
    channel: &KrausChannel,
    c_full: &CMatrix,
    u: &CMatrix,
    l: &CMatrix,
    layout: &SystemLayout,
    normalization: Normalization,
) -> Result<f64> {
    let d = layout.d();
    if channel.dim() != d {
        return Err(dim_mismatch("channel vs layout", d, channel.dim()));
    }
    for (m, what) in [(c_full, "encoding"), (u, "entangler"), (l, "target")] {
        expect_shape(m, d, d, what)?;
    }
    let blocks = recovery_blocks(r_stack, d)?;
    let t = overlaps_in(&blocks, channel.kraus(), &c_full.matmul(u), l);
    let div = match normalization {
        Normalization::DataDim => layout.d_dat().pow(2),
        Normalization::Normalized => d * d,
    };
    Ok(t.norm_sqr() / div as f64)
}

fn recovery_blocks(r_stack: &CMatrix, d: usize) -> Result<Vec<CMatrix>> {
    if r_stack.cols() != d || !r_stack.rows().is_multiple_of(d) || r_stack.rows() == 0 {
        return Err(dim_mismatch(
            "recovery stack",
            format!("(m_R*{d})x{d}"),
            format!("{}x{}", r_stack.rows(), r_stack.cols()),
        ));
    }
    Ok(r_stack.split_rows(d))
}

/// Kraus operators of the induced map from the data register (ancillas
/// prepared in `|0…0⟩`) to `output`, obtained by tracing out the other
/// two factors.
pub fn data_channel_kraus(
    recovery: &[CMatrix],
    channel: &KrausChannel,
    c_full: &CMatrix,
    u: &CMatrix,
    layout: &SystemLayout,
    output: Factor,
) -> Result<Vec<CMatrix>> {
    let d = layout.d();
    let d_dat = layout.d_dat();
    if layout.dim_of(output) != d_dat {
        return Err(Error::InvalidLayout(format!(
            "output factor {output:?} has dimension {}, data has {d_dat}",
            layout.dim_of(output)
        )));
    }
    if channel.dim() != d {
        return Err(dim_mismatch("channel vs layout", d, channel.dim()));
    }
    expect_shape(c_full, d, d, "encoding")?;
    expect_shape(u, d, d, "entangler")?;
    for r in recovery {
        expect_shape(r, d, d, "recovery operator")?;
    }
    let enc = c_full.matmul(u).matmul(&layout.prepared_input());
    let dims = layout.factor_dims();
    let o = output.index();
    let strides = [dims[1] * dims[2], dims[2], 1];
    let others: Vec<usize> = (0..3).filter(|&f| f != o).collect();
    let n_rest = dims[others[0]] * dims[others[1]];

    let noisy: Vec<CMatrix> = channel.kraus().iter().map(|e| e.matmul(&enc)).collect();
    let mut out = Vec::with_capacity(recovery.len() * noisy.len() * n_rest);
    for r in recovery {
        for f in &noisy {
            let a = r.matmul(f);
            for j in 0..n_rest {
                let (j0, j1) = (j / dims[others[1]], j % dims[others[1]]);
                let base = j0 * strides[others[0]] + j1 * strides[others[1]];
                let lam = CMatrix::from_fn(d_dat, d_dat, |row, x| a[(base + row * strides[o], x)]);
                out.push(lam);
            }
        }
    }
    Ok(out)
}

/// Entanglement fidelity of the induced data map to `l_dat`,
/// `(1/d_dat²)·Σ_k |Tr L_dat† Λ_k|²`.
pub fn fidelity_data(
    r_stack: &CMatrix,
    channel: &KrausChannel,
    c_full: &CMatrix,
    u: &CMatrix,
    layout: &SystemLayout,
    output: Factor,
    l_dat: &CMatrix,
) -> Result<f64> {
    let d_dat = layout.d_dat();
    expect_shape(l_dat, d_dat, d_dat, "data target")?;
    let blocks = recovery_blocks(r_stack, layout.d())?;
    let lambdas = data_channel_kraus(&blocks, channel, c_full, u, layout, output)?;
    let l_adj = l_dat.adjoint();
    let total: f64 = lambdas
        .iter()
        .map(|lam| {
            let tr = l_adj.trace_of_product(lam);
            if tr == ZERO {
                0.0
            } else {
                tr.norm_sqr()
            }
        })
        .sum();
    Ok(total / (d_dat * d_dat) as f64)
}
