//! Fixed single- and two-qubit gates and qubit-register embedding.

use crate::matrix::{c, CMatrix, ONE, ZERO};

pub fn pauli_x() -> CMatrix {
    CMatrix::from_rows(&[vec![ZERO, ONE], vec![ONE, ZERO]])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_rows(&[vec![ZERO, c(0.0, -1.0)], vec![c(0.0, 1.0), ZERO]])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::diag_real(&[1.0, -1.0])
}

pub fn hadamard() -> CMatrix {
    CMatrix::from_real(2, 2, &[1.0, 1.0, 1.0, -1.0]).scale_real(std::f64::consts::FRAC_1_SQRT_2)
}

/// CNOT with the first qubit as control.
pub fn cnot() -> CMatrix {
    CMatrix::from_real(
        4,
        4,
        &[
            1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0.,
        ],
    )
}

/// Lifts a `k`-qubit operator acting on `targets` (in the operator's own
/// qubit order) to an `n`-qubit register. Qubit 0 is the most significant.
pub fn embed(op: &CMatrix, targets: &[usize], n_qubits: usize) -> CMatrix {
    let k = targets.len();
    assert_eq!(
        op.shape(),
        (1 << k, 1 << k),
        "operator size does not match target count"
    );
    assert!(targets.iter().all(|&t| t < n_qubits), "target out of range");
    let dim = 1usize << n_qubits;
    let bit = |q: usize| 1usize << (n_qubits - 1 - q);
    let target_mask: usize = targets.iter().map(|&t| bit(t)).sum();
    let sub_index = |x: usize| {
        targets
            .iter()
            .fold(0usize, |acc, &t| (acc << 1) | usize::from(x & bit(t) != 0))
    };
    let mut out = CMatrix::zeros(dim, dim);
    for col in 0..dim {
        let sc = sub_index(col);
        let rest = col & !target_mask;
        for sr in 0..(1usize << k) {
            let z = op[(sr, sc)];
            if z == ZERO {
                continue;
            }
            let mut row = rest;
            for (pos, &t) in targets.iter().enumerate() {
                if sr & (1 << (k - 1 - pos)) != 0 {
                    row |= bit(t);
                }
            }
            out[(row, col)] = z;
        }
    }
    out
}

/// Permutation unitary exchanging two qubits of an `n`-qubit register.
pub fn swap_qubits(a: usize, b: usize, n_qubits: usize) -> CMatrix {
    let swap = cnot().matmul(&embed(&cnot(), &[1, 0], 2)).matmul(&cnot());
    if a == b {
        return CMatrix::identity(1 << n_qubits);
    }
    embed(&swap, &[a, b], n_qubits)
}

pub(crate) fn log2_exact(n: usize) -> Option<usize> {
    n.is_power_of_two().then(|| n.trailing_zeros() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::kron;

    #[test]
    fn paulis_anticommute() {
        let xz = pauli_x().matmul(&pauli_z());
        let zx = pauli_z().matmul(&pauli_x());
        assert!((&xz + &zx).max_abs() < 1e-15);
        let y = pauli_y();
        let i_xz = pauli_z().matmul(&pauli_x()).scale(c(0.0, 1.0));
        // Y = i X Z
        assert!(y.max_abs_diff(&pauli_x().matmul(&pauli_z()).scale(c(0.0, 1.0))) < 1e-15);
        assert!(i_xz.max_abs_diff(&y.scale_real(-1.0)) < 1e-15);
    }

    #[test]
    fn embed_matches_kron_on_adjacent_qubits() {
        let e = embed(&pauli_x(), &[1], 3);
        let k = kron(
            &kron(&CMatrix::identity(2), &pauli_x()).unwrap(),
            &CMatrix::identity(2),
        )
        .unwrap();
        assert_eq!(e, k);
        assert_eq!(embed(&cnot(), &[0, 1], 2), cnot());
    }

    #[test]
    fn reversed_cnot() {
        // control on the second qubit: |01> <-> |11>
        let r = embed(&cnot(), &[1, 0], 2);
        let expected = CMatrix::from_real(
            4,
            4,
            &[
                1., 0., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0., 0., 1., 0., 0.,
            ],
        );
        assert_eq!(r, expected);
    }

    #[test]
    fn swap_moves_basis_states() {
        let s = swap_qubits(0, 2, 3);
        // |100> (index 4) -> |001> (index 1)
        assert_eq!(s[(1, 4)], ONE);
        assert!(s.is_unitary(1e-14));
    }
}
