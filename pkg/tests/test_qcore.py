import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles as O
from qubench.qcore import (
    DensityMatrix,
    DimensionError,
    InvalidChannelError,
    InvalidStateError,
    KrausChannel,
    PauliTransferMatrix,
    apply_channel,
    embed_operator,
    embed_on_qubits,
    partial_trace,
    pauli_basis,
    pauli_labels,
    pauli_matrix,
    ptm_from_kraus,
    ptm_from_unitary,
    purity,
    tensor_states,
    tv_distance,
)

from strategies import density_matrices, unitaries


def test_pauli_labels_are_lexicographic():
    assert pauli_labels(1) == ["I", "X", "Y", "Z"]
    assert pauli_labels(2)[:5] == ["II", "IX", "IY", "IZ", "XI"]
    assert len(pauli_labels(3)) == 64


def test_pauli_matrix_kron_order():
    np.testing.assert_allclose(pauli_matrix("XZ"), np.kron(O.X, O.Z))


def test_pauli_basis_orthogonal():
    b = pauli_basis(2)
    gram = np.einsum("aij,bji->ab", b, b) / 4
    np.testing.assert_allclose(gram, np.eye(16), atol=1e-12)


def test_density_matrix_rejects_bad_inputs():
    with pytest.raises(InvalidStateError):
        DensityMatrix(1, np.diag([0.6, 0.6]))
    with pytest.raises(InvalidStateError):
        DensityMatrix(1, np.array([[0.5, 1], [0, 0.5]]))
    with pytest.raises(InvalidStateError):
        DensityMatrix(1, np.diag([1.5, -0.5]))
    with pytest.raises(DimensionError):
        DensityMatrix(2, np.eye(2) / 2)


def test_density_matrix_is_immutable():
    rho = DensityMatrix.basis("01")
    with pytest.raises(ValueError):
        rho.data[0, 0] = 1


def test_basis_and_mixed_states():
    rho = DensityMatrix.basis("10")
    assert rho.probabilities().tolist() == [0, 0, 1, 0]
    assert purity(DensityMatrix.maximally_mixed(2)) == pytest.approx(0.25)


def test_kraus_channel_requires_trace_preservation():
    with pytest.raises(InvalidChannelError):
        KrausChannel(1, (np.diag([1, 0.5]),))
    with pytest.raises(DimensionError):
        KrausChannel(1, (np.eye(4),))


def test_embed_matches_loop_oracle():
    rng = np.random.default_rng(3)
    op = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    for targets in [(0, 1), (1, 0), (0, 2), (2, 1)]:
        np.testing.assert_allclose(embed_operator(op, targets, 3), O.embed(op, targets, 3), atol=1e-12)


def test_partial_trace_of_product_state():
    a = DensityMatrix.from_statevector([1, 1j])
    b = DensityMatrix.basis("1")
    ab = tensor_states(a, b)
    np.testing.assert_allclose(partial_trace(ab, [0]).data, a.data, atol=1e-12)
    np.testing.assert_allclose(partial_trace(ab, [1]).data, b.data, atol=1e-12)


def test_amplitude_damping_ptm_frozen():
    g = 0.3
    r = ptm_from_kraus(KrausChannel(1, tuple(O.amplitude_damping(g)))).data
    s = np.sqrt(1 - g)
    expected = np.array([[1, 0, 0, 0], [0, s, 0, 0], [0, 0, s, 0], [g, 0, 0, 1 - g]])
    np.testing.assert_allclose(r, expected, atol=1e-12)


def test_hadamard_ptm_swaps_x_and_z():
    r = ptm_from_unitary(O.GATES["h"]).data
    expected = np.array([[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, -1, 0], [0, 1, 0, 0]])
    np.testing.assert_allclose(r, expected, atol=1e-12)


def test_tv_distance():
    assert tv_distance([0.5, 0.5], [1, 0]) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        tv_distance([0.5, 0.6], [1, 0])


@given(density_matrices(2), unitaries(2))
def test_unitary_channel_preserves_state_validity_and_purity(rho, u):
    out = apply_channel(rho, KrausChannel.from_unitary(u))
    assert np.trace(out.data).real == pytest.approx(1, abs=1e-10)
    assert purity(out) == pytest.approx(purity(rho), abs=1e-10)


@given(density_matrices(1), st.floats(0, 1))
def test_amplitude_damping_is_cptp_on_states(rho, g):
    out = apply_channel(rho, KrausChannel(1, tuple(O.amplitude_damping(g))))
    assert np.linalg.eigvalsh(out.data).min() > -1e-10


@given(unitaries(2))
def test_unitary_ptm_is_orthogonal_and_unital(u):
    r = ptm_from_unitary(u)
    np.testing.assert_allclose(r.data @ r.data.T, np.eye(16), atol=1e-9)
    assert r.is_trace_preserving()
    assert r.data[:, 0] == pytest.approx(np.eye(16)[0], abs=1e-9)


@given(unitaries(1), unitaries(1))
def test_ptm_composition(u, v):
    lhs = ptm_from_unitary(v @ u)
    rhs = ptm_from_unitary(v) @ ptm_from_unitary(u)
    np.testing.assert_allclose(lhs.data, rhs.data, atol=1e-9)


def test_embed_on_qubits_then_compose():
    ch = KrausChannel(1, tuple(O.amplitude_damping(0.2)))
    big = embed_on_qubits(ch, [1], 2)
    out = apply_channel(DensityMatrix.basis("11"), big)
    assert out.probabilities() == pytest.approx([0, 0, 0.2, 0.8])
    composed = ch.then(ch)
    assert apply_channel(DensityMatrix.basis("1"), composed).probabilities() == pytest.approx([0.36, 0.64])
