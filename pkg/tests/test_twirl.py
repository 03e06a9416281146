import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles as O
from qubench.circgen import Circuit, GateOp, Layer, Topology, equal_up_to_phase, generate_random_circuit, ideal_unitary
from qubench.noise import standard_noise_model
from qubench.tomography import error_ptm, offdiagonal_mass, twirl_averaged_error_ptm
from qubench.twirl import (
    UnsupportedGateError,
    conjugate_pauli_through_op,
    multiply_paulis,
    pauli_conjugate_through_cnot,
    pending_frame,
    randomized_compile,
)


def test_cnot_conjugation_examples():
    assert pauli_conjugate_through_cnot("II") == (1, "II")
    assert pauli_conjugate_through_cnot("XI") == (1, "XX")
    assert pauli_conjugate_through_cnot("IZ") == (1, "ZZ")
    with pytest.raises(ValueError):
        pauli_conjugate_through_cnot("XQ")


@pytest.mark.parametrize("label", ["".join(p) for p in __import__("itertools").product("IXYZ", repeat=2)])
def test_cnot_conjugation_matches_matrix_oracle(label):
    sign, out = pauli_conjugate_through_cnot(label)
    cx = O.GATES["cnot"]
    np.testing.assert_allclose(cx @ O.pauli_string(label) @ cx, sign * O.pauli_string(out), atol=1e-12)


def test_non_clifford_conjugation_is_rejected():
    with pytest.raises(UnsupportedGateError):
        conjugate_pauli_through_op(GateOp("t", (0,)), "X")


def test_multiply_paulis():
    assert multiply_paulis("XZ", "ZZ") == "YI"
    assert multiply_paulis("Y", "Y", "X") == "X"


def test_identity_twirls_leave_circuit_unchanged():
    c = generate_random_circuit(3, 6, 0.5, Topology.line(3), 3)
    out, records = randomized_compile(c, twirls=["III"] * c.depth)
    assert out == c
    assert all(r.twirl_gates == ("I", "I", "I") for r in records)


def test_single_cnot_with_x_twirl():
    c = Circuit(2, (Layer((GateOp("cnot", (0, 1)),)),))
    out, records = randomized_compile(c, twirls=["XI"], absorb_final=False)
    assert records[0].correction == ("x", "x")
    assert pending_frame(records) == "XX"
    assert out.layers[0].ops[0].pre == "XI"


@pytest.mark.parametrize("seed", range(20))
def test_twirled_three_qubit_circuits_are_equivalent(seed):
    c = generate_random_circuit(3, 8, 0.5, Topology.line(3), 100 + seed)
    out, records = randomized_compile(c, seed)
    assert len(records) == c.depth
    assert equal_up_to_phase(ideal_unitary(out), ideal_unitary(c))


@given(st.integers(1, 3), st.integers(1, 8), st.integers(0, 2**31 - 1), st.integers(0, 2**31 - 1))
def test_twirl_keeps_structure(w, d, cseed, tseed):
    c = generate_random_circuit(w, d, 0.0 if w == 1 else 0.5, Topology.line(w), cseed)
    out, records = randomized_compile(c, tseed)
    assert out.depth == c.depth
    for a, b in zip(c.layers, out.layers):
        assert [(op.name, op.qubits) for op in a.ops] == [(op.name, op.qubits) for op in b.ops]
    assert all(len(r.twirl_gates) == w and len(r.correction) == w for r in records)
    assert equal_up_to_phase(ideal_unitary(out), ideal_unitary(c))


def test_pending_frame_completes_the_circuit():
    c = generate_random_circuit(2, 5, 0.75, Topology.line(2), 8)
    out, records = randomized_compile(c, 4, absorb_final=False)
    frame = O.pauli_string(pending_frame(records))
    assert equal_up_to_phase(frame @ ideal_unitary(out), ideal_unitary(c))


def test_idle_qubit_layer_is_rejected():
    c = Circuit(2, (Layer((GateOp("h", (0,)),)),))
    with pytest.raises(UnsupportedGateError):
        randomized_compile(c, 0)


def test_twirl_average_suppresses_coherent_offdiagonal_mass():
    # fixed 2-qubit desk instance; the residual after n twirls is statistical, ~1/sqrt(n)
    c = generate_random_circuit(2, 4, 0.5, Topology.line(2), 2024)
    noise = standard_noise_model("coherent1q", 0.05)
    before = offdiagonal_mass(error_ptm(c, noise))
    after = offdiagonal_mass(twirl_averaged_error_ptm(c, noise, 200, seed=1))
    assert before / after >= 10
