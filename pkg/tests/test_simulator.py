import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles as O
from circuits import ONE_QUBIT, TWO_QUBIT
from qubench import simulator
from qubench.circgen import Circuit, GateOp, Layer, Topology, generate_random_circuit
from qubench.noise import GateClass, NoiseKind, NoiseModel, NoiseSpec, combined_noise_model, standard_noise_model

# all-zeros start; outcome probabilities computed with the column-stacked oracle
FROZEN_TWO_QUBIT_T1 = [0.2722420351562498, 0.25174562109374976, 0.22900796484374972, 0.2470043789062498]
FROZEN_ONE_QUBIT_T1 = [0.5713124999999999, 0.4286874999999997]

KINDS = ["depolarizing", "t1", "t2", "coherent1q", "coherent2q"]


def test_frozen_outcomes_under_t1():
    nm = standard_noise_model("t1", 0.05)
    got = simulator.outcome_probabilities(simulator.run(TWO_QUBIT, nm))
    np.testing.assert_allclose(got, FROZEN_TWO_QUBIT_T1, atol=1e-12)
    got = simulator.outcome_probabilities(simulator.run(ONE_QUBIT, nm))
    np.testing.assert_allclose(got, FROZEN_ONE_QUBIT_T1, atol=1e-12)


@given(st.integers(1, 3), st.integers(1, 6), st.integers(0, 2**31 - 1), st.sampled_from(KINDS),
       st.floats(1e-3, 0.3))
def test_simulator_matches_superoperator_oracle(w, d, seed, kind, s):
    c = generate_random_circuit(w, d, 0.0 if w == 1 else 0.5, Topology.line(w), seed)
    got = simulator.run(c, standard_noise_model(kind, s))
    want = O.output_state(c, {kind: s})
    np.testing.assert_allclose(got, want, atol=1e-10)


def test_combined_noise_order_matches_oracle():
    parts = {"t1": 0.05, "coherent1q": 0.1}
    got = simulator.run(TWO_QUBIT, combined_noise_model(parts))
    np.testing.assert_allclose(got, O.output_state(TWO_QUBIT, parts), atol=1e-12)


def test_noiseless_run_is_pure_unitary_evolution():
    c = generate_random_circuit(3, 5, 0.5, Topology.line(3), 1)
    rho = simulator.run(c, NoiseModel())
    u = O.ideal_circuit_unitary(c)
    np.testing.assert_allclose(rho, np.outer(u[:, 0], u[:, 0].conj()), atol=1e-12)


def test_state_prep_and_measurement_noise():
    nm = NoiseModel({GateClass.STATE_PREP: [NoiseSpec(NoiseKind.DEPOLARIZING, 0.2)],
                     GateClass.MEASUREMENT: [NoiseSpec(NoiseKind.T1, 1.0)]})
    prepared = simulator.prepare(1, nm)[0]
    np.testing.assert_allclose(prepared, np.diag([0.9, 0.1]), atol=1e-12)
    flip = Circuit(1, (Layer((GateOp("x", (0,)),)),))
    # full damping before readout always reads 0
    assert simulator.outcome_probabilities(simulator.run(flip, nm)) == pytest.approx([1, 0])
    rho = simulator.run(flip, nm, measurement_noise=False)
    assert simulator.outcome_probabilities(rho) == pytest.approx([0.1, 0.9])


def test_idle_noise_only_on_untouched_qubits():
    nm = NoiseModel({GateClass.IDLE: [NoiseSpec(NoiseKind.T1, 1.0)]})
    c = Circuit(2, (Layer((GateOp("x", (0,)), GateOp("x", (1,)))), Layer((GateOp("id", (0,)),))))
    # qubit 1 idles in the second layer and decays; qubit 0 does not
    assert simulator.outcome_probabilities(simulator.run(c, nm)) == pytest.approx([0, 0, 1, 0])


def test_evolve_is_linear_on_operator_batches():
    nm = standard_noise_model("t1", 0.1)
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(2, 4, 4)) + 1j * rng.normal(size=(2, 4, 4))
    both = simulator.evolve(np.stack([a, b, 2 * a - 3j * b]), TWO_QUBIT, nm)
    np.testing.assert_allclose(both[2], 2 * both[0] - 3j * both[1], atol=1e-12)


def test_width_limit():
    with pytest.raises(ValueError):
        simulator.evolve(np.zeros((1, 128, 128)), Circuit(7), NoiseModel())


@given(st.integers(0, 2**31 - 1), st.sampled_from(KINDS), st.floats(0, 1))
def test_output_is_a_valid_state(seed, kind, s):
    c = generate_random_circuit(2, 4, 0.5, Topology.line(2), seed)
    rho = simulator.simulate(c, standard_noise_model(kind, s if "coherent" not in kind else 3 * s))
    assert np.trace(rho.data).real == pytest.approx(1, abs=1e-10)
