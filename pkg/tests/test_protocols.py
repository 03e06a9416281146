import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qubench import protocols as P
from qubench.circgen import Circuit, GateOp, Layer, Topology, equal_up_to_phase, ideal_unitary
from qubench.fitting import fit_decay
from qubench.noise import NoiseModel, standard_noise_model
from qubench.qcore import DensityMatrix, KrausChannel, apply_channel, embed_on_qubits
from qubench.noise import amplitude_damping_channel
from qubench.protocols import (
    DecaySample,
    Protocol,
    ProtocolRunSpec,
    build_drb_circuit,
    build_mrb_circuit,
    effective_polarization,
    estimate,
    framed_forward,
    framed_inverse,
    run_cell,
    run_cells,
    run_crb,
    run_drb,
    run_mrb,
    run_protocol,
    survival_probability,
)
from qubench.tomography import mean_layer_infidelity

SMALL = dict(m_list=(2, 4, 8), circuits_per_depth=3)


def spec(protocol, w=2, noise=None, **kw):
    params = {**SMALL, **kw}
    xi = params.pop("xi", 0.0 if w == 1 else 0.5)
    return ProtocolRunSpec(protocol, w, xi, noise=noise or NoiseModel(), **params)


def test_spec_validation():
    with pytest.raises(ValueError):
        ProtocolRunSpec("DRB", 2, m_list=(4, 2))
    with pytest.raises(ValueError):
        ProtocolRunSpec("DRB", 2, m_list=(4,))
    with pytest.raises(ValueError):
        ProtocolRunSpec("MRB", 2, m_list=(2, 3))
    with pytest.raises(ValueError):
        ProtocolRunSpec("DRB", 2, circuits_per_depth=0)
    assert ProtocolRunSpec("DRB", 3).floor == 1 / 8
    assert ProtocolRunSpec("MRB", 3).floor == 0


def test_runner_rejects_wrong_protocol():
    with pytest.raises(ValueError):
        run_drb(spec("MRB"))


def test_survival_probability_examples():
    assert survival_probability(DensityMatrix.basis("00"), "00") == 1
    assert survival_probability(DensityMatrix.maximally_mixed(2), "10") == pytest.approx(0.25)
    ad = embed_on_qubits(amplitude_damping_channel(0.5), [0], 2).then(
        embed_on_qubits(amplitude_damping_channel(0.5), [1], 2))
    damped = apply_channel(DensityMatrix.basis("11"), ad)
    assert survival_probability(damped, "11") == pytest.approx(0.25)


def test_effective_polarization_examples():
    for w in (1, 2, 3):
        perfect = np.zeros(2**w)
        perfect[5 % 2**w] = 1
        assert effective_polarization(perfect, format(5 % 2**w, f"0{w}b")) == pytest.approx(1)
        assert effective_polarization(np.full(2**w, 2.0**-w), "0" * w) == pytest.approx(0, abs=1e-12)


@pytest.mark.parametrize("protocol", ["DRB", "MRB", "CRB"])
@pytest.mark.parametrize("w", [1, 2, 3])
def test_noiseless_values_are_one(protocol, w):
    samples = run_protocol(spec(protocol, w, m_list=(2, 4), circuits_per_depth=2, n_sampled_paulis=5))
    values = np.array([s.value for s in samples])
    if protocol == "CRB":
        np.testing.assert_allclose(np.abs(values), 1, atol=1e-10)
    else:
        np.testing.assert_allclose(values, 1, atol=1e-10)


def test_crb_pauli_set():
    assert len(P.crb_paulis(spec("CRB", 2))) == 15
    three = P.crb_paulis(spec("CRB", 3, n_sampled_paulis=20))
    assert len(three) == 20 and len(set(three)) == 20 and "III" not in three


def test_drb_circuit_is_identity_overall():
    s = spec("DRB", 3)
    prep, core, full = build_drb_circuit(s, 8, 1)
    assert len(prep) == 5 and core.depth == 8
    assert full.depth == 2 * (len(prep) + core.depth)
    assert equal_up_to_phase(ideal_unitary(full), np.eye(8))


def test_mrb_target_matches_ideal_output():
    s = spec("MRB", 3)
    for k in range(5):
        full, target, core = build_mrb_circuit(s, 6, k)
        assert len(core) == 3
        u = ideal_unitary(full)
        assert abs(u[int(target, 2), 0]) == pytest.approx(1)
    with pytest.raises(ValueError):
        build_mrb_circuit(s, 5, 0)


def test_frames_cancel():
    rng = np.random.default_rng(0)
    layers = [Layer((GateOp("h", (0,)), GateOp("t", (1,)))), Layer((GateOp("cnot", (0, 1)),)),
              Layer((GateOp("s", (0,)), GateOp("x", (1,))))]
    bare = ideal_unitary(Circuit(2, tuple(layers)))
    framed = ideal_unitary(Circuit(2, tuple(framed_forward(layers, 2, rng))))
    assert equal_up_to_phase(framed, bare)
    inv = ideal_unitary(Circuit(2, tuple(framed_inverse(layers, 2, rng))))
    assert equal_up_to_phase(inv @ bare, np.eye(4))


def test_drb_w1_depolarizing_matches_analytic():
    p = 0.02
    s = spec("DRB", 1, noise=standard_noise_model("depolarizing", p))
    for m, k in [(2, 0), (8, 2)]:
        _, _, full = build_drb_circuit(s, m, k)
        gates = sum(len(layer.ops) for layer in full.layers)
        value = run_cell(s, m, k).samples[0].value
        assert value == pytest.approx((1 + (1 - p) ** gates) / 2, abs=1e-12)


def test_crb_dephasing_decays(monkeypatch):
    lam = 0.05
    monkeypatch.setattr(P, "crb_cycle", lambda spec, k: Circuit(1, (Layer((GateOp("z", (0,)),)),)))
    s = spec("CRB", 1, noise=standard_noise_model("t2", lam), m_list=(2, 4, 8, 16), circuits_per_depth=2)
    samples = run_crb(s)
    by = {lab: [x for x in samples if x.pauli == lab] for lab in "XYZ"}
    assert fit_decay(by["X"], 0.0, n_bootstrap=0).p == pytest.approx(math.sqrt(1 - lam), abs=1e-9)
    assert fit_decay(by["Y"], 0.0, n_bootstrap=0).p == pytest.approx(math.sqrt(1 - lam), abs=1e-9)
    assert all(x.value == pytest.approx(1) for x in by["Z"])


def test_deterministic_and_order_independent():
    s = spec("MRB", 2, noise=standard_noise_model("t1", 0.02))
    a = run_mrb(s)
    b = run_mrb(s)
    assert a == b
    cells = P.cells(s)
    reversed_values = {(m, k): run_cell(s, m, k).samples[0].value for m, k in reversed(cells)}
    assert [x.value for x in a] == [reversed_values[(x.depth, x.circuit_index)] for x in a]


def test_cell_seeds_are_distinct():
    s = spec("DRB", 2, circuits_per_depth=10)
    seeds = {P.cell_seed(s, m, k) for m, k in P.cells(s)}
    assert len(seeds) == len(P.cells(s))
    other = spec("MRB", 2, circuits_per_depth=10)
    assert seeds.isdisjoint({P.cell_seed(other, m, k) for m, k in P.cells(other)})


@pytest.mark.parametrize("protocol", ["DRB", "MRB", "CRB"])
def test_monotone_under_depolarizing(protocol):
    s = spec(protocol, 2, noise=standard_noise_model("depolarizing", 0.02), m_list=(2, 4, 8, 16),
             circuits_per_depth=4)
    samples = run_protocol(s)
    means = [np.mean([x.value for x in samples if x.depth == m]) for m in s.m_list]
    assert all(b <= a + 1e-12 for a, b in zip(means, means[1:]))


@pytest.mark.parametrize("protocol", ["DRB", "MRB", "CRB"])
def test_depolarizing_estimates_track_tomography(protocol):
    noise = standard_noise_model("depolarizing", 0.01)
    s = ProtocolRunSpec(protocol, 2, 0.75, noise=noise, circuits_per_depth=10, seed=5)
    results = run_cells(s)
    fit = estimate(s, [x for r in results for x in r.samples], n_bootstrap=200)
    r_tomo = mean_layer_infidelity([l for r in results for l in r.core_layers], 2, noise)
    assert fit.r == pytest.approx(r_tomo, rel=0.10)


def test_drb_purity_falls_with_t1_strength():
    def diags(g):
        s = ProtocolRunSpec("DRB", 2, 0.75, noise=standard_noise_model("t1", g), circuits_per_depth=5)
        return [r.diagnostics for r in run_cells(s)]

    weak, strong = diags(0.01), diags(0.1)
    assert np.mean([d["purity_prep"] for d in strong]) < np.mean([d["purity_prep"] for d in weak]) < 1
    assert all(d["purity_final"] <= d["purity_prep"] + 1e-12 for d in strong)


def test_sampled_shots_are_binomial_estimates():
    s = spec("DRB", 2, noise=standard_noise_model("depolarizing", 0.05))
    exact = {(x.depth, x.circuit_index): x.value for x in run_drb(s)}
    shots = ProtocolRunSpec("DRB", 2, 0.5, noise=s.noise, shots=100_000, **SMALL)
    for x in run_drb(shots):
        v = exact[(x.depth, x.circuit_index)]
        sigma = math.sqrt(v * (1 - v) / 100_000)
        assert abs(x.value - v) <= 4 * sigma + 1e-12


def test_decay_sample_validation_and_record():
    with pytest.raises(ValueError):
        DecaySample("DRB", 2, 1.5, 0)
    rec = DecaySample("CRB", 4, -0.5, 9, 1, "XZ").to_dict()
    assert rec == {"protocol": "CRB", "m": 4, "circuit_index": 1, "circuit_seed": 9, "value": -0.5,
                   "pauli_label": "XZ"}


@settings(max_examples=10)
@given(st.integers(0, 2**20), st.sampled_from(["DRB", "MRB", "CRB"]))
def test_noiseless_property(seed, protocol):
    s = spec(protocol, 2, m_list=(2, 4), circuits_per_depth=1, seed=seed)
    assert all(abs(abs(x.value) - 1) < 1e-10 for x in run_protocol(s))
