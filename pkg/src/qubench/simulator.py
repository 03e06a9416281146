"""Exact noisy density-matrix simulation of layered circuits.

Every gate is applied as a local superoperator (ideal unitary followed by the
gate-class noise channel) contracted into the density-matrix tensor, so the
cost per gate does not require building full-register operators.  All
routines accept a leading batch axis, which lets the tomography code push
the whole Pauli basis (or a sample of Haar-random states) through a circuit
in one pass.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .circgen import Circuit, GateOp, Layer
from .noise import GateClass, NoiseModel, build_gate_noise
from .qcore import DensityMatrix

MAX_WIDTH = 6


def _superop_of_unitary(u: np.ndarray) -> np.ndarray:
    return np.kron(u, u.conj())


@lru_cache(maxsize=4096)
def _op_superop(op_key: tuple, model: NoiseModel) -> np.ndarray:
    name, pre, post = op_key
    op = GateOp(name, (0, 1) if name == "cnot" else (0,), pre, post)
    s = _superop_of_unitary(op.matrix())
    gc = GateClass.TWO_QUBIT if op.is_two_qubit else GateClass.ONE_QUBIT
    if model.has(gc):
        s = build_gate_noise(model, gc).superoperator() @ s
    return _as_tensor(s, len(op.qubits))


@lru_cache(maxsize=64)
def _class_superop(model: NoiseModel, gate_class: GateClass) -> np.ndarray:
    return _as_tensor(build_gate_noise(model, gate_class).superoperator(), 1)


def _as_tensor(s: np.ndarray, k: int) -> np.ndarray:
    # (row_out, col_out) x (row_in, col_in) -> (2,)*k for each of the four groups
    t = s.reshape((2,) * (4 * k))
    t.setflags(write=False)
    return t


@lru_cache(maxsize=None)
def _einsum_indices(targets: tuple, w: int):
    k = len(targets)
    rho_idx = list(range(0, 2 * w + 1))
    s_idx = [20 + i for i in range(k)] + [30 + i for i in range(k)]
    s_idx += [1 + t for t in targets] + [1 + w + t for t in targets]
    out_idx = list(rho_idx)
    for i, t in enumerate(targets):
        out_idx[1 + t] = 20 + i
        out_idx[1 + w + t] = 30 + i
    return s_idx, rho_idx, out_idx


def apply_local(rho_t: np.ndarray, superop_t: np.ndarray, targets: tuple, w: int) -> np.ndarray:
    """Contract a local superoperator tensor into a batched density tensor."""
    s_idx, rho_idx, out_idx = _einsum_indices(tuple(targets), w)
    return np.einsum(superop_t, s_idx, rho_t, rho_idx, out_idx)


def _to_tensor(rhos: np.ndarray, w: int) -> np.ndarray:
    return rhos.reshape((rhos.shape[0],) + (2,) * (2 * w))


def _from_tensor(t: np.ndarray, w: int) -> np.ndarray:
    d = 2**w
    return t.reshape(t.shape[0], d, d)


def apply_layer_tensor(rho_t: np.ndarray, layer: Layer, w: int, noise: NoiseModel) -> np.ndarray:
    for op in layer.ops:
        rho_t = apply_local(rho_t, _op_superop((op.name, op.pre, op.post), noise), op.qubits, w)
    if noise.has(GateClass.IDLE):
        busy = layer.qubits
        idle = _class_superop(noise, GateClass.IDLE)
        for q in range(w):
            if q not in busy:
                rho_t = apply_local(rho_t, idle, (q,), w)
    return rho_t


def apply_single_qubit_class(rho_t: np.ndarray, noise: NoiseModel, gate_class: GateClass, w: int) -> np.ndarray:
    if not noise.has(gate_class):
        return rho_t
    s = _class_superop(noise, gate_class)
    for q in range(w):
        rho_t = apply_local(rho_t, s, (q,), w)
    return rho_t


def evolve(rhos: np.ndarray, circuit: Circuit, noise: NoiseModel) -> np.ndarray:
    """Push a batch of operators of shape (B, d, d) through the noisy gate layers.

    The map is linear, so the batch may hold arbitrary matrices (for example
    Pauli operators), not only density matrices.  State-preparation and
    measurement noise are not applied here.
    """
    w = circuit.width
    if w > MAX_WIDTH:
        raise ValueError(f"simulation supports width <= {MAX_WIDTH}, got {w}")
    t = _to_tensor(np.asarray(rhos, dtype=complex), w)
    for layer in circuit.layers:
        t = apply_layer_tensor(t, layer, w, noise)
    return _from_tensor(t, w)


def zero_state(w: int) -> np.ndarray:
    rho = np.zeros((2**w, 2**w), dtype=complex)
    rho[0, 0] = 1
    return rho


def prepare(w: int, noise: NoiseModel, batch: int = 1) -> np.ndarray:
    """|0...0> for each batch entry, with StatePrep noise applied."""
    rho = np.broadcast_to(zero_state(w), (batch, 2**w, 2**w)).copy()
    t = apply_single_qubit_class(_to_tensor(rho, w), noise, GateClass.STATE_PREP, w)
    return _from_tensor(t, w)


def pre_measurement(rhos: np.ndarray, noise: NoiseModel, w: int) -> np.ndarray:
    t = apply_single_qubit_class(_to_tensor(rhos, w), noise, GateClass.MEASUREMENT, w)
    return _from_tensor(t, w)


def run(circuit: Circuit, noise: NoiseModel, initial: np.ndarray | None = None,
        measurement_noise: bool = True) -> np.ndarray:
    """Final density matrix (as an array) of one noisy run of ``circuit``."""
    w = circuit.width
    rho = prepare(w, noise) if initial is None else np.asarray(initial, dtype=complex)[None]
    rho = evolve(rho, circuit, noise)
    if measurement_noise:
        rho = pre_measurement(rho, noise, w)
    return rho[0]


def simulate(circuit: Circuit, noise: NoiseModel, initial: DensityMatrix | None = None,
             measurement_noise: bool = True) -> DensityMatrix:
    data = run(circuit, noise, None if initial is None else initial.data, measurement_noise)
    return DensityMatrix(circuit.width, data)


def outcome_probabilities(rho: np.ndarray) -> np.ndarray:
    p = np.clip(np.real(np.diag(rho)), 0.0, None)
    return p / p.sum()
