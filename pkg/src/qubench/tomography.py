"""Exact channel extraction and fidelity figures of merit.

The "tomography" here is not an experiment: the simulator's linear map is
applied to every Pauli basis operator, which yields the exact PTM of a noisy
circuit.  Fidelities follow from comparing that PTM against the ideal one.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, NamedTuple

import numpy as np

from . import simulator
from .circgen import Circuit, GateOp, Layer, ideal_unitary
from .noise import NoiseModel
from .qcore import PauliTransferMatrix, pauli_basis, ptm_from_unitary
from .twirl import randomized_compile

MAX_TOMOGRAPHY_WIDTH = 4
MAX_HAAR_WIDTH = 3


class SingularIdealError(ValueError):
    pass


@dataclass(frozen=True)
class FidelityReport:
    entanglement_fidelity: float
    average_gate_fidelity: float
    dimension: int

    def __post_init__(self):
        d = self.dimension
        expected = (d * self.entanglement_fidelity + 1) / (d + 1)
        if abs(expected - self.average_gate_fidelity) > 1e-12:
            raise ValueError("average gate fidelity is inconsistent with the entanglement fidelity")

    @classmethod
    def from_entanglement_fidelity(cls, f_e: float, dimension: int) -> "FidelityReport":
        f_e = float(min(max(f_e, 0.0), 1.0))
        return cls(f_e, (dimension * f_e + 1) / (dimension + 1), dimension)

    @property
    def average_error_rate(self) -> float:
        return 1.0 - self.average_gate_fidelity

    r = average_error_rate

    @property
    def process_infidelity(self) -> float:
        return 1.0 - self.entanglement_fidelity

    def to_dict(self) -> dict:
        return {
            "entanglement_fidelity": self.entanglement_fidelity,
            "average_gate_fidelity": self.average_gate_fidelity,
            "average_error_rate": self.average_error_rate,
            "dimension": self.dimension,
        }


class MonteCarloEstimate(NamedTuple):
    mean: float
    sem: float


def _ptm_of_map(outputs: np.ndarray, w: int) -> PauliTransferMatrix:
    basis = pauli_basis(w)
    d = 2**w
    # R[a, b] = tr(P_a E(P_b)) / d
    r = np.einsum("aij,bji->ab", basis, outputs) / d
    return PauliTransferMatrix(w, r.real)


def circuit_channel_ptm(circuit: Circuit, noise: NoiseModel) -> PauliTransferMatrix:
    """PTM of the noisy gate layers of ``circuit`` (no state-prep or readout noise)."""
    w = circuit.width
    if w > MAX_TOMOGRAPHY_WIDTH:
        raise ValueError(f"channel extraction supports width <= {MAX_TOMOGRAPHY_WIDTH}, got {w}")
    return _ptm_of_map(simulator.evolve(pauli_basis(w), circuit, noise), w)


def ideal_ptm(circuit: Circuit) -> PauliTransferMatrix:
    return ptm_from_unitary(ideal_unitary(circuit))


def entanglement_fidelity(actual: PauliTransferMatrix, ideal: PauliTransferMatrix) -> float:
    if actual.n_qubits != ideal.n_qubits:
        raise ValueError("PTMs act on different numbers of qubits")
    r_ideal = ideal.data
    dim = r_ideal.shape[0]
    if np.allclose(r_ideal @ r_ideal.T, np.eye(dim), atol=1e-9):
        inv = r_ideal.T
    else:
        if abs(np.linalg.det(r_ideal)) < 1e-12:
            raise SingularIdealError("ideal PTM is not invertible")
        inv = np.linalg.inv(r_ideal)
    f = np.trace(inv @ actual.data) / dim
    return float(min(max(f, 0.0), 1.0))


def average_gate_fidelity(actual: PauliTransferMatrix, ideal: PauliTransferMatrix) -> FidelityReport:
    return FidelityReport.from_entanglement_fidelity(entanglement_fidelity(actual, ideal), 2**actual.n_qubits)


def circuit_fidelity(circuit: Circuit, noise: NoiseModel) -> FidelityReport:
    return average_gate_fidelity(circuit_channel_ptm(circuit, noise), ideal_ptm(circuit))


def error_ptm(circuit: Circuit, noise: NoiseModel) -> PauliTransferMatrix:
    """Noisy PTM with the ideal unitary undone: R_ideal^T R_noisy."""
    return PauliTransferMatrix(circuit.width, ideal_ptm(circuit).data.T @ circuit_channel_ptm(circuit, noise).data)


def offdiagonal_mass(ptm: PauliTransferMatrix) -> float:
    r = ptm.data
    return float(np.linalg.norm(r - np.diag(np.diag(r))))


def haar_random_states(n: int, w: int, rng: np.random.Generator) -> np.ndarray:
    d = 2**w
    psi = rng.normal(size=(n, d)) + 1j * rng.normal(size=(n, d))
    return psi / np.linalg.norm(psi, axis=1, keepdims=True)


def haar_average_fidelity_mc(circuit: Circuit, noise: NoiseModel, n_states: int = 5000,
                             seed: int | None = None) -> MonteCarloEstimate:
    """Sample mean and standard error of <psi|U^dag E(psi) U|psi> over Haar-random psi."""
    if n_states < 100:
        raise ValueError(f"need at least 100 states, got {n_states}")
    w = circuit.width
    if w > MAX_HAAR_WIDTH:
        raise ValueError(f"Haar sampling supports width <= {MAX_HAAR_WIDTH}, got {w}")
    rng = np.random.default_rng(seed)
    psi = haar_random_states(n_states, w, rng)
    rhos = np.einsum("ni,nj->nij", psi, psi.conj())
    out = simulator.evolve(rhos, circuit, noise)
    target = psi @ ideal_unitary(circuit).T
    f = np.einsum("ni,nij,nj->n", target.conj(), out, target).real
    return MonteCarloEstimate(float(f.mean()), float(f.std(ddof=1) / np.sqrt(n_states)))


# Per-layer reference used for protocol comparisons.  Noise is applied after
# each gate, so a layer's error channel is the tensor product of its gate
# noises and does not depend on which unitaries (or dressings) it carries.

def _layer_shape(layer: Layer) -> tuple:
    return tuple(sorted((op.qubits, op.is_two_qubit) for op in layer.ops))


@lru_cache(maxsize=4096)
def _shape_infidelity(shape: tuple, w: int, noise: NoiseModel) -> float:
    ops = tuple(GateOp("cnot" if two else "id", qs) for qs, two in shape)
    circuit = Circuit(w, (Layer(ops),))
    return circuit_fidelity(circuit, noise).process_infidelity


def layer_process_infidelity(layer: Layer, w: int, noise: NoiseModel) -> float:
    return _shape_infidelity(_layer_shape(layer), w, noise)


def mean_layer_infidelity(layers: Iterable[Layer], w: int, noise: NoiseModel) -> float:
    values = [layer_process_infidelity(l, w, noise) for l in layers]
    if not values:
        raise ValueError("no layers to average")
    return float(np.mean(values))


def twirl_averaged_error_ptm(circuit: Circuit, noise: NoiseModel, n_twirls: int,
                             seed: int | None = None, absorb_final: bool = False) -> PauliTransferMatrix:
    """Mean error PTM over ``n_twirls`` randomized compilations of ``circuit``.

    Each error PTM is taken relative to the twirled circuit's own ideal.  By
    default the closing correction is left pending so the last layer's
    noise is twirled too; absorbing it leaves that noise untouched.
    """
    rng = np.random.default_rng(seed)
    acc = np.zeros((4**circuit.width,) * 2)
    for _ in range(n_twirls):
        twirled, _ = randomized_compile(circuit, rng=rng, absorb_final=absorb_final)
        acc += error_ptm(twirled, noise).data
    return PauliTransferMatrix(circuit.width, acc / n_twirls)
