"""Error channels and the per-gate-class noise model.

Channel strengths are the raw channel parameters: ``gamma`` for amplitude
damping (T1), ``lambda`` for pure dephasing (T2), the over-rotation angle for
coherent errors and ``p`` for symmetric depolarizing noise.  Noise is applied
after the ideal gate.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np
from scipy.linalg import expm

from .qcore import KrausChannel, pauli_labels, pauli_matrix


class NoiseKind(str, enum.Enum):
    T1 = "T1"
    T2 = "T2"
    COHERENT_1Q = "Coherent1Q"
    COHERENT_2Q = "Coherent2Q"
    DEPOLARIZING = "Depolarizing"


class GateClass(str, enum.Enum):
    ONE_QUBIT = "OneQubitGate"
    TWO_QUBIT = "TwoQubitGate"
    IDLE = "Idle"
    STATE_PREP = "StatePrep"
    MEASUREMENT = "Measurement"


# gate classes whose channel acts on a single qubit
SINGLE_QUBIT_CLASSES = (GateClass.ONE_QUBIT, GateClass.IDLE, GateClass.STATE_PREP, GateClass.MEASUREMENT)


class NoiseModelError(ValueError):
    pass


def amplitude_damping_channel(gamma: float) -> KrausChannel:
    if not 0 <= gamma <= 1:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    k0 = np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex)
    k1 = np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex)
    return KrausChannel(1, (k0, k1))


def phase_damping_channel(lam: float) -> KrausChannel:
    if not 0 <= lam <= 1:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    k0 = np.array([[1, 0], [0, math.sqrt(1 - lam)]], dtype=complex)
    k1 = np.array([[0, 0], [0, math.sqrt(lam)]], dtype=complex)
    return KrausChannel(1, (k0, k1))


def depolarizing_channel(p: float, n_qubits: int = 1) -> KrausChannel:
    """(1 - p) rho + p I/d, written as a weighted Pauli Kraus set."""
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if n_qubits not in (1, 2):
        raise ValueError(f"depolarizing channel supports 1 or 2 qubits, got {n_qubits}")
    labels = pauli_labels(n_qubits)
    n_paulis = len(labels)
    # uniform Pauli mixing with total weight p reproduces p I/d
    w_id = 1 - p + p / n_paulis
    w_other = p / n_paulis
    ops = [math.sqrt(w_id) * pauli_matrix(labels[0])]
    ops += [math.sqrt(w_other) * pauli_matrix(lab) for lab in labels[1:]]
    return KrausChannel(n_qubits, tuple(ops))


def coherent_error_channel(theta: float, axis: str = "Z", n_qubits: int | None = None) -> KrausChannel:
    """Unitary over-rotation exp(-i theta/2 P) about the Pauli string ``axis``."""
    axis = axis.upper()
    if n_qubits is None:
        n_qubits = len(axis)
    if len(axis) != n_qubits or not set(axis) <= set("IXYZ") or set(axis) == {"I"}:
        raise ValueError(f"invalid {n_qubits}-qubit rotation axis {axis!r}")
    if not 0 <= theta <= math.pi:
        raise ValueError(f"theta must lie in [0, pi], got {theta}")
    u = expm(-0.5j * theta * pauli_matrix(axis))
    return KrausChannel(n_qubits, (u,))


def gamma_from_times(gate_time: float, t1: float) -> float:
    """Damping probability accumulated over ``gate_time`` for a qubit with relaxation time ``t1``."""
    return 1.0 - math.exp(-gate_time / t1)


def lambda_from_times(gate_time: float, t_phi: float) -> float:
    """Dephasing parameter with sqrt(1 - lambda) = exp(-gate_time / t_phi)."""
    return 1.0 - math.exp(-2.0 * gate_time / t_phi)


@dataclass(frozen=True)
class NoiseSpec:
    kind: NoiseKind
    strength: float
    axis: str | None = None

    def __post_init__(self):
        kind = NoiseKind(self.kind)
        object.__setattr__(self, "kind", kind)
        s = float(self.strength)
        object.__setattr__(self, "strength", s)
        if kind in (NoiseKind.COHERENT_1Q, NoiseKind.COHERENT_2Q):
            if not 0 <= s <= math.pi:
                raise ValueError(f"{kind.value} angle must lie in [0, pi], got {s}")
            default = "Z" if kind is NoiseKind.COHERENT_1Q else "ZZ"
            axis = (self.axis or default).upper()
            want = 1 if kind is NoiseKind.COHERENT_1Q else 2
            if len(axis) != want or not set(axis) <= set("IXYZ") or set(axis) == {"I"}:
                raise ValueError(f"invalid axis {axis!r} for {kind.value}")
            object.__setattr__(self, "axis", axis)
        else:
            if not 0 <= s <= 1:
                raise ValueError(f"{kind.value} strength must lie in [0, 1], got {s}")
            if self.axis is not None:
                raise ValueError(f"{kind.value} does not take an axis")

    def channel(self, n_qubits: int) -> KrausChannel:
        """Channel for this spec acting on a gate of ``n_qubits`` qubits.

        Single-qubit kinds attached to a two-qubit gate act independently on
        both of its qubits.
        """
        kind = self.kind
        if kind is NoiseKind.COHERENT_2Q:
            if n_qubits != 2:
                raise NoiseModelError("Coherent2Q noise can only be attached to two-qubit gates")
            return coherent_error_channel(self.strength, self.axis, 2)
        if kind is NoiseKind.DEPOLARIZING:
            return depolarizing_channel(self.strength, n_qubits)
        if kind is NoiseKind.T1:
            one = amplitude_damping_channel(self.strength)
        elif kind is NoiseKind.T2:
            one = phase_damping_channel(self.strength)
        else:
            one = coherent_error_channel(self.strength, self.axis, 1)
        return one if n_qubits == 1 else one.tensor(one)

    def to_record(self, gate_class: GateClass) -> dict:
        return {
            "gate_class": GateClass(gate_class).value,
            "kind": self.kind.value,
            "strength": self.strength,
            "axis": self.axis,
        }


@dataclass(frozen=True)
class NoiseModel:
    """Noise attached per gate class; an empty model is noiseless."""

    per_gate_class: tuple = field(default=())

    def __post_init__(self):
        items = self.per_gate_class
        if isinstance(items, Mapping):
            items = items.items()
        norm = {}
        for gc, specs in items:
            gc = GateClass(gc)
            specs = tuple(specs)
            for spec in specs:
                if not isinstance(spec, NoiseSpec):
                    raise NoiseModelError(f"expected NoiseSpec, got {spec!r}")
                if gc in SINGLE_QUBIT_CLASSES and spec.kind is NoiseKind.COHERENT_2Q:
                    raise NoiseModelError(f"Coherent2Q noise cannot attach to {gc.value}")
            if specs:
                norm[gc] = norm.get(gc, ()) + specs
        ordered = tuple((gc, norm[gc]) for gc in GateClass if gc in norm)
        object.__setattr__(self, "per_gate_class", ordered)

    def specs(self, gate_class: GateClass) -> tuple:
        gate_class = GateClass(gate_class)
        for gc, specs in self.per_gate_class:
            if gc is gate_class:
                return specs
        return ()

    def has(self, gate_class: GateClass) -> bool:
        return bool(self.specs(gate_class))

    @property
    def is_noiseless(self) -> bool:
        return not self.per_gate_class

    def to_records(self) -> list[dict]:
        return [spec.to_record(gc) for gc, specs in self.per_gate_class for spec in specs]

    @classmethod
    def from_records(cls, records: Iterable[Mapping]) -> "NoiseModel":
        grouped: dict[GateClass, list[NoiseSpec]] = {}
        for rec in records:
            unknown = set(rec) - {"gate_class", "kind", "strength", "axis"}
            if unknown:
                raise NoiseModelError(f"unknown noise record fields {sorted(unknown)}")
            gc = GateClass(rec["gate_class"])
            grouped.setdefault(gc, []).append(NoiseSpec(rec["kind"], rec["strength"], rec.get("axis")))
        return cls(tuple(grouped.items()))


def build_gate_noise(model: NoiseModel, gate_class: GateClass) -> KrausChannel:
    """Composition, in listed order, of every channel attached to ``gate_class``."""
    gate_class = GateClass(gate_class)
    n = 2 if gate_class is GateClass.TWO_QUBIT else 1
    return _build_gate_noise(model, gate_class, n)


@lru_cache(maxsize=256)
def _build_gate_noise(model: NoiseModel, gate_class: GateClass, n: int) -> KrausChannel:
    channel = KrausChannel.identity(n)
    for spec in model.specs(gate_class):
        channel = channel.then(spec.channel(n))
    return channel


# Labels understood by ``standard_noise_model``; combined labels join kinds with "+".
STANDARD_KINDS = ("depolarizing", "T1", "T2", "coherent1q", "coherent2q")


def standard_noise_model(label: str, strength: float, axis_1q: str = "Z", axis_2q: str = "ZZ") -> NoiseModel:
    """The sweep models used by the experiment runner.

    Every component of ``label`` (e.g. ``"T1+coherent1q"``) is attached with the
    same ``strength`` to both one- and two-qubit gates, except ``coherent2q``
    which only exists on two-qubit gates.
    """
    one: list[NoiseSpec] = []
    two: list[NoiseSpec] = []
    for part in label.split("+"):
        key = part.strip().lower()
        if key == "depolarizing":
            one.append(NoiseSpec(NoiseKind.DEPOLARIZING, strength))
            two.append(NoiseSpec(NoiseKind.DEPOLARIZING, strength))
        elif key == "t1":
            one.append(NoiseSpec(NoiseKind.T1, strength))
            two.append(NoiseSpec(NoiseKind.T1, strength))
        elif key == "t2":
            one.append(NoiseSpec(NoiseKind.T2, strength))
            two.append(NoiseSpec(NoiseKind.T2, strength))
        elif key == "coherent1q":
            one.append(NoiseSpec(NoiseKind.COHERENT_1Q, strength, axis_1q))
            two.append(NoiseSpec(NoiseKind.COHERENT_1Q, strength, axis_1q))
        elif key == "coherent2q":
            two.append(NoiseSpec(NoiseKind.COHERENT_2Q, strength, axis_2q))
        else:
            raise NoiseModelError(f"unknown noise kind {part!r}; expected one of {STANDARD_KINDS}")
    return NoiseModel(((GateClass.ONE_QUBIT, one), (GateClass.TWO_QUBIT, two)))


def combined_noise_model(parts: Mapping[str, float]) -> NoiseModel:
    """Like ``standard_noise_model`` but with an individual strength per component."""
    per: dict[GateClass, list[NoiseSpec]] = {}
    for label, strength in parts.items():
        for gc, specs in standard_noise_model(label, strength).per_gate_class:
            per.setdefault(gc, []).extend(specs)
    return NoiseModel(tuple(per.items()))
