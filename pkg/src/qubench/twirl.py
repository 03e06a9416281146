"""Randomized compiling by Pauli twirling of every layer.

Each layer is treated as a one-qubit sub-layer ``C_k`` followed by a CNOT
sub-layer ``G_k``.  A random Pauli ``T_k`` is inserted between them and the
correction ``T^c_k = G_k T_k G_k^dag`` is pushed into the next layer.  All
inserted Paulis are absorbed as dressings of existing gates, so neither the
depth nor the CNOT placements change.  Conjugation signs are dropped (they
are global phases).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .circgen import Circuit, GateOp, Layer
from .qcore import pauli_labels, pauli_matrix

# symplectic (x, z) bits of the single-qubit Paulis
_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_FROM_BITS = {v: k for k, v in _BITS.items()}
PAULI_GATE = {"I": "id", "X": "x", "Y": "y", "Z": "z"}


class UnsupportedGateError(ValueError):
    pass


def multiply_paulis(*labels: str) -> str:
    """Product of equal-length Pauli strings with the phase discarded."""
    n = len(labels[0])
    out = []
    for q in range(n):
        x = z = 0
        for lab in labels:
            bx, bz = _BITS[lab[q]]
            x ^= bx
            z ^= bz
        out.append(_FROM_BITS[(x, z)])
    return "".join(out)


@lru_cache(maxsize=None)
def _conjugate(u_key: tuple, label: str) -> tuple[int, str]:
    name, pre, post = u_key
    op = GateOp(name, tuple(range(len(label))), pre, post)
    u = op.matrix()
    target = u @ pauli_matrix(label) @ u.conj().T
    d = target.shape[0]
    for cand in pauli_labels(len(label)):
        c = np.trace(pauli_matrix(cand).conj().T @ target) / d
        if abs(abs(c) - 1) < 1e-9:
            sign = int(round(c.real))
            if sign not in (1, -1):
                break
            return sign, cand
    raise UnsupportedGateError(f"{name} does not map the Pauli {label} to a Pauli")


def pauli_conjugate_through_cnot(pauli_pair: str) -> tuple[int, str]:
    """(sign, P') with cnot . P . cnot = sign * P'."""
    pauli_pair = pauli_pair.upper()
    if len(pauli_pair) != 2 or not set(pauli_pair) <= set("IXYZ"):
        raise ValueError(f"{pauli_pair!r} is not a two-qubit Pauli string")
    return _conjugate(("cnot", None, None), pauli_pair)


def conjugate_pauli_through_op(op: GateOp, label: str) -> tuple[int, str]:
    return _conjugate((op.name, op.pre, op.post), label)


@dataclass(frozen=True)
class TwirlRecord:
    layer_index: int
    twirl_gates: tuple
    correction: tuple

    def to_dict(self) -> dict:
        return {"layer_index": self.layer_index, "twirl_gates": list(self.twirl_gates),
                "correction": list(self.correction)}


def randomized_compile(circuit: Circuit, seed: int | None = None, *, absorb_final: bool = True,
                       rng: np.random.Generator | None = None,
                       twirls: list[str] | None = None) -> tuple[Circuit, list[TwirlRecord]]:
    """Twirl every layer of ``circuit`` with random Paulis.

    With ``absorb_final`` the closing correction is dressed onto the last
    layer and the output implements the same unitary as the input.  Without
    it the caller owns the pending frame, given by the last record's
    ``correction``; that keeps the last layer's noise twirled as well.

    ``twirls`` overrides the random draw with one Pauli string per layer.
    """
    if rng is None:
        rng = np.random.default_rng(seed)
    w = circuit.width
    frame = ["I"] * w
    new_layers: list[Layer] = []
    records: list[TwirlRecord] = []
    for k, layer in enumerate(circuit.layers):
        if twirls is not None:
            t = list(twirls[k])
        else:
            t = ["IXYZ"[i] for i in rng.integers(4, size=w)]
        correction = list(t)
        ops = []
        for op in layer.ops:
            qs = op.qubits
            f = "".join(frame[q] for q in qs)
            tw = "".join(t[q] for q in qs)
            if op.is_two_qubit:
                pre = multiply_paulis(op.pre or "II", tw, f)
                new = GateOp(op.name, qs, pre, op.post)
                _, out = conjugate_pauli_through_op(op, tw)
                for q, p in zip(qs, out):
                    correction[q] = p
            else:
                new = GateOp(op.name, qs, multiply_paulis(op.pre or "I", f),
                             multiply_paulis(tw, op.post or "I"))
            ops.append(new)
        idle = set(range(w)) - layer.qubits
        if idle:
            raise UnsupportedGateError(f"layer {k} leaves qubits {sorted(idle)} without a gate")
        new_layers.append(Layer(tuple(ops)))
        records.append(TwirlRecord(k, tuple(t), tuple(PAULI_GATE[p] for p in correction)))
        frame = correction
    if absorb_final and new_layers:
        last = new_layers[-1]
        ops = []
        for op in last.ops:
            f = "".join(frame[q] for q in op.qubits)
            ops.append(GateOp(op.name, op.qubits, op.pre, multiply_paulis(f, op.post or "I" * len(f))))
        new_layers[-1] = Layer(tuple(ops))
    return circuit.with_layers(new_layers), records


def pending_frame(records: list[TwirlRecord]) -> str:
    """Pauli string that undoes an un-absorbed twirl (identity if nothing was twirled)."""
    if not records:
        return ""
    inv = {v: k for k, v in PAULI_GATE.items()}
    return "".join(inv[g] for g in records[-1].correction)
