"""Layered circuits, connectivity graphs and the density-parameterised generator.

A circuit is a list of layers; each layer is a set of gates on disjoint
qubits.  Generated layers cover every qubit: the CNOTs of the layer form a
matching on the topology graph and every other qubit gets a random one-qubit
gate.

Gates may carry Pauli *dressings* (``pre`` applied before the gate, ``post``
after it).  A dressed gate is a single physical operation whose unitary is
``P_post @ G @ P_pre``; it carries the noise of the bare gate.  Dressings are
how Pauli frames and twirls are absorbed without adding layers.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .qcore import embed_operator, pauli_matrix

ONE_QUBIT_GATES = ("id", "x", "y", "z", "h", "s", "sdg", "t", "tdg")
GATE_NAMES = ONE_QUBIT_GATES + ("cnot",)
INVERSE = {"id": "id", "x": "x", "y": "y", "z": "z", "h": "h", "s": "sdg", "sdg": "s",
           "t": "tdg", "tdg": "t", "cnot": "cnot"}
MAX_SIM_WIDTH = 6

_SQ2 = 1 / math.sqrt(2)
_GATE_MATRICES = {
    "id": np.eye(2),
    "x": pauli_matrix("X"),
    "y": pauli_matrix("Y"),
    "z": pauli_matrix("Z"),
    "h": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]]),
    "s": np.diag([1, 1j]),
    "sdg": np.diag([1, -1j]),
    "t": np.diag([1, np.exp(1j * math.pi / 4)]),
    "tdg": np.diag([1, np.exp(-1j * math.pi / 4)]),
    "cnot": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]),
}


class CircuitError(ValueError):
    pass


class GenerationError(RuntimeError):
    """Random circuit generation is infeasible for the requested parameters."""


def gate_matrix(name: str) -> np.ndarray:
    return np.asarray(_GATE_MATRICES[name], dtype=complex)


def _check_pauli(label: str | None, n: int) -> str | None:
    if label is None:
        return None
    label = label.upper()
    if len(label) != n or not set(label) <= set("IXYZ"):
        raise CircuitError(f"dressing {label!r} is not a {n}-qubit Pauli string")
    return None if set(label) == {"I"} else label


@dataclass(frozen=True)
class GateOp:
    name: str
    qubits: tuple
    pre: str | None = None
    post: str | None = None

    def __post_init__(self):
        if self.name not in GATE_NAMES:
            raise CircuitError(f"unknown gate {self.name!r}")
        qubits = tuple(int(q) for q in self.qubits)
        want = 2 if self.name == "cnot" else 1
        if len(qubits) != want or len(set(qubits)) != want:
            raise CircuitError(f"{self.name} needs {want} distinct qubit(s), got {qubits}")
        object.__setattr__(self, "qubits", qubits)
        object.__setattr__(self, "pre", _check_pauli(self.pre, want))
        object.__setattr__(self, "post", _check_pauli(self.post, want))

    @property
    def is_two_qubit(self) -> bool:
        return self.name == "cnot"

    def matrix(self) -> np.ndarray:
        """Local unitary on ``self.qubits`` (in that order), dressings included."""
        return _dressed_matrix(self.name, self.pre, self.post)

    def inverse(self) -> "GateOp":
        return GateOp(INVERSE[self.name], self.qubits, pre=self.post, post=self.pre)

    def to_dict(self) -> dict:
        d = {"name": self.name, "qubits": list(self.qubits)}
        if self.pre:
            d["pre"] = self.pre
        if self.post:
            d["post"] = self.post
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GateOp":
        return cls(d["name"], tuple(d["qubits"]), d.get("pre"), d.get("post"))


@lru_cache(maxsize=None)
def _dressed_matrix(name: str, pre: str | None, post: str | None) -> np.ndarray:
    u = gate_matrix(name)
    if pre:
        u = u @ pauli_matrix(pre)
    if post:
        u = pauli_matrix(post) @ u
    u.setflags(write=False)
    return u


@dataclass(frozen=True)
class Layer:
    ops: tuple = ()

    def __post_init__(self):
        ops = tuple(self.ops)
        seen: set[int] = set()
        for op in ops:
            if not isinstance(op, GateOp):
                raise CircuitError(f"layer entries must be GateOp, got {op!r}")
            if seen & set(op.qubits):
                raise CircuitError(f"qubit used twice in one layer: {op}")
            seen |= set(op.qubits)
        object.__setattr__(self, "ops", ops)

    @property
    def qubits(self) -> set[int]:
        return {q for op in self.ops for q in op.qubits}

    def one_qubit_ops(self) -> list[GateOp]:
        return [op for op in self.ops if not op.is_two_qubit]

    def two_qubit_ops(self) -> list[GateOp]:
        return [op for op in self.ops if op.is_two_qubit]

    def signature(self) -> tuple:
        return tuple(sorted((op.qubits, op.name, op.pre or "", op.post or "") for op in self.ops))


@dataclass(frozen=True)
class Topology:
    n_qubits: int
    edges: frozenset
    kind: str = "Custom"
    rows: int | None = None
    cols: int | None = None

    def __post_init__(self):
        norm = set()
        for a, b in self.edges:
            a, b = int(a), int(b)
            if a == b:
                raise CircuitError(f"self-loop on qubit {a}")
            if not (0 <= a < self.n_qubits and 0 <= b < self.n_qubits):
                raise CircuitError(f"edge {(a, b)} out of range for {self.n_qubits} qubits")
            norm.add((min(a, b), max(a, b)))
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def line(cls, n: int) -> "Topology":
        return cls(n, frozenset((i, i + 1) for i in range(n - 1)), "Line")

    @classmethod
    def ring(cls, n: int) -> "Topology":
        edges = {(i, (i + 1) % n) for i in range(n)} if n > 2 else {(i, i + 1) for i in range(n - 1)}
        return cls(n, frozenset(edges), "Ring")

    @classmethod
    def grid(cls, rows: int, cols: int) -> "Topology":
        edges = set()
        for r in range(rows):
            for c in range(cols):
                q = r * cols + c
                if c + 1 < cols:
                    edges.add((q, q + 1))
                if r + 1 < rows:
                    edges.add((q, q + cols))
        return cls(rows * cols, frozenset(edges), "Grid", rows, cols)

    @classmethod
    def complete(cls, n: int) -> "Topology":
        return cls(n, frozenset(combinations(range(n), 2)), "Complete")

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def max_matching(self) -> int:
        return _max_matching_size(self.n_qubits, tuple(self.sorted_edges()))

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "n_qubits": self.n_qubits, "edges": [list(e) for e in self.sorted_edges()]}
        if self.kind == "Grid":
            d["rows"], d["cols"] = self.rows, self.cols
        return d

    @classmethod
    def from_dict(cls, d: dict, n_qubits: int | None = None) -> "Topology":
        kind = d.get("kind", "Custom")
        n = d.get("n_qubits", n_qubits)
        k = kind.lower()
        if k == "grid":
            return cls.grid(d["rows"], d["cols"])
        if n is None:
            raise CircuitError("topology needs n_qubits")
        if k == "line":
            return cls.line(n)
        if k == "ring":
            return cls.ring(n)
        if k == "complete":
            return cls.complete(n)
        return cls(n, frozenset(tuple(e) for e in d.get("edges", [])), "Custom")


@lru_cache(maxsize=None)
def _max_matching_size(n: int, edges: tuple) -> int:
    best = 0

    def search(i: int, used: frozenset, size: int):
        nonlocal best
        best = max(best, size)
        if size + (len(edges) - i) <= best or best * 2 >= n:
            return
        for j in range(i, len(edges)):
            a, b = edges[j]
            if a not in used and b not in used:
                search(j + 1, used | {a, b}, size + 1)

    search(0, frozenset(), 0)
    return best


@dataclass(frozen=True)
class Circuit:
    width: int
    layers: tuple = ()
    topology: Topology | None = None
    seed: int | None = None

    def __post_init__(self):
        layers = tuple(l if isinstance(l, Layer) else Layer(tuple(l)) for l in self.layers)
        for layer in layers:
            for op in layer.ops:
                if any(q >= self.width or q < 0 for q in op.qubits):
                    raise CircuitError(f"{op} acts outside a width-{self.width} register")
                if op.is_two_qubit and self.topology is not None:
                    a, b = op.qubits
                    if (min(a, b), max(a, b)) not in self.topology.edges:
                        raise CircuitError(f"cnot on {op.qubits} is not a topology edge")
        object.__setattr__(self, "layers", layers)

    @property
    def depth(self) -> int:
        return len(self.layers)

    def ops(self) -> Iterable[GateOp]:
        for layer in self.layers:
            yield from layer.ops

    def count(self, name: str) -> int:
        return sum(op.name == name for op in self.ops())

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.width != self.width:
            raise CircuitError("cannot concatenate circuits of different widths")
        return Circuit(self.width, self.layers + other.layers, self.topology or other.topology, self.seed)

    def with_layers(self, layers: Sequence[Layer]) -> "Circuit":
        return Circuit(self.width, tuple(layers), self.topology, self.seed)

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "seed": self.seed,
            "topology": self.topology.to_dict() if self.topology else None,
            "layers": [[op.to_dict() for op in layer.ops] for layer in self.layers],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "Circuit":
        topo = Topology.from_dict(d["topology"], d["width"]) if d.get("topology") else None
        layers = tuple(Layer(tuple(GateOp.from_dict(o) for o in layer)) for layer in d["layers"])
        return cls(d["width"], layers, topo, d.get("seed"))


def n_two_qubit_gates(w: int, d: int, xi: float) -> int:
    """alpha = round(w d xi / 2), rounding half to even."""
    return round(w * d * xi / 2)


def _random_matching(edges: list[tuple[int, int]], size: int, rng: np.random.Generator,
                     attempts: int = 200) -> list[tuple[int, int]]:
    for _ in range(attempts):
        chosen: list[tuple[int, int]] = []
        used: set[int] = set()
        for i in rng.permutation(len(edges)):
            a, b = edges[i]
            if a not in used and b not in used:
                chosen.append((a, b))
                used |= {a, b}
                if len(chosen) == size:
                    return chosen
    raise GenerationError(f"could not sample a matching of size {size} on the topology")


@lru_cache(maxsize=None)
def _n_capped_compositions(total: int, parts: int, cap: int) -> int:
    """Number of ways to write ``total`` as ``parts`` ordered integers in [0, cap]."""
    if parts == 0:
        return int(total == 0)
    return sum(_n_capped_compositions(total - x, parts - 1, cap) for x in range(min(cap, total) + 1))


def random_composition(total: int, parts: int, rng: np.random.Generator, cap: int | None = None) -> list[int]:
    """Uniformly random weak composition of ``total`` into ``parts`` parts, each at most ``cap``.

    Parts are drawn one at a time with weights given by the number of
    completions, which is exactly uniform over the capped compositions.
    """
    cap = total if cap is None else min(cap, total)
    if total > parts * cap:
        raise GenerationError(f"cannot split {total} into {parts} parts of at most {cap}")
    out = []
    remaining = total
    for left in range(parts, 0, -1):
        options = range(min(cap, remaining) + 1)
        weights = np.array([float(_n_capped_compositions(remaining - x, left - 1, cap)) for x in options])
        x = int(rng.choice(len(weights), p=weights / weights.sum()))
        out.append(x)
        remaining -= x
    return out


def random_one_qubit_gate(rng: np.random.Generator) -> str:
    return ONE_QUBIT_GATES[int(rng.integers(len(ONE_QUBIT_GATES)))]


def generate_random_circuit(w: int, d: int, xi: float, topology: Topology, seed: int) -> Circuit:
    if w < 1 or d < 1:
        raise ValueError(f"width and depth must be positive, got w={w}, d={d}")
    if not 0 <= xi <= 1:
        raise ValueError(f"density xi must lie in [0, 1], got {xi}")
    if topology.n_qubits != w:
        raise ValueError(f"topology has {topology.n_qubits} qubits but width is {w}")
    rng = np.random.default_rng(seed)
    alpha = n_two_qubit_gates(w, d, xi)
    edges = topology.sorted_edges()
    if alpha > 0 and not edges:
        raise GenerationError(f"{alpha} two-qubit gates requested but the topology has no edges")
    per_layer_max = topology.max_matching()
    if alpha > d * per_layer_max:
        raise GenerationError(
            f"alpha={alpha} exceeds depth x max matching = {d} x {per_layer_max}"
        )
    counts = random_composition(alpha, d, rng, per_layer_max)
    layers = []
    for count in counts:
        ops = []
        used: set[int] = set()
        for a, b in _random_matching(edges, count, rng) if count else []:
            if rng.random() < 0.5:
                a, b = b, a
            ops.append(GateOp("cnot", (a, b)))
            used |= {a, b}
        for q in range(w):
            if q not in used:
                ops.append(GateOp(random_one_qubit_gate(rng), (q,)))
        layers.append(Layer(tuple(sorted(ops, key=lambda o: o.qubits[0] if len(o.qubits) == 1 else min(o.qubits)))))
    return Circuit(w, tuple(layers), topology, seed)


def layer_unitary(layer: Layer, width: int) -> np.ndarray:
    u = np.eye(2**width, dtype=complex)
    for op in layer.ops:
        u = embed_operator(op.matrix(), op.qubits, width) @ u
    return u


def ideal_unitary(circuit: Circuit) -> np.ndarray:
    if circuit.width > MAX_SIM_WIDTH:
        raise ValueError(f"ideal_unitary supports width <= {MAX_SIM_WIDTH}, got {circuit.width}")
    u = np.eye(2**circuit.width, dtype=complex)
    for layer in circuit.layers:
        u = layer_unitary(layer, circuit.width) @ u
    return u


def invert_layer(layer: Layer) -> Layer:
    return Layer(tuple(op.inverse() for op in layer.ops))


def dagger_circuit(circuit: Circuit) -> Circuit:
    return circuit.with_layers([invert_layer(l) for l in reversed(circuit.layers)])


def equal_up_to_phase(u: np.ndarray, v: np.ndarray, atol: float = 1e-10) -> bool:
    """True when u = e^{i phi} v for some global phase."""
    overlap = np.vdot(v, u)
    if abs(overlap) < 1e-12:
        return False
    phase = overlap / abs(overlap)
    return bool(np.max(np.abs(u - phase * v)) <= atol)


# OpenQASM 2.0

_QASM_NAME = {"cnot": "cx"}
_FROM_QASM = {"cx": "cnot", "tdag": "tdg", "i": "id"}


def _pauli_ops(label: str | None, qubits: tuple) -> list[GateOp]:
    if not label:
        return []
    return [GateOp(p.lower(), (q,)) for p, q in zip(label, qubits) if p != "I"]


def to_openqasm(circuit: Circuit) -> str:
    """OpenQASM 2.0 text; layers are separated by barriers, dressings become Pauli gates."""
    w = circuit.width
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{w}];", f"creg c[{w}];"]
    for i, layer in enumerate(circuit.layers):
        if i:
            lines.append("barrier q;")
        for op in layer.ops:
            for g in _pauli_ops(op.pre, op.qubits) + [GateOp(op.name, op.qubits)] + _pauli_ops(op.post, op.qubits):
                args = ",".join(f"q[{q}]" for q in g.qubits)
                lines.append(f"{_QASM_NAME.get(g.name, g.name)} {args};")
    lines.append("measure q -> c;")
    return "\n".join(lines) + "\n"


_GATE_LINE = re.compile(r"^([a-z]+)\s+(q\[\d+\](?:\s*,\s*q\[\d+\])*)$")


def parse_openqasm(text: str) -> Circuit:
    """Parse the subset emitted by ``to_openqasm`` back into a circuit.

    Gates between barriers form a layer; a gate that reuses a qubit already
    busy in the current layer opens a new one.
    """
    width = None
    layers: list[list[GateOp]] = [[]]
    busy: set[int] = set()
    for raw in text.splitlines():
        line = raw.split("//")[0].strip().rstrip(";").strip()
        if not line or line.startswith(("OPENQASM", "include", "creg", "measure")):
            continue
        if line.startswith("qreg"):
            width = int(re.search(r"\[(\d+)\]", line).group(1))
            continue
        if line.startswith("barrier"):
            layers.append([])
            busy = set()
            continue
        m = _GATE_LINE.match(line)
        if not m:
            raise CircuitError(f"unsupported OpenQASM statement: {raw!r}")
        name = _FROM_QASM.get(m.group(1), m.group(1))
        qubits = tuple(int(x) for x in re.findall(r"q\[(\d+)\]", m.group(2)))
        if busy & set(qubits):
            layers.append([])
            busy = set()
        layers[-1].append(GateOp(name, qubits))
        busy |= set(qubits)
    if width is None:
        raise CircuitError("OpenQASM program declares no qreg")
    return Circuit(width, tuple(Layer(tuple(l)) for l in layers if l))
