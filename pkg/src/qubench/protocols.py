"""Direct, mirror and cycle randomized benchmarking on the noisy simulator.

Work is split into cells, one per (depth, circuit index).  A cell's seed is
derived from (spec seed, protocol, depth, index) alone, so cells can run in
any order or in parallel and still reproduce the same samples.

Circuit structures
------------------
DRB   random stabilizer prep (w + 2 layers of h/s/cnot), a depth-m random
      core, then the inverse of prep+core.  The inverse layers carry random
      Pauli frames (``S_j F_j^dag S_{j+1}``) that cancel pairwise, so every
      inverse layer's noise is Pauli twirled.  Each unit of m executes two
      noisy layers, hence ``layers_per_depth = 2``.  Target: all zeros.
MRB   random 1q stabilizer prep, m/2 random layers each followed by a random Pauli,
      then the framed inverse.  The outermost frame is random, making the
      target bitstring random.  Scored by effective polarization.
CRB   one generated cycle per circuit index, repeated m times with a fresh
      Pauli twirl per repetition, started from a +1 eigenstate of each
      benchmarked Pauli.  Scored by the expectation of the ideally
      propagated Pauli; each Pauli is fitted separately.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import simulator
from .backend import sample_counts
from .circgen import (
    Circuit,
    GateOp,
    Layer,
    Topology,
    _random_matching,
    generate_random_circuit,
    ideal_unitary,
    invert_layer,
)
from .fitting import DecayFitResult, average_pauli_fits, fit_decay
from .noise import NoiseModel
from .qcore import DensityMatrix, pauli_labels, pauli_matrix
from .twirl import multiply_paulis, randomized_compile

DEFAULT_M_LIST = (2, 4, 8, 16, 32)
DEFAULT_K = 20
EXHAUSTIVE_PAULI_WIDTH = 2
SAMPLED_PAULIS = 20


class Protocol(str, enum.Enum):
    DRB = "DRB"
    MRB = "MRB"
    CRB = "CRB"


_CODES = {Protocol.DRB: 1, Protocol.MRB: 2, Protocol.CRB: 3}
LAYERS_PER_DEPTH = {Protocol.DRB: 2, Protocol.MRB: 1, Protocol.CRB: 1}


@dataclass(frozen=True)
class ProtocolRunSpec:
    protocol: Protocol
    width: int
    xi: float = 0.75
    m_list: tuple = DEFAULT_M_LIST
    circuits_per_depth: int = DEFAULT_K
    shots: int = 0
    noise: NoiseModel = field(default_factory=NoiseModel)
    seed: int = 0
    topology: Topology | None = None
    n_sampled_paulis: int = SAMPLED_PAULIS

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        m_list = tuple(int(m) for m in self.m_list)
        object.__setattr__(self, "m_list", m_list)
        if len(m_list) < 2 or any(b <= a for a, b in zip(m_list, m_list[1:])) or m_list[0] < 1:
            raise ValueError(f"m_list must be strictly increasing positive depths, got {m_list}")
        if self.protocol is Protocol.MRB and any(m % 2 for m in m_list):
            raise ValueError(f"MRB needs even depths, got {m_list}")
        if self.circuits_per_depth < 1:
            raise ValueError("circuits_per_depth must be at least 1")
        if self.shots < 0:
            raise ValueError("shots must be non-negative")
        if self.width < 1:
            raise ValueError("width must be positive")
        if self.topology is None:
            object.__setattr__(self, "topology", Topology.line(self.width))
        elif self.topology.n_qubits != self.width:
            raise ValueError("topology width does not match the register width")

    @property
    def floor(self) -> float:
        return 1 / 2**self.width if self.protocol is Protocol.DRB else 0.0


@dataclass(frozen=True)
class DecaySample:
    protocol: str
    depth: int
    value: float
    circuit_seed: int
    circuit_index: int = 0
    pauli: str | None = None

    def __post_init__(self):
        if not -1 - 1e-9 <= self.value <= 1 + 1e-9:
            raise ValueError(f"sample value {self.value} outside [-1, 1]")

    def to_dict(self) -> dict:
        d = {"protocol": self.protocol, "m": self.depth, "circuit_index": self.circuit_index,
             "circuit_seed": self.circuit_seed, "value": self.value}
        if self.pauli is not None:
            d["pauli_label"] = self.pauli
        return d


@dataclass
class CellResult:
    protocol: Protocol
    depth: int
    index: int
    circuit_seed: int
    samples: list
    circuit: Circuit
    core_layers: tuple
    twirls: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def archive(self) -> dict:
        return {
            "protocol": self.protocol.value,
            "m": self.depth,
            "circuit_index": self.index,
            "circuit_seed": self.circuit_seed,
            "circuit": self.circuit.to_dict(),
            "twirl_records": self.twirls,
            "samples": [s.to_dict() for s in self.samples],
            "diagnostics": self.diagnostics,
        }


def cell_seed(spec: ProtocolRunSpec, m: int, k: int) -> int:
    ss = np.random.SeedSequence([spec.seed, _CODES[spec.protocol], m, k])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def _sub_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(2**31))


def random_pauli(w: int, rng: np.random.Generator) -> str:
    return "".join("IXYZ"[i] for i in rng.integers(4, size=w))


def dress_layer(layer: Layer, pre: str, post: str) -> Layer:
    """Layer implementing P_post . layer . P_pre with the Paulis folded into its gates."""
    ops = []
    for op in layer.ops:
        qs = op.qubits
        p_pre = "".join(pre[q] for q in qs)
        p_post = "".join(post[q] for q in qs)
        ops.append(GateOp(op.name, qs, multiply_paulis(op.pre or "I" * len(qs), p_pre),
                          multiply_paulis(p_post, op.post or "I" * len(qs))))
    return Layer(tuple(ops))


def framed_inverse(layers, w: int, rng: np.random.Generator, closing: str | None = None) -> list[Layer]:
    """Inverse of ``layers`` with random Pauli frames between consecutive inverse layers.

    The executed product is ``closing . (F_1 ... F_n)^dag``; ``closing``
    defaults to the identity.  Every layer must act on all qubits.
    """
    n = len(layers)
    frames = [None] * (n + 2)
    frames[n + 1] = "I" * w
    for j in range(2, n + 1):
        frames[j] = random_pauli(w, rng)
    frames[1] = closing or "I" * w
    out = []
    for j in range(n, 0, -1):
        layer = layers[j - 1]
        if len(layer.qubits) != w:
            raise ValueError("framed inversion needs layers that act on every qubit")
        out.append(dress_layer(invert_layer(layer), frames[j + 1], frames[j]))
    return out


def framed_forward(layers, w: int, rng: np.random.Generator) -> list[Layer]:
    """``layers`` with cancelling random Pauli frames: F_j -> R_{j+1} F_j R_j, R_1 = R_{n+1} = I."""
    n = len(layers)
    frames = ["I" * w] + [random_pauli(w, rng) for _ in range(n - 1)] + ["I" * w]
    return [dress_layer(layer, frames[j], frames[j + 1]) for j, layer in enumerate(layers)]


def stabilizer_prep(w: int, topology: Topology, rng: np.random.Generator) -> list[Layer]:
    """w + 2 random layers over {h, s, cnot}; cnots respect the topology."""
    edges = topology.sorted_edges()
    max_cnots = topology.max_matching() if edges else 0
    layers = []
    for _ in range(w + 2):
        n_cnot = int(rng.integers(max_cnots + 1)) if max_cnots else 0
        ops, used = [], set()
        for a, b in _random_matching(edges, n_cnot, rng) if n_cnot else []:
            if rng.random() < 0.5:
                a, b = b, a
            ops.append(GateOp("cnot", (a, b)))
            used |= {a, b}
        for q in range(w):
            if q not in used:
                ops.append(GateOp("h" if rng.random() < 0.5 else "s", (q,)))
        layers.append(Layer(tuple(ops)))
    return layers


def survival_probability(final_state: DensityMatrix, target_bitstring: str) -> float:
    if len(target_bitstring) != final_state.n_qubits:
        raise ValueError("target length does not match the state width")
    i = int(target_bitstring, 2)
    return float(min(max(final_state.data[i, i].real, 0.0), 1.0))


@lru_cache(maxsize=None)
def _hamming_table(w: int) -> np.ndarray:
    return np.array([bin(x).count("1") for x in range(2**w)])


def effective_polarization(probabilities: np.ndarray, target: str) -> float:
    """4^w/(4^w-1) sum_k (-1/2)^k h_k - 1/(4^w-1), h_k = P(Hamming distance k from target)."""
    w = len(target)
    probabilities = np.asarray(probabilities, dtype=float)
    dist = _hamming_table(w)[np.arange(2**w) ^ int(target, 2)]
    h = np.bincount(dist, weights=probabilities, minlength=w + 1)
    d2 = 4**w
    s = d2 / (d2 - 1) * np.sum((-0.5) ** np.arange(w + 1) * h) - 1 / (d2 - 1)
    return float(s)


def _outcome_distribution(rho: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    probs = simulator.outcome_probabilities(rho)
    if shots == 0:
        return probs
    return sample_counts(probs, shots, rng) / shots


def build_drb_circuit(spec: ProtocolRunSpec, m: int, k: int) -> tuple[list[Layer], Circuit, Circuit]:
    """(prep layers, core circuit, full executed circuit) for DRB cell (m, k)."""
    w = spec.width
    rng = np.random.default_rng(cell_seed(spec, m, k))
    prep = stabilizer_prep(w, spec.topology, rng)
    core = generate_random_circuit(w, m, spec.xi, spec.topology, _sub_seed(rng))
    forward = prep + list(core.layers)
    executed = framed_forward(forward, w, rng) + framed_inverse(forward, w, rng)
    full = Circuit(w, tuple(executed), spec.topology, cell_seed(spec, m, k))
    return prep, core, full


def run_drb_cell(spec: ProtocolRunSpec, m: int, k: int) -> CellResult:
    seed = cell_seed(spec, m, k)
    prep, core, full = build_drb_circuit(spec, m, k)
    prepared = simulator.run(Circuit(spec.width, tuple(prep), spec.topology), spec.noise,
                             measurement_noise=False)
    final = simulator.run(full, spec.noise, measurement_noise=False)
    rho = simulator.pre_measurement(final[None], spec.noise, spec.width)[0]
    rng = np.random.default_rng([seed, 1])
    value = float(_outcome_distribution(rho, spec.shots, rng)[0])
    value = min(max(value, 0.0), 1.0)
    sample = DecaySample("DRB", m, value, seed, k)
    diagnostics = {"purity_prep": _purity(prepared), "purity_final": _purity(final)}
    return CellResult(Protocol.DRB, m, k, seed, [sample], full, core.layers, diagnostics=diagnostics)


def _purity(rho: np.ndarray) -> float:
    return float(np.real(np.einsum("ij,ji->", rho, rho)))


def random_stabilizer_layers(w: int, rng: np.random.Generator) -> list[Layer]:
    """Two 1q layers putting each qubit in a uniformly random single-qubit stabilizer state.

    The first layer picks the axis (id for Z, h for X and Y) and, through an X
    pre-dressing, the sign; the second adds s for the Y axis.
    """
    axes = rng.integers(3, size=w)
    flips = rng.integers(2, size=w)
    first = Layer(tuple(GateOp("id" if a == 0 else "h", (q,), "X" if f else None)
                        for q, (a, f) in enumerate(zip(axes, flips))))
    second = Layer(tuple(GateOp("s" if a == 2 else "id", (q,)) for q, a in enumerate(axes)))
    return [first, second]


def build_mrb_circuit(spec: ProtocolRunSpec, m: int, k: int) -> tuple[Circuit, str, tuple]:
    """(executed circuit, target bitstring, core layers) for MRB cell (m, k)."""
    if m % 2:
        raise ValueError(f"MRB depth must be even, got {m}")
    w = spec.width
    seed = cell_seed(spec, m, k)
    rng = np.random.default_rng(seed)
    forward = random_stabilizer_layers(w, rng)
    half = generate_random_circuit(w, m // 2, spec.xi, spec.topology, _sub_seed(rng))
    for layer in half.layers:
        forward.append(dress_layer(layer, "I" * w, random_pauli(w, rng)))
    closing = random_pauli(w, rng)
    full = Circuit(w, tuple(forward + framed_inverse(forward, w, rng, closing)), spec.topology, seed)
    target = "".join("1" if p in "XY" else "0" for p in closing)
    return full, target, half.layers


def run_mrb_cell(spec: ProtocolRunSpec, m: int, k: int) -> CellResult:
    seed = cell_seed(spec, m, k)
    full, target, core = build_mrb_circuit(spec, m, k)
    rho = simulator.run(full, spec.noise)
    rng = np.random.default_rng([seed, 1])
    value = effective_polarization(_outcome_distribution(rho, spec.shots, rng), target)
    value = min(max(value, -1.0), 1.0)
    return CellResult(Protocol.MRB, m, k, seed, [DecaySample("MRB", m, value, seed, k)], full, core)


def crb_cycle(spec: ProtocolRunSpec, k: int) -> Circuit:
    """The benchmarked cycle of circuit index k; identical across depths."""
    ss = np.random.SeedSequence([spec.seed, _CODES[Protocol.CRB], 0xC7C1E, k])
    seed = int(ss.generate_state(1, dtype=np.uint32)[0])
    return generate_random_circuit(spec.width, 1, spec.xi, spec.topology, seed)


def crb_paulis(spec: ProtocolRunSpec) -> list[str]:
    labels = pauli_labels(spec.width)[1:]
    if spec.width <= EXHAUSTIVE_PAULI_WIDTH:
        return labels
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, _CODES[Protocol.CRB], 0x9A0]))
    n = min(spec.n_sampled_paulis, len(labels))
    return [labels[i] for i in sorted(rng.choice(len(labels), size=n, replace=False))]


def pauli_eigenstate_prep(pauli: str) -> list[Layer]:
    """Two layers taking |0...0> to the +1 eigenstate of ``pauli``."""
    w = len(pauli)
    first = Layer(tuple(GateOp("h" if p in "XY" else "id", (q,)) for q, p in enumerate(pauli)))
    second = Layer(tuple(GateOp("s" if p == "Y" else "id", (q,)) for q, p in enumerate(pauli)))
    return [first, second]


def _compact_records(records) -> list[dict]:
    inv = {"id": "I", "x": "X", "y": "Y", "z": "Z"}
    return [{"layer": r.layer_index, "twirl": "".join(r.twirl_gates),
             "correction": "".join(inv[g] for g in r.correction)} for r in records]


def run_crb_cell(spec: ProtocolRunSpec, m: int, k: int) -> CellResult:
    w = spec.width
    seed = cell_seed(spec, m, k)
    rng = np.random.default_rng(seed)
    cycle = crb_cycle(spec, k)
    repeated = cycle.with_layers(cycle.layers * m)
    samples, twirls = [], []
    for pauli in crb_paulis(spec):
        body, records = randomized_compile(repeated, rng=rng, absorb_final=False)
        circuit = body.with_layers(pauli_eigenstate_prep(pauli) + list(body.layers))
        rho = simulator.run(circuit, spec.noise)
        v = ideal_unitary(body)
        observable = v @ pauli_matrix(pauli) @ v.conj().T
        value = float(np.real(np.trace(observable @ rho)))
        if spec.shots:
            p_plus = min(max((1 + value) / 2, 0.0), 1.0)
            value = 2 * rng.binomial(spec.shots, p_plus) / spec.shots - 1
        value = min(max(value, -1.0), 1.0)
        samples.append(DecaySample("CRB", m, value, seed, k, pauli))
        twirls.append({"pauli": pauli, "records": _compact_records(records)})
    return CellResult(Protocol.CRB, m, k, seed, samples, repeated, cycle.layers, twirls)


_CELL_RUNNERS = {Protocol.DRB: run_drb_cell, Protocol.MRB: run_mrb_cell, Protocol.CRB: run_crb_cell}


def run_cell(spec: ProtocolRunSpec, m: int, k: int) -> CellResult:
    return _CELL_RUNNERS[spec.protocol](spec, m, k)


def cells(spec: ProtocolRunSpec) -> list[tuple[int, int]]:
    return [(m, k) for m in spec.m_list for k in range(spec.circuits_per_depth)]


def run_cells(spec: ProtocolRunSpec) -> list[CellResult]:
    return [run_cell(spec, m, k) for m, k in cells(spec)]


def _check(spec: ProtocolRunSpec, protocol: Protocol) -> None:
    if spec.protocol is not protocol:
        raise ValueError(f"spec is for {spec.protocol.value}, not {protocol.value}")


def _samples(results: list[CellResult]) -> list[DecaySample]:
    return [s for r in results for s in r.samples]


def run_drb(spec: ProtocolRunSpec) -> list[DecaySample]:
    _check(spec, Protocol.DRB)
    return _samples(run_cells(spec))


def run_mrb(spec: ProtocolRunSpec) -> list[DecaySample]:
    _check(spec, Protocol.MRB)
    return _samples(run_cells(spec))


def run_crb(spec: ProtocolRunSpec) -> list[DecaySample]:
    _check(spec, Protocol.CRB)
    return _samples(run_cells(spec))


def run_protocol(spec: ProtocolRunSpec) -> list[DecaySample]:
    return _samples(run_cells(spec))


def estimate(spec: ProtocolRunSpec, samples: list[DecaySample], n_bootstrap: int = 1000) -> DecayFitResult:
    """Fit the decay and convert it to the protocol's error rate."""
    kwargs = dict(width=spec.width, protocol=spec.protocol.value,
                  layers_per_depth=LAYERS_PER_DEPTH[spec.protocol], n_bootstrap=n_bootstrap, seed=spec.seed)
    if spec.protocol is not Protocol.CRB:
        return fit_decay(samples, spec.floor, **kwargs)
    by_pauli: dict[str, list[DecaySample]] = {}
    for s in samples:
        by_pauli.setdefault(s.pauli, []).append(s)
    return average_pauli_fits([fit_decay(by_pauli[p], 0.0, **kwargs) for p in sorted(by_pauli)])
