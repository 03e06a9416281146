"""Dense linear algebra for few-qubit states and channels.

Conventions shared by every module in the package:

* Qubit 0 is the most significant tensor factor, so the bitstring ``"01"``
  means qubit 0 in ``|0>`` and qubit 1 in ``|1>``.
* The n-qubit Pauli basis is ordered lexicographically with ``I, X, Y, Z``
  per qubit, qubit 0 first (``II, IX, IY, IZ, XI, ...``).
* Superoperators act on row-major vectorised matrices, so
  ``vec(K rho K^dag) = (K kron conj(K)) vec(rho)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_FLOOR = -1e-10
TP_TOL = 1e-10

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class DimensionError(ValueError):
    """Operands act on different numbers of qubits."""


class InvalidStateError(ValueError):
    """A matrix violates the density-matrix invariants."""


class InvalidChannelError(ValueError):
    """A Kraus set is malformed or not trace preserving."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def _n_qubits_for_dim(dim: int) -> int:
    n = int(round(np.log2(dim)))
    if 2**n != dim:
        raise DimensionError(f"dimension {dim} is not a power of two")
    return n


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    n_qubits: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        d = 2**self.n_qubits
        if self.n_qubits < 1 or data.shape != (d, d):
            raise DimensionError(f"expected a {d}x{d} matrix, got shape {data.shape}")
        if np.max(np.abs(data - data.conj().T)) > HERMITIAN_TOL:
            raise InvalidStateError("matrix is not Hermitian")
        if abs(np.trace(data) - 1) > TRACE_TOL:
            raise InvalidStateError(f"trace is {np.trace(data).real:.3g}, not 1")
        if np.linalg.eigvalsh(data).min() < PSD_FLOOR:
            raise InvalidStateError("matrix has a negative eigenvalue")
        object.__setattr__(self, "data", _frozen(data))

    @classmethod
    def from_matrix(cls, data) -> "DensityMatrix":
        data = np.asarray(data, dtype=complex)
        return cls(_n_qubits_for_dim(data.shape[0]), data)

    @classmethod
    def from_statevector(cls, psi) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls.from_matrix(np.outer(psi, psi.conj()))

    @classmethod
    def basis(cls, bitstring: str) -> "DensityMatrix":
        d = 2 ** len(bitstring)
        rho = np.zeros((d, d), dtype=complex)
        i = int(bitstring, 2)
        rho[i, i] = 1
        return cls(len(bitstring), rho)

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> "DensityMatrix":
        d = 2**n_qubits
        return cls(n_qubits, np.eye(d, dtype=complex) / d)

    def probabilities(self) -> np.ndarray:
        return np.clip(np.real(np.diag(self.data)), 0.0, None)


@dataclass(frozen=True, eq=False)
class KrausChannel:
    n_qubits: int
    kraus_ops: tuple = field(repr=False)

    def __post_init__(self):
        d = 2**self.n_qubits
        ops = tuple(_frozen(np.asarray(k, dtype=complex)) for k in self.kraus_ops)
        if not ops:
            raise InvalidChannelError("a channel needs at least one Kraus operator")
        for k in ops:
            if k.shape != (d, d):
                raise DimensionError(f"Kraus operator has shape {k.shape}, expected {(d, d)}")
        total = sum(k.conj().T @ k for k in ops)
        if np.max(np.abs(total - np.eye(d))) > TP_TOL:
            raise InvalidChannelError("Kraus operators are not trace preserving")
        object.__setattr__(self, "kraus_ops", ops)

    @classmethod
    def identity(cls, n_qubits: int) -> "KrausChannel":
        return cls(n_qubits, (np.eye(2**n_qubits, dtype=complex),))

    @classmethod
    def from_unitary(cls, u) -> "KrausChannel":
        u = np.asarray(u, dtype=complex)
        return cls(_n_qubits_for_dim(u.shape[0]), (u,))

    def superoperator(self) -> np.ndarray:
        return sum(np.kron(k, k.conj()) for k in self.kraus_ops)

    def then(self, other: "KrausChannel") -> "KrausChannel":
        """Channel that applies ``self`` first and ``other`` second."""
        if other.n_qubits != self.n_qubits:
            raise DimensionError("cannot compose channels of different widths")
        ops = [b @ a for a in self.kraus_ops for b in other.kraus_ops]
        return KrausChannel(self.n_qubits, tuple(ops))

    def tensor(self, other: "KrausChannel") -> "KrausChannel":
        ops = [np.kron(a, b) for a in self.kraus_ops for b in other.kraus_ops]
        return KrausChannel(self.n_qubits + other.n_qubits, tuple(ops))


@dataclass(frozen=True, eq=False)
class PauliTransferMatrix:
    n_qubits: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.asarray(self.data)
        if np.iscomplexobj(data):
            if np.max(np.abs(data.imag)) > 1e-9:
                raise ValueError("PTM entries must be real")
            data = data.real
        dim = 4**self.n_qubits
        if data.shape != (dim, dim):
            raise DimensionError(f"expected a {dim}x{dim} PTM, got {data.shape}")
        object.__setattr__(self, "data", _frozen(data.astype(float)))

    def __matmul__(self, other: "PauliTransferMatrix") -> "PauliTransferMatrix":
        return PauliTransferMatrix(self.n_qubits, self.data @ other.data)

    def is_trace_preserving(self, tol: float = 1e-9) -> bool:
        first = np.zeros(4**self.n_qubits)
        first[0] = 1
        return bool(np.max(np.abs(self.data[0] - first)) <= tol)


def pauli_labels(n_qubits: int) -> list[str]:
    return ["".join(p) for p in itertools.product("IXYZ", repeat=n_qubits)]


@lru_cache(maxsize=None)
def pauli_matrix(label: str) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for ch in label:
        out = np.kron(out, PAULI_MATRICES[ch])
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def pauli_basis(n_qubits: int) -> np.ndarray:
    """All n-qubit Paulis stacked as an array of shape (4^n, 2^n, 2^n)."""
    basis = np.stack([pauli_matrix(lab) for lab in pauli_labels(n_qubits)])
    basis.setflags(write=False)
    return basis


def embed_operator(op: np.ndarray, targets: Sequence[int], n_total: int) -> np.ndarray:
    """Lift a k-qubit operator on ``targets`` to the full n_total-qubit space."""
    targets = list(targets)
    k = len(targets)
    if len(set(targets)) != k:
        raise ValueError(f"duplicate target qubits in {targets}")
    if any(t < 0 or t >= n_total for t in targets):
        raise ValueError(f"targets {targets} out of range for {n_total} qubits")
    op = np.asarray(op, dtype=complex)
    if op.shape != (2**k, 2**k):
        raise DimensionError(f"operator shape {op.shape} does not match {k} targets")
    rest = [q for q in range(n_total) if q not in targets]
    full = np.kron(op, np.eye(2 ** len(rest), dtype=complex))
    order = targets + rest
    perm = [order.index(q) for q in range(n_total)]
    perm = perm + [n_total + p for p in perm]
    t = full.reshape((2,) * (2 * n_total)).transpose(perm)
    return t.reshape(2**n_total, 2**n_total)


def apply_channel(state: DensityMatrix, channel: KrausChannel) -> DensityMatrix:
    if state.n_qubits != channel.n_qubits:
        raise DimensionError(
            f"state has {state.n_qubits} qubits but channel acts on {channel.n_qubits}"
        )
    rho = sum(k @ state.data @ k.conj().T for k in channel.kraus_ops)
    return DensityMatrix(state.n_qubits, rho)


def embed_on_qubits(channel: KrausChannel, targets: Sequence[int], n_total: int) -> KrausChannel:
    if len(targets) != channel.n_qubits:
        raise ValueError(f"channel acts on {channel.n_qubits} qubits, got targets {list(targets)}")
    ops = tuple(embed_operator(k, targets, n_total) for k in channel.kraus_ops)
    return KrausChannel(n_total, ops)


def partial_trace(state: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    n = state.n_qubits
    keep = list(keep)
    drop = [q for q in range(n) if q not in keep]
    t = state.data.reshape((2,) * (2 * n))
    # bring kept rows, kept cols, dropped rows, dropped cols together
    t = t.transpose(keep + [n + q for q in keep] + drop + [n + q for q in drop])
    dk, dd = 2 ** len(keep), 2 ** len(drop)
    t = t.reshape(dk, dk, dd, dd)
    return DensityMatrix(len(keep), np.einsum("abjj->ab", t))


def tensor_states(*states: DensityMatrix) -> DensityMatrix:
    out = np.array([[1.0 + 0j]])
    for s in states:
        out = np.kron(out, s.data)
    return DensityMatrix.from_matrix(out)


def purity(state: DensityMatrix) -> float:
    return float(np.real(np.trace(state.data @ state.data)))


def tv_distance(p, q, tol: float = 1e-8) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError(f"distributions must be equal-length vectors, got {p.shape} and {q.shape}")
    for name, v in (("p", p), ("q", q)):
        if np.any(v < 0) or abs(v.sum() - 1) > tol:
            raise ValueError(f"{name} is not a normalised probability vector")
    return float(0.5 * np.abs(p - q).sum())


def ptm_from_superoperator(superop: np.ndarray, n_qubits: int) -> PauliTransferMatrix:
    d = 2**n_qubits
    basis = pauli_basis(n_qubits).reshape(4**n_qubits, d * d)
    # R[a, b] = tr(P_a S(P_b)) / d ; P_a is Hermitian so tr(P_a M) = vec(P_a)^* . vec(M)
    out = basis.conj() @ superop @ basis.T / d
    return PauliTransferMatrix(n_qubits, out.real)


def ptm_from_kraus(channel: KrausChannel) -> PauliTransferMatrix:
    return ptm_from_superoperator(channel.superoperator(), channel.n_qubits)


def ptm_from_unitary(u: np.ndarray) -> PauliTransferMatrix:
    return ptm_from_kraus(KrausChannel.from_unitary(u))
