"""Reference implementations used to check the package.

Everything here is written from textbook definitions with deliberately
different machinery from the package: loop-based operator embedding,
column-stacked superoperators, Choi matrices, and scipy's curve_fit.  None of
it imports the simulator or the fidelity code.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.linalg import expm
from scipy.optimize import curve_fit

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}

GATES = {
    "id": I2,
    "x": X,
    "y": Y,
    "z": Z,
    "h": np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2),
    "s": np.array([[1, 0], [0, 1j]]),
    "sdg": np.array([[1, 0], [0, -1j]]),
    "t": np.array([[1, 0], [0, np.exp(1j * math.pi / 4)]]),
    "tdg": np.array([[1, 0], [0, np.exp(-1j * math.pi / 4)]]),
    # control is the first listed qubit, which is the more significant factor
    "cnot": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
}


def pauli_string(label: str) -> np.ndarray:
    out = np.array([[1]], dtype=complex)
    for ch in label:
        out = np.kron(out, PAULI[ch])
    return out


def embed(op: np.ndarray, targets, w: int) -> np.ndarray:
    """Full 2^w matrix of a k-qubit operator on ``targets``; qubit 0 is the leftmost bit."""
    targets = list(targets)
    d = 2**w
    full = np.zeros((d, d), dtype=complex)
    for row in range(d):
        for col in range(d):
            rb = [(row >> (w - 1 - q)) & 1 for q in range(w)]
            cb = [(col >> (w - 1 - q)) & 1 for q in range(w)]
            if any(rb[q] != cb[q] for q in range(w) if q not in targets):
                continue
            r_local = int("".join(str(rb[q]) for q in targets), 2)
            c_local = int("".join(str(cb[q]) for q in targets), 2)
            full[row, col] = op[r_local, c_local]
    return full


def dressed(name: str, pre: str | None, post: str | None) -> np.ndarray:
    u = GATES[name]
    if pre:
        u = u @ pauli_string(pre)
    if post:
        u = pauli_string(post) @ u
    return u


# --- channels (Kraus lists) -------------------------------------------------

def amplitude_damping(g):
    return [np.array([[1, 0], [0, math.sqrt(1 - g)]], dtype=complex),
            np.array([[0, math.sqrt(g)], [0, 0]], dtype=complex)]


def dephasing(lam):
    return [np.array([[1, 0], [0, math.sqrt(1 - lam)]], dtype=complex),
            np.array([[0, 0], [0, math.sqrt(lam)]], dtype=complex)]


def depolarizing(p, n):
    """rho -> (1 - p) rho + p I/d via the twirl identity sum_P P rho P = d tr(rho) I."""
    labels = ["".join(t) for t in itertools.product("IXYZ", repeat=n)]
    ks = [math.sqrt(1 - p) * np.eye(2**n, dtype=complex)]
    ks += [math.sqrt(p) / 2**n * pauli_string(l) for l in labels]
    return ks


def rotation(theta, axis):
    return [expm(-0.5j * theta * pauli_string(axis))]


def tensor_kraus(a, b):
    return [np.kron(x, y) for x in a for y in b]


def gate_noise(kind: str, s: float, n: int):
    kind = kind.lower()
    if kind == "depolarizing":
        return depolarizing(s, n)
    if kind == "coherent2q":
        return rotation(s, "ZZ") if n == 2 else [I2]
    one = {"t1": amplitude_damping, "t2": dephasing, "coherent1q": lambda x: rotation(x, "Z")}[kind](s)
    return one if n == 1 else tensor_kraus(one, one)


# --- superoperators (column stacking: vec(A X B) = (B^T kron A) vec X) --------

def superop(kraus) -> np.ndarray:
    return sum(np.kron(k.conj(), k) for k in kraus)


def vec(m: np.ndarray) -> np.ndarray:
    return m.reshape(-1, order="F")


def unvec(v: np.ndarray, d: int) -> np.ndarray:
    return v.reshape(d, d, order="F")


def circuit_superop(circuit, noise_parts: dict[str, float]) -> np.ndarray:
    """Noisy superoperator of a circuit: each gate followed by its noise channels.

    ``noise_parts`` maps standard kind labels to strengths and is applied in
    the given order.
    """
    w = circuit.width
    d = 2**w
    total = np.eye(d * d, dtype=complex)
    for layer in circuit.layers:
        for op in layer.ops:
            n = len(op.qubits)
            s = superop([embed(dressed(op.name, op.pre, op.post), op.qubits, w)])
            for kind, strength in noise_parts.items():
                if kind.lower() == "coherent2q" and n == 1:
                    continue
                ks = [embed(k, op.qubits, w) for k in gate_noise(kind, strength, n)]
                s = superop(ks) @ s
            total = s @ total
    return total


def ideal_circuit_unitary(circuit) -> np.ndarray:
    w = circuit.width
    u = np.eye(2**w, dtype=complex)
    for layer in circuit.layers:
        for op in layer.ops:
            u = embed(dressed(op.name, op.pre, op.post), op.qubits, w) @ u
    return u


def choi(s: np.ndarray, d: int) -> np.ndarray:
    """Normalised Choi state (1/d) sum_ij |i><j| (x) E(|i><j|)."""
    c = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = 1
            c += np.kron(e, unvec(s @ vec(e), d))
    return c / d


def entanglement_fidelity(s_noisy: np.ndarray, u: np.ndarray) -> float:
    """<phi_U| Choi(E) |phi_U> with |phi_U> = (I (x) U)|Phi+>."""
    d = u.shape[0]
    phi = np.zeros(d * d, dtype=complex)
    for i in range(d):
        e = np.zeros(d)
        e[i] = 1
        phi += np.kron(e, u @ e)
    phi /= math.sqrt(d)
    return float(np.real(phi.conj() @ choi(s_noisy, d) @ phi))


def average_gate_fidelity(s_noisy: np.ndarray, u: np.ndarray) -> float:
    d = u.shape[0]
    return (d * entanglement_fidelity(s_noisy, u) + 1) / (d + 1)


def output_state(circuit, noise_parts, rho0=None) -> np.ndarray:
    d = 2**circuit.width
    if rho0 is None:
        rho0 = np.zeros((d, d), dtype=complex)
        rho0[0, 0] = 1
    return unvec(circuit_superop(circuit, noise_parts) @ vec(rho0), d)


def fit_decay_curve_fit(m, y, p0=(0.0, 1.0, 0.9)):
    """Unweighted A + B p^m via scipy's trust-region least squares."""
    popt, _ = curve_fit(lambda x, a, b, p: a + b * p**x, np.asarray(m, float), np.asarray(y, float),
                        p0=p0, bounds=([-1, -2, 0], [1, 2, 1]), method="trf")
    return popt
