import numpy as np
from hypothesis import strategies as st

from qubench.qcore import DensityMatrix

seeds = st.integers(0, 2**31 - 1)


@st.composite
def unitaries(draw, n_qubits: int):
    rng = np.random.default_rng(draw(seeds))
    d = 2**n_qubits
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


@st.composite
def density_matrices(draw, n_qubits: int):
    rng = np.random.default_rng(draw(seeds))
    d = 2**n_qubits
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = g @ g.conj().T
    return DensityMatrix(n_qubits, rho / np.trace(rho))
