"""Randomized benchmarking protocols on an exact density-matrix simulator."""

from .circgen import Circuit, GateOp, Layer, Topology, generate_random_circuit, parse_openqasm, to_openqasm
from .fitting import DecayFitResult, DegenerateFitError, fit_decay, fit_decay_arrays
from .noise import NoiseModel, standard_noise_model
from .protocols import Protocol, ProtocolRunSpec, estimate, run_cells, run_protocol
from .runner import ExperimentConfig, NoisePoint, ResultRow, purity_diagnostic, report, run_experiment
from .tomography import FidelityReport, circuit_fidelity, mean_layer_infidelity

__version__ = "0.1.0"

__all__ = [
    "Circuit", "GateOp", "Layer", "Topology", "generate_random_circuit", "parse_openqasm", "to_openqasm",
    "DecayFitResult", "DegenerateFitError", "fit_decay", "fit_decay_arrays",
    "NoiseModel", "standard_noise_model",
    "Protocol", "ProtocolRunSpec", "estimate", "run_cells", "run_protocol",
    "ExperimentConfig", "NoisePoint", "ResultRow", "purity_diagnostic", "report", "run_experiment",
    "FidelityReport", "circuit_fidelity", "mean_layer_infidelity",
]
