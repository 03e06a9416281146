"""Experiment orchestration: configs, noise sweeps, persistence and reports.

A run expands its config into work units, one per (protocol, noise point,
depth, circuit index).  Units are pure functions of their seeds, so they may
execute in any order on any number of worker processes.  Results are merged
in sorted-key order, which keeps ``results.csv`` byte-identical across runs
of the same config.

Outputs of ``run_experiment`` in the output directory:

``results.csv``
    one row per (protocol, noise point); columns are ``CSV_COLUMNS``.
``archive.json``
    the config and its hash, every executed circuit, twirl records, raw
    decay samples, full fit results, per-row seed lists and failures.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .circgen import Topology, to_openqasm
from .fitting import DegenerateFitError
from .noise import NoiseModel, combined_noise_model, standard_noise_model
from .protocols import (
    DEFAULT_K,
    DEFAULT_M_LIST,
    CellResult,
    DecaySample,
    Protocol,
    ProtocolRunSpec,
    build_drb_circuit,
    build_mrb_circuit,
    cells,
    crb_cycle,
    estimate,
    run_cell,
)
from .tomography import mean_layer_infidelity

SCHEMA_VERSION = 1
CSV_COLUMNS = ("protocol", "noise_kind", "strength", "r_estimate", "r_ci_low", "r_ci_high",
               "r_tomography", "n_circuits", "n_depths", "config_hash")
DEFAULT_STRENGTHS = tuple(float(s) for s in np.logspace(-4, -1, 7))
DRB_FLAG_THRESHOLD = 0.5
RESULTS_FILE = "results.csv"
ARCHIVE_FILE = "archive.json"


class ConfigError(ValueError):
    pass


class ArchiveError(RuntimeError):
    pass


@dataclass(frozen=True)
class NoisePoint:
    """One noise setting of a sweep.

    ``kind`` is a ``+``-joined label of standard kinds.  All components share
    ``strength`` unless ``components`` assigns each its own; ``records``
    replaces the standard construction with an explicit noise model.
    """

    kind: str
    strength: float
    components: tuple = ()
    records: tuple = ()

    def __post_init__(self):
        if not (self.strength > 0 and math.isfinite(self.strength)):
            raise ConfigError(f"noise strength must be positive, got {self.strength}")
        components = sorted((str(k), float(v)) for k, v in dict(self.components).items())
        object.__setattr__(self, "components", tuple(components))

    def model(self) -> NoiseModel:
        if self.records:
            return NoiseModel.from_records([dict(r) for r in self.records])
        if self.components:
            return combined_noise_model(dict(self.components))
        return standard_noise_model(self.kind, self.strength)

    def component_strengths(self) -> dict[str, float]:
        if self.components:
            return dict(self.components)
        return {part.strip().lower(): self.strength for part in self.kind.split("+")}

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "strength": self.strength}
        if self.components:
            d["components"] = dict(self.components)
        if self.records:
            d["records"] = [dict(r) for r in self.records]
        return d


def _freeze_records(records) -> tuple:
    return tuple(tuple(sorted(r.items())) for r in records)


def parse_noise_sweep(entries: Sequence[dict]) -> tuple[NoisePoint, ...]:
    """Expand sweep entries into noise points.

    Accepted entry shapes::

        {"kind": "t1", "strengths": [1e-3, 1e-2]}
        {"kind": "t1"}                                   # default grid
        {"kind": "t1+coherent1q", "strength": 0.1, "components": {"t1": 0.1, "coherent1q": 0.01}}
        {"kind": "custom", "strength": 0.01, "records": [{gate_class, kind, strength, axis}, ...]}
    """
    points = []
    for entry in entries:
        entry = dict(entry)
        unknown = set(entry) - {"kind", "strength", "strengths", "components", "records"}
        if unknown:
            raise ConfigError(f"unknown noise sweep fields {sorted(unknown)}")
        if "kind" not in entry:
            raise ConfigError("noise sweep entry needs a kind")
        if "strength" in entry and "strengths" in entry:
            raise ConfigError("give either strength or strengths, not both")
        strengths = entry.get("strengths")
        if strengths is None:
            strengths = [entry["strength"]] if "strength" in entry else list(DEFAULT_STRENGTHS)
        strengths = [float(s) for s in strengths]
        if any(b <= a for a, b in zip(strengths, strengths[1:])):
            raise ConfigError(f"strengths for {entry['kind']} must be strictly increasing, got {strengths}")
        for s in strengths:
            point = NoisePoint(entry["kind"], s, tuple(dict(entry.get("components", {})).items()),
                               _freeze_records(entry.get("records", [])))
            point.model()  # validate eagerly
            points.append(point)
    return tuple(points)


_CONFIG_FIELDS = {"schema_version", "name", "width", "topology", "xi", "protocols", "noise", "m_list",
                  "circuits_per_depth", "shots", "seed", "out_dir", "n_bootstrap", "n_sampled_paulis"}


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    width: int = 2
    topology: dict = field(default_factory=lambda: {"kind": "line"})
    xi: float = 0.75
    protocols: tuple = ("DRB", "MRB", "CRB")
    noise: tuple = ()
    m_list: tuple = DEFAULT_M_LIST
    circuits_per_depth: int = DEFAULT_K
    shots: int = 0
    seed: int = 0
    out_dir: str = "results"
    n_bootstrap: int = 1000
    n_sampled_paulis: int = 20
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}; expected {SCHEMA_VERSION}")
        protocols = tuple(Protocol(p).value for p in self.protocols)
        if not protocols:
            raise ConfigError("protocol list is empty")
        if len(set(protocols)) != len(protocols):
            raise ConfigError(f"duplicate protocols in {protocols}")
        object.__setattr__(self, "protocols", protocols)
        noise = tuple(p if isinstance(p, NoisePoint) else parse_noise_sweep([p])[0] for p in self.noise)
        object.__setattr__(self, "noise", noise)
        object.__setattr__(self, "m_list", tuple(int(m) for m in self.m_list))
        object.__setattr__(self, "topology", dict(self.topology))
        if self.width < 1:
            raise ConfigError("width must be positive")
        if self.n_bootstrap < 0:
            raise ConfigError("n_bootstrap must be non-negative")
        for protocol in protocols:
            self.spec(protocol, NoiseModel())  # surfaces m_list/K/shots problems early

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        unknown = set(data) - _CONFIG_FIELDS
        if unknown:
            raise ConfigError(f"unknown config fields {sorted(unknown)}")
        if "schema_version" not in data:
            raise ConfigError("config lacks schema_version")
        data = dict(data)
        data["noise"] = parse_noise_sweep(data.get("noise", []))
        for key in ("protocols", "m_list"):
            if key in data:
                data[key] = tuple(data[key])
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "name": self.name,
            "width": self.width,
            "topology": self.topology,
            "xi": self.xi,
            "protocols": list(self.protocols),
            "noise": [p.to_dict() for p in self.noise],
            "m_list": list(self.m_list),
            "circuits_per_depth": self.circuits_per_depth,
            "shots": self.shots,
            "seed": self.seed,
            "out_dir": self.out_dir,
            "n_bootstrap": self.n_bootstrap,
            "n_sampled_paulis": self.n_sampled_paulis,
        }

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    @property
    def config_hash(self) -> str:
        """sha256 of the canonical config; the output directory does not take part."""
        d = self.to_dict()
        d.pop("out_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True, separators=(",", ":")).encode()).hexdigest()

    def topology_object(self) -> Topology:
        return Topology.from_dict(self.topology, self.width)

    def spec(self, protocol: str | Protocol, noise: NoiseModel) -> ProtocolRunSpec:
        return ProtocolRunSpec(Protocol(protocol), self.width, self.xi, self.m_list, self.circuits_per_depth,
                               self.shots, noise, self.seed, self.topology_object(), self.n_sampled_paulis)


@dataclass(frozen=True)
class ResultRow:
    protocol: str
    noise_kind: str
    strength: float
    r_estimate: float | None
    r_ci_low: float | None
    r_ci_high: float | None
    r_tomography: float | None
    n_circuits: int
    n_depths: int
    config_hash: str
    timestamp: str = ""
    error: str | None = None

    def __post_init__(self):
        for name in ("r_estimate", "r_ci_low", "r_ci_high", "r_tomography"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    @property
    def ok(self) -> bool:
        return self.error is None

    def csv_record(self) -> dict:
        fmt = lambda v: "" if v is None else repr(float(v))
        return {
            "protocol": self.protocol,
            "noise_kind": self.noise_kind,
            "strength": repr(float(self.strength)),
            "r_estimate": fmt(self.r_estimate),
            "r_ci_low": fmt(self.r_ci_low),
            "r_ci_high": fmt(self.r_ci_high),
            "r_tomography": fmt(self.r_tomography),
            "n_circuits": str(self.n_circuits),
            "n_depths": str(self.n_depths),
            "config_hash": self.config_hash,
        }

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ResultRow":
        return cls(**{f.name: d.get(f.name) for f in dataclasses.fields(cls)})


def _clip01(x: float) -> float:
    return float(min(max(x, 0.0), 1.0))


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# ---------------------------------------------------------------- execution

def _run_unit(unit: tuple) -> tuple:
    key, spec, m, k = unit
    try:
        return key, run_cell(spec, m, k)
    except Exception as exc:  # recorded per row; the sweep keeps going
        return key, f"{type(exc).__name__}: {exc}"


def _units(config: ExperimentConfig, points: Sequence[NoisePoint], protocols: Iterable[str]):
    for protocol in protocols:
        for i, point in enumerate(points):
            spec = config.spec(protocol, point.model())
            for m, k in cells(spec):
                yield (protocol, i, m, k), spec, m, k


def _execute(units: list, jobs: int) -> dict:
    if jobs > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            done = list(pool.map(_run_unit, units, chunksize=max(1, len(units) // (8 * jobs))))
    else:
        done = [_run_unit(u) for u in units]
    return dict(sorted(done, key=lambda kv: kv[0]))


def _summarize(config: ExperimentConfig, protocol: str, point: NoisePoint, results: list,
               config_hash: str) -> tuple[ResultRow, dict]:
    spec = config.spec(protocol, point.model())
    errors = [r for r in results if isinstance(r, str)]
    cells_ok = [r for r in results if isinstance(r, CellResult)]
    seeds = sorted({c.circuit_seed for c in cells_ok})
    base = dict(protocol=protocol, noise_kind=point.kind, strength=point.strength,
                n_circuits=len(cells_ok), n_depths=len({c.depth for c in cells_ok}),
                config_hash=config_hash, timestamp=_now())
    entry = {"protocol": protocol, "noise": point.to_dict(), "circuit_seeds": seeds}
    if errors:
        row = ResultRow(r_estimate=None, r_ci_low=None, r_ci_high=None, r_tomography=None,
                        error=f"{len(errors)} cell(s) failed; first: {errors[0]}", **base)
        return row, entry
    samples = [s for c in cells_ok for s in c.samples]
    r_tomo = mean_layer_infidelity([l for c in cells_ok for l in c.core_layers], config.width, spec.noise)
    entry["r_tomography"] = r_tomo
    try:
        fit = estimate(spec, samples, n_bootstrap=config.n_bootstrap)
    except (DegenerateFitError, ValueError, FloatingPointError) as exc:
        row = ResultRow(r_estimate=None, r_ci_low=None, r_ci_high=None, r_tomography=_clip01(r_tomo),
                        error=f"fit failed: {type(exc).__name__}: {exc}", **base)
        return row, entry
    entry["fit"] = fit.to_dict()
    row = ResultRow(r_estimate=_clip01(fit.r), r_ci_low=_clip01(fit.r_ci_low), r_ci_high=_clip01(fit.r_ci_high),
                    r_tomography=_clip01(r_tomo), **base)
    return row, entry


def _purity_table(config: ExperimentConfig, points: Sequence[NoisePoint], outcome: dict) -> list[dict]:
    rows = []
    for (protocol, i, m, k), res in outcome.items():
        if protocol != Protocol.DRB.value or not isinstance(res, CellResult) or not res.diagnostics:
            continue
        point = points[i]
        for stage in ("prep", "final"):
            rows.append({"noise_kind": point.kind, "strength": point.strength, "m": m, "circuit_index": k,
                         "circuit_seed": res.circuit_seed, "stage": stage,
                         "purity": res.diagnostics[f"purity_{stage}"]})
    return rows


def write_results_csv(rows: Sequence[ResultRow], path: str | os.PathLike) -> None:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row.csv_record())
    Path(path).write_text(buf.getvalue())


def read_results_csv(path: str | os.PathLike) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run_experiment(config: ExperimentConfig, jobs: int = 1, out_dir: str | os.PathLike | None = None,
                   write: bool = True) -> list[ResultRow]:
    """Run every (protocol, noise point) of ``config``; write results.csv and archive.json."""
    points = config.noise
    outcome = _execute(list(_units(config, points, config.protocols)), jobs)
    config_hash = config.config_hash
    rows, entries, cell_records = [], [], []
    for protocol in config.protocols:
        for i, point in enumerate(points):
            results = [v for (p, j, _, _), v in outcome.items() if p == protocol and j == i]
            row, entry = _summarize(config, protocol, point, results, config_hash)
            rows.append(row)
            entries.append({**entry, "row": row.to_dict()})
    for (protocol, i, m, k), res in outcome.items():
        if isinstance(res, CellResult):
            cell_records.append({"noise_index": i, **res.archive()})
        else:
            cell_records.append({"noise_index": i, "protocol": protocol, "m": m, "circuit_index": k,
                                 "error": res})
    if write:
        out = Path(out_dir if out_dir is not None else config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_results_csv(rows, out / RESULTS_FILE)
        archive = {
            "schema_version": SCHEMA_VERSION,
            "config": config.to_dict(),
            "config_hash": config_hash,
            "created": _now(),
            "rows": entries,
            "cells": cell_records,
            "purity": _purity_table(config, points, outcome),
        }
        (out / ARCHIVE_FILE).write_text(json.dumps(archive))
    return rows


def load_archive(path: str | os.PathLike) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / ARCHIVE_FILE
    if not path.exists():
        raise ArchiveError(f"archive {path} does not exist")
    try:
        archive = json.loads(path.read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ArchiveError(f"archive {path} is corrupt: {exc}") from None
    if not isinstance(archive, dict) or not {"config", "config_hash", "rows"} <= set(archive):
        raise ArchiveError(f"archive {path} lacks config, config_hash or rows")
    config = ExperimentConfig.from_dict(archive["config"])
    if config.config_hash != archive["config_hash"]:
        raise ArchiveError(f"archive {path}: config hash does not match the archived config")
    return archive


def refit_archive(path: str | os.PathLike, n_bootstrap: int | None = None) -> list[ResultRow]:
    """Re-fit every row from the raw samples stored in an archive."""
    archive = load_archive(path)
    config = ExperimentConfig.from_dict(archive["config"])
    if n_bootstrap is not None:
        config = config.replace(n_bootstrap=n_bootstrap)
    samples: dict[tuple, list] = {}
    for cell in archive.get("cells", []):
        for s in cell.get("samples", []):
            key = (cell["protocol"], cell["noise_index"])
            samples.setdefault(key, []).append(DecaySample(s["protocol"], s["m"], s["value"], s["circuit_seed"],
                                                           s["circuit_index"], s.get("pauli_label")))
    rows = []
    points = config.noise
    for entry in archive["rows"]:
        old = ResultRow.from_dict(entry["row"])
        i = next(j for j, p in enumerate(points) if p.to_dict() == entry["noise"])
        spec = config.spec(old.protocol, points[i].model())
        data = samples.get((old.protocol, i), [])
        try:
            fit = estimate(spec, data, n_bootstrap=config.n_bootstrap)
        except (DegenerateFitError, ValueError) as exc:
            rows.append(dataclasses.replace(old, r_estimate=None, r_ci_low=None, r_ci_high=None,
                                            error=f"fit failed: {type(exc).__name__}: {exc}"))
            continue
        rows.append(dataclasses.replace(old, r_estimate=_clip01(fit.r), r_ci_low=_clip01(fit.r_ci_low),
                                        r_ci_high=_clip01(fit.r_ci_high), error=None))
    return rows


# ---------------------------------------------------------------- circuits only

def generate_circuits(config: ExperimentConfig) -> list[dict]:
    """Executed circuits of every cell, without simulating them.

    CRB entries hold the untwirled repeated cycle; its twirls are drawn at run time.
    """
    out = []
    noiseless = NoiseModel()
    for protocol in config.protocols:
        spec = config.spec(protocol, noiseless)
        for m, k in cells(spec):
            if spec.protocol is Protocol.DRB:
                circuit = build_drb_circuit(spec, m, k)[2]
            elif spec.protocol is Protocol.MRB:
                circuit = build_mrb_circuit(spec, m, k)[0]
            else:
                cycle = crb_cycle(spec, k)
                circuit = cycle.with_layers(cycle.layers * m)
            out.append({"protocol": protocol, "m": m, "circuit_index": k, "circuit": circuit})
    return out


def write_circuits(config: ExperimentConfig, out_dir: str | os.PathLike) -> Path:
    out = Path(out_dir)
    qasm_dir = out / "qasm"
    qasm_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for item in generate_circuits(config):
        name = f"{item['protocol']}_m{item['m']}_k{item['circuit_index']}.qasm"
        (qasm_dir / name).write_text(to_openqasm(item["circuit"]))
        records.append({"protocol": item["protocol"], "m": item["m"], "circuit_index": item["circuit_index"],
                        "qasm": f"qasm/{name}", "circuit": item["circuit"].to_dict()})
    path = out / "circuits.json"
    path.write_text(json.dumps({"config": config.to_dict(), "config_hash": config.config_hash,
                                "circuits": records}))
    return path


# ---------------------------------------------------------------- purity

@dataclass(frozen=True)
class PurityRecord:
    noise_kind: str
    strength: float
    m: int
    circuit_index: int
    circuit_seed: int
    stage: str
    purity: float


def purity_diagnostic(config: ExperimentConfig, jobs: int = 1) -> list[PurityRecord]:
    """Purity after the DRB state-prep stage and after the full circuit, per DRB circuit."""
    outcome = _execute(list(_units(config, config.noise, [Protocol.DRB.value])), jobs)
    failed = [v for v in outcome.values() if isinstance(v, str)]
    if failed:
        raise RuntimeError(f"{len(failed)} DRB cell(s) failed; first: {failed[0]}")
    return [PurityRecord(**r) for r in _purity_table(config, config.noise, outcome)]


def mean_purity(records: Iterable[PurityRecord | dict]) -> list[dict]:
    """Mean purity per (noise kind, strength, stage), in first-seen order."""
    groups: dict[tuple, list[float]] = {}
    for r in records:
        r = r if isinstance(r, dict) else dataclasses.asdict(r)
        groups.setdefault((r["noise_kind"], r["strength"], r["stage"]), []).append(r["purity"])
    return [{"noise_kind": k, "strength": s, "stage": st, "mean_purity": float(np.mean(v)), "n_circuits": len(v)}
            for (k, s, st), v in groups.items()]


# ---------------------------------------------------------------- reports

FIGURE_COLUMNS = {
    "fig2_depolarizing": ("noise_kind", "strength", "series", "r", "r_ci_low", "r_ci_high"),
    "fig3_single_noise": ("noise_kind", "strength", "protocol", "r_estimate", "r_tomography", "log10_ratio",
                          "drb_flag"),
    "fig3_combined": ("noise_kind", "strength", "protocol", "r_estimate", "r_tomography", "log10_ratio"),
    "fig5_t1_dominance": ("noise_kind", "strength", "protocol", "r_combined", "r_t1_only", "r_other_only",
                          "log10_combined_over_t1", "log10_combined_over_other"),
    "fig6_purity": ("noise_kind", "strength", "stage", "mean_purity", "n_circuits"),
}


@dataclass
class Report:
    summary: str
    tables: dict[str, list[dict]]

    def write(self, out_dir: str | os.PathLike) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, columns in FIGURE_COLUMNS.items():
            buf = io.StringIO()
            writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
            writer.writeheader()
            for row in self.tables[name]:
                writer.writerow({c: "" if row.get(c) is None else row[c] for c in columns})
            path = out / f"{name}.csv"
            path.write_text(buf.getvalue())
            paths.append(path)
        summary = out / "summary.txt"
        summary.write_text(self.summary + "\n")
        return paths + [summary]


def _log_ratio(est, ref) -> float | None:
    if est is None or ref is None or est <= 0 or ref <= 0:
        return None
    return float(np.log10(est / ref))


def _is_single(kind: str) -> bool:
    return "+" not in kind


def build_report(archive: dict) -> Report:
    rows = [(ResultRow.from_dict(e["row"]), e["noise"]) for e in archive["rows"]]
    ok = [(r, n) for r, n in rows if r.ok]
    tables: dict[str, list[dict]] = {name: [] for name in FIGURE_COLUMNS}

    depol = sorted({r.strength for r, _ in ok if r.noise_kind.lower() == "depolarizing"})
    for s in depol:
        at = [r for r, _ in ok if r.noise_kind.lower() == "depolarizing" and r.strength == s]
        for r in sorted(at, key=lambda r: r.protocol):
            tables["fig2_depolarizing"].append({"noise_kind": r.noise_kind, "strength": s, "series": r.protocol,
                                                "r": r.r_estimate, "r_ci_low": r.r_ci_low,
                                                "r_ci_high": r.r_ci_high})
        tables["fig2_depolarizing"].append({"noise_kind": "depolarizing", "strength": s, "series": "tomography",
                                            "r": float(np.mean([r.r_tomography for r in at]))})

    flags: dict[str, float] = {}
    for r, _ in sorted(ok, key=lambda rn: (rn[0].noise_kind, rn[0].strength)):
        lr = _log_ratio(r.r_estimate, r.r_tomography)
        if r.protocol == "DRB" and lr is not None and abs(lr) > DRB_FLAG_THRESHOLD:
            flags.setdefault(r.noise_kind, r.strength)
    for r, _ in sorted(ok, key=lambda rn: (rn[0].noise_kind, rn[0].strength, rn[0].protocol)):
        record = {"noise_kind": r.noise_kind, "strength": r.strength, "protocol": r.protocol,
                  "r_estimate": r.r_estimate, "r_tomography": r.r_tomography,
                  "log10_ratio": _log_ratio(r.r_estimate, r.r_tomography)}
        if _is_single(r.noise_kind):
            if r.noise_kind.lower() != "depolarizing":
                flagged = r.protocol == "DRB" and flags.get(r.noise_kind) == r.strength
                tables["fig3_single_noise"].append({**record, "drb_flag": int(flagged)})
        else:
            tables["fig3_combined"].append(record)

    single = {(r.protocol, r.noise_kind.lower(), r.strength): r for r, _ in ok if _is_single(r.noise_kind)}
    for r, noise in ok:
        parts = NoisePoint(noise["kind"], noise["strength"], tuple(noise.get("components", {}).items())) \
            .component_strengths()
        if _is_single(r.noise_kind) or "t1" not in parts:
            continue
        others = {k: v for k, v in parts.items() if k != "t1"}
        t1 = single.get((r.protocol, "t1", parts["t1"]))
        other = single.get((r.protocol, *next(iter(others.items())))) if len(others) == 1 else None
        tables["fig5_t1_dominance"].append({
            "noise_kind": r.noise_kind, "strength": r.strength, "protocol": r.protocol,
            "r_combined": r.r_estimate,
            "r_t1_only": t1.r_estimate if t1 else None,
            "r_other_only": other.r_estimate if other else None,
            "log10_combined_over_t1": _log_ratio(r.r_estimate, t1.r_estimate) if t1 else None,
            "log10_combined_over_other": _log_ratio(r.r_estimate, other.r_estimate) if other else None,
        })

    tables["fig6_purity"] = mean_purity(archive.get("purity", []))

    lines = [f"config hash {archive['config_hash']}", f"{len(rows)} result rows ({len(rows) - len(ok)} failed)"]
    if not rows:
        lines.append("zero rows: nothing to compare")
    kinds = sorted({r.noise_kind for r, _ in ok})
    for kind in kinds:
        for protocol in sorted({r.protocol for r, _ in ok if r.noise_kind == kind}):
            ratios = [_log_ratio(r.r_estimate, r.r_tomography) for r, _ in ok
                      if r.noise_kind == kind and r.protocol == protocol]
            ratios = [x for x in ratios if x is not None]
            if ratios:
                worst = max(ratios, key=abs)
                lines.append(f"{kind:>24s} {protocol}: max |log10(r/r_tomo)| = {abs(worst):.3f} "
                             f"(factor {10 ** abs(worst):.2f})")
    for kind, s in sorted(flags.items()):
        lines.append(f"DRB departs from tomography by more than 10^{DRB_FLAG_THRESHOLD} under {kind} "
                     f"from strength {s:g}")
    for r, _ in rows:
        if not r.ok:
            lines.append(f"failed: {r.protocol} {r.noise_kind} {r.strength:g}: {r.error}")
    return Report("\n".join(lines), tables)


def report(path: str | os.PathLike, out_dir: str | os.PathLike | None = None) -> Report:
    """Build the per-figure tables from an archive and write them next to it (or into ``out_dir``)."""
    archive = load_archive(path)
    rep = build_report(archive)
    target = Path(out_dir) if out_dir is not None else (Path(path) if Path(path).is_dir() else Path(path).parent)
    rep.write(target)
    return rep
