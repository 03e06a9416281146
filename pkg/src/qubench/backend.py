"""Execution backends: the exact local simulator and a small remote-job client.

The remote wire contract is deliberately generic::

    POST {endpoint}/jobs        {"qasm": str, "shots": int}  -> {"job_id": str}
    GET  {endpoint}/jobs/{id}                                -> {"status": str, "counts"?: {bitstring: int}}

with ``Authorization: Bearer <token>``.  Endpoint and token default to the
``QUBENCH_ENDPOINT`` and ``QUBENCH_TOKEN`` environment variables.
"""

from __future__ import annotations

import enum
import json
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol as TypingProtocol

import numpy as np
import requests

from . import simulator
from .circgen import Circuit, to_openqasm
from .noise import NoiseModel

LOCAL_MAX_QUBITS = 5
ENDPOINT_ENV = "QUBENCH_ENDPOINT"
TOKEN_ENV = "QUBENCH_TOKEN"


class BackendError(RuntimeError):
    pass


class BackendCapabilityError(BackendError, ValueError):
    pass


class BackendUnavailableError(BackendError):
    pass


class JobTimeoutError(BackendUnavailableError):
    pass


class ProtocolError(BackendError):
    """The service answered, but not in the agreed shape."""

    def __init__(self, message: str, raw_body: str | bytes | None = None):
        super().__init__(message)
        self.raw_body = raw_body


@dataclass(frozen=True)
class BackendCapabilities:
    max_qubits: int
    supports_exact_probabilities: bool


class ExecutionBackend(TypingProtocol):
    capabilities: BackendCapabilities

    def execute(self, circuit: Circuit, shots: int) -> dict:
        ...


def sample_counts(probabilities: np.ndarray, shots: int, rng: np.random.Generator | int | None) -> np.ndarray:
    """Inverse-CDF sampling of ``shots`` outcomes; returns a count per outcome index."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    p = np.clip(np.asarray(probabilities, dtype=float), 0.0, None)
    cdf = np.cumsum(p / p.sum())
    cdf[-1] = 1.0
    idx = np.searchsorted(cdf, rng.random(shots), side="right")
    return np.bincount(idx, minlength=len(p))


def _bitstrings(w: int) -> list[str]:
    return [format(i, f"0{w}b") for i in range(2**w)]


def local_execute(circuit: Circuit, noise: NoiseModel | None = None, shots: int = 0,
                  seed: int | None = None) -> dict:
    """Outcome table of one noisy run.

    ``shots == 0`` gives the exact outcome probabilities; otherwise integer
    counts from a seeded sample of the final diagonal.  Zero entries are omitted.
    """
    w = circuit.width
    if w > LOCAL_MAX_QUBITS:
        raise BackendCapabilityError(f"local backend supports at most {LOCAL_MAX_QUBITS} qubits, got {w}")
    if shots < 0:
        raise ValueError("shots must be non-negative")
    rho = simulator.run(circuit, noise or NoiseModel())
    probs = simulator.outcome_probabilities(rho)
    labels = _bitstrings(w)
    if shots == 0:
        return {b: float(p) for b, p in zip(labels, probs) if p > 1e-15}
    counts = sample_counts(probs, shots, seed)
    return {b: int(c) for b, c in zip(labels, counts) if c}


@dataclass
class LocalBackend:
    noise: NoiseModel = field(default_factory=NoiseModel)
    seed: int | None = None
    capabilities: BackendCapabilities = BackendCapabilities(LOCAL_MAX_QUBITS, True)

    def execute(self, circuit: Circuit, shots: int) -> dict:
        return local_execute(circuit, self.noise, shots, self.seed)


class JobStatus(str, enum.Enum):
    QUEUED = "Queued"
    RUNNING = "Running"
    DONE = "Done"
    FAILED = "Failed"


@dataclass
class JobRecord:
    job_id: str
    qasm: str
    shots: int
    status: JobStatus = JobStatus.QUEUED
    counts: dict | None = None

    def __post_init__(self):
        self.status = JobStatus(self.status)
        if (self.counts is not None) != (self.status is JobStatus.DONE):
            raise ProtocolError(f"counts must be present exactly when status is Done (status={self.status.value})")
        if self.counts is not None and sum(self.counts.values()) != self.shots:
            raise ProtocolError(f"counts sum to {sum(self.counts.values())}, expected {self.shots}")

    def to_dict(self) -> dict:
        return {"job_id": self.job_id, "qasm": self.qasm, "shots": self.shots,
                "status": self.status.value, "counts": self.counts}


def _parse_json(resp: requests.Response) -> dict:
    try:
        body = resp.json()
    except ValueError as exc:
        raise ProtocolError(f"response is not JSON: {exc}", resp.text) from None
    if not isinstance(body, dict):
        raise ProtocolError("response is not a JSON object", resp.text)
    return body


class RemoteClient:
    capabilities = BackendCapabilities(max_qubits=64, supports_exact_probabilities=False)

    def __init__(self, endpoint: str | None = None, token: str | None = None, *, attempts: int = 3,
                 backoff: float = 0.5, timeout: float = 10.0, poll_interval: float = 1.0,
                 archive_path: str | os.PathLike | None = None,
                 session: requests.Session | None = None, sleep: Callable[[float], None] = time.sleep):
        self.endpoint = (endpoint or os.environ.get(ENDPOINT_ENV) or "").rstrip("/")
        self.token = token if token is not None else os.environ.get(TOKEN_ENV, "")
        if not self.endpoint:
            raise BackendUnavailableError(f"no endpoint configured (set {ENDPOINT_ENV})")
        self.attempts = attempts
        self.backoff = backoff
        self.timeout = timeout
        self.poll_interval = poll_interval
        self.archive_path = archive_path
        self.session = session or requests.Session()
        self.sleep = sleep
        self.archive: list[dict] = []

    def _record(self, kind: str, payload, body) -> None:
        entry = {"kind": kind, "time": time.time(), "request": payload, "response": body}
        self.archive.append(entry)
        if self.archive_path:
            with open(self.archive_path, "a") as fh:
                fh.write(json.dumps(entry) + "\n")

    def _request(self, method: str, path: str, payload: dict | None = None) -> requests.Response:
        url = f"{self.endpoint}{path}"
        headers = {"Authorization": f"Bearer {self.token}"} if self.token else {}
        last = None
        for attempt in range(self.attempts):
            try:
                resp = self.session.request(method, url, json=payload, headers=headers, timeout=self.timeout)
            except requests.RequestException as exc:
                last = f"{type(exc).__name__}: {exc}"
            else:
                if resp.status_code < 500:
                    if resp.status_code >= 400:
                        self._record(method, payload, resp.text)
                        raise ProtocolError(f"{method} {path} returned HTTP {resp.status_code}", resp.text)
                    return resp
                last = f"HTTP {resp.status_code}"
                self._record(method, payload, resp.text)
            if attempt + 1 < self.attempts:
                self.sleep(self.backoff * 2**attempt)
        raise BackendUnavailableError(f"{method} {url} failed after {self.attempts} attempts ({last})")

    def submit(self, circuit: Circuit | str, shots: int) -> JobRecord:
        if shots < 1:
            raise ValueError("remote jobs need at least one shot")
        qasm = circuit if isinstance(circuit, str) else to_openqasm(circuit)
        payload = {"qasm": qasm, "shots": int(shots)}
        resp = self._request("POST", "/jobs", payload)
        body = _parse_json(resp)
        self._record("submit", payload, body)
        job_id = body.get("job_id")
        if not isinstance(job_id, str) or not job_id:
            raise ProtocolError("submit response lacks a job_id", resp.text)
        return JobRecord(job_id, qasm, int(shots))

    def poll(self, job: JobRecord | str, shots: int | None = None) -> JobRecord:
        if isinstance(job, str):
            job = JobRecord(job, "", shots or 0)
        resp = self._request("GET", f"/jobs/{job.job_id}")
        body = _parse_json(resp)
        self._record("poll", {"job_id": job.job_id}, body)
        try:
            status = JobStatus(body.get("status"))
        except ValueError:
            raise ProtocolError(f"unknown job status {body.get('status')!r}", resp.text) from None
        counts = body.get("counts") if status is JobStatus.DONE else None
        if status is JobStatus.DONE:
            if not isinstance(counts, dict) or not all(isinstance(v, int) for v in counts.values()):
                raise ProtocolError("Done response lacks an integer counts table", resp.text)
            total = sum(counts.values())
            if job.shots and total != job.shots:
                raise ProtocolError(f"counts sum to {total}, expected {job.shots}", resp.text)
        shots_seen = job.shots or (sum(counts.values()) if counts else 0)
        return JobRecord(job.job_id, job.qasm, shots_seen, status, counts)

    def wait(self, job: JobRecord, timeout: float = 600.0) -> JobRecord:
        deadline = time.monotonic() + timeout
        while True:
            job = self.poll(job)
            if job.status in (JobStatus.DONE, JobStatus.FAILED):
                return job
            if time.monotonic() >= deadline:
                raise JobTimeoutError(f"job {job.job_id} still {job.status.value} after {timeout}s")
            self.sleep(self.poll_interval)

    def execute(self, circuit: Circuit, shots: int) -> dict:
        job = self.wait(self.submit(circuit, shots))
        if job.status is JobStatus.FAILED:
            raise BackendError(f"job {job.job_id} failed")
        return job.counts


def remote_submit(endpoint: str | None, token: str | None, circuit: Circuit | str, shots: int,
                  **kwargs) -> JobRecord:
    return RemoteClient(endpoint, token, **kwargs).submit(circuit, shots)


def remote_poll(endpoint: str | None, token: str | None, job_id: str, **kwargs) -> JobRecord:
    return RemoteClient(endpoint, token, **kwargs).poll(job_id)
