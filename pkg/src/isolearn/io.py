"""Sample CSV files, model JSON files and plain matrix files.

Numbers are written with 17 significant digits so that every double
survives a write/read cycle bit for bit.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .model import ObservationSample, SolverReport

__all__ = [
    "SampleFormatError",
    "ModelData",
    "format_float",
    "sample_header",
    "write_sample",
    "read_sample",
    "write_matrix",
    "read_matrix",
    "model_from_report",
    "write_model",
    "read_model",
]


class SampleFormatError(ValueError):
    """Malformed sample, model or matrix file."""


def format_float(x) -> str:
    return format(float(x), ".17g")


def sample_header(n, D):
    return ["weight"] + [f"x{k}" for k in range(n)] + [f"f{j}" for j in range(D)]


def write_sample(path, sample: ObservationSample):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(sample_header(sample.n, sample.D))
        for w, a, b in zip(sample.weights, sample.alpha, sample.beta):
            out.writerow([format_float(w)] + [format_float(v) for v in a] + [format_float(v) for v in b])


def _parse_header(header, path):
    if not header or header[0] != "weight":
        raise SampleFormatError(f"{path}: header must start with 'weight'")
    xs = [h for h in header[1:] if h.startswith("x")]
    fs = [h for h in header[1:] if h.startswith("f")]
    n, D = len(xs), len(fs)
    if header != sample_header(n, D):
        raise SampleFormatError(f"{path}: header must read weight,x0..x{{n-1}},f0..f{{D-1}}")
    if n == 0 or D == 0:
        raise SampleFormatError(f"{path}: need at least one x and one f column")
    return n, D


def read_sample(path) -> ObservationSample:
    """Parse a sample CSV; raises :class:`SampleFormatError` on any defect."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SampleFormatError(f"{path}: file is empty")
    n, D = _parse_header([h.strip() for h in rows[0]], path)
    body = [r for r in rows[1:] if r]
    if not body:
        raise SampleFormatError(f"{path}: no records")
    try:
        data = np.array([[float(v) for v in r] for r in body if len(r) == 1 + n + D])
    except ValueError as exc:
        raise SampleFormatError(f"{path}: {exc}") from exc
    if data.shape[0] != len(body):
        raise SampleFormatError(f"{path}: every row needs {1 + n + D} columns")
    if not np.all(np.isfinite(data)):
        raise SampleFormatError(f"{path}: non-finite value")
    if np.any(data[:, 0] <= 0):
        raise SampleFormatError(f"{path}: weights must be positive")
    try:
        return ObservationSample(data[:, 0], data[:, 1 : 1 + n], data[:, 1 + n :])
    except ValueError as exc:
        raise SampleFormatError(f"{path}: {exc}") from exc


def write_matrix(path, m):
    m = np.atleast_2d(np.asarray(m, dtype=float))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        for row in m:
            out.writerow([format_float(v) for v in row])


def read_matrix(path):
    """Read a headerless CSV matrix, or the ``u`` field of a model file."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        return read_model(path).matrix
    try:
        rows = [[float(v) for v in r] for r in csv.reader(text.splitlines()) if r]
    except ValueError as exc:
        raise SampleFormatError(f"{path}: {exc}") from exc
    if not rows or len({len(r) for r in rows}) != 1:
        raise SampleFormatError(f"{path}: matrix rows must be non-empty and of equal length")
    return np.array(rows)


@dataclass
class ModelData:
    D: int
    n: int
    channel: str
    u: list
    fidelity: float
    converged: bool
    iterations: int
    seed: int
    rank: int = 0
    history: list = field(default_factory=list)

    @property
    def matrix(self):
        return np.array(self.u, dtype=float).reshape(self.D, self.n)

    def __post_init__(self):
        m = np.asarray(self.u, dtype=float)
        if m.ndim != 2 or m.shape != (self.D, self.n):
            raise SampleFormatError(f"u must be {self.D}x{self.n}, got shape {m.shape}")


def model_from_report(u, report: SolverReport, channel) -> ModelData:
    """``u`` is the operator in the caller's basis; fidelity and history come
    from the report."""
    u = np.asarray(getattr(u, "u", u), dtype=float)
    history = [
        {"iter": int(h.iteration), "mu": float(h.mu), "F": float(h.fidelity), "penalty": float(h.penalty)}
        for h in report.iterations
    ]
    return ModelData(
        D=u.shape[0],
        n=u.shape[1],
        channel=channel,
        u=u.tolist(),
        fidelity=float(report.fidelity),
        converged=bool(report.converged),
        iterations=len(report.iterations),
        seed=int(report.seed),
        rank=int(report.rank),
        history=history,
    )


def write_model(path, model: ModelData):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(asdict(model), fh, indent=1)
        fh.write("\n")


def read_model(path) -> ModelData:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        return ModelData(**raw)
    except (json.JSONDecodeError, TypeError) as exc:
        raise SampleFormatError(f"{path}: not a model file ({exc})") from exc
