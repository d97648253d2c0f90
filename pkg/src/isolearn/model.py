"""Value types shared by tensor construction, the solver and the experiments.

Everything is real-valued. A ``D x n`` operator ``u`` is vectorized row by
row, so entry ``(j, k)`` sits at flat position ``j * n + k``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

__all__ = [
    "flatten_index",
    "unflatten_index",
    "ObservationSample",
    "FidelityTensor",
    "PartialIsometry",
    "ConstraintSet",
    "SolverConfig",
    "IterationRecord",
    "RunResult",
    "SolverReport",
]


def flatten_index(j: int, k: int, n: int) -> int:
    """Flat position of entry ``(j, k)`` of a row-major ``D x n`` matrix."""
    if n <= 0:
        raise ValueError(f"row width must be positive, got {n}")
    if not 0 <= k < n or j < 0:
        raise IndexError(f"entry ({j}, {k}) out of range for width {n}")
    return j * n + k


def unflatten_index(p: int, n: int) -> tuple[int, int]:
    if p < 0:
        raise IndexError(f"negative flat index {p}")
    return divmod(p, n)


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ObservationSample:
    """Weighted pairs ``(alpha, beta)``: ``alpha`` in the IN space (length
    ``n``), ``beta`` in the OUT space (length ``D``)."""

    weights: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        w = _frozen(np.ravel(self.weights))
        alpha = _frozen(np.atleast_2d(self.alpha))
        beta = _frozen(np.atleast_2d(self.beta))
        if alpha.shape[0] != w.size or beta.shape[0] != w.size:
            raise ValueError(
                f"record count mismatch: {w.size} weights, {alpha.shape[0]} alpha, "
                f"{beta.shape[0]} beta"
            )
        if w.size == 0:
            raise ValueError("sample has no records")
        if beta.shape[1] > alpha.shape[1]:
            raise ValueError(f"OUT dimension {beta.shape[1]} exceeds IN dimension {alpha.shape[1]}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(alpha)) and np.all(np.isfinite(beta))):
            raise ValueError("sample has non-finite entries")
        if np.any(w <= 0):
            raise ValueError("all weights must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @property
    def n(self) -> int:
        return self.alpha.shape[1]

    @property
    def D(self) -> int:
        return self.beta.shape[1]

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def select(self, n=None, D=None) -> "ObservationSample":
        """Keep only the first ``n`` IN and first ``D`` OUT components."""
        n = self.n if n is None else n
        D = self.D if D is None else D
        if n > self.n or D > self.D:
            raise ValueError(f"cannot select ({n}, {D}) from a ({self.n}, {self.D}) sample")
        return ObservationSample(self.weights, self.alpha[:, :n], self.beta[:, :D])

    def concat(self, other: "ObservationSample") -> "ObservationSample":
        return ObservationSample(
            np.concatenate([self.weights, other.weights]),
            np.vstack([self.alpha, other.alpha]),
            np.vstack([self.beta, other.beta]),
        )


@dataclass(frozen=True)
class FidelityTensor:
    """The symmetric PSD kernel ``S[(jk);(j'k')]`` stored as a ``Dn x Dn`` matrix."""

    D: int
    n: int
    s: np.ndarray

    def __post_init__(self):
        s = _frozen(self.s)
        size = self.D * self.n
        if s.shape != (size, size):
            raise ValueError(f"tensor must be {size}x{size} for D={self.D}, n={self.n}; got {s.shape}")
        if not np.array_equal(s, s.T):
            raise ValueError("fidelity tensor must be exactly symmetric")
        object.__setattr__(self, "s", s)

    def min_eigen_ratio(self) -> float:
        """Smallest eigenvalue over the largest one (>= -1e-10 for a valid S)."""
        w = np.linalg.eigvalsh(self.s)
        top = float(np.max(np.abs(w)))
        return float(w[0]) / top if top > 0 else 0.0

    def is_psd(self, rtol=1e-10) -> bool:
        return self.min_eigen_ratio() >= -rtol

    def __add__(self, other: "FidelityTensor") -> "FidelityTensor":
        if (self.D, self.n) != (other.D, other.n):
            raise ValueError("tensor dimension mismatch")
        return FidelityTensor(self.D, self.n, self.s + other.s)


@dataclass(frozen=True)
class PartialIsometry:
    """A ``D x n`` real matrix; feasible when its rows are orthonormal."""

    u: np.ndarray

    def __post_init__(self):
        u = _frozen(np.atleast_2d(self.u))
        if u.shape[0] > u.shape[1]:
            raise ValueError(f"isometry must have D <= n, got shape {u.shape}")
        object.__setattr__(self, "u", u)

    @property
    def D(self) -> int:
        return self.u.shape[0]

    @property
    def n(self) -> int:
        return self.u.shape[1]

    @property
    def residual(self) -> float:
        """``max|u u^T - I|``."""
        return float(np.max(np.abs(self.u @ self.u.T - np.eye(self.D))))

    def is_feasible(self, tol=1e-10) -> bool:
        return self.residual <= tol

    def flat(self) -> np.ndarray:
        return self.u.reshape(-1)


@dataclass(frozen=True)
class ConstraintSet:
    """Homogeneous linear constraints ``c @ vec(u) = 0`` on the next iterate."""

    D: int
    n: int
    c: np.ndarray

    def __post_init__(self):
        c = _frozen(np.asarray(self.c, dtype=float).reshape(-1, self.D * self.n))
        object.__setattr__(self, "c", c)

    @property
    def count(self) -> int:
        return self.c.shape[0]

    @classmethod
    def empty(cls, D, n):
        return cls(D, n, np.zeros((0, D * n)))


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 100
    mu_tolerance: float = 1e-12
    unitarity_tolerance: float = 1e-12
    lambda_tolerance: float = 1e-10
    eigenstate_rank: int = 0
    num_runs: int = 4
    channel: str = "gram"
    q_choice: str = "identity"
    scan_candidates: bool = False
    cycle_window: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        for name in ("mu_tolerance", "unitarity_tolerance", "lambda_tolerance"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.eigenstate_rank < 0 or self.num_runs < 1:
            raise ValueError("eigenstate_rank must be >= 0 and num_runs >= 1")
        if self.channel not in ("gram", "unit"):
            raise ValueError(f"unknown channel {self.channel!r}")
        if self.q_choice not in ("identity", "lambda"):
            raise ValueError(f"unknown q_choice {self.q_choice!r}")

    @property
    def ranks(self) -> range:
        """Eigenstate ranks tried by :func:`isolearn.solver.solve`."""
        return range(self.eigenstate_rank, self.eigenstate_rank + self.num_runs)


class IterationRecord(NamedTuple):
    iteration: int
    mu: float
    fidelity: float
    penalty: float
    lambda_change: float


@dataclass
class RunResult:
    """One run of the iteration loop at a fixed eigenstate rank."""

    rank: int
    solution: PartialIsometry
    fidelity: float
    converged: bool
    lagrange: np.ndarray
    history: list = field(default_factory=list)
    status: str = ""

    @property
    def iterations(self) -> int:
        return len(self.history)


@dataclass
class SolverReport:
    solution: PartialIsometry
    fidelity: float
    converged: bool
    iterations: list
    lambda_final: np.ndarray
    seed: int = 0
    rank: int = 0
    runs: list = field(default_factory=list)

    @property
    def feasibility_residual(self) -> float:
        return self.solution.residual
