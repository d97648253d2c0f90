"""Data generators and end-to-end drivers.

Covers recovery of unitary dynamics from a trajectory, the
Chebyshev-to-Legendre polynomial mapping, the fidelity sweep over the
output dimension and scalar function interpolation through a learned
channel. Every generator is a pure function of its arguments and a seed;
randomness comes from numpy's PCG64 stream.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from numpy.polynomial import chebyshev, legendre

from .linalg import symmetrize
from .model import FidelityTensor, ObservationSample, PartialIsometry, SolverConfig, SolverReport
from .solver import solve
from .tensor import (
    GramPair,
    build_tensor_localized,
    build_tensor_pairs,
    evaluate_probability,
    max_probability_outcome,
    regularize,
    unregularize,
)

__all__ = [
    "euler_rotation",
    "random_orthogonal",
    "generate_trajectory",
    "solve_sample",
    "recover_dynamics",
    "sign_invariant_difference",
    "channel_fidelity",
    "generate_poly_sample",
    "recover_poly_mapping",
    "legendre_over_chebyshev",
    "random_mapping_instance",
    "SweepRow",
    "fidelity_sweep",
    "InterpolationModel",
    "interpolate_scalar",
    "scalar_sample",
    "SO3_ANGLES",
    "SO3_START",
]

SO3_ANGLES = (0.1, 0.4, 0.7)
SO3_START = (0.09205746178983236, 0.5523447707389941, 0.8285171561084912)
# entries below this are reported as exact zeros by recover_poly_mapping
ZERO_CUTOFF = 1e-12
# relative margin added on each side when mapping a sample range onto [-1, 1]
RANGE_MARGIN = 0.01
F_GRID_POINTS = 2001


def _rng(seed):
    return np.random.default_rng(seed)


def _signs(rng, size):
    return rng.integers(0, 2, size=size) * 2.0 - 1.0


def euler_rotation(phi, theta, psi):
    """``Z(phi) X(theta) Z(psi)``: the 3x3 rotation for Euler angles."""
    for a in (phi, theta, psi):
        if not np.isfinite(a):
            raise ValueError("Euler angles must be finite")

    def z(a):
        c, s = np.cos(a), np.sin(a)
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])

    c, s = np.cos(theta), np.sin(theta)
    x = np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    return z(phi) @ x @ z(psi)


def random_orthogonal(dim, seed):
    """QR of a seeded Gaussian matrix, sign-fixed so that ``R`` has a positive diagonal."""
    if dim < 1:
        raise ValueError(f"dimension must be at least 1, got {dim}")
    a = _rng(seed).standard_normal((dim, dim))
    q, r = np.linalg.qr(a)
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return q * d


def generate_trajectory(u0, x0, steps, seed=0, phase_flips=True) -> ObservationSample:
    """``steps`` consecutive pairs ``(X_l, X_{l+1})`` of ``X_{l+1} = U X_l``.

    With ``phase_flips`` every stored vector is multiplied by an independent
    random ``+-1``.
    """
    u0 = np.asarray(u0, dtype=float)
    x = np.asarray(x0, dtype=float).ravel()
    if u0.ndim != 2 or u0.shape[0] != u0.shape[1] or u0.shape[0] != x.size:
        raise ValueError("U must be square and match the initial vector")
    if abs(np.linalg.norm(x) - 1.0) > 1e-12:
        raise ValueError(f"initial vector must have unit norm, got {np.linalg.norm(x):.15g}")
    if steps < 1:
        raise ValueError("steps must be at least 1")
    states = np.empty((steps + 1, x.size))
    states[0] = x
    for l in range(steps):
        states[l + 1] = u0 @ states[l]
    rng = _rng(seed)
    alpha = states[:-1].copy()
    beta = states[1:].copy()
    if phase_flips:
        alpha *= _signs(rng, steps)[:, None]
        beta *= _signs(rng, steps)[:, None]
    return ObservationSample(np.ones(steps), alpha, beta)


def solve_sample(sample: ObservationSample, channel="gram", config=SolverConfig()):
    """Solve on a sample in the given channel.

    Returns ``(PartialIsometry, SolverReport, GramPair or None)``; the
    operator is expressed in the sample's raw bases.
    """
    config = replace(config, channel=channel)
    if channel == "gram":
        reg, grams = regularize(sample)
        report = solve(build_tensor_pairs(reg), config)
        return PartialIsometry(unregularize(report.solution, grams)), report, grams
    if channel == "unit":
        report = solve(build_tensor_pairs(sample), config)
        return report.solution, report, None
    raise ValueError(f"unknown channel {channel!r}")


def recover_dynamics(sample: ObservationSample, channel="gram", config=SolverConfig()):
    """Learn the operator mapping ``alpha`` to ``beta``.

    The gram channel solves in Gram-orthonormalized bases and maps the
    answer back; the unit channel solves on the raw vectors.

    Returns
    -------
    (PartialIsometry, SolverReport)
    """
    u, report, _ = solve_sample(sample, channel, config)
    return u, report


def channel_fidelity(u, sample: ObservationSample, channel="gram") -> float:
    """Fidelity of a raw-basis operator measured the way ``channel`` measures it.

    For the gram channel the operator is moved into the regularized bases
    (``rf u rx^-1``) first, so the value matches the solver's report.
    """
    u = np.asarray(getattr(u, "u", u), dtype=float)
    if channel == "gram":
        reg, grams = regularize(sample)
        u = grams.rf @ np.linalg.solve(grams.rx.T, u.T).T
        sample = reg
    elif channel != "unit":
        raise ValueError(f"unknown channel {channel!r}")
    v = u.reshape(-1)
    return float(v @ build_tensor_pairs(sample).s @ v)


def sign_invariant_difference(a, b) -> float:
    """``min over s in {+1, -1} of max|a - s b|``."""
    a = np.asarray(getattr(a, "u", a), dtype=float)
    b = np.asarray(getattr(b, "u", b), dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(min(np.max(np.abs(a - b)), np.max(np.abs(a + b))))


def generate_poly_sample(n, D, points, seed=0, phase_flips=True) -> ObservationSample:
    """``x = xi T_k(y)``, ``f = zeta P_j(y)`` on equidistant ``y`` in ``[-1, 1]``."""
    if not n >= D >= 1:
        raise ValueError(f"need n >= D >= 1, got n={n}, D={D}")
    if points < n:
        raise ValueError(f"need at least n={n} points, got {points}")
    y = np.linspace(-1.0, 1.0, points)
    alpha = chebyshev.chebvander(y, n - 1)
    beta = legendre.legvander(y, D - 1)
    if phase_flips:
        rng = _rng(seed)
        alpha = alpha * _signs(rng, points)[:, None]
        beta = beta * _signs(rng, points)[:, None]
    return ObservationSample(np.ones(points), alpha, beta)


def legendre_over_chebyshev(D, n):
    """Coefficients of ``P_j`` over ``T_k``: row ``j`` expands ``P_j``."""
    out = np.zeros((D, n))
    for j in range(D):
        c = legendre.leg2poly(np.eye(j + 1)[j])
        t = chebyshev.poly2cheb(c)
        out[j, : min(n, t.size)] = t[:n]
    return out


def recover_poly_mapping(sample: ObservationSample, D=None, n=None, config=SolverConfig()):
    """Gram-channel solve on the first ``n`` IN and ``D`` OUT components.

    Returns ``(PartialIsometry, SolverReport)``; entries below ``1e-12`` in
    magnitude are set to zero and the sign is fixed so that the largest
    entry is positive.
    """
    sub = sample.select(n, D)
    u, report, _ = solve_sample(sub, "gram", config)
    m = np.array(u.u)
    m[np.abs(m) < ZERO_CUTOFF] = 0.0
    k = np.unravel_index(np.argmax(np.abs(m)), m.shape)
    if m[k] < 0:
        m = -m
    return PartialIsometry(m + 0.0), report


def random_mapping_instance(D, n, points=10000, seed=0, noise=1.0) -> FidelityTensor:
    """Localized-state tensor of a noisy random linear map.

    ``x`` is uniform on ``[0, 1]^n``, ``f = x W / n + noise * U[0, 1]^D``
    with ``W`` uniform on ``[0, 1]``. Used for convergence profiling.
    """
    rng = _rng(seed)
    x = rng.uniform(0.0, 1.0, (points, n))
    w = rng.uniform(0.0, 1.0, (n, D))
    f = x @ w / n + noise * rng.uniform(0.0, 1.0, (points, D))
    reg, _ = regularize(ObservationSample(np.ones(points), x, f))
    return build_tensor_localized(reg)


class SweepRow(NamedTuple):
    D: int
    ratio: float
    gain: float
    converged: bool
    f_orig: float
    f_max: float


def fidelity_sweep(n, points, seed=0, config=SolverConfig(), dims=None):
    """Optimal versus generating fidelity for every output dimension ``D``.

    For each ``D`` a random orthogonal ``U_n`` is truncated to its first
    ``D`` rows; ``phi = u psi`` for random unit ``psi`` (not renormalized).
    Rows report ``F_orig / M`` and ``(F_max - F_orig) / F_orig``.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    rows = []
    children = np.random.SeedSequence(seed).spawn(n)
    for D in dims or range(1, n + 1):
        rng = np.random.default_rng(children[D - 1])
        u = random_orthogonal(n, rng.integers(2**63))[:D]
        psi = rng.standard_normal((points, n))
        psi /= np.linalg.norm(psi, axis=1)[:, None]
        phi = psi @ u.T
        s = build_tensor_pairs(ObservationSample(np.ones(points), psi, phi))
        v = u.reshape(-1)
        f_orig = float(v @ s.s @ v)
        try:
            report = solve(s, replace(config, channel="unit"))
            f_max, converged = report.fidelity, report.converged
        except ValueError:
            f_max, converged = float("nan"), False
        rows.append(SweepRow(D, f_orig / points, (f_max - f_orig) / f_orig, converged, f_orig, f_max))
    return rows


def _range_map(values):
    lo, hi = float(np.min(values)), float(np.max(values))
    span = hi - lo
    if not span > 0:
        raise ValueError("sample values are all equal; cannot map them onto [-1, 1]")
    lo -= RANGE_MARGIN * span
    hi += RANGE_MARGIN * span
    return 2.0 / (hi - lo), -(hi + lo) / (hi - lo)


@dataclass(frozen=True)
class InterpolationModel:
    """A learned channel between Chebyshev bases in ``x`` and in ``f``.

    ``u`` and ``grams`` refer to the unflipped basis ``T_k(a x + b)``,
    ``T_j(c f + d)``.
    """

    u: np.ndarray
    grams: GramPair
    x_map: tuple
    f_map: tuple
    x: np.ndarray
    f: np.ndarray
    weights: np.ndarray
    report: SolverReport

    @property
    def n(self):
        return self.u.shape[1]

    @property
    def D(self):
        return self.u.shape[0]

    def x_vector(self, x):
        a, b = self.x_map
        return chebyshev.chebvander(a * np.asarray(x, dtype=float) + b, self.n - 1)

    def f_vector(self, f):
        c, d = self.f_map
        return chebyshev.chebvander(c * np.asarray(f, dtype=float) + d, self.D - 1)

    def _psi(self, y):
        # psi_y at every sample point, rows indexed by query
        gx_inv = np.linalg.inv(self.grams.gx)
        yv = np.atleast_2d(self.x_vector(y))
        xv = self.x_vector(self.x)
        proj = yv @ gx_inv
        norm = np.sqrt(np.einsum("ij,ij->i", proj, yv))
        return (proj @ xv.T) / norm[:, None], norm

    def radon_nikodym(self, y):
        """``<g psi_y^2>``: a positive-weight average of the observed ``f``."""
        psi, _ = self._psi(y)
        return (psi**2 * self.weights) @ self.f

    def least_squares(self, y):
        """``psi_y(y) <g psi_y>``: the ordinary least squares fit."""
        psi, norm = self._psi(y)
        return norm * ((psi * self.weights) @ self.f)

    def max_probability(self, y):
        """Outcome with the largest channel probability at ``y`` over a
        2001-point grid of the sampled ``f`` range; returns ``(f, P)`` arrays."""
        c, d = self.f_map
        grid = np.linspace(-1.0, 1.0, F_GRID_POINTS)
        f_grid = (grid - d) / c
        fv = chebyshev.chebvander(grid, self.D - 1)
        gf_inv_fv = np.linalg.solve(self.grams.gf, fv.T)
        f_norm = np.einsum("ij,ji->i", fv, gf_inv_fv)
        ys = np.atleast_1d(np.asarray(y, dtype=float))
        best_f = np.empty(ys.size)
        best_p = np.empty(ys.size)
        for i, yy in enumerate(ys):
            xv = self.x_vector(yy).ravel()
            x_norm = float(xv @ np.linalg.solve(self.grams.gx, xv))
            p = ((self.u @ xv) @ gf_inv_fv) ** 2 / (f_norm * x_norm)
            k = int(np.argmax(p))
            best_f[i], best_p[i] = f_grid[k], p[k]
        return best_f, best_p

    def max_probability_vector(self, y):
        """Probability of the unconstrained best outcome vector ``G_f a``.

        Equals one for every ``y`` when ``D = n``; below one is possible for ``D < n``.
        """
        ys = np.atleast_1d(np.asarray(y, dtype=float))
        return np.array([max_probability_outcome(self.u, self.grams, self.x_vector(v).ravel())[1] for v in ys])

    def probability(self, x, f):
        """Channel probability of outcome ``f`` at the scalar input ``x``."""
        return evaluate_probability(self.u, self.grams, self.x_vector(x).ravel(), self.f_vector(f).ravel())


def scalar_sample(func, points, lo=-1.0, hi=1.0, seed=0):
    """``points`` uniform random ``x`` in ``[lo, hi]`` with ``f = func(x)``."""
    x = np.sort(_rng(seed).uniform(lo, hi, points))
    return x, np.asarray(func(x), dtype=float)


def interpolate_scalar(x, f, n, D, config=SolverConfig(), seed=0, weights=None) -> InterpolationModel:
    """Learn a channel from localized states at ``x`` to localized states at ``f``.

    Arguments are mapped onto ``[-1, 1]`` (1% margin) and expanded in
    Chebyshev polynomials; each record gets independent ``+-1`` flips.
    """
    x = np.asarray(x, dtype=float).ravel()
    f = np.asarray(f, dtype=float).ravel()
    if x.size != f.size:
        raise ValueError("x and f must have the same length")
    if not n >= D >= 1:
        raise ValueError(f"need n >= D >= 1, got n={n}, D={D}")
    w = np.ones(x.size) if weights is None else np.asarray(weights, dtype=float).ravel()
    x_map, f_map = _range_map(x), _range_map(f)
    xv = chebyshev.chebvander(x_map[0] * x + x_map[1], n - 1)
    fv = chebyshev.chebvander(f_map[0] * f + f_map[1], D - 1)
    rng = _rng(seed)
    flipped = ObservationSample(w, xv * _signs(rng, x.size)[:, None], fv * _signs(rng, x.size)[:, None])
    reg, grams = regularize(flipped)
    report = solve(build_tensor_localized(reg), replace(config, channel="gram"))
    u = unregularize(report.solution, grams)
    # flips leave the Gram matrices unchanged, so the transforms apply to unflipped vectors too
    grams = GramPair(symmetrize(grams.gx), symmetrize(grams.gf), grams.rx, grams.rf)
    return InterpolationModel(u, grams, x_map, f_map, x, f, w, report)
