"""Gram matrices, basis regularization and fidelity-tensor construction.

The fidelity of a ``D x n`` operator ``u`` on a sample of pairs
``(alpha_l, beta_l)`` with weights ``w_l`` is

    F(u) = sum_l w_l (beta_l . u alpha_l)^2 = vec(u)^T S vec(u),

so every builder here reduces to accumulating rank-one outer products of
``kron(beta_l, alpha_l)``. Sign flips of ``alpha_l`` or ``beta_l`` cancel
exactly in those products.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .linalg import DEGENERACY_RTOL, DegenerateMatrixError, inv_sqrt_psd, symmetrize
from .model import FidelityTensor, ObservationSample, PartialIsometry

__all__ = [
    "InformationIncompleteError",
    "GramPair",
    "LocalizedState",
    "gram_from_sample",
    "regularize",
    "unregularize",
    "build_tensor_pairs",
    "build_tensor_timeseries",
    "christoffel",
    "localized_state",
    "build_tensor_localized",
    "build_tensor_vqa",
    "fidelity",
    "evaluate_probability",
    "max_probability_outcome",
]


class InformationIncompleteError(DegenerateMatrixError):
    """Sample Gram matrix is degenerate; ``directions`` span its near-null space."""

    def __init__(self, message, eigenvalue=None, directions=None):
        super().__init__(message, eigenvalue)
        self.directions = directions


class GramPair(NamedTuple):
    gx: np.ndarray
    gf: np.ndarray
    rx: np.ndarray
    rf: np.ndarray


class LocalizedState(NamedTuple):
    coefficients: np.ndarray
    christoffel: float


def gram_from_sample(vectors, weights=None):
    """``G = sum_l w_l x_l x_l^T`` for the rows ``x_l`` of ``vectors``."""
    x = np.asarray(vectors, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D array of row vectors, got shape {x.shape}")
    if x.shape[0] == 0:
        raise ValueError("no vectors given")
    w = np.ones(x.shape[0]) if weights is None else np.asarray(weights, dtype=float).ravel()
    if w.size != x.shape[0]:
        raise ValueError(f"{w.size} weights for {x.shape[0]} vectors")
    return symmetrize((x * w[:, None]).T @ x)


def _regularizer(g, side, method):
    w, v = np.linalg.eigh(symmetrize(g))
    top = float(np.max(np.abs(w)))
    bad = w <= DEGENERACY_RTOL * top
    if top == 0.0 or np.any(bad):
        raise InformationIncompleteError(
            f"{side}-space Gram matrix is degenerate ({int(bad.sum())} near-null "
            f"direction(s), smallest eigenvalue {w[0]:.3e}); sample is not "
            "information-complete",
            eigenvalue=float(w[0]),
            directions=v[:, bad].T,
        )
    if method == "inv_sqrt":
        return inv_sqrt_psd(g)
    if method == "gram_schmidt":
        low = np.linalg.cholesky(symmetrize(g))
        return np.linalg.inv(low)
    raise ValueError(f"unknown regularization method {method!r}")


def regularize(sample: ObservationSample, method="inv_sqrt"):
    """Transform both sides of the sample to unit Gram matrices.

    Returns the transformed sample and a :class:`GramPair` holding the
    original Grams and the transforms ``rx``, ``rf`` (``alpha <- rx alpha``,
    ``beta <- rf beta``). ``method`` is ``"inv_sqrt"`` (symmetric ``G^-1/2``)
    or ``"gram_schmidt"`` (inverse Cholesky factor).
    """
    gx = gram_from_sample(sample.alpha, sample.weights)
    gf = gram_from_sample(sample.beta, sample.weights)
    rx = _regularizer(gx, "x", method)
    rf = _regularizer(gf, "f", method)
    out = ObservationSample(sample.weights, sample.alpha @ rx.T, sample.beta @ rf.T)
    return out, GramPair(gx, gf, rx, rf)


def unregularize(u_tilde, grams: GramPair):
    """Map an operator found in the regularized bases back: ``rf^-1 u rx``."""
    u_tilde = np.asarray(getattr(u_tilde, "u", u_tilde), dtype=float)
    return np.linalg.solve(grams.rf, u_tilde @ grams.rx)


def build_tensor_pairs(sample: ObservationSample) -> FidelityTensor:
    """``S[(jk);(j'k')] = sum_l w_l beta_j alpha_k beta_j' alpha_k'``."""
    m, D, n = sample.size, sample.D, sample.n
    rows = (sample.beta[:, :, None] * sample.alpha[:, None, :]).reshape(m, D * n)
    s = (rows * sample.weights[:, None]).T @ rows
    return FidelityTensor(D, n, symmetrize(s))


def build_tensor_timeseries(states, weights=None) -> FidelityTensor:
    """Tensor of consecutive pairs ``(X_l, X_{l+1})`` of one trajectory."""
    x = np.asarray(states, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need at least two states of equal dimension")
    w = np.ones(x.shape[0] - 1) if weights is None else weights
    return build_tensor_pairs(ObservationSample(w, x[:-1], x[1:]))


def _quad_inverse(points, gram_inverse):
    return np.einsum("...i,ij,...j->...", points, gram_inverse, points)


def christoffel(point, gram_inverse) -> float:
    """Christoffel function ``K(y) = 1 / (y^T G^-1 y)``."""
    y = np.asarray(point, dtype=float)
    q = float(_quad_inverse(y, np.asarray(gram_inverse, dtype=float)))
    if not q > 0:
        raise ValueError(f"quadratic form y^T G^-1 y = {q:.3e} is not positive")
    return 1.0 / q


def localized_state(point, gram_inverse) -> LocalizedState:
    """Normalized reproducing kernel at ``point``: ``sqrt(K(y)) G^-1 y``.

    Its norm under the Gram metric is one.
    """
    ginv = np.asarray(gram_inverse, dtype=float)
    k = christoffel(point, ginv)
    return LocalizedState(np.sqrt(k) * (ginv @ np.asarray(point, dtype=float)), k)


def _localize_rows(points, gram_inverse):
    q = _quad_inverse(points, gram_inverse)
    if np.any(~(q > 0)):
        bad = int(np.argmax(~(q > 0)))
        raise ValueError(f"record {bad} has a vanishing Christoffel denominator")
    return (points @ gram_inverse) / np.sqrt(q)[:, None]


def build_tensor_localized(sample: ObservationSample, gram_atol=1e-8) -> FidelityTensor:
    """Tensor of the mapping between states localized at each record's ``x``
    and ``f``.

    The sample must already be in orthonormal bases (see :func:`regularize`);
    the result then equals the weighted moments of Christoffel-function
    products ``sum_l w_l x_k x_k' f_j f_j' / ((x^T G_x^-1 x)(f^T G_f^-1 f))``.
    """
    gx = gram_from_sample(sample.alpha, sample.weights)
    gf = gram_from_sample(sample.beta, sample.weights)
    for name, g in (("x", gx), ("f", gf)):
        dev = float(np.max(np.abs(g - np.eye(g.shape[0]))))
        if dev > gram_atol:
            raise ValueError(
                f"{name}-space Gram deviates from identity by {dev:.2e}; regularize the sample first"
            )
    alpha = _localize_rows(sample.alpha, np.linalg.inv(gx))
    beta = _localize_rows(sample.beta, np.linalg.inv(gf))
    return build_tensor_pairs(ObservationSample(sample.weights, alpha, beta))


def build_tensor_vqa(o, rho0) -> FidelityTensor:
    """Tensor of the cost ``Tr O u rho0 u^T``: ``S[(jk);(j'k')] = O_jj' rho0_kk'``."""
    o = np.asarray(o, dtype=float)
    rho0 = np.asarray(rho0, dtype=float)
    for name, a in (("O", o), ("rho0", rho0)):
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"{name} must be square, got shape {a.shape}")
        if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.max(np.abs(a)))):
            raise ValueError(f"{name} must be symmetric")
    if o.shape[0] > rho0.shape[0]:
        raise ValueError("O must not be larger than rho0")
    return FidelityTensor(o.shape[0], rho0.shape[0], symmetrize(np.kron(symmetrize(o), symmetrize(rho0))))


def _as_matrix(u):
    return np.asarray(u.u if isinstance(u, PartialIsometry) else u, dtype=float)


def fidelity(u, s: FidelityTensor) -> float:
    """``F = vec(u)^T S vec(u)``."""
    u = _as_matrix(u)
    if u.shape != (s.D, s.n):
        raise ValueError(f"operator shape {u.shape} does not match tensor ({s.D}, {s.n})")
    v = u.reshape(-1)
    return float(v @ s.s @ v)


def evaluate_probability(u, grams: GramPair, x, f) -> float:
    """Probability of outcome ``f`` given input ``x``, both localized states.

    ``P = (f^T G_f^-1 u x)^2 / ((f^T G_f^-1 f)(x^T G_x^-1 x))`` with ``u``
    expressed in the original (unregularized) bases.
    """
    u = _as_matrix(u)
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    if not (np.any(x) and np.any(f)):
        raise ValueError("x and f must be nonzero")
    gf_inv_f = np.linalg.solve(grams.gf, f)
    num = float(gf_inv_f @ u @ x) ** 2
    den = float(f @ gf_inv_f) * float(x @ np.linalg.solve(grams.gx, x))
    return num / den


def max_probability_outcome(u, grams: GramPair, x):
    """Outcome vector with the largest probability given ``x`` and that probability.

    Returns ``(G_f a, a^T G_f a)`` with ``a = G_f^-1 u x sqrt(K(x))``.
    """
    u = _as_matrix(u)
    x = np.asarray(x, dtype=float)
    if not np.any(x):
        raise ValueError("x must be nonzero")
    k = christoffel(x, np.linalg.inv(grams.gx))
    a = np.linalg.solve(grams.gf, u @ x) * np.sqrt(k)
    f = grams.gf @ a
    return f, float(a @ f)
