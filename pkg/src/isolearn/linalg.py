"""Dense real symmetric linear algebra used by the solver.

All routines are pure functions of their inputs. Eigenpairs always come back
sorted by descending eigenvalue with a fixed sign convention so that repeated
calls on identical input give identical output.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg

__all__ = [
    "DegenerateMatrixError",
    "EigenDecomposition",
    "EliminationBasis",
    "sym_eig",
    "gen_eig",
    "inv_sqrt_psd",
    "eliminate_constraints",
    "symmetrize",
]

# relative threshold below which a metric eigenvalue (or a pivot) counts as zero
DEGENERACY_RTOL = 1e-12


class DegenerateMatrixError(ValueError):
    """A matrix that must be positive definite is (numerically) singular."""

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class EigenDecomposition(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray


class EliminationBasis(NamedTuple):
    """Null-space basis ``M`` of a homogeneous constraint matrix ``C``.

    ``basis`` has shape ``(ncols, ncols - rank)``; ``pivots`` are the
    eliminated coordinates and ``free`` the surviving ones, so that
    ``basis[free]`` is the identity.
    """

    basis: np.ndarray
    rank: int
    pivots: np.ndarray
    free: np.ndarray

    @property
    def n_variables(self) -> int:
        return self.basis.shape[1]


def _as_finite_square(a, name):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def symmetrize(a):
    """Return ``(a + a.T) / 2``; the result is exactly symmetric."""
    a = np.asarray(a, dtype=float)
    return 0.5 * (a + a.T)


def _fix_signs(vectors):
    # first component that is not numerically zero made positive
    vectors = np.array(vectors, dtype=float, copy=True)
    if vectors.size == 0:
        return vectors
    mag = np.abs(vectors)
    thresh = 1e-12 * mag.max(axis=0, keepdims=True)
    first = np.argmax(mag > thresh, axis=0)
    signs = np.sign(vectors[first, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _sorted_desc(values, vectors):
    order = np.argsort(-values, kind="stable")
    return EigenDecomposition(values[order], _fix_signs(vectors[:, order]))


def sym_eig(a) -> EigenDecomposition:
    """All eigenpairs of a real symmetric matrix, eigenvalues descending.

    Eigenvectors are orthonormal columns; each column's first non-negligible
    component is positive.
    """
    a = _as_finite_square(a, "a")
    if a.shape[0] == 0:
        return EigenDecomposition(np.zeros(0), np.zeros((0, 0)))
    w, v = np.linalg.eigh(symmetrize(a))
    return _sorted_desc(w, v)


def _check_positive_definite(b, what):
    w = np.linalg.eigvalsh(b)
    wmax = float(np.max(np.abs(w))) if w.size else 0.0
    wmin = float(w[0]) if w.size else 0.0
    if w.size == 0 or wmax == 0.0 or wmin <= DEGENERACY_RTOL * wmax:
        raise DegenerateMatrixError(
            f"{what} is not positive definite: smallest eigenvalue {wmin:.6e} "
            f"(largest {wmax:.6e})",
            eigenvalue=wmin,
        )
    return w


def gen_eig(a, b, check=True) -> EigenDecomposition:
    """Solve ``a v = mu b v`` for symmetric ``a`` and positive definite ``b``.

    Eigenvalues are returned in descending order and the eigenvectors are
    ``b``-orthonormal (``V.T @ b @ V = I``).

    Raises
    ------
    DegenerateMatrixError
        If the smallest eigenvalue of ``b`` is not above ``1e-12`` times its
        largest one.
    """
    a = _as_finite_square(a, "a")
    b = _as_finite_square(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.shape[0] == 0:
        return EigenDecomposition(np.zeros(0), np.zeros((0, 0)))
    b = symmetrize(b)
    if check:
        _check_positive_definite(b, "metric matrix")
    # Cholesky reduction to a standard problem: c = L^-1 a L^-T
    low = np.linalg.cholesky(b)
    tmp = scipy.linalg.solve_triangular(low, symmetrize(a), lower=True)
    c = scipy.linalg.solve_triangular(low, tmp.T, lower=True)
    std = sym_eig(c)
    vectors = scipy.linalg.solve_triangular(low.T, std.vectors, lower=False)
    return EigenDecomposition(std.values, vectors)


def inv_sqrt_psd(g):
    """Symmetric inverse square root ``G^{-1/2}`` (all positive branches).

    Raises
    ------
    DegenerateMatrixError
        If ``g`` has an eigenvalue at or below ``1e-12`` times its largest.
    """
    g = symmetrize(_as_finite_square(g, "g"))
    w, v = np.linalg.eigh(g)
    wmax = float(np.max(np.abs(w))) if w.size else 0.0
    if w.size and (wmax == 0.0 or w[0] <= DEGENERACY_RTOL * wmax):
        raise DegenerateMatrixError(
            f"Gram matrix is degenerate: smallest eigenvalue {w[0]:.6e} "
            f"(largest {wmax:.6e})",
            eigenvalue=float(w[0]),
        )
    return symmetrize((v / np.sqrt(w)) @ v.T)


def eliminate_constraints(c, ncols=None) -> EliminationBasis:
    """Null-space basis of ``c`` by rank-revealing column-pivoted elimination.

    Parameters
    ----------
    c : (N_d, N) array_like
        Homogeneous constraint rows ``c @ u = 0``. May have zero rows, in
        which case ``ncols`` must be given.
    ncols : int, optional
        Number of unknowns; required when ``c`` is empty.

    Returns
    -------
    EliminationBasis
        ``basis`` is ``N x (N - rank(c))`` with ``c @ basis = 0`` and an
        identity block on the free unknowns. A pivot is treated as zero once
        it falls below ``1e-12 * max|c|``.
    """
    c = np.asarray(c, dtype=float)
    if ncols is None:
        if c.ndim != 2:
            raise ValueError("ncols is required for an empty constraint set")
        ncols = c.shape[1]
    c = c.reshape(-1, ncols)
    if not np.all(np.isfinite(c)):
        raise ValueError("constraint matrix has non-finite entries")
    nrows = c.shape[0]
    scale = float(np.max(np.abs(c))) if c.size else 0.0
    if nrows == 0 or scale == 0.0:
        return EliminationBasis(np.eye(ncols), 0, np.zeros(0, dtype=int), np.arange(ncols))

    # LAPACK geqp3: c[:, cols] = Q R with |R_kk| non-increasing
    r, cols = scipy.linalg.qr(c, mode="r", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.count_nonzero(diag >= DEGENERACY_RTOL * scale))

    # pivot unknowns in terms of free ones: r11 x = r12
    reduced = scipy.linalg.solve_triangular(r[:rank, :rank], r[:rank, rank:], lower=False)

    pivots = cols[:rank].copy()
    free = cols[rank:].copy()
    basis = np.zeros((ncols, ncols - rank))
    basis[free, np.arange(ncols - rank)] = 1.0
    basis[pivots, :] = -reduced
    return EliminationBasis(basis, rank, pivots, free)
