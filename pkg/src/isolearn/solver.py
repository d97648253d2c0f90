"""Fidelity maximization over partial isometries.

Maximize ``F(u) = vec(u)^T S vec(u)`` subject to ``u u^T = I_D``. Every
iteration carries a triple ``(u, lambda, C)``:

1. restrict the variation to the null space ``M`` of the linear constraints
   ``C`` and solve the generalized eigenproblem
   ``M^T (S - lambda (x) I) M V = mu M^T (Q (x) I) M V``;
2. pick one eigenstate (by rank of ``mu``), rescale it to ``|u|_F^2 = D``;
3. map it onto the nearest isometry with ``G^{-1/2} u`` (``G = u u^T``);
4. recompute ``lambda`` and ``C`` from the adjusted ``u``.

At a fixed point the selected ``mu`` vanishes, ``lambda`` stops changing
and ``S u = lambda u`` holds with ``F = Tr lambda``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .linalg import (
    DEGENERACY_RTOL,
    DegenerateMatrixError,
    EliminationBasis,
    eliminate_constraints,
    gen_eig,
    inv_sqrt_psd,
    symmetrize,
)
from .model import (
    ConstraintSet,
    FidelityTensor,
    IterationRecord,
    PartialIsometry,
    RunResult,
    SolverConfig,
    SolverReport,
)

__all__ = [
    "RankCollapseError",
    "IterationState",
    "gram_of_rows",
    "adjust_to_isometry",
    "unitarity_penalty",
    "lagrange_multipliers",
    "lagrange_multipliers_subspace",
    "build_linear_constraints",
    "reduce_problem",
    "initial_state",
    "iterate",
    "run",
    "solve",
    "solve_vanilla",
    "residual",
]

log = logging.getLogger(__name__)

# negative-mu candidates examined when scanning eigenstates
N_NEGATIVE_CANDIDATES = 10
# eigenvalues this close (relative) to the selected one are treated as one cluster
CLUSTER_RTOL = 1e-10


class RankCollapseError(DegenerateMatrixError):
    """The selected eigenstate has a degenerate row Gram matrix."""

    def __init__(self, message, eigenvalue=None, iteration=None):
        super().__init__(message, eigenvalue)
        self.iteration = iteration


@dataclass(frozen=True)
class IterationState:
    u: PartialIsometry
    lagrange: np.ndarray
    constraints: ConstraintSet
    iteration: int = 0
    mu: float = float("nan")
    fidelity: float = float("nan")
    penalty: float = float("nan")
    lambda_change: float = float("inf")

    def record(self) -> IterationRecord:
        return IterationRecord(self.iteration - 1, self.mu, self.fidelity, self.penalty, self.lambda_change)


def _matrix(u):
    return np.asarray(u.u if isinstance(u, PartialIsometry) else u, dtype=float)


def gram_of_rows(u):
    """``G_jj' = sum_k u_jk u_j'k``."""
    u = _matrix(u)
    return symmetrize(u @ u.T)


def adjust_to_isometry(u) -> PartialIsometry:
    """Nearest partial isometry ``G^{-1/2} u`` with positive square-root branches."""
    u = _matrix(u)
    try:
        root = inv_sqrt_psd(gram_of_rows(u))
    except DegenerateMatrixError as exc:
        raise RankCollapseError(f"cannot adjust to an isometry: {exc}", exc.eigenvalue) from exc
    return PartialIsometry(root @ u)


def unitarity_penalty(u) -> float:
    """``Tr G^{-1} = sum 1/lambda_G``; at least ``D`` for ``|u|_F^2 = D``, equal iff feasible."""
    w = np.linalg.eigvalsh(gram_of_rows(u))
    top = float(np.max(np.abs(w)))
    if top == 0.0 or w[0] <= DEGENERACY_RTOL * top:
        raise RankCollapseError(
            f"row Gram matrix is degenerate: smallest eigenvalue {w[0]:.3e}", float(w[0])
        )
    return float(np.sum(1.0 / w))


def _gradient(u, s: FidelityTensor):
    u = _matrix(u)
    return (s.s @ u.reshape(-1)).reshape(u.shape)


def lagrange_multipliers(u, s: FidelityTensor):
    """Symmetric ``lambda`` minimizing ``|S u - lambda u|^2`` for feasible ``u``.

    For orthonormal rows the minimizer is ``Herm(u b^T)`` with ``b = S u``.
    """
    u = _matrix(u)
    return symmetrize(u @ _gradient(u, s).T)


def _symmetric_basis(D):
    basis = []
    for i in range(D):
        for j in range(i, D):
            e = np.zeros((D, D))
            e[i, j] = e[j, i] = 1.0
            basis.append(e)
    return basis


def lagrange_multipliers_subspace(u, s: FidelityTensor, probes):
    """``lambda`` minimizing the stationarity residual projected on ``probes``.

    Minimizes ``sum_s <v_s, S u - lambda u>^2`` over symmetric ``lambda``.
    With a complete orthonormal set of probes this equals
    :func:`lagrange_multipliers`.

    Raises
    ------
    DegenerateMatrixError
        With fewer than ``D(D+1)/2`` probes or rank-deficient normal equations.
    """
    u = _matrix(u)
    D = u.shape[0]
    probes = np.asarray(probes, dtype=float).reshape(-1, u.size)
    n_params = D * (D + 1) // 2
    if probes.shape[0] < n_params:
        raise DegenerateMatrixError(
            f"need at least {n_params} probe states for D={D}, got {probes.shape[0]}"
        )
    basis = _symmetric_basis(D)
    design = np.column_stack([probes @ (e @ u).reshape(-1) for e in basis])
    target = probes @ _gradient(u, s).reshape(-1)
    theta, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < n_params:
        raise DegenerateMatrixError(
            f"projected normal equations are degenerate (rank {rank} < {n_params})"
        )
    return symmetrize(sum(t * e for t, e in zip(theta, basis)))


def build_linear_constraints(u) -> ConstraintSet:
    """Rows keeping ``u + du`` partially unitary to first order in ``du``.

    Off-diagonal rows (``i > j``) make ``G^{u|du}_ij + G^{u|du}_ji`` vanish;
    diagonal rows (``i >= 1``) make ``G^{u|du}_ii - G^{u|du}_{i-1,i-1}``
    vanish, with ``G^{u|v}_ij = sum_k u_ik v_jk``. There are
    ``(D-1)(D+2)/2`` rows in total.
    """
    u = _matrix(u)
    D, n = u.shape
    rows = []
    for i in range(D):
        for j in range(i):
            row = np.zeros((D, n))
            row[j] += u[i]
            row[i] += u[j]
            rows.append(row.reshape(-1))
    for i in range(1, D):
        row = np.zeros((D, n))
        row[i] = u[i]
        row[i - 1] = -u[i - 1]
        rows.append(row.reshape(-1))
    if not rows:
        return ConstraintSet.empty(D, n)
    return ConstraintSet(D, n, np.array(rows))


def reduce_problem(s: FidelityTensor, lagrange, q, m):
    """Numerator ``M^T (S - lambda (x) I) M`` and denominator ``M^T (Q (x) I) M``.

    ``m`` is an :class:`~isolearn.linalg.EliminationBasis` or a plain matrix.
    """
    basis = m.basis if isinstance(m, EliminationBasis) else np.asarray(m, dtype=float)
    eye_n = np.eye(s.n)
    numer = s.s - np.kron(np.asarray(lagrange, dtype=float), eye_n)
    denom = np.kron(np.asarray(q, dtype=float), eye_n)
    if basis.shape[1] == basis.shape[0] and np.array_equal(basis, np.eye(basis.shape[0])):
        a, b = numer, denom
    else:
        a = basis.T @ numer @ basis
        b = basis.T @ denom @ basis
    return symmetrize(a), symmetrize(b)


def residual(u, lagrange, mu, q, s: FidelityTensor) -> float:
    """``max |S u - (lambda + mu Q) u|`` over all ``D n`` entries."""
    u = _matrix(u)
    lam = np.asarray(lagrange, dtype=float) + mu * np.asarray(q, dtype=float)
    return float(np.max(np.abs(_gradient(u, s) - lam @ u)))


def initial_state(D, n) -> IterationState:
    """``lambda = 0``, no constraints; ``u = [I_D | 0]`` only breaks exact ties."""
    u0 = np.zeros((D, n))
    u0[np.arange(D), np.arange(D)] = 1.0
    return IterationState(PartialIsometry(u0), np.zeros((D, D)), ConstraintSet.empty(D, n))


def _metric_matrix(state: IterationState, config: SolverConfig):
    D = state.lagrange.shape[0]
    if config.q_choice == "lambda" and state.iteration > 0:
        w = np.linalg.eigvalsh(state.lagrange)
        if w[0] > DEGENERACY_RTOL * np.max(np.abs(w)):
            return state.lagrange
        log.debug("lambda is not positive definite at iteration %d; using Q = I", state.iteration)
    return np.eye(D)


def _orient(v):
    k = int(np.argmax(np.abs(v)))
    return -v if v[k] < 0 else v


def _cluster_pick(eig, b, index, reference):
    """Resolve an exactly degenerate eigenvalue by projecting the current
    iterate onto its eigenspace; otherwise return the plain eigenvector."""
    mu = eig.values
    scale = max(1.0, float(np.max(np.abs(mu))))
    cluster = np.flatnonzero(np.abs(mu - mu[index]) <= CLUSTER_RTOL * scale)
    v = eig.vectors[:, index]
    if cluster.size > 1:
        vecs = eig.vectors[:, cluster]
        proj = vecs @ (vecs.T @ (b @ reference))
        if np.linalg.norm(proj) > 1e-8 * np.linalg.norm(reference):
            v = proj
    return _orient(v)


def _candidate(v, basis: EliminationBasis, D, n):
    u = (basis.basis @ v).reshape(D, n)
    norm2 = float(np.sum(u * u))
    if norm2 == 0.0:
        raise RankCollapseError("selected eigenstate is zero")
    return u * np.sqrt(D / norm2)


def iterate(state: IterationState, s: FidelityTensor, config: SolverConfig, rank=None,
            use_constraints=True) -> IterationState:
    """One step of the constrained eigenproblem iteration.

    Parameters
    ----------
    rank : int, optional
        Eigenstate rank to select by descending ``mu``; defaults to
        ``config.eigenstate_rank``. Ignored when ``config.scan_candidates``.
    use_constraints : bool
        When false the new state carries no linear constraints, so the next
        iteration varies over the full ``D n`` space.
    """
    D, n = s.D, s.n
    rank = config.eigenstate_rank if rank is None else rank
    basis = eliminate_constraints(state.constraints.c, D * n)
    q = _metric_matrix(state, config)
    a, b = reduce_problem(s, state.lagrange, q, basis)
    # with Q = I the metric M^T M >= I because M holds an identity block
    metric_is_identity = np.array_equal(q, np.eye(D))
    eig = gen_eig(a, b, check=not metric_is_identity)

    where = f"iteration {state.iteration}"
    if config.scan_candidates:
        positive = np.flatnonzero(eig.values > 0)
        negative = np.flatnonzero(eig.values <= 0)[:N_NEGATIVE_CANDIDATES]
        best = None
        for idx in np.concatenate([positive, negative]):
            try:
                cand = _candidate(_orient(eig.vectors[:, idx]), basis, D, n)
                f = _fidelity(adjust_to_isometry(cand), s)
            except RankCollapseError:
                continue
            if best is None or f > best[0]:
                best = (f, int(idx))
        if best is None:
            raise RankCollapseError(f"no admissible eigenstate at {where}", iteration=state.iteration)
        index = best[1]
    else:
        if rank >= eig.values.size:
            raise ValueError(f"eigenstate rank {rank} exceeds problem size {eig.values.size}")
        index = rank

    reference = state.u.flat()[basis.free]
    v = _cluster_pick(eig, b, index, reference)
    u_raw = _candidate(v, basis, D, n)
    try:
        penalty = unitarity_penalty(u_raw)
        u_new = adjust_to_isometry(u_raw)
    except RankCollapseError as exc:
        raise RankCollapseError(f"rank collapse at {where}: {exc}", exc.eigenvalue, state.iteration) from exc

    lam = lagrange_multipliers(u_new, s)
    change = float(np.max(np.abs(lam - state.lagrange)))
    constraints = build_linear_constraints(u_new) if use_constraints else ConstraintSet.empty(D, n)
    return IterationState(
        u=u_new,
        lagrange=lam,
        constraints=constraints,
        iteration=state.iteration + 1,
        mu=float(eig.values[index]),
        fidelity=_fidelity(u_new, s),
        penalty=penalty,
        lambda_change=change,
    )


def _fidelity(u, s):
    v = _matrix(u).reshape(-1)
    return float(v @ s.s @ v)


def _converged(st: IterationState, D, config: SolverConfig):
    scale = max(1.0, abs(st.fidelity))
    lam_scale = max(1.0, float(np.max(np.abs(st.lagrange))))
    return (
        abs(st.mu) <= config.mu_tolerance * scale
        and abs(st.penalty - D) <= config.unitarity_tolerance
        and st.lambda_change <= config.lambda_tolerance * lam_scale
    )


def _cycling(history, window):
    """True when (F, penalty) repeat with period 2 or 3 over the last
    ``window`` iterations while still changing between neighbours."""
    if len(history) < window:
        return False
    tail = history[-window:]
    f = np.array([h.fidelity for h in tail])
    p = np.array([h.penalty for h in tail])
    tol_f = 1e-9 * max(1.0, float(np.max(np.abs(f))))
    moving = np.any(np.abs(np.diff(f)) > tol_f) or np.any(np.abs(np.diff(p)) > 1e-9)
    if not moving:
        return False
    for period in (2, 3):
        if period >= window:
            continue
        if np.all(np.abs(f[period:] - f[:-period]) <= tol_f) and np.all(
            np.abs(p[period:] - p[:-period]) <= 1e-9
        ):
            return True
    return False


def run(s: FidelityTensor, config: SolverConfig, rank=None, use_constraints=True,
        constraints_off_after=None, stop_on_convergence=True, callback=None) -> RunResult:
    """Iterate from the initial state until convergence, cycling or the
    iteration limit, always selecting the eigenstate of the given rank.

    ``constraints_off_after`` drops the linear constraints once that many
    iterations have been performed. With ``stop_on_convergence=False`` the
    loop always runs ``config.max_iterations`` steps and ``converged``
    reflects the final iterate only. ``callback`` receives each
    :class:`~isolearn.model.IterationRecord`.
    """
    rank = config.eigenstate_rank if rank is None else rank
    if rank >= 5:
        log.warning("eigenstate rank %d selected; convergence is often not observed beyond rank 4", rank)
    D = s.D
    state = initial_state(D, s.n)
    history = []
    status = "max_iterations"
    for it in range(config.max_iterations):
        constrained = use_constraints and (constraints_off_after is None or it + 1 < constraints_off_after)
        state = iterate(state, s, config, rank=rank, use_constraints=constrained)
        rec = state.record()
        history.append(rec)
        if callback is not None:
            callback(rec)
        log.debug("rank %d iter %d mu=%.6e F=%.12g penalty=%.15g", rank, *rec[:4])
        if not stop_on_convergence:
            continue
        if _converged(state, D, config):
            status = "converged"
            break
        if _cycling(history, config.cycle_window):
            status = "cycling"
            break
    converged = _converged(state, D, config)
    if not stop_on_convergence:
        status = "converged" if converged else "not_converged"
    return RunResult(
        rank=rank,
        solution=state.u,
        fidelity=state.fidelity,
        converged=converged,
        lagrange=state.lagrange,
        history=history,
        status=status,
    )


def _report(runs, config):
    done = [r for r in runs if r.converged]
    if done:
        best = max(done, key=lambda r: r.fidelity)
    else:
        def badness(r):
            last = r.history[-1]
            return abs(last.mu) / max(1.0, abs(last.fidelity))

        best = min((r for r in runs if r.history), key=badness)
    return SolverReport(
        solution=best.solution,
        fidelity=best.fidelity,
        converged=best.converged,
        iterations=list(best.history),
        lambda_final=best.lagrange,
        seed=config.seed,
        rank=best.rank,
        runs=runs,
    )


def _solve(s, config, use_constraints):
    runs = []
    errors = []
    for rank in config.ranks:
        try:
            runs.append(run(s, config, rank=rank, use_constraints=use_constraints))
        except (DegenerateMatrixError, ValueError) as exc:
            log.info("run at rank %d failed: %s", rank, exc)
            errors.append(exc)
    if not runs:
        raise errors[0]
    return _report(runs, config)


def solve(s: FidelityTensor, config: SolverConfig = SolverConfig()) -> SolverReport:
    """Run the constrained iteration once per eigenstate rank in
    ``config.ranks`` and return the converged run of largest fidelity.

    If no run converges the report has ``converged=False`` and carries the
    run whose final ``|mu| / F`` is smallest.
    """
    return _solve(s, config, use_constraints=True)


def solve_vanilla(s: FidelityTensor, config: SolverConfig = SolverConfig()) -> SolverReport:
    """Same loop without linear constraints (full ``D n`` eigenproblem each step).

    Kept as a baseline: it generally cycles instead of converging for D > 1.
    """
    return _solve(s, config, use_constraints=False)


def with_rank(config: SolverConfig, rank: int) -> SolverConfig:
    return replace(config, eigenstate_rank=rank, num_runs=1)
