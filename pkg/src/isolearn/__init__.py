"""Learning partially unitary operators by fidelity maximization."""
from .linalg import DegenerateMatrixError
from .model import (
    ConstraintSet,
    FidelityTensor,
    IterationRecord,
    ObservationSample,
    PartialIsometry,
    RunResult,
    SolverConfig,
    SolverReport,
)
from .solver import RankCollapseError, run, solve, solve_vanilla
from .tensor import (
    InformationIncompleteError,
    build_tensor_localized,
    build_tensor_pairs,
    build_tensor_timeseries,
    build_tensor_vqa,
    fidelity,
    regularize,
    unregularize,
)

__version__ = "0.1.0"

__all__ = [
    "ConstraintSet",
    "DegenerateMatrixError",
    "FidelityTensor",
    "InformationIncompleteError",
    "IterationRecord",
    "ObservationSample",
    "PartialIsometry",
    "RankCollapseError",
    "RunResult",
    "SolverConfig",
    "SolverReport",
    "build_tensor_localized",
    "build_tensor_pairs",
    "build_tensor_timeseries",
    "build_tensor_vqa",
    "fidelity",
    "regularize",
    "run",
    "solve",
    "solve_vanilla",
    "unregularize",
]
