"""thsq: hiddenly unitary non-Hermitian evolution and bilinear control.

Dense finite-dimensional toolkit for the simultaneous three-space
description of a quantum system: metric construction for quasi-Hermitian
operators, time-dependent Dyson maps with their Coriolis terms,
coupled ket/dual-ket propagation certifying norm conservation, the
metric Cauchy problem, and piecewise-constant control optimization.
"""

from importlib.metadata import PackageNotFoundError, version

from . import errors
from .control import (
    BilinearSystem,
    ControlField,
    ControlProblem,
    OptimizerOptions,
    ToyModel,
    assemble,
    build_toy_model,
    evaluate_problem,
    fidelity,
    lie_rank,
    optimize,
)
from .dyson import (
    DysonMap,
    TimeFunction,
    constant,
    constant_map,
    coriolis_at,
    cosine,
    dress_hamiltonian,
    dressed_generator,
    evaluate_map,
    exponential,
    generator_at,
    map_derivative,
    metric_at,
    piecewise_constant,
    polynomial,
    sine,
)
from .evolution import (
    StatePair,
    TimeGrid,
    Trajectory,
    norm_drift,
    propagate_f,
    propagate_metric,
    propagate_p,
    propagate_ths,
    s_inner,
)
from .linalg import (
    EigenSystem,
    eig_general,
    herm_sqrt,
    hermitian_residual,
    mat_exp,
)
from .metric import (
    MetricCandidate,
    dieudonne_residual,
    elementwise_conditions,
    factor_metric,
    solve_metric,
)

try:
    __version__ = version("thsq")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

__all__ = [
    "BilinearSystem",
    "ControlField",
    "ControlProblem",
    "DysonMap",
    "EigenSystem",
    "MetricCandidate",
    "OptimizerOptions",
    "StatePair",
    "TimeFunction",
    "TimeGrid",
    "ToyModel",
    "Trajectory",
    "assemble",
    "build_toy_model",
    "constant",
    "constant_map",
    "coriolis_at",
    "cosine",
    "dieudonne_residual",
    "dress_hamiltonian",
    "dressed_generator",
    "eig_general",
    "elementwise_conditions",
    "errors",
    "evaluate_map",
    "evaluate_problem",
    "exponential",
    "factor_metric",
    "fidelity",
    "generator_at",
    "herm_sqrt",
    "hermitian_residual",
    "lie_rank",
    "map_derivative",
    "mat_exp",
    "metric_at",
    "norm_drift",
    "optimize",
    "piecewise_constant",
    "polynomial",
    "propagate_f",
    "propagate_metric",
    "propagate_p",
    "propagate_ths",
    "s_inner",
    "sine",
    "solve_metric",
]
