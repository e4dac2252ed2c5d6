"""Memory-efficient stochastic proximal gradient descent for nuclear-norm regularized problems."""

from .factored import (
    FactoredMatrix,
    LowRankGradient,
    frobenius_norm,
    from_dense,
    multiply_right,
    nuclear_norm,
    to_dense,
    zeros,
)
from .incsvd import incremental_update, orthogonal_complement_basis
from .probing import Distribution, ProbingMatrix, check_isotropy, generate
from .problems import FactoredLeastSquares, MultivariateRegression, sketch_subgradient
from .prox import DomainSpec, KktReport, kkt_dual_check, project_frobenius, prox_nuclear, svs
from .solver import (
    NumericalAbort,
    RankBudgetExceeded,
    SolveResult,
    SolverConfig,
    StepSchedule,
    TraceRecord,
    dense_baseline_solve,
    spgd_solve,
    step_size,
)

__version__ = "0.1.0"
