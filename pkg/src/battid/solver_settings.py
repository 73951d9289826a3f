"""Solver configuration, split out so config and solver can both import it."""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class SolverSettings:
    """Iteration limits, tolerances, and penalty policy for the solver."""

    max_iters: int = 2000
    abs_tol: float = 1e-9
    rel_tol: float = 1e-7
    rho: float = 1.0
    # residual balancing: multiply/divide rho by rho_factor when primal and
    # dual residuals drift apart by more than rho_ratio
    rho_factor: float = 2.0
    rho_ratio: float = 10.0
    adapt_every: int = 10
    # read the final (a~, gamma) from the leading singular pair of P instead
    # of the direct variables
    rank_one_extract: bool = False
    # force the bilinear block M to zero (diagnostic linear-only fit)
    zero_bilinear: bool = False
    # resolve exactly flat directions of the data matrix by minimizing the
    # regularizers within that subspace after the main iteration
    null_polish: bool = True
    null_tol: float = 1e-10
    # print line-oriented iteration records (iteration, objective, residuals)
    verbose: bool = False

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
