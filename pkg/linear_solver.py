"""
Linear Solver - sparse LU for the nonsymmetric Nitsche system
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse import csc_matrix, csr_matrix
from scipy.sparse.linalg import splu

import config

logger = logging.getLogger(__name__)


class SingularSystemError(RuntimeError):
    """
    Factorization failed. pivot_index is the first empty row when the
    singularity is structural, None when it was detected numerically.
    """

    def __init__(self, message: str, pivot_index: Optional[int] = None):
        self.pivot_index = pivot_index
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class SolveReport:
    solution: np.ndarray
    residual: float
    stats: dict = field(default_factory=dict)


def _empty_rows(matrix: csr_matrix) -> np.ndarray:
    pruned = matrix.copy()
    pruned.eliminate_zeros()
    return np.flatnonzero(np.diff(pruned.indptr) == 0)


def _relative_residual(matrix, solution, rhs, rhs_norm) -> float:
    residual_norm = float(np.linalg.norm(matrix @ solution - rhs))
    return residual_norm / rhs_norm if rhs_norm > 0 else residual_norm


def solve_linear_system(system, refinement_steps: int = config.SOLVER_REFINEMENT_STEPS) -> SolveReport:
    """
    Direct solve of system.matrix x = system.rhs with SuperLU (partial pivoting),
    followed by iterative refinement with the same factors.

    Args:
        system: AssembledSystem, or any object with matrix and rhs
        refinement_steps: maximum number of correction solves

    Raises:
        SingularSystemError: empty row or singular factor
    """
    matrix = csr_matrix(system.matrix)
    rhs = np.asarray(system.rhs, dtype=float)
    n, m = matrix.shape
    if n != m or n < 1:
        raise SingularSystemError(f"System must be square with at least one dof, got {matrix.shape}")
    if len(rhs) != n:
        raise SingularSystemError(f"Right-hand side has length {len(rhs)}, expected {n}")

    empty = _empty_rows(matrix)
    if len(empty):
        logger.error(f"Structurally singular system: {len(empty)} empty rows, first {empty[0]}")
        raise SingularSystemError(f"Row {empty[0]} of the system matrix is empty", pivot_index=int(empty[0]))

    start = time.perf_counter()
    try:
        lu = splu(csc_matrix(matrix))
    except RuntimeError as e:
        logger.error(f"Sparse LU failed on {n} dofs: {e}")
        raise SingularSystemError(f"Sparse LU failed: {e}") from e
    solution = lu.solve(rhs)
    if not np.all(np.isfinite(solution)):
        raise SingularSystemError("Sparse LU produced non-finite values")

    rhs_norm = float(np.linalg.norm(rhs))
    residual = _relative_residual(matrix, solution, rhs, rhs_norm)
    initial_residual = residual
    steps = 0
    while steps < refinement_steps and residual > config.SOLVER_RESIDUAL_TARGET:
        candidate = solution + lu.solve(rhs - matrix @ solution)
        candidate_residual = _relative_residual(matrix, candidate, rhs, rhs_norm)
        if not np.all(np.isfinite(candidate)) or candidate_residual >= residual:
            break
        solution, residual = candidate, candidate_residual
        steps += 1
    elapsed = time.perf_counter() - start

    stats = {
        'num_dofs': n,
        'nnz': int(matrix.nnz),
        'nnz_lu': int(lu.L.nnz + lu.U.nnz),
        'factor_time': elapsed,
        'refinement_steps': steps,
        'initial_residual': initial_residual,
    }
    logger.info(f"Solved {n} dofs in {elapsed:.3f}s, fill {stats['nnz_lu']}, residual {residual:.2e}")
    return SolveReport(solution=solution, residual=residual, stats=stats)
