"""Sparse direct solves of the complex symmetric FEM system.

SuperLU (through scipy) with a minimum-degree ordering on A^T + A does the
factorization; each solve is followed by iterative refinement and the
relative residual is checked rather than assumed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10


class SingularMatrixError(ArithmeticError):
    """Numerically singular matrix (zero pivot during factorization)."""


class StructurallySingularError(SingularMatrixError):
    """Sparsity pattern admits no nonzero transversal."""


class RefinementError(ArithmeticError):
    def __init__(self, residual: float):
        super().__init__(f"relative residual {residual:.3e} exceeds {RESIDUAL_TOL:.0e} after refinement")
        self.residual = residual


@dataclass(frozen=True, eq=False)
class Factorization:
    A: sp.csc_matrix
    lu: spla.SuperLU | None
    perm_r: np.ndarray
    perm_c: np.ndarray
    min_pivot: float
    max_pivot: float

    @property
    def n(self) -> int:
        return self.A.shape[0]


def factor(A: sp.spmatrix) -> Factorization:
    A = sp.csc_matrix(A, dtype=complex)
    n, m = A.shape
    if n != m:
        raise ValueError(f"matrix must be square, got {A.shape}")
    if n == 0:
        return Factorization(A, None, np.zeros(0, int), np.zeros(0, int), np.inf, 0.0)
    pattern = A.copy()
    pattern.data = np.ones_like(pattern.data, dtype=float)
    pattern.eliminate_zeros()
    rank = csgraph.structural_rank(pattern)
    if rank < n:
        raise StructurallySingularError(f"structural rank {rank} < {n}")
    try:
        lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", options={"SymmetricMode": True})
    except RuntimeError as exc:
        # SuperLU reports "Factor is exactly singular" without the index
        raise SingularMatrixError(str(exc)) from exc
    d = np.abs(lu.U.diagonal())
    if d.min() == 0.0:
        raise SingularMatrixError(f"zero pivot at permuted equation {int(np.argmin(d))}")
    return Factorization(A, lu, lu.perm_r, lu.perm_c, float(d.min()), float(d.max()))


def relative_residual(A: sp.spmatrix, x: np.ndarray, b: np.ndarray) -> float:
    nb = np.linalg.norm(b)
    r = np.linalg.norm(A @ x - b)
    return float(r / nb) if nb > 0 else float(r)


def solve(fact: Factorization, rhs: np.ndarray, max_steps: int = 2) -> np.ndarray:
    """Solve with up to ``max_steps`` rounds of iterative refinement."""
    b = np.asarray(rhs, dtype=complex)
    if b.shape[0] != fact.n:
        raise ValueError(f"rhs has length {b.shape[0]}, matrix has {fact.n} rows")
    if fact.n == 0 or not np.any(b):
        return np.zeros_like(b)
    x = fact.lu.solve(b)
    res = relative_residual(fact.A, x, b)
    for step in range(max_steps):
        if step >= 1 and res <= RESIDUAL_TOL:
            break
        x = x + fact.lu.solve(b - fact.A @ x)
        res = relative_residual(fact.A, x, b)
    log.debug("solve: n=%d relative residual %.2e", fact.n, res)
    if not res <= RESIDUAL_TOL:
        raise RefinementError(res)
    return x


def solve_system(A: sp.spmatrix, rhs: np.ndarray) -> np.ndarray:
    return solve(factor(A), rhs)
