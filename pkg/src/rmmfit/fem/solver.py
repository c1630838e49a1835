"""Sparse symmetric positive-definite factorization and constrained solves."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import AssembledSystem
from .constraints import Reduction

RTOL = 1e-10
ATOL = 1e-12


class SolverError(RuntimeError):
    """Factorization or residual failure; ``pivot`` is the offending row if known."""

    def __init__(self, message: str, pivot: int | None = None):
        super().__init__(message)
        self.pivot = pivot


class SPDFactor:
    """Sparse LU with symmetric pivoting used as an LDL^T with a definiteness check.

    With diagonal pivoting and a symmetric fill-reducing order, SuperLU
    computes ``A = P^T L U P``; ``A`` is positive definite iff no row
    interchange was needed and every pivot ``U_kk`` is positive.
    """

    def __init__(self, A):
        A = sp.csc_matrix(A)
        if A.shape[0] != A.shape[1]:
            raise SolverError(f"matrix is not square: {A.shape}")
        self.A = A
        self.n = A.shape[0]
        diag = A.diagonal()
        bad = np.flatnonzero(~(diag > 0))
        if len(bad):
            raise SolverError(f"non-positive diagonal entry at index {bad[0]}", int(bad[0]))
        try:
            self._lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                                 options=dict(SymmetricMode=True))
        except RuntimeError as exc:
            raise SolverError(f"factorization failed: {exc}") from exc
        lu = self._lu
        if not np.array_equal(lu.perm_r, lu.perm_c):
            k = int(np.flatnonzero(lu.perm_r != lu.perm_c)[0])
            raise SolverError(f"symmetric pivoting broke down at index {k}", k)
        pivots = lu.U.diagonal()
        # perm_c[j] is the position of original column j
        bad = np.flatnonzero(~(pivots > 0))
        if len(bad):
            orig = int(np.flatnonzero(lu.perm_c == bad[0])[0])
            raise SolverError(f"matrix is not positive definite: pivot {pivots[bad[0]]:.3e} "
                              f"at index {orig}", orig)

    def solve(self, b: np.ndarray, check: bool = True) -> np.ndarray:
        x = self._lu.solve(np.asarray(b, dtype=float))
        if check:
            res = np.linalg.norm(self.A @ x - b)
            nb = np.linalg.norm(b)
            if (nb > 0 and res > RTOL * nb) or (nb == 0 and res > ATOL):
                raise SolverError(f"residual {res:.3e} exceeds tolerance (|f| = {nb:.3e})")
        return x


class ConstrainedSolver:
    """Factor ``T^T K T`` once and solve for any lift with the same constraint pattern."""

    def __init__(self, system: AssembledSystem):
        self.reduction = Reduction.from_system(system)
        self.K = system.stiffness()
        T = self.reduction.T
        self.factor = SPDFactor((T.T @ self.K @ T).tocsc())

    def matches(self, system: AssembledSystem) -> bool:
        return Reduction.signature_of(system) == self.reduction.signature

    def solve(self, system: AssembledSystem) -> np.ndarray:
        if not self.matches(system):
            raise SolverError("constraint pattern differs from the factored one")
        red = self.reduction
        g = red.lift(system)
        rhs = red.T.T @ (system.f - self.K @ g)
        r = self.factor.solve(rhs)
        return red.T @ r + g


def solve_spd(system: AssembledSystem) -> np.ndarray:
    """Full DOF vector minimizing ``1/2 d^T K d - f^T d`` under the constraints."""
    return ConstrainedSolver(system).solve(system)
