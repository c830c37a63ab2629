"""Minimal nonnegative solution Psi(s) of the fluid Riccati equation.

For real ``s`` the matrix ``Psi(s)`` solves

    Q12 + Q11 X + X Q22 + X Q21 X = 0

and is obtained by Newton's method started from ``X = 0``.  Each Newton
step solves a Sylvester equation whose operator ``X -> K_k X + X D_k`` is
minus a nonsingular M-matrix for as long as the iterates stay below the
minimal solution; losing that property (or blowing up) certifies that
``Psi(s)`` does not exist, which is what :func:`existence_probe` reports.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .generator import AdmissibilityError, GeneratorBlocks, a_blocks, q_blocks
from .model import FluidModel
from .numkit import (
    NumericalError,
    SingularSylvesterError,
    eigenvalues,
    sylvester_solve,
)

__all__ = [
    "RiccatiSolution",
    "PhiMatrix",
    "BelowCriticalError",
    "riccati_residual",
    "solve_psi",
    "u_matrix",
    "phi",
    "existence_probe",
]

log = logging.getLogger(__name__)

_PSI_CAP = 1e8


class BelowCriticalError(NumericalError):
    """Phi(s) requested at (or numerically at) the singularity s*."""


@dataclass(frozen=True)
class RiccatiSolution:
    s: float
    psi: np.ndarray
    K: np.ndarray
    D: np.ndarray
    residual: float
    iterations: int
    converged: bool
    blocks: GeneratorBlocks
    reason: str = ""


@dataclass(frozen=True)
class PhiMatrix:
    s: float
    phi: np.ndarray
    U: np.ndarray


def riccati_residual(blocks: GeneratorBlocks, X) -> np.ndarray:
    return blocks.Q12 + blocks.Q11 @ X + X @ blocks.Q22 + X @ blocks.Q21 @ X


def _inf(A):
    return float(np.abs(A).sum(axis=1).max()) if A.size else 0.0


def _perron(A):
    return eigenvalues(A).abscissa if A.size else -np.inf


def solve_psi(model: FluidModel, s: float, tol=1e-12, max_iter=20000) -> RiccatiSolution:
    """Compute Psi(s) by Newton iteration from zero.

    Non-convergence is reported through ``converged=False`` and ``reason``
    rather than an exception; only an inadmissible ``s`` raises.
    """
    blocks = q_blocks(model, s)
    Q11, Q12, Q21, Q22 = blocks.Q11, blocks.Q12, blocks.Q21, blocks.Q22
    threshold = tol * (1.0 + _inf(blocks.Q))
    X = np.zeros_like(Q12)
    reason = "iteration budget exhausted"
    converged = False
    res = np.inf
    k = 0
    for k in range(max_iter + 1):
        K = Q11 + X @ Q21
        D = Q22 + Q21 @ X
        R = riccati_residual(blocks, X)
        res = float(np.abs(R).max())
        if res <= threshold:
            converged = True
            reason = ""
            break
        if k == max_iter:
            break
        # the Newton operator must stay minus an M-matrix, otherwise the
        # iterates have left the region below a minimal solution
        if _perron(K) + _perron(D) >= 0.0:
            reason = "Newton operator lost stability"
            break
        try:
            step = sylvester_solve(K, D, -R, check=False)
            X_new = X + step
        except SingularSylvesterError:
            X_new = sylvester_solve(Q11, Q22, -Q12 - X @ Q21 @ X, check=False)
        if not np.all(np.isfinite(X_new)) or np.abs(X_new).max() > _PSI_CAP:
            reason = "iterates diverged"
            break
        if np.any(X_new < X - 1e-8 * (1.0 + np.abs(X))):
            reason = "iterates not monotone"
            break
        X = X_new
    K = Q11 + X @ Q21
    D = Q22 + Q21 @ X
    if not converged:
        log.debug("solve_psi(s=%g) failed after %d iterations: %s", s, k, reason)
    return RiccatiSolution(
        s=float(s),
        psi=X,
        K=K,
        D=D,
        residual=res,
        iterations=k,
        converged=converged,
        blocks=blocks,
        reason=reason,
    )


def u_matrix(model: FluidModel, psi, s, R00=None) -> np.ndarray:
    """``A12 + A11 Psi + Psi A22 + Psi A21 Psi``; equals ``-d Ric/ds`` at Psi."""
    A = a_blocks(model, s, R00)
    return A.A12 + A.A11 @ psi + psi @ A.A22 + psi @ A.A21 @ psi


def phi(model: FluidModel, solution: RiccatiSolution) -> PhiMatrix:
    """Derivative ``dPsi/ds`` from ``K Phi + Phi D = U``."""
    if not solution.converged:
        raise NumericalError(f"Psi({solution.s}) did not converge: {solution.reason}")
    U = u_matrix(model, solution.psi, solution.s, solution.blocks.R00)
    try:
        X = sylvester_solve(solution.K, solution.D, U)
    except SingularSylvesterError as exc:
        raise BelowCriticalError(
            f"Phi undefined at s={solution.s}: at or below s* ({exc})"
        ) from exc
    return PhiMatrix(solution.s, X, U)


def existence_probe(model: FluidModel, s: float, max_iter=20000) -> bool:
    """True iff Psi(s) exists (Newton from zero converges with bounded iterates)."""
    try:
        sol = solve_psi(model, s, max_iter=max_iter)
    except (AdmissibilityError, NumericalError, np.linalg.LinAlgError):
        return False
    return sol.converged
