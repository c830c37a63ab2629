"""The singularity s* of Psi(s) and the square-root expansion data there.

At ``s*`` the spectra of ``K(s*)`` and ``-D(s*)`` touch at a common
eigenvalue ``gamma`` and ``Psi(s) = Psi(s*) - B sqrt(s - s*) + o(sqrt(s - s*))``.

``s*`` is bracketed by bisection on :func:`~yaglom.riccati.existence_probe`
and then polished by Newton's method on the fold system

    Ric(X, s) = 0,   K(X, s) V + V D(X, s) = 0,   <l, V> = 1,

whose solution gives ``s*``, ``Psi(s*)`` and the kernel direction of the
Sylvester map ``X -> K X + X D``.  ``B`` is that direction scaled so that
``B Q21 B - U`` has no component along the left kernel, which is the
solvability condition for ``B Q21 B = U - Y`` with ``Y`` in the range of
the (singular) Sylvester map.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .generator import a_blocks, q_blocks, t00_abscissa
from .model import FluidModel, require_stable
from .numkit import NumericalError, eigenvalues, sylvester_operator
from .riccati import existence_probe, riccati_residual, solve_psi, u_matrix

__all__ = [
    "CriticalPoint",
    "CriticalPointError",
    "spectral_gap",
    "find_s_star",
    "fold_point",
    "critical_expansion",
    "critical_point",
]

log = logging.getLogger(__name__)


class CriticalPointError(NumericalError):
    """s* could not be located or the expansion at s* is not well defined."""


@dataclass(frozen=True)
class CriticalPoint:
    s_star: float
    gamma: float
    u: np.ndarray
    v: np.ndarray
    psi_star: np.ndarray
    K: np.ndarray
    D: np.ndarray
    B: np.ndarray
    U: np.ndarray
    Y: np.ndarray
    Q11: np.ndarray
    Q12: np.ndarray
    Q21: np.ndarray
    Q22: np.ndarray
    R00: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def hurwitz(self) -> bool:
        """Whether K(s*) is stable (all eigenvalues in the open left half-plane)."""
        return eigenvalues(self.K).abscissa < 0


def _vec(X):
    return X.reshape(-1, order="F")


def _unvec(x, shape):
    return x.reshape(shape, order="F")


def _pair_distances(K, D):
    lk = eigenvalues(K).eigenvalues
    ld = eigenvalues(-D).eigenvalues
    return np.abs(lk[:, None] - ld[None, :])


def spectral_gap(model: FluidModel, s: float) -> float:
    """Smallest distance between sp(K(s)) and sp(-D(s))."""
    sol = solve_psi(model, s)
    if not sol.converged:
        raise NumericalError(f"Psi({s}) does not exist: {sol.reason}")
    return float(_pair_distances(sol.K, sol.D).min())


def _bracket(model):
    """Return ``(lo, hi)`` with Psi existing at ``hi`` and not at ``lo``."""
    hi = -1e-12
    if not existence_probe(model, hi):
        raise CriticalPointError("Psi(s) does not exist just below 0; model unstable?")
    floor = t00_abscissa(model)
    lo = -float(np.abs(np.diag(model.T)).max()) - 1.0
    for _ in range(60):
        if lo <= floor:
            lo = floor + 1e-8 * max(1.0, abs(floor))
            if existence_probe(model, lo):
                raise CriticalPointError(
                    f"no sign change in bracket [{lo}, {hi}]: Psi exists down to the "
                    "T00 abscissa, so s* is not a coalescence point"
                )
            return lo, hi
        if not existence_probe(model, lo):
            return lo, hi
        hi = lo
        lo *= 2.0
    raise CriticalPointError(f"no sign change in bracket [{lo}, {hi}]")


def _fold_newton(model, s0, X0, V0, tol=1e-13, max_iter=50):
    n1, n2 = X0.shape
    m = n1 * n2
    ell = _vec(V0) / np.dot(_vec(V0), _vec(V0))
    z = np.concatenate([_vec(X0), [s0], _vec(V0)])
    for it in range(max_iter):
        X = _unvec(z[:m], (n1, n2))
        s = z[m]
        V = _unvec(z[m + 1 :], (n1, n2))
        qb = q_blocks(model, s)
        ab = a_blocks(model, s, qb.R00)
        K = qb.Q11 + X @ qb.Q21
        D = qb.Q22 + qb.Q21 @ X
        U = ab.A12 + ab.A11 @ X + X @ ab.A22 + X @ ab.A21 @ X
        F = np.concatenate(
            [
                _vec(riccati_residual(qb, X)),
                _vec(K @ V + V @ D),
                [ell @ _vec(V) - 1.0],
            ]
        )
        L = sylvester_operator(K, D)
        J = np.zeros((2 * m + 1, 2 * m + 1))
        J[:m, :m] = L
        J[:m, m] = -_vec(U)
        J[m : 2 * m, :m] = np.kron((qb.Q21 @ V).T, np.eye(n1)) + np.kron(
            np.eye(n2), V @ qb.Q21
        )
        J[m : 2 * m, m] = _vec(-(ab.A11 + X @ ab.A21) @ V - V @ (ab.A22 + ab.A21 @ X))
        J[m : 2 * m, m + 1 :] = L
        J[2 * m, m + 1 :] = ell
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise CriticalPointError("fold system Jacobian is singular") from exc
        z = z + step
        if abs(step[m]) <= tol * max(1.0, abs(z[m])) and np.abs(step).max() <= 1e-10 * (
            1.0 + np.abs(z).max()
        ):
            break
    else:
        raise CriticalPointError(f"fold Newton did not converge in {max_iter} steps")
    X = _unvec(z[:m], (n1, n2))
    V = _unvec(z[m + 1 :], (n1, n2))
    return float(z[m]), X, V, it + 1


def fold_point(model: FluidModel, s_start: float):
    """Polish an approximation ``s_start > s*`` to the exact fold.

    Returns ``(s_star, psi_star, V)`` where ``V`` spans the kernel of the
    Sylvester map at ``s*``.
    """
    sol = solve_psi(model, s_start)
    if not sol.converged:
        raise CriticalPointError(f"Psi({s_start}) does not exist: {sol.reason}")
    L = sylvester_operator(sol.K, sol.D)
    _, _, vt = np.linalg.svd(L)
    V0 = _unvec(vt[-1], sol.psi.shape)
    if V0.sum() < 0:
        V0 = -V0
    s_star, X, V, _ = _fold_newton(model, s_start, sol.psi, V0)
    return s_star, X, V


def find_s_star(model: FluidModel, tol=1e-10) -> float:
    """Locate s*, the abscissa below which Psi(s) ceases to exist."""
    require_stable(model)
    lo, hi = _bracket(model)
    while hi - lo > max(tol, 1e-7 * max(1.0, abs(lo))):
        mid = 0.5 * (lo + hi)
        if existence_probe(model, mid):
            hi = mid
        else:
            lo = mid
    s_star, _, _ = fold_point(model, hi)
    slack = 1e-9 * max(1.0, abs(hi))
    if not (lo - slack <= s_star <= hi + slack):
        raise CriticalPointError(
            f"existence predicate and fold disagree: fold at {s_star!r}, "
            f"probe false at {lo!r} and true at {hi!r}"
        )
    return s_star


def _eigvec(A, target):
    w, vecs = np.linalg.eig(A)
    i = int(np.argmin(np.abs(w - target)))
    x = np.real(vecs[:, i])
    x /= np.linalg.norm(x)
    nz = np.flatnonzero(np.abs(x) > 1e-14)
    if nz.size and x[nz[0]] < 0:
        x = -x
    return x


def _richardson(model, s_star, h):
    """Fit Psi(s*+t) = P - B sqrt(t) + c t through t = h, 4h, 16h."""
    r = np.sqrt(h)
    pts = []
    for k in (1, 2, 4):
        sol = solve_psi(model, s_star + (k * r) ** 2)
        if not sol.converged:
            raise CriticalPointError(f"Psi(s*+{(k * r) ** 2:g}) failed: {sol.reason}")
        pts.append(sol.psi)
    M = np.array([[1.0, -k * r, (k * r) ** 2] for k in (1, 2, 4)])
    coef = np.linalg.solve(M, np.stack([p.ravel() for p in pts]))
    shape = pts[0].shape
    return {
        "psi_star": coef[0].reshape(shape),
        "B": coef[1].reshape(shape),
        "psi_star_2pt": 2 * pts[0] - pts[1],
        "B_2pt": (pts[0] - pts[1]) / r,
    }


def _y_limit(model, s_star, K, D, h):
    from .riccati import phi

    est = []
    for t in (h, 4 * h):
        p = phi(model, solve_psi(model, s_star + t)).phi
        est.append(K @ p + p @ D)
    return 2 * est[0] - est[1]


def critical_expansion(model: FluidModel, s_star: float, h=None) -> CriticalPoint:
    """Expansion data of Psi at ``s_star``: Psi(s*), B, U, Y, gamma, u, v."""
    if h is None:
        h = max(1e-6, 1e-6 * abs(s_star))
    start = s_star + max(1e-7, 1e-7 * abs(s_star))
    s_fold, psi, V = fold_point(model, start)
    if abs(s_fold - s_star) > 1e-6 * max(1.0, abs(s_star)):
        raise CriticalPointError(f"s_star={s_star} is not a fold (nearest fold {s_fold})")
    s_star = s_fold
    qb = q_blocks(model, s_star)
    K = qb.Q11 + psi @ qb.Q21
    D = qb.Q22 + qb.Q21 @ psi
    U = u_matrix(model, psi, s_star, qb.R00)

    dist = _pair_distances(K, D)
    scale = 1.0 + np.abs(K).max() + np.abs(D).max()
    close = int(np.sum(dist <= 1e-6 * scale))
    if close != 1:
        raise CriticalPointError(
            f"non-simple coalescence: {close} eigenvalue pairs of K(s*), -D(s*) coincide"
        )
    L = sylvester_operator(K, D)
    uu, sv, vt = np.linalg.svd(L)
    if sv.size > 1 and sv[-2] <= 1e-6 * sv[0]:
        raise CriticalPointError("non-simple coalescence: kernel dimension > 1")
    W = _unvec(uu[:, -1], psi.shape)
    VQV = V @ qb.Q21 @ V
    beta2 = np.sum(W * U) / np.sum(W * VQV)
    if not beta2 > 0:
        raise CriticalPointError(f"square-root coefficient undefined (beta^2={beta2})")
    B = np.sqrt(beta2) * V
    if B.sum() < 0:
        B = -B
    Y = U - B @ qb.Q21 @ B

    ik, jd = np.unravel_index(np.argmin(dist), dist.shape)
    gamma = float(np.real(eigenvalues(K).eigenvalues[ik]))
    u = _eigvec(K, gamma)
    v = _eigvec(D.T, -gamma)
    rank_one = np.outer(u, v)
    coef = np.sum(rank_one * B) / np.sum(rank_one * rank_one)

    B_norm = np.abs(B).max()
    for attempt in range(3):
        fit = _richardson(model, s_star, h)
        fit_err = float(np.abs(fit["B"] - B).max())
        if fit_err <= 1e-3 * B_norm:
            break
        h /= 16.0
    else:
        raise CriticalPointError(
            f"square-root expansion fit residual {fit_err:.3e} exceeds 1e-3*||B||"
        )

    Y_limit = _y_limit(model, s_star, K, D, h)
    diagnostics = {
        "gap": float(dist.min()),
        "eq2_residual": float(np.abs(K @ B + B @ D).max()),
        "eq1_residual": float(np.abs(B @ qb.Q21 @ B - (U - Y)).max()),
        "riccati_residual": float(np.abs(riccati_residual(qb, psi)).max()),
        "kernel_sigma": float(sv[-1]),
        "kernel_sigma_next": float(sv[-2]) if sv.size > 1 else np.inf,
        "rank_one_residual": float(np.abs(B - coef * rank_one).max()),
        "richardson_h": h,
        "richardson_B": fit["B"],
        "richardson_psi_star": fit["psi_star"],
        "richardson_B_2pt": fit["B_2pt"],
        "richardson_fit_error": fit_err,
        "Y_limit": Y_limit,
        "Y_limit_error": float(np.abs(Y_limit - Y).max()),
    }
    return CriticalPoint(
        s_star=s_star,
        gamma=gamma,
        u=u,
        v=v,
        psi_star=psi,
        K=K,
        D=D,
        B=B,
        U=U,
        Y=Y,
        Q11=qb.Q11,
        Q12=qb.Q12,
        Q21=qb.Q21,
        Q22=qb.Q22,
        R00=qb.R00,
        diagnostics=diagnostics,
    )


def critical_point(model: FluidModel, tol=1e-10, h=None) -> CriticalPoint:
    """``find_s_star`` followed by ``critical_expansion``."""
    return critical_expansion(model, find_s_star(model, tol), h)
