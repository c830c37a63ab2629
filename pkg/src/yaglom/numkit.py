"""Small dense numerical kernels used throughout the pipeline.

Everything here works on real, small (n up to a few dozen) dense matrices:
spectra, Sylvester solves, the matrix exponential together with its
Frechet derivative and finite integral, and an adaptive Gauss-Legendre
rule for matrix-valued integrands.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

__all__ = [
    "NumericalError",
    "SingularSylvesterError",
    "Spectrum",
    "eigenvalues",
    "sylvester_operator",
    "sylvester_solve",
    "expm",
    "expm_frechet",
    "integral_expm",
    "quad",
]

#: Sylvester operator is declared singular below this ratio of extreme
#: singular values.
SINGULAR_RTOL = 1e-9

#: Above this many unknowns the Schur-based solver is used instead of the
#: Kronecker-vectorised dense solve.
KRONECKER_MAX_UNKNOWNS = 900

_EXPM_NORM_LIMIT = 700.0


class NumericalError(RuntimeError):
    """Raised when a numerical kernel cannot deliver a trustworthy result."""


class SingularSylvesterError(NumericalError):
    """The operator X -> AX + XB is (numerically) singular."""

    def __init__(self, message, sigma_min=None, sigma_max=None):
        super().__init__(message)
        self.sigma_min = sigma_min
        self.sigma_max = sigma_max


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    dominant: complex

    def __len__(self):
        return len(self.eigenvalues)

    @property
    def abscissa(self) -> float:
        """Largest real part in the spectrum."""
        return float(np.real(self.dominant))


def _as_square(A, name="A"):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def eigenvalues(A) -> Spectrum:
    """Full spectrum of a real square matrix.

    Eigenvalues are sorted by decreasing real part (ties broken by
    imaginary part), so the dominant one comes first.
    """
    A = _as_square(A)
    if A.shape[0] == 0:
        return Spectrum(np.zeros(0, dtype=complex), complex(-np.inf))
    try:
        ev = scipy.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"eigenvalue iteration did not converge for {A.shape} matrix:\n{A}"
        ) from exc
    ev = ev.astype(complex)
    order = np.lexsort((ev.imag, -ev.real))
    ev = ev[order]
    return Spectrum(ev, complex(ev[0]))


def sylvester_operator(A, B):
    """Matrix of X -> AX + XB acting on column-stacked vec(X)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    m, k = A.shape[0], B.shape[0]
    return np.kron(np.eye(k), A) + np.kron(B.T, np.eye(m))


def _vec(X):
    return np.asarray(X).reshape(-1, order="F")


def _unvec(x, shape):
    return np.asarray(x).reshape(shape, order="F")


def sylvester_solve(A, B, C, *, check=True):
    """Solve ``A X + X B = C``.

    Parameters
    ----------
    A : (m, m) array_like
    B : (k, k) array_like
    C : (m, k) array_like
    check : bool
        Verify the residual bound after solving.

    Returns
    -------
    X : (m, k) ndarray

    Raises
    ------
    SingularSylvesterError
        If the spectra of ``A`` and ``-B`` (numerically) intersect, i.e. the
        smallest singular value of the vectorised operator is at most
        ``SINGULAR_RTOL`` times its largest.
    """
    A = _as_square(A, "A")
    B = _as_square(B, "B")
    C = np.atleast_2d(np.asarray(C, dtype=float))
    m, k = A.shape[0], B.shape[0]
    if C.shape != (m, k):
        raise ValueError(f"C must have shape {(m, k)}, got {C.shape}")
    if m == 0 or k == 0:
        return np.zeros((m, k))

    if m * k <= KRONECKER_MAX_UNKNOWNS:
        Z = sylvester_operator(A, B)
        sv = np.linalg.svd(Z, compute_uv=False)
        if sv[-1] <= SINGULAR_RTOL * sv[0]:
            raise SingularSylvesterError(
                f"singular Sylvester operator (sigma_min={sv[-1]:.3e}, "
                f"sigma_max={sv[0]:.3e})",
                sv[-1],
                sv[0],
            )
        X = _unvec(np.linalg.solve(Z, _vec(C)), (m, k))
    else:
        gap = _spectral_separation(A, B)
        scale = np.linalg.norm(A, 2) + np.linalg.norm(B, 2)
        if gap <= SINGULAR_RTOL * scale:
            raise SingularSylvesterError(
                f"singular Sylvester operator (spectral separation {gap:.3e})"
            )
        X = scipy.linalg.solve_sylvester(A, B, C)

    if check:
        res = np.abs(A @ X + X @ B - C).max()
        bound = 1e-10 * (_inf_norm(A) + _inf_norm(B)) * _inf_norm(X) + 1e-12
        if not res <= bound:
            raise NumericalError(
                f"Sylvester residual {res:.3e} exceeds bound {bound:.3e}"
            )
    return X


def _spectral_separation(A, B):
    la = eigenvalues(A).eigenvalues
    lb = -eigenvalues(B).eigenvalues
    return float(np.abs(la[:, None] - lb[None, :]).min())


def _inf_norm(A):
    A = np.atleast_2d(A)
    if A.size == 0:
        return 0.0
    return float(np.abs(A).sum(axis=1).max())


def expm(A, t=1.0):
    """Matrix exponential ``exp(A t)`` by scaling and squaring."""
    A = _as_square(A)
    t = float(t)
    if t < 0:
        raise ValueError("t must be nonnegative")
    n = A.shape[0]
    if t == 0.0 or n == 0:
        return np.eye(n)
    At = A * t
    nrm = _inf_norm(At)
    # exp of a matrix this large overflows double precision in general
    if nrm > _EXPM_NORM_LIMIT and eigenvalues(At).abscissa > _EXPM_NORM_LIMIT:
        raise NumericalError(
            f"matrix exponential overflow: ||A t||_inf = {nrm:.3e}, t = {t}"
        )
    out = scipy.linalg.expm(At)
    if not np.all(np.isfinite(out)):
        raise NumericalError(f"matrix exponential overflow: ||A t||_inf = {nrm:.3e}")
    return out


def expm_frechet(A, E, t=1.0):
    """Frechet derivative of ``exp(A t)`` in direction ``E``.

    Returns ``L = sum_{n>=1} t^n/n! sum_{i=0}^{n-1} A^i E A^(n-1-i)``,
    read off as the upper-right block of ``exp([[A, E], [0, A]] t)``.
    """
    A = _as_square(A)
    E = np.atleast_2d(np.asarray(E, dtype=float))
    n = A.shape[0]
    if E.shape != (n, n):
        raise ValueError(f"E must have shape {(n, n)}, got {E.shape}")
    M = np.zeros((2 * n, 2 * n))
    M[:n, :n] = A
    M[:n, n:] = E
    M[n:, n:] = A
    return expm(M, t)[:n, n:]


def integral_expm(A, x):
    """``int_0^x exp(A w) dw`` via the exponential of ``[[A, I], [0, 0]]``."""
    A = _as_square(A)
    x = float(x)
    if x < 0:
        raise ValueError("x must be nonnegative")
    n = A.shape[0]
    M = np.zeros((2 * n, 2 * n))
    M[:n, :n] = A
    M[:n, n:] = np.eye(n)
    return expm(M, x)[:n, n:]


_GL_ORDER = 15
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(_GL_ORDER)


def _gl_panel(f, a, b):
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    acc = None
    for node, weight in zip(_GL_NODES, _GL_WEIGHTS):
        val = np.asarray(f(mid + half * node), dtype=float) * weight
        acc = val if acc is None else acc + val
    return acc * half


def quad(f: Callable[[float], np.ndarray], a, b, tol=1e-10, max_intervals=2**20):
    """Adaptive composite Gauss-Legendre integral of a matrix-valued function.

    Each panel is estimated with a 15-point rule and compared against the
    sum of its two halves; a panel is accepted once the entrywise
    difference is within its share of ``tol``.

    Raises
    ------
    NumericalError
        If more than ``max_intervals`` panels would be needed.
    """
    a, b = float(a), float(b)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if a == b:
        return np.zeros_like(np.asarray(f(a), dtype=float))
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    length = b - a

    total = None
    n_panels = 1
    stack = [(a, b, _gl_panel(f, a, b))]
    while stack:
        lo, hi, whole = stack.pop()
        mid = 0.5 * (lo + hi)
        left = _gl_panel(f, lo, mid)
        right = _gl_panel(f, mid, hi)
        refined = left + right
        err = np.max(np.abs(refined - whole)) if refined.size else 0.0
        if err <= tol * (hi - lo) / length or (hi - lo) <= 1e-14 * length:
            total = refined if total is None else total + refined
            continue
        n_panels += 1
        if n_panels > max_intervals:
            raise NumericalError(
                f"quad: exceeded {max_intervals} subintervals on [{a}, {b}]"
            )
        stack.append((mid, hi, right))
        stack.append((lo, mid, left))
    return sign * total
