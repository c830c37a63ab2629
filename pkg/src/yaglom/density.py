"""Yaglom limit densities mu(dy)^(0), mu(dy)^(x) and the busy-period tail.

All the densities here are ratios.  The numerator is the coefficient of
``-sqrt(s - s*)`` in the expansion of the occupation-measure transform
``E(dy)^(x)(s)`` at ``s*``.  The denominator is the total mass of that
coefficient over levels and target phases.  The building blocks are
Frechet derivatives of matrix exponentials:

* ``H(y)``: derivative of ``exp(K y)`` in direction ``B Q21``;
* ``W(w)``: derivative of ``exp(D w)`` in direction ``Q21 B``;
* ``Z_x(y)``: derivative of the ``E21`` density, combining both.

Every aggregate over ``y in [0, inf)`` has a closed form because
``K(s*)`` is Hurwitz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .critical import CriticalPoint
from .model import FluidModel
from .numkit import (
    NumericalError,
    eigenvalues,
    expm,
    expm_frechet,
    integral_expm,
    quad,
    sylvester_operator,
)

__all__ = [
    "YaglomError",
    "ExpansionKernels",
    "DensityGrid",
    "TailAsymptote",
    "kernels",
    "default_y_max",
    "make_y_grid",
    "mu0_density",
    "mux_density",
    "density_grid",
    "density_function",
    "psi_tail",
]

_TRUNCATION = 1e-12


class YaglomError(NumericalError):
    """The Yaglom limit cannot be evaluated for this model or start."""


@dataclass(frozen=True)
class ExpansionKernels:
    """Building blocks of the Yaglom densities at ``s*`` for start level ``x``.

    Attributes
    ----------
    x : float
        Initial level.
    H_y, W_w, E21_y, Z_xy : callable
        ``y -> H(s*, y)``, ``w -> W(s*, w)``, ``y -> E(dy)^(x)(s*)_21 / dy``
        and ``y -> Z_x(s*, y)``.
    H_bar, W_x, E21_bar, E22_bar, Z_bar : ndarray
        Integrals of the above over their natural domains.
    H_tilde : ndarray
        Row masses of the ``x = 0`` numerators, one per phase in S1.
    Z_tilde, ZZ_tilde : ndarray or None
        Row masses of the ``x > 0`` numerators for starts in S2 and S1.
    """

    x: float
    H_y: Callable[[float], np.ndarray]
    H_bar: np.ndarray
    H_tilde: np.ndarray
    W_w: Callable[[float], np.ndarray]
    W_x: np.ndarray
    E21_y: Callable[[float], np.ndarray]
    E21_bar: np.ndarray
    E22_bar: np.ndarray
    Z_xy: Callable[[float], np.ndarray]
    Z_bar: np.ndarray
    Z_tilde: np.ndarray
    ZZ_tilde: np.ndarray


@dataclass(frozen=True)
class DensityGrid:
    """Tabulated Yaglom density.

    ``values[k, i, j]`` is ``mu(dy)/dy`` at ``y[k]`` for start phase
    ``from_phases[i]`` and target phase ``j``.  Phases use original input
    indices (0-based).  ``side[k]`` is ``"l"``/``"r"`` for the one-sided
    limits at ``y = x`` and ``"-"`` elsewhere.
    """

    x: float
    from_phases: tuple
    y: np.ndarray
    side: tuple
    values: np.ndarray
    normalization: np.ndarray

    def row(self, from_phase: int) -> np.ndarray:
        """Density array ``(len(y), n)`` for one original start phase."""
        return self.values[:, self.from_phases.index(from_phase), :]

    def level_density(self, from_phase: int) -> np.ndarray:
        """Marginal density of the level (summed over target phases)."""
        return self.row(from_phase).sum(axis=1)


@dataclass(frozen=True)
class TailAsymptote:
    """``psi(t) ~ coefficient * t**exponent * exp(rate * t)``."""

    coefficient: np.ndarray
    rate: float
    exponent: float = -1.5

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        scale = t**self.exponent * np.exp(self.rate * t)
        return np.multiply.outer(scale, self.coefficient)


def _require_hurwitz(cp: CriticalPoint):
    if not cp.hurwitz:
        raise YaglomError(
            "K(s*) is not Hurwitz (max Re sp = "
            f"{eigenvalues(cp.K).abscissa:.6g}); integrals over [0, inf) diverge"
        )


class _Blocks:
    """Constant matrices shared by all density evaluations at ``s*``."""

    def __init__(self, model: FluidModel, cp: CriticalPoint):
        _require_hurwitz(cp)
        self.model = model
        self.cp = cp
        self.n1, self.n2, self.n0 = model.n1, model.n2, model.n0
        self.K, self.D, self.B, self.Psi = cp.K, cp.D, cp.B, cp.psi_star
        self.Q21 = cp.Q21
        self.BQ = cp.B @ cp.Q21
        self.QB = cp.Q21 @ cp.B
        self.C1inv = np.diag(1.0 / np.diag(model.C1))
        self.C2inv = np.diag(1.0 / np.diag(model.C2))
        self.C1 = model.C1
        self.negKinv = np.linalg.inv(-cp.K)
        # [T10; T20] R00(s*): maps S1/S2 columns onto S0 columns
        self.to_zero = np.vstack([model.T10, model.T20]) @ cp.R00
        self.H_bar = self.negKinv @ self.BQ @ self.negKinv
        self.KinvB = self.negKinv @ cp.B
        # vec(exp(D u) Q21 exp(K u)) = exp(A u) vec(Q21) and its derivative
        m = self.n1 * self.n2
        A = sylvester_operator(cp.D, cp.K)
        E = sylvester_operator(self.QB, self.BQ)
        self._aug = np.block([[A, E], [np.zeros((m, m)), A]])
        self._vecQ = self.Q21.reshape(-1, order="F")

    def H(self, y):
        return expm_frechet(self.K, self.BQ, y)

    def W(self, w):
        return expm_frechet(self.D, self.QB, w)

    def eK(self, y):
        return expm(self.K, y)

    def eD(self, w):
        return expm(self.D, w)

    def G(self, m):
        """``int_0^m exp(D u) Q21 exp(K u) du`` and its Frechet derivative."""
        k = self.n1 * self.n2
        I = integral_expm(self._aug, m)
        shape = (self.n2, self.n1)
        G0 = (I[:k, :k] @ self._vecQ).reshape(shape, order="F")
        G1 = (I[:k, k:] @ self._vecQ).reshape(shape, order="F")
        return G0, G1

    def E21_Z(self, x, y):
        """E21 density (without C1^{-1}) and Z_x(s*, y) at level y."""
        m = min(x, y)
        G0, G1 = self.G(m)
        eD, eK = self.eD(x - m), self.eK(y - m)
        F = eD @ G0 @ eK
        Z = self.W(x - m) @ G0 @ eK + eD @ G1 @ eK + eD @ G0 @ self.H(y - m)
        return F, Z

    def W_x(self, x):
        n = self.n2
        M = np.block([[self.D, self.QB], [np.zeros((n, n)), self.D]])
        return integral_expm(M, x)[:n, n:]

    def numerators0(self, y):
        """x = 0 numerators, rows S1, columns (S1, S2, S0) in block order."""
        H = self.H(y)
        n11 = H @ self.C1inv
        n12 = (self.eK(y) @ self.B + H @ self.Psi) @ self.C2inv
        return self._with_zero(n11, n12)

    def _with_zero(self, a, b):
        ab = np.hstack([a, b])
        return np.hstack([ab, ab @ self.to_zero])

    def numerators_x(self, x, y, side):
        """x > 0 numerators: rows (S1, S2), columns (S1, S2, S0), block order.

        ``side`` resolves the indicators at ``y == x``: ``"l"`` takes
        ``y < x`` and ``"r"`` takes ``y > x``.
        """
        below = y < x or (y == x and side == "l")
        above = y > x or (y == x and side == "r")
        F, Z = self.E21_Z(x, y)
        E21 = F @ self.C1inv
        E22 = E21 @ self.C1 @ self.Psi @ self.C2inv
        Wterm = self.W(x - y) @ self.C2inv if below else 0.0 * self.C2inv
        if below:
            E22 = E22 + self.eD(x - y) @ self.C2inv
        # rows starting in S2
        n21 = Z @ self.C1inv
        n22 = E21 @ self.C1 @ self.B @ self.C2inv + Z @ self.Psi @ self.C2inv + Wterm
        # rows starting in S1
        n11 = self.B @ E21 + self.Psi @ Z @ self.C1inv
        n12 = self.B @ E22 + self.Psi @ n22
        if above:
            H = self.H(y - x)
            n11 = n11 + H @ self.C1inv
            n12 = n12 + (self.eK(y - x) @ self.B + H @ self.Psi) @ self.C2inv
        return np.vstack([self._with_zero(n11, n12), self._with_zero(n21, n22)])


def kernels(model: FluidModel, cp: CriticalPoint, x: float = 0.0) -> ExpansionKernels:
    """Assemble H, W, Z kernels and the row normalizers at ``s*``."""
    x = float(x)
    if x < 0:
        raise ValueError("x must be nonnegative")
    bk = _Blocks(model, cp)

    n11 = bk.H_bar @ bk.C1inv
    n12 = (bk.KinvB + bk.H_bar @ bk.Psi) @ bk.C2inv
    H_tilde = bk._with_zero(n11, n12).sum(axis=1)

    IeD = integral_expm(bk.D, x)
    E21_bar = IeD @ bk.Q21 @ bk.negKinv @ bk.C1inv
    E22_bar = E21_bar @ bk.C1 @ bk.Psi @ bk.C2inv + IeD @ bk.C2inv
    W_x = bk.W_x(x)
    Z_bar = W_x @ bk.Q21 @ bk.negKinv + IeD @ bk.Q21 @ bk.H_bar

    # S2 starts
    m21 = Z_bar @ bk.C1inv
    m22 = (E21_bar @ bk.C1 @ bk.B + Z_bar @ bk.Psi + W_x) @ bk.C2inv
    Z_tilde = bk._with_zero(m21, m22).sum(axis=1)
    # S1 starts
    m11 = bk.B @ E21_bar + bk.Psi @ Z_bar @ bk.C1inv + bk.H_bar @ bk.C1inv
    m12 = (
        bk.B @ E22_bar
        + bk.Psi @ m22
        + (bk.KinvB + bk.H_bar @ bk.Psi) @ bk.C2inv
    )
    ZZ_tilde = bk._with_zero(m11, m12).sum(axis=1)

    return ExpansionKernels(
        x=x,
        H_y=bk.H,
        H_bar=bk.H_bar,
        H_tilde=H_tilde,
        W_w=bk.W,
        W_x=W_x,
        E21_y=lambda y: bk.E21_Z(x, y)[0] @ bk.C1inv,
        E21_bar=E21_bar,
        E22_bar=E22_bar,
        Z_xy=lambda y: bk.E21_Z(x, y)[1],
        Z_bar=Z_bar,
        Z_tilde=Z_tilde,
        ZZ_tilde=ZZ_tilde,
    )


def default_y_max(cp: CriticalPoint, x: float = 0.0) -> float:
    """Smallest level past ``x`` where ``||exp(K* y)||_inf <= 1e-12``."""
    _require_hurwitz(cp)
    y = 1.0
    while np.abs(expm(cp.K, y)).sum(axis=1).max() > _TRUNCATION:
        y *= 1.25
        if y > 1e6:
            raise YaglomError("exp(K* y) decays too slowly to truncate the grid")
    # bisect down to the crossing, the H term carries an extra factor y
    lo, hi = y / 1.25, y
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        if np.abs(expm(cp.K, mid)).sum(axis=1).max() > _TRUNCATION:
            lo = mid
        else:
            hi = mid
    return float(x + hi)


def make_y_grid(y_max: float, steps: int = 400, x: float = 0.0):
    """Uniform grid on ``[0, y_max]`` with ``y = x`` tagged twice when inside."""
    if y_max <= 0 or steps < 1:
        raise ValueError("y_max must be positive and steps >= 1")
    y = np.linspace(0.0, y_max, steps + 1)
    if x <= 0 or x > y_max:
        return y, ("-",) * len(y)
    y = y[np.abs(y - x) > 1e-12 * max(1.0, x)]
    k = int(np.searchsorted(y, x))
    y = np.concatenate([y[:k], [x, x], y[k:]])
    side = ("-",) * k + ("l", "r") + ("-",) * (len(y) - k - 2)
    return y, side


def _to_original(model: FluidModel, block_cols: np.ndarray) -> np.ndarray:
    out = np.empty_like(block_cols)
    out[..., model.order] = block_cols
    return out


def _row_mass(fn, x, y_max, rows):
    total = np.zeros(rows)
    pieces = [(0.0, x, "l"), (x, y_max, "r")] if x > 0 else [(0.0, y_max, "r")]
    for a, b, side in pieces:
        if b > a:
            total += quad(lambda y: fn(y, side).sum(axis=1), a, b, tol=1e-11)
    return total


def density_function(model: FluidModel, cp: CriticalPoint, x: float = 0.0):
    """Return ``(from_phases, f)`` with ``f(y, side)`` the density matrix.

    Rows follow ``from_phases`` (original indices), columns are original
    target phases.  For ``x == 0`` the starts are S1; for ``x > 0`` they
    are S1 and S2.
    """
    bk = _Blocks(model, cp)
    kn = kernels(model, cp, x)
    if x == 0:
        norm = kn.H_tilde
        from_phases = tuple(int(i) for i in model.S1)

        def f(y, side="-"):
            return _to_original(model, bk.numerators0(y) / norm[:, None])

    else:
        norm = np.concatenate([kn.ZZ_tilde, kn.Z_tilde])
        from_phases = tuple(int(i) for i in model.S1 + model.S2)

        def f(y, side="-"):
            return _to_original(model, bk.numerators_x(x, y, side) / norm[:, None])

    if np.any(norm <= 0):
        raise YaglomError(f"nonpositive normalizer {norm}")
    return from_phases, f


def _tabulate(model, cp, x, y_grid, side, select):
    from_phases, f = density_function(model, cp, x)
    y_grid = np.asarray(y_grid, dtype=float)
    if side is None:
        side = tuple("-" for _ in y_grid)
    vals = np.stack([f(y, s) for y, s in zip(y_grid, side)])
    y_max = float(y_grid[-1]) if len(y_grid) else 0.0
    y_max = max(y_max, default_y_max(cp, x))
    mass = _row_mass(f, x, y_max, len(from_phases))
    if select is not None:
        if select not in from_phases:
            raise YaglomError(
                f"phase {select} is not a supported start for x={x}: "
                f"allowed {list(from_phases)}"
            )
        idx = [from_phases.index(select)]
        vals, mass, from_phases = vals[:, idx, :], mass[idx], (select,)
    vals = np.where(np.abs(vals) < 1e-300, 0.0, vals)
    return DensityGrid(
        x=float(x),
        from_phases=from_phases,
        y=y_grid,
        side=tuple(side),
        values=vals,
        normalization=mass,
    )


def _check_start(model, x, from_phase):
    if from_phase is None:
        return
    if from_phase in model.S0:
        raise YaglomError(
            f"start phase {from_phase} has zero rate; no Yaglom formula for S0 starts"
        )
    if x == 0 and from_phase not in model.S1:
        raise YaglomError(f"start phase {from_phase} must be in S1 when x = 0")


def mu0_density(model, cp, kern=None, y_grid=None, side=None, from_phase=None):
    """Yaglom density for start level 0 (starting phases in S1)."""
    _check_start(model, 0.0, from_phase)
    if kern is not None and kern.x != 0:
        raise ValueError("kernels were built for x > 0")
    if y_grid is None:
        y_grid, side = make_y_grid(default_y_max(cp), 400)
    return _tabulate(model, cp, 0.0, y_grid, side, from_phase)


def mux_density(model, cp, kern=None, x=None, y_grid=None, side=None, from_phase=None):
    """Yaglom density for start level ``x > 0`` (starting phases in S1 and S2)."""
    if kern is not None:
        x = kern.x if x is None else x
        if kern.x != x:
            raise ValueError(f"kernels built for x={kern.x}, asked for x={x}")
    if x is None or not x > 0:
        raise ValueError(f"mux_density needs x > 0, got {x}")
    _check_start(model, x, from_phase)
    if y_grid is None:
        y_grid, side = make_y_grid(default_y_max(cp, x), 400, x)
    elif side is None:
        y_grid = np.asarray(y_grid, dtype=float)
        side = tuple("-" for _ in y_grid)
    return _tabulate(model, cp, float(x), y_grid, side, from_phase)


def density_grid(model, cp, x=0.0, from_phase=None, y_max=None, steps=400) -> DensityGrid:
    """Density on the default grid: x = 0 and x > 0 dispatched appropriately."""
    x = float(x)
    if y_max is None:
        y_max = default_y_max(cp, x)
    y, side = make_y_grid(y_max, steps, x)
    if x == 0:
        return mu0_density(model, cp, None, y, side, from_phase)
    return mux_density(model, cp, None, x, y, side, from_phase)


def psi_tail(cp: CriticalPoint) -> TailAsymptote:
    """Asymptote of the busy-period density matrix psi(t) for large t."""
    return TailAsymptote(cp.B / (2.0 * math.sqrt(math.pi)), cp.s_star, -1.5)
