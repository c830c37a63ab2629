"""Exact event-driven Monte Carlo of a fluid model conditioned on survival.

Between phase jumps the level moves linearly, so a path's first hit of
level 0 is found in closed form inside the segment where it happens.
Paths are simulated in fixed-size blocks.  Block ``b`` draws from its own
generator seeded by ``SeedSequence(seed, spawn_key=(b,))``, which makes
results independent of how blocks are spread over worker threads.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .density import DensityGrid
from .model import FluidModel, require_stable

__all__ = [
    "SimulationError",
    "SimConfig",
    "EmpiricalDensity",
    "ReturnTimeSample",
    "TailFit",
    "simulate_conditional",
    "sample_return_times",
    "return_time_tail",
    "bin_analytic",
    "compare_densities",
    "worker_count",
]

log = logging.getLogger(__name__)

BLOCK_SIZE = 1 << 16


class SimulationError(ValueError):
    """Inconsistent simulation request or unusable sample."""


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo settings.

    ``phase0`` is an original (input-order) phase index.  When ``y_max`` is
    None the histogram range is taken from the largest surviving level.
    """

    x0: float
    phase0: int
    t: float
    paths: int
    seed: int = 0
    bins: int = 80
    y_max: float | None = None
    workers: int | None = None

    def __post_init__(self):
        if self.paths < 1:
            raise SimulationError("paths must be >= 1")
        if not self.t > 0:
            raise SimulationError("t must be positive")
        if self.x0 < 0:
            raise SimulationError("x0 must be nonnegative")
        if self.bins < 1:
            raise SimulationError("bins must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise SimulationError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class EmpiricalDensity:
    """Histogram of ``(X(t), phi(t))`` among paths that survived to ``t``.

    ``masses[k, j]`` is the fraction of survivors with level in
    ``[edges[k], edges[k+1])`` and phase ``j`` (original index).  Survivors
    above ``edges[-1]`` are counted in ``overflow``.
    """

    edges: np.ndarray
    masses: np.ndarray
    survivors: int
    paths: int
    overflow: float = 0.0
    levels: np.ndarray = field(default=None, repr=False)
    phases: np.ndarray = field(default=None, repr=False)

    @property
    def survival_estimate(self) -> float:
        return self.survivors / self.paths

    @property
    def ci_halfwidth(self) -> float:
        """95% normal-approximation half-width of ``survival_estimate``."""
        p = self.survival_estimate
        return 1.959963984540054 * math.sqrt(p * (1 - p) / self.paths)

    @property
    def level_masses(self) -> np.ndarray:
        return self.masses.sum(axis=1)


@dataclass(frozen=True)
class ReturnTimeSample:
    """Sorted first-return times to level 0 and the phase of each return."""

    times: np.ndarray
    phases: np.ndarray
    censored: int
    horizon: float


@dataclass(frozen=True)
class TailFit:
    """Fit of the busy-period density tail ``f(t) ~ C t^alpha e^{beta t}``.

    ``slope`` comes from regressing ``log(f t^1.5)`` on ``t``;
    ``exponent``/``rate`` from the free two-parameter fit.
    """

    slope: float
    slope_se: float
    exponent: float
    exponent_se: float
    rate: float
    window: tuple
    samples_in_window: int
    sample: ReturnTimeSample = field(repr=False)


def worker_count(requested=None) -> int:
    if requested:
        return max(1, int(requested))
    env = os.environ.get("YAGLOM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise SimulationError(f"YAGLOM_THREADS must be an integer, got {env!r}")
    return os.cpu_count() or 1


class _Chain:
    """Jump-chain tables for vectorised stepping."""

    def __init__(self, model: FluidModel):
        T = model.T
        self.rates = -np.diag(T)
        P = T / np.where(self.rates > 0, self.rates, 1.0)[:, None]
        np.fill_diagonal(P, 0.0)
        self.cum = np.cumsum(P, axis=1)
        self.cum[:, -1] = 1.0
        self.c = model.c

    def jump(self, phase, u):
        return (u[:, None] > self.cum[phase]).sum(axis=1)


def _block_rng(seed, block):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))


def _run_block(chain, x0, phase0, n, horizon, rng, stop_at_zero=True):
    """Advance ``n`` paths until they hit 0 or reach ``horizon``.

    Returns ``(level, phase, time, hit)``.  For hit paths ``time`` is the
    hitting time and ``phase`` the phase at that moment.
    """
    level = np.full(n, float(x0))
    phase = np.full(n, int(phase0), dtype=np.int64)
    time = np.zeros(n)
    hit = np.zeros(n, dtype=bool)
    active = np.arange(n)
    while active.size:
        ph = phase[active]
        rate = chain.rates[ph]
        hold = rng.exponential(size=active.size) / rate
        u = rng.random(active.size)
        rem = horizon - time[active]
        dt = np.minimum(hold, rem)
        c = chain.c[ph]
        lv = level[active]
        # first zero crossing inside the segment, exact for linear motion
        with np.errstate(divide="ignore", invalid="ignore"):
            t_hit = np.where(c < 0, lv / -c, np.inf)
        dies = t_hit <= dt
        idx = active[dies]
        time[idx] += t_hit[dies]
        level[idx] = 0.0
        hit[idx] = True
        live = ~dies
        idx = active[live]
        level[idx] = np.maximum(lv[live] + c[live] * dt[live], 0.0)
        time[idx] += dt[live]
        done = dt[live] >= rem[live]
        jumpers = idx[~done]
        phase[jumpers] = chain.jump(phase[jumpers], u[live][~done])
        active = jumpers
    return level, phase, time, hit


def _blocks(paths):
    n_blocks = -(-paths // BLOCK_SIZE)
    return [(b, min(BLOCK_SIZE, paths - b * BLOCK_SIZE)) for b in range(n_blocks)]


def _map_blocks(fn, paths, workers):
    blocks = _blocks(paths)
    w = min(worker_count(workers), len(blocks))
    if w <= 1:
        return [fn(b, n) for b, n in blocks]
    with ThreadPoolExecutor(max_workers=w) as pool:
        return list(pool.map(lambda bn: fn(*bn), blocks))


def _check_start(model, x0, phase0):
    if not 0 <= phase0 < model.n:
        raise SimulationError(f"phase0={phase0} out of range for n={model.n}")
    if x0 == 0 and phase0 not in model.S1:
        raise SimulationError(
            f"phase0={phase0} must have a positive rate when x0=0 "
            f"(S1 = {model.S1})"
        )


def simulate_conditional(model: FluidModel, cfg: SimConfig) -> EmpiricalDensity:
    """Histogram ``(X(t), phi(t))`` over paths with ``theta(0) > t``."""
    require_stable(model)
    _check_start(model, cfg.x0, cfg.phase0)
    chain = _Chain(model)

    def one(b, n):
        level, phase, _, hit = _run_block(
            chain, cfg.x0, cfg.phase0, n, cfg.t, _block_rng(cfg.seed, b)
        )
        return level[~hit], phase[~hit]

    parts = _map_blocks(one, cfg.paths, cfg.workers)
    levels = np.concatenate([p[0] for p in parts])
    phases = np.concatenate([p[1] for p in parts])
    survivors = int(levels.size)
    if survivors == 0:
        log.warning("no survivors among %d paths at t=%g", cfg.paths, cfg.t)
    y_max = cfg.y_max
    if y_max is None:
        y_max = float(levels.max()) * (1 + 1e-12) if survivors else 1.0
        y_max = max(y_max, 1e-12)
    edges = np.linspace(0.0, y_max, cfg.bins + 1)
    masses = np.zeros((cfg.bins, model.n))
    overflow = 0.0
    if survivors:
        inside = levels < y_max
        k = np.minimum(np.searchsorted(edges, levels[inside], side="right") - 1, cfg.bins - 1)
        np.add.at(masses, (k, phases[inside]), 1.0)
        masses /= survivors
        overflow = float((~inside).sum()) / survivors
    return EmpiricalDensity(
        edges=edges,
        masses=masses,
        survivors=survivors,
        paths=cfg.paths,
        overflow=overflow,
        levels=levels,
        phases=phases,
    )


def sample_return_times(model: FluidModel, cfg: SimConfig, horizon=None) -> ReturnTimeSample:
    """First-return times to level 0 from ``(0, phase0)``, censored at ``horizon``."""
    require_stable(model)
    if cfg.x0 != 0:
        raise SimulationError("return times are defined for x0 = 0")
    _check_start(model, 0.0, cfg.phase0)
    chain = _Chain(model)
    horizon = 10.0 * cfg.t if horizon is None else float(horizon)

    def one(b, n):
        _, phase, time, hit = _run_block(
            chain, 0.0, cfg.phase0, n, horizon, _block_rng(cfg.seed, b)
        )
        return time[hit], phase[hit], int((~hit).sum())

    parts = _map_blocks(one, cfg.paths, cfg.workers)
    times = np.concatenate([p[0] for p in parts])
    phases = np.concatenate([p[1] for p in parts])
    order = np.argsort(times, kind="stable")
    return ReturnTimeSample(
        times=times[order],
        phases=phases[order],
        censored=sum(p[2] for p in parts),
        horizon=horizon,
    )


def _wls(X, y, w):
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    resid = y - X @ coef
    dof = max(len(y) - X.shape[1], 1)
    sigma2 = float(np.sum(w * resid**2) / dof)
    cov = sigma2 * np.linalg.inv((X * w[:, None]).T @ X)
    return coef, np.sqrt(np.diag(cov))


def return_time_tail(
    model: FluidModel, cfg: SimConfig, window=(8.0, 25.0), bins=None, min_count=5
) -> TailFit:
    """Fit the exponential rate and power of the busy-period density tail.

    ``cfg.t`` is ignored apart from setting no horizon shorter than
    ``10 * window[1]``.
    """
    t_lo, t_hi = map(float, window)
    if not 0 < t_lo < t_hi:
        raise SimulationError(f"bad window {window}")
    horizon = 10.0 * max(t_hi, cfg.t)
    sample = sample_return_times(model, cfg, horizon)
    bins = bins or max(8, int(round(2 * (t_hi - t_lo))))
    # log-spaced bins keep the counts per bin more even than uniform ones
    edges = np.geomspace(t_lo, t_hi, bins + 1)
    counts, _ = np.histogram(sample.times, bins=edges)
    mids = np.sqrt(edges[:-1] * edges[1:])
    keep = counts >= min_count
    if keep.sum() < 4:
        raise SimulationError(
            f"insufficient tail samples in window [{t_lo}, {t_hi}]: "
            f"{int(counts.sum())} returns, {int(keep.sum())} usable bins"
        )
    widths = np.diff(edges)
    f_hat = counts[keep] / (widths[keep] * cfg.paths)
    t = mids[keep]
    w = counts[keep].astype(float)  # var(log count) ~ 1/count
    y1 = np.log(f_hat * t**1.5)
    (_, slope), (_, slope_se) = _wls(np.column_stack([np.ones_like(t), t]), y1, w)
    coef, se = _wls(np.column_stack([np.ones_like(t), np.log(t), t]), np.log(f_hat), w)
    return TailFit(
        slope=float(slope),
        slope_se=float(slope_se),
        exponent=float(coef[1]),
        exponent_se=float(se[1]),
        rate=float(coef[2]),
        window=(t_lo, t_hi),
        samples_in_window=int(counts.sum()),
        sample=sample,
    )


def _cumulative(y, f, points):
    """Integral of the piecewise-linear interpolant of ``f`` from y[0] to each point.

    ``y`` may repeat a node to encode a jump.  ``f`` may be 2-D (columns
    integrated independently).
    """
    y = np.asarray(y, dtype=float)
    f = np.asarray(f, dtype=float)
    seg = 0.5 * (f[1:] + f[:-1]) * np.diff(y)[(...,) + (None,) * (f.ndim - 1)]
    cum = np.concatenate([np.zeros((1,) + f.shape[1:]), np.cumsum(seg, axis=0)])
    out = []
    for p in np.atleast_1d(points):
        if p <= y[0]:
            out.append(np.zeros(f.shape[1:]))
            continue
        if p >= y[-1]:
            out.append(cum[-1])
            continue
        k = int(np.searchsorted(y, p, side="right")) - 1
        h = y[k + 1] - y[k]
        lam = (p - y[k]) / h if h > 0 else 0.0
        fp = f[k] + lam * (f[k + 1] - f[k])
        out.append(cum[k] + 0.5 * (f[k] + fp) * (p - y[k]))
    return np.array(out)


def bin_analytic(grid: DensityGrid, edges, from_phase=None) -> np.ndarray:
    """Integrate an analytic density over histogram bins: ``(bins, n)`` masses."""
    if from_phase is None:
        if len(grid.from_phases) != 1:
            raise SimulationError(
                f"grid has start phases {grid.from_phases}; choose one"
            )
        from_phase = grid.from_phases[0]
    dens = grid.row(from_phase)
    edges = np.asarray(edges, dtype=float)
    if edges[0] < grid.y[0] - 1e-12:
        raise SimulationError("support mismatch: bins start below the analytic grid")
    return np.diff(_cumulative(grid.y, dens, edges), axis=0)


def compare_densities(analytic, empirical: EmpiricalDensity, from_phase=None) -> dict:
    """L1 and Kolmogorov-Smirnov distances between analytic and empirical laws.

    ``analytic`` is a :class:`DensityGrid` or a ``(bins, n)`` array of
    masses already binned on ``empirical.edges``.  ``ks`` compares level
    marginals at the bin edges; ``l1`` sums absolute differences over
    joint (level bin, phase) cells; ``ks_phase`` is the largest per-phase
    CDF gap.
    """
    if isinstance(analytic, DensityGrid):
        a = bin_analytic(analytic, empirical.edges, from_phase)
    else:
        a = np.asarray(analytic, dtype=float)
    e = empirical.masses
    if a.shape != e.shape:
        raise SimulationError(f"support mismatch: analytic {a.shape} vs empirical {e.shape}")
    l1 = float(np.abs(a - e).sum())
    cdf_a = np.cumsum(a.sum(axis=1))
    cdf_e = np.cumsum(e.sum(axis=1))
    ks = float(np.max(np.abs(cdf_a - cdf_e))) if len(cdf_a) else 0.0
    ks_phase = float(np.max(np.abs(np.cumsum(a, axis=0) - np.cumsum(e, axis=0))))
    return {"l1": l1, "ks": ks, "ks_phase": ks_phase}
