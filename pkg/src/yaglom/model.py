"""Stochastic fluid model definition, validation and stability check."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse.csgraph import connected_components

from .numkit import NumericalError

__all__ = [
    "ModelError",
    "UnstableModelError",
    "FluidModel",
    "StabilityReport",
    "load_model",
    "stability",
    "require_stable",
    "example1",
    "example2",
]

_ROW_SUM_TOL = 1e-12


class ModelError(ValueError):
    """The model document or matrices do not describe a valid fluid model."""


class UnstableModelError(ModelError):
    """The model has nonnegative mean drift; busy periods are not a.s. finite."""


@dataclass(frozen=True, eq=False)
class FluidModel:
    """A Markovian fluid model with generator ``T`` and rates ``c``.

    ``T`` and ``c`` are kept in the input (original) phase order.  All
    internal computations use the block order (S1, S2, S0) given by
    ``order``; the ``T11`` ... ``T00`` properties return the blocks in
    that order.
    """

    T: np.ndarray
    c: np.ndarray
    labels: tuple = field(default=None)

    def __post_init__(self):
        T = np.array(self.T, dtype=float)
        c = np.array(self.c, dtype=float).reshape(-1)
        T.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "c", c)
        if self.labels is None:
            object.__setattr__(self, "labels", tuple(str(i + 1) for i in range(len(c))))
        else:
            object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))
        _validate(T, c, self.labels)

    @property
    def n(self) -> int:
        return len(self.c)

    @cached_property
    def S1(self) -> list:
        return [i for i in range(self.n) if self.c[i] > 0]

    @cached_property
    def S2(self) -> list:
        return [i for i in range(self.n) if self.c[i] < 0]

    @cached_property
    def S0(self) -> list:
        return [i for i in range(self.n) if self.c[i] == 0]

    @property
    def partition(self):
        return self.S1, self.S2, self.S0

    @cached_property
    def order(self) -> np.ndarray:
        """Original indices listed in block order (S1, S2, S0)."""
        return np.array(self.S1 + self.S2 + self.S0, dtype=int)

    @property
    def n1(self) -> int:
        return len(self.S1)

    @property
    def n2(self) -> int:
        return len(self.S2)

    @property
    def n0(self) -> int:
        return len(self.S0)

    def _block(self, rows, cols):
        out = self.T[np.ix_(rows, cols)]
        out.setflags(write=False)
        return out

    T11 = property(lambda self: self._block(self.S1, self.S1))
    T12 = property(lambda self: self._block(self.S1, self.S2))
    T10 = property(lambda self: self._block(self.S1, self.S0))
    T21 = property(lambda self: self._block(self.S2, self.S1))
    T22 = property(lambda self: self._block(self.S2, self.S2))
    T20 = property(lambda self: self._block(self.S2, self.S0))
    T01 = property(lambda self: self._block(self.S0, self.S1))
    T02 = property(lambda self: self._block(self.S0, self.S2))
    T00 = property(lambda self: self._block(self.S0, self.S0))

    @cached_property
    def C1(self) -> np.ndarray:
        return np.diag(self.c[self.S1])

    @cached_property
    def C2(self) -> np.ndarray:
        return np.diag(np.abs(self.c[self.S2]))

    def block_phase(self, original: int) -> tuple:
        """Map an original phase index to ``(set_name, position_in_set)``."""
        for name, members in (("S1", self.S1), ("S2", self.S2), ("S0", self.S0)):
            if original in members:
                return name, members.index(original)
        raise IndexError(f"phase {original} out of range for n={self.n}")

    def to_dict(self) -> dict:
        return {"c": self.c.tolist(), "T": self.T.tolist(), "labels": list(self.labels)}

    def dumps(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True)
class StabilityReport:
    xi: np.ndarray
    drift: float
    stable: bool


def _validate(T, c, labels):
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise ModelError(f"T must be square, got shape {T.shape}")
    n = T.shape[0]
    if len(c) != n:
        raise ModelError(f"length of c ({len(c)}) does not match T ({n}x{n})")
    if len(labels) != n:
        raise ModelError(f"expected {n} labels, got {len(labels)}")
    if n < 2:
        raise ModelError("a fluid model needs at least two phases")
    if not (np.all(np.isfinite(T)) and np.all(np.isfinite(c))):
        raise ModelError("T and c must be finite")
    off = T - np.diag(np.diag(T))
    if np.any(off < 0):
        i, j = np.argwhere(off < 0)[0]
        raise ModelError(f"negative off-diagonal generator entry T[{i},{j}]={T[i, j]}")
    scale = max(1.0, float(np.abs(T).max()))
    rows = np.abs(T.sum(axis=1))
    if np.any(rows > _ROW_SUM_TOL * scale):
        i = int(np.argmax(rows))
        raise ModelError(f"row {i} of T sums to {T[i].sum():.3e}, not 0")
    ncomp, _ = connected_components(off > 0, directed=True, connection="strong")
    if ncomp != 1:
        raise ModelError(f"T is reducible ({ncomp} strongly connected components)")
    if not np.any(c > 0):
        raise ModelError("S1 is empty: no phase with positive rate")
    if not np.any(c < 0):
        raise ModelError("S2 is empty: no phase with negative rate")


def load_model(source) -> FluidModel:
    """Build a :class:`FluidModel` from a JSON document.

    ``source`` may be a path, a JSON string, a file object or an already
    parsed ``dict`` with keys ``c``, ``T`` and optionally ``labels``.
    """
    if isinstance(source, dict):
        doc = source
    elif hasattr(source, "read"):
        doc = json.load(source)
    elif isinstance(source, os.PathLike) or (
        isinstance(source, str) and os.path.exists(source)
    ):
        with open(source, encoding="utf-8") as fh:
            doc = json.load(fh)
    elif isinstance(source, str):
        doc = json.loads(source)
    else:
        raise ModelError(f"cannot read model from {type(source).__name__}")

    if not isinstance(doc, dict):
        raise ModelError("model document must be a JSON object")
    unknown = set(doc) - {"c", "T", "labels"}
    if unknown:
        raise ModelError(f"unknown keys in model document: {sorted(unknown)}")
    for key in ("c", "T"):
        if key not in doc:
            raise ModelError(f"model document is missing '{key}'")
    c, T = doc["c"], doc["T"]
    if not isinstance(c, list) or not all(_is_number(v) for v in c):
        raise ModelError("'c' must be an array of numbers")
    if not isinstance(T, list) or not all(isinstance(r, list) for r in T):
        raise ModelError("'T' must be an array of arrays")
    if not all(_is_number(v) for row in T for v in row):
        raise ModelError("'T' entries must be numbers")
    if len({len(r) for r in T}) > 1:
        raise ModelError("rows of 'T' have different lengths")
    labels = doc.get("labels")
    if labels is not None and (
        not isinstance(labels, list) or not all(isinstance(x, str) for x in labels)
    ):
        raise ModelError("'labels' must be an array of strings")
    return FluidModel(np.array(T, dtype=float), np.array(c, dtype=float), labels)


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def stability(model: FluidModel) -> StabilityReport:
    """Stationary vector of ``T`` and the mean drift ``sum_i c_i xi_i``."""
    T = model.T
    n = model.n
    # xi T = 0 with xi 1 = 1, stacked as one overdetermined system
    A = np.vstack([T.T, np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    xi, *_ = np.linalg.lstsq(A, b, rcond=None)
    res = np.abs(xi @ T).max()
    if res > 1e-10 * max(1.0, float(np.abs(T).max())) or abs(xi.sum() - 1) > 1e-10:
        raise NumericalError(f"stationary vector solve broke down (residual {res:.3e})")
    xi = np.clip(xi, 0.0, None)
    xi /= xi.sum()
    drift = float(model.c @ xi)
    return StabilityReport(xi=xi, drift=drift, stable=drift < 0)


def require_stable(model: FluidModel) -> StabilityReport:
    rep = stability(model)
    if not rep.stable:
        raise UnstableModelError(
            f"model is not stable: mean drift {rep.drift:.6g} >= 0"
        )
    return rep


def example1(a=3.0, b=1.0) -> FluidModel:
    """Two-phase model with ``T = [[-a, a], [b, -b]]`` and ``c = [1, -1]``."""
    return FluidModel(np.array([[-a, a], [b, -b]], dtype=float), np.array([1.0, -1.0]))


def example2(lam=2.5) -> FluidModel:
    """Three-phase two-source model with one up phase and two down phases."""
    T = np.array(
        [[-2 * lam, 2 * lam, 0.0], [1.0, -(1 + lam), lam], [0.0, 2.0, -2.0]]
    )
    return FluidModel(T, np.array([1.0, -1.0, -1.0]))
