"""Fluid generator blocks Q(s) and their negated s-derivatives A(s)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import FluidModel
from .numkit import eigenvalues

__all__ = [
    "AdmissibilityError",
    "GeneratorBlocks",
    "DerivativeBlocks",
    "t00_abscissa",
    "q_blocks",
    "a_blocks",
]

_ADMISSIBLE_MARGIN = 1e-10


class AdmissibilityError(ValueError):
    """The resolvent of T00 does not exist at the requested s."""


@dataclass(frozen=True)
class GeneratorBlocks:
    s: float
    Q11: np.ndarray
    Q12: np.ndarray
    Q21: np.ndarray
    Q22: np.ndarray
    R00: np.ndarray  # -(T00 - sI)^{-1}, 0x0 when S0 is empty

    @property
    def Q(self):
        return np.block([[self.Q11, self.Q12], [self.Q21, self.Q22]])


@dataclass(frozen=True)
class DerivativeBlocks:
    s: float
    A11: np.ndarray
    A12: np.ndarray
    A21: np.ndarray
    A22: np.ndarray


def t00_abscissa(model: FluidModel) -> float:
    """Largest real part of sp(T00); ``-inf`` when S0 is empty."""
    if model.n0 == 0:
        return -np.inf
    return eigenvalues(model.T00).abscissa


def _resolvent(model, s):
    n0 = model.n0
    if n0 == 0:
        return np.zeros((0, 0))
    abscissa = t00_abscissa(model)
    if not s > abscissa + _ADMISSIBLE_MARGIN:
        raise AdmissibilityError(
            f"s below T00 abscissa: s={s!r} must exceed {abscissa!r}"
        )
    return -np.linalg.solve(model.T00 - s * np.eye(n0), np.eye(n0))


def q_blocks(model: FluidModel, s: float) -> GeneratorBlocks:
    """Blocks of the fluid generator Q(s), censored on the zero-rate phases."""
    s = float(s)
    R = _resolvent(model, s)
    c1 = 1.0 / np.diag(model.C1)
    c2 = 1.0 / np.diag(model.C2)
    T10, T20, T01, T02 = model.T10, model.T20, model.T01, model.T02
    I1, I2 = np.eye(model.n1), np.eye(model.n2)
    # -T_k0 (T00 - sI)^{-1} T_0l = T_k0 R T_0l
    Q11 = c1[:, None] * (model.T11 - s * I1 + T10 @ R @ T01)
    Q12 = c1[:, None] * (model.T12 + T10 @ R @ T02)
    Q21 = c2[:, None] * (model.T21 + T20 @ R @ T01)
    Q22 = c2[:, None] * (model.T22 - s * I2 + T20 @ R @ T02)
    return GeneratorBlocks(s, Q11, Q12, Q21, Q22, R)


def a_blocks(model: FluidModel, s: float, R00=None) -> DerivativeBlocks:
    """``A_kl(s) = -dQ_kl/ds``, built from the squared T00 resolvent."""
    s = float(s)
    R = _resolvent(model, s) if R00 is None else R00
    R2 = R @ R
    c1 = 1.0 / np.diag(model.C1)
    c2 = 1.0 / np.diag(model.C2)
    T10, T20, T01, T02 = model.T10, model.T20, model.T01, model.T02
    A11 = c1[:, None] * (np.eye(model.n1) + T10 @ R2 @ T01)
    A12 = c1[:, None] * (T10 @ R2 @ T02)
    A21 = c2[:, None] * (T20 @ R2 @ T01)
    A22 = c2[:, None] * (np.eye(model.n2) + T20 @ R2 @ T02)
    return DerivativeBlocks(s, A11, A12, A21, A22)
