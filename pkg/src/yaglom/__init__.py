"""Yaglom limits of Markovian stochastic fluid models.

The pipeline runs Q(s) -> Psi(s) -> s* -> B(s*) -> mu(dy), with a
conditioned Monte Carlo simulator for validation::

    from yaglom import example1, critical_point, density_grid
    m = example1(3, 1)
    cp = critical_point(m)
    grid = density_grid(m, cp, x=0.0)
"""

from .critical import CriticalPoint, CriticalPointError, critical_point, find_s_star
from .density import (
    DensityGrid,
    TailAsymptote,
    YaglomError,
    density_grid,
    kernels,
    mu0_density,
    mux_density,
    psi_tail,
)
from .generator import AdmissibilityError, a_blocks, q_blocks
from .model import (
    FluidModel,
    ModelError,
    UnstableModelError,
    example1,
    example2,
    load_model,
    stability,
)
from .numkit import NumericalError
from .riccati import existence_probe, phi, solve_psi
from .simulate import SimConfig, compare_densities, return_time_tail, simulate_conditional

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityError",
    "CriticalPoint",
    "CriticalPointError",
    "DensityGrid",
    "FluidModel",
    "ModelError",
    "NumericalError",
    "SimConfig",
    "TailAsymptote",
    "UnstableModelError",
    "YaglomError",
    "a_blocks",
    "compare_densities",
    "critical_point",
    "density_grid",
    "example1",
    "example2",
    "existence_probe",
    "find_s_star",
    "kernels",
    "load_model",
    "mu0_density",
    "mux_density",
    "phi",
    "psi_tail",
    "q_blocks",
    "return_time_tail",
    "simulate_conditional",
    "solve_psi",
    "stability",
]
