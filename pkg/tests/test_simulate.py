import numpy as np
import pytest

from oracles import EX1_T12_CDF, EX1_T12_PHASE1, EX1_T12_SURVIVAL, ex1_s_star
from yaglom.density import DensityGrid
from yaglom.model import example1, example2
from yaglom.simulate import (
    BLOCK_SIZE,
    EmpiricalDensity,
    SimConfig,
    SimulationError,
    bin_analytic,
    compare_densities,
    return_time_tail,
    sample_return_times,
    simulate_conditional,
    worker_count,
)
from conftest import four_phase_s0

EX1 = example1(3, 1)


def test_config_validation():
    with pytest.raises(SimulationError):
        SimConfig(0.0, 0, 1.0, 0)
    with pytest.raises(SimulationError):
        SimConfig(0.0, 0, 0.0, 10)
    with pytest.raises(SimulationError):
        SimConfig(-1.0, 0, 1.0, 10)
    with pytest.raises(SimulationError):
        SimConfig(0.0, 0, 1.0, 10, seed=-1)


def test_start_phase_must_rise_at_zero():
    with pytest.raises(SimulationError, match="positive rate"):
        simulate_conditional(EX1, SimConfig(0.0, 1, 1.0, 10))
    with pytest.raises(SimulationError, match="out of range"):
        simulate_conditional(EX1, SimConfig(1.0, 5, 1.0, 10))


def test_unstable_model_rejected():
    with pytest.raises(ValueError):
        simulate_conditional(example1(1, 1), SimConfig(0.0, 0, 1.0, 10))


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("YAGLOM_THREADS", "3")
    assert worker_count() == 3
    assert worker_count(2) == 2


def test_deterministic_across_workers():
    cfg = dict(x0=0.0, phase0=0, t=3.0, paths=3 * BLOCK_SIZE + 17, seed=5, bins=30)
    a = simulate_conditional(EX1, SimConfig(**cfg, workers=1))
    b = simulate_conditional(EX1, SimConfig(**cfg, workers=4))
    assert np.array_equal(a.levels, b.levels)
    assert np.array_equal(a.masses, b.masses)
    assert np.array_equal(a.edges, b.edges)


def test_seed_changes_sample():
    a = simulate_conditional(EX1, SimConfig(0.0, 0, 3.0, 20000, seed=1))
    b = simulate_conditional(EX1, SimConfig(0.0, 0, 3.0, 20000, seed=2))
    assert not np.array_equal(a.levels, b.levels)


def test_masses_are_a_distribution():
    e = simulate_conditional(example2(), SimConfig(0.5, 2, 2.0, 50000, seed=3, bins=40))
    assert (e.masses >= 0).all()
    assert e.masses.sum() + e.overflow == pytest.approx(1.0, abs=1e-12)
    assert (e.levels > 0).all()
    assert e.masses.shape == (40, 3)


def test_survival_monotone_in_t():
    s6 = simulate_conditional(EX1, SimConfig(0.0, 0, 6.0, 200000, seed=9)).survival_estimate
    s12 = simulate_conditional(EX1, SimConfig(0.0, 0, 12.0, 200000, seed=9)).survival_estimate
    assert s6 > s12


def test_finite_speed_survival():
    e = simulate_conditional(EX1, SimConfig(5.0, 1, 0.01, 10000, seed=4))
    assert e.survival_estimate == 1.0
    assert e.levels.min() >= 5.0 - 0.01 - 1e-12


def test_zero_phase_model_levels():
    e = simulate_conditional(four_phase_s0(), SimConfig(1.0, 2, 4.0, 40000, seed=8))
    assert e.survivors > 0
    assert (e.levels > 0).all()
    assert set(np.unique(e.phases)) <= {0, 1, 2, 3}


def test_matches_exact_finite_time_law():
    # exact values from Laplace inversion of the occupation transform
    e = simulate_conditional(EX1, SimConfig(0.0, 0, 12.0, 2_000_000, seed=42))
    assert abs(e.survival_estimate - EX1_T12_SURVIVAL) <= 1.5 * e.ci_halfwidth
    cdf = np.array([(e.levels <= y).mean() for y in range(1, 13)])
    assert np.abs(cdf - EX1_T12_CDF).max() < 0.05
    assert (e.phases == 0).mean() == pytest.approx(EX1_T12_PHASE1, abs=0.04)


def test_every_path_returns():
    cfg = SimConfig(0.0, 0, 6.0, 100000, seed=11)
    s = sample_return_times(EX1, cfg)
    assert s.horizon == 60.0
    assert 1 - s.censored / cfg.paths >= 0.999
    assert (s.times > 0).all() and np.all(np.diff(s.times) >= 0)
    assert set(np.unique(s.phases)) == {1}


def test_return_time_mean_example1():
    # mean busy period from (0, up) is -Phi(0) = 1 for a = 3, b = 1
    s = sample_return_times(EX1, SimConfig(0.0, 0, 10.0, 200000, seed=12))
    assert s.censored == 0
    assert s.times.mean() == pytest.approx(1.0, abs=0.03)


def test_return_times_need_zero_start():
    with pytest.raises(SimulationError):
        sample_return_times(EX1, SimConfig(1.0, 0, 1.0, 10))


def test_tail_fit_a4():
    fit = return_time_tail(example1(4, 1), SimConfig(0.0, 0, 1.0, 3_000_000, seed=21), window=(6, 20))
    assert fit.slope == pytest.approx(ex1_s_star(4.0), rel=0.15)


def test_tail_fit_insufficient_samples():
    with pytest.raises(SimulationError, match="insufficient tail samples"):
        return_time_tail(EX1, SimConfig(0.0, 0, 1.0, 1000, seed=1), window=(8, 25))


def _empirical(masses, edges):
    masses = np.asarray(masses, dtype=float)
    return EmpiricalDensity(edges=np.asarray(edges, float), masses=masses, survivors=10, paths=10)


def test_compare_identical_is_zero():
    e = _empirical([[0.2, 0.1], [0.3, 0.0], [0.1, 0.3]], [0, 1, 2, 3])
    d = compare_densities(e.masses.copy(), e)
    assert d == {"l1": 0.0, "ks": 0.0, "ks_phase": 0.0}


def test_compare_shifted_toy():
    # level masses (0.5, 0.3, 0.2) against the same shifted one bin right,
    # (0, 0.5, 0.3): CDFs (0.5, 0.8, 1.0) vs (0, 0.5, 0.8), largest gap 0.5
    a = np.array([[0.5], [0.3], [0.2]])
    e = _empirical([[0.0], [0.5], [0.3]], [0, 1, 2, 3])
    d = compare_densities(a, e)
    assert d["ks"] == pytest.approx(0.5)
    assert d["l1"] == pytest.approx(0.5 + 0.2 + 0.1)


def test_compare_support_mismatch():
    e = _empirical([[0.5], [0.5]], [0, 1, 2])
    with pytest.raises(SimulationError, match="support mismatch"):
        compare_densities(np.ones((3, 1)) / 3, e)


def test_bin_analytic_linear_density():
    y = np.linspace(0.0, 2.0, 21)
    g = DensityGrid(
        x=0.0,
        from_phases=(0,),
        y=y,
        side=("-",) * len(y),
        values=np.stack([0.5 * y, np.zeros_like(y)], axis=1)[:, None, :],
        normalization=np.ones(1),
    )
    m = bin_analytic(g, [0.0, 1.0, 1.5, 2.0])
    assert np.allclose(m[:, 0], [0.25, 0.3125, 0.4375])
    assert not m[:, 1].any()
