import dataclasses

import numpy as np
import pytest

from oracles import EX2, ex1_phi, ex1_psi, ex1_s_star
from yaglom.model import example1, example2
from yaglom.riccati import (
    BelowCriticalError,
    existence_probe,
    phi,
    riccati_residual,
    solve_psi,
)
from conftest import four_phase_s0

S_STAR_EX1 = ex1_s_star(3.0)


def test_psi_at_zero_example1():
    sol = solve_psi(example1(3, 1), 0.0)
    assert sol.converged
    assert sol.psi[0, 0] == pytest.approx(1.0, abs=1e-12)
    assert sol.K[0, 0] == pytest.approx(-2.0, abs=1e-12)
    assert sol.D[0, 0] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("s", [S_STAR_EX1 + 1e-3, -0.2, 0.0, 0.7, 3.0])
def test_psi_closed_form_example1(s):
    sol = solve_psi(example1(3, 1), s)
    assert sol.converged
    assert sol.psi[0, 0] == pytest.approx(ex1_psi(s), rel=1e-10)


def test_psi_near_fold_example1():
    sol = solve_psi(example1(3, 1), S_STAR_EX1 + 1e-12)
    assert sol.converged
    assert sol.psi[0, 0] == pytest.approx(np.sqrt(3), abs=1e-5)


def test_psi_critical_example2():
    sol = solve_psi(example2(), EX2["s_star"] + 1e-13)
    assert sol.converged
    assert np.allclose(sol.psi[0], EX2["psi"], atol=1e-5)


def test_psi_row_sums_one_at_zero():
    # recurrent busy period: the return phase distribution is stochastic
    for m in (example1(3, 1), example2(), four_phase_s0()):
        sol = solve_psi(m, 0.0)
        assert np.allclose(sol.psi.sum(axis=1), 1.0, atol=1e-10)


def test_residual_reported():
    m = example2()
    sol = solve_psi(m, -0.4)
    assert sol.residual == pytest.approx(np.abs(riccati_residual(sol.blocks, sol.psi)).max())
    assert sol.residual < 1e-11


def test_probe_brackets_s_star():
    m = example1(3, 1)
    assert not existence_probe(m, S_STAR_EX1 - 0.05)
    assert not existence_probe(m, -1.2)
    assert existence_probe(m, S_STAR_EX1 + 0.05)
    assert existence_probe(m, 0.0)


def test_failure_reported_not_raised():
    sol = solve_psi(example1(3, 1), -1.2)
    assert not sol.converged
    assert sol.reason


def test_phi_at_zero_example1():
    m = example1(3, 1)
    p = phi(m, solve_psi(m, 0.0))
    assert p.phi[0, 0] == pytest.approx(-1.0, rel=1e-10)
    assert p.phi[0, 0] == pytest.approx(ex1_phi(0.0), rel=1e-12)


@pytest.mark.parametrize("model_fn", [example2, four_phase_s0])
def test_phi_finite_difference(model_fn):
    m = model_fn()
    s, h = 0.5, 1e-5
    fd = (solve_psi(m, s + h).psi - solve_psi(m, s - h).psi) / (2 * h)
    P = phi(m, solve_psi(m, s)).phi
    assert np.abs(fd - P).max() <= 1e-5 * np.abs(P).max()


def test_phi_is_nonpositive():
    # Psi is a Laplace-Stieltjes transform, so it decreases in s
    m = four_phase_s0()
    for s in (-0.1, 0.0, 1.0):
        assert (phi(m, solve_psi(m, s)).phi <= 1e-12).all()


def test_psi_monotone_in_s():
    m = example2()
    grid = np.linspace(EX2["s_star"] + 1e-3, 2.0, 12)
    psis = [solve_psi(m, s).psi for s in grid]
    for a, b in zip(psis, psis[1:]):
        assert (b <= a + 1e-12).all()


def test_phi_singular_at_fold():
    # exact fold data: K = -1, D = 1, so K X + X D = 0 has a kernel
    m = example1(3, 1)
    sol = solve_psi(m, S_STAR_EX1 + 1e-3)
    r3 = np.array([[np.sqrt(3.0)]])
    at_fold = dataclasses.replace(
        sol, s=S_STAR_EX1, psi=r3, K=np.array([[-1.0]]), D=np.array([[1.0]])
    )
    with pytest.raises(BelowCriticalError, match="at or below s\\*"):
        phi(m, at_fold)


def test_phi_requires_converged_solution():
    m = example1(3, 1)
    with pytest.raises(Exception, match="did not converge"):
        phi(m, solve_psi(m, -1.2))
