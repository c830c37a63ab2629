"""Randomized property checks (hypothesis)."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from yaglom.model import FluidModel, stability
from yaglom.numkit import (
    SingularSylvesterError,
    expm,
    expm_frechet,
    sylvester_operator,
    sylvester_solve,
)
from yaglom.riccati import phi, riccati_residual, solve_psi

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(1, 4), st.integers(1, 4))
def test_sylvester_matches_kronecker(seed, n, m):
    rng = np.random.default_rng(seed)
    A, B, C = rng.normal(size=(n, n)), rng.normal(size=(m, m)), rng.normal(size=(n, m))
    L = sylvester_operator(A, B)
    sv = np.linalg.svd(L, compute_uv=False)
    if sv[-1] < 1e-3 * sv[0]:
        return
    X = sylvester_solve(A, B, C)
    ref = np.linalg.solve(L, C.reshape(-1, order="F")).reshape(n, m, order="F")
    assert np.abs(X - ref).max() <= 1e-9 * max(1.0, np.abs(ref).max())


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 3))
def test_sylvester_singular_detected(seed, n):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n))
    try:
        sylvester_solve(A, -A, rng.normal(size=(n, n)))
    except SingularSylvesterError:
        return
    raise AssertionError("A X - X A has a kernel and must be reported singular")


@settings(max_examples=30, deadline=None)
@given(seeds, st.floats(-2, 2), st.floats(0.0, 3.0))
def test_frechet_linear(seed, alpha, t):
    rng = np.random.default_rng(seed)
    A, E1, E2 = (rng.normal(size=(3, 3)) for _ in range(3))
    lhs = expm_frechet(A, alpha * E1 + E2, t)
    rhs = alpha * expm_frechet(A, E1, t) + expm_frechet(A, E2, t)
    assert np.allclose(lhs, rhs, atol=1e-9 * (1 + np.abs(rhs).max()))


@settings(max_examples=30, deadline=None)
@given(seeds, st.floats(0.1, 2.0))
def test_frechet_commuting_direction(seed, t):
    # when E = A the derivative is t A exp(A t)
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(3, 3))
    assert np.allclose(expm_frechet(A, A, t), t * A @ expm(A, t), atol=1e-9 * (1 + np.abs(A).max()) ** 2 * np.exp(3 * t))


@st.composite
def stable_models(draw):
    seed = draw(seeds)
    n = draw(st.integers(2, 5))
    rng = np.random.default_rng(seed)
    T = rng.uniform(0.2, 2.0, size=(n, n))
    np.fill_diagonal(T, 0.0)
    np.fill_diagonal(T, -T.sum(axis=1))
    c = rng.choice([-2.0, -1.0, 0.0, 1.0, 0.5], size=n)
    c[0], c[1] = 1.0, -1.0
    m = FluidModel(T, c)
    drift = stability(m).drift
    if drift >= -1e-3:
        # shift a negative phase down to enforce stability
        c[1] -= (drift + 0.1) / stability(m).xi[1]
        m = FluidModel(T, c)
    return m


@settings(max_examples=25, deadline=None)
@given(stable_models(), st.floats(0.0, 2.0))
def test_psi_is_a_substochastic_riccati_root(m, s):
    sol = solve_psi(m, s)
    assert sol.converged
    assert np.abs(riccati_residual(sol.blocks, sol.psi)).max() <= 1e-10
    assert (sol.psi >= -1e-12).all()
    assert (sol.psi.sum(axis=1) <= 1 + 1e-9).all()
    if s == 0.0:
        assert np.allclose(sol.psi.sum(axis=1), 1.0, atol=1e-8)


@settings(max_examples=15, deadline=None)
@given(stable_models(), st.floats(0.05, 1.0))
def test_phi_matches_finite_difference(m, s):
    h = 1e-5
    fd = (solve_psi(m, s + h).psi - solve_psi(m, s - h).psi) / (2 * h)
    P = phi(m, solve_psi(m, s)).phi
    assert np.abs(fd - P).max() <= 1e-5 * max(1.0, np.abs(P).max())
