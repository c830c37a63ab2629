import math

import numpy as np
import pytest
import scipy.linalg

from yaglom.numkit import (
    NumericalError,
    SingularSylvesterError,
    eigenvalues,
    expm,
    expm_frechet,
    integral_expm,
    quad,
    sylvester_operator,
    sylvester_solve,
)


def random_stable(rng, n):
    A = rng.normal(size=(n, n))
    return A - (np.abs(np.linalg.eigvals(A).real).max() + 1.0) * np.eye(n)


def test_eigenvalues_diagonal():
    sp = eigenvalues(np.diag([2.0, 3.0]))
    assert np.allclose(sorted(sp.eigenvalues.real), [2, 3])
    assert sp.dominant == 3
    assert len(sp) == 2


def test_eigenvalues_conjugate_pairs():
    A = np.array([[0.0, -2.0], [2.0, 0.0]])
    ev = eigenvalues(A).eigenvalues
    assert abs(ev[0] - np.conj(ev[1])) < 1e-10


def test_eigenvalues_rejects_nonfinite():
    with pytest.raises(ValueError):
        eigenvalues(np.array([[np.nan, 0], [0, 1.0]]))


def test_sylvester_identity():
    X = sylvester_solve(np.eye(2), np.eye(2), 2 * np.eye(2))
    assert np.allclose(X, np.eye(2))


def test_sylvester_matches_kronecker():
    rng = np.random.default_rng(1)
    A, B, C = rng.normal(size=(3, 3)), rng.normal(size=(2, 2)) + 5 * np.eye(2), rng.normal(size=(3, 2))
    A += 5 * np.eye(3)
    X = sylvester_solve(A, B, C)
    ref = np.linalg.solve(sylvester_operator(A, B), C.reshape(-1, order="F"))
    assert np.allclose(X, ref.reshape(3, 2, order="F"), atol=1e-12)


def test_sylvester_large_path_matches_scipy():
    rng = np.random.default_rng(2)
    A, B = random_stable(rng, 40), random_stable(rng, 30)
    C = rng.normal(size=(40, 30))
    X = sylvester_solve(A, B, C)
    assert np.allclose(X, scipy.linalg.solve_sylvester(A, B, C))


def test_sylvester_singular():
    with pytest.raises(SingularSylvesterError) as info:
        sylvester_solve(np.array([[-1.0]]), np.array([[1.0]]), np.array([[1.0]]))
    assert info.value.sigma_min is not None
    assert "singular Sylvester operator" in str(info.value)


def test_sylvester_shape_check():
    with pytest.raises(ValueError):
        sylvester_solve(np.eye(2), np.eye(3), np.ones((3, 2)))


def test_sylvester_reproduces_example1_phi():
    # K(s) Phi + Phi D(s) = U(s) with the closed-form Psi of the 2-phase model
    from oracles import ex1_phi, ex1_psi

    a, b, s = 3.0, 1.0, -0.2679491924311228 + 0.5
    psi = ex1_psi(s)
    K = np.array([[-(a + s) + psi * b]])
    D = np.array([[-(b + s) + b * psi]])
    U = np.array([[2 * psi]])
    X = sylvester_solve(K, D, U)
    assert X[0, 0] == pytest.approx(ex1_phi(s), rel=1e-10)


def test_expm_zero_and_identity():
    assert np.array_equal(expm(np.zeros((3, 3))), np.eye(3))
    assert np.array_equal(expm(np.ones((2, 2)), 0.0), np.eye(2))


def test_expm_semigroup():
    rng = np.random.default_rng(3)
    A = random_stable(rng, 4)
    assert np.allclose(expm(A, 1.7), expm(A, 0.5) @ expm(A, 1.2), atol=1e-10)


def test_expm_scalar_example1():
    assert expm(np.array([[-1.0]]), 2.0)[0, 0] == pytest.approx(math.exp(-2.0), rel=1e-14)


def test_expm_overflow():
    with pytest.raises(NumericalError, match="overflow"):
        expm(np.array([[1000.0]]), 1.0)


def test_expm_negative_time():
    with pytest.raises(ValueError):
        expm(np.eye(2), -1.0)


def test_frechet_zero_direction():
    assert np.array_equal(expm_frechet(np.eye(2), np.zeros((2, 2)), 1.0), np.zeros((2, 2)))


def test_frechet_finite_difference():
    rng = np.random.default_rng(4)
    A, E = rng.normal(size=(3, 3)), rng.normal(size=(3, 3))
    h = 1e-7
    fd = (expm(A + h * E, 1.3) - expm(A, 1.3)) / h
    assert np.allclose(fd, expm_frechet(A, E, 1.3), atol=1e-5)


def test_frechet_example1_H():
    beta = math.sqrt(2 * math.sqrt(3))
    for y in (0.0, 0.5, 2.0, 7.0):
        L = expm_frechet(np.array([[-1.0]]), np.array([[beta]]), y)
        assert L[0, 0] == pytest.approx(beta * y * math.exp(-y), rel=1e-12, abs=1e-300)


def test_frechet_linear_in_direction():
    rng = np.random.default_rng(5)
    A, E1, E2 = (rng.normal(size=(3, 3)) for _ in range(3))
    lhs = expm_frechet(A, 2 * E1 - 3 * E2, 0.8)
    rhs = 2 * expm_frechet(A, E1, 0.8) - 3 * expm_frechet(A, E2, 0.8)
    assert np.allclose(lhs, rhs, atol=1e-10)


def test_frechet_matches_series():
    rng = np.random.default_rng(6)
    A, E = 0.5 * rng.normal(size=(3, 3)), rng.normal(size=(3, 3))
    t = 1.1
    total = np.zeros((3, 3))
    fact = 1.0
    for n in range(1, 40):
        fact *= n
        inner = sum(
            np.linalg.matrix_power(A, i) @ E @ np.linalg.matrix_power(A, n - 1 - i)
            for i in range(n)
        )
        total += t**n / fact * inner
    assert np.allclose(total, expm_frechet(A, E, t), atol=1e-12)


def test_integral_expm_zero_matrix():
    assert np.allclose(integral_expm(np.zeros((2, 2)), 3.0), 3 * np.eye(2))


def test_integral_expm_scalar():
    assert integral_expm(np.array([[-1.0]]), 1.0)[0, 0] == pytest.approx(1 - math.exp(-1))


def test_integral_expm_invertible_closed_form():
    rng = np.random.default_rng(7)
    A = random_stable(rng, 3)
    ref = np.linalg.solve(A, expm(A, 2.0) - np.eye(3))
    assert np.allclose(integral_expm(A, 2.0), ref, atol=1e-10)


def test_integral_expm_vs_quad():
    rng = np.random.default_rng(8)
    A = random_stable(rng, 3)
    ref = quad(lambda w: expm(A, w), 0.0, 2.0)
    assert np.allclose(integral_expm(A, 2.0), ref, atol=1e-10)


def test_integral_expm_derivative():
    rng = np.random.default_rng(9)
    A = random_stable(rng, 3)
    h = 1e-6
    fd = (integral_expm(A, 1.0 + h) - integral_expm(A, 1.0 - h)) / (2 * h)
    assert np.allclose(fd, expm(A, 1.0), atol=1e-8)


def test_quad_constant():
    assert np.allclose(quad(lambda w: np.eye(2), 0.0, 3.0), 3 * np.eye(2))


def test_quad_exponentials():
    assert quad(lambda w: np.exp(-w), 0.0, 40.0) == pytest.approx(1.0, abs=1e-10)
    assert quad(lambda w: w * np.exp(-w), 0.0, 40.0) == pytest.approx(1.0, abs=1e-10)


def test_quad_reversed_and_empty():
    assert quad(lambda w: w, 1.0, 0.0) == pytest.approx(-0.5)
    assert quad(lambda w: np.ones(2), 1.0, 1.0).tolist() == [0.0, 0.0]


def test_quad_subdivision_limit():
    with pytest.raises(NumericalError, match="subintervals"):
        quad(lambda w: np.sin(1 / max(w, 1e-12)), 0.0, 1.0, tol=1e-14, max_intervals=16)
