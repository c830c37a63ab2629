import numpy as np
import pytest

from yaglom.generator import AdmissibilityError, a_blocks, q_blocks, t00_abscissa
from yaglom.model import example1, example2
from conftest import four_phase_s0


def test_example1_s0():
    q = q_blocks(example1(3, 1), 0.0)
    assert np.allclose(q.Q, [[-3, 3], [1, -1]])
    assert q.R00.shape == (0, 0)


def test_example1_shift():
    q = q_blocks(example1(3, 1), -0.1)
    assert q.Q11[0, 0] == pytest.approx(-2.9)
    assert q.Q22[0, 0] == pytest.approx(-0.9)


def test_example2_s0():
    q = q_blocks(example2(2.5), 0.0)
    assert q.Q11.tolist() == [[-5.0]]
    assert q.Q12.tolist() == [[5.0, 0.0]]
    assert q.Q21.tolist() == [[1.0], [0.0]]
    assert np.allclose(q.Q22, [[-3.5, 2.5], [2, -2]])


def test_a_blocks_without_zero_phases():
    A = a_blocks(example1(3, 1), -0.2)
    assert A.A11.tolist() == [[1.0]] and A.A22.tolist() == [[1.0]]
    assert A.A12.tolist() == [[0.0]] and A.A21.tolist() == [[0.0]]
    A = a_blocks(example2(), -1.0)
    assert np.array_equal(A.A22, np.eye(2)) and not A.A12.any() and not A.A21.any()


def test_zero_rate_model_signs():
    m = four_phase_s0()
    for s in (-3.0, -0.5, 0.0, 2.0):
        q = q_blocks(m, s)
        assert (q.Q12 >= 0).all() and (q.Q21 >= 0).all()
        assert (q.R00 >= 0).all()
        A = a_blocks(m, s)
        for blk in (A.A11, A.A12, A.A21, A.A22):
            assert (blk >= 0).all()


@pytest.mark.parametrize("s", [-5.0, -0.3, 0.0, 1.5])
def test_finite_difference_a_blocks(s):
    m = four_phase_s0()
    h = 1e-6
    lo, hi = q_blocks(m, s - h), q_blocks(m, s + h)
    A = a_blocks(m, s)
    for name in ("11", "12", "21", "22"):
        fd = -(getattr(hi, "Q" + name) - getattr(lo, "Q" + name)) / (2 * h)
        ref = getattr(A, "A" + name)
        assert np.allclose(fd, ref, rtol=1e-4, atol=1e-8), name


def test_forward_difference_q22():
    m = four_phase_s0()
    s, h = 0.0, 1e-6
    fd = (q_blocks(m, s).Q22 - q_blocks(m, s + h).Q22) / h
    assert np.allclose(fd, a_blocks(m, s).A22, rtol=1e-4)


def test_resolvent_matches_laplace_integral():
    from yaglom.numkit import expm, quad

    m = four_phase_s0()
    s = -2.0
    ref = quad(lambda t: np.exp(-s * t) * expm(m.T00, t), 0.0, 20.0)
    assert np.allclose(q_blocks(m, s).R00, ref, atol=1e-9)


def test_admissibility():
    m = four_phase_s0()
    assert t00_abscissa(m) == pytest.approx(-10.0)
    with pytest.raises(AdmissibilityError, match="s below T00 abscissa"):
        q_blocks(m, -10.0)
    with pytest.raises(AdmissibilityError):
        a_blocks(m, -11.0)
    assert t00_abscissa(example1()) == -np.inf
