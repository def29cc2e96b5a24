import numpy as np
import pytest

from vpdr.lsq import levenberg_marquardt


def test_linear_problem_matches_lstsq():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(40, 3))
    y = rng.normal(size=40)
    res = levenberg_marquardt(lambda x: A @ x - y, np.zeros(3), jac=lambda x: A)
    ref, *_ = np.linalg.lstsq(A, y, rcond=None)
    assert np.allclose(res.x, ref, atol=1e-10)
    assert res.converged and not res.rank_deficient
    # covariance s^2 (A^T A)^-1
    s2 = res.cost / (40 - 3)
    assert np.allclose(res.covariance, s2 * np.linalg.inv(A.T @ A), rtol=1e-8)
    assert np.allclose(res.stderr, np.sqrt(np.diag(res.covariance)))


def test_rosenbrock_numeric_jacobian():
    res = levenberg_marquardt(lambda x: np.array([10 * (x[1] - x[0] ** 2), 1 - x[0]]), [-1.2, 1.0], max_iter=500)
    assert np.allclose(res.x, [1.0, 1.0], atol=1e-6)


def test_exponential_fit_recovers_parameters():
    t = np.linspace(0, 4, 60)
    y = 2.5 * np.exp(-1.3 * t) + 0.2

    def f(x):
        return x[0] * np.exp(-x[1] * t) + x[2] - y

    res = levenberg_marquardt(f, [1.0, 0.5, 0.0])
    assert np.allclose(res.x, [2.5, 1.3, 0.2], rtol=1e-8)
    assert res.cost < 1e-20


def test_rank_deficiency_flagged():
    A = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])
    y = np.array([1.0, 2.0, 3.0])
    res = levenberg_marquardt(lambda x: A @ x - y, [0.0, 0.0], jac=lambda x: A)
    assert res.rank_deficient
    assert res.cost < 1e-20


def test_iteration_cap_reported():
    res = levenberg_marquardt(lambda x: np.array([10 * (x[1] - x[0] ** 2), 1 - x[0]]), [-1.2, 1.0], max_iter=2)
    assert res.n_iter == 2
    assert not res.converged
    assert "maximum" in res.message


def test_never_increases_cost():
    rng = np.random.default_rng(1)
    t = np.linspace(0, 1, 30)
    y = np.sin(7 * t) + 0.01 * rng.normal(size=30)
    f = lambda x: np.sin(x[0] * t) - y  # noqa: E731
    x0 = np.array([6.0])
    res = levenberg_marquardt(f, x0)
    assert res.cost <= float(f(x0) @ f(x0))
    assert res.x[0] == pytest.approx(7.0, abs=0.05)
