import numpy as np
import pytest

from aionfit.errors import InputError
from aionfit.lbfgs import LbfgsOptions, lbfgs_minimize


def quadratic_about(center):
    def fun(x):
        d = x - center
        return float(d @ d), 2.0 * d

    return fun


def rosenbrock(x):
    a, b = 1.0, 100.0
    f = (a - x[0]) ** 2 + b * (x[1] - x[0] ** 2) ** 2
    g = np.array(
        [
            -2.0 * (a - x[0]) - 4.0 * b * x[0] * (x[1] - x[0] ** 2),
            2.0 * b * (x[1] - x[0] ** 2),
        ]
    )
    return float(f), g


def test_quadratic_converges_quickly():
    center = np.array([1.0, -2.0, 3.0, 0.5])
    result = lbfgs_minimize(quadratic_about(center), np.zeros(4), LbfgsOptions(max_iterations=20))
    assert result.converged
    assert result.iterations <= 20
    assert np.linalg.norm(result.x - center) < 1e-8


def test_rosenbrock_from_classic_start():
    result = lbfgs_minimize(
        rosenbrock, np.array([-1.2, 1.0]), LbfgsOptions(max_iterations=200)
    )
    assert result.value < 1e-6


def test_zero_gradient_start_returns_immediately():
    def flat(x):
        return 1.0, np.zeros_like(x)

    start = np.array([3.0, -1.0])
    result = lbfgs_minimize(flat, start)
    assert result.converged
    assert result.iterations == 0
    assert np.array_equal(result.x, start)
    assert result.trace == [1.0]


def test_trace_is_non_increasing():
    rng = np.random.default_rng(0)
    for seed in range(5):
        mat = rng.normal(size=(6, 6))
        quad = mat @ mat.T + 0.1 * np.eye(6)
        lin = rng.normal(size=6)

        def fun(x, quad=quad, lin=lin):
            return float(0.5 * x @ quad @ x + lin @ x + np.sum(np.cos(x))), (
                quad @ x + lin - np.sin(x)
            )

        result = lbfgs_minimize(fun, rng.normal(size=6), LbfgsOptions(max_iterations=50))
        diffs = np.diff(result.trace)
        assert np.all(diffs <= 0.0)


def test_iteration_budget_is_respected():
    result = lbfgs_minimize(
        rosenbrock, np.array([-1.2, 1.0]), LbfgsOptions(max_iterations=5)
    )
    assert result.iterations == 5
    assert len(result.trace) == 6  # start value plus one per accepted iteration


def test_non_finite_start_raises():
    def bad(x):
        return float("nan"), np.zeros_like(x)

    with pytest.raises(InputError):
        lbfgs_minimize(bad, np.zeros(2))


def test_options_validation():
    with pytest.raises(InputError):
        LbfgsOptions(step_scale=0.0)
    with pytest.raises(InputError):
        LbfgsOptions(wolfe_c1=0.5, wolfe_c2=0.4)


def test_best_iterate_returned_on_line_search_failure():
    # A function whose gradient is wrong on purpose beyond a threshold makes
    # the line search fail eventually; the best accepted iterate must win.
    calls = {"n": 0}

    def tricky(x):
        calls["n"] += 1
        f = float(x @ x)
        g = 2.0 * x if f > 1e-12 else np.full_like(x, 10.0)  # inconsistent near 0
        return f, g

    result = lbfgs_minimize(tricky, np.array([2.0, 1.0]), LbfgsOptions(max_iterations=100))
    assert result.value <= tricky(np.array([2.0, 1.0]))[0]
    assert np.all(np.diff(result.trace) <= 0.0)
