"""Shared fixtures and the independent finite-difference oracles."""

import numpy as np
import pytest

from optlab import backend
from optlab.datasets import gen_synthetic
from optlab.problems import LinearModel, Problem, l2
from optlab.second_order import bfgs
from optlab.trace import StopRule


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    backend.warmup()


@pytest.fixture(scope="session")
def bench_problem():
    """The canonical strongly convex benchmark: logistic + l2, lambda 0.01,
    n = 1000, d = 20, seed 7, unit-norm feature rows."""
    data = gen_synthetic("two_gaussians", 1000, 20, seed=7, margin=2.0,
                         row_normalize=True)
    return Problem(LinearModel(), "logistic", l2(0.01), data)


@pytest.fixture(scope="session")
def bench_fstar(bench_problem):
    polish = bfgs(bench_problem, np.zeros(20),
                  stop=StopRule(max_iter=300, grad_tol=1e-12))
    assert polish.termination == "grad_tol"
    return min(r.fval for r in polish.trace)


def central_diff_gradient(problem, w, h=1e-6):
    """Independent gradient oracle: coordinatewise central differences of
    the objective value."""
    grad = np.empty_like(w)
    for i in range(w.size):
        e = np.zeros_like(w)
        e[i] = h
        grad[i] = (problem.value(w + e) - problem.value(w - e)) / (2.0 * h)
    return grad


def grad_diff_hvp(problem, w, v, eps=None):
    """Independent curvature oracle: central difference of the gradient
    along v."""
    if eps is None:
        eps = 1e-6 / max(1.0, float(np.linalg.norm(v)))
    return (problem.gradient(w + eps * v) - problem.gradient(w - eps * v)) / (2.0 * eps)


def rel_err(got, want):
    scale = 1.0 + float(np.max(np.abs(want)))
    return float(np.max(np.abs(got - want))) / scale
