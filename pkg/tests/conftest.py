import math

import numpy as np
import pytest

from msns.solver import OracleBatch

ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


def disc_grid(t, h):
    """Cartesian points of spacing ``h`` inside the disc ``||x||^2 <= t`` plus
    boundary points at arc spacing ``h / 10``."""
    r = math.sqrt(t)
    ax = np.arange(-r, r + h, h)
    X, Y = np.meshgrid(ax, ax)
    P = np.column_stack([X.ravel(), Y.ravel()])
    P = P[np.einsum("ij,ij->i", P, P) <= t]
    theta = np.arange(0.0, 2 * np.pi, h / (10 * r))
    B = r * np.column_stack([np.cos(theta), np.sin(theta)])
    return np.vstack([P, B])


def grid_argmin(fun, points):
    """``fun`` maps an (k, 2) array to k values; returns (argmin point, min value)."""
    vals = fun(points)
    i = int(np.argmin(vals))
    return points[i], float(vals[i])


class ZeroOracle:
    """Noiseless oracle with zero value and gradient everywhere."""

    def __init__(self, dim):
        self.dim = dim
        self.calls = 0

    def sample_batch(self, x, m, rng):
        self.calls += m
        return OracleBatch(value=0.0, grad=np.zeros(self.dim), u_mean=0.0, m=m)

    def objectives(self, x):
        return 0.0, 0.0


class QuadraticOracle:
    """Deterministic ``0.5 ||x - c||^2``."""

    def __init__(self, c):
        self.c = np.asarray(c, dtype=float)
        self.calls = 0

    def sample_batch(self, x, m, rng):
        self.calls += m
        d = x - self.c
        return OracleBatch(value=0.5 * float(d @ d), grad=d, u_mean=0.0, m=m)

    def objectives(self, x):
        d = x - self.c
        v = 0.5 * float(d @ d)
        return v, v


class FullBatchOracle:
    """Wraps an SvmOracle and always returns the full-data gradient (noiseless)."""

    def __init__(self, svm_oracle):
        self.inner = svm_oracle

    def sample_batch(self, x, m, rng):
        from msns.svm import stochastic_oracle

        o = self.inner
        b = stochastic_oracle(x, o.Z, o.y, o.mu, o.lambda1, o.Sigma)
        return OracleBatch(value=b.value, grad=b.grad, u_mean=b.u_mean, m=m)

    def objectives(self, x):
        return self.inner.objectives(x)


class FailingOracle:
    def __init__(self, dim, fail_at):
        self.dim, self.fail_at, self.k = dim, fail_at, 0

    def sample_batch(self, x, m, rng):
        if self.k == self.fail_at:
            raise RuntimeError("sensor offline")
        self.k += 1
        return OracleBatch(value=0.0, grad=np.ones(self.dim), u_mean=0.5, m=m)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_synthetic():
    from msns.data import generate_synthetic

    return generate_synthetic(10, 300, 500, 10.0, 7)
