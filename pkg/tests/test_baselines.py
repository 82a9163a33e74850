import math

import numpy as np
import pytest

from msns.baselines import estimate_grad_second_moment, mmdsa_run, rspg_run
from msns.core import BallSet, euclidean_prox
from msns.exceptions import SolverError
from msns.smoothing import SmoothingParams
from msns.solver import msns_run
from msns.svm import SvmOracle, covariance

from .conftest import FailingOracle, QuadraticOracle, ZeroOracle


def params(N, m=1, L=1.0):
    return SmoothingParams(mu=1.0, L_h_mu=L, L_total=L, N=N, m=m)


@pytest.mark.parametrize("run", [mmdsa_run, rspg_run])
def test_zero_gradient_keeps_start(run):
    prox = euclidean_prox(BallSet(4.0, 3))
    x0 = np.array([0.5, -1.0, 0.2])
    rep = run(ZeroOracle(3), prox, params(30, m=2), x0=x0, rng_seed=0)
    np.testing.assert_array_equal(rep.x_hat, x0)


def test_mmdsa_quadratic_1d():
    prox = euclidean_prox(BallSet(1.0, 1))
    rep = mmdsa_run(QuadraticOracle([0.3]), prox, params(4000), rng_seed=0)
    gamma = rep.meta["gamma"]
    # averaged iterate: start-up transient of order D / (gamma N) plus the O(gamma) step bias
    assert abs(rep.x_hat[0] - 0.3) <= gamma + 0.3 / (gamma * 4001)


def test_mmdsa_step_and_G_hat():
    prox = euclidean_prox(BallSet(2.0, 2))
    rep = mmdsa_run(QuadraticOracle([3.0, 4.0]), prox, params(99), rng_seed=0)
    assert math.isclose(rep.meta["G_hat"], 5.0)
    assert math.isclose(rep.meta["gamma"], math.sqrt(2 * 1.0) / (5.0 * 10))


def test_grad_second_moment_is_rms():
    g = estimate_grad_second_moment(QuadraticOracle([1.0, 2.0, 2.0]), np.zeros(3), np.random.default_rng(0))
    assert math.isclose(g, 3.0)


def test_rspg_random_index():
    prox = euclidean_prox(BallSet(4.0, 2))
    assert rspg_run(QuadraticOracle([1.0, 0.0]), prox, params(1), rng_seed=5).meta["R"] == 1
    assert rspg_run(QuadraticOracle([1.0, 0.0]), prox, params(0), rng_seed=5).meta["R"] == 0
    Rs = {rspg_run(ZeroOracle(2), prox, params(9), rng_seed=s).meta["R"] for s in range(200)}
    assert Rs == set(range(1, 10))


def test_rspg_returns_iterate_R():
    # deterministic quadratic: x_{k+1} = x_k - (x_k - c) / (2L), so x_k = c (1 - (1 - 1/(2L))^k)
    prox = euclidean_prox(BallSet(100.0, 1))
    rep = rspg_run(QuadraticOracle([2.0]), prox, params(20, L=1.0), rng_seed=11)
    R = rep.meta["R"]
    assert math.isclose(rep.x_hat[0], 2.0 * (1 - 0.5**R), rel_tol=1e-12)


@pytest.mark.parametrize("run", [mmdsa_run, rspg_run])
def test_deterministic_and_feasible(run, rng):
    Z = rng.normal(size=(100, 3))
    y = np.where(Z[:, 0] >= 0, 1.0, -1.0)
    S = covariance(Z)
    ball = BallSet(0.3, 3)
    prox = euclidean_prox(ball)
    o = SvmOracle(Z, y, 0.1, 0.5, S)
    p = SmoothingParams(mu=0.1, L_h_mu=10.0, L_total=11.0, N=200, m=4)
    a = run(o, prox, p, rng_seed=8)
    b = run(o, prox, p, rng_seed=8)
    np.testing.assert_array_equal(a.x_hat, b.x_hat)
    assert a.meta == b.meta
    assert ball.contains(a.x_hat)


def test_equal_budget_with_msns(rng):
    Z = rng.normal(size=(100, 3))
    y = np.where(Z[:, 0] >= 0, 1.0, -1.0)
    prox = euclidean_prox(BallSet(1.0, 3))
    o = SvmOracle(Z, y, 0.1, 0.5, covariance(Z))
    p = SmoothingParams(mu=0.1, L_h_mu=10.0, L_total=11.0, N=57, m=6)
    calls = {r(o, prox, p, rng_seed=1).oracle_calls for r in (msns_run, mmdsa_run, rspg_run)}
    assert calls == {58 * 6}


@pytest.mark.parametrize("run", [mmdsa_run, rspg_run])
def test_oracle_failure_carries_iteration(run):
    prox = euclidean_prox(BallSet(4.0, 2))
    o = FailingOracle(2, fail_at=100 + 3 if run is mmdsa_run else 3)  # mmdsa spends 100 calls on G_hat
    with pytest.raises(SolverError) as exc:
        run(o, prox, params(20), rng_seed=0)
    assert exc.value.k == 3
