"""Comparison solvers run on the same smoothed problem and oracle budget as MSNS.

Both spend ``(N + 1) * m`` oracle calls: ``N + 1`` projected stochastic
gradient steps with batches of size ``m``.

* ``mmdsa_run`` -- mini-batch mirror-descent SA with a constant step
  ``sqrt(2 D / sigma_d) / (G_hat sqrt(N + 1))``, returning the iterate mean.
  ``G_hat`` is the root mean squared norm of 100 single-sample stochastic
  gradients at ``x0``.
* ``rspg_run`` -- randomized stochastic projected gradient with step
  ``1 / (2 L)``, returning ``x_R`` for ``R`` uniform on ``{1, ..., N}``.
"""
from __future__ import annotations

import math

import numpy as np

from .core import ProxSetup, as_point, prox_step
from .solver import RunReport, _check_feasible, _sample, _Tracer

N_GRAD_SAMPLES = 100


def _start(prox, x0):
    x = prox.center.copy() if x0 is None else as_point(x0, prox.set.dim, "x0")
    if not prox.set.contains(x):
        raise ValueError("x0 is not in the feasible set")
    return x


def estimate_grad_second_moment(oracle, x0, rng, n_samples: int = N_GRAD_SAMPLES) -> float:
    """Root mean squared norm of single-sample stochastic gradients at ``x0``."""
    sq = [float(np.sum(oracle.sample_batch(x0, 1, rng).grad ** 2)) for _ in range(n_samples)]
    return math.sqrt(float(np.mean(sq)))


def mmdsa_run(oracle, prox: ProxSetup, params, x0=None, rng_seed=None, trace_stride=None) -> RunReport:
    ball = prox.set
    x = _start(prox, x0)
    N, m = int(params.N), int(params.m)
    rng = np.random.default_rng(rng_seed)
    g_hat = estimate_grad_second_moment(oracle, x, rng)
    gamma = math.sqrt(2.0 * prox.D / prox.sigma_d) / (max(g_hat, 1e-300) * math.sqrt(N + 1))
    tracer = _Tracer(oracle, N, m, trace_stride)
    # running mean kept as x0 + mean offset, exact when the iterates never move
    x_start = x.copy()
    acc = np.zeros(ball.dim)
    calls = 0
    for k in range(N + 1):
        acc += x - x_start
        batch = _sample(oracle, x, m, rng, k)
        calls += m
        if tracer.due(k):
            _check_feasible(ball, k, x=x)
            tracer.record(k, x_start + acc / (k + 1))
        x = prox_step(ball, x, batch.grad, gamma)
    x_hat = x_start + acc / (N + 1)
    return RunReport(x_hat=x_hat, u_hat=math.nan, trace=tracer.rows, oracle_calls=calls,
                     wall_time=tracer.elapsed(), solver="mmdsa",
                     meta={"N": N, "m": m, "gamma": gamma, "G_hat": g_hat})


def rspg_run(oracle, prox: ProxSetup, params, x0=None, rng_seed=None, trace_stride=None) -> RunReport:
    """Projected stochastic gradient; the output is the iterate at a random index.

    The index ``R`` is drawn before iterating. The loop still spends the full
    budget so its trace lines up with the other solvers; ``x_R`` is kept
    when it is reached.
    """
    ball = prox.set
    x = _start(prox, x0)
    N, m, L = int(params.N), int(params.m), float(params.L_total)
    rng = np.random.default_rng(rng_seed)
    R = int(rng.integers(1, N + 1)) if N >= 1 else 0
    gamma = 1.0 / (2.0 * L)
    tracer = _Tracer(oracle, N, m, trace_stride)
    x_R = x.copy()
    calls = 0
    for k in range(N + 1):
        if k == R:
            x_R = x.copy()
        batch = _sample(oracle, x, m, rng, k)
        calls += m
        if tracer.due(k):
            _check_feasible(ball, k, x=x)
            tracer.record(k, x)
        x = prox_step(ball, x, batch.grad, gamma)
    return RunReport(x_hat=x_R, u_hat=math.nan, trace=tracer.rows, oracle_calls=calls,
                     wall_time=tracer.elapsed(), solver="rspg",
                     meta={"N": N, "m": m, "gamma": gamma, "R": R})
