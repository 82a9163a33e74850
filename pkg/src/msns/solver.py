"""Mini-batch stochastic Nesterov smoothing: the three-sequence iteration.

Each iteration draws one mini-batch at ``x_k`` and then

* ``y_k``  -- a projected gradient step from ``x_k`` with ``gamma_k``;
* ``z_k``  -- the minimiser of the prox-function plus the accumulated
  linear models (a projected, scaled negative gradient sum);
* ``x_{k+1}`` -- the convex combination ``tau_k z_k + (1 - tau_k) y_k``.

The output is ``y_N``. The batch-mean hinge multipliers are averaged over
the iterates to give a dual point, which certifies the gap.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import NamedTuple, Protocol

import numpy as np

from .core import BallSet, ProxSetup, Schedule, as_point, prox_step, project, schedule_at
from .exceptions import SolverError


@dataclass(frozen=True)
class OracleBatch:
    """Batch-averaged stochastic value, gradient and hinge multiplier."""

    value: float
    grad: np.ndarray
    u_mean: float
    m: int


class StochasticOracle(Protocol):
    def sample_batch(self, x: np.ndarray, m: int, rng: np.random.Generator) -> OracleBatch: ...

    def objectives(self, x: np.ndarray) -> tuple[float, float]:
        """``(smoothed, exact)`` full-data objective at ``x``, used for traces."""
        ...


class TraceRow(NamedTuple):
    k: int
    oracle_calls: int
    wall_time_s: float
    smoothed_train_obj: float
    exact_train_obj: float


TRACE_HEADER = TraceRow._fields


@dataclass
class RunReport:
    x_hat: np.ndarray
    u_hat: float
    trace: list[TraceRow]
    oracle_calls: int
    wall_time: float
    gap: float | None = None
    solver: str = "msns"
    meta: dict = field(default_factory=dict)


@dataclass
class MsnsState:
    k: int
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    G: np.ndarray
    u_bar_acc: float
    L: float


def default_stride(N: int) -> int:
    return max(1, math.ceil((N + 1) / 500))


class _Tracer:
    """Records trace rows at a stride; time spent evaluating objectives is excluded."""

    def __init__(self, oracle, N: int, m: int, stride: int | None):
        self.oracle = oracle
        self.N = N
        self.m = m
        self.stride = default_stride(N) if stride is None else int(stride)
        if self.stride < 1:
            raise ValueError("trace stride must be at least 1")
        self.rows: list[TraceRow] = []
        self.start = time.perf_counter()
        self.excluded = 0.0

    def due(self, k: int) -> bool:
        return k % self.stride == 0 or k == self.N

    def record(self, k: int, point):
        now = time.perf_counter()
        objectives = getattr(self.oracle, "objectives", None)
        sm, ex = objectives(point) if objectives is not None else (math.nan, math.nan)
        self.rows.append(TraceRow(k, (k + 1) * self.m, now - self.start - self.excluded, sm, ex))
        self.excluded += time.perf_counter() - now

    def elapsed(self) -> float:
        return time.perf_counter() - self.start - self.excluded


def _sample(oracle, x, m, rng, k) -> OracleBatch:
    try:
        batch = oracle.sample_batch(x, m, rng)
    except Exception as exc:
        raise SolverError(f"oracle failed at iteration k={k}: {exc}", k=k) from exc
    if batch.m != m or not np.all(np.isfinite(batch.grad)) or not math.isfinite(batch.value):
        raise SolverError(f"oracle returned an invalid batch at iteration k={k}", k=k)
    return batch


def _check_feasible(ball: BallSet, k: int, **points):
    for name, p in points.items():
        if not ball.contains(p):
            raise SolverError(f"iterate {name} left the feasible set at k={k}", k=k)


def y_step(state: MsnsState, batch: OracleBatch, sched: Schedule, prox: ProxSetup) -> np.ndarray:
    """Projected gradient step from ``x_k`` with step ``gamma_k``."""
    return prox_step(prox.set, state.x, batch.grad, sched.gamma_k)


def z_step(state: MsnsState, prox: ProxSetup) -> np.ndarray:
    """Minimiser over the ball of ``(L/sigma_d) d(x) + <G, x>``.

    For the Euclidean prox-function this is the projection of
    ``center - (sigma_d / L) G``. The affine constants of the accumulated
    models are dropped since they do not move the minimiser.
    """
    if not state.L > 0:
        raise ValueError(f"L must be positive, got {state.L}")
    return project(prox.set, prox.center - (prox.sigma_d / state.L) * state.G)


def x_step(z, y, tau_k: float) -> np.ndarray:
    z = as_point(z, name="z")
    y = as_point(y, len(z), "y")
    if not 0 < tau_k <= 1:
        raise ValueError(f"tau_k must lie in (0, 1], got {tau_k}")
    return tau_k * z + (1.0 - tau_k) * y


def msns_run(oracle, prox: ProxSetup, params, x0=None, rng_seed=None, trace_stride=None) -> RunReport:
    """Run ``N + 1`` iterations of the mini-batch smoothing method.

    Parameters
    ----------
    oracle : StochasticOracle
    prox : ProxSetup
    params : SmoothingParams
        Supplies ``N``, ``m`` and the Lipschitz constant ``L_total``.
    x0 : array-like, optional
        Starting point in the ball; defaults to the prox centre.
    rng_seed : int, SeedSequence or Generator
    trace_stride : int, optional
        Record a trace row every ``trace_stride`` iterations (and at ``N``).

    Returns
    -------
    RunReport
        ``x_hat = y_N`` and ``u_hat``, the multiplier averaged over iterates.
    """
    ball = prox.set
    x = prox.center.copy() if x0 is None else as_point(x0, ball.dim, "x0")
    if not ball.contains(x):
        raise ValueError("x0 is not in the feasible set")
    N, m, L = int(params.N), int(params.m), float(params.L_total)
    rng = np.random.default_rng(rng_seed)
    state = MsnsState(k=0, x=x, y=x, z=x, G=np.zeros(ball.dim), u_bar_acc=0.0, L=L)
    tracer = _Tracer(oracle, N, m, trace_stride)
    calls = 0
    for k in range(N + 1):
        state.k = k
        batch = _sample(oracle, state.x, m, rng, k)
        calls += m
        sched = schedule_at(k, L)
        state.y = y_step(state, batch, sched, prox)
        state.G = state.G + sched.alpha_k * batch.grad
        state.u_bar_acc += batch.u_mean
        state.z = z_step(state, prox)
        if tracer.due(k):
            _check_feasible(ball, k, x=state.x, y=state.y, z=state.z)
            tracer.record(k, state.y)
        if k < N:
            state.x = x_step(state.z, state.y, sched.tau_k)
    u_hat = min(1.0, max(0.0, state.u_bar_acc / (N + 1)))
    return RunReport(
        x_hat=state.y,
        u_hat=u_hat,
        trace=tracer.rows,
        oracle_calls=calls,
        wall_time=tracer.elapsed(),
        solver="msns",
        meta={"N": N, "m": m, "L": L},
    )


def dual_value(u_hat: float, Z, y, lambda1: float, Sigma, ball: BallSet, tol: float = 1e-8,
               max_iter: int = 100_000, lam_max: float | None = None) -> float:
    """Dual function of the SVM at scalar ``u_hat``.

    ``min_{x in ball} lambda1 x' Sigma x + u_hat (1 - mean(y z)' x)``, solved by
    projected gradient with step ``1 / (2 lambda1 lambda_max(Sigma) + 1e-12)``
    until the projected-gradient norm drops below ``tol``.
    """
    from .svm import power_iteration

    if not 0.0 <= u_hat <= 1.0:
        raise ValueError(f"u_hat must lie in [0, 1], got {u_hat}")
    Z = np.asarray(Z, dtype=float)
    y = np.asarray(y, dtype=float)
    Sigma = np.asarray(Sigma, dtype=float)
    a_bar = (y @ Z) / Z.shape[0]
    if lam_max is None:
        lam_max = power_iteration(Sigma) if lambda1 > 0 else 0.0
    step = 1.0 / (2.0 * lambda1 * lam_max + 1e-12)

    def value(x):
        return float(lambda1 * (x @ (Sigma @ x)) + u_hat * (1.0 - a_bar @ x))

    x = np.zeros(ball.dim)
    best = value(x)
    for _ in range(max_iter):
        g = 2.0 * lambda1 * (Sigma @ x) - u_hat * a_bar
        x_new = project(ball, x - step * g)
        best = min(best, value(x_new))
        if np.linalg.norm(x - x_new) / step <= tol:
            return min(best, value(x_new))
        x = x_new
    raise SolverError(f"dual subproblem did not converge in {max_iter} iterations", best_value=best)


def duality_gap(x_hat, u_hat: float, Z, y, lambda1: float, Sigma, ball: BallSet, tol: float = 1e-8,
                lam_max: float | None = None) -> float:
    """Exact (nonsmooth) primal objective at ``x_hat`` minus the dual value at ``u_hat``."""
    from .svm import exact_objective

    primal = exact_objective(x_hat, Z, y, lambda1, Sigma)
    return primal - dual_value(u_hat, Z, y, lambda1, Sigma, ball, tol=tol, lam_max=lam_max)
