"""Feasible set, prox machinery and the step-size schedule.

The feasible set is the Euclidean ball ``{x : ||x||^2 <= t}`` and the
prox-function is ``d(x) = ||x||^2 / 2`` centred at the origin. Every
subproblem of the solvers then has a closed form: a gradient step followed
by radial scaling back onto the ball.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FEAS_TOL = 1e-12


def as_point(x, dim: int | None = None, name: str = "x") -> np.ndarray:
    """Validate ``x`` as a finite 1-D float vector (of length ``dim`` if given)."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"{name} has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class BallSet:
    """The ball ``{x in R^dim : sum(x_i^2) <= radius_sq}``."""

    radius_sq: float
    dim: int

    def __post_init__(self):
        if not (math.isfinite(self.radius_sq) and self.radius_sq > 0):
            raise ValueError(f"radius_sq must be positive and finite, got {self.radius_sq}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")

    def contains(self, x, tol: float = FEAS_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        return x.shape == (self.dim,) and float(x @ x) <= self.radius_sq + tol


@dataclass(frozen=True)
class ProxSetup:
    """Prox-function data: strong-convexity modulus, its bound over the set and its centre."""

    set: BallSet
    sigma_d: float
    D: float
    center: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.sigma_d <= 0 or self.D <= 0:
            raise ValueError("sigma_d and D must be positive")
        center = as_point(self.center, self.set.dim, "center")
        center.setflags(write=False)
        object.__setattr__(self, "center", center)

    def d(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return 0.5 * float(x @ x)


def euclidean_prox(ball: BallSet) -> ProxSetup:
    """``d(x) = ||x||^2/2`` on ``ball``: modulus 1, centre 0, ``D = t/2``."""
    return ProxSetup(set=ball, sigma_d=1.0, D=ball.radius_sq / 2.0, center=np.zeros(ball.dim))


def project(ball: BallSet, p) -> np.ndarray:
    """Euclidean projection of ``p`` onto ``ball`` (exact radial scaling)."""
    p = as_point(p, ball.dim, "p")
    sq = float(p @ p)
    # slack absorbs the rounding of a previous radial scaling, so projection is idempotent
    if sq <= ball.radius_sq + FEAS_TOL * min(1.0, ball.radius_sq):
        return p.copy()
    return p * (math.sqrt(ball.radius_sq) / math.sqrt(sq))


def prox_step(ball: BallSet, x, g, gamma: float) -> np.ndarray:
    """Minimise ``<g, y> + ||y - x||^2 / (2 gamma)`` over the ball."""
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    x = as_point(x, ball.dim, "x")
    g = as_point(g, ball.dim, "g")
    return project(ball, x - gamma * g)


def generalized_projected_gradient(ball: BallSet, x, g, gamma: float) -> np.ndarray:
    """``(x - x') / gamma`` where ``x'`` is the :func:`prox_step` from ``x``."""
    x = as_point(x, ball.dim, "x")
    return (x - prox_step(ball, x, g, gamma)) / gamma


@dataclass(frozen=True)
class Schedule:
    k: int
    alpha_k: float
    A_k: float
    tau_k: float
    gamma_k: float
    L: float


def schedule_at(k: int, L: float) -> Schedule:
    """Constant-weight schedule: ``alpha = 1/2``, ``A_k = (k+1)/2``,
    ``tau_k = 1/(k+2)`` and ``gamma_k = sqrt(2) / (L sqrt(k+1))``."""
    if int(k) != k or k < 0:
        raise ValueError(f"k must be a nonnegative integer, got {k}")
    if not (L > 0 and math.isfinite(L)):
        raise ValueError(f"L must be positive, got {L}")
    k = int(k)
    return Schedule(
        k=k,
        alpha_k=0.5,
        A_k=(k + 1) / 2.0,
        tau_k=1.0 / (k + 2),
        gamma_k=math.sqrt(2.0) / (L * math.sqrt(k + 1)),
        L=float(L),
    )
