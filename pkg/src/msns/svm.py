"""Soft-margin SVM over a Euclidean ball with a smoothed hinge loss.

The model is ``lambda1 * x' Sigma x + E[max(0, 1 - y <x, z>)]`` subject to
``||x||^2 <= t``. Each hinge term is smoothed per sample with
``omega(u) = u^2 / 2`` on ``U = [0, 1]``, so ``Omega = 1/2`` and
``sigma_omega = 1``.

Datasets are passed around as a feature matrix ``Z`` of shape
``(n_samples, n_features)`` and a label vector ``y`` with entries in
``{-1, +1}``.
"""
from __future__ import annotations

import math

import numpy as np

from .core import BallSet, ProxSetup
from .exceptions import DataError, SolverError
from .solver import OracleBatch

OMEGA = 0.5
SIGMA_OMEGA = 1.0


def _check_data(Z, y):
    Z = np.asarray(Z, dtype=float)
    y = np.asarray(y, dtype=float)
    if Z.ndim != 2 or Z.shape[0] == 0:
        raise DataError("empty dataset")
    if y.shape != (Z.shape[0],):
        raise DataError(f"labels have shape {y.shape}, expected ({Z.shape[0]},)")
    return Z, y


def covariance(Z) -> np.ndarray:
    """``(1/NS) sum z z' - (1/NS^2) (sum z)(sum z)'``, the biased sample covariance."""
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[0] == 0:
        raise DataError("empty dataset")
    ns = Z.shape[0]
    s = Z.sum(axis=0)
    sigma = (Z.T @ Z) / ns - np.outer(s, s) / ns**2
    # symmetrise away rounding asymmetry
    return 0.5 * (sigma + sigma.T)


def f_value_grad(x, lambda1: float, Sigma) -> tuple[float, np.ndarray]:
    x = np.asarray(x, dtype=float)
    Sigma = np.asarray(Sigma, dtype=float)
    if Sigma.shape != (x.shape[0], x.shape[0]):
        raise ValueError(f"Sigma has shape {Sigma.shape}, x has dimension {x.shape[0]}")
    Sx = Sigma @ x
    return float(lambda1 * (x @ Sx)), 2.0 * lambda1 * Sx


def hinge(s):
    return np.maximum(0.0, 1.0 - np.asarray(s, dtype=float))


def smoothed_hinge(s, mu: float):
    """Smoothed hinge value and its maximiser ``u`` for margins ``s``.

    ``max_{0<=u<=1} u (1 - s) - mu u^2 / 2``: zero above margin 1, quadratic
    on ``[1 - mu, 1]`` and linear (shifted down by ``mu/2``) below.
    Works elementwise on arrays; scalars in, scalars out.
    """
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    s_arr = np.asarray(s, dtype=float)
    r = 1.0 - s_arr
    u = np.clip(r / mu, 0.0, 1.0)
    value = np.where(r > mu, r - 0.5 * mu, np.where(r > 0.0, r * r / (2.0 * mu), 0.0))
    if s_arr.ndim == 0:
        return float(value), float(u)
    return value, u


def stochastic_oracle(x, Zb, yb, mu: float, lambda1: float, Sigma) -> OracleBatch:
    """Mini-batch smoothed objective value, gradient and mean hinge multiplier."""
    Zb = np.asarray(Zb, dtype=float)
    yb = np.asarray(yb, dtype=float)
    if Zb.ndim != 2 or Zb.shape[0] == 0:
        raise ValueError("empty batch")
    fv, fg = f_value_grad(x, lambda1, Sigma)
    margins = yb * (Zb @ x)
    hv, u = smoothed_hinge(margins, mu)
    m = Zb.shape[0]
    grad = fg - (Zb.T @ (u * yb)) / m
    return OracleBatch(value=fv + float(hv.mean()), grad=grad, u_mean=float(u.mean()), m=m)


def smoothed_objective(x, Z, y, mu: float, lambda1: float, Sigma) -> float:
    Z, y = _check_data(Z, y)
    fv, _ = f_value_grad(x, lambda1, Sigma)
    hv, _ = smoothed_hinge(y * (Z @ x), mu)
    return fv + float(hv.mean())


def exact_objective(x, Z, y, lambda1: float, Sigma) -> float:
    """Quadratic regulariser plus the empirical mean of the (unsmoothed) hinge."""
    Z, y = _check_data(Z, y)
    fv, _ = f_value_grad(x, lambda1, Sigma)
    return fv + float(hinge(y * (Z @ x)).mean())


def estimate_A_norm(Z, y) -> float:
    """Norm of the mean row map ``E[-y z']``, i.e. ``||mean(-y z)||_2``."""
    Z, y = _check_data(Z, y)
    return float(np.linalg.norm(-(y @ Z) / Z.shape[0]))


def sample_in_ball(rng, ball: BallSet, size: int) -> np.ndarray:
    """``size`` points uniformly distributed in ``ball`` (normal direction, ``U^(1/n)`` radius)."""
    n = ball.dim
    g = rng.standard_normal((size, n))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    r = rng.random((size, 1)) ** (1.0 / n) * math.sqrt(ball.radius_sq)
    return g / norms * r


def _hinge_grads(x, Zb, yb, mu):
    _, u = smoothed_hinge(yb * (Zb @ x), mu)
    return -(u * yb)[:, None] * Zb


def gradient_variance_at(x, Z, y, mu: float) -> float:
    """Exact ``E||g(x, xi) - grad psi_mu(x)||^2`` with ``xi`` uniform over the samples.

    The smooth quadratic part is deterministic, so only the hinge part contributes.
    """
    Z, y = _check_data(Z, y)
    G = _hinge_grads(np.asarray(x, dtype=float), Z, y, mu)
    G = G - G[0]
    return float(np.mean(np.sum((G - G.mean(axis=0)) ** 2, axis=1)))


def estimate_sigma2(Z, y, mu: float, prox: ProxSetup, rng, n_points: int = 100) -> float:
    """Average empirical gradient variance over random points of the ball.

    At each of ``n_points`` uniform points, ``max(2, ceil(NS/100))`` single-sample
    gradients are drawn with replacement and their scatter around the sample
    mean is averaged.
    """
    Z, y = _check_data(Z, y)
    ns = Z.shape[0]
    reps = max(2, math.ceil(ns / 100))
    points = sample_in_ball(rng, prox.set, n_points)
    variances = np.empty(n_points)
    for i, x in enumerate(points):
        idx = rng.integers(0, ns, size=reps)
        G = _hinge_grads(x, Z[idx], y[idx], mu)
        G = G - G[0]  # shifted data: exact zero for identical gradients
        variances[i] = np.mean(np.sum((G - G.mean(axis=0)) ** 2, axis=1))
    return float(variances.mean())


def power_iteration(M, rng=None, tol: float = 1e-10, max_iter: int = 10_000) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration.

    Stops when the Rayleigh quotient changes by at most ``tol`` relatively.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    rng = np.random.default_rng(0) if rng is None else rng
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = M @ v
        lam_new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(lam_new - lam) <= tol * abs(lam_new):
            return lam_new
        lam = lam_new
    raise SolverError(f"power iteration did not converge in {max_iter} iterations", best_value=lam)


def estimate_Lf(lambda1: float, Sigma, tol: float = 1e-10, rng=None) -> float:
    """``2 lambda1 lambda_max(Sigma)``."""
    if lambda1 < 0:
        raise ValueError(f"lambda1 must be nonnegative, got {lambda1}")
    if lambda1 == 0:
        return 0.0
    return 2.0 * lambda1 * power_iteration(Sigma, rng=rng, tol=tol)


def predict_labels(x, Z) -> np.ndarray:
    """``sign(<x, z>)`` with ties sent to ``+1``."""
    return np.where(np.asarray(Z, dtype=float) @ np.asarray(x, dtype=float) >= 0.0, 1.0, -1.0)


def predict_accuracy(x, Z, y) -> float:
    Z, y = _check_data(Z, y)
    return float(np.mean(predict_labels(x, Z) == y))


class SvmOracle:
    """Stochastic oracle sampling training rows uniformly with replacement.

    ``sample_batch`` also reports the smoothed and exact full-data objectives
    through :meth:`objectives`, which the solvers use for their traces.
    """

    def __init__(self, Z, y, mu: float, lambda1: float, Sigma):
        self.Z, self.y = _check_data(Z, y)
        if not mu > 0:
            raise ValueError(f"mu must be positive, got {mu}")
        self.mu = float(mu)
        self.lambda1 = float(lambda1)
        self.Sigma = np.asarray(Sigma, dtype=float)
        self.dim = self.Z.shape[1]

    def sample_batch(self, x, m: int, rng) -> OracleBatch:
        ns = self.Z.shape[0]
        idx = rng.integers(0, ns, size=m)
        if m < ns:
            return stochastic_oracle(x, self.Z[idx], self.y[idx], self.mu, self.lambda1, self.Sigma)
        # large batches: evaluate every row once and weight by multiplicity
        counts = np.bincount(idx, minlength=ns).astype(float)
        fv, fg = f_value_grad(x, self.lambda1, self.Sigma)
        hv, u = smoothed_hinge(self.y * (self.Z @ x), self.mu)
        w = counts / m
        grad = fg - self.Z.T @ (w * u * self.y)
        return OracleBatch(value=fv + float(w @ hv), grad=grad, u_mean=float(w @ u), m=m)

    def objectives(self, x) -> tuple[float, float]:
        fv, _ = f_value_grad(x, self.lambda1, self.Sigma)
        s = self.y * (self.Z @ x)
        hv, _ = smoothed_hinge(s, self.mu)
        return fv + float(hv.mean()), fv + float(hinge(s).mean())


def check_covariance(Sigma, tol: float = 1e-12):
    """Raise unless ``Sigma`` is symmetric and numerically PSD."""
    Sigma = np.asarray(Sigma, dtype=float)
    if Sigma.ndim != 2 or Sigma.shape[0] != Sigma.shape[1]:
        raise ValueError("Sigma must be square")
    if np.max(np.abs(Sigma - Sigma.T), initial=0.0) > tol:
        raise ValueError("Sigma is not symmetric")
    evals = np.linalg.eigvalsh(Sigma)
    if evals.size and evals[0] < -1e-8 * max(evals[-1], 0.0) - 1e-15:
        raise ValueError("Sigma is not positive semidefinite")
    return Sigma


def as_labels(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if not np.all((y == 1.0) | (y == -1.0)):
        raise DataError("labels must be -1 or +1")
    return y


__all__ = [
    "OMEGA",
    "SIGMA_OMEGA",
    "SvmOracle",
    "as_labels",
    "covariance",
    "estimate_A_norm",
    "estimate_Lf",
    "estimate_sigma2",
    "exact_objective",
    "f_value_grad",
    "gradient_variance_at",
    "hinge",
    "power_iteration",
    "predict_accuracy",
    "predict_labels",
    "sample_in_ball",
    "smoothed_hinge",
    "smoothed_objective",
    "stochastic_oracle",
]
