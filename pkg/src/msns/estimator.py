"""scikit-learn compatible classifier wrapping the estimate -> budget -> solve pipeline."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import check_classification_targets, type_of_target
from sklearn.utils.validation import check_is_fitted, validate_data

from . import svm
from .baselines import mmdsa_run, rspg_run
from .core import BallSet, euclidean_prox
from .smoothing import (
    SmoothingParams,
    StructureConstants,
    batch_size,
    iteration_budget,
    lipschitz_total,
    select_parameters,
    smoothing_parameter,
)
from .solver import duality_gap, msns_run

SOLVERS = ("msns", "mmdsa", "rspg")


@dataclass(frozen=True)
class ProblemEstimates:
    """Data-derived quantities, reported alongside a run."""

    Sigma_norm: float
    A_norm: float
    sigma2: float
    L_f: float


def derive_parameters(Z, y, eps, lambda1, t, rng, N=None, m=None, mu=None):
    """Estimate the structure constants from training data and pick ``(N, m, mu)``.

    The gradient-variance bound depends on ``mu`` and ``mu`` depends on it, so
    the variance is first estimated at ``mu0 = eps``, ``(N, m, mu)`` are
    derived, the variance is re-estimated once at that ``mu`` and ``m`` and
    ``mu`` are recomputed. Explicit ``N``, ``m`` or ``mu`` override the
    corresponding step.

    Returns
    -------
    Sigma : ndarray
    constants : StructureConstants
    params : SmoothingParams
    estimates : ProblemEstimates
    """
    rng = np.random.default_rng(rng)
    prox = euclidean_prox(BallSet(float(t), Z.shape[1]))
    Sigma = svm.covariance(Z)
    lam_max = svm.power_iteration(Sigma, rng=rng)
    L_f = 2.0 * lambda1 * lam_max
    A_norm = svm.estimate_A_norm(Z, y)
    if A_norm == 0:
        raise ValueError("degenerate linear operator: ||A|| = 0")

    def constants(sigma2):
        return StructureConstants(A_norm=A_norm, Omega=svm.OMEGA, sigma_omega=svm.SIGMA_OMEGA,
                                  L_f=L_f, sigma2=sigma2)

    if mu is not None:
        sigma2 = svm.estimate_sigma2(Z, y, mu, prox, rng)
        c = constants(sigma2)
        params = select_parameters(eps, c, prox, N=N, m=m, mu=mu)
    else:
        mu0 = eps if eps is not None else 1.0
        c = constants(svm.estimate_sigma2(Z, y, mu0, prox, rng))
        N_ = iteration_budget(eps, c, prox) if N is None else int(N)
        m_ = batch_size(N_, c) if m is None else int(m)
        mu_ = smoothing_parameter(N_, m_, c, prox)
        c = constants(svm.estimate_sigma2(Z, y, mu_, prox, rng))
        m_ = batch_size(N_, c) if m is None else int(m)
        mu_ = smoothing_parameter(N_, m_, c, prox)
        L_h, L = lipschitz_total(mu_, c)
        params = SmoothingParams(mu=mu_, L_h_mu=L_h, L_total=L, N=N_, m=m_)
    est = ProblemEstimates(Sigma_norm=lam_max, A_norm=A_norm, sigma2=c.sigma2, L_f=L_f)
    return Sigma, c, params, est


class MSNSClassifier(ClassifierMixin, BaseEstimator):
    """Linear SVM trained by mini-batch stochastic Nesterov smoothing.

    Minimises ``lambda1 * w' Sigma w + mean(max(0, 1 - y <w, z>))`` over the
    ball ``||w||^2 <= t``, where ``Sigma`` is the covariance of the training
    features. The iteration limit, batch size and smoothing parameter are
    derived from ``eps`` unless given explicitly.

    Parameters
    ----------
    eps : float, default=0.1
        Target accuracy of the expected primal-dual gap.
    lambda1 : float, default=0.5
    t : float, default=10.0
        Squared radius of the feasible ball.
    solver : {"msns", "mmdsa", "rspg"}, default="msns"
        ``mmdsa`` and ``rspg`` are baselines run on the same smoothed
        problem with the same oracle budget.
    N, m, mu : optional
        Overrides for the iteration limit, batch size and smoothing parameter.
    x0 : array-like, optional
        Starting point; defaults to the origin.
    trace_stride : int, optional
    compute_gap : bool, default=False
        Also evaluate the duality gap of the MSNS output on the training set.
    random_state : int, SeedSequence or None

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
    classes_ : ndarray of shape (2,)
        ``classes_[1]`` plays the role of the ``+1`` label.
    params_ : SmoothingParams
    constants_ : StructureConstants
    estimates_ : ProblemEstimates
    report_ : RunReport
    """

    def __init__(self, eps=0.1, lambda1=0.5, t=10.0, solver="msns", N=None, m=None, mu=None,
                 x0=None, trace_stride=None, compute_gap=False, random_state=None):
        self.eps = eps
        self.lambda1 = lambda1
        self.t = t
        self.solver = solver
        self.N = N
        self.m = m
        self.mu = mu
        self.x0 = x0
        self.trace_stride = trace_stride
        self.compute_gap = compute_gap
        self.random_state = random_state

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.classifier_tags.multi_class = False
        return tags

    def _signed_labels(self, y):
        check_classification_targets(y)
        y_type = type_of_target(y, input_name="y")
        if y_type not in ("binary", "unary"):
            raise ValueError(f"Only binary classification is supported. The type of the target is {y_type}.")
        self.classes_ = np.unique(y)
        if len(self.classes_) == 1 and self.classes_[0] in (-1, 1):
            self.classes_ = np.array([-1, 1], dtype=self.classes_.dtype)
        if len(self.classes_) != 2:
            raise ValueError(f"binary labels required, got classes {self.classes_}")
        return np.where(y == self.classes_[1], 1.0, -1.0)

    def fit(self, X, y):
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if self.eps is None and self.N is None:
            raise ValueError("eps is required unless N is given")
        X, y = validate_data(self, X, y, dtype=float)
        ys = self._signed_labels(y)
        seq = self.random_state if isinstance(self.random_state, np.random.SeedSequence) \
            else np.random.SeedSequence(self.random_state)
        est_seq, run_seq = seq.spawn(2)
        Sigma, c, params, est = derive_parameters(X, ys, self.eps, self.lambda1, self.t, est_seq,
                                                  N=self.N, m=self.m, mu=self.mu)
        prox = euclidean_prox(BallSet(float(self.t), X.shape[1]))
        oracle = svm.SvmOracle(X, ys, params.mu, self.lambda1, Sigma)
        run = {"msns": msns_run, "mmdsa": mmdsa_run, "rspg": rspg_run}[self.solver]
        report = run(oracle, prox, params, x0=self.x0, rng_seed=run_seq, trace_stride=self.trace_stride)
        if self.compute_gap and self.solver == "msns":
            report.gap = duality_gap(report.x_hat, report.u_hat, X, ys, self.lambda1, Sigma, prox.set,
                                     lam_max=est.Sigma_norm)
        self.Sigma_ = Sigma
        self.params_ = params
        self.constants_ = c
        self.estimates_ = est
        self.report_ = report
        self.coef_ = report.x_hat
        return self

    def decision_function(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, reset=False, dtype=float)
        return X @ self.coef_

    def predict(self, X):
        return np.where(self.decision_function(X) >= 0.0, self.classes_[1], self.classes_[0])

    def objective(self, X, y):
        """Exact (unsmoothed) objective on ``(X, y)`` using the training covariance."""
        check_is_fitted(self)
        X = validate_data(self, X, reset=False, dtype=float)
        ys = np.where(np.asarray(y) == self.classes_[1], 1.0, -1.0)
        return svm.exact_objective(self.coef_, X, ys, self.lambda1, self.Sigma_)
