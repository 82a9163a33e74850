"""Smoothing parameter, batch size and iteration budget selection.

Given the structure constants of the problem, the target accuracy ``eps``
fixes the iteration limit ``N``; ``N`` fixes the batch size ``m``; and both
fix the smoothing parameter ``mu``, which in turn gives the Lipschitz
constant ``L`` used by the step sizes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .core import ProxSetup

SQRT2 = math.sqrt(2.0)
C_SIX = 6.0 - SQRT2
_CEIL_NUDGE = 1e-9


def _ceil(v: float) -> int:
    # relative nudge keeps e.g. 2.0000000000000004 from rounding up to 3
    return math.ceil(v * (1.0 - _CEIL_NUDGE)) if v > 0 else math.ceil(v)


@dataclass(frozen=True)
class StructureConstants:
    """Problem constants: ``||A||``, ``Omega = max omega``, ``sigma_omega``,
    ``L_f`` and the oracle gradient-variance bound ``sigma2``."""

    A_norm: float
    Omega: float
    sigma_omega: float
    L_f: float
    sigma2: float

    def __post_init__(self):
        for name in ("A_norm", "Omega", "sigma_omega", "L_f", "sigma2"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")
        if self.Omega <= 0 or self.sigma_omega <= 0:
            raise ValueError("Omega and sigma_omega must be positive")


@dataclass(frozen=True)
class SmoothingParams:
    mu: float
    L_h_mu: float
    L_total: float
    N: int
    m: int

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.N < 0 or int(self.N) != self.N:
            raise ValueError(f"N must be a nonnegative integer, got {self.N}")
        if self.m < 1 or int(self.m) != self.m:
            raise ValueError(f"m must be a positive integer, got {self.m}")
        if not self.L_total > 0:
            raise ValueError(f"L_total must be positive, got {self.L_total}")


def _require_A(c: StructureConstants):
    if c.A_norm == 0:
        raise ValueError("degenerate linear operator: ||A|| = 0")


def iteration_budget(eps: float, c: StructureConstants, prox: ProxSetup) -> int:
    """Smallest ``N`` whose worst-case expected gap bound is below ``eps``."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    D, sd = prox.D, prox.sigma_d
    bound = (
        4.0 * C_SIX * D * c.Omega * c.A_norm**2 / (sd * c.sigma_omega) / eps**2
        + 2.0 * C_SIX * c.L_f * D / sd / eps
    )
    return max(1, _ceil(bound)) - 1


def batch_size(N: int, c: StructureConstants) -> int:
    """Mini-batch size ``ceil(sqrt(2) sigma2 sigma_omega sqrt(N+1) / (||A||^2 Omega))``, at least 1."""
    if N < 0:
        raise ValueError(f"N must be nonnegative, got {N}")
    _require_A(c)
    v = SQRT2 * c.sigma2 * c.sigma_omega * math.sqrt(N + 1) / (c.A_norm**2 * c.Omega)
    return max(1, _ceil(v))


def smoothing_parameter(N: int, m: int, c: StructureConstants, prox: ProxSetup) -> float:
    """The ``mu`` balancing the smoothing error against the optimisation error."""
    if N < 0:
        raise ValueError(f"N must be nonnegative, got {N}")
    if m < 1:
        raise ValueError(f"m must be at least 1, got {m}")
    _require_A(c)
    a2 = c.A_norm**2
    s = math.sqrt(2.0 * (N + 1))
    num = a2 * math.sqrt(C_SIX * m * prox.D)
    den = math.sqrt(2.0 * (N + 1) * prox.sigma_d * c.sigma_omega) * math.sqrt(
        m * a2 * c.Omega + s * c.sigma_omega * c.sigma2
    )
    return num / den


def lipschitz_total(mu: float, c: StructureConstants) -> tuple[float, float]:
    """Return ``(L_h_mu, L_f + L_h_mu)`` with ``L_h_mu = ||A||^2 / (mu sigma_omega)``."""
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    L_h = c.A_norm**2 / (mu * c.sigma_omega)
    return L_h, c.L_f + L_h


def gap_bound_terms(mu: float, N: int, m: int, c: StructureConstants, prox: ProxSetup):
    """The three terms of the expected-gap bound as a function of ``mu``.

    The first grows linearly in ``mu``, the second decays like ``1/mu`` and
    the third does not depend on ``mu``.
    """
    a2 = c.A_norm**2
    s = math.sqrt(2.0 * (N + 1))
    t1 = mu * (c.Omega + s * c.sigma_omega * c.sigma2 / (m * a2))
    t2 = C_SIX * a2 * prox.D / (mu * 2.0 * (N + 1) * prox.sigma_d * c.sigma_omega)
    t3 = C_SIX * c.L_f * prox.D / (2.0 * (N + 1) * prox.sigma_d)
    return t1, t2, t3


def gap_bound(N: int, c: StructureConstants, prox: ProxSetup) -> float:
    """Right-hand side of the expected-gap guarantee after ``N`` iterations."""
    sd, so = prox.sigma_d, c.sigma_omega
    return 2.0 * c.A_norm * math.sqrt(C_SIX * prox.D * c.Omega) / math.sqrt((N + 1) * sd * so) + (
        C_SIX * c.L_f * prox.D / ((N + 1) * sd)
    )


def select_parameters(
    eps: float | None,
    c: StructureConstants,
    prox: ProxSetup,
    N: int | None = None,
    m: int | None = None,
    mu: float | None = None,
) -> SmoothingParams:
    """Run the budget -> batch -> smoothing chain, honouring any overrides."""
    if N is None:
        if eps is None:
            raise ValueError("eps is required unless N is given")
        N = iteration_budget(eps, c, prox)
    if m is None:
        m = batch_size(N, c)
    if mu is None:
        mu = smoothing_parameter(N, m, c, prox)
    L_h, L = lipschitz_total(mu, c)
    return SmoothingParams(mu=float(mu), L_h_mu=L_h, L_total=L, N=int(N), m=int(m))
