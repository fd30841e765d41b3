"""Weight-function calculus for Maronna-type scatter estimators.

A weight function ``u`` is continuous, non-increasing and positive on
[0, inf), with ``phi(x) = x * u(x)`` strictly increasing and bounded by
``phi_inf``.  Two families are supported:

* Student: ``u(x) = (1 + t) / (t + x)``
* Huber:   ``u(x) = min(1, (1 + t) / (t + x))``, i.e. constant equal to 1
  on [0, 1] and matching the Student branch beyond.

Both have ``phi_inf = 1 + t``.  From ``u`` the large-dimensional calculus
derives ``g(x) = x / (1 - c * phi(x))``, ``v(x) = u(g_inverse(x))`` and
``psi(x) = x * v(x)``; these are well defined whenever ``phi_inf < 1/c``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .exceptions import AdmissibilityError

STUDENT = "student"
HUBER = "huber"


@dataclass(frozen=True)
class UFunction:
    """Weight-function specification: family plus shape parameter t > 0."""

    kind: str
    t: float

    def __post_init__(self):
        if self.kind not in (STUDENT, HUBER):
            raise ValueError(f"unknown weight-function kind {self.kind!r}")
        if not self.t > 0:
            raise ValueError("shape parameter t must be positive")

    @property
    def phi_inf(self) -> float:
        return 1.0 + self.t


@dataclass(frozen=True)
class RegimeParams:
    """Asymptotic regime: ratio limit c = N/n and outlier fraction epsilon."""

    c: float
    epsilon: float = 0.0

    def __post_init__(self):
        if not 0 < self.c < 1:
            raise ValueError("c must lie in (0, 1)")
        if not 0 <= self.epsilon < 1:
            raise ValueError("epsilon must lie in [0, 1)")

    @property
    def satisfies_growth_rate(self) -> bool:
        return 0 < self.c < 1 - self.epsilon


def eval_u(u: UFunction, x):
    """Evaluate u(x) for scalar or array x >= 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("u is only defined for x >= 0")
    base = (1.0 + u.t) / (u.t + x)
    if u.kind == HUBER:
        base = np.minimum(1.0, base)
    return base if base.ndim else float(base)


def eval_phi(u: UFunction, x):
    """phi(x) = x * u(x); strictly increasing, bounded by phi_inf = 1 + t."""
    x = np.asarray(x, dtype=float)
    out = x * np.asarray(eval_u(u, x))
    return out if out.ndim else float(out)


def phi_inverse(u: UFunction, y: float) -> float:
    """Invert phi on [0, phi_inf) by bracketed monotone root-finding."""
    if y < 0 or y >= u.phi_inf:
        raise ValueError(f"phi_inverse requires 0 <= y < phi_inf = {u.phi_inf}")
    if y == 0.0:
        return 0.0
    hi = 1.0
    while eval_phi(u, hi) < y:
        hi *= 2.0
        if hi > 1e300:
            raise ValueError("failed to bracket phi_inverse")
    return brentq(lambda x: eval_phi(u, x) - y, 0.0, hi, xtol=1e-300, rtol=1e-15)


def _check_g_domain(u: UFunction, c: float):
    if not 0 < c < 1:
        raise ValueError("c must lie in (0, 1)")
    if u.phi_inf >= 1.0 / c:
        raise AdmissibilityError(
            f"g requires phi_inf < 1/c (got phi_inf={u.phi_inf}, 1/c={1.0 / c})"
        )


def eval_g(u: UFunction, c: float, x):
    """g(x) = x / (1 - c * phi(x)); strictly increasing onto [0, inf)."""
    _check_g_domain(u, c)
    x = np.asarray(x, dtype=float)
    out = x / (1.0 - c * np.asarray(eval_phi(u, x)))
    return out if out.ndim else float(out)


def g_inverse(u: UFunction, c: float, y: float) -> float:
    """Invert g on [0, inf) by bracketed monotone root-finding."""
    _check_g_domain(u, c)
    if y < 0:
        raise ValueError("g_inverse requires y >= 0")
    if y == 0.0:
        return 0.0
    hi = 1.0
    while eval_g(u, c, hi) < y:
        hi *= 2.0
        if hi > 1e300:
            raise ValueError("failed to bracket g_inverse")
    return brentq(lambda x: eval_g(u, c, x) - y, 0.0, hi, xtol=1e-300, rtol=1e-15)


def eval_v(u: UFunction, c: float, x):
    """v(x) = u(g_inverse(x)); non-increasing, positive."""
    if np.ndim(x):
        return np.array([eval_v(u, c, xi) for xi in np.asarray(x, dtype=float)])
    return eval_u(u, g_inverse(u, c, float(x)))


def eval_psi(u: UFunction, c: float, x):
    """psi(x) = x * v(x); increasing with limit psi_inf."""
    if np.ndim(x):
        return np.array([eval_psi(u, c, xi) for xi in np.asarray(x, dtype=float)])
    return float(x) * eval_v(u, c, float(x))


def psi_inf(u: UFunction, c: float) -> float:
    """Limit of psi: phi_inf / (1 - c * phi_inf)."""
    _check_g_domain(u, c)
    return u.phi_inf / (1.0 - c * u.phi_inf)


def psi_inverse(u: UFunction, c: float, y: float) -> float:
    """Invert psi on [0, psi_inf) by bracketed monotone root-finding."""
    _check_g_domain(u, c)
    if y < 0 or y >= psi_inf(u, c):
        raise ValueError(
            f"psi_inverse requires 0 <= y < psi_inf = {psi_inf(u, c)}"
        )
    if y == 0.0:
        return 0.0
    # psi(g(x)) = g(x) * u(x), increasing in x; invert through g to avoid
    # nested root-finds.
    def f(x):
        return eval_g(u, c, x) * eval_u(u, x) - y

    hi = 1.0
    while f(hi) < 0:
        hi *= 2.0
        if hi > 1e300:
            raise ValueError("failed to bracket psi_inverse")
    x = brentq(f, 0.0, hi, xtol=1e-300, rtol=1e-15)
    return eval_g(u, c, x)


@dataclass(frozen=True)
class AdmissibilityReport:
    """Outcome of the admissibility check (1-eps)^-1 < phi_inf < c^-1."""

    ok: bool
    lower: float      # (1 - epsilon)^-1
    phi_inf: float
    upper: float      # c^-1
    growth_rate_ok: bool  # 0 < c < 1 - epsilon


def validate_admissibility(u: UFunction, r: RegimeParams) -> AdmissibilityReport:
    """Check the strict inequalities (1-eps)^-1 < phi_inf < c^-1."""
    lower = 1.0 / (1.0 - r.epsilon)
    upper = 1.0 / r.c
    growth = r.satisfies_growth_rate
    ok = growth and lower < u.phi_inf < upper
    return AdmissibilityReport(ok, lower, u.phi_inf, upper, growth)


def require_admissible(u: UFunction, r: RegimeParams) -> None:
    report = validate_admissibility(u, r)
    if not report.ok:
        raise AdmissibilityError(
            "inadmissible configuration: need "
            f"{report.lower:.6g} < phi_inf={report.phi_inf:.6g} < "
            f"{report.upper:.6g} with 0 < c < 1 - epsilon"
        )
