"""Deterministic-equivalent weight systems.

The large-dimensional equivalent of the Maronna estimator is

    S_hat = v(gamma) (1/n) sum_i y_i y_i' + (1/n) sum_i v(alpha_i) a_i a_i'

where (gamma, alpha_1, ..., alpha_K) solve a coupled system of trace /
quadratic-form equations.  The iterate map is a standard interference
function (positive, monotone, scalable), so iterating from a feasible
point converges monotonically to the unique fixed point.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .estimators import Dataset
from .exceptions import ConvergenceError
from .weights import (
    RegimeParams,
    UFunction,
    eval_psi,
    eval_v,
    phi_inverse,
    psi_inf,
    psi_inverse,
    require_admissible,
)


@dataclass(frozen=True)
class PopulationModel:
    """Deterministic inputs of the asymptotic regime.

    Exactly one of ``outliers`` (deterministic-outlier scenario, a list of
    N-vectors) or ``D`` (random-outlier scenario, the outlier covariance)
    should be given.
    """

    C: np.ndarray
    regime: RegimeParams
    c_n: float
    eps_n: float
    outliers: Optional[list] = None
    D: Optional[np.ndarray] = None

    def __post_init__(self):
        C = np.asarray(self.C, dtype=float)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise ValueError("C must be square")
        object.__setattr__(self, "C", C)
        if self.outliers is not None and self.D is not None:
            raise ValueError("give either deterministic outliers or D, not both")
        if self.outliers is not None:
            object.__setattr__(
                self, "outliers",
                [np.asarray(a, dtype=float).reshape(-1) for a in self.outliers],
            )
        if self.D is not None:
            object.__setattr__(self, "D", np.asarray(self.D, dtype=float))

    @property
    def N(self) -> int:
        return self.C.shape[0]

    @property
    def n(self) -> int:
        return round(self.N / self.c_n)

    def assumption_statistic(self) -> float:
        """Spectral norm of (1/n) sum_i C^{-1/2} a_i a_i' C^{-1/2}."""
        if not self.outliers:
            return 0.0
        Cinv_a = np.linalg.solve(self.C, np.column_stack(self.outliers))
        A = np.column_stack(self.outliers)
        M = (A.T @ Cinv_a) / self.n
        return float(np.linalg.norm(M, 2))


@dataclass(frozen=True)
class WeightProfile:
    """Solved weight system with diagnostics and feasible-point bounds."""

    gamma: float
    alphas: np.ndarray
    v_gamma: float
    v_alphas: np.ndarray
    iterations: int
    residual: float
    q0: float
    w_bounds: np.ndarray

    def to_json(self) -> str:
        return json.dumps({
            "gamma": self.gamma,
            "alphas": list(map(float, np.atleast_1d(self.alphas))),
            "v_gamma": self.v_gamma,
            "v_alphas": list(map(float, np.atleast_1d(self.v_alphas))),
            "iterations": self.iterations,
            "residual": self.residual,
            "bounds": {
                "q0": self.q0,
                "w": list(map(float, np.atleast_1d(self.w_bounds))),
            },
        }, indent=2)


def outlier_free_gamma(u: UFunction, c: float):
    """Closed form without outliers: gamma = phi^-1(1)/(1-c), v = 1/phi^-1(1)."""
    require_admissible(u, RegimeParams(c=c, epsilon=0.0))
    x = phi_inverse(u, 1.0)
    return x / (1.0 - c), 1.0 / x


def _iterate_interference(h, q_start, tol=1e-10, max_iter=10000,
                          check_descent=True):
    """Iterate q <- h(q) from a feasible point q_start >= h(q_start).

    Returns (q, iterations, residual) where residual is the max relative
    defect |q - h(q)| / q.  Monotone componentwise descent is asserted
    (up to rounding slack) when ``check_descent`` is set.
    """
    q = np.asarray(q_start, dtype=float).copy()
    for it in range(1, max_iter + 1):
        q_new = h(q)
        if check_descent and np.any(q_new > q * (1 + 1e-9) + 1e-12):
            raise RuntimeError("interference iteration is not descending; "
                               "start point is not feasible")
        residual = float(np.max(np.abs(q - q_new) / np.maximum(q, 1e-300)))
        q = q_new
        if residual <= tol:
            return q, it, residual
    raise ConvergenceError(
        f"weight system did not converge in {max_iter} iterations",
        residual, max_iter,
    )


def _theta_coeff(u, c_n, gamma):
    # (1 - eps) v(gamma) / (1 + c v(gamma) gamma) without the (1 - eps) factor
    vg = eval_v(u, c_n, gamma)
    return vg / (1.0 + c_n * vg * gamma)


def solve_weight_system(m: PopulationModel, u: UFunction,
                        tol: float = 1e-10, max_iter: int = 10000) -> WeightProfile:
    """Solve the deterministic-outlier weight system (gamma, alpha_i)."""
    require_admissible(u, RegimeParams(c=m.c_n, epsilon=m.eps_n))
    C, N, n = m.C, m.N, m.n
    outliers = m.outliers or []
    K = len(outliers)
    eps = m.eps_n
    A = np.column_stack(outliers) if K else np.zeros((N, 0))

    def h(q):
        gamma, alphas = q[0], q[1:]
        v_alphas = np.array([eval_v(u, m.c_n, a) for a in alphas])
        coeff = (1.0 - eps) * _theta_coeff(u, m.c_n, gamma)
        B = coeff * C
        if K:
            B = B + (A * (v_alphas / n)) @ A.T
        out = np.empty_like(q)
        out[0] = np.trace(np.linalg.solve(B, C)) / N
        for i in range(K):
            a = outliers[i]
            Bi = B - (v_alphas[i] / n) * np.outer(a, a)
            out[1 + i] = a @ np.linalg.solve(Bi, a) / N
        return out

    q0 = psi_inverse(u, m.c_n, 1.0 / (1.0 - eps - m.c_n))
    Cinv = np.linalg.inv(C)
    w = np.array([q0 * (a @ Cinv @ a) / N for a in outliers])
    start = np.concatenate([[q0], w])
    q, iterations, residual = _iterate_interference(h, start, tol, max_iter)

    gamma, alphas = float(q[0]), q[1:]
    return WeightProfile(
        gamma=gamma,
        alphas=alphas,
        v_gamma=eval_v(u, m.c_n, gamma),
        v_alphas=np.array([eval_v(u, m.c_n, a) for a in alphas]),
        iterations=iterations,
        residual=residual,
        q0=q0,
        w_bounds=w,
    )


def solve_random_outlier_system(m: PopulationModel, u: UFunction,
                                tol: float = 1e-10,
                                max_iter: int = 10000) -> WeightProfile:
    """Solve the two-weight system (gamma_R, alpha_R) of the random scenario."""
    require_admissible(u, RegimeParams(c=m.c_n, epsilon=m.eps_n))
    if m.D is None:
        raise ValueError("random-outlier scenario requires D")
    C, D, N = m.C, m.D, m.N
    eps, c_n = m.eps_n, m.c_n

    def h(q):
        gamma, alpha = q
        E = ((1.0 - eps) * _theta_coeff(u, c_n, gamma) * C
             + eps * _theta_coeff(u, c_n, alpha) * D)
        Einv = np.linalg.inv(E)
        return np.array([
            np.trace(C @ Einv) / N,
            np.trace(D @ Einv) / N,
        ])

    q0 = psi_inverse(u, c_n, 1.0 / (1.0 - eps - c_n))
    tr_dcinv = float(np.trace(np.linalg.solve(C, D))) / N
    w = q0 * tr_dcinv
    q, iterations, residual = _iterate_interference(h, np.array([q0, w]),
                                                    tol, max_iter)
    gamma, alpha = float(q[0]), float(q[1])
    return WeightProfile(
        gamma=gamma,
        alphas=np.array([alpha]),
        v_gamma=eval_v(u, c_n, gamma),
        v_alphas=np.array([eval_v(u, c_n, alpha)]),
        iterations=iterations,
        residual=residual,
        q0=q0,
        w_bounds=np.array([w]),
    )


def epsilon_zero_limit(m: PopulationModel, u: UFunction):
    """Vanishing-outlier-fraction limit of the random two-weight system.

    gamma -> phi^-1(1)/(1-c) and alpha -> gamma * (1/N) tr(D C^-1).
    """
    if m.D is None:
        raise ValueError("epsilon-zero limit requires the random scenario (D)")
    gamma, _ = outlier_free_gamma(u, m.c_n)
    tr_dcinv = float(np.trace(np.linalg.solve(m.C, m.D))) / m.N
    return gamma, gamma * tr_dcinv


def identical_outliers_alpha(u: UFunction, c_n: float, K: int,
                             tau: float) -> float:
    """Common weight argument for K identical outliers.

    Solves alpha / (1 - c_n (K-1) psi(alpha)) = gamma * tau, where
    tau = (1/N) a' C^-1 a and gamma is the outlier-free value.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if tau <= 0:
        raise ValueError("tau must be positive")
    gamma, _ = outlier_free_gamma(u, c_n)
    rhs = gamma * tau
    if K == 1:
        return rhs

    kappa = c_n * (K - 1)

    def f(a):
        return a / (1.0 - kappa * eval_psi(u, c_n, a)) - rhs

    # The LHS increases from 0 and blows up at psi(alpha) = 1/kappa (if that
    # level is attainable), so the root is bracketed below that pole.
    if 1.0 / kappa < psi_inf(u, c_n):
        hi = psi_inverse(u, c_n, 1.0 / kappa) * (1 - 1e-13)
        if f(hi) < 0:
            raise ValueError("bracketing failure in identical_outliers_alpha")
    else:
        hi = 1.0
        while f(hi) < 0:
            hi *= 2.0
            if hi > 1e300:
                raise ValueError("bracketing failure in identical_outliers_alpha")
    return brentq(f, 0.0, hi, xtol=1e-300, rtol=1e-14)


def build_S_hat(d: Dataset, w: WeightProfile, u: UFunction) -> np.ndarray:
    """Assemble the deterministic equivalent from solved weights.

    ``w.v_alphas`` must either match the number of outlier columns
    one-to-one or hold a single common value (random scenario).
    """
    v_alphas = np.atleast_1d(w.v_alphas)
    if d.n_outliers and len(v_alphas) == 1:
        v_alphas = np.full(d.n_outliers, v_alphas[0])
    if len(v_alphas) != d.n_outliers:
        raise ValueError(
            f"{len(v_alphas)} outlier weights for {d.n_outliers} outlier columns"
        )
    Yl = d.legitimate
    S = w.v_gamma * (Yl @ Yl.conj().T) / d.n
    if d.n_outliers:
        Ao = d.outliers * np.sqrt(v_alphas)
        S = S + (Ao @ Ao.conj().T) / d.n
    return S
