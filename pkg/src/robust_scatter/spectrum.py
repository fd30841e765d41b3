"""Limiting spectral analysis: Stieltjes transforms, densities, moments.

The limiting spectral distribution of the weighted-sum equivalent is
characterized by a scalar (deterministic-outlier case) or coupled pair
(random-outlier case) of fixed-point equations in the upper half plane.
Densities follow from the imaginary part of the Stieltjes transform on a
line just above the real axis, and the moment sequence from an exact
recursion on matrix intermediates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import ConvergenceError

MAX_MOMENT_ORDER = 12


@dataclass(frozen=True)
class SpectralModel:
    """Parameters of a limiting spectral distribution.

    ``scenario`` is "deterministic" (single class ``C`` with weight
    ``v_gamma`` plus a fixed PSD matrix ``A``) or "random" (two classes
    ``C`` and ``D`` with weights ``v_gamma`` and ``v_alpha``).
    """

    scenario: str
    C: np.ndarray
    v_gamma: float
    eps: float
    c_n: float
    A: Optional[np.ndarray] = None
    D: Optional[np.ndarray] = None
    v_alpha: Optional[float] = None

    def __post_init__(self):
        if self.scenario not in ("deterministic", "random"):
            raise ValueError(f"unknown scenario {self.scenario!r}")
        object.__setattr__(self, "C", np.asarray(self.C, dtype=float))
        if self.scenario == "random":
            if self.D is None or self.v_alpha is None:
                raise ValueError("random scenario requires D and v_alpha")
            object.__setattr__(self, "D", np.asarray(self.D, dtype=float))
        else:
            A = np.zeros_like(self.C) if self.A is None else np.asarray(
                self.A, dtype=float)
            object.__setattr__(self, "A", A)

    @property
    def N(self) -> int:
        return self.C.shape[0]


def deterministic_model(C, v_gamma, eps, c_n, A=None) -> SpectralModel:
    return SpectralModel("deterministic", C, v_gamma, eps, c_n, A=A)


def random_model(C, D, v_gamma, v_alpha, eps, c_n) -> SpectralModel:
    return SpectralModel("random", C, v_gamma, eps, c_n, D=D, v_alpha=v_alpha)


def scm_model(C, D, eps, c_n) -> SpectralModel:
    """Limiting model of the plain SCM under random outliers (unit weights)."""
    return random_model(C, D, 1.0, 1.0, eps, c_n)


def nscm_model(C, D, eps, c_n) -> SpectralModel:
    """Limiting model of the per-column normalized SCM.

    Normalization divides each class by its mean squared column norm, so
    the class weights become N/tr(C) and N/tr(D); when both traces equal
    N this coincides with :func:`scm_model`.
    """
    N = C.shape[0]
    return random_model(C, D, N / float(np.trace(C)), N / float(np.trace(D)),
                        eps, c_n)


def oracle_model(C, eps, c_n) -> SpectralModel:
    """Limiting model of the SCM over legitimate columns only."""
    return deterministic_model(C, 1.0, eps, c_n)


# ---------------------------------------------------------------------------
# Stieltjes-transform fixed points
# ---------------------------------------------------------------------------

class _DetKernel:
    """Trace evaluations for the deterministic-case resolvent."""

    def __init__(self, model: SpectralModel):
        self.m = model
        self._use_eig = not np.any(model.A)
        if self._use_eig:
            self.lam = np.linalg.eigvalsh(model.C)

    def traces(self, coef, z):
        """Return ((1/N) tr C (coef*C + A - z)^-1, (1/N) tr (coef*C + A - z)^-1)."""
        N = self.m.N
        if self._use_eig:
            den = coef * self.lam - z
            return np.sum(self.lam / den) / N, np.sum(1.0 / den) / N
        M = coef * self.m.C + self.m.A - z * np.eye(N)
        X = np.linalg.solve(M, self.m.C)
        Minv = np.linalg.inv(M)
        return np.trace(X) / N, np.trace(Minv) / N


def stieltjes_deterministic(z: complex, model: SpectralModel,
                            tol: float = 1e-12, max_iter: int = 5000,
                            damping: float = 0.5, e0: Optional[complex] = None,
                            _kernel: Optional[_DetKernel] = None):
    """Solve the scalar fixed point for e(z); return (m(z), e(z))."""
    if model.scenario != "deterministic":
        raise ValueError("model is not a deterministic-scenario model")
    if z.imag <= 0:
        raise ValueError("z must lie in the upper half plane")
    k = _kernel or _DetKernel(model)
    vg, eps, c_n, N = model.v_gamma, model.eps, model.c_n, model.N
    e = e0 if e0 is not None else -vg * c_n * np.trace(model.C) / (N * z)
    for _ in range(max_iter):
        trC, _ = k.traces((1 - eps) * vg / (1 + e), z)
        f = vg * c_n * trC
        defect = abs(f - e)
        e = e + damping * (f - e)
        if defect <= tol:
            trC, trI = k.traces((1 - eps) * vg / (1 + e), z)
            return trI, e
    raise ConvergenceError(f"Stieltjes fixed point stalled at z={z}",
                           defect, max_iter)


class _RandKernel:
    """Trace evaluations for the random-case resolvent."""

    def __init__(self, model: SpectralModel):
        self.m = model
        N = model.N
        # Fast path when D is a multiple of the identity.
        s = model.D[0, 0]
        self._scal = np.allclose(model.D, s * np.eye(N), atol=1e-14)
        if self._scal:
            self._s = s
            self.lam = np.linalg.eigvalsh(model.C)

    def traces(self, a, b, z):
        """Traces of C, D and I against (a*C + b*D - z)^-1, each over N."""
        N = self.m.N
        if self._scal:
            den = a * self.lam + b * self._s - z
            inv = 1.0 / den
            return (np.sum(self.lam * inv) / N,
                    self._s * np.sum(inv) / N,
                    np.sum(inv) / N)
        M = a * self.m.C + b * self.m.D - z * np.eye(N)
        Minv = np.linalg.inv(M)
        return (np.trace(Minv @ self.m.C) / N,
                np.trace(Minv @ self.m.D) / N,
                np.trace(Minv) / N)


def stieltjes_random(z: complex, model: SpectralModel,
                     tol: float = 1e-12, max_iter: int = 5000,
                     damping: float = 0.5, e0=None,
                     _kernel: Optional[_RandKernel] = None):
    """Solve the coupled fixed point (e1, e2); return (m(z), e1(z), e2(z))."""
    if model.scenario != "random":
        raise ValueError("model is not a random-scenario model")
    if z.imag <= 0:
        raise ValueError("z must lie in the upper half plane")
    k = _kernel or _RandKernel(model)
    vg, va = model.v_gamma, model.v_alpha
    eps, c_n, N = model.eps, model.c_n, model.N
    if e0 is not None:
        e1, e2 = e0
    else:
        e1 = -vg * c_n * np.trace(model.C) / (N * z)
        e2 = -va * c_n * np.trace(model.D) / (N * z)
    for _ in range(max_iter):
        a = (1 - eps) * vg / (1 + e1)
        b = eps * va / (1 + e2)
        trC, trD, _ = k.traces(a, b, z)
        f1 = vg * c_n * trC
        f2 = va * c_n * trD
        defect = max(abs(f1 - e1), abs(f2 - e2))
        e1 = e1 + damping * (f1 - e1)
        e2 = e2 + damping * (f2 - e2)
        if defect <= tol:
            a = (1 - eps) * vg / (1 + e1)
            b = eps * va / (1 + e2)
            _, _, trI = k.traces(a, b, z)
            return trI, e1, e2
    raise ConvergenceError(f"Stieltjes fixed point stalled at z={z}",
                           defect, max_iter)


def stieltjes(z: complex, model: SpectralModel, **kw):
    """Dispatch on scenario; returns (m(z), e-values tuple)."""
    if model.scenario == "deterministic":
        m, e = stieltjes_deterministic(z, model, **kw)
        return m, (e,)
    m, e1, e2 = stieltjes_random(z, model, **kw)
    return m, (e1, e2)


@dataclass(frozen=True)
class DensityEstimate:
    x: np.ndarray
    density: np.ndarray
    y_imag: float

    def cdf(self) -> np.ndarray:
        """Cumulative trapezoid integral of the density along x."""
        dx = np.diff(self.x)
        incr = 0.5 * dx * (self.density[1:] + self.density[:-1])
        return np.concatenate([[0.0], np.cumsum(incr)])

    def integral(self) -> float:
        return float(np.trapezoid(self.density, self.x))


def density_on_grid(model: SpectralModel, x_grid, y_imag: float = 1e-4,
                    tol: float = 1e-12, max_iter: int = 5000,
                    damping: float = 0.5) -> DensityEstimate:
    """Density (1/pi) Im m(x + i y) along a sorted grid, with continuation."""
    x_grid = np.asarray(x_grid, dtype=float)
    if y_imag <= 0:
        raise ValueError("y_imag must be positive")
    if np.any(np.diff(x_grid) <= 0):
        raise ValueError("x_grid must be strictly increasing")
    dens = np.empty_like(x_grid)
    e_prev = None
    if model.scenario == "deterministic":
        kernel = _DetKernel(model)
        for i, x in enumerate(x_grid):
            m, e = stieltjes_deterministic(
                complex(x, y_imag), model, tol, max_iter, damping,
                e0=e_prev, _kernel=kernel)
            if m.imag < -1e-8 or e.imag < -1e-8:
                raise ConvergenceError(
                    f"fixed point left the upper half plane at x={x}")
            dens[i] = m.imag / math.pi
            e_prev = e
    else:
        kernel = _RandKernel(model)
        for i, x in enumerate(x_grid):
            m, e1, e2 = stieltjes_random(
                complex(x, y_imag), model, tol, max_iter, damping,
                e0=e_prev, _kernel=kernel)
            if m.imag < -1e-8 or min(e1.imag, e2.imag) < -1e-8:
                raise ConvergenceError(
                    f"fixed point left the upper half plane at x={x}")
            dens[i] = m.imag / math.pi
            e_prev = (e1, e2)
    return DensityEstimate(x_grid, dens, y_imag)


def support_endpoints(est: DensityEstimate, threshold: float = 1e-6):
    """Crude support estimate: x-range where the density exceeds threshold."""
    mask = est.density > threshold
    if not np.any(mask):
        return None
    idx = np.nonzero(mask)[0]
    return float(est.x[idx[0]]), float(est.x[idx[-1]])


# ---------------------------------------------------------------------------
# Moment recursion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentTable:
    """Moments M_1..M_pmax of a limiting distribution with intermediates."""

    order: int
    moments: np.ndarray     # moments[p-1] = M_p
    T: list                 # T[p], p = 0..order
    Q: list                 # Q[p], p = 1..order (Q[0] unused placeholder)
    f: np.ndarray           # f[k, p]
    beta: np.ndarray        # beta[k, p]

    def moment(self, p: int) -> float:
        return float(self.moments[p - 1])


def moments_generic(R_list, fractions, A, c_n, p_max) -> MomentTable:
    """Per-class moment recursion.

    ``R_list`` holds one PSD matrix per class and ``fractions`` the share
    of columns in each class (summing to at most 1); ``A`` is a fixed PSD
    additive term and ``c_n = N/n``.
    """
    if p_max < 1:
        raise ValueError("p_max must be >= 1")
    if p_max > MAX_MOMENT_ORDER:
        raise ValueError(
            f"moment recursion limited to order {MAX_MOMENT_ORDER} "
            "(factorial scaling loses precision beyond)")
    R_list = [np.asarray(R, dtype=float) for R in R_list]
    fractions = np.asarray(fractions, dtype=float)
    if len(R_list) != len(fractions):
        raise ValueError("one fraction per class required")
    N = R_list[0].shape[0]
    for R in R_list:
        if R.shape != (N, N):
            raise ValueError("all class matrices must be N x N")
    A = np.zeros((N, N)) if A is None else np.asarray(A, dtype=float)
    if A.shape != (N, N):
        raise ValueError("A must be N x N")
    K = len(R_list)

    T = [np.eye(N)]
    Q = [None]  # Q[p] valid for p >= 1
    f = np.zeros((K, p_max + 1))
    beta = np.zeros((K, p_max + 1))
    f[:, 0] = -1.0
    for k in range(K):
        beta[k, 0] = c_n * np.trace(R_list[k]) / N

    comb = math.comb
    for p in range(p_max):
        Qp1 = np.zeros((N, N))
        for k in range(K):
            Qp1 += fractions[k] * f[k, p] * R_list[k]
        Q.append((p + 1) * Qp1)

        Tp1 = np.zeros((N, N))
        for i in range(p + 1):
            Tp1 -= T[p - i] @ A @ T[i]
            for j in range(i + 1):
                Tp1 += (comb(p, i) * comb(i, j)) * (T[p - i] @ Q[i - j + 1] @ T[j])
        T.append(Tp1)

        for k in range(K):
            beta[k, p + 1] = c_n * np.trace(R_list[k] @ Tp1) / N
            acc = 0.0
            for i in range(p + 1):
                for j in range(i + 1):
                    acc += (comb(p, i) * comb(i, j) * (p - i + 1)
                            * f[k, j] * f[k, i - j] * beta[k, p - i])
            f[k, p + 1] = acc

    moments = np.array([
        ((-1.0) ** p / math.factorial(p)) * np.trace(T[p]) / N
        for p in range(1, p_max + 1)
    ])
    return MomentTable(p_max, moments, T, Q, f, beta)


def moments_deterministic(model: SpectralModel, p_max: int) -> MomentTable:
    """Single legitimate class with weight v_gamma plus the fixed matrix A."""
    if model.scenario != "deterministic":
        raise ValueError("model is not a deterministic-scenario model")
    return moments_generic([model.v_gamma * model.C], [1.0 - model.eps],
                           model.A, model.c_n, p_max)


def moments_random(model: SpectralModel, p_max: int) -> MomentTable:
    """Two classes (legitimate, outlier) with fractions (1-eps, eps)."""
    if model.scenario != "random":
        raise ValueError("model is not a random-scenario model")
    return moments_generic(
        [model.v_gamma * model.C, model.v_alpha * model.D],
        [1.0 - model.eps, model.eps],
        None, model.c_n, p_max)


def normalized_moments(table: MomentTable) -> np.ndarray:
    """Scale-invariant normalized moments M_p / M_1^p (so the first is 1)."""
    m1 = table.moments[0]
    if m1 <= 0:
        raise ValueError("first moment must be positive")
    return table.moments / m1 ** np.arange(1, table.order + 1)
