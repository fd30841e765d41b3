"""Finite-sample scatter estimators.

Sample covariance (SCM), per-column normalized SCM, the oracle SCM
(legitimate columns only) and the Maronna fixed-point estimator, i.e. the
solution Z of

    Z = (1/n) sum_i u((1/N) w_i' Z^{-1} w_i) w_i w_i'

over all columns w_i of the data matrix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from .exceptions import ConvergenceError
from .weights import RegimeParams, UFunction, eval_u, require_admissible

DATASET_SCHEMA = "robust-scatter/dataset-v1"


@dataclass(frozen=True)
class Dataset:
    """N x n sample matrix with the last ``n_outliers`` columns outlying.

    Columns are ordered legitimate-first; the estimators themselves are
    invariant to column permutations, the ordering only carries the ground
    truth used by the oracle estimator and the simulation harness.
    """

    samples: np.ndarray
    n_outliers: int = 0

    def __post_init__(self):
        Y = np.asarray(self.samples)
        if Y.ndim != 2:
            raise ValueError("samples must be a 2-D array")
        if not 0 <= self.n_outliers < Y.shape[1]:
            raise ValueError("need 0 <= n_outliers < n")
        object.__setattr__(self, "samples", Y)

    @property
    def N(self) -> int:
        return self.samples.shape[0]

    @property
    def n(self) -> int:
        return self.samples.shape[1]

    @property
    def c_n(self) -> float:
        return self.N / self.n

    @property
    def eps_n(self) -> float:
        return self.n_outliers / self.n

    @property
    def labels(self) -> np.ndarray:
        """Boolean flags, True for outlier columns."""
        lab = np.zeros(self.n, dtype=bool)
        if self.n_outliers:
            lab[-self.n_outliers:] = True
        return lab

    @property
    def legitimate(self) -> np.ndarray:
        return self.samples[:, : self.n - self.n_outliers]

    @property
    def outliers(self) -> np.ndarray:
        return self.samples[:, self.n - self.n_outliers:]


@dataclass(frozen=True)
class ScatterEstimate:
    """Converged fixed point with per-sample weights and diagnostics."""

    matrix: np.ndarray
    per_sample_weights: np.ndarray
    iterations: int
    residual: float


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-9
    max_iter: int = 500
    damping: float = 1.0          # 1.0 is plain Picard
    init: str = "identity"        # "identity" or "scm"
    metric: str = "spectral"      # "spectral" or "fro"


def scm(d: Dataset) -> np.ndarray:
    """Sample covariance matrix (1/n) Y Y'."""
    Y = d.samples
    return (Y @ Y.conj().T) / d.n


def normalized_scm(d: Dataset) -> np.ndarray:
    """Per-column normalized SCM; each column is scaled to (1/N)||w||^2 = 1."""
    Y = d.samples
    sq = np.einsum("ij,ij->j", Y.conj(), Y).real / d.N
    if np.any(sq <= 0):
        raise ValueError("normalized SCM requires nonzero columns")
    Yn = Y / np.sqrt(sq)
    return (Yn @ Yn.conj().T) / d.n


def oracle_scm(d: Dataset) -> np.ndarray:
    """SCM over the legitimate columns only (ground-truth labels required)."""
    Yl = d.legitimate
    return (Yl @ Yl.conj().T) / d.n


def _rhs(Z: np.ndarray, d: Dataset, u: UFunction):
    """One application of the fixed-point map; returns (RHS(Z), weights)."""
    Y = d.samples
    L = cholesky(Z, lower=True)
    W = solve_triangular(L, Y, lower=True)
    quad = np.einsum("ij,ij->j", W.conj(), W).real / d.N
    w = np.asarray(eval_u(u, quad))
    Yw = Y * np.sqrt(w)
    return (Yw @ Yw.conj().T) / d.n, w


def _norm(A: np.ndarray, metric: str) -> float:
    if metric == "fro":
        return float(np.linalg.norm(A, "fro"))
    return float(np.linalg.norm(A, 2))


def fixed_point_residual(Z: np.ndarray, d: Dataset, u: UFunction,
                         metric: str = "spectral") -> float:
    """Relative fixed-point defect ||Z - RHS(Z)|| / ||Z||."""
    R, _ = _rhs(Z, d, u)
    return _norm(Z - R, metric) / _norm(Z, metric)


def maronna_fixed_point(d: Dataset, u: UFunction,
                        cfg: SolverConfig = SolverConfig()) -> ScatterEstimate:
    """Solve the Maronna fixed point by (optionally damped) Picard iteration.

    Existence requires N < (1 - eps_n) n and an admissible weight function
    for the finite-n ratios (c_n, eps_n); non-convergence within
    ``cfg.max_iter`` raises :class:`ConvergenceError`.
    """
    require_admissible(u, RegimeParams(c=d.c_n, epsilon=d.eps_n))
    if d.N >= (1 - d.eps_n) * d.n:
        raise ValueError("need N < (1 - eps_n) n for the fixed point to exist")

    if cfg.init == "scm":
        Z = scm(d)
    elif cfg.init == "identity":
        Z = np.eye(d.N, dtype=d.samples.dtype)
    else:
        raise ValueError(f"unknown init {cfg.init!r}")

    residual = np.inf
    weights = None
    for it in range(1, cfg.max_iter + 1):
        try:
            R, weights = _rhs(Z, d, u)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(
                f"singular iterate at iteration {it}", residual, it
            ) from exc
        residual = _norm(Z - R, cfg.metric) / _norm(Z, cfg.metric)
        if not np.isfinite(residual):
            raise ConvergenceError("iteration diverged", residual, it)
        Z = R if cfg.damping == 1.0 else (1 - cfg.damping) * Z + cfg.damping * R
        if residual <= cfg.tol:
            return ScatterEstimate(Z, weights, it, residual)
    raise ConvergenceError(
        f"no convergence after {cfg.max_iter} iterations "
        f"(residual {residual:.3e})",
        residual, cfg.max_iter,
    )


# ---------------------------------------------------------------------------
# Dataset I/O
# ---------------------------------------------------------------------------

def save_dataset_csv(d: Dataset, path) -> None:
    """Write a dataset as CSV: header '# N n n_outliers', then N rows."""
    if np.iscomplexobj(d.samples):
        raise ValueError("CSV output supports real datasets only")
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# {d.N} {d.n} {d.n_outliers}\n")
        for row in d.samples:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def load_dataset_csv(path) -> Dataset:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise ValueError("missing '# N n n_outliers' header")
        N, n, n_out = (int(tok) for tok in header[1:].split())
        Y = np.loadtxt(fh, delimiter=",", ndmin=2)
    if Y.shape != (N, n):
        raise ValueError(f"data shape {Y.shape} does not match header ({N}, {n})")
    return Dataset(Y, n_out)


def save_dataset_json(d: Dataset, path) -> None:
    """JSON envelope; floats serialize via shortest round-trip repr."""
    if np.iscomplexobj(d.samples):
        raise ValueError("JSON output supports real datasets only")
    payload = {
        "schema": DATASET_SCHEMA,
        "N": d.N,
        "n": d.n,
        "n_outliers": d.n_outliers,
        "samples": [[float(x) for x in row] for row in d.samples],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_dataset_json(path) -> Dataset:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("schema") != DATASET_SCHEMA:
        raise ValueError(f"unexpected dataset schema {payload.get('schema')!r}")
    Y = np.array(payload["samples"], dtype=float)
    if Y.shape != (payload["N"], payload["n"]):
        raise ValueError("sample matrix shape does not match envelope")
    return Dataset(Y, payload["n_outliers"])
