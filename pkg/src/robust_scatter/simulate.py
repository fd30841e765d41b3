"""Scenario construction, data generation and Monte Carlo experiments.

Scenarios are declarative: a covariance builder for the legitimate data,
an outlier builder (fixed vectors or a second covariance), sizes, a weight
function and a master seed.  Every experiment derives one child seed per
trial from the master seed, so results are bit-reproducible and
independent of scheduling order.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import spectrum
from .det_equiv import (
    PopulationModel,
    WeightProfile,
    build_S_hat,
    solve_random_outlier_system,
    solve_weight_system,
)
from .estimators import (
    Dataset,
    SolverConfig,
    maronna_fixed_point,
    normalized_scm,
    oracle_scm,
    scm,
)
from .exceptions import ConfigError
from .weights import RegimeParams, UFunction


def worker_count() -> int:
    """Worker cap for trial-parallel experiments (ROBUST_SCATTER_THREADS)."""
    env = os.environ.get("ROBUST_SCATTER_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"ROBUST_SCATTER_THREADS={env!r} is not an integer")
    return min(4, os.cpu_count() or 1)


@dataclass(frozen=True)
class ScenarioSpec:
    """Declarative description of a simulation scenario."""

    name: str
    N: int
    n: int
    u: UFunction
    cov: dict                 # {"kind": "toeplitz"|"identity"|"fig1", ...}
    outliers: dict            # {"kind": "gaussian"|"fig1"|"vectors", ...}
    eps_n: float
    seed: int = 0
    trials: int = 100
    dtype: str = "real"       # "real" or "complex" Gaussian draws

    def __post_init__(self):
        if self.dtype not in ("real", "complex"):
            raise ConfigError(f"unknown dtype {self.dtype!r}")

    @property
    def c_n(self) -> float:
        return self.N / self.n

    @property
    def n_outliers(self) -> int:
        return round(self.eps_n * self.n)


def build_toeplitz_cov(rho: float, N: int) -> np.ndarray:
    """Exponentially decaying Toeplitz covariance [C]_ij = rho^|i-j|."""
    if abs(rho) >= 1:
        raise ValueError("|rho| must be below 1")
    idx = np.arange(N)
    return rho ** np.abs(np.subtract.outer(idx, idx))


def _fig1_cov(N: int) -> np.ndarray:
    if N % 10:
        raise ValueError("the isolated-outlier scenario requires N divisible by 10")
    d = np.ones(N)
    d[: N // 10] = 1.0 / 16.0
    return (16.0 / 14.5) * np.diag(d)


def _fig1_outlier(N: int) -> np.ndarray:
    if N % 10:
        raise ValueError("the isolated-outlier scenario requires N divisible by 10")
    a = np.zeros(N)
    a[: N // 10] = np.sqrt(10.0)
    return a


def build_cov(spec: dict, N: int) -> np.ndarray:
    kind = spec.get("kind")
    if kind == "toeplitz":
        return build_toeplitz_cov(float(spec["rho"]), N)
    if kind == "identity":
        return np.eye(N)
    if kind == "diag-blocks":
        values = spec["values"]
        sizes = spec["sizes"]
        if sum(sizes) != N:
            raise ConfigError("diag-blocks sizes must sum to N")
        return np.diag(np.repeat(values, sizes)).astype(float)
    if kind == "fig1":
        return _fig1_cov(N)
    raise ConfigError(f"unknown covariance builder {kind!r}")


def build_fig1_scenario(N: int = 100, c: float = 0.2):
    """Single deterministic outlier aligned with the weak block of C.

    Returns (ScenarioSpec, PopulationModel).  Construction guarantees
    ||a||^2 = N, tr C = N and (1/N) a' C^-1 a = 14.50.
    """
    n = round(N / c)
    spec = ScenarioSpec(
        name="fig1", N=N, n=n,
        u=UFunction("student", 0.1),
        cov={"kind": "fig1"},
        outliers={"kind": "fig1"},
        eps_n=1.0 / n,
        seed=0,
        trials=10,
    )
    C = _fig1_cov(N)
    a = _fig1_outlier(N)
    model = PopulationModel(
        C=C, regime=RegimeParams(c=c, epsilon=0.0),
        c_n=c, eps_n=spec.eps_n, outliers=[a],
    )
    return spec, model


def population_model(spec: ScenarioSpec) -> PopulationModel:
    """Asymptotic inputs implied by a scenario."""
    C = build_cov(spec.cov, spec.N)
    regime = RegimeParams(c=spec.c_n, epsilon=spec.eps_n)
    kind = spec.outliers.get("kind")
    if kind == "gaussian":
        D = build_cov(spec.outliers["cov"], spec.N)
        return PopulationModel(C=C, regime=regime, c_n=spec.c_n,
                               eps_n=spec.eps_n, D=D)
    if kind == "fig1":
        return PopulationModel(C=C, regime=regime, c_n=spec.c_n,
                               eps_n=spec.eps_n,
                               outliers=[_fig1_outlier(spec.N)])
    if kind == "vectors":
        vecs = [np.asarray(v, dtype=float) for v in spec.outliers["vectors"]]
        return PopulationModel(C=C, regime=regime, c_n=spec.c_n,
                               eps_n=spec.eps_n, outliers=vecs)
    raise ConfigError(f"unknown outlier builder {kind!r}")


def _sqrtm_psd(M: np.ndarray) -> np.ndarray:
    lam, V = np.linalg.eigh(M)
    lam = np.clip(lam, 0.0, None)
    return (V * np.sqrt(lam)) @ V.T


def _standard_entries(rng, shape, dtype):
    """I.i.d. zero-mean unit-variance entries, real or circular complex."""
    if dtype == "complex":
        return (rng.standard_normal(shape)
                + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    return rng.standard_normal(shape)


def generate_dataset(spec: ScenarioSpec, seed=None) -> Dataset:
    """Draw one dataset: Gaussian legitimate columns plus built outliers."""
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    n_out = spec.n_outliers
    n_legit = spec.n - n_out
    C_half = _sqrtm_psd(build_cov(spec.cov, spec.N))
    Y = C_half @ _standard_entries(rng, (spec.N, n_legit), spec.dtype)

    kind = spec.outliers.get("kind")
    if n_out == 0:
        A = np.zeros((spec.N, 0), dtype=Y.dtype)
    elif kind == "gaussian":
        D_half = _sqrtm_psd(build_cov(spec.outliers["cov"], spec.N))
        A = D_half @ _standard_entries(rng, (spec.N, n_out), spec.dtype)
    elif kind == "fig1":
        A = np.tile(_fig1_outlier(spec.N)[:, None], (1, n_out))
    elif kind == "vectors":
        vecs = [np.asarray(v, dtype=float) for v in spec.outliers["vectors"]]
        if len(vecs) != n_out:
            raise ConfigError("number of outlier vectors must equal eps_n * n")
        A = np.column_stack(vecs)
    else:
        raise ConfigError(f"unknown outlier builder {kind!r}")
    return Dataset(np.concatenate([Y, A], axis=1), n_out)


def _trial_seeds(spec: ScenarioSpec, trials: int):
    return np.random.SeedSequence(spec.seed).spawn(trials)


def _run_trials(fn, seeds):
    """Run fn(seed) per trial, preserving trial order."""
    workers = worker_count()
    if workers == 1:
        return [fn(s) for s in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, seeds))


def solve_scenario_weights(spec: ScenarioSpec, **kw) -> WeightProfile:
    """Solve the weight system matching the scenario's outlier builder."""
    model = population_model(spec)
    if model.D is not None:
        return solve_random_outlier_system(model, spec.u, **kw)
    return solve_weight_system(model, spec.u, **kw)


@dataclass(frozen=True)
class EquivalenceResult:
    errors: np.ndarray
    mean: float
    std: float
    profile: WeightProfile


def equivalence_error_experiment(spec: ScenarioSpec, trials: int,
                                 cfg: SolverConfig = SolverConfig()) -> EquivalenceResult:
    """Relative spectral-norm distance between the estimator and its equivalent."""
    if trials < 2:
        raise ValueError("need at least 2 trials")
    profile = solve_scenario_weights(spec)

    def one(seed):
        d = generate_dataset(spec, seed)
        est = maronna_fixed_point(d, spec.u, cfg)
        S = build_S_hat(d, profile, spec.u)
        return (np.linalg.norm(est.matrix - S, 2)
                / np.linalg.norm(est.matrix, 2))

    errors = np.array(_run_trials(one, _trial_seeds(spec, trials)))
    return EquivalenceResult(errors, float(errors.mean()),
                             float(errors.std(ddof=1)), profile)


@dataclass(frozen=True)
class EsdResult:
    eigenvalues: np.ndarray        # pooled over trials
    hist_counts: np.ndarray
    hist_edges: np.ndarray
    density: spectrum.DensityEstimate
    cdf_distance: float            # sup |ECDF - model CDF| at the eigenvalues
    profile: WeightProfile


def esd_histogram_experiment(spec: ScenarioSpec, trials: int, bins: int = 60,
                             cfg: SolverConfig = SolverConfig(),
                             grid_points: int = 400,
                             y_imag: float = 1e-4) -> EsdResult:
    """Pooled eigenvalues of the robust estimator versus the limiting density."""
    if trials < 1:
        raise ValueError("need at least 1 trial")
    model = population_model(spec)
    if model.D is None:
        raise ValueError("ESD experiment requires the random-outlier scenario")
    profile = solve_random_outlier_system(model, spec.u)
    smodel = spectrum.random_model(model.C, model.D, profile.v_gamma,
                                   float(profile.v_alphas[0]),
                                   spec.eps_n, spec.c_n)

    def one(seed):
        d = generate_dataset(spec, seed)
        est = maronna_fixed_point(d, spec.u, cfg)
        return np.linalg.eigvalsh(est.matrix)

    eigs = np.sort(np.concatenate(_run_trials(one, _trial_seeds(spec, trials))))
    lo = min(1e-3, 0.5 * eigs[0])
    hi = 1.25 * eigs[-1]
    # log-spaced grid: the bulk often piles up orders of magnitude below the
    # spectral edge, where a linear grid would under-resolve the density
    grid = np.geomspace(lo, hi, grid_points)
    density = spectrum.density_on_grid(smodel, grid, y_imag=y_imag)
    cdf = density.cdf()
    ecdf = (np.arange(len(eigs)) + 1.0) / len(eigs)
    model_cdf = np.interp(eigs, grid, cdf)
    dist = float(np.max(np.abs(ecdf - model_cdf)))
    counts, edges = np.histogram(eigs, bins=bins, density=True)
    return EsdResult(eigs, counts, edges, density, dist, profile)


def spike_detection(est: np.ndarray, window, gap_factor: float = 3.0):
    """Flag eigenvalues inside ``window`` isolated from both neighbors.

    An eigenvalue is isolated when its gap to each neighbor exceeds
    ``gap_factor`` times the median inter-eigenvalue spacing.
    """
    lam = np.linalg.eigvalsh(est)
    if len(lam) < 3:
        return []
    gaps = np.diff(lam)
    med = np.median(gaps)
    thresh = gap_factor * med
    lo, hi = window
    flagged = []
    for i, x in enumerate(lam):
        if not lo < x < hi:
            continue
        left = gaps[i - 1] if i > 0 else np.inf
        right = gaps[i] if i < len(lam) - 1 else np.inf
        if left > thresh and right > thresh:
            flagged.append(float(x))
    return flagged


@dataclass(frozen=True)
class MomentComparison:
    orders: np.ndarray             # p = 2 .. p_max
    robust: np.ndarray             # normalized moments
    scm: np.ndarray
    oracle: np.ndarray
    robust_error: np.ndarray       # relative error versus the oracle row
    scm_error: np.ndarray
    profile: WeightProfile


def moment_comparison_experiment(spec: ScenarioSpec,
                                 p_max: int = 4) -> MomentComparison:
    """Normalized-moment table: robust equivalent vs SCM vs oracle."""
    model = population_model(spec)
    if model.D is None:
        raise ValueError("moment comparison requires the random-outlier scenario")
    profile = solve_random_outlier_system(model, spec.u)
    C, D = model.C, model.D
    eps, c_n = spec.eps_n, spec.c_n

    robust = spectrum.normalized_moments(spectrum.moments_random(
        spectrum.random_model(C, D, profile.v_gamma,
                              float(profile.v_alphas[0]), eps, c_n), p_max))
    scm_row = spectrum.normalized_moments(spectrum.moments_random(
        spectrum.scm_model(C, D, eps, c_n), p_max))
    oracle = spectrum.normalized_moments(spectrum.moments_deterministic(
        spectrum.oracle_model(C, eps, c_n), p_max))

    sl = slice(1, p_max)
    return MomentComparison(
        orders=np.arange(2, p_max + 1),
        robust=robust[sl],
        scm=scm_row[sl],
        oracle=oracle[sl],
        robust_error=np.abs(robust[sl] - oracle[sl]) / oracle[sl],
        scm_error=np.abs(scm_row[sl] - oracle[sl]) / oracle[sl],
        profile=profile,
    )


# ---------------------------------------------------------------------------
# Built-in scenarios
# ---------------------------------------------------------------------------

def builtin_scenario(name: str) -> ScenarioSpec:
    if name == "fig1":
        return build_fig1_scenario()[0]
    if name == "fig2":
        return ScenarioSpec(
            name="fig2", N=50, n=200, u=UFunction("student", 0.1),
            cov={"kind": "toeplitz", "rho": 0.9},
            outliers={"kind": "gaussian", "cov": {"kind": "identity"}},
            eps_n=0.05, seed=2, trials=100, dtype="complex")
    if name == "fig3":
        return ScenarioSpec(
            name="fig3", N=100, n=400, u=UFunction("student", 0.1),
            cov={"kind": "toeplitz", "rho": 0.9},
            outliers={"kind": "gaussian", "cov": {"kind": "toeplitz", "rho": 0.2}},
            eps_n=0.05, seed=0, trials=20, dtype="complex")
    if name in ("fig4", "fig5"):
        return ScenarioSpec(
            name=name, N=100, n=500, u=UFunction("huber", 0.1),
            cov={"kind": "toeplitz", "rho": 0.9},
            outliers={"kind": "gaussian", "cov": {"kind": "identity"}},
            eps_n=0.05, seed=45, trials=50)
    raise ConfigError(f"unknown built-in scenario {name!r}")


def fit_all_estimators(d: Dataset, u: UFunction,
                       cfg: SolverConfig = SolverConfig()):
    """Convenience: SCM, normalized SCM, Maronna and oracle on one dataset."""
    return {
        "scm": scm(d),
        "nscm": normalized_scm(d),
        "maronna": maronna_fixed_point(d, u, cfg).matrix,
        "oracle": oracle_scm(d),
    }
