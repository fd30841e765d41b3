"""Scenario builders, data generation and the Monte Carlo harness."""

import numpy as np
import pytest

from robust_scatter.exceptions import ConfigError
from robust_scatter.simulate import (
    ScenarioSpec,
    build_cov,
    build_fig1_scenario,
    build_toeplitz_cov,
    builtin_scenario,
    equivalence_error_experiment,
    fit_all_estimators,
    generate_dataset,
    population_model,
    spike_detection,
    worker_count,
)
from robust_scatter.weights import STUDENT, UFunction


def small_scenario(**kw):
    base = dict(
        name="small", N=20, n=100, u=UFunction(STUDENT, 0.1),
        cov={"kind": "toeplitz", "rho": 0.5},
        outliers={"kind": "gaussian", "cov": {"kind": "identity"}},
        eps_n=0.05, seed=0, trials=5)
    base.update(kw)
    return ScenarioSpec(**base)


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def test_toeplitz_values():
    C = build_toeplitz_cov(0.9, 4)
    assert C[0, 0] == 1.0
    assert C[0, 1] == pytest.approx(0.9)
    assert C[0, 3] == pytest.approx(0.9 ** 3)
    assert np.allclose(C, C.T)
    with pytest.raises(ValueError):
        build_toeplitz_cov(1.0, 4)


def test_build_cov_dispatch():
    assert np.allclose(build_cov({"kind": "identity"}, 3), np.eye(3))
    B = build_cov({"kind": "diag-blocks", "values": [2.0, 1.0],
                   "sizes": [1, 2]}, 3)
    assert np.allclose(np.diag(B), [2.0, 1.0, 1.0])
    with pytest.raises(ConfigError):
        build_cov({"kind": "nope"}, 3)
    with pytest.raises(ConfigError):
        build_cov({"kind": "diag-blocks", "values": [1.0], "sizes": [2]}, 3)


def test_fig1_geometry():
    spec, model = build_fig1_scenario()
    C = build_cov(spec.cov, spec.N)
    a = model.outliers[0]
    assert np.trace(C) == pytest.approx(spec.N)
    assert a @ a == pytest.approx(spec.N)
    assert a @ np.linalg.solve(C, a) / spec.N == pytest.approx(14.50,
                                                               abs=1e-12)
    assert spec.n_outliers == 1


def test_fig1_requires_divisibility():
    with pytest.raises(ValueError):
        build_fig1_scenario(N=93)


def test_builtin_scenarios_resolve():
    for name in ("fig1", "fig2", "fig3", "fig4", "fig5"):
        spec = builtin_scenario(name)
        assert spec.name == name
        population_model(spec)      # must build without error
    with pytest.raises(ConfigError):
        builtin_scenario("fig9")


# ---------------------------------------------------------------------------
# data generation
# ---------------------------------------------------------------------------

def test_seed_determinism():
    spec = small_scenario()
    a = generate_dataset(spec, 42).samples
    b = generate_dataset(spec, 42).samples
    c = generate_dataset(spec, 43).samples
    assert a.tobytes() == b.tobytes()
    assert a.tobytes() != c.tobytes()


def test_generated_shapes_and_labels():
    spec = small_scenario()
    d = generate_dataset(spec)
    assert d.samples.shape == (20, 100)
    assert d.n_outliers == 5
    assert not np.iscomplexobj(d.samples)


def test_complex_dtype_generation():
    spec = small_scenario(dtype="complex")
    d = generate_dataset(spec, 1)
    assert np.iscomplexobj(d.samples)
    # unit-variance circular entries: E|y|^2 per column ~ tr C / N
    col_power = np.mean(np.abs(d.legitimate) ** 2)
    assert col_power == pytest.approx(np.trace(build_cov(spec.cov, 20)) / 20,
                                      rel=0.1)


def test_unknown_dtype_rejected():
    with pytest.raises(ConfigError):
        small_scenario(dtype="quaternion")


def test_legitimate_covariance_lln():
    spec = small_scenario(N=10, n=4000, eps_n=0.0,
                          outliers={"kind": "gaussian",
                                    "cov": {"kind": "identity"}})
    d = generate_dataset(spec, 7)
    C_hat = d.samples @ d.samples.T / d.n
    C = build_cov(spec.cov, 10)
    assert np.linalg.norm(C_hat - C, 2) / np.linalg.norm(C, 2) < 0.1


# ---------------------------------------------------------------------------
# experiments and detection
# ---------------------------------------------------------------------------

def test_equivalence_experiment_runs_and_is_deterministic():
    spec = small_scenario(N=20, n=100)
    r1 = equivalence_error_experiment(spec, 4)
    r2 = equivalence_error_experiment(spec, 4)
    assert r1.errors.shape == (4,)
    assert np.array_equal(r1.errors, r2.errors)
    assert 0 < r1.mean < 1
    with pytest.raises(ValueError):
        equivalence_error_experiment(spec, 1)


def test_spike_detection_flags_isolated_eigenvalue():
    # dense bulk far above the window plus one isolated eigenvalue inside it
    lam = np.concatenate([[0.25], np.linspace(1.0, 3.0, 60)])
    M = np.diag(lam)
    flagged = spike_detection(M, (0.15, 0.35))
    assert flagged == pytest.approx([0.25])
    # no flags when the window misses the spike
    assert spike_detection(M, (0.4, 0.9)) == []


def test_spike_detection_ignores_bulk():
    rng = np.random.default_rng(0)
    Y = rng.standard_normal((40, 400))
    assert spike_detection(Y @ Y.T / 400, (0.15, 0.35)) == []


def test_fit_all_estimators_keys():
    spec = small_scenario()
    d = generate_dataset(spec, 3)
    fits = fit_all_estimators(d, spec.u)
    assert set(fits) == {"scm", "nscm", "maronna", "oracle"}
    for M in fits.values():
        assert M.shape == (20, 20)


def test_worker_count_env_override(monkeypatch):
    monkeypatch.setenv("ROBUST_SCATTER_THREADS", "2")
    assert worker_count() == 2
    monkeypatch.setenv("ROBUST_SCATTER_THREADS", "zero")
    with pytest.raises(ConfigError):
        worker_count()
    monkeypatch.delenv("ROBUST_SCATTER_THREADS")
    assert worker_count() >= 1
