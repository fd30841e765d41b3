"""Command-line front end: scenario configs in, CSV/JSON/SVG artifacts out.

Subcommands::

    weights     solve the weight system of a scenario, print the profile JSON
    estimate    fit SCM / normalized SCM / oracle / Maronna, emit eigenvalues
    density     limiting spectral density on a grid (CSV + SVG)
    moments     asymptotic moment table: robust equivalent vs SCM vs oracle
    experiment  run a built-in scenario end to end

Scenarios are either built-in names (fig1 .. fig5) or JSON files with a
versioned schema; unknown keys are rejected.  Every run that writes to an
output directory also writes ``summary.json`` echoing the fully resolved
configuration so the run can be replayed exactly.  Exit codes: 0 success,
2 configuration error, 3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time

import numpy as np

from . import __version__, simulate, spectrum
from .det_equiv import epsilon_zero_limit
from .estimators import (
    Dataset,
    SolverConfig,
    load_dataset_csv,
    load_dataset_json,
    maronna_fixed_point,
    normalized_scm,
    oracle_scm,
    scm,
)
from .exceptions import AdmissibilityError, ConfigError, ConvergenceError
from .simulate import ScenarioSpec, builtin_scenario, population_model
from .weights import UFunction, eval_v

SCENARIO_SCHEMA = "robust-scatter/scenario-v1"
BUILTIN_NAMES = ("fig1", "fig2", "fig3", "fig4", "fig5")

_SCENARIO_KEYS = {"schema", "name", "N", "n", "u", "cov", "outliers",
                  "eps_n", "seed", "trials", "dtype"}
_U_KEYS = {"kind", "t"}


def load_scenario_file(path: str) -> ScenarioSpec:
    """Parse a scenario JSON file with strict key checking."""
    with open(path) as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ConfigError("scenario file must hold a JSON object")
    if raw.get("schema") != SCENARIO_SCHEMA:
        raise ConfigError(
            f"unsupported scenario schema {raw.get('schema')!r} "
            f"(expected {SCENARIO_SCHEMA!r})")
    unknown = set(raw) - _SCENARIO_KEYS
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
    missing = {"name", "N", "n", "u", "cov", "outliers", "eps_n"} - set(raw)
    if missing:
        raise ConfigError(f"missing scenario keys: {sorted(missing)}")
    u_raw = raw["u"]
    if not isinstance(u_raw, dict) or set(u_raw) - _U_KEYS:
        raise ConfigError("scenario key 'u' must be {kind, t}")
    try:
        return ScenarioSpec(
            name=str(raw["name"]), N=int(raw["N"]), n=int(raw["n"]),
            u=UFunction(str(u_raw["kind"]), float(u_raw["t"])),
            cov=dict(raw["cov"]), outliers=dict(raw["outliers"]),
            eps_n=float(raw["eps_n"]), seed=int(raw.get("seed", 0)),
            trials=int(raw.get("trials", 100)),
            dtype=str(raw.get("dtype", "real")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid scenario file: {exc}") from exc


def resolve_scenario(args) -> ScenarioSpec:
    """Built-in name or JSON path, with command-line overrides applied."""
    name = args.scenario
    if name in BUILTIN_NAMES:
        spec = builtin_scenario(name)
    elif os.path.exists(name):
        spec = load_scenario_file(name)
    else:
        raise ConfigError(
            f"scenario {name!r} is neither a built-in ({', '.join(BUILTIN_NAMES)}) "
            "nor an existing file")

    changes = {}
    if args.N is not None:
        # preserve the aspect ratio c_n unless n is pinned by the file
        changes["N"] = args.N
        changes["n"] = round(args.N / spec.c_n)
    if args.t is not None or args.umode is not None:
        kind = args.umode or spec.u.kind
        t = args.t if args.t is not None else spec.u.t
        changes["u"] = UFunction(kind, t)
    if args.eps is not None:
        changes["eps_n"] = args.eps
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.trials is not None:
        changes["trials"] = args.trials
    return dataclasses.replace(spec, **changes) if changes else spec


def scenario_dict(spec: ScenarioSpec) -> dict:
    return {
        "schema": SCENARIO_SCHEMA,
        "name": spec.name,
        "N": spec.N,
        "n": spec.n,
        "u": {"kind": spec.u.kind, "t": spec.u.t},
        "cov": spec.cov,
        "outliers": spec.outliers,
        "eps_n": spec.eps_n,
        "seed": spec.seed,
        "trials": spec.trials,
        "dtype": spec.dtype,
    }


def write_summary(out_dir: str, subcommand: str, spec: ScenarioSpec,
                  solver: SolverConfig, extra: dict | None = None) -> None:
    payload = {
        "tool": "robust-scatter",
        "version": __version__,
        "subcommand": subcommand,
        "scenario": scenario_dict(spec),
        "solver": {"tol": solver.tol, "max_iter": solver.max_iter},
        "threads": simulate.worker_count(),
    }
    if extra:
        payload.update(extra)
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def write_csv(path: str, header: list, rows) -> None:
    """Locale-independent CSV: '.' decimals, '\\n' endings, repr floats."""
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(
                repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)
                for x in row) + "\n")


def polyline_svg(path: str, x: np.ndarray, y: np.ndarray, title: str,
                 width: int = 640, height: int = 400, margin: int = 45) -> None:
    """Minimal SVG line chart: one polyline, axes, corner labels."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x0, x1 = float(x.min()), float(x.max())
    y0, y1 = 0.0, float(y.max()) * 1.05 or 1.0
    sx = (width - 2 * margin) / (x1 - x0 if x1 > x0 else 1.0)
    sy = (height - 2 * margin) / (y1 - y0 if y1 > y0 else 1.0)
    pts = " ".join(
        f"{margin + (xi - x0) * sx:.2f},{height - margin - (yi - y0) * sy:.2f}"
        for xi, yi in zip(x, y))
    ax = (f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
          f'y2="{height - margin}" stroke="black"/>'
          f'<line x1="{margin}" y1="{margin}" x2="{margin}" '
          f'y2="{height - margin}" stroke="black"/>')
    labels = (
        f'<text x="{margin}" y="{margin - 10}" font-size="13">{title}</text>'
        f'<text x="{margin}" y="{height - margin + 16}" font-size="11">'
        f'{x0:.3g}</text>'
        f'<text x="{width - margin - 20}" y="{height - margin + 16}" '
        f'font-size="11">{x1:.3g}</text>'
        f'<text x="{5}" y="{margin + 5}" font-size="11">{y1:.3g}</text>')
    with open(path, "w", newline="\n") as fh:
        fh.write(
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}">\n<rect width="100%" height="100%" '
            f'fill="white"/>\n{ax}\n{labels}\n'
            f'<polyline fill="none" stroke="steelblue" stroke-width="1.5" '
            f'points="{pts}"/>\n</svg>\n')


def _ensure_out(args) -> str | None:
    if args.out is None:
        return None
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _spectral_model(spec: ScenarioSpec, profile):
    model = population_model(spec)
    if model.D is not None:
        return spectrum.random_model(model.C, model.D, profile.v_gamma,
                                     float(profile.v_alphas[0]),
                                     spec.eps_n, spec.c_n)
    A = np.zeros_like(model.C)
    for a, va in zip(model.outliers or [], np.atleast_1d(profile.v_alphas)):
        A += va * np.outer(a, a) / model.n
    return spectrum.deterministic_model(model.C, profile.v_gamma,
                                        spec.eps_n, spec.c_n, A=A)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_weights(args, solver: SolverConfig) -> int:
    spec = resolve_scenario(args)
    profile = simulate.solve_scenario_weights(spec, tol=solver.tol,
                                              max_iter=solver.max_iter)
    doc = json.loads(profile.to_json())
    model = population_model(spec)
    if model.D is not None:
        gamma_lim, alpha_lim = epsilon_zero_limit(model, spec.u)
        doc["epsilon_zero_limit"] = {
            "gamma": gamma_lim,
            "alpha": alpha_lim,
            "v_alpha": float(eval_v(spec.u, spec.c_n, alpha_lim)),
        }
    text = json.dumps(doc, indent=2)
    print(text)
    out = _ensure_out(args)
    if out:
        with open(os.path.join(out, "weights.json"), "w") as fh:
            fh.write(text + "\n")
        write_summary(out, "weights", spec, solver)
    return 0


def cmd_estimate(args, solver: SolverConfig) -> int:
    spec = resolve_scenario(args)
    if args.data:
        if args.data.endswith(".json"):
            d = load_dataset_json(args.data)
        else:
            d = load_dataset_csv(args.data)
    else:
        d = simulate.generate_dataset(spec)
    fits = {
        "scm": scm(d),
        "nscm": normalized_scm(d),
        "oracle": oracle_scm(d),
        "maronna": maronna_fixed_point(d, spec.u, solver).matrix,
    }
    rows = []
    for name, M in fits.items():
        for k, lam in enumerate(np.linalg.eigvalsh(M)):
            rows.append((name, k, float(lam)))
    out = _ensure_out(args)
    if out:
        write_csv(os.path.join(out, "eigenvalues.csv"),
                  ["estimator", "index", "eigenvalue"], rows)
        write_summary(out, "estimate", spec, solver,
                      {"data_file": args.data, "N": d.N, "n": d.n})
    else:
        for name, M in fits.items():
            lam = np.linalg.eigvalsh(M)
            print(f"{name}: min={lam[0]:.6g} max={lam[-1]:.6g}")
    return 0


def cmd_density(args, solver: SolverConfig) -> int:
    spec = resolve_scenario(args)
    profile = simulate.solve_scenario_weights(spec, tol=solver.tol,
                                              max_iter=solver.max_iter)
    smodel = _spectral_model(spec, profile)
    hi = 1.25 * float(np.linalg.eigvalsh(smodel.C).max()) * profile.v_gamma \
        * (1 + np.sqrt(spec.c_n)) ** 2
    grid = np.geomspace(1e-3, max(hi, 1.0), args.grid_points)
    est = spectrum.density_on_grid(smodel, grid)
    out = _ensure_out(args)
    if out:
        write_csv(os.path.join(out, "density.csv"), ["x", "density"],
                  zip(est.x, est.density))
        polyline_svg(os.path.join(out, "density.svg"), est.x, est.density,
                     f"limiting spectral density [{spec.name}]")
        write_summary(out, "density", spec, solver,
                      {"grid_points": args.grid_points,
                       "density_integral": est.integral()})
    else:
        print(f"density on {args.grid_points} points, "
              f"integral {est.integral():.4f}")
    return 0


def cmd_moments(args, solver: SolverConfig) -> int:
    spec = resolve_scenario(args)
    comp = simulate.moment_comparison_experiment(spec, p_max=args.p_max)
    rows = [
        (int(p), r, s, o, re, se)
        for p, r, s, o, re, se in zip(comp.orders, comp.robust, comp.scm,
                                      comp.oracle, comp.robust_error,
                                      comp.scm_error)
    ]
    out = _ensure_out(args)
    header = ["order", "robust", "scm", "oracle",
              "robust_rel_error", "scm_rel_error"]
    if out:
        write_csv(os.path.join(out, "moments.csv"), header, rows)
        write_summary(out, "moments", spec, solver, {"p_max": args.p_max})
    for row in rows:
        print(f"p={row[0]}: robust={row[1]:.6g} scm={row[2]:.6g} "
              f"oracle={row[3]:.6g} err={100 * row[4]:.2f}%/"
              f"{100 * row[5]:.2f}%")
    return 0


def cmd_experiment(args, solver: SolverConfig) -> int:
    spec = resolve_scenario(args)
    out = _ensure_out(args)
    t0 = time.perf_counter()
    extra: dict = {}

    if spec.name == "fig1":
        counts = {"scm": 0, "nscm": 0, "maronna": 0, "oracle": 0}
        window = (0.15, 0.35)
        for seed in simulate._trial_seeds(spec, spec.trials):
            d = simulate.generate_dataset(spec, seed)
            fits = simulate.fit_all_estimators(d, spec.u, solver)
            for name, M in fits.items():
                counts[name] += bool(simulate.spike_detection(M, window))
        extra["spike_counts"] = counts
        extra["trials"] = spec.trials
        print(f"spike flags over {spec.trials} trials: {counts}")
    elif spec.name == "fig3":
        means = {}
        for N in (20, 80, 100):
            sub = dataclasses.replace(spec, N=N, n=round(N / spec.c_n))
            res = simulate.equivalence_error_experiment(sub, spec.trials,
                                                        solver)
            means[N] = res.mean
            print(f"N={N}: mean relative error {res.mean:.4f} "
                  f"(std {res.std:.4f})")
        extra["mean_errors"] = {str(k): v for k, v in means.items()}
        extra["ratio_20_80"] = means[20] / means[80]
    elif spec.name in ("fig4",):
        return cmd_weights(args, solver)
    elif spec.name in ("fig5",):
        return cmd_moments(args, solver)
    else:  # fig2 and custom scenarios: ESD against the limiting density
        res = simulate.esd_histogram_experiment(spec, spec.trials, cfg=solver)
        extra["cdf_distance"] = res.cdf_distance
        extra["trials"] = spec.trials
        print(f"sup-CDF distance over {spec.trials} trials: "
              f"{res.cdf_distance:.4f}")
        if out:
            centers = 0.5 * (res.hist_edges[1:] + res.hist_edges[:-1])
            write_csv(os.path.join(out, "esd_hist.csv"),
                      ["bin_center", "density"],
                      zip(centers, res.hist_counts))
            write_csv(os.path.join(out, "density.csv"), ["x", "density"],
                      zip(res.density.x, res.density.density))
            polyline_svg(os.path.join(out, "density.svg"), res.density.x,
                         res.density.density,
                         f"limiting density vs pooled ESD [{spec.name}]")

    extra["elapsed_seconds"] = time.perf_counter() - t0
    if out:
        write_summary(out, "experiment", spec, solver, extra)
    return 0


# ---------------------------------------------------------------------------
# argument parsing / entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robust-scatter",
        description="Robust scatter estimation and its large-dimensional "
                    "deterministic equivalents.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--scenario", required=True,
                       help="built-in name (fig1..fig5) or scenario JSON file")
        p.add_argument("--out", help="output directory for artifacts")
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--N", type=int)
        p.add_argument("--t", type=float)
        p.add_argument("--eps", type=float)
        p.add_argument("--umode", choices=["student", "huber"])
        p.add_argument("--tol", type=float, default=1e-9)
        p.add_argument("--max-iter", type=int, default=500)

    common(sub.add_parser("weights", help="solve the scenario weight system"))
    p_est = sub.add_parser("estimate", help="fit the four estimators")
    common(p_est)
    p_est.add_argument("--data", help="dataset CSV/JSON instead of simulation")
    p_den = sub.add_parser("density", help="limiting spectral density")
    common(p_den)
    p_den.add_argument("--grid-points", type=int, default=400)
    p_mom = sub.add_parser("moments", help="asymptotic moment table")
    common(p_mom)
    p_mom.add_argument("--p-max", type=int, default=4)
    common(sub.add_parser("experiment", help="run a scenario end to end"))
    return parser


_COMMANDS = {
    "weights": cmd_weights,
    "estimate": cmd_estimate,
    "density": cmd_density,
    "moments": cmd_moments,
    "experiment": cmd_experiment,
}


def run_cli(argv=None) -> int:
    args = build_parser().parse_args(argv)
    solver = SolverConfig(tol=args.tol, max_iter=args.max_iter)
    try:
        return _COMMANDS[args.subcommand](args, solver)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, AdmissibilityError, ValueError, OSError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
