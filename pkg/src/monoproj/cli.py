"""Command line entry point: ``monoproj simulate | fit | project | benchmark``.

Settings come from built-in defaults, then an optional JSON file
(``--config``), then explicit flags; later sources win.  The JSON file may
hold any flag by its long name (dashes as underscores) and an ``"mcmc"``
object with :class:`~monoproj.mcmc.McmcConfig` fields such as priors.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import inference, mcmc, simgen
from .gp import FactorizationError, lattice_axes
from .proj2d import DEFAULT_MAX_ITER, DEFAULT_TOL, project_monotone

log = logging.getLogger("monoproj")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3

DEFAULTS = {
    "model": "gaussian",
    "dim": None,
    "iters": None,
    "burnin": None,
    "seed": 0,
    "level": 0.99,
    "replicates": 10,
    "jobs": 1,
    "tol": DEFAULT_TOL,
    "max_iter": DEFAULT_MAX_ITER,
    "truth": "flat",
    "truths": ",".join(simgen.CURVE_TRUTHS),
    "n": 100,
    "sigma": 1.0,
    "design": "equidistant",
    "shape": None,
    "binary": False,
    "mcmc": {},
}
# excluded from the echoed config so outputs do not depend on them
_NOT_ECHOED = ("jobs", "config", "command", "data", "out")


class InputError(ValueError):
    """Bad user input; maps to exit code 2."""


def fmt(v) -> str:
    """Shortest text that round-trips a float64 exactly."""
    return format(float(v), ".17g")


# ---------------------------------------------------------------- CSV I/O

def read_table(path) -> dict:
    """Read a numeric CSV with a header row into ``{column: array}``.

    Raises:
      InputError: missing file, empty file, ragged or non-numeric rows (the
        message carries the line number).
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{path}: no such file")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header) or any(not h for h in header):
        raise InputError(f"{path}:1: header has blank or repeated column names")
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise InputError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            vals = [float(c) for c in row]
        except ValueError:
            raise InputError(f"{path}:{lineno}: non-numeric field in {row!r}") from None
        if not all(math.isfinite(v) for v in vals):
            raise InputError(f"{path}:{lineno}: non-finite value")
        data.append(vals)
    arr = np.array(data, dtype=float).reshape(len(data), len(header))
    return {h: arr[:, i] for i, h in enumerate(header)}


def write_table(path, columns: dict):
    """Write equal-length columns as CSV with 17 significant digits."""
    names = list(columns)
    cols = [np.asarray(columns[c]).ravel() for c in names]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(names) + "\n")
        for i in range(len(cols[0]) if cols else 0):
            fh.write(",".join(fmt(c[i]) for c in cols) + "\n")


def _design_columns(table, path):
    if "x" in table:
        return [table["x"]]
    keys = [k for k in ("x1", "x2", "x3") if k in table]
    if not keys or keys != ["x1", "x2", "x3"][: len(keys)]:
        raise InputError(f"{path}: need an 'x' column or 'x1,x2[,x3]' columns")
    return [table[k] for k in keys]


def load_dataset(path, response=("y",)):
    """Design matrix, response and optional weight / trials columns."""
    table = read_table(path)
    cols = _design_columns(table, path)
    name = next((r for r in response if r in table), None)
    if name is None:
        raise InputError(f"{path}: missing response column ({' or '.join(response)})")
    X = cols[0] if len(cols) == 1 else np.column_stack(cols)
    return X, table[name], table.get("weight"), table.get("trials")


# ---------------------------------------------------------------- config

def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _clean(o):
    # JSON has no nan/inf
    if isinstance(o, float) and not math.isfinite(o):
        return None
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, np.generic):
        return _clean(o.item())
    return o


def dump_json(path, obj):
    text = json.dumps(_clean(obj), indent=2, sort_keys=True, default=_json_default)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text + "\n")


def resolve_config(args) -> dict:
    """Defaults, then the JSON config file, then explicit flags."""
    cfg = dict(DEFAULTS)
    if args.config:
        p = Path(args.config)
        if not p.is_file():
            raise InputError(f"{p}: no such config file")
        try:
            loaded = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InputError(f"{p}:{exc.lineno}: invalid JSON: {exc.msg}") from None
        if not isinstance(loaded, dict):
            raise InputError(f"{p}: config must be a JSON object")
        unknown = set(loaded) - set(DEFAULTS) - {"data", "out"}
        if unknown:
            raise InputError(f"{p}: unknown config keys {sorted(unknown)}")
        cfg.update(loaded)
    for k, v in vars(args).items():
        if v is not None:
            cfg[k] = v
    return cfg


def mcmc_config(cfg, dim, seed) -> mcmc.McmcConfig:
    base = mcmc.McmcConfig.curves() if dim == 1 else mcmc.McmcConfig.surfaces()
    fields = base.to_dict()
    extra = dict(cfg.get("mcmc") or {})
    unknown = set(extra) - set(fields)
    if unknown:
        raise InputError(f"unknown mcmc settings {sorted(unknown)}")
    fields.update(extra)
    if cfg.get("iters") is not None:
        fields["n_iter"] = int(cfg["iters"])
    if cfg.get("burnin") is not None:
        fields["burn_in"] = int(cfg["burnin"])
    fields["seed"] = int(seed)
    for k in ("beta_prior", "gamma_prior", "precision_prior"):
        fields[k] = tuple(fields[k])
    if isinstance(fields.get("init_gamma"), list):
        fields["init_gamma"] = tuple(fields["init_gamma"])
    try:
        return mcmc.McmcConfig(**fields)
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid sampler settings: {exc}") from None


def _echo(cfg):
    return {k: v for k, v in cfg.items() if k not in _NOT_ECHOED}


# ---------------------------------------------------------------- commands

def cmd_simulate(cfg) -> int:
    if not cfg.get("out"):
        raise InputError("--out is required")
    dim = int(cfg["dim"] or 1)
    shape = tuple(cfg["shape"]) if cfg.get("shape") else None
    n = int(cfg["n"]) if shape is None else shape[0] * shape[1]
    try:
        ds = simgen.simulate(cfg["truth"], n, sigma=float(cfg["sigma"]), design=cfg["design"],
                             seed=int(cfg["seed"]), dim=dim, shape=shape,
                             binary=bool(cfg["binary"]))
    except KeyError as exc:
        raise InputError(exc.args[0]) from None
    cols = {"x": ds.X} if dim == 1 else {"x1": ds.X[:, 0], "x2": ds.X[:, 1]}
    cols["y"] = ds.y
    if ds.trials is not None:
        cols["trials"] = ds.trials
    write_table(cfg["out"], cols)
    log.info("wrote %d rows to %s", len(ds), cfg["out"])
    return EXIT_OK


def _estimate_columns(X, summary):
    X = np.asarray(X)
    cols = {"x": X} if X.ndim == 1 else {("x" if i == 0 else f"x{i + 1}"): X[:, i]
                                         for i in range(X.shape[1])}
    cols.update(mean=summary.posterior_mean, lo=summary.band_lower, hi=summary.band_upper)
    if X.ndim == 1:
        order = np.argsort(X, kind="stable")
        cols = {k: np.asarray(v)[order] for k, v in cols.items()}
    return cols


def cmd_fit(cfg) -> int:
    if not cfg.get("data") or not cfg.get("out"):
        raise InputError("--data and --out are required")
    X, y, weights, trials = load_dataset(cfg["data"])
    dim = 1 if X.ndim == 1 else X.shape[1]
    if cfg.get("dim") is not None and int(cfg["dim"]) != dim:
        raise InputError(f"--dim {cfg['dim']} does not match the {dim} design columns")
    if dim > 1 and lattice_axes(X) is None:
        raise InputError("designs with 2 or more inputs must form a full lattice")
    if len(y) < 2:
        raise InputError("need at least two observations")
    model = cfg["model"]
    if model not in ("gaussian", "probit"):
        raise InputError(f"unknown model {model!r}")
    level = float(cfg["level"])
    if not 0 < level < 1:
        raise InputError("--level must lie strictly between 0 and 1")
    mc = mcmc_config(cfg, dim, cfg["seed"])
    if mc.n_iter - mc.burn_in < 50:
        raise InputError("need at least 50 retained draws (iters - burnin)")
    fit = inference.fit_monotone(y, X, model=model, config=mc, level=level, weights=weights,
                                 trials=trials, tol_mono=float(cfg["tol"]),
                                 max_iter=int(cfg["max_iter"]), jobs=int(cfg["jobs"]))
    out = Path(cfg["out"])
    write_table(out, _estimate_columns(X, fit.summary))
    if model == "gaussian":
        report = inference.fit_report(fit.summary, y)
    else:
        rate = y / (trials if trials is not None else 1.0)
        report = inference.fit_report(fit.summary, rate)
        report.pop("sigma_bar", None)
    diag = {
        "model": model,
        "n": int(len(y)),
        "dim": dim,
        "seed": int(cfg["seed"]),
        "sigma_bar": fit.summary.sigma_bar if model == "gaussian" else None,
        "fit": report,
        "chain": mcmc.chain_diagnostics(fit.draws, min_draws=1),
        "projection": fit.projected.stats(),
        "step_sizes": fit.draws.step_sizes,
        "config": {**_echo(cfg), "mcmc": mc.to_dict()},
    }
    dump_json(out.with_suffix(".json"), diag)
    n_bad = diag["projection"]["n_not_converged"]
    if n_bad:
        log.warning("%d projections did not converge; see %s", n_bad, out.with_suffix(".json"))
    return EXIT_OK


def cmd_project(cfg) -> int:
    if not cfg.get("data") or not cfg.get("out"):
        raise InputError("--data and --out are required")
    X, v, weights, _ = load_dataset(cfg["data"], response=("value", "y"))
    name = "value" if "value" in read_table(cfg["data"]) else "y"
    if X.ndim == 1:
        proj = inference.project_draws(v[None, :], points=X, weights=weights)
        cols = {"x": X, name: proj.values[0]}
        if weights is not None:
            cols["weight"] = weights
        write_table(cfg["out"], cols)
        return EXIT_OK
    found = lattice_axes(X)
    if found is None:
        raise InputError("gridded input must cover a full lattice")
    axes, order = found
    shape = tuple(len(a) for a in axes)
    wl = None if weights is None else weights[order].reshape(shape)
    res, it, viol, ok, _, _ = project_monotone(v[order].reshape(shape), tol_mono=float(cfg["tol"]),
                                               max_iter=int(cfg["max_iter"]), weights=wl)
    out = np.empty_like(v)
    out[order] = res.ravel()
    cols = {f"x{i + 1}": X[:, i] for i in range(X.shape[1])}
    cols[name] = out
    if weights is not None:
        cols["weight"] = weights
    write_table(cfg["out"], cols)
    print(f"iterations={it} max_violation={fmt(viol)} converged={str(bool(ok)).lower()}")
    return EXIT_OK


def _benchmark_replicate(task):
    """One simulated dataset, one fit, RMSE of both estimates at the design."""
    truth, dim, n, sigma, rep_seed, cfg = task
    data_seed, chain_seed = mcmc.spawn_seeds(rep_seed, 2)
    try:
        ds = simgen.simulate(truth, n, sigma=sigma, seed=data_seed, dim=dim)
        mc = mcmc_config(cfg, dim, chain_seed)
        fit = inference.fit_monotone(ds.y, ds.X, config=mc, level=float(cfg["level"]),
                                     tol_mono=float(cfg["tol"]), max_iter=int(cfg["max_iter"]))
    except (mcmc.McmcError, FactorizationError, FloatingPointError) as exc:
        return truth, None, None, f"{type(exc).__name__}: {exc}"
    return (truth, inference.rmse(fit.unprojected.posterior_mean, ds.f0),
            inference.rmse(fit.summary.posterior_mean, ds.f0), None)


def cmd_benchmark(cfg) -> int:
    if not cfg.get("out"):
        raise InputError("--out is required")
    reps = int(cfg["replicates"])
    if reps < 1:
        raise InputError("--replicates must be at least 1")
    dim = int(cfg["dim"] or 1)
    table = simgen.CURVE_TRUTHS if dim == 1 else simgen.SURFACE_TRUTHS
    truths = [t.strip() for t in str(cfg["truths"]).split(",") if t.strip()]
    if dim == 2 and cfg["truths"] == DEFAULTS["truths"]:
        truths = list(table)
    bad = [t for t in truths if t not in table]
    if bad:
        raise InputError(f"unknown truths {bad}; choose from {sorted(table)}")
    n = int(cfg["n"])
    mcmc_config(cfg, dim, 0)  # validate before spawning work
    seeds = mcmc.spawn_seeds(int(cfg["seed"]), reps)
    tasks = [(t, dim, n, float(cfg["sigma"]), s, cfg) for t in truths for s in seeds]
    jobs = max(1, int(cfg["jobs"]))
    if jobs == 1:
        results = [_benchmark_replicate(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_benchmark_replicate, tasks))
    rows = {"truth": [], "method": [], "rmse": [], "mc_se": [], "n_ok": [], "n_failed": []}
    for t in truths:
        res = [r for r in results if r[0] == t]
        failed = [r[3] for r in res if r[3] is not None]
        for msg in failed:
            log.warning("replicate failed for %s: %s", t, msg)
        for col, method in ((1, "gp"), (2, "gp_projection")):
            vals = np.array([r[col] for r in res if r[3] is None])
            rows["truth"].append(t)
            rows["method"].append(method)
            rows["rmse"].append(vals.mean() if len(vals) else float("nan"))
            rows["mc_se"].append(vals.std(ddof=1) / math.sqrt(len(vals)) if len(vals) > 1 else float("nan"))
            rows["n_ok"].append(len(vals))
            rows["n_failed"].append(len(failed))
    _write_benchmark(cfg["out"], rows)
    return EXIT_OK


def _write_benchmark(path, rows):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(rows) + "\n")
        for i in range(len(rows["truth"])):
            fh.write(",".join([rows["truth"][i], rows["method"][i], fmt(rows["rmse"][i]),
                               fmt(rows["mc_se"][i]), str(rows["n_ok"][i]),
                               str(rows["n_failed"][i])]) + "\n")


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of settings; flags override it")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output path")

    sampler = argparse.ArgumentParser(add_help=False)
    sampler.add_argument("--dim", type=int, choices=(1, 2, 3))
    sampler.add_argument("--iters", type=int, help="total MCMC iterations")
    sampler.add_argument("--burnin", type=int, help="discarded initial iterations")
    sampler.add_argument("--level", type=float, help="credible level of the bands (default 0.99)")
    sampler.add_argument("--jobs", type=int, help="worker processes")
    sampler.add_argument("--tol", type=float, help="monotonicity tolerance of surface projections")
    sampler.add_argument("--max-iter", dest="max_iter", type=int, help="sweep cap of surface projections")

    p = argparse.ArgumentParser(prog="monoproj", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="write a simulated dataset")
    s.add_argument("--truth")
    s.add_argument("--n", type=int)
    s.add_argument("--sigma", type=float)
    s.add_argument("--design", choices=("equidistant", "uniform"))
    s.add_argument("--dim", type=int, choices=(1, 2))
    s.add_argument("--shape", type=int, nargs=2, metavar=("M1", "M2"))
    s.add_argument("--binary", action="store_true", default=None)

    f = sub.add_parser("fit", parents=[common, sampler], help="fit a monotone GP projection")
    f.add_argument("--data")
    f.add_argument("--model", choices=("gaussian", "probit"))

    pr = sub.add_parser("project", parents=[common], help="project values onto monotone functions")
    pr.add_argument("--data")
    pr.add_argument("--tol", type=float)
    pr.add_argument("--max-iter", dest="max_iter", type=int)

    b = sub.add_parser("benchmark", parents=[common, sampler], help="simulation study of RMSE")
    b.add_argument("--replicates", type=int)
    b.add_argument("--truths", help="comma-separated truth names")
    b.add_argument("--n", type=int)
    b.add_argument("--sigma", type=float)
    return p


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "project": cmd_project,
            "benchmark": cmd_benchmark}


def _setup_logging():
    level = os.environ.get("MONOPROJ_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "benchmark" and args.seed is None and "seed" not in _config_keys(args):
            raise InputError("benchmark needs an explicit --seed")
        return COMMANDS[args.command](cfg)
    # LinAlgError subclasses ValueError, so numerical failures go first
    except (mcmc.McmcError, FactorizationError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"monoproj {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, ValueError, KeyError) as exc:
        print(f"monoproj {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def _config_keys(args):
    if not args.config:
        return set()
    return set(json.loads(Path(args.config).read_text(encoding="utf-8")))


if __name__ == "__main__":
    sys.exit(main())
