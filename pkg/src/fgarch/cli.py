"""
Command-line interface: ``fgarch <command> [options]``.

Every command writes its outputs into ``--out`` (default: current directory)
and prints a one-line JSON summary on stdout. Errors go to stderr as a single
JSON line ``{"error": ..., "message": ...}`` with a nonzero exit code.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from fgarch import basis as fbasis
from fgarch.errors import FGarchError
from fgarch.estimation import (
    FitOptions,
    ThetaBounds,
    delta_tilde,
    fit,
    project_sample,
    volatility_filter,
)
from fgarch.function_space import Grid
from fgarch.ingest import (
    filter_days,
    prices_to_log_returns,
    read_curves_table,
    read_prices_csv,
    write_curves_csv,
)
from fgarch.model import coupling_decay, decay_fit, lyapunov_l2, lyapunov_sup, moment_norm, simulate
from fgarch.presets import load_preset
from fgarch.replication import replicate, summarize

log = logging.getLogger("fgarch")

# defaults per command; a --config file may set any of these keys and
# explicit command-line flags override both
DEFAULTS = {
    "simulate": {"preset": "paper_sim", "n": None, "grid_T": None, "burnin": None, "seed": None, "out": "."},
    "estimate": {"data": None, "basis": "fpca", "M": None, "c1": 1e-6, "c2": 0.98, "cov": False,
                 "seed": None, "out": ".", "n_starts": 8, "min_n": 20},
    "diagnose": {"preset": "paper_sim", "grid_T": None, "reps": 10_000, "nu": 1.0, "ells": "1,2,4,8,16",
                 "coupling_reps": 500, "seed": None, "out": "."},
    "fpca": {"data": None, "M": None, "raw": False, "out": "."},
    "ingest": {"prices": None, "slots": 79, "out": "."},
    "replicate-table1": {"preset": "paper_sim", "n_values": "300,600,1200", "reps": 200, "grid_T": None,
                         "burnin": None, "c1": 1e-6, "c2": 0.98, "cov": False, "seed": None,
                         "workers": 1, "n_starts": 8, "out": "."},
}


class CLIError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail("UsageError", message, code=2)


def _fail(kind: str, message: str, code: int = 1):
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    sys.exit(code)


def _resolve_seed(seed, default=0):
    """``--seed`` (or config), then ``FGARCH_SEED``, then ``default``."""
    if seed is not None:
        return int(seed)
    env = os.environ.get("FGARCH_SEED")
    if env not in (None, ""):
        try:
            return int(env)
        except ValueError:
            raise CLIError(f"FGARCH_SEED must be an integer, got {env!r}") from None
    return default


def _resolve(command: str, args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS[command])
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise CLIError("config file must contain a JSON object")
        unknown = set(loaded) - set(cfg)
        if unknown:
            raise CLIError(f"unknown config keys for {command}: {sorted(unknown)}")
        cfg.update(loaded)
    for key in cfg:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _ints(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(v) for v in str(text).split(",") if v.strip()]


def _out_dir(cfg) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _finite_json(obj):
    # strict JSON has no infinities; a zero-norm draw makes a Lyapunov mean -inf
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _finite_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite_json(v) for v in obj]
    return obj


def _write_json(path: Path, obj) -> None:
    text = json.dumps(_finite_json(obj), indent=2, sort_keys=True, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")


def _write_kernel_csv(path: Path, values: np.ndarray, grid: Grid) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"s_{k}" for k in range(1, grid.T + 1)])
        for t, row in zip(grid.points, values):
            w.writerow(["%.17g" % t] + ["%.17g" % v for v in row])


def _write_curve_xy(path: Path, values: np.ndarray, grid: Grid, name: str) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", name])
        for t, v in zip(grid.points, values):
            w.writerow(["%.17g" % t, "%.17g" % v])


def cmd_simulate(cfg: dict) -> dict:
    # without an explicit seed the preset's own innovation seed applies
    sim_cfg = load_preset(cfg["preset"], grid_T=cfg["grid_T"], seed=_resolve_seed(cfg["seed"], None))
    seed = sim_cfg.gen.seed
    n = sim_cfg.n if cfg["n"] is None else int(cfg["n"])
    burnin = sim_cfg.burnin if cfg["burnin"] is None else int(cfg["burnin"])
    if n < 0 or burnin < 0:
        raise CLIError("n and burnin must be nonnegative")
    out = _out_dir(cfg)
    T = sim_cfg.grid.T
    if n == 0:
        y = sigma2 = eps = np.zeros((0, T))
    else:
        sim = simulate(sim_cfg.spec, sim_cfg.gen, n, burnin)
        y, sigma2, eps = sim.y, sim.sigma2, sim.eps
    files = {}
    for name, arr in (("y", y), ("sigma2", sigma2), ("eps", eps)):
        path = out / f"{name}.csv"
        write_curves_csv(arr, path, T=T)
        files[name] = str(path)
    manifest = {
        "preset": cfg["preset"],
        "spec": sim_cfg.raw,
        "grid_T": T,
        "n": n,
        "burnin": burnin,
        "seed": seed,
        "innovation": {"kind": sim_cfg.gen.kind, "rate": sim_cfg.gen.rate},
    }
    _write_json(out / "manifest.json", manifest)
    files["manifest"] = str(out / "manifest.json")
    return {"command": "simulate", "n": n, "files": files}


def _load_curves(path) -> np.ndarray:
    if path is None:
        raise CLIError("--data is required")
    _, values = read_curves_table(path)
    return values


def cmd_estimate(cfg: dict) -> dict:
    values = _load_curves(cfg["data"])
    n, T = values.shape
    min_n = int(cfg["min_n"])
    if n < min_n:
        raise CLIError(f"need at least {min_n} curves, got {n}")
    grid = Grid(T)
    kind = cfg["basis"]
    if kind == "fpca":
        full = fbasis.fpca(values**2, 1, grid)
        M = int(cfg["M"]) if cfg["M"] is not None else fbasis.select_m(full.eigenvalues)
        basis = fbasis.fpca(values**2, M, grid) if M != 1 else full
    else:
        M = int(cfg["M"]) if cfg["M"] is not None else 1
        basis = fbasis.make_basis(kind, M, grid)

    series = project_sample(values, basis)
    bounds = ThetaBounds(c1=float(cfg["c1"]), c2=float(cfg["c2"]))
    opts = FitOptions(n_starts=int(cfg["n_starts"]), seed=_resolve_seed(cfg["seed"]), min_n=min_n,
                      compute_cov=bool(cfg["cov"]))
    res = fit(series, bounds, opts)

    out = _out_dir(cfg)
    report = res.to_json()
    report["basis"] = basis.describe()
    report["n"] = n
    _write_json(out / "fit.json", report)
    _write_curve_xy(out / "delta_hat.csv", res.delta_hat.values, grid, "delta_hat")
    dtilde = delta_tilde(res.alpha_hat, res.beta_hat, values)
    _write_curve_xy(out / "delta_tilde.csv", dtilde.values, grid, "delta_tilde")
    _write_kernel_csv(out / "alpha_hat.csv", res.alpha_hat.values, grid)
    _write_kernel_csv(out / "beta_hat.csv", res.beta_hat.values, grid)
    _write_curves_csv_basis(out / "basis.csv", basis)
    vol, n_clipped = volatility_filter(res.theta_hat, series)
    write_curves_csv(vol, out / "volatility.csv")
    return {"command": "estimate", "n": n, "M": M, "theta": report["theta"],
            "objective": res.objective_value, "clipped_volatility_values": n_clipped,
            "files": sorted(p.name for p in out.iterdir() if p.suffix in (".csv", ".json"))}


def _write_curves_csv_basis(path: Path, basis) -> None:
    write_curves_csv(basis.values, path, days=[f"phi_{m}" for m in range(1, basis.M + 1)])


def cmd_diagnose(cfg: dict) -> dict:
    sim_cfg = load_preset(cfg["preset"], grid_T=cfg["grid_T"], seed=_resolve_seed(cfg["seed"], None))
    seed = sim_cfg.gen.seed
    spec, gen = sim_cfg.spec, sim_cfg.gen
    reps = int(cfg["reps"])
    nu = float(cfg["nu"])
    ells = _ints(cfg["ells"])
    rows = coupling_decay(spec, gen, ells, int(cfg["coupling_reps"]))
    lyap = lyapunov_l2(spec, gen, reps)
    lyap_c = lyapunov_sup(spec, gen, reps)
    m_hs = moment_norm(spec, gen, nu, reps, "hs")
    m_sup = moment_norm(spec, gen, nu, reps, "sup")
    report = {
        "preset": cfg["preset"],
        "seed": seed,
        "reps": reps,
        "nu": nu,
        "lyapunov_l2": lyap.as_dict(),
        "lyapunov_sup": lyap_c.as_dict(),
        "moment_hs": m_hs.as_dict(),
        "moment_sup": m_sup.as_dict(),
        "stationary_l2": bool(lyap.mean < 0),
        "stationary_l2_moment": bool(m_hs.mean < 1),
        "stationary_c": bool(lyap_c.mean < 0),
        "stationary_c_moment": bool(m_sup.mean < 1),
        "coupling": [{"ell": r.ell, "mean": r.mean, "stderr": r.stderr} for r in rows],
        "coupling_fit": decay_fit(rows),
    }
    out = _out_dir(cfg)
    _write_json(out / "diagnose.json", report)
    return {"command": "diagnose", "lyapunov_l2": lyap.mean, "stderr": lyap.stderr,
            "file": str(out / "diagnose.json")}


def cmd_fpca(cfg: dict) -> dict:
    values = _load_curves(cfg["data"])
    grid = Grid(values.shape[1])
    x = values if cfg["raw"] else values**2
    full = fbasis.fpca(x, 1, grid)
    M = int(cfg["M"]) if cfg["M"] is not None else fbasis.select_m(full.eigenvalues)
    b = fbasis.fpca(x, M, grid)
    share = fbasis.explained_variance(b)
    out = _out_dir(cfg)
    _write_curves_csv_basis(out / "eigenfunctions.csv", b)
    with (out / "eigenvalues.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m", "eigenvalue", "explained", "cumulative"])
        cum = np.cumsum(share)
        for m, (lam, s, c) in enumerate(zip(b.eigenvalues, share, cum), start=1):
            w.writerow([m, "%.17g" % lam, "%.17g" % s, "%.17g" % c])
    return {"command": "fpca", "M": M, "explained": share[:M].tolist()}


def cmd_ingest(cfg: dict) -> dict:
    if cfg["prices"] is None:
        raise CLIError("--prices is required")
    days, dropped = read_prices_csv(cfg["prices"])
    kept, short = filter_days(days, int(cfg["slots"]))
    dropped = dropped + short
    curves = prices_to_log_returns(kept, int(cfg["slots"]))
    out = _out_dir(cfg)
    write_curves_csv(curves, out / "returns.csv", days=[d.day_id for d in kept], T=int(cfg["slots"]) - 1)
    _write_json(out / "ingest_report.json", {
        "kept": len(kept),
        "dropped": [{"day": d, "reason": r} for d, r in dropped],
    })
    return {"command": "ingest", "kept": len(kept), "dropped": len(dropped)}


def cmd_replicate_table1(cfg: dict) -> dict:
    seed = _resolve_seed(cfg["seed"])
    bounds = ThetaBounds(c1=float(cfg["c1"]), c2=float(cfg["c2"]))
    records = replicate(
        _ints(cfg["n_values"]), int(cfg["reps"]), seed=seed, preset=cfg["preset"], grid_T=cfg["grid_T"],
        burnin=cfg["burnin"], bounds=bounds, n_starts=int(cfg["n_starts"]), with_cov=bool(cfg["cov"]),
        workers=int(cfg["workers"]),
    )
    rows = summarize(records)
    out = _out_dir(cfg)
    fields = ["n", "param", "reps", "mean", "sd", "paper_mean", "paper_sd", "population"]
    if cfg["cov"]:
        fields.append("mean_se")
    with (out / "table1.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in fields})
    with (out / "replications.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(records[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(records)
    return {"command": "replicate-table1", "seed": seed, "rows": len(rows), "file": str(out / "table1.csv")}


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "diagnose": cmd_diagnose,
    "fpca": cmd_fpca,
    "ingest": cmd_ingest,
    "replicate-table1": cmd_replicate_table1,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fgarch", description="Functional GARCH(1,1) toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON file with parameters for this command")
        p.add_argument("--out", help="output directory")
        return p

    p = add("simulate", "simulate curves from a preset")
    p.add_argument("--preset")
    p.add_argument("--n", type=int)
    p.add_argument("--grid-T", dest="grid_T", type=int)
    p.add_argument("--burnin", type=int)
    p.add_argument("--seed", type=int)

    p = add("estimate", "fit the model to a curves CSV")
    p.add_argument("--data", help="wide curves CSV of returns y_i")
    p.add_argument("--basis", choices=["fpca", "fourier", "bspline", "poly"])
    p.add_argument("--M", type=int)
    p.add_argument("--c1", type=float)
    p.add_argument("--c2", type=float)
    p.add_argument("--cov", action="store_true", default=None, help="compute the sandwich covariance")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-starts", dest="n_starts", type=int)
    p.add_argument("--min-n", dest="min_n", type=int)

    p = add("diagnose", "Monte Carlo stationarity diagnostics")
    p.add_argument("--preset")
    p.add_argument("--grid-T", dest="grid_T", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--nu", type=float)
    p.add_argument("--ells", help="comma-separated coupling lags")
    p.add_argument("--coupling-reps", dest="coupling_reps", type=int)
    p.add_argument("--seed", type=int)

    p = add("fpca", "principal components of squared curves")
    p.add_argument("--data")
    p.add_argument("--M", type=int)
    p.add_argument("--raw", action="store_true", default=None, help="do not square the curves")

    p = add("ingest", "intraday prices to log-return curves")
    p.add_argument("--prices", help="long prices CSV (day,slot,price)")
    p.add_argument("--slots", type=int, help="prices per complete day including the opening price")

    p = add("replicate-table1", "Monte Carlo study of the estimator")
    p.add_argument("--preset")
    p.add_argument("--n-values", dest="n_values")
    p.add_argument("--n", dest="n_values", help="alias of --n-values")
    p.add_argument("--reps", type=int)
    p.add_argument("--grid-T", dest="grid_T", type=int)
    p.add_argument("--burnin", type=int)
    p.add_argument("--c1", type=float)
    p.add_argument("--c2", type=float)
    p.add_argument("--cov", action="store_true", default=None)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--n-starts", dest="n_starts", type=int)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve(args.command, args)
        summary = COMMANDS[args.command](cfg)
    except (FGarchError, CLIError, ValueError, OSError, json.JSONDecodeError) as exc:
        _fail(type(exc).__name__, str(exc).replace("\n", " "))
    print(json.dumps(_finite_json(summary)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
