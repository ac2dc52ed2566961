"""Command-line driver for single runs and one-parameter sweeps.

Examples::

    coopaoa --seed 7 --K 10 --M 3 --mode prior --mode posterior --out results/
    coopaoa --sweep r --values 10,20,30 --seeds 10 --out results/
    coopaoa --config results/metrics.csv --out rerun/   # replay an echoed config
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from coopaoa import __name__ as _pkg
from coopaoa.experiments import SWEEP_PARAMS, evaluate, sweep
from coopaoa.gaussian import NumericalError
from coopaoa.plbp import MODES, RunConfig
from coopaoa.scenario import ScenarioFormatError, ScenarioParams, generate_scenario, load_scenario

log = logging.getLogger(_pkg)

DEFAULTS = {"K": 10, "M": [3], "mode": ["posterior"], "seed": 0, "scenario": "grid",
            "sweep": None, "values": None, "seeds": 10}
SWEEP_M = 10


class ConfigError(ValueError):
    pass


def load_config(path) -> dict:
    """Read a JSON config, or the ``# config:`` echo line of a CSV written by this tool."""
    text = Path(path).read_text()
    for line in text.splitlines():
        if line.startswith("# config:"):
            text = line[len("# config:"):]
            break
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return doc


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


def effective_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    cfg.update(ScenarioParams().to_dict())
    m_given = bool(args.M)
    if args.config:
        doc = load_config(args.config)
        m_given = m_given or "M" in doc
        unknown = set(doc) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
        cfg.update(doc)
    for key in ("seed", "K", "scenario", "sweep", "seeds"):
        v = getattr(args, key)
        if v is not None:
            cfg[key] = v
    if args.M:
        cfg["M"] = args.M
    if args.mode:
        cfg["mode"] = args.mode
    if args.values:
        cfg["values"] = [float(x) for x in args.values.split(",") if x.strip()]
    cfg["M"] = [int(m) for m in _as_list(cfg["M"])]
    cfg["mode"] = [str(m) for m in _as_list(cfg["mode"])]
    for m in cfg["mode"]:
        if m not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {m!r}")
    if cfg["sweep"] is not None:
        if cfg["sweep"] not in SWEEP_PARAMS:
            raise ConfigError(f"--sweep must be one of {SWEEP_PARAMS}")
        if not cfg["values"]:
            raise ConfigError("--sweep needs --values")
        if not m_given:
            cfg["M"] = [SWEEP_M]
    return cfg


def _params(cfg: dict) -> ScenarioParams:
    keys = set(ScenarioParams().to_dict())
    scen = cfg["scenario"]
    layout = "uniform" if scen == "uniform" else ("from-file" if scen.startswith("from-file:") else "grid")
    if scen not in ("grid", "uniform") and not scen.startswith("from-file:"):
        raise ConfigError(f"--scenario must be grid, uniform or from-file:<path>, got {scen!r}")
    d = {k: cfg[k] for k in keys}
    d["layout"] = layout
    try:
        return ScenarioParams.from_dict(d)
    except ScenarioFormatError as exc:
        raise ConfigError(str(exc)) from exc


def _header(cfg: dict) -> str:
    return f"# {_pkg} results\n# config: {json.dumps(cfg, sort_keys=True)}\n"


def _write_csv(path: Path, cfg: dict, fieldnames: list[str], rows: list[dict]) -> None:
    buf = io.StringIO()
    buf.write(_header(cfg))
    w = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (f"{v:.10g}" if isinstance(v, float) else v) for k, v in r.items()})
    path.write_text(buf.getvalue())


def do_run(cfg: dict, out: Path) -> None:
    params = _params(cfg)
    if params.layout == "from-file":
        scenario = load_scenario(cfg["scenario"][len("from-file:"):])
    else:
        scenario = generate_scenario(params, cfg["seed"])
    metrics, errors = [], []
    for mode in cfg["mode"]:
        for M in cfg["M"]:
            res = evaluate(scenario, RunConfig(K=cfg["K"], M=M, mode=mode, seed=cfg["seed"]))
            log.info("mode=%s M=%d final pos %.3f m dir %.4f rad", mode, M, res.pos[-1], res.dir[-1])
            for k, (p, d) in enumerate(zip(res.pos, res.dir), start=1):
                metrics.append({"k": k, "m": M, "mode": mode, "pos_rmse_m": p, "dir_rmse_rad": d})
            vehicles = [v for v in range(scenario.n_vehicles) if v not in scenario.anchor_ids]
            for v, pe, de in zip(vehicles, res.pos_errors, res.dir_errors):
                errors.append({"mode": mode, "m": M, "vehicle": v, "pos_err_m": float(pe), "dir_err_rad": float(de)})
    _write_csv(out / "metrics.csv", cfg, ["k", "m", "mode", "pos_rmse_m", "dir_rmse_rad"], metrics)
    _write_csv(out / "errors.csv", cfg, ["mode", "m", "vehicle", "pos_err_m", "dir_err_rad"], errors)


def do_sweep(cfg: dict, out: Path, workers: int | None) -> None:
    params = _params(cfg)
    if params.layout == "from-file":
        raise ConfigError("sweeps regenerate scenarios and cannot use from-file")
    seeds = range(cfg["seed"], cfg["seed"] + int(cfg["seeds"]))
    points = sweep(params, cfg["sweep"], cfg["values"], seeds, K=cfg["K"], M=cfg["M"][0],
                   mode=cfg["mode"][0], workers=workers)
    rows = sorted((p.summary() for p in points), key=lambda r: r["value"])
    fields = ["param", "value", "n_seeds", "pos_rmse_mean", "pos_rmse_se", "dir_rmse_mean", "dir_rmse_se"]
    _write_csv(out / f"sweep_{cfg['sweep']}.csv", cfg, fields, rows)
    per_seed = [{"param": p.param, "value": p.value, "seed": r.seed, "pos_rmse_m": r.pos[-1], "dir_rmse_rad": r.dir[-1]}
                for p in points for r in p.runs]
    per_seed.sort(key=lambda r: (r["value"], r["seed"]))
    _write_csv(out / f"sweep_{cfg['sweep']}_runs.csv", cfg, ["param", "value", "seed", "pos_rmse_m", "dir_rmse_rad"],
               per_seed)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coopaoa", description=__doc__.split("\n")[0])
    p.add_argument("--config", help="JSON config, or a CSV written by a previous run")
    p.add_argument("--seed", type=int)
    p.add_argument("--K", type=int, help="outer (linearization) iterations")
    p.add_argument("--M", type=int, action="append", help="BP iterations per linearization; repeatable")
    p.add_argument("--mode", action="append", choices=MODES, help="repeatable")
    p.add_argument("--sweep", choices=SWEEP_PARAMS)
    p.add_argument("--values", help="comma-separated sweep values")
    p.add_argument("--seeds", type=int, help="number of seeds per sweep value")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--scenario", help="grid | uniform | from-file:<path>")
    p.add_argument("--workers", type=int, default=None, help="worker processes for sweeps")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = effective_config(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if cfg["sweep"] is not None:
            do_sweep(cfg, out, args.workers)
        else:
            do_run(cfg, out)
    except (ConfigError, ScenarioFormatError) as exc:
        print(f"coopaoa: config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, NumericalError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"coopaoa: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
