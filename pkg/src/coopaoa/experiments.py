"""Multi-seed experiment helpers shared by the CLI and the acceptance suite."""

from __future__ import annotations

import dataclasses
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from coopaoa.metrics import direction_rmse, heading_errors, position_errors, position_rmse
from coopaoa.plbp import RunConfig, run_plbp
from coopaoa.scenario import Scenario, ScenarioParams, generate_scenario

SWEEP_PARAMS = ("r", "R", "sigma_p", "sigma_theta")


@dataclass
class SeedRun:
    """Metrics of one PLBP run on one scenario draw."""

    seed: int
    mode: str
    M: int
    init_pos: float
    init_dir: float
    pos: list[float]                       # per outer iteration k = 1..K
    dir: list[float]
    pos_errors: np.ndarray = field(repr=False)
    dir_errors: np.ndarray = field(repr=False)
    anchors: list[int] = field(default_factory=list)
    n_checks: int = 0                      # health checks passed (0 when checking is off)


def evaluate(scenario: Scenario, config: RunConfig, include_anchors: bool = False) -> SeedRun:
    res = run_plbp(scenario, dataclasses.replace(config, record_history=True))
    truth = scenario.truth_array()
    ex = () if include_anchors else scenario.anchor_ids
    final = res.history[-1][0]
    return SeedRun(
        seed=config.seed,
        mode=config.mode,
        M=config.M,
        init_pos=position_rmse(res.initial[0], truth, ex),
        init_dir=direction_rmse(res.initial[0], truth, ex),
        pos=[position_rmse(m, truth, ex) for m, _ in res.history],
        dir=[direction_rmse(m, truth, ex) for m, _ in res.history],
        pos_errors=position_errors(final, truth, ex),
        dir_errors=heading_errors(final, truth, ex),
        anchors=sorted(scenario.anchor_ids),
        n_checks=res.n_checks,
    )


def _job(args):
    params, config = args
    return evaluate(generate_scenario(params, config.seed), config)


def _map(jobs, workers: int | None):
    workers = workers if workers is not None else (os.cpu_count() or 1)
    if workers <= 1 or len(jobs) <= 1:
        return [_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_job, jobs))


def run_seeds(params: ScenarioParams, config: RunConfig, seeds, workers: int | None = 1) -> list[SeedRun]:
    """Evaluate ``config`` on one freshly generated scenario per seed."""
    jobs = [(params, dataclasses.replace(config, seed=int(s))) for s in seeds]
    return _map(jobs, workers)


@dataclass
class SweepPoint:
    param: str
    value: float
    runs: list[SeedRun]

    @property
    def pos(self) -> np.ndarray:
        return np.array([r.pos[-1] for r in self.runs])

    @property
    def dir(self) -> np.ndarray:
        return np.array([r.dir[-1] for r in self.runs])

    def summary(self) -> dict:
        n = len(self.runs)
        se = (lambda a: float(a.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0)
        return {
            "param": self.param,
            "value": self.value,
            "n_seeds": n,
            "pos_rmse_mean": float(self.pos.mean()),
            "pos_rmse_se": se(self.pos),
            "dir_rmse_mean": float(self.dir.mean()),
            "dir_rmse_se": se(self.dir),
        }


def sweep(
    params: ScenarioParams,
    param: str,
    values,
    seeds,
    K: int = 10,
    M: int = 10,
    mode: str = "posterior",
    workers: int | None = 1,
) -> list[SweepPoint]:
    """Vary one scenario parameter, others fixed; the same seeds at every value."""
    if param not in SWEEP_PARAMS:
        raise ValueError(f"sweep parameter must be one of {SWEEP_PARAMS}")
    values = [float(v) for v in values]
    if any(v < 0 for v in values) or (param in ("r", "R") and any(v <= 0 for v in values)):
        raise ValueError("sweep values must be positive")
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    jobs = []
    for v in values:
        p = params.replace(**{param: v})
        for s in seeds:
            jobs.append((p, RunConfig(K=K, M=M, mode=mode, seed=int(s))))
    runs = _map(jobs, workers)
    out = []
    for a, v in enumerate(values):
        out.append(SweepPoint(param, v, runs[a * len(seeds):(a + 1) * len(seeds)]))
    return out
