"""Replicated runs, MSE studies and their CSV/JSON output.

Replicate ``r`` of a study with master seed ``s`` draws from the stream
``SeedSequence(s, spawn_key=(r,))`` (PF1 designs use ``(r, 1)``), and
results are merged in replicate order, so output files do not depend on
the number of worker processes.
"""

from __future__ import annotations

import csv
import io
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .baseline import pf1_all
from .errors import EvaluationError
from .mirror import SamplingStrategy, StepSchedule, make_rng, replicate_rng, run
from .models import ModelSpec, external_model, make_model
from .oracle import DEFAULT_RESOLUTION, reference
from .subsets import format_subset, zeta_transform

STRATEGY_LABELS = ("unif", "S", "1/S", "avg")
DEFAULT_GRID = (500, 1000, 1500, 2500, 3500, 5000)


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class BenchConfig:
    """Everything needed to reproduce a run or a study."""

    model: str = "disc2"
    p: int | None = None
    params: dict = field(default_factory=dict)
    laws: list | None = None
    command: list | str | None = None
    methods: list = field(default_factory=lambda: ["mirror", "pf1"])
    strategies: list = field(default_factory=lambda: ["unif"])
    schedule: str = "power"
    eta0: float = 0.3
    alpha: float = 0.5
    horizon: int | None = None
    horizons: list | None = None
    replicates: int = 1
    master_seed: int = 0
    averaging: bool = True
    exclude_empty: bool = False
    pf_budget: str = "evals"
    resolution: int = DEFAULT_RESOLUTION
    jobs: int | None = None
    output: str = "."

    @classmethod
    def from_dict(cls, d: dict) -> "BenchConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("jobs")
        d.pop("output")
        return d

    def validate(self) -> None:
        if self.command is None and self.model not in ("bratley", "disc", "disc2", "linear"):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.command is not None and not self.laws:
            raise ConfigError("an external model needs input laws")
        for m in self.methods:
            if m not in ("mirror", "pf1"):
                raise ConfigError(f"unknown method {m!r}")
        for s in self.strategies:
            if s not in STRATEGY_LABELS:
                raise ConfigError(f"unknown strategy {s!r}; choose from {STRATEGY_LABELS}")
        if self.schedule not in ("power", "theorem_constant"):
            raise ConfigError(f"unknown schedule {self.schedule!r}")
        if self.schedule == "power" and not (self.eta0 >= 0 and 0.5 <= self.alpha <= 1):
            raise ConfigError("power schedule needs eta0 >= 0 and alpha in [1/2, 1]")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if self.pf_budget not in ("evals", "iterations"):
            raise ConfigError("pf_budget must be 'evals' or 'iterations'")
        if self.horizons is not None:
            hs = [int(h) for h in self.horizons]
            if not hs or hs[0] < 1 or any(b <= a for a, b in zip(hs, hs[1:])):
                raise ConfigError("horizons must be positive and strictly increasing")
            self.horizons = hs
        if self.horizon is not None and self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ConfigError("master_seed must fit in 64 bits")
        try:
            self.build_model()
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    def build_model(self) -> ModelSpec:
        if self.command is not None:
            return external_model(self.command, self.laws, name=self.model or "external")
        return make_model(self.model, p=self.p, laws=self.laws, **self.params)

    def grid(self) -> list:
        if self.horizons:
            return list(self.horizons)
        if self.horizon:
            return [int(self.horizon)]
        q = 1 << self.build_model().p
        return [q * k for k in DEFAULT_GRID]

    def make_schedule(self, horizon: int, p: int) -> StepSchedule:
        if self.schedule == "power":
            return StepSchedule("power", self.eta0, self.alpha)
        return StepSchedule.theorem_constant(horizon, SamplingStrategy.uniform(p, self.exclude_empty).base)


def _model_from_dict(d: dict) -> ModelSpec:
    return BenchConfig(**{k: v for k, v in d.items() if k in BenchConfig.__dataclass_fields__}).build_model()


# ---------------------------------------------------------------------------
# replicate workers (top level so they pickle)


def _mirror_task(args):
    try:
        return _mirror_task_inner(*args)
    except EvaluationError as exc:
        raise exc.located(replicate=args[2]) from None


def _mirror_task_inner(cfg_dict, label, r, horizons):
    cfg = BenchConfig(**cfg_dict)
    model = cfg.build_model()
    p = model.p
    strategy = SamplingStrategy.from_label(label, p, exclude_empty=cfg.exclude_empty)
    out = []
    if cfg.schedule == "power":
        rep = run(
            model,
            strategy,
            cfg.make_schedule(horizons[-1], p),
            horizon=horizons[-1],
            seed=replicate_rng(cfg.master_seed, r),
            averaging=True,
            checkpoints=horizons,
        )
        for snap in rep.snapshots:
            out.append((snap.n, snap.sobol, snap.sobol_cesaro, snap.m_hat))
    else:
        # the constant step depends on the horizon: one run per horizon
        for h in horizons:
            rep = run(model, strategy, cfg.make_schedule(h, p), horizon=h, seed=replicate_rng(cfg.master_seed, r))
            out.append((h, rep.sobol_final, rep.sobol_cesaro, rep.m_hat))
    return out


def _pf_task(args):
    try:
        return _pf_task_inner(*args)
    except EvaluationError as exc:
        raise exc.located(replicate=args[1]) from None


def _pf_task_inner(cfg_dict, r, sizes):
    model = BenchConfig(**cfg_dict).build_model()
    seed = np.random.SeedSequence(int(cfg_dict["master_seed"]), spawn_key=(int(r), 1))
    rng = make_rng(seed)
    return [pf1_all(model, n, seed=rng) for n in sizes]


def _map(fn, tasks, jobs):
    if jobs is None:
        jobs = os.cpu_count() or 1
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def mirror_replicates(cfg: BenchConfig, label: str, horizons, jobs=None):
    """``results[r]`` is a list of ``(n, sobol, sobol_cesaro, m_hat)`` per horizon."""
    d = cfg.to_dict()
    tasks = [(d, label, r, list(horizons)) for r in range(cfg.replicates)]
    return _map(_mirror_task, tasks, jobs if jobs is not None else cfg.jobs)


def pf_replicates(cfg: BenchConfig, sizes, jobs=None):
    d = cfg.to_dict()
    tasks = [(d, r, list(sizes)) for r in range(cfg.replicates)]
    return _map(_pf_task, tasks, jobs if jobs is not None else cfg.jobs)


# ---------------------------------------------------------------------------
# MSE study


@dataclass
class MseReport:
    """Per-subset and aggregate MSE of closed-index estimates."""

    rows: list = field(default_factory=list)  # (method, strategy, horizon, evals, mask, mse)
    aggregate: list = field(default_factory=list)  # (method, strategy, horizon, evals, mse)
    estimates: list = field(default_factory=list)  # (method, strategy, replicate, horizon, closed)

    def curve(self, method: str, strategy: str):
        pts = [(h, mse) for m, s, h, _, mse in self.aggregate if m == method and s == strategy]
        return np.array([h for h, _ in pts]), np.array([v for _, v in pts])


def _add_mse(report, method, label, horizon, evals, closed_by_rep, truth):
    closed_by_rep = np.asarray(closed_by_rep)
    per_subset = np.mean((closed_by_rep - truth) ** 2, axis=0)
    for u, v in enumerate(per_subset):
        report.rows.append((method, label, horizon, evals, u, float(v)))
    report.aggregate.append((method, label, horizon, evals, float(per_subset.mean())))
    for r, c in enumerate(closed_by_rep):
        report.estimates.append((method, label, r, horizon, c))


def mse_study(cfg: BenchConfig, jobs=None, truth=None) -> MseReport:
    """Replicates x horizons for every configured method and strategy."""
    model = cfg.build_model()
    if truth is None:
        truth = reference(model, cfg.resolution).closed
    horizons = cfg.grid()
    q = 1 << model.p
    report = MseReport()
    if "mirror" in cfg.methods:
        runs = {}
        for label in cfg.strategies:
            base = "unif" if label == "avg" else label
            if base not in runs:
                runs[base] = mirror_replicates(cfg, base, horizons, jobs)
            results = runs[base]
            for k, h in enumerate(horizons):
                if label == "avg":
                    closed = [zeta_transform(res[k][2]) for res in results]
                else:
                    closed = [zeta_transform(res[k][1]) for res in results]
                _add_mse(report, "mirror", label, h, 2 * h, closed, truth)
    if "pf1" in cfg.methods:
        sizes = [max(2, h // q) if cfg.pf_budget == "evals" else h for h in horizons]
        results = pf_replicates(cfg, sizes, jobs)
        label = f"pf-budget={cfg.pf_budget}"
        for k, h in enumerate(horizons):
            closed = [res[k].closed for res in results]
            _add_mse(report, "pf1", label, h, results[0][k].evals, closed, truth)
    return report


def loglog_slope(horizons, mse) -> float:
    """Least-squares slope of ``log mse`` against ``log horizon``."""
    return float(np.polyfit(np.log(np.asarray(horizons, float)), np.log(np.asarray(mse, float)), 1)[0])


# ---------------------------------------------------------------------------
# file output


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    Path(path).write_text(buf.getvalue())


def write_mse_report(report: MseReport, outdir) -> list:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_csv(
        outdir / "mse.csv",
        ["method", "strategy", "horizon", "evals", "subset_mask", "subset", "mse"],
        [(m, s, h, e, u, format_subset(u), v) for m, s, h, e, u, v in report.rows],
    )
    write_csv(outdir / "mse_aggregate.csv", ["method", "strategy", "horizon", "evals", "mse"], report.aggregate)
    rows = []
    for m, s, r, h, closed in report.estimates:
        for u, c in enumerate(closed):
            rows.append((m, s, r, h, u, format_subset(u), float(c)))
    write_csv(outdir / "replicates.csv", ["method", "strategy", "replicate", "horizon", "subset_mask", "subset", "closed_estimate"], rows)
    return [outdir / "mse.csv", outdir / "mse_aggregate.csv", outdir / "replicates.csv"]


def estimate(cfg: BenchConfig, jobs=None) -> dict:
    """Run the mirror estimator for each replicate; returns a summary dict.

    Snapshots are taken at powers of two below the horizon and at the
    horizon itself.
    """
    model = cfg.build_model()
    horizon = int(cfg.horizon or cfg.grid()[-1])
    checkpoints = [1 << k for k in range(int(np.log2(horizon)) + 1) if (1 << k) < horizon] + [horizon]
    label = cfg.strategies[0] if cfg.strategies else "unif"
    start = time.perf_counter()
    sub = BenchConfig(**{**cfg.to_dict(), "horizons": checkpoints, "horizon": horizon})
    results = mirror_replicates(sub, "unif" if label == "avg" else label, checkpoints, jobs)
    wall = time.perf_counter() - start
    reps = []
    for r, res in enumerate(results):
        n, s, s_avg, m_hat = res[-1]
        closed = zeta_transform(s)
        rec = {
            "replicate": r,
            "n": n,
            "evals": 2 * n,
            "m_hat": m_hat,
            "sobol_final": s.tolist(),
            "closed": closed.tolist(),
            "total": [1.0 - closed[(len(s) - 1) ^ (1 << i)] for i in range(model.p)],
        }
        if cfg.averaging and s_avg is not None:
            closed_avg = zeta_transform(s_avg)
            rec["sobol_cesaro"] = s_avg.tolist()
            rec["closed_cesaro"] = closed_avg.tolist()
            rec["total_cesaro"] = [1.0 - closed_avg[(len(s) - 1) ^ (1 << i)] for i in range(model.p)]
        reps.append(rec)
    summary = {"model": model.to_dict(), "strategy": label, "config": cfg.to_dict(), **reps[0]}
    summary.pop("replicate")
    if len(reps) > 1:
        summary["replicates"] = reps
    summary["wall_time_s"] = wall
    summary["_trajectories"] = results
    return summary


def write_estimate(summary: dict, outdir, averaging: bool) -> list:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    results = summary.pop("_trajectories")
    header = ["replicate", "n", "subset_mask", "subset", "sobol_estimate", "closed_estimate"]
    rows, rows_avg = [], []
    for r, res in enumerate(results):
        for n, s, s_avg, _ in res:
            closed = zeta_transform(s)
            rows.extend((r, n, u, format_subset(u), float(s[u]), float(closed[u])) for u in range(len(s)))
            if averaging and s_avg is not None:
                ca = zeta_transform(s_avg)
                rows_avg.extend((r, n, u, format_subset(u), float(s_avg[u]), float(ca[u])) for u in range(len(s)))
    files = [outdir / "estimates.csv", outdir / "summary.json"]
    write_csv(outdir / "estimates.csv", header, rows)
    if rows_avg:
        write_csv(outdir / "estimates_cesaro.csv", header, rows_avg)
        files.append(outdir / "estimates_cesaro.csv")
    (outdir / "summary.json").write_text(json.dumps(summary, indent=1) + "\n")
    return files


def baseline(cfg: BenchConfig, n: int, jobs=None):
    """PF1 estimates per replicate, rows in the estimator CSV schema."""
    results = pf_replicates(cfg, [n], jobs)
    rows = []
    for r, res in enumerate(results):
        est = res[0]
        rows.extend((r, n, u, format_subset(u), float(est.sobol[u]), float(est.closed[u])) for u in range(len(est.closed)))
    return results, rows
