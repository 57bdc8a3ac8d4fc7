"""Experiment sweeps over the benchmark lattice.

Every (world size, density, corridor length, team size, episode) tuple gets
one map seed and one placement seed, shared by all policies, so every
policy sees exactly the same scenarios. Rows are written to CSV in a fixed
order; timing columns aside, a sweep is reproducible from its spec.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from ..corridors import analyze
from ..errors import LmapfError, ParameterError
from ..grid import Cell, GridMap, MazeParams, generate_maze
from ..policies import PlanningFailure, make_policies, plan_makespan, prioritized_plan
from ..simulator import EpisodeConfig, EpisodeMetrics, Mode, default_horizon, init_episode, run_episode

log = logging.getLogger(__name__)

WORKERS_ENV = "LMAPF_WORKERS"
PLANNER_TIMEOUT = 60.0
CENTRALIZED = {"prioritized"}

CSV_COLUMNS = [
    "policy", "policy_params", "conventions", "mode", "world_size", "density", "corridor_length",
    "n_agents", "episode", "map_seed", "placement_seed", "min_goal_distance", "horizon", "strict",
    "status", "error", "timesteps", "makespan", "goals_reached", "throughput", "valid_rate",
    "collisions", "agents_reached", "success_100", "success_95", "t_observe", "t_policy", "t_apply",
    "t_per_step",
]


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        raise ParameterError(f"{WORKERS_ENV} must be an integer") from None


# -- success and randomization --------------------------------------------------


def evaluate_success(reached, threshold: float) -> bool:
    """True iff the fraction of agents that reached their goal is >= threshold.

    ``reached`` is an :class:`EpisodeMetrics` or one flag per agent.
    """
    if isinstance(reached, EpisodeMetrics):
        k, n = reached.agents_reached, reached.n_agents
    else:
        flags = [bool(x) for x in reached]
        k, n = sum(flags), len(flags)
    if n == 0:
        return True
    # integer comparison keeps the boundary exact
    return k >= math.ceil(threshold * n - 1e-9)


@dataclass(frozen=True)
class EpisodeParams:
    maze: MazeParams
    min_goal_distance: float = 2.0


def randomize_episode_params(rng: np.random.Generator) -> EpisodeParams:
    """Training-style map randomization: size, density and corridor length."""
    size = int(rng.integers(10, 71))
    density = float(rng.uniform(0.2, 0.7))
    corridor_length = int(rng.integers(3, 22))
    seed = int(rng.integers(2**31))
    return EpisodeParams(MazeParams(size, density, corridor_length, seed), 2.0)


def subset_success_centralized(grid: GridMap, starts: Sequence[Cell], goals: Sequence[Cell],
                               planner: Callable = prioritized_plan, fraction: float = 0.95,
                               iterations: int = 10, seed: int = 0, timeout: float = PLANNER_TIMEOUT,
                               **planner_args):
    """Whether any of ``iterations`` random ceil(fraction * n)-subsets is solved.

    Returns ``(success, paths)``; ``paths`` belongs to the first solved subset,
    keyed by original agent index.
    """
    n = len(starts)
    k = math.ceil(fraction * n - 1e-9)
    rng = np.random.default_rng(seed)
    for _ in range(iterations):
        chosen = sorted(int(i) for i in rng.choice(n, size=k, replace=False))
        try:
            paths = planner(grid, [starts[i] for i in chosen], [goals[i] for i in chosen],
                            timeout=timeout, **planner_args)
        except PlanningFailure:
            continue
        return True, dict(zip(chosen, paths))
    return False, None


# -- sweep spec ----------------------------------------------------------------


@dataclass
class PolicySpec:
    name: str
    params: dict = field(default_factory=dict)
    conventions: bool = True

    @property
    def label(self) -> str:
        return self.name if self.conventions else f"{self.name}-noconv"


def excluded(world_size: int, n_agents: int) -> bool:
    """Team sizes skipped as too dense for the world."""
    return (world_size <= 20 and n_agents >= 64) or (world_size <= 40 and n_agents >= 256) or \
        (world_size <= 80 and n_agents >= 1024)


@dataclass
class SweepSpec:
    team_sizes: list = field(default_factory=lambda: [4, 8, 16, 32, 64, 128, 256, 512, 1024])
    world_sizes: list = field(default_factory=lambda: [20, 40, 80, 160])
    densities: list = field(default_factory=lambda: [0.3, 0.65])
    corridor_lengths: list = field(default_factory=lambda: [1, 10, 20])
    episodes: int = 50
    mode: str = Mode.ONE_SHOT.value
    policies: list = field(default_factory=lambda: [PolicySpec("convention")])
    horizon: Optional[int] = None
    min_goal_distance: float = 2.0
    strict: bool = False
    seed: int = 0
    planner_timeout: float = PLANNER_TIMEOUT

    def __post_init__(self):
        Mode(self.mode)
        if self.episodes < 1:
            raise ParameterError("episodes must be >= 1")
        self.policies = [p if isinstance(p, PolicySpec) else PolicySpec(**p) for p in self.policies]
        if not self.policies:
            raise ParameterError("at least one policy required")

    def cells(self):
        for ws in self.world_sizes:
            for d in self.densities:
                for L in self.corridor_lengths:
                    for n in self.team_sizes:
                        yield int(ws), float(d), int(L), int(n)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "SweepSpec":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ParameterError(f"unknown sweep fields: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class Job:
    policy: PolicySpec
    mode: str
    world_size: int
    density: float
    corridor_length: int
    n_agents: int
    episode: int
    map_seed: int
    placement_seed: int
    min_goal_distance: float
    horizon: int
    strict: bool
    planner_timeout: float = PLANNER_TIMEOUT


def episode_seeds(master: int, cell_index: int, episode: int) -> tuple[int, int]:
    s = np.random.SeedSequence([master, cell_index, episode]).generate_state(2)
    return int(s[0]), int(s[1])


def plan_jobs(spec: SweepSpec) -> tuple[list[Job], list[dict]]:
    jobs, skipped = [], []
    mode = Mode(spec.mode)
    for ci, (ws, d, L, n) in enumerate(spec.cells()):
        if excluded(ws, n):
            skipped.append({"world_size": ws, "density": d, "corridor_length": L, "n_agents": n,
                            "status": "skipped"})
            continue
        horizon = spec.horizon or default_horizon(mode, ws)
        for ep in range(spec.episodes):
            ms, ps = episode_seeds(spec.seed, ci, ep)
            for pol in spec.policies:
                jobs.append(Job(pol, mode.value, ws, d, L, n, ep, ms, ps, spec.min_goal_distance, horizon,
                                spec.strict, spec.planner_timeout))
    return jobs, skipped


def scenario_for(job: Job):
    """The (map, world) pair a job runs on; identical for every policy."""
    grid = generate_maze(MazeParams(job.world_size, job.density, job.corridor_length, job.map_seed))
    cfg = EpisodeConfig(mode=Mode(job.mode), max_timesteps=job.horizon, min_goal_distance=job.min_goal_distance,
                        strict=job.strict, seed=job.placement_seed, conventions=job.policy.conventions)
    world = init_episode(grid, analyze(grid), job.n_agents, cfg)
    return grid, world


def run_job(job: Job) -> dict:
    row = {
        "policy": job.policy.label, "policy_params": json.dumps(job.policy.params, sort_keys=True),
        "conventions": job.policy.conventions, "mode": job.mode, "world_size": job.world_size,
        "density": job.density, "corridor_length": job.corridor_length, "n_agents": job.n_agents,
        "episode": job.episode, "map_seed": job.map_seed, "placement_seed": job.placement_seed,
        "min_goal_distance": job.min_goal_distance, "horizon": job.horizon, "strict": job.strict,
        "status": "ok", "error": "",
    }
    try:
        grid, world = scenario_for(job)
        if job.policy.name in CENTRALIZED:
            row.update(_run_centralized(job, grid, world))
        else:
            pols = make_policies(job.policy.name, job.n_agents, job.placement_seed, **job.policy.params)
            m = run_episode(world, pols)
            steps = max(m.timesteps, 1)
            row.update({
                "timesteps": m.timesteps, "makespan": m.makespan if m.makespan is not None else "",
                "goals_reached": m.goals_reached_total, "throughput": m.throughput,
                "valid_rate": m.valid_rate, "collisions": m.collisions, "agents_reached": m.agents_reached,
                "success_100": evaluate_success(m, 1.0), "success_95": evaluate_success(m, 0.95),
                "t_observe": m.timing["observe"], "t_policy": m.timing["policy"],
                "t_apply": m.timing["apply"], "t_per_step": sum(m.timing.values()) / steps,
            })
    except LmapfError as exc:
        row.update(status="error", error=f"{type(exc).__name__}: {exc}")
    return row


def _run_centralized(job: Job, grid: GridMap, world) -> dict:
    # one-shot planning only; the baseline is judged on its plan
    starts = [a.position for a in world.agents]
    goals = [a.goal for a in world.agents]
    t0 = time.perf_counter()
    try:
        paths = prioritized_plan(grid, starts, goals, horizon=job.horizon, timeout=job.planner_timeout,
                                 **job.policy.params)
        full = plan_makespan(paths) <= job.horizon
    except PlanningFailure:
        paths, full = None, False
    ok95, sub = (True, None) if full else subset_success_centralized(
        grid, starts, goals, fraction=0.95, seed=job.placement_seed, timeout=job.planner_timeout,
        horizon=job.horizon, **job.policy.params)
    if sub is not None and plan_makespan(sub.values()) > job.horizon:
        ok95 = False
    elapsed = time.perf_counter() - t0
    makespan = plan_makespan(paths) if full else ""
    return {
        "timesteps": makespan, "makespan": makespan, "goals_reached": job.n_agents if full else "",
        "throughput": "", "valid_rate": 1.0, "collisions": 0,
        "agents_reached": job.n_agents if full else "", "success_100": full, "success_95": ok95,
        "t_observe": 0.0, "t_policy": elapsed, "t_apply": 0.0, "t_per_step": "",
    }


# -- aggregation -------------------------------------------------------------------

_NUMERIC = ["success_100", "success_95", "makespan", "throughput", "valid_rate", "t_per_step"]


def summarize(rows: Iterable[dict], skipped: Sequence[dict] = ()) -> dict:
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        key = (r["policy"], r["world_size"], r["density"], r["corridor_length"], r["n_agents"])
        groups.setdefault(key, []).append(r)
    cells = []
    for key, rs in groups.items():
        ok = [r for r in rs if r["status"] == "ok"]
        cell = dict(zip(["policy", "world_size", "density", "corridor_length", "n_agents"], key))
        cell.update(n=len(rs), errors=len(rs) - len(ok), status="ok")
        for col in _NUMERIC:
            vals = [float(r[col]) for r in ok if r.get(col) not in ("", None)]
            cell[col] = {"mean": float(np.mean(vals)) if vals else None,
                         "std": float(np.std(vals)) if vals else None, "n": len(vals)}
        cells.append(cell)
    return {"cells": cells, "skipped": list(skipped)}


def run_sweep(spec: SweepSpec, out_dir, workers: Optional[int] = None,
              progress: Optional[Callable[[dict], None]] = None) -> dict:
    """Run every job; write ``episodes.csv`` and ``summary.json`` into ``out_dir``.

    Episode failures become ``status=error`` rows and never stop the sweep.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    workers = workers or default_workers()
    jobs, skipped = plan_jobs(spec)
    rows = []
    with open(out / "episodes.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = pool.map(run_job, jobs, chunksize=max(1, len(jobs) // (8 * workers)))
                for row in results:
                    _sink(writer, fh, rows, row, progress)
        else:
            for job in jobs:
                _sink(writer, fh, rows, run_job(job), progress)
    summary = summarize(rows, skipped)
    summary["spec"] = spec.to_json()
    (out / "summary.json").write_text(json.dumps(summary, indent=1) + "\n")
    return summary


def _sink(writer, fh, rows, row, progress):
    writer.writerow(row)
    fh.flush()
    rows.append(row)
    if row["status"] != "ok":
        log.warning("episode failed: %s", row["error"])
    if progress is not None:
        progress(row)
