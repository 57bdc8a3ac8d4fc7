"""Synchronous one-shot and lifelong episodes."""

from __future__ import annotations

import enum
import json
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .agents import AgentState, CorridorRecord
from .corridors import (CorridorTopology, analyze, exit_endpoint, initial_record, record_after_move,
                        record_on_entry)
from .errors import ContractError, ParameterError, PlacementError
from .grid import Cell, GridMap
from .observation import ObsConfig, ObservationBuilder
from .pathfinding import DistanceCache
from .rules import ACTION_OFFSETS, Action, Outcome, RewardConfig, deadlock, reward, valid_actions

__all__ = [
    "AgentState", "CorridorRecord", "Mode", "EpisodeConfig", "EpisodeMetrics", "World",
    "init_episode", "step", "sample_new_goal", "run_episode", "default_horizon",
]


class Mode(str, enum.Enum):
    ONE_SHOT = "oneshot"
    LIFELONG = "lifelong"


# test horizons by world size
LIFELONG_HORIZONS = {20: 128, 40: 128, 80: 192, 160: 256}
ONE_SHOT_HORIZONS = {20: 320, 40: 320, 80: 480, 160: 640}


def default_horizon(mode: Mode, size: int) -> int:
    table = LIFELONG_HORIZONS if Mode(mode) is Mode.LIFELONG else ONE_SHOT_HORIZONS
    for s in sorted(table):
        if size <= s:
            return table[s]
    return table[max(table)]


@dataclass(frozen=True)
class EpisodeConfig:
    mode: Mode = Mode.LIFELONG
    max_timesteps: int = 128
    min_goal_distance: float = 2.0
    strict: bool = True
    seed: int = 0
    conventions: bool = True
    obs: ObsConfig = ObsConfig()
    rewards: RewardConfig = RewardConfig()
    record: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.max_timesteps < 1:
            raise ParameterError("max_timesteps must be >= 1")
        if self.min_goal_distance < 0:
            raise ParameterError("min_goal_distance must be >= 0")


@dataclass
class EpisodeMetrics:
    mode: Mode
    n_agents: int
    timesteps: int
    makespan: Optional[int]  # None = incomplete
    goals_reached_total: int
    throughput: float
    valid_rate: float
    collisions: int
    agents_reached: int
    fallback_goals: int = 0
    timing: dict = field(default_factory=dict)
    trajectories: Optional[list] = None

    @property
    def success_fraction(self) -> float:
        return self.agents_reached / self.n_agents if self.n_agents else 1.0


class World:
    """Mutable episode state. Agents are indexed by id."""

    def __init__(self, grid: GridMap, topology: Optional[CorridorTopology], agents: Sequence[AgentState],
                 config: EpisodeConfig = EpisodeConfig(), rng: Optional[np.random.Generator] = None,
                 cache: Optional[DistanceCache] = None):
        self.grid = grid
        self.topology = topology if topology is not None else analyze(grid)
        self.agents = list(agents)
        for i, a in enumerate(self.agents):
            if a.id != i:
                raise ParameterError("agents must be ordered by id 0..n-1")
        self.config = config
        self.rng = rng if rng is not None else np.random.default_rng(config.seed)
        pad = config.obs.fov // 2
        self.cache = cache if cache is not None and cache.pad == pad else DistanceCache(grid, pad)
        self.t = 0
        self.goals_reached_total = 0
        self.collisions = 0
        self.actions_taken = 0
        self.actions_valid = 0
        self.fallback_goals = 0
        self.makespan: Optional[int] = None
        self.log: Optional[list] = [] if config.record else None
        self.refresh()

    def refresh(self) -> None:
        """Recompute occupancy and exit counts from the agent list."""
        self.occupancy = np.full(self.grid.shape, -1, dtype=np.int32)
        self.exit_counts = np.zeros(self.grid.shape, dtype=np.int32)
        for a in self.agents:
            if not a.active:
                continue
            if self.grid.obstacles[a.position] or self.occupancy[a.position] >= 0:
                raise ParameterError(f"agent {a.id} at {a.position} overlaps an obstacle or agent")
            self.occupancy[a.position] = a.id
            self._count_exit(a, +1)

    def _count_exit(self, a: AgentState, sign: int) -> None:
        rec = a.corridor_record
        if rec is not None:
            e = exit_endpoint(self.topology.corridors[rec.corridor], rec)
            if e is not None:
                self.exit_counts[e] += sign

    def active_ids(self) -> list[int]:
        return [a.id for a in self.agents if a.active]

    @property
    def all_done(self) -> bool:
        return not any(a.active for a in self.agents)

    def corridor_record_for(self, cell: Cell, goal: Cell) -> Optional[CorridorRecord]:
        cor = self.topology.corridor_at(cell)
        if cor is None:
            return None
        return initial_record(cor, cell, self.cache.get(goal).distances)


def _euclid(a: Cell, b: Cell) -> float:
    return float(np.hypot(a[0] - b[0], a[1] - b[1]))


def sample_new_goal(world: World, agent: AgentState, rng: Optional[np.random.Generator] = None) -> Cell:
    """Uniform free cell reachable from the agent, far enough from its old goal.

    Falls back to any reachable free cell other than the agent's position
    (counted in ``world.fallback_goals``) when no cell qualifies.
    """
    rng = rng if rng is not None else world.rng
    labels = world.grid.components
    comp = labels[agent.position]
    cells = _component_cells(world, comp)
    old = np.asarray(agent.goal)
    d = np.hypot(cells[:, 0] - old[0], cells[:, 1] - old[1])
    ok = cells[d >= world.config.min_goal_distance]
    if len(ok):
        return tuple(int(x) for x in ok[rng.integers(len(ok))])
    world.fallback_goals += 1
    others = cells[(cells[:, 0] != agent.position[0]) | (cells[:, 1] != agent.position[1])]
    pool = others if len(others) else cells
    return tuple(int(x) for x in pool[rng.integers(len(pool))])


def _component_cells(world: World, comp: int) -> np.ndarray:
    cache = world.__dict__.setdefault("_component_cells", {})
    cells = cache.get(comp)
    if cells is None:
        cells = np.argwhere(world.grid.components == comp)
        cache[comp] = cells
    return cells


def init_episode(grid: GridMap, topology: Optional[CorridorTopology], n_agents: int,
                 config: EpisodeConfig = EpisodeConfig(), rng: Optional[np.random.Generator] = None,
                 max_attempts: int = 20) -> World:
    """Place agents and goals at random under the episode constraints.

    Starts are distinct free cells with at most one agent per corridor; each
    goal is distinct, reachable from its start and at least
    ``min_goal_distance`` (Euclidean) away from it.
    """
    if n_agents < 0:
        raise ParameterError("n_agents must be >= 0")
    topology = topology if topology is not None else analyze(grid)
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    free = grid.free_cells()
    if n_agents > len(free):
        raise PlacementError(f"{n_agents} agents but only {len(free)} free cells")
    labels = grid.components
    corridor_of = topology.corridor_of
    for _ in range(max_attempts):
        order = rng.permutation(len(free))
        starts: list[Cell] = []
        used_corridors = set()
        for idx in order:
            cell = (int(free[idx, 0]), int(free[idx, 1]))
            cid = corridor_of[cell]
            if cid >= 0:
                if cid in used_corridors:
                    continue
                used_corridors.add(cid)
            starts.append(cell)
            if len(starts) == n_agents:
                break
        if len(starts) < n_agents:
            continue
        goals: list[Cell] = []
        taken = set()
        ok = True
        by_comp: dict[int, np.ndarray] = {}
        for s in starts:
            comp = labels[s]
            cells = by_comp.get(comp)
            if cells is None:
                cells = by_comp[comp] = np.argwhere(labels == comp)
            d = np.hypot(cells[:, 0] - s[0], cells[:, 1] - s[1])
            cand = cells[d >= max(config.min_goal_distance, 1e-9)]
            goal = None
            for _ in range(64):
                if not len(cand):
                    break
                g = tuple(int(x) for x in cand[rng.integers(len(cand))])
                if g not in taken:
                    goal = g
                    break
            if goal is None:
                rest = [tuple(int(x) for x in c) for c in cand if tuple(int(x) for x in c) not in taken]
                if not rest:
                    ok = False
                    break
                goal = rest[rng.integers(len(rest))]
            taken.add(goal)
            goals.append(goal)
        if not ok:
            continue
        world = World(grid, topology, [AgentState(i, s, g) for i, (s, g) in enumerate(zip(starts, goals))],
                      config, rng)
        for a in world.agents:
            a.corridor_record = world.corridor_record_for(a.position, a.goal)
        world.refresh()
        return world
    raise PlacementError(f"could not place {n_agents} agents after {max_attempts} attempts")


def world_from_scenario(grid: GridMap, starts: Sequence[Cell], goals: Sequence[Cell],
                        config: EpisodeConfig = EpisodeConfig(), topology: Optional[CorridorTopology] = None,
                        rng: Optional[np.random.Generator] = None) -> World:
    if len(starts) != len(goals):
        raise ParameterError("starts and goals differ in length")
    agents = []
    for i, (s, g) in enumerate(zip(starts, goals)):
        s, g = tuple(int(x) for x in s), tuple(int(x) for x in g)
        for cell in (s, g):
            if not grid.is_free(cell):
                raise ParameterError(f"agent {i}: {cell} is not a free cell")
        agents.append(AgentState(i, s, g))
    world = World(grid, topology, agents, config, rng)
    for a in world.agents:
        a.corridor_record = world.corridor_record_for(a.position, a.goal)
    world.refresh()
    return world


def step(world: World, actions: Sequence[int], validity: Optional[dict] = None):
    """Advance one synchronous timestep.

    ``actions`` has one entry per agent (entries of inactive agents are
    ignored). Returns ``(rewards, events)``; rewards of inactive agents are
    None.
    """
    agents = world.agents
    if len(actions) != len(agents):
        raise ParameterError(f"expected {len(agents)} actions, got {len(actions)}")
    cfg = world.config
    topo = world.topology
    occ = world.occupancy
    t = world.t
    active = [a for a in agents if a.active]
    chosen: dict[int, int] = {}
    flags: dict[int, list] = {a.id: [] for a in active}
    deadlocked = set()

    for a in active:
        act = int(actions[a.id])
        if not 0 <= act < 5:
            raise ParameterError(f"agent {a.id}: action {act} out of range")
        v = validity.get(a.id) if validity is not None else None
        if v is None:
            v = valid_actions(world, a.id, cfg.conventions)
        if a.corridor_record is not None and deadlock(world, a.id):
            deadlocked.add(a.id)
            flags[a.id].append("deadlock")
        world.actions_taken += 1
        if v[act]:
            world.actions_valid += 1
        elif cfg.strict:
            raise ContractError(f"t={t}: agent {a.id} chose invalid action {Action(act).name}")
        else:
            flags[a.id].append("invalid")
            act = Action.STAY
        chosen[a.id] = act

    targets: dict[int, Cell] = {}
    by_target: dict[Cell, list[int]] = {}
    for a in active:
        act = chosen[a.id]
        if act == Action.STAY:
            continue
        dr, dc = ACTION_OFFSETS[act]
        tgt = (a.position[0] + dr, a.position[1] + dc)
        targets[a.id] = tgt
        by_target.setdefault(tgt, []).append(a.id)

    collided = set()
    for tgt, ids in by_target.items():
        if len(ids) > 1:
            collided.update(ids)
    for i in collided:
        del targets[i]
        flags[i].append("collision")

    if cfg.conventions:
        # simultaneous entries into one corridor through different endpoints
        entries: dict[int, list[int]] = {}
        for i, tgt in targets.items():
            if agents[i].corridor_record is None:
                cid = topo.corridor_of[tgt]
                if cid >= 0:
                    entries.setdefault(cid, []).append(i)
        for cid, ids in entries.items():
            if len(ids) > 1 and len({targets[i] for i in ids}) > 1:
                winner = min(ids)
                for i in ids:
                    if targets[i] != targets[winner]:
                        del targets[i]
                        flags[i].append("yield")

    # R2 forbids moving into occupied cells, so moves can be applied in any order
    for i, tgt in targets.items():
        occ[agents[i].position] = -1
    arrived = []
    origin: dict[int, Cell] = {}
    for a in active:
        old = origin[a.id] = a.position
        world._count_exit(a, -1)
        a.previous_position = old
        tgt = targets.get(a.id)
        if tgt is not None:
            a.position = tgt
            occ[tgt] = a.id
            cid = topo.corridor_of[tgt]
            if cid < 0:
                a.corridor_record = None
            else:
                cor = topo.corridors[cid]
                if a.corridor_record is None or a.corridor_record.corridor != cid:
                    a.corridor_record = record_on_entry(cor, tgt) if cor.endpoints else CorridorRecord(cid, None, None)
                else:
                    a.corridor_record = record_after_move(cor, a.corridor_record, old, tgt)
            if tgt == a.goal:
                arrived.append(a)
        world._count_exit(a, +1)

    rewards: list[Optional[float]] = [None] * len(agents)
    outcome: dict[int, Outcome] = {}
    for a in active:
        if a.id in collided:
            outcome[a.id] = Outcome.COLLIDED
        elif a.id in targets:
            outcome[a.id] = Outcome.MOVED
        else:
            outcome[a.id] = Outcome.STAYED
    for a in arrived:
        outcome[a.id] = Outcome.REACHED_GOAL
        a.goals_reached += 1
        world.goals_reached_total += 1
        if cfg.mode is Mode.ONE_SHOT:
            # finished agents leave the world
            world._count_exit(a, -1)
            occ[a.position] = -1
            a.active = False
            a.corridor_record = None
        else:
            a.goal = sample_new_goal(world, a)
            a.previous_position = None
            flags[a.id].append("new_goal")
    world.collisions += len(collided)

    events = []
    for a in active:
        o = outcome[a.id]
        rewards[a.id] = reward(None, chosen[a.id], o, cfg.rewards)
        if o is Outcome.REACHED_GOAL:
            flags[a.id].append("goal")
        events.append({
            "t": t,
            "agent": a.id,
            "action": Action(chosen[a.id]).name,
            "from": list(origin[a.id]),
            "to": list(a.position),
            "reward": rewards[a.id],
            "flags": flags[a.id],
        })
    world.t = t + 1
    if cfg.mode is Mode.ONE_SHOT and world.makespan is None and world.all_done:
        world.makespan = world.t
    if arrived:
        world.cache.retain(a.goal for a in agents if a.active)
    if world.log is not None:
        world.log.extend(events)
    return rewards, events


def run_episode(world: World, policies, callback: Optional[Callable] = None) -> EpisodeMetrics:
    """Run until ``max_timesteps`` or, one-shot, until every agent is done.

    ``policies`` is a sequence with one policy per agent (see
    :mod:`lmapf.policies`). A policy returns an action or an
    ``(action, distribution)`` pair. ``callback(world, events)`` runs after
    every step.
    """
    cfg = world.config
    if len(policies) != len(world.agents):
        raise ParameterError(f"expected {len(world.agents)} policies, got {len(policies)}")
    builder = ObservationBuilder(world.grid, world.topology, cfg.obs, world.cache)
    timing = {"observe": 0.0, "policy": 0.0, "apply": 0.0}
    noop = [int(Action.STAY)] * len(world.agents)
    while world.t < cfg.max_timesteps:
        if cfg.mode is Mode.ONE_SHOT and world.all_done:
            break
        t0 = time.perf_counter()
        snap = builder.snapshot(world.agents)
        ids = world.active_ids()
        obs = {i: builder.build(snap, i) for i in ids}
        validity = {i: valid_actions(world, i, cfg.conventions) for i in ids}
        t1 = time.perf_counter()
        actions = list(noop)
        dists = {}
        for i in ids:
            out = policies[i](obs[i], validity[i])
            if isinstance(out, tuple):
                out, dists[i] = out
            actions[i] = int(out)
        t2 = time.perf_counter()
        _, events = step(world, actions, validity)
        t3 = time.perf_counter()
        timing["observe"] += t1 - t0
        timing["policy"] += t2 - t1
        timing["apply"] += t3 - t2
        if dists and world.log is not None:
            for ev in events:
                d = dists.get(ev["agent"])
                if d is not None:
                    ev["distribution"] = [float(x) for x in d]
                    ev["valid"] = [int(x) for x in validity[ev["agent"]]]
        if callback is not None:
            callback(world, events)
    return metrics_of(world, timing)


def metrics_of(world: World, timing: Optional[dict] = None) -> EpisodeMetrics:
    steps = max(world.t, 1)
    return EpisodeMetrics(
        mode=world.config.mode,
        n_agents=len(world.agents),
        timesteps=world.t,
        makespan=world.makespan,
        goals_reached_total=world.goals_reached_total,
        throughput=world.goals_reached_total / steps,
        valid_rate=world.actions_valid / world.actions_taken if world.actions_taken else 1.0,
        collisions=world.collisions,
        agents_reached=sum(1 for a in world.agents if a.goals_reached > 0),
        fallback_goals=world.fallback_goals,
        timing=dict(timing or {}),
        trajectories=world.log,
    )


def write_events(events, fh) -> None:
    """Stream events as JSON lines."""
    for ev in events:
        fh.write(json.dumps(ev) + "\n")
