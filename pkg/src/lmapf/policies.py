"""Reference policies and a centralized prioritized-planning baseline.

A policy is a callable ``policy(obs, valid) -> action``. With
``return_distribution=True`` it returns ``(action, probabilities)`` instead,
the probabilities being a length-5 vector over (N, E, S, W, Stay).
"""

from __future__ import annotations

import time
from typing import Optional, Sequence

import numpy as np

from .errors import LmapfError, ParameterError
from .grid import Cell, GridMap
from .observation import AGENTS, FIRST_PREDICTION, OBSTACLES, PATH_LENGTH, Observation, ObsConfig
from .pathfinding import ReservationTable, distance_field, space_time_astar
from .rules import ACTION_OFFSETS, N_ACTIONS, Action

__all__ = [
    "RandomValidPolicy", "GreedyPolicy", "ConventionPolicy", "POLICIES", "make_policy",
    "make_policies", "PlanningFailure", "prioritized_plan", "target_values",
]

STAY = int(Action.STAY)


def target_values(obs: Observation) -> np.ndarray:
    """path_length value of each action's target cell; unreachable = inf."""
    pl = obs.channels[PATH_LENGTH]
    p = pl.shape[0] // 2
    out = np.empty(N_ACTIONS)
    for k, (dr, dc) in enumerate(ACTION_OFFSETS):
        x = pl[p + dr, p + dc]
        out[k] = x if x >= 0 else np.inf
    return out


def _one_hot(k: int) -> np.ndarray:
    d = np.zeros(N_ACTIONS)
    d[k] = 1.0
    return d


def _check_valid(valid) -> np.ndarray:
    v = np.asarray(valid).astype(bool)
    if v.shape != (N_ACTIONS,):
        raise ParameterError(f"validity vector must have {N_ACTIONS} entries")
    if not v.any():
        v = v.copy()
        v[STAY] = True
    return v


class _Policy:
    name = "base"

    def __init__(self, seed: Optional[int] = None, return_distribution: bool = False):
        self.rng = np.random.default_rng(seed)
        self.return_distribution = return_distribution

    def __call__(self, obs: Observation, valid):
        action, dist = self.act(obs, _check_valid(valid))
        return (action, dist) if self.return_distribution else action

    def act(self, obs, v):
        raise NotImplementedError

    def reset(self) -> None:
        pass


class RandomValidPolicy(_Policy):
    """Uniform over valid actions."""

    name = "random_valid"

    def act(self, obs, v):
        idx = np.flatnonzero(v)
        dist = np.zeros(N_ACTIONS)
        dist[idx] = 1.0 / len(idx)
        return int(idx[self.rng.integers(len(idx))]), dist


class GreedyPolicy(_Policy):
    """Valid action whose target has the smallest path_length; ties by action order."""

    name = "greedy"

    def act(self, obs, v):
        vals = np.where(v, target_values(obs), np.inf)
        if np.isinf(vals).all():
            return STAY, _one_hot(STAY)
        k = int(np.argmin(vals))
        return k, _one_hot(k)


class ConventionPolicy(_Policy):
    """Greedy descent that waits politely at corridor entrances.

    * the greedy move is taken whenever it is valid and does not park on a
      cell an exiting agent needs (next to an endpoint that is blocked and
      occupied); if another agent is predicted to step onto the same cell,
      the agent backs off with probability ``backoff``;
    * when the desired endpoint is blocked the agent waits; it steps aside
      if the blocking agent is already on that endpoint and needs to come out;
    * inside a corridor it keeps moving if it can;
    * elsewhere, after ``patience`` consecutive waits it takes a detour
      (the best valid move, random among ties).
    """

    name = "convention"

    def __init__(self, seed: Optional[int] = None, patience: int = 2, backoff: float = 0.5,
                 config: ObsConfig = ObsConfig(), return_distribution: bool = False):
        super().__init__(seed, return_distribution)
        if patience < 0:
            raise ParameterError("patience must be >= 0")
        if not 0.0 <= backoff < 1.0:
            raise ParameterError("backoff must be in [0, 1)")
        self.patience = patience
        self.backoff = backoff
        self.config = config
        self.waited = 0

    def reset(self) -> None:
        self.waited = 0

    def _choose(self, obs: Observation, v: np.ndarray) -> int:
        ch = obs.channels
        cfg = self.config
        p = ch.shape[1] // 2
        blocked = ch[cfg.blocking] > 0
        occupied = ch[AGENTS] > 0
        exiting = blocked & occupied

        def keep_clear(r, c):
            for dr, dc in ACTION_OFFSETS[:4]:
                if exiting[r + dr, c + dc]:
                    return True
            return False

        vals = target_values(obs)
        desired = int(np.argmin(vals))
        clear = [keep_clear(p + dr, p + dc) if k != STAY else False
                 for k, (dr, dc) in enumerate(ACTION_OFFSETS)]

        def best_move(random_ties=False) -> int:
            cand = [k for k in range(4) if v[k] and not clear[k] and np.isfinite(vals[k])]
            if not cand:
                return STAY
            low = min(vals[k] for k in cand)
            ties = [k for k in cand if vals[k] == low]
            return int(ties[self.rng.integers(len(ties))]) if random_ties else ties[0]

        if v[desired] and not clear[desired]:
            dr, dc = ACTION_OFFSETS[desired]
            contested = desired != STAY and ch[FIRST_PREDICTION, p + dr, p + dc] > 0
            if contested and self.rng.random() < self.backoff:
                return STAY
            self.waited = 0
            return desired
        if desired != STAY:
            dr, dc = ACTION_OFFSETS[desired]
            if blocked[p + dr, p + dc]:
                return best_move() if occupied[p + dr, p + dc] else STAY
        if keep_clear(p, p):
            return best_move()
        free_around = sum(ch[OBSTACLES, p + dr, p + dc] == 0 for dr, dc in ACTION_OFFSETS[:4])
        if free_around <= 2:
            return best_move()
        self.waited += 1
        if self.waited > self.patience:
            k = best_move(random_ties=True)
            if k != STAY:
                self.waited = 0
            return k
        return STAY

    def act(self, obs, v):
        k = self._choose(obs, v)
        if not v[k]:
            k = STAY
        return k, _one_hot(k)


POLICIES = {
    "random_valid": RandomValidPolicy,
    "greedy": GreedyPolicy,
    "convention": ConventionPolicy,
}


def make_policy(name: str, seed: Optional[int] = None, **params) -> _Policy:
    try:
        cls = POLICIES[name]
    except KeyError:
        raise ParameterError(f"unknown policy {name!r}; choose from {sorted(POLICIES)}") from None
    return cls(seed=seed, **params)


def make_policies(name: str, n_agents: int, seed: int = 0, **params) -> list[_Policy]:
    """One policy instance per agent with independent, reproducible seeds."""
    seqs = np.random.SeedSequence(seed).spawn(n_agents)
    return [make_policy(name, seed=int(s.generate_state(1)[0]), **params) for s in seqs]


# -- centralized baseline ------------------------------------------------------


class PlanningFailure(LmapfError):
    def __init__(self, agent: int, reason: str = "no path within horizon"):
        super().__init__(f"agent {agent}: {reason}")
        self.agent = agent


def prioritized_plan(grid: GridMap, starts: Sequence[Cell], goals: Sequence[Cell],
                     order: Optional[Sequence[int]] = None, horizon: Optional[int] = None,
                     restarts: int = 0, seed: int = 0, timeout: float = 60.0) -> list[list[Cell]]:
    """Cooperative A*: plan agents one by one against earlier reservations.

    ``paths[i][t]`` is agent i's cell at time t; each path ends once the
    agent can stay on its goal for good. On failure up to ``restarts``
    (at most 10) random priority orders are tried before raising
    :class:`PlanningFailure` for the agent that failed last.
    """
    starts = [tuple(int(x) for x in s) for s in starts]
    goals = [tuple(int(x) for x in g) for g in goals]
    n = len(starts)
    if len(goals) != n:
        raise ParameterError("starts and goals differ in length")
    if len(set(starts)) != n:
        raise ParameterError("starts must be pairwise distinct")
    if not 0 <= restarts <= 10:
        raise ParameterError("restarts must be in [0, 10]")
    order = list(range(n)) if order is None else [int(i) for i in order]
    if sorted(order) != list(range(n)):
        raise ParameterError("order must be a permutation of agent indices")
    deadline = time.monotonic() + timeout
    fields = [distance_field(grid, g) for g in goals]
    rng = np.random.default_rng(seed)
    failure = None
    for attempt in range(restarts + 1):
        if attempt:
            order = [int(i) for i in rng.permutation(n)]
        table = ReservationTable()
        # unplanned agents sit on their starts
        for s in starts:
            table.reserve_vertex(s, 0)
        paths: list[Optional[list[Cell]]] = [None] * n
        failure = None
        for i in order:
            if time.monotonic() > deadline:
                raise PlanningFailure(i, f"timeout after {timeout:g} s")
            table.vertices.discard((starts[i], 0))
            path = space_time_astar(grid, starts[i], goals[i], table, horizon, fields[i])
            if path is None:
                failure = PlanningFailure(i)
                break
            table.reserve_path(path)
            paths[i] = path
        if failure is None:
            return paths
    raise failure


def plan_makespan(paths: Sequence[Sequence[Cell]]) -> int:
    return max((len(p) - 1 for p in paths), default=0)
