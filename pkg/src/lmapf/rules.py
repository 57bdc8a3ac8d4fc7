"""Action validity (including corridor conventions) and per-step rewards."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .corridors import forward_cell, keeps_heading
from .errors import ParameterError


class Action(enum.IntEnum):
    NORTH = 0
    EAST = 1
    SOUTH = 2
    WEST = 3
    STAY = 4


ACTION_OFFSETS = ((-1, 0), (0, 1), (1, 0), (0, -1), (0, 0))
N_ACTIONS = 5


class Outcome(enum.Enum):
    MOVED = "moved"
    STAYED = "stayed"
    COLLIDED = "collided"
    REACHED_GOAL = "reached_goal"


@dataclass(frozen=True)
class RewardConfig:
    step_penalty: float = -0.3
    goal_reward: float = 5.0
    collision_penalty: float = -2.0


def target_cell(position, action: int):
    dr, dc = ACTION_OFFSETS[action]
    return position[0] + dr, position[1] + dc


def deadlock(world, agent_id: int) -> bool:
    """Forward progress inside the corridor needs a reversal.

    True when the cell ahead holds a co-corridor agent heading straight at
    this one, or when the agent stands on the terminal cell of a dead-end.
    """
    a = world.agents[agent_id]
    rec = a.corridor_record
    if rec is None:
        raise ParameterError(f"agent {agent_id} is not inside a corridor")
    cor = world.topology.corridors[rec.corridor]
    if not cor.endpoints:
        return False
    if cor.dead_end and a.position == cor.cells[-1]:
        return True
    ahead = forward_cell(cor, rec, a.position)
    if ahead is None:
        return False
    j = world.occupancy[ahead]
    if j < 0:
        return False
    other = world.agents[j]
    orec = other.corridor_record
    if orec is None or orec.corridor != cor.id:
        return False
    return forward_cell(cor, orec, other.position) == a.position


def valid_actions(world, agent_id: int, conventions: bool = True) -> np.ndarray:
    """Validity vector over (North, East, South, West, Stay); Stay is always valid.

    A move is invalid if its target is blocked or out of bounds, currently
    occupied, or the agent's previous cell. With ``conventions`` it is also
    invalid to enter a corridor endpoint some agent inside will exit
    through, or to reverse inside a corridor unless deadlocked.
    """
    a = world.agents[agent_id]
    if not a.active:
        raise ParameterError(f"agent {agent_id} is inactive")
    v = np.ones(N_ACTIONS, dtype=np.uint8)
    obstacles = world.grid.obstacles
    occ = world.occupancy
    h, w = obstacles.shape
    r, c = a.position
    prev = a.previous_position
    rec = a.corridor_record
    topo = world.topology
    cor = topo.corridors[rec.corridor] if rec is not None else None
    stuck = None
    for k in range(4):
        dr, dc = ACTION_OFFSETS[k]
        nr, nc = r + dr, c + dc
        if not (0 <= nr < h and 0 <= nc < w) or obstacles[nr, nc] or occ[nr, nc] >= 0:
            v[k] = 0
            continue
        n = (nr, nc)
        if n == prev:
            v[k] = 0
            continue
        if not conventions:
            continue
        if cor is None:
            if topo.is_endpoint[nr, nc] and world.exit_counts[nr, nc] > 0:
                v[k] = 0
        elif cor.endpoints and not keeps_heading(cor, rec, a.position, n):
            if stuck is None:
                stuck = deadlock(world, agent_id)
            if not stuck:
                v[k] = 0
    return v


def reward(prev_state, action: int, outcome: Outcome, config: RewardConfig = RewardConfig()) -> float:
    """Goal reward replaces the step penalty; a collision implies no move."""
    if outcome is Outcome.REACHED_GOAL:
        return config.goal_reward
    if outcome is Outcome.COLLIDED:
        return config.collision_penalty
    return config.step_penalty
