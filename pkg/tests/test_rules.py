import numpy as np
import pytest

from helpers import DEAD_END_ROWS, TWO_ROOMS_ROWS, grid
from lmapf.agents import AgentState
from lmapf.corridors import analyze, record_on_entry
from lmapf.errors import ParameterError
from lmapf.grid import GridMap
from lmapf.rules import Action, Outcome, RewardConfig, deadlock, reward, valid_actions
from lmapf.simulator import World

N, E, S, W, STAY = range(5)


def make_world(rows, agents):
    g = grid(rows) if isinstance(rows, list) else rows
    topo = analyze(g)
    world = World(g, topo, agents)
    for a in agents:
        if a.corridor_record is None:
            cor = topo.corridor_at(a.position)
            if cor is not None:
                a.corridor_record = world.corridor_record_for(a.position, a.goal)
    world.refresh()
    return world


def entered(world_rows, position, endpoint):
    topo = analyze(grid(world_rows))
    return record_on_entry(topo.corridor_at(position), endpoint)


def test_open_field_all_valid():
    g = GridMap(np.zeros((7, 7), dtype=bool))
    w = make_world(g, [AgentState(0, (3, 3), (0, 0))])
    assert valid_actions(w, 0).tolist() == [1, 1, 1, 1, 1]


def test_walls_occupancy_and_previous_cell():
    g = GridMap.from_rows(["...", ".@.", "..."])
    a = AgentState(0, (0, 1), (2, 2), previous_position=(0, 0))
    b = AgentState(1, (0, 2), (2, 0))
    w = make_world(g, [a, b])
    v = valid_actions(w, 0)
    assert v[N] == 0  # out of bounds
    assert v[S] == 0  # obstacle
    assert v[E] == 0  # occupied
    assert v[W] == 0  # previous cell
    assert v[STAY] == 1


def test_oncoming_agent_blocks_entry():
    rec = entered(TWO_ROOMS_ROWS, (2, 6), (2, 8))
    red = AgentState(0, (2, 3), (2, 11))
    blue = AgentState(1, (2, 6), (2, 1), corridor_record=rec)
    alone = make_world(TWO_ROOMS_ROWS, [AgentState(0, (2, 3), (2, 11))])
    w = make_world(TWO_ROOMS_ROWS, [red, blue])
    v, base = valid_actions(w, 0), valid_actions(alone, 0)
    assert v[E] == 0 and base[E] == 1
    assert np.array_equal(np.delete(v, E), np.delete(base, E))
    # without conventions entry is allowed
    assert valid_actions(w, 0, conventions=False)[E] == 1


def test_no_reversal_inside_corridor():
    rec = entered(TWO_ROOMS_ROWS, (2, 6), (2, 4))
    w = make_world(TWO_ROOMS_ROWS, [AgentState(0, (2, 6), (2, 1), corridor_record=rec)])
    v = valid_actions(w, 0)
    assert v[W] == 0 and v[E] == 1 and v[STAY] == 1
    assert valid_actions(w, 0, conventions=False)[W] == 1


def test_head_on_pair_is_deadlocked():
    a = AgentState(0, (2, 5), (2, 11), corridor_record=entered(TWO_ROOMS_ROWS, (2, 5), (2, 4)))
    b = AgentState(1, (2, 6), (2, 1), corridor_record=entered(TWO_ROOMS_ROWS, (2, 6), (2, 8)))
    w = make_world(TWO_ROOMS_ROWS, [a, b])
    assert deadlock(w, 0) and deadlock(w, 1)
    # reversal is allowed once deadlocked
    assert valid_actions(w, 0)[W] == 1


def test_dead_end_terminal_is_deadlock():
    rec = entered(DEAD_END_ROWS, (2, 7), (2, 4))
    w = make_world(DEAD_END_ROWS, [AgentState(0, (2, 7), (2, 1), corridor_record=rec)])
    assert deadlock(w, 0)
    assert valid_actions(w, 0)[W] == 1


def test_free_corridor_is_not_deadlock():
    rec = entered(TWO_ROOMS_ROWS, (2, 6), (2, 4))
    w = make_world(TWO_ROOMS_ROWS, [AgentState(0, (2, 6), (2, 11), corridor_record=rec)])
    assert not deadlock(w, 0)


def test_deadlock_outside_corridor_rejected():
    w = make_world(TWO_ROOMS_ROWS, [AgentState(0, (2, 2), (2, 11))])
    with pytest.raises(ParameterError):
        deadlock(w, 0)


def test_rewards():
    cfg = RewardConfig()
    assert reward(None, Action.EAST, Outcome.MOVED, cfg) == -0.3
    assert reward(None, Action.STAY, Outcome.STAYED, cfg) == -0.3
    assert reward(None, Action.EAST, Outcome.REACHED_GOAL, cfg) == 5.0
    assert reward(None, Action.EAST, Outcome.COLLIDED, cfg) == -2.0
