import io
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import TWO_ROOMS_ROWS, TraceChecker, grid
from lmapf.agents import AgentState
from lmapf.corridors import analyze
from lmapf.errors import ContractError, ParameterError, PlacementError
from lmapf.grid import GridMap, MazeParams, generate_maze, warehouse_map
from lmapf.policies import make_policies
from lmapf.rules import Action
from lmapf.simulator import (EpisodeConfig, Mode, World, default_horizon, init_episode, run_episode,
                             sample_new_goal, step, world_from_scenario, write_events)

N, E, S, W, STAY = range(5)
OPEN = GridMap(np.zeros((10, 10), dtype=bool))
LIFE = EpisodeConfig(mode=Mode.LIFELONG)
ONE = EpisodeConfig(mode=Mode.ONE_SHOT)


def test_default_horizons():
    assert [default_horizon(Mode.LIFELONG, s) for s in (20, 40, 80, 160)] == [128, 128, 192, 256]
    assert [default_horizon(Mode.ONE_SHOT, s) for s in (20, 40, 80, 160)] == [320, 320, 480, 640]


def test_init_single_agent():
    w = init_episode(OPEN, None, 1, LIFE)
    a = w.agents[0]
    assert np.hypot(a.position[0] - a.goal[0], a.position[1] - a.goal[1]) >= 2


def test_init_too_many_agents():
    with pytest.raises(PlacementError):
        init_episode(GridMap.from_rows(["..", ".@"]), None, 4, LIFE)


def test_init_one_agent_per_corridor():
    g = warehouse_map(shelf_columns=3, shelf_rows=6, shelf_length=6, border=1, cross_aisle=1)
    topo = analyze(g)
    for seed in range(100):
        w = init_episode(g, topo, 40, EpisodeConfig(seed=seed))
        cids = [topo.corridor_of[a.position] for a in w.agents if topo.corridor_of[a.position] >= 0]
        assert len(cids) == len(set(cids))
        assert len({a.position for a in w.agents}) == 40
        assert len({a.goal for a in w.agents}) == 40


def test_init_is_deterministic():
    g = generate_maze(MazeParams(20, 0.3, 5, 1))
    a = init_episode(g, None, 10, EpisodeConfig(seed=4))
    b = init_episode(g, None, 10, EpisodeConfig(seed=4))
    assert [(x.position, x.goal) for x in a.agents] == [(x.position, x.goal) for x in b.agents]


def test_lifelong_arrival():
    w = world_from_scenario(OPEN, [(0, 0)], [(0, 1)], LIFE)
    rewards, events = step(w, [E])
    a = w.agents[0]
    assert rewards == [5.0]
    assert a.goals_reached == 1 and w.goals_reached_total == 1
    assert np.hypot(a.goal[0], a.goal[1] - 1) >= 2
    assert a.previous_position is None
    assert "goal" in events[0]["flags"]


def test_same_target_collision():
    w = world_from_scenario(OPEN, [(0, 0), (0, 2)], [(5, 5), (6, 6)], LIFE)
    rewards, events = step(w, [E, W])
    assert rewards == [-2.0, -2.0]
    assert [a.position for a in w.agents] == [(0, 0), (0, 2)]
    assert w.collisions == 2
    assert all("collision" in e["flags"] for e in events)


def test_one_shot_arrival_frees_cell():
    g = GridMap(np.zeros((1, 4), dtype=bool))
    w = world_from_scenario(g, [(0, 0), (0, 2)], [(0, 1), (0, 3)], ONE)
    step(w, [E, STAY])
    assert not w.agents[0].active
    assert w.occupancy[0, 1] == -1
    step(w, [STAY, W])
    assert w.agents[1].position == (0, 1)


def test_strict_and_lenient():
    w = world_from_scenario(OPEN, [(0, 0)], [(5, 5)], LIFE)
    with pytest.raises(ContractError):
        step(w, [N])
    w = world_from_scenario(OPEN, [(0, 0)], [(5, 5)], EpisodeConfig(strict=False))
    _, events = step(w, [N])
    assert events[0]["action"] == "STAY" and "invalid" in events[0]["flags"]
    assert w.actions_valid == 0 and w.actions_taken == 1


def test_action_vector_size():
    w = world_from_scenario(OPEN, [(0, 0)], [(5, 5)], LIFE)
    with pytest.raises(ParameterError):
        step(w, [])


def test_entry_race_lowest_id_wins():
    g = grid(TWO_ROOMS_ROWS)
    w = world_from_scenario(g, [(2, 3), (2, 9)], [(2, 11), (2, 1)], LIFE)
    _, events = step(w, [E, W])
    assert w.agents[0].position == (2, 4)
    assert w.agents[1].position == (2, 9)
    assert "yield" in events[1]["flags"]


def test_sample_new_goal_distance():
    g = GridMap(np.zeros((20, 20), dtype=bool))
    w = world_from_scenario(g, [(5, 5)], [(5, 5)], LIFE)
    a = w.agents[0]
    for _ in range(1000):
        goal = sample_new_goal(w, a)
        assert np.hypot(goal[0] - 5, goal[1] - 5) >= 2
    assert w.fallback_goals == 0


def test_sample_new_goal_pocket_fallback():
    g = GridMap.from_rows(["..@...", "@@@..."])
    w = world_from_scenario(g, [(0, 1)], [(0, 0)], LIFE)
    a = w.agents[0]
    a.goal = a.position
    assert sample_new_goal(w, a) == (0, 0)
    assert w.fallback_goals == 1


def test_sample_new_goal_zero_distance():
    g = GridMap(np.zeros((3, 3), dtype=bool))
    w = world_from_scenario(g, [(1, 1)], [(0, 0)], EpisodeConfig(min_goal_distance=0))
    seen = {sample_new_goal(w, w.agents[0]) for _ in range(500)}
    assert len(seen) == 9


def test_single_agent_greedy_makespan():
    w = world_from_scenario(OPEN, [(0, 0)], [(7, 9)], EpisodeConfig(mode=Mode.ONE_SHOT, max_timesteps=320))
    m = run_episode(w, make_policies("greedy", 1))
    assert m.makespan == 16
    assert m.success_fraction == 1.0


def test_one_shot_incomplete():
    w = world_from_scenario(OPEN, [(0, 0)], [(7, 9)], EpisodeConfig(mode=Mode.ONE_SHOT, max_timesteps=5))
    assert run_episode(w, make_policies("greedy", 1)).makespan is None


def test_zero_throughput():
    w = world_from_scenario(OPEN, [(0, 0)], [(7, 9)], EpisodeConfig(max_timesteps=10))
    m = run_episode(w, [lambda obs, v: STAY])
    assert m.throughput == 0.0 and m.goals_reached_total == 0


def test_throughput_matches_event_recount():
    g = generate_maze(MazeParams(20, 0.3, 5, 3))
    w = init_episode(g, None, 8, EpisodeConfig(max_timesteps=128, seed=3, record=True))
    m = run_episode(w, make_policies("convention", 8, 3))
    arrivals = sum(1 for e in m.trajectories if "goal" in e["flags"])
    plus5 = sum(1 for e in m.trajectories if e["reward"] == 5.0)
    assert m.goals_reached_total == arrivals == plus5
    assert m.throughput == arrivals / 128
    assert m.valid_rate == 1.0


def test_events_stream_as_jsonl():
    w = init_episode(OPEN, None, 3, EpisodeConfig(max_timesteps=4, record=True))
    m = run_episode(w, make_policies("random_valid", 3, 1, return_distribution=True))
    buf = io.StringIO()
    write_events(m.trajectories, buf)
    lines = [json.loads(x) for x in buf.getvalue().splitlines()]
    assert len(lines) == 12
    assert set(lines[0]) >= {"t", "agent", "action", "from", "to", "reward", "flags", "distribution", "valid"}


def trace(seed, policy="convention", conventions=True, n=12, steps=60):
    g = generate_maze(MazeParams(20, 0.3, 5, seed % 50))
    cfg = EpisodeConfig(max_timesteps=steps, seed=seed, conventions=conventions, record=True)
    w = init_episode(g, None, n, cfg)
    check = TraceChecker(w)
    m = run_episode(w, make_policies(policy, n, seed), callback=check)
    return w, m, check


@settings(max_examples=12, deadline=None)
@given(seed=st.integers(0, 10**6), policy=st.sampled_from(["convention", "greedy", "random_valid"]))
def test_episode_invariants(seed, policy):
    w, m, check = trace(seed, policy)
    assert check.occupancy_violations == 0 and check.jumps == 0
    assert check.opposing == 0
    assert m.valid_rate == 1.0
    assert m.goals_reached_total == sum(1 for e in m.trajectories if e["reward"] == 5.0)


def test_episodes_are_deterministic():
    _, a, _ = trace(7)
    _, b, _ = trace(7)
    assert a.trajectories == b.trajectories


def test_run_episode_checks_policy_count():
    w = init_episode(OPEN, None, 2, LIFE)
    with pytest.raises(ParameterError):
        run_episode(w, make_policies("greedy", 1))


def test_world_rejects_overlap():
    with pytest.raises(ParameterError):
        World(OPEN, None, [AgentState(0, (0, 0), (1, 1)), AgentState(1, (0, 0), (2, 2))])
