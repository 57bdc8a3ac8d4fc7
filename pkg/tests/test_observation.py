import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import TWO_ROOMS_ROWS, grid, oracle_field
from lmapf.agents import AgentState
from lmapf.corridors import analyze, record_on_entry
from lmapf.errors import ParameterError
from lmapf.grid import GridMap, MazeParams, generate_maze
from lmapf.observation import (AGENTS, FIRST_PREDICTION, NEIGHBOR_GOALS, OBSTACLES, OWN_GOAL, PATH_LENGTH,
                               ObsConfig, Observation, ObservationBuilder, build_observation,
                               normalize_path_length)
from lmapf.pathfinding import DistanceField, distance_field

CFG = ObsConfig()


def test_config_layout():
    assert CFG.n_channels == 11
    assert (CFG.delta_x, CFG.delta_y, CFG.blocking) == (8, 9, 10)
    with pytest.raises(ParameterError):
        ObsConfig(fov=10)
    with pytest.raises(ParameterError):
        ObsConfig(fov=3, corridor_window=5)


def test_lone_agent_far_goal():
    g = GridMap(np.zeros((30, 30), dtype=bool))
    topo = analyze(g)
    obs = build_observation(g, topo, [AgentState(0, (15, 15), (0, 29))], 0)
    ch = obs.channels
    assert ch.shape == (11, 11, 11)
    for k in [AGENTS, NEIGHBOR_GOALS, OWN_GOAL, CFG.blocking] + list(range(FIRST_PREDICTION, FIRST_PREDICTION + 3)):
        assert not ch[k].any()
    assert np.isclose(np.hypot(*obs.goal_vector[:2]), 1.0)
    assert obs.goal_vector[2] == pytest.approx(np.hypot(15, 14))
    # goal is up and to the right
    assert obs.goal_vector[0] > 0 and obs.goal_vector[1] > 0


def test_boundary_cells_are_obstacles():
    g = GridMap(np.zeros((20, 20), dtype=bool))
    obs = build_observation(g, analyze(g), [AgentState(0, (0, 0), (10, 10))], 0)
    ch = obs.channels
    assert (ch[OBSTACLES, :5, :] == 1).all()
    assert (ch[OBSTACLES, :, :5] == 1).all()
    assert (ch[OBSTACLES, 5:, 5:] == 0).all()
    assert (ch[PATH_LENGTH, :5, :] == -1).all()


def test_oncoming_agent_blocks_observers_endpoint():
    g = grid(TWO_ROOMS_ROWS)
    topo = analyze(g)
    cor = topo.corridor_at((2, 6))
    red = AgentState(0, (2, 3), (2, 11))
    blue = AgentState(1, (2, 6), (2, 1), corridor_record=record_on_entry(cor, (2, 8)))
    obs = build_observation(g, topo, [red, blue], 0)
    ch = obs.channels
    # red sits at local (5, 5); endpoint (2, 4) is local (5, 6)
    assert ch[CFG.blocking, 5, 6] == 1
    assert ch[CFG.blocking].sum() == 1
    assert ch[AGENTS, 5, 8] == 1
    assert [tuple(np.argwhere(ch[FIRST_PREDICTION + t])[0]) for t in range(3)] == [(5, 7), (5, 6), (5, 5)]
    # blue's goal is outside red's window: clamped to the border
    assert ch[NEIGHBOR_GOALS, 5, 3] == 1
    assert ch[CFG.delta_x, 5, 6] == 4 and ch[CFG.delta_y, 5, 6] == 0
    # the observer's own exit never shows as blocking
    blue_obs = build_observation(g, topo, [red, blue], 1)
    assert blue_obs.channels[CFG.blocking].sum() == 0


def test_path_length_normalisation():
    g = GridMap.from_rows(["." * 30])
    f = distance_field(g, (0, 0))
    win = normalize_path_length(f, (0, 8), 11)
    assert win[5].tolist() == pytest.approx([d / 13 for d in range(3, 14)])
    assert (win[:5] == -1).all()


def test_path_length_uniform_and_goal():
    padded = np.full((11, 11), 4, dtype=np.int32)
    win = normalize_path_length(DistanceField((0, 0), padded), (5, 5), 11)
    assert (win == 1.0).all()
    f = distance_field(GridMap(np.zeros((11, 11), dtype=bool)), (5, 5))
    assert normalize_path_length(f, (5, 5), 11)[5, 5] == 0.0


def test_record_round_trip():
    g = generate_maze(MazeParams(20, 0.3, 5, 2))
    free = [tuple(int(x) for x in c) for c in g.free_cells()]
    obs = build_observation(g, analyze(g), [AgentState(0, free[0], free[-1])], 0)
    rec = obs.to_record()
    assert len(rec) == CFG.record_size
    back = Observation.from_record(rec)
    assert np.array_equal(back.channels, obs.channels)
    assert np.allclose(back.goal_vector, obs.goal_vector)
    with pytest.raises(ParameterError):
        Observation.from_record(rec[:-1])


def test_inactive_observer_rejected():
    g = GridMap(np.zeros((5, 5), dtype=bool))
    a = AgentState(0, (0, 0), (4, 4), active=False)
    with pytest.raises(ParameterError):
        build_observation(g, analyze(g), [a], 0)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(1, 10))
def test_channels_agree_with_oracles(seed, n):
    rng = np.random.default_rng(seed)
    g = generate_maze(MazeParams(16, 0.3, 4, seed % 500))
    topo = analyze(g)
    free = [tuple(int(x) for x in c) for c in g.free_cells()]
    idx = rng.choice(len(free), size=min(n, len(free)), replace=False)
    agents = [AgentState(i, free[j], free[rng.integers(len(free))]) for i, j in enumerate(idx)]
    builder = ObservationBuilder(g, topo, CFG)
    snap = builder.snapshot(agents)
    for a in agents:
        ch = builder.build(snap, a.id).channels
        r, c = a.position
        want = oracle_field(g, a.goal)
        for lr in range(11):
            for lc in range(11):
                gr, gc = r + lr - 5, c + lc - 5
                inside = 0 <= gr < 16 and 0 <= gc < 16
                assert ch[OBSTACLES, lr, lc] == (not inside or g.obstacles[gr, gc])
                others = inside and any(b.position == (gr, gc) and b.id != a.id for b in agents)
                assert ch[AGENTS, lr, lc] == others
                if not inside or want[gr, gc] < 0:
                    assert ch[PATH_LENGTH, lr, lc] == -1
        pl = ch[PATH_LENGTH]
        assert pl.max() <= 1.0
        assert ((pl == -1) | (pl >= 0)).all()
