import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import bfs_oracle
from lmapf.errors import MapParseError, ParameterError
from lmapf.grid import (GridMap, MazeParams, bfs_reachable, bundled_map, connected, generate_maze,
                        parse_movingai_map, segment_length_bounds, serialize_movingai_map,
                        wall_segment_lengths, warehouse_map)


def test_zero_density_maze_is_all_free():
    g = generate_maze(MazeParams(10, 0.0, 3, 1))
    assert g.shape == (10, 10)
    assert not g.obstacles.any()


def test_full_density_maze_is_all_obstacles():
    assert generate_maze(MazeParams(8, 1.0, 3, 0)).density == 1.0


@pytest.mark.parametrize("seed", range(1, 51))
def test_density_near_target(seed):
    g = generate_maze(MazeParams(40, 0.3, 10, seed))
    assert 0.25 <= g.density <= 0.35


@pytest.mark.parametrize("seed", range(1, 51, 7))
def test_dense_maze_free_space_connected(seed):
    g = generate_maze(MazeParams(20, 0.65, 20, seed))
    free = [tuple(c) for c in g.free_cells()]
    assert len(free) >= 2
    reach = bfs_oracle(g.obstacles.tolist(), free[0])
    assert set(reach) == set(free)


def test_maze_is_deterministic():
    p = MazeParams(30, 0.4, 5, 9)
    assert generate_maze(p) == generate_maze(p)
    assert generate_maze(p) != generate_maze(p._replace(seed=10))


@pytest.mark.parametrize("bad", [
    MazeParams(0, 0.3, 3), MazeParams(10, -0.1, 3), MazeParams(10, 1.2, 3), MazeParams(10, 0.3, 0),
    MazeParams(10, 0.3, 3, -1),
])
def test_maze_rejects_bad_params(bad):
    with pytest.raises(ParameterError):
        generate_maze(bad)


def test_segment_length_bounds():
    assert segment_length_bounds(10) == (5, 15)
    assert segment_length_bounds(1) == (1, 1)
    assert segment_length_bounds(3) == (1, 4)


@pytest.mark.parametrize("L", [10, 20])
def test_segment_lengths_track_corridor_length(L):
    lens = np.concatenate([wall_segment_lengths(generate_maze(MazeParams(80, 0.3, L, s))) for s in range(3)])
    assert 0.5 * L <= lens.mean() <= 1.5 * L


def test_parse_small_map():
    g = parse_movingai_map("type octile\nheight 2\nwidth 2\nmap\n.@\n..")
    assert g.shape == (2, 2)
    assert g.obstacles.tolist() == [[False, True], [False, False]]


def test_parse_bytes_and_file_objects():
    text = b"type octile\nheight 1\nwidth 3\nmap\n.T.\n"
    assert parse_movingai_map(text).obstacles.tolist() == [[False, True, False]]
    assert parse_movingai_map(io.BytesIO(text)).obstacles.tolist() == [[False, True, False]]


def test_parse_row_width_mismatch_names_line():
    with pytest.raises(MapParseError) as e:
        parse_movingai_map("type octile\nheight 2\nwidth 3\nmap\n...\n..\n")
    assert e.value.line == 6


@pytest.mark.parametrize("text", [
    "type octile\nheight x\nwidth 2\nmap\n..\n",
    "type octile\nwidth 2\nheight 1\nmap\n..\n",
    "type octile\nheight 2\nwidth 2\nmap\n..\n",
    "type octile\nheight 1\nwidth 2\nmap\n.?\n",
    "height 1\nwidth 2\nmap\n..\n",
])
def test_parse_errors(text):
    with pytest.raises(MapParseError):
        parse_movingai_map(text)


def test_all_obstacle_body_density_one():
    g = parse_movingai_map("type octile\nheight 4\nwidth 4\nmap\n" + "@@@@\n" * 4)
    assert g.density == 1.0


def test_serialize_round_trip():
    g = generate_maze(MazeParams(25, 0.5, 4, 3))
    assert parse_movingai_map(serialize_movingai_map(g)) == g


def test_connected_basics():
    g = GridMap.from_rows(["..@.", "..@.", "@@@."])
    assert connected(g, (0, 0), (0, 0))
    assert not connected(g, (0, 0), (0, 2))
    assert not connected(g, (0, 0), (0, 3))
    assert connected(g, (0, 3), (2, 3))
    with pytest.raises(ParameterError):
        connected(g, (0, 0), (5, 5))


def test_connected_matches_bfs_oracle():
    g = generate_maze(MazeParams(40, 0.5, 3, 11))
    rng = np.random.default_rng(0)
    free = g.free_cells()
    for _ in range(100):
        a = tuple(int(x) for x in free[rng.integers(len(free))])
        b = tuple(int(x) for x in rng.integers(0, 40, 2))
        assert connected(g, a, b) == (b in bfs_oracle(g.obstacles.tolist(), a))


def test_bfs_reachable_matches_oracle():
    g = GridMap.from_rows(["..@..", "..@..", "@@@.."])
    assert bfs_reachable(g, (0, 0)) == set(bfs_oracle(g.obstacles.tolist(), (0, 0)))


def test_bundled_warehouse_matches_generator():
    g = bundled_map("warehouse")
    assert g == warehouse_map()
    with pytest.raises(ParameterError):
        bundled_map("nope")


@settings(max_examples=30, deadline=None)
@given(size=st.integers(5, 30), density=st.floats(0.0, 0.7), L=st.integers(1, 12), seed=st.integers(0, 10**6))
def test_maze_free_space_always_one_component(size, density, L, seed):
    g = generate_maze(MazeParams(size, density, L, seed))
    labels = g.components
    free = labels[labels >= 0]
    assert free.size == 0 or np.unique(free).size == 1
    assert g.obstacles.sum() <= round(density * size * size)
