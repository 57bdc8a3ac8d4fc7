"""Single-agent shortest paths, distance fields and space-time planning."""

from __future__ import annotations

import heapq
from collections import defaultdict
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .agents import AgentState
from .errors import ParameterError
from .grid import NEIGHBOR_OFFSETS, Cell, GridMap

UNREACHABLE = -1

# space-time expansion order: Up, Right, Down, Left, Wait
_ST_MOVES = NEIGHBOR_OFFSETS + ((0, 0),)


class DistanceField:
    """Exact BFS distances to ``goal``; ``UNREACHABLE`` (-1) where none exists."""

    __slots__ = ("goal", "distances", "padded", "pad")

    def __init__(self, goal: Cell, padded: np.ndarray, pad: int = 0):
        self.goal = goal
        self.pad = pad
        self.padded = padded
        h, w = padded.shape
        self.distances = padded[pad:h - pad, pad:w - pad] if pad else padded

    def __getitem__(self, cell: Cell) -> int:
        return int(self.distances[cell[0], cell[1]])

    def reachable(self, cell: Cell) -> bool:
        return self.distances[cell[0], cell[1]] >= 0


def _require_free(grid: GridMap, cell: Cell, what: str) -> None:
    if not grid.is_free(cell):
        raise ParameterError(f"{what} {cell} is not a free cell")


def distance_field(grid: GridMap, goal: Cell) -> DistanceField:
    _require_free(grid, goal, "goal")
    return DistanceField(tuple(goal), _kernels.bfs_distances(grid.free_u8, goal[0], goal[1]))


class DistanceCache:
    """Distance fields keyed by goal, stored on a frame padded by ``pad`` cells.

    The padding lets observation windows be sliced without bounds checks;
    padded cells are obstacles and read as ``UNREACHABLE``.
    """

    def __init__(self, grid: GridMap, pad: int = 0):
        self.grid = grid
        self.pad = pad
        self._free = np.ascontiguousarray(np.pad(grid.free_u8, pad, constant_values=0))
        self._fields: dict[Cell, DistanceField] = {}

    def __len__(self):
        return len(self._fields)

    def get(self, goal: Cell) -> DistanceField:
        goal = (int(goal[0]), int(goal[1]))
        f = self._fields.get(goal)
        if f is None:
            _require_free(self.grid, goal, "goal")
            p = self.pad
            f = DistanceField(goal, _kernels.bfs_distances(self._free, goal[0] + p, goal[1] + p), p)
            f.padded.setflags(write=False)
            self._fields[goal] = f
        return f

    def retain(self, goals) -> None:
        keep = {tuple(g) for g in goals}
        for g in [g for g in self._fields if g not in keep]:
            del self._fields[g]


def astar_path(grid: GridMap, start: Cell, goal: Cell) -> Optional[list[Cell]]:
    """Shortest 4-connected path ``start .. goal`` inclusive, or None.

    A* runs from the goal towards the start with the Manhattan heuristic.
    Among all shortest paths it returns the one that, walked from the start,
    takes the first improving move in Up, Right, Down, Left order. That is
    the same path as :func:`descend` over the goal's distance field.
    """
    start, goal = tuple(start), tuple(goal)
    _require_free(grid, start, "start")
    _require_free(grid, goal, "goal")
    if start == goal:
        return [start]
    obstacles = grid.obstacles
    h, w = grid.shape
    sr, sc = start
    g = {goal: 0}
    parent: dict[Cell, Cell] = {}
    prank: dict[Cell, int] = {}
    closed = set()
    heap = [(abs(goal[0] - sr) + abs(goal[1] - sc), 0, goal)]
    found = False
    while heap:
        _, gn, n = heapq.heappop(heap)
        if n in closed:
            continue
        closed.add(n)
        if n == start:
            found = True
            break
        r, c = n
        ng = gn + 1
        for k, (dr, dc) in enumerate(NEIGHBOR_OFFSETS):
            mr, mc = r + dr, c + dc
            if not (0 <= mr < h and 0 <= mc < w) or obstacles[mr, mc]:
                continue
            m = (mr, mc)
            rank = (k + 2) % 4  # direction m -> n
            old = g.get(m)
            if old is None or ng < old:
                g[m] = ng
                parent[m] = n
                prank[m] = rank
                heapq.heappush(heap, (ng + abs(mr - sr) + abs(mc - sc), ng, m))
            elif ng == old and rank < prank[m] and m not in closed:
                parent[m] = n
                prank[m] = rank
    if not found:
        return None
    path = [start]
    while path[-1] != goal:
        path.append(parent[path[-1]])
    return path


def descend(distances: np.ndarray, start: Cell, steps: int, offset: int = 0) -> list[Cell]:
    """Follow the distance field downhill from ``start`` for ``steps`` moves.

    Ties go to the first neighbour in Up, Right, Down, Left order; the walk
    stays put at the goal or where the goal is unreachable. ``offset`` is
    the padding of ``distances`` relative to map coordinates.
    """
    r, c = start[0] + offset, start[1] + offset
    h, w = distances.shape
    out = []
    d = distances[r, c]
    for _ in range(steps):
        if d > 0:
            for dr, dc in NEIGHBOR_OFFSETS:
                nr, nc = r + dr, c + dc
                if 0 <= nr < h and 0 <= nc < w and distances[nr, nc] == d - 1:
                    r, c = nr, nc
                    d -= 1
                    break
        out.append((r - offset, c - offset))
    return out


def predict_positions(grid: GridMap, agent: AgentState, horizon: int,
                      field: Optional[DistanceField] = None) -> list[Cell]:
    """Positions after 1..horizon steps along the agent's lone shortest path.

    Past the end of the path the goal is repeated. With an unreachable goal
    the agent is predicted stationary.
    """
    if horizon < 1:
        raise ParameterError("horizon must be >= 1")
    if field is None:
        field = distance_field(grid, agent.goal)
    return descend(field.padded, agent.position, horizon, field.pad)


class ReservationTable:
    """Space-time occupancy for prioritized planning.

    An edge reservation ``(a, b, t)`` means a move a -> b between t and t+1;
    the swap ``(b, a, t)`` is treated as reserved too.
    """

    def __init__(self):
        self.vertices: set[tuple[Cell, int]] = set()
        self.edges: set[tuple[Cell, Cell, int]] = set()
        self.permanent: dict[Cell, int] = {}
        self._last: dict[Cell, int] = defaultdict(lambda: -1)

    def reserve_vertex(self, cell: Cell, t: int) -> None:
        self.vertices.add((cell, t))
        if t > self._last[cell]:
            self._last[cell] = t

    def reserve_edge(self, a: Cell, b: Cell, t: int) -> None:
        self.edges.add((a, b, t))

    def reserve_from(self, cell: Cell, t: int) -> None:
        """Reserve ``cell`` for every timestep >= t."""
        self.permanent[cell] = min(t, self.permanent.get(cell, t))

    def reserve_path(self, path: Sequence[Cell]) -> None:
        for t, cell in enumerate(path):
            self.reserve_vertex(cell, t)
            if t:
                self.reserve_edge(path[t - 1], cell, t - 1)
        self.reserve_from(path[-1], len(path) - 1)

    def vertex_free(self, cell: Cell, t: int) -> bool:
        if (cell, t) in self.vertices:
            return False
        since = self.permanent.get(cell)
        return since is None or t < since

    def edge_free(self, a: Cell, b: Cell, t: int) -> bool:
        return (a, b, t) not in self.edges and (b, a, t) not in self.edges

    def can_rest(self, cell: Cell, t: int) -> bool:
        """True iff an agent could stay on ``cell`` from t onwards."""
        return cell not in self.permanent and self._last.get(cell, -1) < t


def space_time_astar(grid: GridMap, start: Cell, goal: Cell, reservations: ReservationTable,
                     horizon: Optional[int] = None,
                     field: Optional[DistanceField] = None) -> Optional[list[Cell]]:
    """Time-expanded shortest path; entry t is the cell occupied at time t.

    Waiting is allowed. The path ends at the first time the agent can rest
    on ``goal`` for good. Returns None when no such path exists within
    ``horizon`` (default ``4 * (width + height)``).
    """
    start, goal = tuple(start), tuple(goal)
    _require_free(grid, start, "start")
    _require_free(grid, goal, "goal")
    if horizon is None:
        horizon = 4 * (grid.width + grid.height)
    if field is None:
        field = distance_field(grid, goal)
    dist = field.distances
    if dist[start] < 0 or not reservations.vertex_free(start, 0):
        return None
    obstacles = grid.obstacles
    h, w = grid.shape
    heap = [(int(dist[start]), 0, 0, start)]  # (f, -t, tiebreak, cell)
    parent: dict[tuple[Cell, int], Optional[tuple[Cell, int]]] = {(start, 0): None}
    closed = set()
    counter = 0
    while heap:
        _, neg_t, _, cell = heapq.heappop(heap)
        t = -neg_t
        state = (cell, t)
        if state in closed:
            continue
        closed.add(state)
        if cell == goal and reservations.can_rest(goal, t):
            path = []
            while state is not None:
                path.append(state[0])
                state = parent[state]
            return path[::-1]
        if t >= horizon:
            continue
        r, c = cell
        for dr, dc in _ST_MOVES:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < h and 0 <= nc < w) or obstacles[nr, nc]:
                continue
            n = (nr, nc)
            nxt = (n, t + 1)
            if nxt in closed or nxt in parent:
                continue
            if not reservations.vertex_free(n, t + 1):
                continue
            if n != cell and not reservations.edge_free(cell, n, t):
                continue
            parent[nxt] = state
            counter += 1
            heapq.heappush(heap, (t + 1 + int(dist[nr, nc]), -(t + 1), counter, n))
    return None
