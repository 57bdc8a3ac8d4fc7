"""Independent oracles and hand-built fixture maps for the test suite.

The oracles are deliberately naive pure Python so they share no code with
the package.
"""

from collections import deque

import numpy as np

from lmapf.grid import GridMap

MOVES = ((-1, 0), (0, 1), (1, 0), (0, -1))


def bfs_oracle(obstacles, goal):
    """Dict cell -> hop distance from ``goal`` over free 4-neighbours."""
    h, w = len(obstacles), len(obstacles[0])
    dist = {tuple(goal): 0}
    q = deque([tuple(goal)])
    while q:
        r, c = q.popleft()
        for dr, dc in MOVES:
            nr, nc = r + dr, c + dc
            if 0 <= nr < h and 0 <= nc < w and not obstacles[nr][nc] and (nr, nc) not in dist:
                dist[(nr, nc)] = dist[(r, c)] + 1
                q.append((nr, nc))
    return dist


def oracle_field(grid: GridMap, goal) -> np.ndarray:
    d = bfs_oracle(grid.obstacles.tolist(), goal)
    out = np.full(grid.shape, -1, dtype=np.int64)
    for (r, c), v in d.items():
        out[r, c] = v
    return out


def is_valid_path(grid: GridMap, path) -> bool:
    for a, b in zip(path, path[1:]):
        if abs(a[0] - b[0]) + abs(a[1] - b[1]) > 1:
            return False
    return all(grid.is_free(c) for c in path)


def plan_conflicts(paths):
    """Vertex and swap conflicts in a timed joint plan.

    Agents rest on their last cell forever after their path ends.
    """
    horizon = max(len(p) for p in paths) + 1

    def at(p, t):
        return tuple(p[min(t, len(p) - 1)])

    found = []
    n = len(paths)
    for t in range(horizon):
        for i in range(n):
            for j in range(i + 1, n):
                if at(paths[i], t) == at(paths[j], t):
                    found.append(("vertex", i, j, t))
                if t + 1 < horizon and at(paths[i], t) == at(paths[j], t + 1) and \
                        at(paths[j], t) == at(paths[i], t + 1) and at(paths[i], t) != at(paths[i], t + 1):
                    found.append(("swap", i, j, t))
    return found


def grid(rows):
    return GridMap.from_rows(rows)


# A passage leaving a room and ending against walls.
DEAD_END_ROWS = [
    "@@@@@@@@@",
    "@...@@@@@",
    "@.......@",
    "@...@@@@@",
    "@@@@@@@@@",
]

# A bent passage: bottom-left end (6, 2), top-right end (4, 4).
BENT_ROWS = [
    "@@@@@@@@@",
    "@@@@@@@@@",
    "@@@@@@@@@",
    "@@@@@...@",
    "@@......@",
    "@@.@@...@",
    "@@.@@@@@@",
    "@....@@@@",
    "@....@@@@",
    "@@@@@@@@@",
]

# Three passages meeting at a junction cell (2, 3).
T_JUNCTION_ROWS = [
    "@@@@@@@",
    "@@@@@@@",
    "@.....@",
    "@@@.@@@",
    "@@@.@@@",
    "@@@.@@@",
    "@@@@@@@",
]

# Two rooms joined by one 5-cell passage along row 2, columns 4..8.
TWO_ROOMS_ROWS = [
    "@@@@@@@@@@@@@",
    "@...@@@@@...@",
    "@...........@",
    "@...@@@@@...@",
    "@@@@@@@@@@@@@",
]


class TraceChecker:
    """Step callback that audits a running episode against the world rules.

    Counts occupancy violations, non-unit moves and "opposing pairs": two
    agents inside one two-ended corridor heading for different exits. An
    opposing pair is excused once either agent has been flagged deadlocked
    during its current visit to that corridor.
    """

    def __init__(self, world):
        self.prev = {a.id: a.position for a in world.agents}
        self.occupancy_violations = 0
        self.jumps = 0
        self.opposing = 0
        self.excused = 0
        self.arrivals = 0
        self.flagged = set()

    def __call__(self, world, events):
        topo = world.topology
        for ev in events:
            if "goal" in ev["flags"]:
                self.arrivals += 1
            if "deadlock" in ev["flags"]:
                cid = topo.corridor_of[tuple(ev["from"])]
                self.flagged.add((ev["agent"], int(cid)))
        cells = {}
        for a in world.agents:
            old = self.prev[a.id]
            if abs(a.position[0] - old[0]) + abs(a.position[1] - old[1]) > 1:
                self.jumps += 1
            self.prev[a.id] = a.position
            if not a.active:
                continue
            if world.grid.obstacles[a.position] or a.position in cells:
                self.occupancy_violations += 1
            cells[a.position] = a.id
            cid = int(topo.corridor_of[a.position])
            self.flagged = {(i, c) for i, c in self.flagged if i != a.id or c == cid}
        by_corridor = {}
        for a in world.agents:
            rec = a.corridor_record
            if a.active and rec is not None and topo.corridors[rec.corridor].two_ended:
                by_corridor.setdefault(rec.corridor, []).append(a)
        for cid, members in by_corridor.items():
            exits = {a.corridor_record.target for a in members}
            if len(exits) > 1:
                if any((a.id, cid) in self.flagged for a in members):
                    self.excused += 1
                else:
                    self.opposing += 1
