"""Per-agent partial observations.

Channel order (``C = 8 + n_pred``)::

    0 obstacles        1 where blocked or outside the world
    1 agents           other active agents
    2 neighbor_goals   goals of visible agents, clamped onto the FOV border
    3 own_goal         own goal if inside the FOV
    4 path_length      own-goal distance / max finite distance in this FOV,
                       -1 on obstacles, unreachable and out-of-world cells
    5..                one map per predicted step of visible agents
    -3 delta_x         endpoint deltas inside the centred corridor window
    -2 delta_y
    -1 blocking        1 at endpoints another agent will leave through

The goal vector is ``(ux, uy, distance)`` with X = column and Y = up,
matching the corridor delta convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .agents import AgentState
from .corridors import CorridorTopology, exit_endpoint
from .errors import ParameterError
from .grid import GridMap
from .pathfinding import DistanceCache, DistanceField, descend

OBSTACLES, AGENTS, NEIGHBOR_GOALS, OWN_GOAL, PATH_LENGTH, FIRST_PREDICTION = range(6)


@dataclass(frozen=True)
class ObsConfig:
    fov: int = 11
    corridor_window: int = 5
    n_pred: int = 3

    def __post_init__(self):
        if self.fov % 2 == 0 or self.corridor_window % 2 == 0:
            raise ParameterError("fov and corridor_window must be odd")
        if self.fov < self.corridor_window:
            raise ParameterError("fov must be >= corridor_window")
        if self.n_pred < 1:
            raise ParameterError("n_pred must be >= 1")

    @property
    def n_channels(self) -> int:
        return 8 + self.n_pred

    @property
    def delta_x(self) -> int:
        return 5 + self.n_pred

    @property
    def delta_y(self) -> int:
        return 6 + self.n_pred

    @property
    def blocking(self) -> int:
        return 7 + self.n_pred

    @property
    def record_size(self) -> int:
        return self.n_channels * self.fov * self.fov + 3


@dataclass
class Observation:
    channels: np.ndarray  # (C, fov, fov) float32
    goal_vector: np.ndarray  # (3,) float64

    def to_record(self) -> list[float]:
        """Flat record: channel-major, row-major within a channel, then 3 scalars."""
        return self.channels.ravel().tolist() + self.goal_vector.tolist()

    @classmethod
    def from_record(cls, values: Sequence[float], config: ObsConfig = ObsConfig()) -> "Observation":
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (config.record_size,):
            raise ParameterError(f"record must have {config.record_size} values, got {values.size}")
        k = config.n_channels * config.fov * config.fov
        channels = values[:k].astype(np.float32).reshape(config.n_channels, config.fov, config.fov)
        return cls(channels, values[k:].copy())


def normalize_path_length(field: DistanceField, center, fov: int) -> np.ndarray:
    """Window of ``field`` centred on ``center``, scaled to [0, 1].

    Finite distances are divided by the largest finite distance in the
    window (or by 1 if that is 0); every other cell is -1.
    """
    p = fov // 2
    r, c = center
    h, w = field.distances.shape
    out = np.full((fov, fov), -1.0, dtype=np.float32)
    r0, r1 = max(0, r - p), min(h, r + p + 1)
    c0, c1 = max(0, c - p), min(w, c + p + 1)
    if r0 < r1 and c0 < c1:
        out[r0 - r + p:r1 - r + p, c0 - c + p:c1 - c + p] = field.distances[r0:r1, c0:c1]
    return _scale(out)


def _scale(window: np.ndarray) -> np.ndarray:
    finite = window >= 0
    top = window.max()
    if top > 0:
        window = np.where(finite, window / top, -1.0).astype(np.float32)
    return window


class Snapshot:
    """Per-step shared state: padded occupancy, exit counts, predictions."""

    def __init__(self, builder: "ObservationBuilder", agents: Sequence[AgentState]):
        p = builder.pad
        h, w = builder.grid.shape
        self.agents = agents
        self.occupancy = np.full((h + 2 * p, w + 2 * p), -1, dtype=np.int32)
        self.exit_counts = np.zeros((h + 2 * p, w + 2 * p), dtype=np.int32)
        self.exits: dict[int, tuple] = {}
        topo = builder.topology
        n_pred = builder.config.n_pred
        n = len(agents)
        self.goals = np.zeros((n, 2), dtype=np.int64)
        # predicted cells, shape (agent, step, 2)
        self.predictions = np.zeros((n, n_pred, 2), dtype=np.int64)
        for a in agents:
            if not a.active:
                continue
            r, c = a.position
            self.occupancy[r + p, c + p] = a.id
            self.goals[a.id] = a.goal
            rec = a.corridor_record
            if rec is not None:
                e = exit_endpoint(topo.corridors[rec.corridor], rec)
                if e is not None:
                    self.exit_counts[e[0] + p, e[1] + p] += 1
                    self.exits[a.id] = e
            f = builder.cache.get(a.goal)
            self.predictions[a.id] = descend(f.padded, a.position, n_pred, p)


class ObservationBuilder:
    """Builds observations for one static map; reuse it across steps."""

    def __init__(self, grid: GridMap, topology: CorridorTopology, config: ObsConfig = ObsConfig(),
                 cache: Optional[DistanceCache] = None):
        self.grid = grid
        self.topology = topology
        self.config = config
        self.pad = p = config.fov // 2
        if cache is None or cache.pad != p:
            cache = DistanceCache(grid, p)
        self.cache = cache
        self.obstacles = np.pad(grid.obstacles, p, constant_values=True).astype(np.float32)
        self.delta_x = np.pad(topology.delta_x, p).astype(np.float32)
        self.delta_y = np.pad(topology.delta_y, p).astype(np.float32)
        self.is_endpoint = np.pad(topology.is_endpoint, p)
        cw = config.corridor_window // 2
        self._cw = slice(p - cw, p + cw + 1)

    def snapshot(self, agents: Sequence[AgentState]) -> Snapshot:
        return Snapshot(self, agents)

    def build(self, snap: Snapshot, observer: int) -> Observation:
        cfg = self.config
        fov, p = cfg.fov, self.pad
        me = snap.agents[observer]
        if not me.active:
            raise ParameterError(f"agent {observer} is inactive")
        r, c = me.position
        gr, gc = me.goal
        win = (slice(r, r + fov), slice(c, c + fov))
        ch = np.zeros((cfg.n_channels, fov, fov), dtype=np.float32)
        ch[OBSTACLES] = self.obstacles[win]

        occ = snap.occupancy[win]
        mask = occ >= 0
        mask[p, p] = False
        ch[AGENTS][mask] = 1.0
        top = r - p
        left = c - p
        ids = occ[mask]
        if ids.size:
            g = snap.goals[ids]
            ch[NEIGHBOR_GOALS, (g[:, 0] - top).clip(0, fov - 1), (g[:, 1] - left).clip(0, fov - 1)] = 1.0
            pred = snap.predictions[ids]
            lr, lc = pred[..., 0] - top, pred[..., 1] - left
            i, t = np.nonzero((lr >= 0) & (lr < fov) & (lc >= 0) & (lc < fov))
            ch[FIRST_PREDICTION + t, lr[i, t], lc[i, t]] = 1.0
        if abs(gr - r) <= p and abs(gc - c) <= p:
            ch[OWN_GOAL, gr - top, gc - left] = 1.0

        field = self.cache.get(me.goal)
        ch[PATH_LENGTH] = _scale(field.padded[win].astype(np.float32))

        cw = self._cw
        ch[cfg.delta_x, cw, cw] = self.delta_x[win][cw, cw]
        ch[cfg.delta_y, cw, cw] = self.delta_y[win][cw, cw]
        counts = snap.exit_counts[win][cw, cw].copy()
        mine = snap.exits.get(observer)
        if mine is not None:
            lr, lc = mine[0] - top - cw.start, mine[1] - left - cw.start
            if 0 <= lr < counts.shape[0] and 0 <= lc < counts.shape[1]:
                counts[lr, lc] -= 1
        ch[cfg.blocking, cw, cw] = counts > 0

        dx, dy = gc - c, r - gr
        mag = float(np.hypot(dx, dy))
        if mag > 0:
            goal_vec = np.array([dx / mag, dy / mag, mag])
        else:
            goal_vec = np.zeros(3)
        return Observation(ch, goal_vec)


def build_observation(grid: GridMap, topology: CorridorTopology, agents: Sequence[AgentState],
                      observer: int, config: ObsConfig = ObsConfig(),
                      cache: Optional[DistanceCache] = None) -> Observation:
    """One-off observation; for repeated use keep an :class:`ObservationBuilder`."""
    agents = list(agents)
    if not 0 <= observer < len(agents) or agents[observer].id != observer:
        raise ParameterError(f"no agent with id {observer} at that index")
    builder = ObservationBuilder(grid, topology, config, cache)
    return builder.build(builder.snapshot(agents), observer)
