"""Static world geometry: GridMap, maze generation and movingai map I/O.

Coordinates are ``(row, col)`` with row 0 at the top, matching the text order
of movingai ``.map`` files.
"""

from __future__ import annotations

import io
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple

import numpy as np

from . import _kernels
from .errors import MapParseError, ParameterError

FREE_SYMBOLS = frozenset(".G")
OBSTACLE_SYMBOLS = frozenset("@OT")

Cell = tuple[int, int]

# Up, Right, Down, Left: the canonical neighbour order used everywhere.
NEIGHBOR_OFFSETS: tuple[Cell, ...] = ((-1, 0), (0, 1), (1, 0), (0, -1))


@dataclass(frozen=True, eq=False)
class GridMap:
    """Immutable occupancy grid; ``obstacles[r, c]`` is True for Obstacle cells."""

    obstacles: np.ndarray
    source: str = "inline"

    def __post_init__(self):
        obs = np.ascontiguousarray(self.obstacles, dtype=bool)
        if obs.ndim != 2 or obs.shape[0] < 1 or obs.shape[1] < 1:
            raise ParameterError(f"grid must be a non-empty 2D array, got shape {obs.shape}")
        obs.setflags(write=False)
        object.__setattr__(self, "obstacles", obs)

    @classmethod
    def from_rows(cls, rows: Iterable[str], source: str = "inline") -> "GridMap":
        """Build a map from strings where ``@`` (or ``#``) marks obstacles."""
        rows = list(rows)
        width = len(rows[0]) if rows else 0
        if any(len(r) != width for r in rows):
            raise ParameterError("all rows must have the same width")
        return cls(np.array([[ch in "@#OT" for ch in r] for r in rows], dtype=bool), source)

    @property
    def height(self) -> int:
        return self.obstacles.shape[0]

    @property
    def width(self) -> int:
        return self.obstacles.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.obstacles.shape

    @property
    def density(self) -> float:
        return float(self.obstacles.mean())

    @cached_property
    def free_u8(self) -> np.ndarray:
        free = np.ascontiguousarray(~self.obstacles, dtype=np.uint8)
        free.setflags(write=False)
        return free

    @cached_property
    def components(self) -> np.ndarray:
        """Component label per cell (-1 on obstacles)."""
        labels = _kernels.label_components(self.free_u8)
        labels.setflags(write=False)
        return labels

    def in_bounds(self, cell: Cell) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width

    def is_free(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and not self.obstacles[cell[0], cell[1]]

    def check_in_bounds(self, cell: Cell) -> None:
        if not self.in_bounds(cell):
            raise ParameterError(f"cell {cell} outside {self.height}x{self.width} map")

    def free_cells(self) -> np.ndarray:
        """(N, 2) array of free cells in row-major order."""
        return np.argwhere(~self.obstacles)

    def free_neighbors(self, cell: Cell) -> list[Cell]:
        r, c = cell
        out = []
        for dr, dc in NEIGHBOR_OFFSETS:
            n = (r + dr, c + dc)
            if self.is_free(n):
                out.append(n)
        return out

    def rows(self) -> list[str]:
        return ["".join("@" if o else "." for o in row) for row in self.obstacles]

    def __eq__(self, other):
        if not isinstance(other, GridMap):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.obstacles, other.obstacles))

    def __hash__(self):
        return hash((self.shape, self.obstacles.tobytes()))


class MazeParams(NamedTuple):
    size: int
    density: float
    corridor_length: int
    seed: int = 0


def _check_params(params: MazeParams) -> None:
    if not isinstance(params.size, (int, np.integer)) or params.size < 1:
        raise ParameterError(f"size must be an int >= 1, got {params.size!r}")
    if not 0.0 <= params.density <= 1.0:
        raise ParameterError(f"density must lie in [0, 1], got {params.density!r}")
    if not isinstance(params.corridor_length, (int, np.integer)) or params.corridor_length < 1:
        raise ParameterError(f"corridor_length must be an int >= 1, got {params.corridor_length!r}")
    if params.seed < 0:
        raise ParameterError("seed must be non-negative")


def segment_length_bounds(corridor_length: int) -> tuple[int, int]:
    lo = max(1, corridor_length // 2)
    hi = max(lo, (3 * corridor_length) // 2)
    return lo, hi


def generate_maze(params: MazeParams) -> GridMap:
    """Generate a square maze by placing straight wall segments.

    Segments have random orientation and a length drawn uniformly from
    ``[max(1, L/2), 3L/2]`` (capped at the map side) and always fit inside
    the grid. Placements that would split the free space are
    rejected, so the free cells always form a single 4-connected region.
    Generation stops at the target obstacle count or after ``50 * size**2``
    attempts. Output is a pure function of ``params``.
    """
    _check_params(params)
    size = int(params.size)
    source = f"maze(size={size},density={params.density},L={params.corridor_length},seed={params.seed})"
    target = int(round(params.density * size * size))
    if target >= size * size:
        return GridMap(np.ones((size, size), dtype=bool), source)
    free = np.ones((size, size), dtype=np.uint8)
    if target > 0:
        rng = np.random.default_rng(params.seed)
        budget = 50 * size * size
        lo, hi = segment_length_bounds(int(params.corridor_length))
        orient = rng.integers(0, 2, budget, dtype=np.int64)
        lengths = rng.integers(lo, hi + 1, budget, dtype=np.int64)
        lengths = np.minimum(lengths, size)
        # segments start where they fit inside the grid
        along = (rng.random(budget) * (size - lengths + 1)).astype(np.int64)
        across = rng.integers(0, size, budget, dtype=np.int64)
        rows = np.where(orient == 1, along, across)
        cols = np.where(orient == 1, across, along)
        _kernels.place_wall_segments(free, target, orient, lengths, rows, cols)
    return GridMap(free == 0, source)


def wall_segment_lengths(grid: GridMap) -> np.ndarray:
    """Lengths of straight wall segments in a one-cell-one-segment decomposition.

    Each obstacle cell is assigned to the longer of its horizontal and
    vertical obstacle runs (ties go horizontal); a segment is a maximal line
    of consecutive cells sharing an assignment.
    """
    obs = grid.obstacles
    h_run = _run_lengths(obs)
    v_run = _run_lengths(obs.T).T
    horizontal = obs & (h_run >= v_run)
    vertical = obs & ~horizontal
    lengths = [n for line in horizontal for n in _true_runs(line)]
    lengths += [n for line in vertical.T for n in _true_runs(line)]
    return np.array(lengths, dtype=int)


def _true_runs(line: np.ndarray) -> list[int]:
    padded = np.concatenate(([False], line, [False])).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return list(edges[1::2] - edges[0::2])


def _run_lengths(obs: np.ndarray) -> np.ndarray:
    """Per cell, the length of the horizontal obstacle run containing it."""
    out = np.zeros(obs.shape, dtype=int)
    for i, line in enumerate(obs):
        padded = np.concatenate(([False], line, [False])).astype(np.int8)
        edges = np.flatnonzero(np.diff(padded))
        for a, b in zip(edges[0::2], edges[1::2]):
            out[i, a:b] = b - a
    return out


def parse_movingai_map(data: bytes | str | io.IOBase, source: str = "movingai") -> GridMap:
    """Parse the movingai ``.map`` text format.

    ``.`` and ``G`` are free; ``@``, ``O`` and ``T`` are obstacles. Any other
    symbol, a malformed header or a row/width mismatch raises
    :class:`MapParseError` naming the 1-based line and column.
    """
    if hasattr(data, "read"):
        data = data.read()
    if isinstance(data, bytes):
        try:
            data = data.decode("ascii")
        except UnicodeDecodeError as exc:
            raise MapParseError(f"non-ASCII input ({exc.reason})") from None
    lines = data.splitlines()

    def header(idx: int, key: str) -> str:
        if idx >= len(lines):
            raise MapParseError(f"missing '{key}' header", line=idx + 1)
        parts = lines[idx].split()
        if not parts or parts[0].lower() != key:
            raise MapParseError(f"expected '{key}' header, got {lines[idx]!r}", line=idx + 1)
        if key == "map":
            if len(parts) != 1:
                raise MapParseError("'map' header takes no value", line=idx + 1)
            return ""
        if len(parts) != 2:
            raise MapParseError(f"'{key}' header needs exactly one value", line=idx + 1)
        return parts[1]

    header(0, "type")
    dims = {}
    for idx, key in ((1, "height"), (2, "width")):
        value = header(idx, key)
        try:
            dims[key] = int(value)
        except ValueError:
            raise MapParseError(f"{key} must be an integer, got {value!r}", line=idx + 1) from None
        if dims[key] < 1:
            raise MapParseError(f"{key} must be >= 1", line=idx + 1)
    header(3, "map")
    height, width = dims["height"], dims["width"]
    body = lines[4:]
    while len(body) > height and not body[-1].strip():
        body.pop()
    if len(body) != height:
        raise MapParseError(f"expected {height} map rows, found {len(body)}", line=4 + min(len(body), height) + 1)
    grid = np.zeros((height, width), dtype=bool)
    for r, row in enumerate(body):
        row = row.rstrip("\r")
        lineno = r + 5
        if len(row) != width:
            raise MapParseError(f"row has {len(row)} symbols, header says width {width}",
                                line=lineno, column=min(len(row), width) + 1)
        for c, ch in enumerate(row):
            if ch in OBSTACLE_SYMBOLS:
                grid[r, c] = True
            elif ch not in FREE_SYMBOLS:
                raise MapParseError(f"unknown map symbol {ch!r}", line=lineno, column=c + 1)
    return GridMap(grid, source)


def serialize_movingai_map(grid: GridMap, map_type: str = "octile") -> str:
    head = f"type {map_type}\nheight {grid.height}\nwidth {grid.width}\nmap\n"
    return head + "\n".join(grid.rows()) + "\n"


def load_map(path) -> GridMap:
    with open(path, "rb") as fh:
        return parse_movingai_map(fh.read(), source=str(path))


def connected(grid: GridMap, a: Cell, b: Cell) -> bool:
    """True iff a 4-connected path of free cells links ``a`` and ``b``."""
    grid.check_in_bounds(a)
    grid.check_in_bounds(b)
    labels = grid.components
    la = labels[a[0], a[1]]
    return bool(la >= 0 and la == labels[b[0], b[1]])


def bfs_reachable(grid: GridMap, start: Cell) -> set[Cell]:
    """All free cells reachable from ``start`` (empty if start is an obstacle)."""
    if not grid.is_free(start):
        return set()
    seen = {start}
    queue = deque([start])
    while queue:
        cell = queue.popleft()
        for n in grid.free_neighbors(cell):
            if n not in seen:
                seen.add(n)
                queue.append(n)
    return seen


def warehouse_map(
    shelf_columns: int = 14,
    shelf_rows: int = 30,
    shelf_length: int = 10,
    shelf_depth: int = 2,
    cross_aisle: int = 3,
    border: int = 4,
) -> GridMap:
    """A movingai-style warehouse: shelf bars separated by 1-wide aisles.

    The aisle between two vertically adjacent bars is a corridor of
    ``shelf_length`` cells whose ends open onto the cross aisles.
    """
    width = 2 * border + shelf_columns * shelf_length + (shelf_columns - 1) * cross_aisle
    height = 2 * border + shelf_rows * shelf_depth + (shelf_rows - 1)
    grid = np.zeros((height, width), dtype=bool)
    for i in range(shelf_rows):
        r0 = border + i * (shelf_depth + 1)
        for j in range(shelf_columns):
            c0 = border + j * (shelf_length + cross_aisle)
            grid[r0:r0 + shelf_depth, c0:c0 + shelf_length] = True
    return GridMap(grid, source=f"warehouse({shelf_columns}x{shelf_rows})")


BUNDLED_MAPS = {"warehouse": "warehouse-97x187.map"}


def bundled_map(name: str) -> GridMap:
    """A map shipped with the package (see ``BUNDLED_MAPS``)."""
    from importlib import resources

    try:
        fname = BUNDLED_MAPS[name]
    except KeyError:
        raise ParameterError(f"unknown bundled map {name!r}; choose from {sorted(BUNDLED_MAPS)}") from None
    data = resources.files("lmapf").joinpath("data").joinpath(fname).read_text()
    return parse_movingai_map(data, source=fname)
