"""Corridor topology: 1-wide chains of free cells, their endpoints and deltas.

A corridor candidate is a free cell with at most two free 4-neighbours.
Corridors are the 4-connected components of candidate cells. Candidates have
degree <= 2 among themselves, so every corridor is a simple chain or a cycle.

Delta values use X = column (to the right) and Y = up, i.e.
``dX = col_other - col_this`` and ``dY = row_this - row_other``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from . import _kernels
from .agents import AgentState, CorridorRecord
from .errors import ParameterError
from .grid import NEIGHBOR_OFFSETS, Cell, GridMap


@dataclass(frozen=True)
class Corridor:
    id: int
    cells: tuple[Cell, ...]
    endpoints: tuple[Cell, ...]
    # decision points per endpoint, aligned with ``endpoints``
    decision_points: tuple[tuple[Cell, ...], ...]
    deltas: tuple[tuple[int, int], ...]
    dead_end: bool
    index: dict = field(repr=False, compare=False, hash=False, default_factory=dict)

    @property
    def enterable(self) -> bool:
        return bool(self.endpoints)

    @property
    def two_ended(self) -> bool:
        return len(self.endpoints) == 2

    def all_decision_points(self) -> tuple[Cell, ...]:
        return tuple(dp for dps in self.decision_points for dp in dps)


class CorridorTopology:
    """Immutable result of :func:`analyze`."""

    def __init__(self, grid: GridMap, corridor_of: np.ndarray, corridors: list[Corridor]):
        self.grid = grid
        self.corridor_of = corridor_of
        self.corridors = corridors
        self.endpoint_owner: dict[Cell, int] = {}
        self.delta_x = np.zeros(grid.shape, dtype=np.int32)
        self.delta_y = np.zeros(grid.shape, dtype=np.int32)
        self.is_endpoint = np.zeros(grid.shape, dtype=bool)
        for cor in corridors:
            for e, (dx, dy) in zip(cor.endpoints, cor.deltas):
                self.endpoint_owner[e] = cor.id
                self.is_endpoint[e] = True
                self.delta_x[e] = dx
                self.delta_y[e] = dy
        for arr in (self.corridor_of, self.delta_x, self.delta_y, self.is_endpoint):
            arr.setflags(write=False)

    def corridor_at(self, cell: Cell) -> Optional[Corridor]:
        cid = self.corridor_of[cell[0], cell[1]]
        return self.corridors[cid] if cid >= 0 else None

    def is_corridor_cell(self, cell: Cell) -> bool:
        return self.corridor_of[cell[0], cell[1]] >= 0

    @property
    def candidate_count(self) -> int:
        return int((self.corridor_of >= 0).sum())

    def to_json(self) -> dict:
        return {
            "height": self.grid.height,
            "width": self.grid.width,
            "corridors": [
                {
                    "id": c.id,
                    "cells": [list(x) for x in c.cells],
                    "endpoints": [list(x) for x in c.endpoints],
                    "decision_points": [[list(x) for x in dps] for dps in c.decision_points],
                    "deltas": [list(d) for d in c.deltas],
                    "dead_end": c.dead_end,
                    "enterable": c.enterable,
                }
                for c in self.corridors
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def candidate_mask(grid: GridMap) -> np.ndarray:
    """Free cells with at most two free 4-neighbours."""
    free = ~grid.obstacles
    padded = np.pad(free, 1, constant_values=False)
    degree = (
        padded[:-2, 1:-1].astype(np.int8)
        + padded[2:, 1:-1]
        + padded[1:-1, :-2]
        + padded[1:-1, 2:]
    )
    return free & (degree <= 2)


def _order_chain(cells: set[Cell], start: Cell) -> list[Cell]:
    order = [start]
    prev = None
    cur = start
    while True:
        nxt = None
        for dr, dc in NEIGHBOR_OFFSETS:
            n = (cur[0] + dr, cur[1] + dc)
            if n in cells and n != prev:
                nxt = n
                break
        if nxt is None or nxt == start:
            return order
        order.append(nxt)
        prev, cur = cur, nxt


def delta(this: Cell, other: Cell) -> tuple[int, int]:
    return other[1] - this[1], this[0] - other[0]


def analyze(grid: GridMap) -> CorridorTopology:
    cand = candidate_mask(grid)
    labels = _kernels.label_components(np.ascontiguousarray(cand, dtype=np.uint8))
    n = int(labels.max()) + 1 if labels.size else 0
    members: list[list[Cell]] = [[] for _ in range(n)]
    for r, c in np.argwhere(labels >= 0):
        members[labels[r, c]].append((int(r), int(c)))

    corridors = []
    for cid, cells in enumerate(members):
        cellset = set(cells)
        ends = []  # (cell, decision points)
        for cell in cells:
            dps = tuple(x for x in grid.free_neighbors(cell) if not cand[x])
            if dps:
                ends.append((cell, dps))
        if ends:
            order = _order_chain(cellset, ends[0][0])
        else:
            # chain sealed at both ends, or a cycle
            tips = [cl for cl in cells if sum(x in cellset for x in grid.free_neighbors(cl)) <= 1]
            order = _order_chain(cellset, min(tips) if tips else min(cells))
        if len(ends) == 2:
            # orient the chain from ends[0] to ends[1]
            if order[-1] != ends[1][0]:
                order = _order_chain(cellset, ends[1][0])[::-1]
            e0, e1 = ends
            deltas = (delta(e0[0], e1[0]), delta(e1[0], e0[0]))
            dead_end = False
        elif len(ends) == 1:
            deltas = ((0, 0),)
            # one endpoint: a dead-end unless it is a lone cell opening both ways
            dead_end = not (len(cells) == 1 and len(ends[0][1]) >= 2)
        else:
            deltas = ()
            dead_end = False
        corridors.append(
            Corridor(
                id=cid,
                cells=tuple(order),
                endpoints=tuple(e for e, _ in ends),
                decision_points=tuple(d for _, d in ends),
                deltas=deltas,
                dead_end=dead_end,
                index={cell: i for i, cell in enumerate(order)},
            )
        )
    return CorridorTopology(grid, labels, corridors)


def delta_at(topology: CorridorTopology, endpoint: Cell) -> tuple[int, int]:
    """Displacement from ``endpoint`` to the other endpoint of its corridor."""
    cid = topology.endpoint_owner.get(tuple(endpoint))
    if cid is None:
        raise ParameterError(f"{endpoint} is not a corridor endpoint")
    cor = topology.corridors[cid]
    return cor.deltas[cor.endpoints.index(tuple(endpoint))]


# -- heading bookkeeping --------------------------------------------------


def exit_endpoint(cor: Corridor, record: CorridorRecord) -> Optional[Cell]:
    """The endpoint an agent with ``record`` will leave ``cor`` through."""
    if not cor.endpoints:
        return None
    if not cor.two_ended:
        return cor.endpoints[0]
    return record.target


def forward_cell(cor: Corridor, record: CorridorRecord, position: Cell) -> Optional[Cell]:
    """Next cell along the agent's heading, or None where there is none."""
    if not cor.endpoints:
        return None
    i = cor.index[position]
    if record.target is None:
        return cor.cells[i + 1] if i + 1 < len(cor.cells) else None
    j = cor.index[record.target]
    if i == j:
        dps = cor.decision_points[cor.endpoints.index(record.target)]
        return dps[0] if len(dps) == 1 else None
    return cor.cells[i + (1 if j > i else -1)]


def keeps_heading(cor: Corridor, record: CorridorRecord, position: Cell, nxt: Cell) -> bool:
    """False iff moving position -> nxt reverses against the recorded heading."""
    if not cor.endpoints:
        return True
    i = cor.index[position]
    k = cor.index.get(nxt)
    if record.target is None:
        return k is not None and k > i
    j = cor.index[record.target]
    if k is None:
        return i == j
    return abs(k - j) < abs(i - j)


def record_on_entry(cor: Corridor, endpoint: Cell) -> CorridorRecord:
    if cor.two_ended:
        other = cor.endpoints[1] if cor.endpoints[0] == endpoint else cor.endpoints[0]
        return CorridorRecord(cor.id, endpoint, other)
    if cor.dead_end:
        return CorridorRecord(cor.id, endpoint, None)
    return CorridorRecord(cor.id, endpoint, endpoint)


def record_after_move(cor: Corridor, record: CorridorRecord, old: Cell, new: Cell) -> CorridorRecord:
    """Heading follows the direction of the last in-corridor move."""
    if not cor.endpoints or len(cor.cells) == 1:
        return record
    i, k = cor.index[old], cor.index[new]
    if cor.two_ended:
        target = cor.cells[-1] if k > i else cor.cells[0]
        entry = cor.cells[0] if target == cor.cells[-1] else cor.cells[-1]
        return CorridorRecord(cor.id, entry, target)
    return CorridorRecord(cor.id, record.entry, None if k > i else cor.endpoints[0])


def initial_record(cor: Corridor, position: Cell, distances: Optional[np.ndarray]) -> CorridorRecord:
    """Record for an agent placed inside ``cor``: head toward its goal."""
    if not cor.endpoints:
        return CorridorRecord(cor.id, None, None)
    if cor.two_ended:
        a, b = cor.endpoints
        da = int(distances[a]) if distances is not None else -1
        db = int(distances[b]) if distances is not None else -1
        if da >= 0 and (db < 0 or da < db):
            target = a
        elif db >= 0 and (da < 0 or db < da):
            target = b
        else:
            target = b if cor.index[position] >= len(cor.cells) // 2 else a
        return CorridorRecord(cor.id, b if target == a else a, target)
    e = cor.endpoints[0]
    if not cor.dead_end:
        return CorridorRecord(cor.id, e, e)
    terminal = cor.cells[-1]
    deeper = distances is not None and 0 <= distances[terminal] < distances[e]
    return CorridorRecord(cor.id, e, None if deeper else e)


# -- blocking --------------------------------------------------------------


def blocking(topology: CorridorTopology, agents: Iterable[AgentState], observer: int, endpoint: Cell) -> bool:
    """True iff another agent inside the corridor will exit through ``endpoint``."""
    endpoint = tuple(endpoint)
    cid = topology.endpoint_owner.get(endpoint)
    if cid is None:
        raise ParameterError(f"{endpoint} is not a corridor endpoint")
    cor = topology.corridors[cid]
    for a in agents:
        if a.id == observer or not a.active or a.corridor_record is None:
            continue
        if a.corridor_record.corridor == cid and exit_endpoint(cor, a.corridor_record) == endpoint:
            return True
    return False


def blocking_counts(topology: CorridorTopology, agents: Iterable[AgentState]) -> np.ndarray:
    """Per endpoint cell, the number of agents that will exit through it."""
    counts = np.zeros(topology.grid.shape, dtype=np.int32)
    for a in agents:
        rec = a.corridor_record
        if not a.active or rec is None:
            continue
        e = exit_endpoint(topology.corridors[rec.corridor], rec)
        if e is not None:
            counts[e] += 1
    return counts
