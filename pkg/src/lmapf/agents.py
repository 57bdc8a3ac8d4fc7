from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

Cell = tuple[int, int]


class CorridorRecord(NamedTuple):
    """Where an agent entered its current corridor and where it is heading.

    ``target`` is the endpoint the agent will exit through; ``None`` means
    "deeper into a dead-end".
    """

    corridor: int
    entry: Optional[Cell]
    target: Optional[Cell]


@dataclass(slots=True)
class AgentState:
    id: int
    position: Cell
    goal: Cell
    previous_position: Optional[Cell] = None
    active: bool = True
    corridor_record: Optional[CorridorRecord] = None
    goals_reached: int = 0
