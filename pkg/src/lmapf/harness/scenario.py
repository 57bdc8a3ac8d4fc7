"""JSON scenario files: a map, agent starts and goals, and run settings."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import ParameterError
from ..grid import GridMap, MazeParams, bundled_map, generate_maze, load_map
from ..simulator import EpisodeConfig, Mode, World, default_horizon, init_episode, world_from_scenario

# map spec forms:
#   {"rows": ["..@.", ...]}          inline, movingai symbols
#   {"path": "maps/x.map"}           movingai file, relative to the scenario
#   {"bundled": "warehouse"}         shipped with the package
#   {"maze": {"size": 40, "density": 0.3, "corridor_length": 10, "seed": 0}}


def resolve_map(spec: dict, base: Optional[Path] = None) -> GridMap:
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ParameterError("map spec must have exactly one of rows, path, bundled, maze")
    (kind, value), = spec.items()
    if kind == "rows":
        return GridMap.from_rows(value)
    if kind == "path":
        p = Path(value)
        if base is not None and not p.is_absolute():
            p = base / p
        return load_map(p)
    if kind == "bundled":
        return bundled_map(value)
    if kind == "maze":
        return generate_maze(MazeParams(**value))
    raise ParameterError(f"unknown map spec kind {kind!r}")


@dataclass
class ScenarioFile:
    map: dict
    starts: list
    goals: list
    mode: str = Mode.LIFELONG.value
    horizon: Optional[int] = None
    seed: int = 0
    policy: dict = field(default_factory=lambda: {"name": "convention"})
    conventions: bool = True
    strict: bool = True
    min_goal_distance: float = 2.0

    def __post_init__(self):
        Mode(self.mode)
        if len(self.starts) != len(self.goals):
            raise ParameterError("starts and goals differ in length")
        self.starts = [[int(x) for x in s] for s in self.starts]
        self.goals = [[int(x) for x in g] for g in self.goals]
        if "name" not in self.policy:
            raise ParameterError("policy spec needs a name")

    @property
    def n_agents(self) -> int:
        return len(self.starts)

    def episode_config(self, grid: GridMap, record: bool = False) -> EpisodeConfig:
        horizon = self.horizon or default_horizon(Mode(self.mode), max(grid.shape))
        return EpisodeConfig(mode=Mode(self.mode), max_timesteps=horizon, min_goal_distance=self.min_goal_distance,
                             strict=self.strict, seed=self.seed, conventions=self.conventions, record=record)

    def build(self, base: Optional[Path] = None, record: bool = False) -> World:
        """Resolve the map and check starts and goals against it."""
        grid = resolve_map(self.map, base)
        starts = [tuple(s) for s in self.starts]
        goals = [tuple(g) for g in self.goals]
        if len(set(starts)) != len(starts):
            raise ParameterError("starts must be distinct")
        for i, (s, g) in enumerate(zip(starts, goals)):
            for cell in (s, g):
                if not (0 <= cell[0] < grid.height and 0 <= cell[1] < grid.width):
                    raise ParameterError(f"agent {i}: {cell} lies outside the {grid.height}x{grid.width} map")
        return world_from_scenario(grid, starts, goals, self.episode_config(grid, record),
                                   rng=np.random.default_rng(self.seed))

    def to_json(self) -> dict:
        return asdict(self)

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    @classmethod
    def from_json(cls, data: dict) -> "ScenarioFile":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ParameterError(f"unknown scenario fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ScenarioFile":
        return cls.from_json(json.loads(Path(path).read_text()))


def random_scenario(map_spec: dict, n_agents: int, seed: int = 0, mode: str = "lifelong",
                    min_goal_distance: float = 2.0, policy: Optional[dict] = None,
                    horizon: Optional[int] = None) -> ScenarioFile:
    grid = resolve_map(map_spec)
    cfg = EpisodeConfig(mode=Mode(mode), min_goal_distance=min_goal_distance, seed=seed)
    world = init_episode(grid, None, n_agents, cfg)
    return ScenarioFile(
        map=map_spec,
        starts=[list(a.position) for a in world.agents],
        goals=[list(a.goal) for a in world.agents],
        mode=mode,
        horizon=horizon,
        seed=seed,
        policy=policy or {"name": "convention"},
        min_goal_distance=min_goal_distance,
    )
