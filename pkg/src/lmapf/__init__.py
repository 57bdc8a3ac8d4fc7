"""Lifelong multi-agent path finding on 4-connected grids."""

from .agents import AgentState, CorridorRecord
from .corridors import Corridor, CorridorTopology, analyze, delta_at
from .errors import ContractError, LmapfError, MapParseError, ParameterError, PlacementError
from .grid import GridMap, MazeParams, bundled_map, generate_maze, load_map, parse_movingai_map
from .observation import Observation, ObsConfig, ObservationBuilder, build_observation
from .pathfinding import DistanceCache, ReservationTable, astar_path, distance_field, space_time_astar
from .policies import make_policies, make_policy, prioritized_plan
from .rules import Action, RewardConfig, valid_actions
from .simulator import EpisodeConfig, EpisodeMetrics, Mode, World, init_episode, run_episode, step

__version__ = "0.1.0"

__all__ = [
    "AgentState", "CorridorRecord", "Corridor", "CorridorTopology", "analyze", "delta_at",
    "ContractError", "LmapfError", "MapParseError", "ParameterError", "PlacementError",
    "GridMap", "MazeParams", "bundled_map", "generate_maze", "load_map", "parse_movingai_map",
    "Observation", "ObsConfig", "ObservationBuilder", "build_observation",
    "DistanceCache", "ReservationTable", "astar_path", "distance_field", "space_time_astar",
    "make_policies", "make_policy", "prioritized_plan", "Action", "RewardConfig", "valid_actions",
    "EpisodeConfig", "EpisodeMetrics", "Mode", "World", "init_episode", "run_episode", "step",
]
