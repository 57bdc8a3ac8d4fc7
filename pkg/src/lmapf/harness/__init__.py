"""Scenario files, sweeps and the command line."""

from .scenario import ScenarioFile, random_scenario, resolve_map
from .sweep import (PolicySpec, SweepSpec, evaluate_success, excluded, randomize_episode_params, run_sweep,
                    subset_success_centralized)

__all__ = [
    "ScenarioFile", "random_scenario", "resolve_map", "PolicySpec", "SweepSpec", "evaluate_success",
    "excluded", "randomize_episode_params", "run_sweep", "subset_success_centralized",
]
