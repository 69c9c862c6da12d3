"""Simulation of splitting trees, forests and Levy paths."""

from .forests import (
    ForestBatch,
    ForestSpec,
    SimulationError,
    resolve_ancestor,
    simulate_conditioned_trees,
    simulate_forest,
    simulate_forests,
    simulate_tree,
)
from .levy import LevyBatch, Rules, simulate_levy_batch, simulate_levy_path, simulate_levy_paths

__all__ = [
    "ForestBatch",
    "ForestSpec",
    "LevyBatch",
    "Rules",
    "SimulationError",
    "resolve_ancestor",
    "simulate_conditioned_trees",
    "simulate_forest",
    "simulate_forests",
    "simulate_levy_batch",
    "simulate_levy_path",
    "simulate_levy_paths",
    "simulate_tree",
]
