"""Deterministic swarm simulator: hierarchical clustered networking with
fused routing/control messages and bio-inspired two-layer formation
control, plus Boids and flat link-state baselines."""

from .core import (ConfigError, Obstacle, SimParams, Vec2, formation_center,
                   formation_radius, parse_config, validate_config)
from .engine import (Scenario, World, obstacle_avoidance, run,
                     straight_sailing)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "Obstacle", "SimParams", "Vec2", "formation_center",
    "formation_radius", "parse_config", "validate_config",
    "Scenario", "World", "obstacle_avoidance", "run", "straight_sailing",
    "__version__",
]
