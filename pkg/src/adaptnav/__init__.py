"""Environment-adaptive task reconfiguration for simulated UAV navigation.

The flight loop couples a depth-camera complexity index, a constraint-bounded
frequency/resolution controller and a global EDF execution model so that
perception, planning, collision checking and change detection run only as
often as the surroundings require.
"""

from adaptnav.eci import EciComputer, EciReport, compute_eci
from adaptnav.loop import EpisodeMetrics, LoopConfig, run_episode, velocity_std
from adaptnav.mapping import OccupancyMap, update_map
from adaptnav.planning import NoPathError, Trajectory, collision_check, plan_trajectory
from adaptnav.policy import PolicyParams, heuristic_policy, load_checkpoint, save_checkpoint
from adaptnav.scenario import PRESETS, CameraModel, ScenarioError, World, generate_scenario, render_depth_frame
from adaptnav.scheduler import PLATFORMS, EdfEngine, PlatformModel, get_platform, simulate_edf
from adaptnav.strategy import FrequencyBounds, TaskConfig, feasible_bounds, project_config, select_resolution

__version__ = "0.1.0"

__all__ = [
    "PLATFORMS",
    "PRESETS",
    "CameraModel",
    "EciComputer",
    "EciReport",
    "EdfEngine",
    "EpisodeMetrics",
    "FrequencyBounds",
    "LoopConfig",
    "NoPathError",
    "OccupancyMap",
    "PlatformModel",
    "PolicyParams",
    "ScenarioError",
    "TaskConfig",
    "Trajectory",
    "World",
    "collision_check",
    "compute_eci",
    "feasible_bounds",
    "generate_scenario",
    "get_platform",
    "heuristic_policy",
    "load_checkpoint",
    "plan_trajectory",
    "project_config",
    "render_depth_frame",
    "run_episode",
    "save_checkpoint",
    "select_resolution",
    "simulate_edf",
    "update_map",
    "velocity_std",
]
