"""Object-centric assembly simulation: collision checking, RRT-Connect
motion planning for free-flying components, heuristic grasping, and
step-outcome / completion-rate reporting."""

from .world import Box, World, collides, min_distance
from .rrt import PlannerParams, PlanningError, StartGoalCollisionError, rrt_connect, interpolate_pose, se3_distance
from .grasp import GraspSpec, heuristic_grasp
from .executor import StepOutcome, ExecutionThresholds, execute_assembly, success_rate, acr

__all__ = [
    "Box",
    "World",
    "collides",
    "min_distance",
    "PlannerParams",
    "PlanningError",
    "StartGoalCollisionError",
    "rrt_connect",
    "interpolate_pose",
    "se3_distance",
    "GraspSpec",
    "heuristic_grasp",
    "StepOutcome",
    "ExecutionThresholds",
    "execute_assembly",
    "success_rate",
    "acr",
]
