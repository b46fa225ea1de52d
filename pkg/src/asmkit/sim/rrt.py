"""RRT-Connect motion planning for a free-flying rigid component in SE(3).

Configuration distance blends translation and rotation:
d = |t1 - t2| + w_rot * geodesic(R1, R2).  Edges interpolate translation
linearly and rotation by slerp, and are collision-checked at a fixed
resolution along that blend.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import Pose, geodesic_distance, quat_slerp
from .world import World, collides

__all__ = [
    "PlannerParams",
    "PlanningError",
    "StartGoalCollisionError",
    "se3_distance",
    "interpolate_pose",
    "edge_is_free",
    "validate_path",
    "rrt_connect",
]

_REACHED, _ADVANCED, _TRAPPED = 0, 1, 2


class PlanningError(RuntimeError):
    pass


class StartGoalCollisionError(PlanningError):
    """Start or goal configuration is already in collision."""


@dataclass(frozen=True)
class PlannerParams:
    step_size: float = 0.1
    w_rot: float = 0.3
    max_iterations: int = 50_000
    goal_bias: float = 0.05
    seed: int = 0
    edge_resolution: float = 0.02
    sample_margin: float = 0.5
    shortcut_rounds: int = 30

    def __post_init__(self):
        if self.step_size <= 0 or self.edge_resolution <= 0 or self.max_iterations <= 0:
            raise ValueError("planner parameters must be positive")


def se3_distance(a: Pose, b: Pose, w_rot: float = 0.3) -> float:
    return float(np.linalg.norm(a.t - b.t)) + w_rot * geodesic_distance(a.rotation, b.rotation)


def interpolate_pose(a: Pose, b: Pose, alpha: float) -> Pose:
    t = (1 - alpha) * a.t + alpha * b.t
    return Pose(quat_slerp(a.q, b.q, alpha), t)


def edge_is_free(world: World, cloud, a: Pose, b: Pose, params: PlannerParams,
                 resolution: float | None = None) -> bool:
    res = resolution if resolution is not None else params.edge_resolution
    dist = se3_distance(a, b, params.w_rot)
    n = max(1, int(np.ceil(dist / res)))
    for i in range(1, n + 1):
        if collides(world, cloud, interpolate_pose(a, b, i / n)):
            return False
    return True


def validate_path(world: World, cloud, path: list[Pose], params: PlannerParams,
                  resolution_factor: float = 1.0) -> bool:
    """Re-check a whole path at (edge_resolution / resolution_factor)."""
    res = params.edge_resolution / resolution_factor
    if collides(world, cloud, path[0]):
        return False
    for a, b in zip(path, path[1:]):
        if not edge_is_free(world, cloud, a, b, params, resolution=res):
            return False
    return True


class _Tree:
    def __init__(self, root: Pose):
        self.poses: list[Pose] = [root]
        self.parents: list[int] = [-1]
        self._t = np.asarray(root.t, dtype=float).reshape(1, 3)

    def nearest(self, q: Pose, w_rot: float) -> int:
        # translation distance prunes candidates before the exact blend
        d_t = np.linalg.norm(self._t - q.t, axis=1)
        best, best_d = 0, np.inf
        order = np.argsort(d_t)
        for idx in order:
            if d_t[idx] >= best_d:
                break
            d = se3_distance(self.poses[idx], q, w_rot)
            if d < best_d:
                best, best_d = int(idx), d
        return best

    def add(self, pose: Pose, parent: int) -> int:
        self.poses.append(pose)
        self.parents.append(parent)
        self._t = np.vstack([self._t, pose.t])
        return len(self.poses) - 1

    def path_to_root(self, idx: int) -> list[Pose]:
        out = []
        while idx >= 0:
            out.append(self.poses[idx])
            idx = self.parents[idx]
        return out


def _steer(from_pose: Pose, to_pose: Pose, step: float, w_rot: float) -> tuple[Pose, bool]:
    d = se3_distance(from_pose, to_pose, w_rot)
    if d <= step:
        return to_pose, True
    return interpolate_pose(from_pose, to_pose, step / d), False


def _extend(tree: _Tree, q: Pose, world, cloud, params: PlannerParams):
    near_idx = tree.nearest(q, params.w_rot)
    new_pose, reached = _steer(tree.poses[near_idx], q, params.step_size, params.w_rot)
    if edge_is_free(world, cloud, tree.poses[near_idx], new_pose, params):
        new_idx = tree.add(new_pose, near_idx)
        return (_REACHED if reached else _ADVANCED), new_idx
    return _TRAPPED, -1


def _connect(tree: _Tree, q: Pose, world, cloud, params: PlannerParams):
    status = _ADVANCED
    idx = -1
    while status == _ADVANCED:
        status, idx = _extend(tree, q, world, cloud, params)
    return status, idx


def _random_pose(rng: np.random.Generator, lo: np.ndarray, hi: np.ndarray) -> Pose:
    t = rng.uniform(lo, hi)
    q = rng.normal(size=4)
    q = q / np.linalg.norm(q)
    return Pose(q, t)


def _shortcut(path: list[Pose], world, cloud, params: PlannerParams,
              rng: np.random.Generator) -> list[Pose]:
    path = list(path)
    for _ in range(params.shortcut_rounds):
        if len(path) <= 2:
            break
        i = int(rng.integers(0, len(path) - 2))
        j = int(rng.integers(i + 2, len(path)))
        if edge_is_free(world, cloud, path[i], path[j], params):
            path = path[: i + 1] + path[j:]
    return path


def rrt_connect(world: World, cloud, start: Pose, goal: Pose,
                params: PlannerParams = PlannerParams(), smooth: bool = True) -> list[Pose] | None:
    """Plan a collision-free SE(3) path from start to goal.

    Returns the path (start..goal inclusive) or None when the iteration
    budget is exhausted.  Deterministic for a fixed seed.  Every returned
    path is re-validated at 10x edge resolution; if a candidate fails (a
    coarse edge check can skip past a thin obstacle), planning restarts
    from a seed derived from the original, so the guarantee costs nothing
    on the common path.
    """
    if collides(world, cloud, start):
        raise StartGoalCollisionError("start pose is in collision")
    if collides(world, cloud, goal):
        raise StartGoalCollisionError("goal pose is in collision")

    for attempt in range(5):
        seed = params.seed + 7919 * attempt
        path = _plan_once(world, cloud, start, goal, params, smooth, seed)
        if path is None:
            return None
        if validate_path(world, cloud, path, params, resolution_factor=10.0):
            return path
    return None


def _plan_once(world: World, cloud, start: Pose, goal: Pose, params: PlannerParams,
               smooth: bool, seed: int) -> list[Pose] | None:
    rng = np.random.default_rng(seed)
    lo = np.minimum(start.t, goal.t) - params.sample_margin
    hi = np.maximum(start.t, goal.t) + params.sample_margin

    tree_a, tree_b = _Tree(start), _Tree(goal)
    a_is_start = True

    for _ in range(params.max_iterations):
        if rng.random() < params.goal_bias:
            q_rand = tree_b.poses[0]
        else:
            q_rand = _random_pose(rng, lo, hi)
        status, new_idx = _extend(tree_a, q_rand, world, cloud, params)
        if status != _TRAPPED:
            target = tree_a.poses[new_idx]
            c_status, c_idx = _connect(tree_b, target, world, cloud, params)
            if c_status == _REACHED:
                part_a = tree_a.path_to_root(new_idx)[::-1]
                part_b = tree_b.path_to_root(c_idx)
                # both segments meet at the connect configuration; drop the dup
                if a_is_start:
                    path = part_a + part_b[1:]
                else:
                    path = part_b[::-1] + part_a[::-1][1:]
                if smooth:
                    path = _shortcut(path, world, cloud, params, rng)
                return path
        tree_a, tree_b = tree_b, tree_a
        a_is_start = not a_is_start
    return None
