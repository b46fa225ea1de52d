"""Step-by-step assembly execution with failure classification.

Each step merges the children of one non-leaf node at their world-frame
target poses.  A step fails as:

* ``pose_too_far``  — a moved component's provided target deviates from the
  ground-truth target beyond the translation/rotation thresholds;
* ``no_path``       — the motion planner finds no collision-free path;
* ``floating_part`` — the placed component ends up unattached (minimum
  point-to-point distance to the rest of the assembly above threshold).

Successful placements merge into one rigid assembly for later steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import Pose, PointCloud, geodesic_distance
from ..graph import HierarchicalAssemblyGraph, is_feasible_order
from .rrt import PlannerParams, StartGoalCollisionError, rrt_connect
from .world import World, min_distance

__all__ = ["ExecutionThresholds", "StepOutcome", "execute_assembly", "success_rate", "acr"]


@dataclass(frozen=True)
class ExecutionThresholds:
    max_translation_error: float = 0.05   # meters
    max_rotation_error: float = np.deg2rad(15.0)
    attachment_distance: float = 0.01     # meters


@dataclass
class StepOutcome:
    step_index: int
    status: str  # success | pose_too_far | no_path | floating_part
    moved: list[int] = field(default_factory=list)
    path: list[Pose] | None = None
    detail: str = ""

    @property
    def success(self) -> bool:
        return self.status == "success"

    def to_json(self) -> dict:
        return {
            "step_index": self.step_index,
            "status": self.status,
            "moved": list(self.moved),
            "path": [p.to_json() for p in self.path] if self.path else None,
            "detail": self.detail,
        }


def _component_parts(graph: HierarchicalAssemblyGraph, nid: int) -> frozenset[int]:
    return graph.nodes[nid].part_set


def _merged_cloud(clouds: dict[int, PointCloud], parts, targets: dict[int, Pose]) -> np.ndarray:
    """Component point cloud in the world frame, parts at their targets."""
    return np.vstack([targets[p].apply(clouds[p].points) for p in sorted(parts)])


def execute_assembly(
    graph: HierarchicalAssemblyGraph,
    order,
    targets: dict[int, Pose],
    ground_truth: dict[int, Pose],
    initial: dict[int, Pose],
    clouds: dict[int, PointCloud],
    world: World,
    params: PlannerParams = PlannerParams(),
    thresholds: ExecutionThresholds = ExecutionThresholds(),
) -> list[StepOutcome]:
    """Execute a feasible order step by step; stops at the first failure.

    ``targets``/``ground_truth``/``initial`` map part id -> world-frame pose.
    The first component of the first step is treated as the base and placed
    without planning; every later component is flown in from its initial
    pose by RRT-Connect through a world holding obstacles plus everything
    already placed.
    """
    sequence = order.sequence if hasattr(order, "sequence") else tuple(order)
    if not is_feasible_order(graph, sequence):
        raise ValueError(f"order {sequence} is not feasible for this graph")
    for p in graph.part_set:
        if p not in targets:
            raise KeyError(f"missing target pose for part {p}")

    outcomes: list[StepOutcome] = []
    assembled: set[int] = set()
    current_world = world

    for step_i, nid in enumerate(sequence):
        node = graph.nodes[nid]
        # children not yet part of the assembly are the movers this step;
        # ordered by their minimum part id for determinism
        child_sets = sorted(
            (tuple(sorted(_component_parts(graph, c))) for c in node.children),
            key=lambda s: s[0],
        )
        movers = [set(cs) for cs in child_sets if not set(cs) <= assembled]

        # (1) target sanity vs ground truth
        too_far = None
        for comp in movers:
            for p in sorted(comp):
                dt = float(np.linalg.norm(targets[p].t - ground_truth[p].t))
                dr = geodesic_distance(targets[p].rotation, ground_truth[p].rotation)
                if dt > thresholds.max_translation_error or dr > thresholds.max_rotation_error:
                    too_far = (p, dt, dr)
                    break
            if too_far:
                break
        if too_far:
            p, dt, dr = too_far
            outcomes.append(
                StepOutcome(
                    step_i,
                    "pose_too_far",
                    moved=sorted(set().union(*movers)),
                    detail=f"part {p}: translation error {dt:.3f} m, rotation error "
                    f"{np.rad2deg(dr):.1f} deg",
                )
            )
            return outcomes

        step_paths: list[Pose] = []
        newly_placed: list[set[int]] = []
        failed = None
        for k, comp in enumerate(movers):
            comp_sorted = sorted(comp)
            rep = comp_sorted[0]
            comp_cloud = PointCloud(
                np.vstack(
                    [
                        targets[rep].invert().compose(targets[p]).apply(clouds[p].points)
                        for p in comp_sorted
                    ]
                ),
                part=rep,
            )
            goal = targets[rep]
            if not assembled and k == 0:
                # base component: placed directly, no flight
                current_world = current_world.with_placed(rep, comp_cloud, goal)
                newly_placed.append(comp)
                assembled |= comp
                continue
            start = initial.get(rep, goal)
            try:
                path = rrt_connect(current_world, comp_cloud, start, goal, params)
            except StartGoalCollisionError as exc:
                failed = ("no_path", f"part {rep}: {exc}")
                break
            if path is None:
                failed = ("no_path", f"part {rep}: planner budget exhausted")
                break
            step_paths = path
            current_world = current_world.with_placed(rep, comp_cloud, goal)
            newly_placed.append(comp)
            assembled |= comp

        moved_all = sorted(set().union(*movers)) if movers else []
        if failed:
            outcomes.append(StepOutcome(step_i, failed[0], moved=moved_all, detail=failed[1]))
            return outcomes

        # (3) attachment: each newly placed component must touch the rest
        for comp in newly_placed:
            rest = assembled - comp
            if not rest:
                continue
            comp_pts = _merged_cloud(clouds, comp, targets)
            rest_pts = _merged_cloud(clouds, rest, targets)
            d = min_distance(comp_pts, rest_pts)
            if d > thresholds.attachment_distance:
                outcomes.append(
                    StepOutcome(
                        step_i,
                        "floating_part",
                        moved=moved_all,
                        detail=f"component {sorted(comp)} is {d:.3f} m from the assembly",
                    )
                )
                return outcomes

        outcomes.append(
            StepOutcome(step_i, "success", moved=moved_all, path=step_paths or [])
        )
    return outcomes


def success_rate(items: list[list[StepOutcome]]) -> float:
    """Fraction of items whose every step succeeded."""
    if not items:
        raise ValueError("success_rate requires at least one item")
    return sum(all(o.success for o in outcomes) for outcomes in items) / len(items)


def acr(trials: list[tuple[int, int]]) -> float:
    """Average completion rate: mean over trials of completed / total steps."""
    if not trials:
        raise ValueError("acr requires at least one trial")
    total = 0.0
    for completed, n_steps in trials:
        if n_steps <= 0:
            raise ValueError("total step count must be positive")
        if completed > n_steps or completed < 0:
            raise ValueError(f"completed steps {completed} out of range 0..{n_steps}")
        total += completed / n_steps
    return total / len(trials)
