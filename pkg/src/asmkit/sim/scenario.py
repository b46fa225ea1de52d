"""Scenario files: a self-contained JSON description of one simulated
assembly problem (world, graph, poses, thresholds), plus a multi-trial
driver that perturbs initial poses per trial and reports success/ACR."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..geometry import PointCloud, Pose
from ..graph import HierarchicalAssemblyGraph, feasible_orders, parse_nested_list
from ..io import load_point_cloud
from .executor import ExecutionThresholds, StepOutcome, acr, execute_assembly, success_rate
from .rrt import PlannerParams
from .world import Box, World

__all__ = ["Scenario", "load_scenario", "run_trials", "TrialReport"]


@dataclass
class Scenario:
    graph: HierarchicalAssemblyGraph
    order: tuple[int, ...]
    clouds: dict[int, PointCloud]
    targets: dict[int, Pose]
    ground_truth: dict[int, Pose]
    initial: dict[int, Pose]
    world: World
    params: PlannerParams
    thresholds: ExecutionThresholds
    seed: int = 0
    initial_jitter: float = 0.0  # per-trial uniform translation perturbation


def _pose_map(obj: dict) -> dict[int, Pose]:
    return {int(k): Pose.from_json(v) for k, v in obj.items()}


def load_scenario(path) -> Scenario:
    path = Path(path)
    with open(path) as f:
        data = json.load(f)

    graph = parse_nested_list(
        data["tree"] if isinstance(data["tree"], str) else json.dumps(data["tree"]),
        equivalences=data.get("equivalences", []),
    )
    clouds: dict[int, PointCloud] = {}
    for key, spec in data["clouds"].items():
        pid = int(key)
        if isinstance(spec, str):
            clouds[pid] = load_point_cloud(path.parent / spec, part=pid)
        else:
            clouds[pid] = PointCloud(np.asarray(spec, dtype=float), pid)

    targets = _pose_map(data["targets"])
    ground_truth = _pose_map(data.get("ground_truth", data["targets"]))
    initial = _pose_map(data.get("initial", {}))

    world = World(
        obstacles=[
            PointCloud(np.asarray(o, dtype=float)) for o in data.get("obstacle_clouds", [])
        ],
        boxes=[Box(tuple(b["lo"]), tuple(b["hi"])) for b in data.get("boxes", [])],
        clearance=data.get("clearance", 0.005),
    )
    params = PlannerParams(**data.get("planner", {}))
    thresholds = ExecutionThresholds(**data.get("thresholds", {}))

    if "order" in data:
        order = tuple(data["order"])
    else:
        orders, _ = feasible_orders(graph, limit=1)
        order = orders[0].sequence

    return Scenario(
        graph=graph,
        order=order,
        clouds=clouds,
        targets=targets,
        ground_truth=ground_truth,
        initial=initial,
        world=world,
        params=params,
        thresholds=thresholds,
        seed=data.get("seed", 0),
        initial_jitter=data.get("initial_jitter", 0.0),
    )


@dataclass
class TrialReport:
    outcomes: list[list[StepOutcome]] = field(default_factory=list)

    @property
    def success_rate(self) -> float:
        return success_rate(self.outcomes)

    @property
    def acr(self) -> float:
        trials = [
            (sum(o.success for o in steps), total)
            for steps, total in ((s, self._total_steps) for s in self.outcomes)
        ]
        return acr(trials)

    _total_steps: int = 0

    def to_json(self) -> dict:
        return {
            "trials": [[o.to_json() for o in steps] for steps in self.outcomes],
            "success_rate": self.success_rate,
            "acr": self.acr,
            "total_steps": self._total_steps,
        }


def run_trials(scenario: Scenario, trials: int = 1) -> TrialReport:
    """Run repeated executions, perturbing initial poses per trial."""
    rng = np.random.default_rng(scenario.seed)
    report = TrialReport()
    report._total_steps = len(scenario.order)
    for _ in range(trials):
        initial = dict(scenario.initial)
        if scenario.initial_jitter > 0:
            jittered = {}
            for pid, pose in initial.items():
                delta = rng.uniform(-scenario.initial_jitter, scenario.initial_jitter, size=3)
                jittered[pid] = Pose(pose.q, pose.t + delta)
            initial = jittered
        outcomes = execute_assembly(
            scenario.graph,
            scenario.order,
            scenario.targets,
            scenario.ground_truth,
            initial,
            scenario.clouds,
            scenario.world,
            scenario.params,
            scenario.thresholds,
        )
        report.outcomes.append(outcomes)
    return report
