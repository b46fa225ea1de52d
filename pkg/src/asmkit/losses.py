"""Pose-supervision objectives: per-term losses, weighted total, and the
permutation-min variant that treats equivalent parts as interchangeable.

These are pure reference functions over externally produced predictions;
no gradients are involved.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose, chamfer_distance, geodesic_distance, rmse_translation
from .graph import equivalence_classes

__all__ = [
    "LossWeights",
    "StepPrediction",
    "LossBreakdown",
    "PermutationCapExceeded",
    "rot_geodesic_loss",
    "translation_loss",
    "pointcloud_mse_loss",
    "equiv_repulsion_loss",
    "total_loss",
    "permutation_min_loss",
]

DEFAULT_PERMUTATION_CAP = 10_080


class PermutationCapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class LossWeights:
    """Weights for (rotation, translation, chamfer, pointcloud, equivalence)."""

    rot: float = 1.0
    trans: float = 1.0
    chamfer: float = 1.0
    pc: float = 20.0
    equiv: float = 0.1

    def __post_init__(self):
        for name in ("rot", "trans", "chamfer", "pc", "equiv"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"weight {name} must be finite and non-negative, got {v}")

    @staticmethod
    def from_string(text: str) -> "LossWeights":
        values = [float(v) for v in text.split(",")]
        if len(values) != 5:
            raise ValueError("expected 5 comma-separated weights")
        return LossWeights(*values)


@dataclass
class StepPrediction:
    """Predicted vs ground-truth poses for one assembly step's components."""

    pred: dict[int, Pose]
    gt: dict[int, Pose]
    clouds: dict[int, np.ndarray]
    equivalences: list = field(default_factory=list)

    def __post_init__(self):
        keys = set(self.pred)
        if set(self.gt) != keys or set(self.clouds) != keys:
            raise ValueError("pred/gt/cloud keys must coincide")
        self.clouds = {k: np.asarray(v, dtype=float) for k, v in self.clouds.items()}

    def classes(self):
        return equivalence_classes(self.equivalences, parts=self.pred.keys())


@dataclass
class LossBreakdown:
    total: float
    rot: float
    trans: float
    chamfer: float
    pc: float
    equiv: float
    per_component: dict[int, dict[str, float]]
    sums: dict[str, float]

    def to_json(self) -> dict:
        return {
            "total": self.total,
            "mean_terms": {
                "rot": self.rot,
                "trans": self.trans,
                "chamfer": self.chamfer,
                "pc": self.pc,
                "equiv": self.equiv,
            },
            "sum_terms": self.sums,
            "per_component": self.per_component,
        }


def rot_geodesic_loss(r: np.ndarray, r_hat: np.ndarray) -> float:
    return geodesic_distance(r, r_hat)


def translation_loss(t, t_hat, squared: bool = False) -> float:
    """Euclidean distance between translations (squared variant optional)."""
    d = rmse_translation(t, t_hat)
    return d * d if squared else d


def pointcloud_mse_loss(r: np.ndarray, r_hat: np.ndarray, cloud) -> float:
    """Mean per-point distance between the two rotated copies of the cloud."""
    pts = np.asarray(cloud, dtype=float)
    if len(pts) == 0:
        raise ValueError("pointcloud_mse_loss requires a non-empty cloud")
    diff = pts @ np.asarray(r).T - pts @ np.asarray(r_hat).T
    return float(np.mean(np.linalg.norm(diff, axis=1)))


def equiv_repulsion_loss(prediction: StepPrediction) -> float:
    """Negated sum of chamfer distances between predicted placements of
    equivalent parts; pushes interchangeable parts apart.  <= 0 always."""
    total = 0.0
    for cls in prediction.classes():
        for j1, j2 in itertools.combinations(sorted(cls), 2):
            p1 = prediction.pred[j1].apply(prediction.clouds[j1])
            p2 = prediction.pred[j2].apply(prediction.clouds[j2])
            total += chamfer_distance(p1, p2)
    return -total


def _component_terms(prediction: StepPrediction, gt: dict[int, Pose]):
    per_component: dict[int, dict[str, float]] = {}
    for key in sorted(prediction.pred):
        pred_pose = prediction.pred[key]
        gt_pose = gt[key]
        cloud = prediction.clouds[key]
        per_component[key] = {
            "rot": rot_geodesic_loss(gt_pose.rotation, pred_pose.rotation),
            "trans": translation_loss(gt_pose.t, pred_pose.t),
            "chamfer": chamfer_distance(gt_pose.apply(cloud), pred_pose.apply(cloud)),
            "pc": pointcloud_mse_loss(gt_pose.rotation, pred_pose.rotation, cloud),
        }
    return per_component


def total_loss(
    prediction: StepPrediction,
    weights: LossWeights = LossWeights(),
    gt_override: dict[int, Pose] | None = None,
) -> LossBreakdown:
    """Weighted sum of the five terms.

    The four per-component terms are averaged over components so the loss
    magnitude is part-count invariant; plain sums are also exposed in the
    breakdown.
    """
    gt = gt_override if gt_override is not None else prediction.gt
    per_component = _component_terms(prediction, gt)
    n = len(per_component)
    means = {
        term: sum(c[term] for c in per_component.values()) / n
        for term in ("rot", "trans", "chamfer", "pc")
    }
    sums = {term: sum(c[term] for c in per_component.values()) for term in means}
    equiv = equiv_repulsion_loss(prediction)
    sums["equiv"] = equiv
    total = (
        weights.rot * means["rot"]
        + weights.trans * means["trans"]
        + weights.chamfer * means["chamfer"]
        + weights.pc * means["pc"]
        + weights.equiv * equiv
    )
    return LossBreakdown(
        total=float(total),
        rot=means["rot"],
        trans=means["trans"],
        chamfer=means["chamfer"],
        pc=means["pc"],
        equiv=equiv,
        per_component=per_component,
        sums=sums,
    )


def permutation_min_loss(
    prediction: StepPrediction,
    weights: LossWeights = LossWeights(),
    cap: int = DEFAULT_PERMUTATION_CAP,
):
    """Minimum total loss over all reassignments of ground-truth poses within
    each equivalence class.

    Returns (breakdown, assignment) where assignment maps component -> the
    component whose ground-truth pose it was scored against.  Ties go to the
    lexicographically smallest assignment, so identity wins when equal.
    """
    classes = prediction.classes()
    n_perms = 1
    for cls in classes:
        n_perms *= math.factorial(len(cls))
    if n_perms > cap:
        raise PermutationCapExceeded(f"{n_perms} permutations exceed cap {cap}")

    ordered = [sorted(c) for c in classes]
    perm_sets = [list(itertools.permutations(c)) for c in ordered]
    best = None
    best_assignment = None
    for combo in itertools.product(*perm_sets):
        assignment = {k: k for k in prediction.pred}
        for src, dst in zip(ordered, combo):
            for s, d in zip(src, dst):
                assignment[s] = d
        gt = {k: prediction.gt[assignment[k]] for k in prediction.pred}
        breakdown = total_loss(prediction, weights, gt_override=gt)
        key = (breakdown.total, tuple(sorted(assignment.items())))
        if best is None or key < best[0]:
            best = (key, breakdown)
            best_assignment = assignment
    return best[1], best_assignment
