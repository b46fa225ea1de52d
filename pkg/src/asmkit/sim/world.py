"""Collision world: point-cloud obstacles with a clearance radius, plus
axis-aligned boxes for table/ground geometry."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from ..geometry import PointCloud, Pose

__all__ = ["Box", "World", "collides", "min_distance"]


@dataclass(frozen=True)
class Box:
    """Axis-aligned box obstacle, corner-to-corner in meters."""

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def contains(self, points: np.ndarray, margin: float = 0.0) -> np.ndarray:
        lo = np.asarray(self.lo) - margin
        hi = np.asarray(self.hi) + margin
        return np.all((points >= lo) & (points <= hi), axis=1)


@dataclass
class World:
    obstacles: list[PointCloud] = field(default_factory=list)
    boxes: list[Box] = field(default_factory=list)
    placed: dict[int, tuple[PointCloud, Pose]] = field(default_factory=dict)
    clearance: float = 0.005

    def __post_init__(self):
        if self.clearance <= 0:
            raise ValueError("clearance must be positive")
        self._tree = None
        self._tree_key = None

    def static_points(self) -> np.ndarray:
        """All obstacle and placed-component points in the world frame."""
        arrays = [o.points for o in self.obstacles]
        arrays += [pose.apply(cloud.points) for cloud, pose in self.placed.values()]
        if not arrays:
            return np.zeros((0, 3))
        return np.vstack(arrays)

    def _kdtree(self):
        key = (len(self.obstacles), tuple(sorted(self.placed)))
        if self._tree is None or self._tree_key != key:
            pts = self.static_points()
            self._tree = cKDTree(pts) if len(pts) else None
            self._tree_key = key
        return self._tree

    def with_placed(self, part: int, cloud: PointCloud, pose: Pose) -> "World":
        """Copy-on-place: previously placed poses are immutable."""
        placed = dict(self.placed)
        placed[part] = (cloud, pose)
        return World(
            obstacles=self.obstacles, boxes=self.boxes, placed=placed, clearance=self.clearance
        )

    def without(self, parts) -> "World":
        placed = {k: v for k, v in self.placed.items() if k not in set(parts)}
        return World(
            obstacles=self.obstacles, boxes=self.boxes, placed=placed, clearance=self.clearance
        )


def collides(world: World, cloud, pose: Pose) -> bool:
    """True iff any posed point is within clearance of a world point or
    inside a (clearance-inflated) box obstacle."""
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=float)
    pts = pose.apply(pts)
    for box in world.boxes:
        if np.any(box.contains(pts, margin=world.clearance)):
            return True
    tree = world._kdtree()
    if tree is not None:
        d, _ = tree.query(pts, k=1)
        if np.min(d) <= world.clearance:
            return True
    return False


def min_distance(points_a: np.ndarray, points_b: np.ndarray) -> float:
    """Minimum point-to-point distance between two point sets."""
    if len(points_a) == 0 or len(points_b) == 0:
        return float("inf")
    d, _ = cKDTree(points_b).query(points_a, k=1)
    return float(np.min(d))
