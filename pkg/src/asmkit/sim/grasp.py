"""Heuristic grasp-pose generation for structured assembly components.

Components are classified by their PCA extents: elongated ("stick") parts
are grasped top-down at the centroid with the gripper axis perpendicular to
the long axis; flat thin ("board") parts are grasped along the thin boundary
a fixed offset below the top surface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import Pose, pca_canonicalize

__all__ = ["GraspSpec", "heuristic_grasp"]

STICK_RATIO = 3.0       # longest/middle extent at or above this => stick
FLAT_RATIO = 0.2        # shortest/middle extent at or below this => flat_thin
EDGE_OFFSET = 0.03      # grasp depth below the top surface for boards, meters


@dataclass(frozen=True)
class GraspSpec:
    grasp_pose: Pose
    strategy: str  # "stick" | "flat_thin"
    contact_point: np.ndarray


def _extents(points: np.ndarray) -> np.ndarray:
    return points.max(axis=0) - points.min(axis=0)


def _top_down_pose(contact: np.ndarray, gripper_axis: np.ndarray) -> Pose:
    """Gripper frame: z approaches downward, x along the closing axis."""
    z = np.array([0.0, 0.0, -1.0])
    x = gripper_axis - np.dot(gripper_axis, z) * z
    if np.linalg.norm(x) < 1e-9:
        x = np.array([1.0, 0.0, 0.0])
    x = x / np.linalg.norm(x)
    y = np.cross(z, x)
    rot = np.column_stack([x, y, z])
    return Pose.from_rt(rot, contact)


def heuristic_grasp(cloud, pose: Pose,
                    stick_ratio: float = STICK_RATIO,
                    flat_ratio: float = FLAT_RATIO,
                    edge_offset: float = EDGE_OFFSET) -> GraspSpec:
    """Pick a grasp for a component currently placed at ``pose``.

    Shape classification uses PCA extents of the posed cloud.  The stick
    rule is the default when neither ratio threshold is met.
    """
    pts = cloud.points if hasattr(cloud, "points") else np.asarray(cloud, dtype=float)
    world_pts = pose.apply(pts)
    frame = pca_canonicalize(world_pts)
    extents = np.sort(_extents(frame.canonical.points))[::-1]  # longest..shortest
    longest, middle, shortest = extents
    middle = max(middle, 1e-12)

    long_axis_world = frame.pose.rotation[:, 0]

    if shortest / middle <= flat_ratio and longest / middle < stick_ratio:
        # board: grasp on the thin boundary, edge_offset below the top surface
        top_z = world_pts[:, 2].max()
        boundary = world_pts[np.argmax(world_pts[:, 1])]  # any rim point works;
        # take the rim point closest to the top, shifted down by the offset
        contact = np.array([boundary[0], boundary[1], top_z - edge_offset])
        grasp_pose = _top_down_pose(contact, long_axis_world)
        return GraspSpec(grasp_pose=grasp_pose, strategy="flat_thin", contact_point=contact)

    # stick (and default): centroid grasp, top-down, gripper closes across
    # the long axis
    contact = world_pts.mean(axis=0)
    perp = np.cross(long_axis_world, np.array([0.0, 0.0, 1.0]))
    if np.linalg.norm(perp) < 1e-9:
        perp = np.array([1.0, 0.0, 0.0])
    perp = perp / np.linalg.norm(perp)
    grasp_pose = _top_down_pose(contact, perp)
    return GraspSpec(grasp_pose=grasp_pose, strategy="stick", contact_point=contact)
