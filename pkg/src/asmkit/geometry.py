"""SE(3) pose algebra, PCA canonicalization, and pose-quality metrics.

Poses are rigid transforms stored as a unit quaternion (w, x, y, z) plus a
translation vector in meters.  All metric functions operate on plain numpy
arrays so they can be fed either from the pose layer or directly from files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

__all__ = [
    "Pose",
    "PointCloud",
    "CanonicalFrame",
    "DegenerateCloudError",
    "quat_to_matrix",
    "matrix_to_quat",
    "quat_slerp",
    "pca_canonicalize",
    "geodesic_distance",
    "rmse_translation",
    "chamfer_distance",
    "part_accuracy",
    "solve_frame_alignment",
    "map_targets_to_world",
]

_UNIT_TOL = 1e-9


class DegenerateCloudError(ValueError):
    """Raised when a point cloud has no usable principal axes."""


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Convert a unit quaternion (w, x, y, z) to a 3x3 rotation matrix."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(m: np.ndarray) -> np.ndarray:
    """Convert a rotation matrix to a unit quaternion (w, x, y, z), w >= 0."""
    m = np.asarray(m, dtype=float)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0:
        s = np.sqrt(tr + 1.0) * 2
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
        q = np.array(
            [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        )
    elif m[1, 1] >= m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
        q = np.array(
            [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        )
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
        q = np.array(
            [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
        )
    q = q / np.linalg.norm(q)
    if q[0] < 0:
        q = -q
    return q


def _quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def quat_slerp(qa: np.ndarray, qb: np.ndarray, alpha: float) -> np.ndarray:
    """Spherical linear interpolation between two unit quaternions."""
    qa = np.asarray(qa, dtype=float)
    qb = np.asarray(qb, dtype=float)
    dot = float(np.dot(qa, qb))
    if dot < 0.0:
        qb = -qb
        dot = -dot
    if dot > 1.0 - 1e-12:
        q = qa + alpha * (qb - qa)
        return q / np.linalg.norm(q)
    theta = np.arccos(np.clip(dot, -1.0, 1.0))
    s = np.sin(theta)
    q = (np.sin((1 - alpha) * theta) / s) * qa + (np.sin(alpha * theta) / s) * qb
    return q / np.linalg.norm(q)


@dataclass(frozen=True)
class Pose:
    """Rigid SE(3) transform: rotation quaternion (w,x,y,z) + translation (m)."""

    q: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        t = np.asarray(self.t, dtype=float)
        if q.shape != (4,) or t.shape != (3,):
            raise ValueError(f"bad pose shapes q={q.shape} t={t.shape}")
        if abs(np.linalg.norm(q) - 1.0) > 1e-6:
            raise ValueError(f"quaternion not normalized: |q|={np.linalg.norm(q)}")
        q = q / np.linalg.norm(q)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "t", t)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3))

    @staticmethod
    def from_matrix(m: np.ndarray) -> "Pose":
        m = np.asarray(m, dtype=float)
        return Pose(matrix_to_quat(m[:3, :3]), m[:3, 3].copy())

    @staticmethod
    def from_rt(rotation: np.ndarray, translation) -> "Pose":
        return Pose(matrix_to_quat(rotation), np.asarray(translation, dtype=float))

    @staticmethod
    def from_axis_angle(axis, angle: float, translation=(0.0, 0.0, 0.0)) -> "Pose":
        axis = np.asarray(axis, dtype=float)
        axis = axis / np.linalg.norm(axis)
        half = angle / 2.0
        q = np.concatenate([[np.cos(half)], np.sin(half) * axis])
        return Pose(q, np.asarray(translation, dtype=float))

    @staticmethod
    def random(rng: np.random.Generator, t_scale: float = 1.0) -> "Pose":
        q = rng.normal(size=4)
        q = q / np.linalg.norm(q)
        return Pose(q, rng.uniform(-t_scale, t_scale, size=3))

    @property
    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.q)

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.t
        return m

    def compose(self, other: "Pose") -> "Pose":
        """Return self applied after other: (self*other)(x) = self(other(x))."""
        return Pose(_quat_mul(self.q, other.q), self.rotation @ other.t + self.t)

    def invert(self) -> "Pose":
        r_inv = self.rotation.T
        q_inv = np.array([self.q[0], -self.q[1], -self.q[2], -self.q[3]])
        return Pose(q_inv, -(r_inv @ self.t))

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return points @ self.rotation.T + self.t

    def to_json(self) -> dict:
        return {"q": [float(v) for v in self.q], "t": [float(v) for v in self.t]}

    @staticmethod
    def from_json(obj: dict) -> "Pose":
        return Pose(np.asarray(obj["q"], dtype=float), np.asarray(obj["t"], dtype=float))

    def __repr__(self):
        return f"Pose(q={np.round(self.q, 4).tolist()}, t={np.round(self.t, 4).tolist()})"


def compose(a: Pose, b: Pose) -> Pose:
    return a.compose(b)


def invert(a: Pose) -> Pose:
    return a.invert()


@dataclass
class PointCloud:
    """N x 3 point set in meters, tagged with the part it samples."""

    points: np.ndarray
    part: int = -1

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"point cloud must be Nx3, got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite coordinates")
        self.points = pts

    def __len__(self):
        return len(self.points)

    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)

    def transformed(self, pose: Pose) -> "PointCloud":
        return PointCloud(pose.apply(self.points), self.part)


@dataclass
class CanonicalFrame:
    """Result of PCA canonicalization.

    ``pose`` maps the canonical cloud back onto the input:
    pose.apply(canonical.points) == original points.
    """

    canonical: PointCloud
    pose: Pose
    eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(3))
    ambiguous_axes: bool = False


def _as_points(cloud) -> np.ndarray:
    if isinstance(cloud, PointCloud):
        return cloud.points
    return np.asarray(cloud, dtype=float)


def pca_canonicalize(cloud, eig_tol: float = 1e-8) -> CanonicalFrame:
    """Center a cloud and rotate it into its principal-axes frame.

    Axis signs are disambiguated deterministically: each of the first two
    principal axes is flipped so that the point with the largest absolute
    projection onto it has a positive coordinate (ties broken by lowest point
    index); the third axis is the cross product of the first two, enforcing a
    right-handed frame.  Near-equal eigenvalues are flagged as ambiguous since
    rotationally symmetric parts lack a unique canonical frame.
    """
    pts = _as_points(cloud)
    part = cloud.part if isinstance(cloud, PointCloud) else -1
    if len(pts) < 3:
        raise DegenerateCloudError("PCA needs at least 3 points")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    cov = centered.T @ centered / len(pts)
    eigvals, eigvecs = np.linalg.eigh(cov)
    # eigh returns ascending order; we want non-increasing variance
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    if eigvals[0] <= eig_tol * max(1.0, float(np.abs(pts).max()) ** 2):
        raise DegenerateCloudError("all points coincident: degenerate covariance")

    axes = np.zeros((3, 3))
    for k in range(2):
        axis = eigvecs[:, k]
        proj = centered @ axis
        idx = int(np.argmax(np.abs(np.round(proj, 12))))
        if proj[idx] < 0:
            axis = -axis
        axes[:, k] = axis
    axes[:, 2] = np.cross(axes[:, 0], axes[:, 1])

    spread = eigvals[0] if eigvals[0] > 0 else 1.0
    ambiguous = bool(
        np.any(np.abs(np.diff(eigvals)) < 1e-9 * spread + 1e-15)
    )

    canonical_pts = centered @ axes
    pose = Pose.from_rt(axes, centroid)
    return CanonicalFrame(
        canonical=PointCloud(canonical_pts, part),
        pose=pose,
        eigenvalues=eigvals,
        ambiguous_axes=ambiguous,
    )


def geodesic_distance(r1: np.ndarray, r2: np.ndarray) -> float:
    """Angle in [0, pi] of the relative rotation: arccos((tr(R1^T R2) - 1)/2)."""
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    if np.array_equal(r1, r2):
        # arccos roundoff would otherwise report ~1e-8 for identical inputs
        return 0.0
    arg = (np.trace(r1.T @ r2) - 1.0) / 2.0
    return float(np.arccos(np.clip(arg, -1.0, 1.0)))


def rmse_translation(t: np.ndarray, t_hat: np.ndarray) -> float:
    """Euclidean distance between translations, in meters."""
    return float(np.linalg.norm(np.asarray(t, dtype=float) - np.asarray(t_hat, dtype=float)))


def chamfer_distance(s1, s2) -> float:
    """Bidirectional mean of squared nearest-neighbor distances.

    Symmetric by construction: the two directional terms are always summed
    in the order (smaller-id cloud first is irrelevant — addition of the two
    per-cloud means is evaluation-order fixed).
    """
    p1 = _as_points(s1)
    p2 = _as_points(s2)
    if len(p1) == 0 or len(p2) == 0:
        raise ValueError("chamfer_distance requires non-empty clouds")
    d12, _ = cKDTree(p2).query(p1)
    d21, _ = cKDTree(p1).query(p2)
    return float(np.mean(d12**2) + np.mean(d21**2))


def part_accuracy(
    gt_pose: Pose, pred_pose: Pose, cloud, threshold: float = 0.01, use_root: bool = False
) -> bool:
    """True when the chamfer distance between gt and predicted placement is
    below the threshold (0.01 per the standard part-accuracy criterion).

    ``use_root`` compares sqrt(CD) against the threshold instead, for callers
    that want the threshold interpreted as a plain distance.
    """
    pts = _as_points(cloud)
    cd = chamfer_distance(gt_pose.apply(pts), pred_pose.apply(pts))
    value = np.sqrt(cd) if use_root else cd
    return bool(value < threshold)


def solve_frame_alignment(anchor_world: Pose, anchor_manual: Pose) -> Pose:
    """Transform mapping the manual/camera frame into the world frame.

    Defined so that compose(result, anchor_manual) == anchor_world.
    """
    return anchor_world.compose(anchor_manual.invert())


def map_targets_to_world(alignment: Pose, manual_targets: dict) -> dict:
    """Apply the frame alignment to every per-part target pose."""
    return {part: alignment.compose(pose) for part, pose in manual_targets.items()}


def load_pose_json(path) -> Pose:
    with open(path) as f:
        return Pose.from_json(json.load(f))
