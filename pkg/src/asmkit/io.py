"""File formats: PLY / XYZ point clouds, pose JSON, furniture item files."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import PointCloud, Pose

__all__ = [
    "load_point_cloud",
    "save_point_cloud",
    "FurnitureItem",
    "load_item",
]

_PLY_TYPES = {
    "float": ("f", 4),
    "float32": ("f", 4),
    "double": ("d", 8),
    "float64": ("d", 8),
    "uchar": ("B", 1),
    "uint8": ("B", 1),
    "char": ("b", 1),
    "int8": ("b", 1),
    "short": ("h", 2),
    "ushort": ("H", 2),
    "int": ("i", 4),
    "int32": ("i", 4),
    "uint": ("I", 4),
    "uint32": ("I", 4),
}


def _parse_ply(raw: bytes) -> np.ndarray:
    header_end = raw.find(b"end_header")
    if header_end < 0:
        raise ValueError("PLY missing end_header")
    header_end = raw.index(b"\n", header_end) + 1
    header = raw[:header_end].decode("ascii", errors="replace").splitlines()

    fmt = None
    n_vertices = 0
    props: list[tuple[str, str]] = []
    in_vertex = False
    for line in header:
        tokens = line.strip().split()
        if not tokens:
            continue
        if tokens[0] == "format":
            fmt = tokens[1]
        elif tokens[0] == "element":
            in_vertex = tokens[1] == "vertex"
            if in_vertex:
                n_vertices = int(tokens[2])
        elif tokens[0] == "property" and in_vertex:
            if tokens[1] == "list":
                raise ValueError("list properties unsupported in vertex element")
            props.append((tokens[1], tokens[2]))

    names = [name for _, name in props]
    for ax in ("x", "y", "z"):
        if ax not in names:
            raise ValueError(f"PLY vertex element missing property {ax!r}")
    cols = [names.index(ax) for ax in ("x", "y", "z")]

    body = raw[header_end:]
    if fmt == "ascii":
        rows = []
        for line in body.decode("ascii").splitlines():
            if not line.strip():
                continue
            values = line.split()
            rows.append([float(values[c]) for c in cols])
            if len(rows) == n_vertices:
                break
        return np.asarray(rows, dtype=float)
    if fmt == "binary_little_endian":
        fmt_str = "<" + "".join(_PLY_TYPES[t][0] for t, _ in props)
        size = struct.calcsize(fmt_str)
        out = np.empty((n_vertices, 3))
        for i in range(n_vertices):
            values = struct.unpack_from(fmt_str, body, i * size)
            out[i] = [values[c] for c in cols]
        return out
    raise ValueError(f"unsupported PLY format: {fmt}")


def load_point_cloud(path, part: int = -1) -> PointCloud:
    """Load a PLY (ascii or binary little-endian) or XYZ text file."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:3] == b"ply":
        pts = _parse_ply(raw)
    else:
        pts = np.loadtxt(path, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(1, -1)
        pts = pts[:, :3]
    return PointCloud(pts, part)


def save_point_cloud(path, cloud, binary: bool = False) -> None:
    path = Path(path)
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=float)
    if path.suffix.lower() == ".xyz":
        np.savetxt(path, pts, fmt="%.9g")
        return
    fmt_line = "binary_little_endian" if binary else "ascii"
    header = (
        "ply\n"
        f"format {fmt_line} 1.0\n"
        f"element vertex {len(pts)}\n"
        "property float x\nproperty float y\nproperty float z\n"
        "end_header\n"
    )
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        if binary:
            f.write(pts.astype("<f4").tobytes())
        else:
            for p in pts:
                f.write(f"{p[0]:.9g} {p[1]:.9g} {p[2]:.9g}\n".encode("ascii"))


@dataclass
class FurnitureItem:
    """One furniture item: parts with clouds, connectivity, and ground truth."""

    parts: dict[int, str]
    clouds: dict[int, PointCloud] = field(default_factory=dict)
    connectivity: list[tuple[int, int]] = field(default_factory=list)
    equivalences: list[tuple[int, int]] = field(default_factory=list)
    gt_tree: list | None = None
    manual_images: list[str] = field(default_factory=list)

    @property
    def part_ids(self) -> set[int]:
        return set(self.parts)


def load_item(path) -> FurnitureItem:
    """Load a furniture item JSON file; cloud paths resolve relative to it."""
    path = Path(path)
    with open(path) as f:
        data = json.load(f)
    parts: dict[int, str] = {}
    clouds: dict[int, PointCloud] = {}
    for entry in data["parts"]:
        pid = int(entry["id"])
        parts[pid] = entry.get("name", f"part {pid}")
        cloud_path = entry.get("cloud")
        if cloud_path:
            clouds[pid] = load_point_cloud(path.parent / cloud_path, part=pid)
    return FurnitureItem(
        parts=parts,
        clouds=clouds,
        connectivity=[(int(a), int(b)) for a, b in data.get("connectivity", [])],
        equivalences=[(int(a), int(b)) for a, b in data.get("equivalences", [])],
        gt_tree=data.get("gt_tree"),
        manual_images=data.get("manual_images", []),
    )


def load_poses_json(path) -> dict[int, Pose]:
    """Load a {part_id: {"q": [...], "t": [...]}} pose map."""
    with open(path) as f:
        data = json.load(f)
    return {int(k): Pose.from_json(v) for k, v in data.items()}


def save_poses_json(path, poses: dict[int, Pose]) -> None:
    with open(path, "w") as f:
        json.dump({str(k): v.to_json() for k, v in sorted(poses.items())}, f, indent=2)
