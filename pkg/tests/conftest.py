"""Shared fixtures and independent oracles.

The oracles here deliberately avoid the library's canonical-form machinery:
tree equality uses backtracking child matching over raw nested lists, and
all permutation handling is plain factorial enumeration.
"""

from __future__ import annotations

import itertools
import random
from pathlib import Path

import numpy as np
import pytest

FIXTURES = Path(__file__).parent / "fixtures"


# ---------------------------------------------------------------------------
# random tree generation (raw nested lists)
# ---------------------------------------------------------------------------


def random_tree(labels, rng: random.Random):
    """Random nested list over the given leaf labels (each non-leaf >= 2 children)."""
    labels = list(labels)
    if len(labels) == 1:
        return labels[0]
    rng.shuffle(labels)
    n_children = rng.randint(2, len(labels))
    # split labels into n_children non-empty chunks
    cuts = sorted(rng.sample(range(1, len(labels)), n_children - 1))
    chunks = [labels[a:b] for a, b in zip([0] + cuts, cuts + [len(labels)])]
    return [random_tree(c, rng) for c in chunks]


def relabel_tree(tree, mapping: dict):
    if isinstance(tree, int):
        return mapping.get(tree, tree)
    return [relabel_tree(t, mapping) for t in tree]


def tree_leaves(tree) -> set:
    if isinstance(tree, int):
        return {tree}
    out = set()
    for t in tree:
        out |= tree_leaves(t)
    return out


# ---------------------------------------------------------------------------
# oracle: tree equality by backtracking child matching
# ---------------------------------------------------------------------------


def trees_equal(a, b) -> bool:
    if isinstance(a, int) or isinstance(b, int):
        return a == b
    if len(a) != len(b):
        return False

    def match(remaining_a, used_b):
        if not remaining_a:
            return True
        head, rest = remaining_a[0], remaining_a[1:]
        for j, cand in enumerate(b):
            if j in used_b:
                continue
            if trees_equal(head, cand):
                if match(rest, used_b | {j}):
                    return True
        return False

    return match(list(a), frozenset())


def class_permutation_maps(classes):
    """Every part-relabeling from within-class permutations (full product)."""
    ordered = [sorted(c) for c in classes]
    for combo in itertools.product(*[itertools.permutations(c) for c in ordered]):
        mapping = {}
        for src, dst in zip(ordered, combo):
            mapping.update(zip(src, dst))
        yield mapping


def brute_exact(pred_tree, gt_tree, classes) -> bool:
    for mapping in class_permutation_maps(classes):
        if trees_equal(relabel_tree(pred_tree, mapping), gt_tree):
            return True
    return False


def nonleaf_signatures(tree):
    """(leaf frozenset, children leaf-frozenset multiset) for each non-leaf."""
    sigs = []

    def rec(node):
        if isinstance(node, int):
            return frozenset([node])
        child_sets = [rec(c) for c in node]
        leaf_set = frozenset().union(*child_sets)
        sigs.append((leaf_set, tuple(sorted(child_sets, key=lambda s: (min(s), sorted(s))))))
        return leaf_set

    rec(tree)
    return sigs


def brute_scores(pred_tree, gt_tree, classes, mode):
    """Best-permutation precision/recall/f1 by exhaustive enumeration."""
    gt_sigs = nonleaf_signatures(gt_tree)
    gt_keys = gt_sigs if mode == "hard" else [s[0] for s in gt_sigs]
    best = (-1.0, 0.0, 0.0)
    for mapping in class_permutation_maps(classes):
        pred_sigs = nonleaf_signatures(relabel_tree(pred_tree, mapping))
        pred_keys = pred_sigs if mode == "hard" else [s[0] for s in pred_sigs]
        mp = sum(1 for k in pred_keys if k in set(gt_keys))
        mg = sum(1 for k in gt_keys if k in set(pred_keys))
        p = mp / len(pred_keys) if pred_keys else 0.0
        r = mg / len(gt_keys) if gt_keys else 0.0
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
        if f1 > best[0]:
            best = (f1, p, r)
    return best[1], best[2], best[0]


# ---------------------------------------------------------------------------
# numeric helpers
# ---------------------------------------------------------------------------


def brute_chamfer(a: np.ndarray, b: np.ndarray) -> float:
    """O(N*M) double-loop chamfer oracle."""
    d_ab = np.min(
        np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=2), axis=1
    )
    d_ba = np.min(
        np.sum((b[:, None, :] - a[None, :, :]) ** 2, axis=2), axis=1
    )
    return float(np.mean(d_ab) + np.mean(d_ba))


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    q = rng.normal(size=4)
    q = q / np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------------------
# simulation scenario builders
# ---------------------------------------------------------------------------


def grid_cloud(n: int = 3, spacing: float = 0.02) -> np.ndarray:
    """Cubic grid of n^3 points spanning [0, (n-1)*spacing] on each axis."""
    axis = np.arange(n) * spacing
    g = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1)
    return g.reshape(-1, 3)


def row_assembly(n_parts: int = 4, gap: float = 0.008, start_offset: float = 0.4):
    """Parts in a row along x with the given inter-part gap.

    Returns (tree_text, clouds, targets, initial).  The gap sits between the
    world clearance (0.005) and the attachment threshold (0.01), so targets
    are reachable yet the finished parts count as attached.
    """
    from asmkit.geometry import PointCloud, Pose

    extent = 0.04  # grid_cloud(3, 0.02) spans 0.04 m
    pitch = extent + gap
    clouds = {i: PointCloud(grid_cloud(), part=i) for i in range(n_parts)}
    identity_q = np.array([1.0, 0.0, 0.0, 0.0])
    targets = {i: Pose(identity_q, np.array([i * pitch, 0.0, 0.0])) for i in range(n_parts)}
    initial = {
        i: Pose(identity_q, np.array([i * pitch, start_offset, 0.0])) for i in range(n_parts)
    }
    tree_text = "[" + ",".join(str(i) for i in range(n_parts)) + "]"
    return tree_text, clouds, targets, initial


def enclosure_boxes(center, inner: float = 0.1, thick: float = 0.02):
    """Six axis-aligned walls fully surrounding a cubic cavity at center."""
    from asmkit.sim import Box

    c = np.asarray(center, dtype=float)
    walls = []
    for axis in range(3):
        for sign in (-1, 1):
            lo = c - inner - thick
            hi = c + inner + thick
            lo = lo.copy()
            hi = hi.copy()
            if sign < 0:
                hi[axis] = c[axis] - inner
                lo[axis] = c[axis] - inner - thick
            else:
                lo[axis] = c[axis] + inner
                hi[axis] = c[axis] + inner + thick
            walls.append(Box(tuple(lo), tuple(hi)))
    return walls
