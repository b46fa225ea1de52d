"""Acceptance suite: twelve numbered criteria, one printed pass/fail line each.

Each criterion prints "[PASS] criterion N: ..." (or FAIL) before asserting,
so a plain `pytest -s tests/test_acceptance.py` reads as a checklist.
"""

import itertools
import json
import random
import time

import numpy as np
import pytest
from click.testing import CliRunner

from asmkit.cli import main as cli_main
from asmkit.geometry import (
    Pose,
    chamfer_distance,
    geodesic_distance,
    map_targets_to_world,
    part_accuracy,
    pca_canonicalize,
    quat_to_matrix,
    solve_frame_alignment,
)
from asmkit.graph import (
    equivalence_classes,
    graph_from_nested,
    parse_nested_list,
    singlestep_baseline,
    to_nested_list,
)
from asmkit.losses import LossWeights, StepPrediction, permutation_min_loss, total_loss
from asmkit.plan_eval import batch_evaluate, exact_match, format_report_table, node_match_scores
from asmkit.sim import (
    Box,
    PlannerParams,
    World,
    acr,
    collides,
    execute_assembly,
    rrt_connect,
)
from asmkit.sim.rrt import validate_path
from asmkit.vlm import (
    ManualDocument,
    TranscriptReplayClient,
    derive_equivalences,
    parse_triplets,
    plan_from_manual,
)

from conftest import (
    FIXTURES,
    brute_chamfer,
    brute_exact,
    brute_scores,
    enclosure_boxes,
    random_rotation,
    random_tree,
    relabel_tree,
    row_assembly,
)


def check(n: int, description: str, passed: bool):
    print(f"[{'PASS' if passed else 'FAIL'}] criterion {n}: {description}")
    assert passed, f"criterion {n} failed: {description}"


# ---------------------------------------------------------------------------
# 1. tree-matching oracle equivalence
# ---------------------------------------------------------------------------


def test_criterion_1_matcher_oracle_equivalence():
    rng = random.Random(2024)
    started = time.monotonic()
    count = 0
    ok = True
    while count < 3000:
        n = rng.randint(2, 7)
        labels = list(range(n))
        gt_tree = random_tree(labels, rng)
        if isinstance(gt_tree, int):
            continue
        if rng.random() < 0.5:
            a, b = rng.sample(labels, 2)
            pred_tree = relabel_tree(gt_tree, {a: b, b: a})
        else:
            pred_tree = random_tree(labels, rng)
            if isinstance(pred_tree, int):
                continue
        # up to 2 equivalence classes of size <= 3
        pairs = []
        pool = list(labels)
        rng.shuffle(pool)
        for _ in range(rng.randint(0, 2)):
            size = rng.randint(2, 3)
            if len(pool) < size:
                break
            cls, pool = pool[:size], pool[size:]
            pairs.extend(itertools.combinations(sorted(cls), 2))
        classes = equivalence_classes(pairs)

        pred = parse_nested_list(to_nested_list(graph_from_nested(pred_tree)),
                                 equivalences=pairs)
        gt = parse_nested_list(to_nested_list(graph_from_nested(gt_tree)),
                               equivalences=pairs)

        if exact_match(pred, gt) != brute_exact(pred_tree, gt_tree, classes):
            ok = False
            break
        for mode in ("simple", "hard"):
            _, _, f1 = brute_scores(pred_tree, gt_tree, classes, mode)
            if abs(node_match_scores(pred, gt, mode=mode).f1 - f1) > 1e-12:
                ok = False
                break
        if not ok:
            break
        count += 1
    elapsed = time.monotonic() - started
    check(
        1,
        f"exact/simple/hard match brute force on {count} trees in {elapsed:.1f}s (< 60s)",
        ok and count == 3000 and elapsed < 60.0,
    )


# ---------------------------------------------------------------------------
# 2. SingleStep baseline identities
# ---------------------------------------------------------------------------


def test_criterion_2_singlestep_identities():
    rng = random.Random(77)
    precision_ok = True
    for _ in range(200):
        n = rng.randint(2, 8)
        tree = random_tree(list(range(n)), rng)
        if isinstance(tree, int):
            continue
        gt = graph_from_nested(tree)
        baseline = singlestep_baseline(gt.part_set)
        s = node_match_scores(baseline, gt, mode="simple")
        if s.precision != 1.0:
            precision_ok = False
            break

    two_part_ok = all(
        exact_match(singlestep_baseline({a, b}), graph_from_nested([a, b]))
        for a, b in [(0, 1), (3, 9), (5, 6)]
    )
    nonflat_ok = True
    for tree in ([[0, 1], 2], [[1, 2], [3, 4]], [[[0, 1], 2], 3, 4]):
        gt = graph_from_nested(tree)
        if exact_match(singlestep_baseline(gt.part_set), gt):
            nonflat_ok = False
            break
    check(
        2,
        "SingleStep: simple precision 1.0, exact on 2-part, inexact on non-flat trees",
        precision_ok and two_part_ok and nonflat_ok,
    )


# ---------------------------------------------------------------------------
# 3. equivalence-permutation regression
# ---------------------------------------------------------------------------


def test_criterion_3_equivalence_regression():
    pred = parse_nested_list("[[2,3],1]", equivalences=[(1, 2)])
    gt = parse_nested_list("[[1,3],2]", equivalences=[(1, 2)])
    matched = exact_match(pred, gt)
    without = exact_match(parse_nested_list("[[2,3],1]"), parse_nested_list("[[1,3],2]"))
    check(3, "[[2,3],1] == [[1,3],2] under 1~2 (and != without it)", matched and not without)


# ---------------------------------------------------------------------------
# 4. metric suite
# ---------------------------------------------------------------------------


def test_criterion_4_metric_suite():
    rng = np.random.default_rng(4)
    gd_ok = True
    for _ in range(100):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        theta = rng.uniform(0, np.pi)
        r = quat_to_matrix(Pose.from_axis_angle(axis, theta).q)
        if abs(geodesic_distance(np.eye(3), r) - theta) > 1e-9:
            gd_ok = False
            break

    cd_ok = True
    for _ in range(200):
        a = rng.normal(size=(50, 3))
        b = rng.normal(size=(50, 3))
        if abs(chamfer_distance(a, b) - brute_chamfer(a, b)) > 1e-10:
            cd_ok = False
            break

    cloud = np.array([[0.0, 0.0, 0.0]])
    gt = Pose.identity()
    shift = lambda d: Pose(np.array([1.0, 0, 0, 0]), np.array([d, 0, 0]))
    # CD for a translated singleton is 2*d^2; 0.01 boundary at d = sqrt(0.005)
    pa_ok = (
        part_accuracy(gt, shift(np.sqrt(0.0049)), cloud)
        and not part_accuracy(gt, shift(np.sqrt(0.0051)), cloud)
        and not part_accuracy(gt, shift(np.sqrt(0.005)), cloud)
    )
    check(
        4,
        "GD axis-angle within 1e-9 (100x), chamfer vs O(N^2) within 1e-10 (200x), "
        "PA flips at CD 0.01",
        gd_ok and cd_ok and pa_ok,
    )


# ---------------------------------------------------------------------------
# 5. loss suite
# ---------------------------------------------------------------------------


def test_criterion_5_loss_suite():
    rng = np.random.default_rng(5)
    weights = LossWeights(1, 1, 1, 20, 0.1)

    clouds = {i: rng.normal(size=(30, 3)) for i in range(3)}
    poses = {i: Pose.random(rng) for i in range(3)}
    perfect = StepPrediction(pred=poses, gt=dict(poses), clouds=clouds)
    perfect_ok = total_loss(perfect, weights).total == 0.0

    min_ok = True
    equality_ok = True
    for trial in range(500):
        n = 4
        with_classes = trial % 2 == 0
        clouds = {i: rng.normal(size=(20, 3)) for i in range(n)}
        gt = {i: Pose.random(rng) for i in range(n)}
        if with_classes:
            equivalences = [(0, 1), (2, 3)]
            # predict near the class-swapped ground truth so the identity
            # assignment is strictly suboptimal
            source = {0: 1, 1: 0, 2: 3, 3: 2}
        else:
            equivalences = []
            source = {i: i for i in range(n)}
        pred = {}
        for i in range(n):
            delta = Pose.from_axis_angle(rng.normal(size=3), 0.01 * rng.random(),
                                         rng.normal(size=3) * 0.01)
            pred[i] = delta.compose(gt[source[i]])
        sp = StepPrediction(pred=pred, gt=gt, clouds=clouds, equivalences=equivalences)
        identity_total = total_loss(sp, weights).total
        best, _ = permutation_min_loss(sp, weights)
        if best.total > identity_total + 1e-12:
            min_ok = False
            break
        if with_classes and not best.total < identity_total:
            equality_ok = False
            break
        if not with_classes and best.total != identity_total:
            equality_ok = False
            break

    # 3-element class vs 6-permutation brute force
    clouds = {i: rng.normal(size=(15, 3)) for i in range(3)}
    gt = {i: Pose.random(rng) for i in range(3)}
    pred = {i: Pose.random(rng) for i in range(3)}
    sp = StepPrediction(pred=pred, gt=gt, clouds=clouds, equivalences=[(0, 1), (1, 2)])
    brute = min(
        total_loss(sp, weights, gt_override={i: gt[p[i]] for i in range(3)}).total
        for p in itertools.permutations(range(3))
    )
    best, _ = permutation_min_loss(sp, weights)
    brute_ok = best.total == brute

    check(
        5,
        "perfect loss 0; perm-min <= identity on 500 instances (equality iff "
        "singleton classes); 3-class min equals 6-permutation brute force",
        perfect_ok and min_ok and equality_ok and brute_ok,
    )


# ---------------------------------------------------------------------------
# 6. frame alignment
# ---------------------------------------------------------------------------


def test_criterion_6_frame_alignment():
    rng = np.random.default_rng(6)
    ok = True
    for _ in range(1000):
        anchor_world = Pose.random(rng)
        anchor_manual = Pose.random(rng)
        target = Pose.random(rng)
        alignment = solve_frame_alignment(anchor_world, anchor_manual)
        mapped = map_targets_to_world(alignment, {0: target})[0]
        # anchor-relative pose must be frame independent
        rel_manual = anchor_manual.invert().compose(target)
        rel_world = anchor_world.invert().compose(mapped)
        if not np.allclose(rel_world.matrix(), rel_manual.matrix(), atol=1e-10):
            ok = False
            break
    check(6, "mapped targets preserve anchor-relative pose within 1e-10 (1000 triples)", ok)


# ---------------------------------------------------------------------------
# 7. PCA canonicalization
# ---------------------------------------------------------------------------


def test_criterion_7_pca_canonicalization():
    rng = np.random.default_rng(7)
    invariance_ok = True
    idempotence_ok = True
    tested = 0
    while tested < 200:
        pts = rng.uniform(-1, 1, size=(120, 3)) * np.array([0.5, 0.2, 0.05])
        f1 = pca_canonicalize(pts)
        if f1.ambiguous_axes:
            continue
        r = random_rotation(rng)
        t = rng.uniform(-1, 1, size=3)
        f2 = pca_canonicalize(pts @ r.T + t)
        if f2.ambiguous_axes:
            continue
        if not np.allclose(f1.canonical.points, f2.canonical.points, atol=1e-6):
            invariance_ok = False
            break
        f3 = pca_canonicalize(f1.canonical.points)
        if not np.allclose(f1.canonical.points, f3.canonical.points, atol=1e-8):
            idempotence_ok = False
            break
        tested += 1
    check(
        7,
        f"PCA rigid-motion invariance 1e-6 and idempotence 1e-8 on {tested} clouds",
        invariance_ok and idempotence_ok and tested == 200,
    )


# ---------------------------------------------------------------------------
# 8. planner suite
# ---------------------------------------------------------------------------


def _planner_scenarios():
    """20 solvable SE(3) problems: free space, wall detours, cluttered goals."""
    scenarios = []
    cloud = np.array([[0.0, 0.0, 0.0], [0.02, 0.0, 0.0], [0.0, 0.02, 0.0]])
    for i in range(8):  # free space, varied goals and rotations
        goal = Pose.from_axis_angle([0, 0, 1], 0.2 * i, translation=[0.4 + 0.05 * i, 0.1 * (i % 3), 0.0])
        scenarios.append((World(), cloud, Pose.identity(), goal, i))
    for i in range(6):  # wall detours
        wall = Box((0.2, -0.25 - 0.02 * i, -0.25), (0.24, 0.25, 0.25))
        goal = Pose(np.array([1.0, 0, 0, 0]), np.array([0.5, 0.05 * i, 0.0]))
        scenarios.append((World(boxes=[wall]), cloud, Pose.identity(), goal, 100 + i))
    for i in range(6):  # point-cloud clutter near the goal
        rng = np.random.default_rng(i)
        clutter = rng.uniform(-0.1, 0.1, size=(40, 3)) + np.array([0.3, 0.15, 0.0])
        from asmkit.geometry import PointCloud

        world = World(obstacles=[PointCloud(clutter)])
        goal = Pose(np.array([1.0, 0, 0, 0]), np.array([0.55, 0.0, 0.05 * i]))
        scenarios.append((world, cloud, Pose.identity(), goal, 200 + i))
    return scenarios


def test_criterion_8_planner_suite():
    started = time.monotonic()
    scenarios = _planner_scenarios()
    successes = 0
    revalidated = True
    for world, cloud, start, goal, seed in scenarios:
        params = PlannerParams(seed=seed)
        path = rrt_connect(world, cloud, start, goal, params)
        if path is None:
            continue
        successes += 1
        if not validate_path(world, cloud, path, params, resolution_factor=10.0):
            revalidated = False

    # determinism spot check on a wall scenario
    world, cloud, start, goal, seed = scenarios[10]
    params = PlannerParams(seed=seed)
    p1 = rrt_connect(world, cloud, start, goal, params)
    p2 = rrt_connect(world, cloud, start, goal, params)
    deterministic = len(p1) == len(p2) and all(
        np.allclose(a.q, b.q) and np.allclose(a.t, b.t) for a, b in zip(p1, p2)
    )

    goal_center = np.array([0.5, 0.0, 0.0])
    enclosed = World(boxes=enclosure_boxes(goal_center, inner=0.08, thick=0.02))
    no_path = (
        rrt_connect(
            enclosed,
            np.array([[0.0, 0.0, 0.0]]),
            Pose.identity(),
            Pose(np.array([1.0, 0, 0, 0]), goal_center),
            PlannerParams(seed=1, max_iterations=800, sample_margin=0.3),
        )
        is None
    )
    elapsed = time.monotonic() - started
    rate = successes / len(scenarios)
    check(
        8,
        f"planner success {successes}/{len(scenarios)} (>=95%), 10x re-validation, "
        f"enclosed goal -> no path, deterministic, {elapsed:.1f}s (< 120s)",
        rate >= 0.95 and revalidated and no_path and deterministic and elapsed < 120.0,
    )


# ---------------------------------------------------------------------------
# 9. simulator failure taxonomy
# ---------------------------------------------------------------------------


def test_criterion_9_failure_taxonomy():
    # success: 4 parts in a row at ground-truth targets
    tree_text, clouds, targets, initial = row_assembly(4)
    tree = parse_nested_list(tree_text)
    run = lambda tgt, world=None, params=None: execute_assembly(
        tree if len(tgt) == 4 else parse_nested_list("[0,1]"),
        (tree.root,) if len(tgt) == 4 else (parse_nested_list("[0,1]").root,),
        tgt,
        dict(tgt),
        initial,
        clouds,
        world or World(),
        params or PlannerParams(seed=0),
    )
    success_ok = all(o.status == "success" for o in run(targets))

    # pose_too_far: target pulled 10 cm off its ground truth
    bad_targets = dict(targets)
    bad_targets[2] = Pose(np.array([1.0, 0, 0, 0]), targets[2].t + np.array([0.1, 0, 0]))
    outcomes = execute_assembly(
        tree, (tree.root,), bad_targets, targets, initial, clouds, World(),
        PlannerParams(seed=0),
    )
    pose_ok = outcomes[-1].status == "pose_too_far"

    # no_path: second part's goal fully walled in
    two_targets = {k: targets[k] for k in (0, 1)}
    enclosed = World(boxes=enclosure_boxes(two_targets[1].t + 0.02, inner=0.09, thick=0.02))
    outcomes = run(two_targets, world=enclosed,
                   params=PlannerParams(seed=0, max_iterations=600, sample_margin=0.3))
    no_path_ok = outcomes[-1].status == "no_path"

    # floating_part: part 1 placed 4 cm clear of part 0
    floating = {
        0: targets[0],
        1: Pose(np.array([1.0, 0, 0, 0]), np.array([0.08, 0.0, 0.0])),
    }
    outcomes = run(floating)
    floating_ok = outcomes[-1].status == "floating_part"

    check(
        9,
        "deterministic pose_too_far / no_path / floating_part plus 4-part success",
        success_ok and pose_ok and no_path_ok and floating_ok,
    )


# ---------------------------------------------------------------------------
# 10. ACR arithmetic
# ---------------------------------------------------------------------------


def test_criterion_10_acr():
    exact = acr([(2, 4), (4, 4), (0, 4)]) == 0.5
    all_complete = all(
        acr([(n, n) for n in trial]) == 1.0
        for trial in ([1], [3, 5], [2, 2, 7])
    )
    check(10, "ACR(2/4, 4/4, 0/4) = 0.5 exactly; all-complete trials give 1.0", exact and all_complete)


# ---------------------------------------------------------------------------
# 11. pipeline regression
# ---------------------------------------------------------------------------


def test_criterion_11_pipeline_regression():
    transcript = FIXTURES / "transcripts" / "chair_example.jsonl"
    doc = ManualDocument(pages=[b"page-1", b"page-2"], cover=b"cover", scene_image=b"scene")
    results = [
        plan_from_manual(doc, TranscriptReplayClient(transcript)) for _ in range(2)
    ]
    byte_stable = (
        results[0].tree_text == results[1].tree_text == "[[[[1,5],2],7],3,4]"
        and to_nested_list(results[0].graph) == to_nested_list(results[1].graph)
    )
    triplets = parse_triplets((FIXTURES / "side_frame_triplets.txt").read_text())
    side_frame_pair = derive_equivalences(triplets) == [(0, 1)]
    check(
        11,
        "transcript replay reproduces [[[[1,5],2],7],3,4] byte-stably; side-frame "
        "triplets derive pair (0, 1)",
        byte_stable and side_frame_pair,
    )


# ---------------------------------------------------------------------------
# 12. report formatting
# ---------------------------------------------------------------------------


def test_criterion_12_report_formatting(tmp_path):
    gt_dir = tmp_path / "gt"
    pred_dir = tmp_path / "pred"
    gt_dir.mkdir()
    pred_dir.mkdir()
    for i in range(14):
        (gt_dir / f"item{i:02d}.json").write_text(
            json.dumps(
                {
                    "parts": [{"id": p, "name": f"part {p}"} for p in (0, 1, 2)],
                    "gt_tree": [[0, 1], 2],
                }
            )
        )
        (pred_dir / f"item{i:02d}.txt").write_text(
            "[[0,1],2]" if i < 11 else "[[0,2],1]"
        )
    result = CliRunner().invoke(
        cli_main, ["eval-plan", "--pred", str(pred_dir), "--gt", str(gt_dir)]
    )
    table_ok = result.exit_code == 0 and "78.6" in result.output

    # and the library-level report agrees with an independent recount
    dataset = [
        (f"item{i:02d}",
         parse_nested_list("[[0,1],2]" if i < 11 else "[[0,2],1]"),
         parse_nested_list("[[0,1],2]"),
         [])
        for i in range(14)
    ]
    report = batch_evaluate(dataset)
    recount = 100.0 * 11 / 14
    table = format_report_table(report)
    lib_ok = abs(report.buckets["2-4"]["success_rate"] - recount) < 1e-12 and "78.6" in table
    check(12, "eval-plan prints 78.6 for 11/14 exact in the 2-4 bucket", table_ok and lib_ok)
