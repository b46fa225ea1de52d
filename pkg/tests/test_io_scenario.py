import json

import numpy as np
import pytest

from asmkit.geometry import PointCloud, Pose
from asmkit.io import load_item, load_point_cloud, load_poses_json, save_point_cloud, save_poses_json
from asmkit.sim.scenario import load_scenario, run_trials

from conftest import grid_cloud, row_assembly


# ---------------------------------------------------------------------------
# point-cloud files
# ---------------------------------------------------------------------------


def test_ply_ascii_roundtrip(tmp_path, rng):
    pts = rng.normal(size=(50, 3))
    p = tmp_path / "cloud.ply"
    save_point_cloud(p, pts)
    loaded = load_point_cloud(p, part=4)
    assert loaded.part == 4
    assert np.allclose(loaded.points, pts, atol=1e-6)


def test_ply_binary_roundtrip(tmp_path, rng):
    pts = rng.normal(size=(30, 3))
    p = tmp_path / "cloud.ply"
    save_point_cloud(p, pts, binary=True)
    assert np.allclose(load_point_cloud(p).points, pts, atol=1e-6)


def test_xyz_roundtrip(tmp_path, rng):
    pts = rng.normal(size=(20, 3))
    p = tmp_path / "cloud.xyz"
    save_point_cloud(p, pts)
    assert np.allclose(load_point_cloud(p).points, pts, atol=1e-8)


def test_ply_extra_properties(tmp_path):
    # colors interleaved with coordinates must not confuse the reader
    text = (
        "ply\nformat ascii 1.0\nelement vertex 2\n"
        "property float x\nproperty float y\nproperty float z\n"
        "property uchar red\nproperty uchar green\nproperty uchar blue\n"
        "end_header\n"
        "1 2 3 255 0 0\n4 5 6 0 255 0\n"
    )
    p = tmp_path / "rgb.ply"
    p.write_text(text)
    assert np.allclose(load_point_cloud(p).points, [[1, 2, 3], [4, 5, 6]])


def test_ply_missing_axis(tmp_path):
    text = (
        "ply\nformat ascii 1.0\nelement vertex 1\n"
        "property float x\nproperty float y\nend_header\n1 2\n"
    )
    p = tmp_path / "bad.ply"
    p.write_text(text)
    with pytest.raises(ValueError):
        load_point_cloud(p)


def test_pose_json_roundtrip(tmp_path, rng):
    poses = {i: Pose.random(rng) for i in range(3)}
    p = tmp_path / "poses.json"
    save_poses_json(p, poses)
    loaded = load_poses_json(p)
    assert set(loaded) == {0, 1, 2}
    for i in range(3):
        assert np.allclose(loaded[i].matrix(), poses[i].matrix())


# ---------------------------------------------------------------------------
# item files
# ---------------------------------------------------------------------------


def test_load_item(tmp_path, rng):
    save_point_cloud(tmp_path / "leg.ply", rng.normal(size=(10, 3)))
    item_blob = {
        "parts": [
            {"id": 0, "name": "seat"},
            {"id": 1, "name": "leg", "cloud": "leg.ply"},
        ],
        "connectivity": [[0, 1]],
        "equivalences": [],
        "gt_tree": [0, 1],
    }
    path = tmp_path / "item.json"
    path.write_text(json.dumps(item_blob))
    item = load_item(path)
    assert item.parts == {0: "seat", 1: "leg"}
    assert 1 in item.clouds and 0 not in item.clouds
    assert item.connectivity == [(0, 1)]
    assert item.gt_tree == [0, 1]


# ---------------------------------------------------------------------------
# scenario files
# ---------------------------------------------------------------------------


def write_scenario(tmp_path, **overrides):
    tree_text, clouds, targets, initial = row_assembly(overrides.pop("n_parts", 2))
    data = {
        "tree": tree_text,
        "clouds": {str(k): v.points.tolist() for k, v in clouds.items()},
        "targets": {str(k): v.to_json() for k, v in targets.items()},
        "initial": {str(k): v.to_json() for k, v in initial.items()},
        "planner": {"seed": 0},
    }
    data.update(overrides)
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(data))
    return path


def test_load_scenario_defaults(tmp_path):
    sc = load_scenario(write_scenario(tmp_path))
    assert sc.graph.validate() == []
    assert sc.order == (sc.graph.root,)
    assert sc.world.clearance == 0.005
    assert sc.ground_truth.keys() == sc.targets.keys()


def test_scenario_cloud_from_file(tmp_path):
    save_point_cloud(tmp_path / "p0.ply", grid_cloud())
    path = write_scenario(tmp_path)
    data = json.loads(path.read_text())
    data["clouds"]["0"] = "p0.ply"
    path.write_text(json.dumps(data))
    sc = load_scenario(path)
    assert np.allclose(sc.clouds[0].points, grid_cloud(), atol=1e-6)
    assert sc.clouds[0].part == 0


def test_run_trials_success(tmp_path):
    sc = load_scenario(write_scenario(tmp_path))
    report = run_trials(sc, trials=2)
    assert report.success_rate == 1.0
    assert report.acr == 1.0
    blob = report.to_json()
    assert blob["total_steps"] == 1
    assert len(blob["trials"]) == 2


def test_run_trials_jitter_deterministic(tmp_path):
    path = write_scenario(tmp_path, initial_jitter=0.05, seed=9)
    r1 = run_trials(load_scenario(path), trials=3)
    r2 = run_trials(load_scenario(path), trials=3)
    assert json.dumps(r1.to_json()) == json.dumps(r2.to_json())


def test_run_trials_partial_completion(tmp_path):
    # second part's target pulled far from ground truth: pose_too_far on a
    # one-step plan gives ACR 0
    path = write_scenario(tmp_path)
    data = json.loads(path.read_text())
    data["ground_truth"] = dict(data["targets"])
    bad = Pose(np.array([1.0, 0, 0, 0]), np.array([0.3, 0.0, 0.0]))
    data["targets"]["1"] = bad.to_json()
    path.write_text(json.dumps(data))
    report = run_trials(load_scenario(path), trials=1)
    assert report.success_rate == 0.0
    assert report.acr == 0.0
    assert report.outcomes[0][-1].status == "pose_too_far"
