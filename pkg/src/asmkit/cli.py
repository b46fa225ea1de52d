"""Command-line interface.

Exit codes: 0 success, 1 domain failure (invalid data, failed simulation
step, endpoint error), 2 usage or configuration error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import graph as graph_mod
from . import io as io_mod
from . import losses as losses_mod
from . import plan_eval
from .sim import scenario as scenario_mod
from .vlm import client as vlm_client
from .vlm import pipeline as vlm_pipeline


def _fail(message: str, code: int = 1):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
def main():
    """Hierarchical assembly planning, evaluation, and simulation toolkit."""


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


@main.command("validate")
@click.argument("paths", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True, help="Emit a JSON summary.")
def cmd_validate(paths, as_json):
    """Validate furniture item files (or directories of them)."""
    files: list[Path] = []
    for p in paths:
        p = Path(p)
        files.extend(sorted(p.glob("*.json")) if p.is_dir() else [p])
    results = {}
    any_bad = False
    for f in files:
        try:
            item = io_mod.load_item(f)
            if item.gt_tree is None:
                violations = ["no gt_tree in item file"]
            else:
                g = graph_mod.parse_nested_list(
                    json.dumps(item.gt_tree), equivalences=item.equivalences
                )
                violations = g.validate()
                if g.part_set != item.part_ids:
                    violations.append(
                        f"tree parts {sorted(g.part_set)} != item parts {sorted(item.part_ids)}"
                    )
        except (ValueError, KeyError, OSError) as exc:
            violations = [str(exc)]
        results[str(f)] = violations
        any_bad = any_bad or bool(violations)
    if as_json:
        click.echo(json.dumps(results, indent=2))
    else:
        for name, violations in results.items():
            status = "OK" if not violations else "INVALID"
            click.echo(f"{name}: {status}")
            for v in violations:
                click.echo(f"  - {v}")
    sys.exit(1 if any_bad else 0)


# ---------------------------------------------------------------------------
# orders
# ---------------------------------------------------------------------------


@main.command("orders")
@click.argument("tree")
@click.option("--limit", default=20, show_default=True)
@click.option("--json", "as_json", is_flag=True)
def cmd_orders(tree, limit, as_json):
    """Enumerate feasible assembly orders of a nested-list tree."""
    try:
        g = graph_mod.parse_nested_list(tree)
        orders, total = graph_mod.feasible_orders(g, limit=limit)
    except ValueError as exc:
        _fail(str(exc))
    if as_json:
        click.echo(
            json.dumps({"total": total, "orders": [list(o.sequence) for o in orders]})
        )
    else:
        click.echo(f"{total} feasible orders (showing {len(orders)})")
        for o in orders:
            click.echo("  " + " -> ".join(str(n) for n in o.sequence))


# ---------------------------------------------------------------------------
# eval-plan
# ---------------------------------------------------------------------------


@main.command("eval-plan")
@click.option("--pred", "pred_dir", required=True, type=click.Path(exists=True),
              help="Directory of predicted trees (*.txt nested lists).")
@click.option("--gt", "gt_dir", required=True, type=click.Path(exists=True),
              help="Directory of ground-truth item files (*.json).")
@click.option("--mode", type=click.Choice(["simple", "hard", "exact"]), default="exact",
              show_default=True)
@click.option("--permutation-cap", default=plan_eval.DEFAULT_PERMUTATION_CAP,
              show_default=True)
@click.option("--json", "as_json", is_flag=True)
@click.option("--out", type=click.Path(), default=None, help="Write JSON report here.")
def cmd_eval_plan(pred_dir, gt_dir, mode, permutation_cap, as_json, out):
    """Score predicted trees against ground truth, bucketed by part count."""
    gt_dir = Path(gt_dir)
    pred_dir = Path(pred_dir)
    dataset = []
    for gt_file in sorted(gt_dir.glob("*.json")):
        pred_file = pred_dir / (gt_file.stem + ".txt")
        if not pred_file.exists():
            _fail(f"missing prediction for {gt_file.stem}", 2)
        try:
            item = io_mod.load_item(gt_file)
            gt = graph_mod.parse_nested_list(
                json.dumps(item.gt_tree), equivalences=item.equivalences
            )
            pred = graph_mod.parse_nested_list(
                pred_file.read_text(), equivalences=item.equivalences
            )
        except ValueError as exc:
            _fail(f"{gt_file.stem}: {exc}")
        dataset.append((gt_file.stem, pred, gt, item.equivalences))
    if not dataset:
        _fail("no items found", 2)
    report = plan_eval.batch_evaluate(dataset, permutation_cap=permutation_cap)
    if out:
        Path(out).write_text(json.dumps(report.to_json(), indent=2))
    if as_json:
        click.echo(json.dumps(report.to_json(), indent=2))
    else:
        click.echo(plan_eval.format_report_table(report))
        if mode in ("simple", "hard"):
            avg_f1 = report.averages.get(f"{mode}_f1")
            if avg_f1 is not None:
                click.echo(f"Average {mode} F1: {avg_f1:.3f}")


# ---------------------------------------------------------------------------
# loss
# ---------------------------------------------------------------------------


@main.command("loss")
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True))
@click.option("--clouds", "clouds_dir", required=True, type=click.Path(exists=True),
              help="Directory of per-part clouds named <part>.ply or <part>.xyz.")
@click.option("--weights", default="1,1,1,20,0.1", show_default=True)
@click.option("--equivalences", default="", help="Pairs like '0-1,2-3'.")
@click.option("--permute", is_flag=True, help="Minimize over equivalent-part assignments.")
def cmd_loss(pred_path, gt_path, clouds_dir, weights, equivalences, permute):
    """Compute the weighted pose-loss breakdown for predicted poses."""
    try:
        w = losses_mod.LossWeights.from_string(weights)
    except ValueError as exc:
        _fail(str(exc), 2)
    pred = io_mod.load_poses_json(pred_path)
    gt = io_mod.load_poses_json(gt_path)
    clouds = {}
    for pid in pred:
        found = None
        for suffix in (".ply", ".xyz"):
            candidate = Path(clouds_dir) / f"{pid}{suffix}"
            if candidate.exists():
                found = candidate
                break
        if found is None:
            _fail(f"no cloud file for part {pid} in {clouds_dir}", 2)
        clouds[pid] = io_mod.load_point_cloud(found, part=pid).points
    pairs = []
    if equivalences:
        for chunk in equivalences.split(","):
            a, b = chunk.split("-")
            pairs.append((int(a), int(b)))
    try:
        prediction = losses_mod.StepPrediction(pred=pred, gt=gt, clouds=clouds,
                                               equivalences=pairs)
        if permute:
            breakdown, assignment = losses_mod.permutation_min_loss(prediction, w)
            payload = breakdown.to_json()
            payload["assignment"] = {str(k): v for k, v in sorted(assignment.items())}
        else:
            payload = losses_mod.total_loss(prediction, w).to_json()
    except (ValueError, losses_mod.PermutationCapExceeded) as exc:
        _fail(str(exc))
    click.echo(json.dumps(payload, indent=2))


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


@main.command("simulate")
@click.option("--scenario", "scenario_path", required=True, type=click.Path(exists=True))
@click.option("--trials", default=1, show_default=True)
@click.option("--report", "report_path", type=click.Path(), default=None)
@click.option("--seed", default=None, type=int, help="Override the scenario seed.")
@click.option("--json", "as_json", is_flag=True)
def cmd_simulate(scenario_path, trials, report_path, seed, as_json):
    """Run assembly trials for a scenario and report success rate and ACR."""
    try:
        scn = scenario_mod.load_scenario(scenario_path)
        if seed is not None:
            scn.seed = seed
        report = scenario_mod.run_trials(scn, trials=trials)
    except (ValueError, KeyError, OSError) as exc:
        _fail(str(exc))
    payload = report.to_json()
    if report_path:
        Path(report_path).write_text(json.dumps(payload, indent=2))
    if as_json:
        click.echo(json.dumps(payload, indent=2))
    else:
        click.echo(f"trials: {trials}")
        click.echo(f"success rate: {report.success_rate:.3f}")
        click.echo(f"ACR: {report.acr:.3f}")
        for i, steps in enumerate(report.outcomes):
            statuses = ", ".join(o.status for o in steps)
            click.echo(f"  trial {i}: {statuses}")
    sys.exit(0 if report.success_rate == 1.0 else 1)


# ---------------------------------------------------------------------------
# sample
# ---------------------------------------------------------------------------


@main.command("sample")
@click.option("--item", "item_path", required=True, type=click.Path(exists=True))
@click.option("-m", "m", required=True, type=int, help="Parts in the subassembly.")
@click.option("-n", "n", required=True, type=int, help="Connected groups.")
@click.option("--seed", default=0, show_default=True)
def cmd_sample(item_path, m, n, seed):
    """Sample a connected subassembly and grouping from an item's connectivity."""
    item = io_mod.load_item(item_path)
    try:
        spec = graph_mod.sample_subassembly(item.connectivity, m, n, rng_seed=seed)
    except (ValueError, graph_mod.InfeasibleSampleError) as exc:
        _fail(str(exc))
    click.echo(
        json.dumps(
            {
                "selected": sorted(spec.selected),
                "grouping": [sorted(g) for g in spec.grouping],
                "sizes": list(spec.sizes()),
            }
        )
    )


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------


@main.command("pipeline")
@click.option("--scene", type=click.Path(exists=True), help="Labeled pre-assembly scene image.")
@click.option("--cover", type=click.Path(exists=True), help="Manual cover image.")
@click.option("--pages", type=click.Path(exists=True), multiple=True, help="Manual page images.")
@click.option("--endpoint-config", type=click.Path(exists=True), default=None)
@click.option("--transcript", type=click.Path(exists=True), default=None,
              help="Replay a recorded transcript instead of calling an endpoint.")
@click.option("--record", type=click.Path(), default=None, help="Record exchanges here.")
@click.option("--repeats", default=1, show_default=True)
@click.option("--out", type=click.Path(), default=None, help="Write the tree text here.")
@click.option("--json", "as_json", is_flag=True)
def cmd_pipeline(scene, cover, pages, endpoint_config, transcript, record, repeats, out,
                 as_json):
    """Generate an assembly graph from a manual via the four-stage pipeline."""
    if transcript is None and endpoint_config is None:
        _fail("need either --transcript or --endpoint-config", 2)
    if transcript is not None:
        client = vlm_client.TranscriptReplayClient(transcript, loop=repeats > 1)
        # replay does not read image bytes, placeholders are fine
        scene = scene or b""
        cover = cover or b""
        pages = list(pages) or [b""]
    else:
        try:
            config = vlm_client.EndpointConfig.from_file(endpoint_config)
            config.api_key()
        except (vlm_client.ClientError, ValueError, OSError, TypeError) as exc:
            _fail(str(exc), 2)
        client = vlm_client.HttpChatClient(config)
        if not (scene and cover and pages):
            _fail("--scene, --cover, and --pages are required for live runs", 2)
        pages = list(pages)
    if record:
        client = vlm_client.TranscriptRecorder(client, record)
    doc = vlm_pipeline.ManualDocument(pages=pages, cover=cover, scene_image=scene)
    try:
        result = vlm_pipeline.plan_from_manual(doc, client, repeats=repeats)
    except (vlm_pipeline.PipelineStageError, vlm_client.ClientError) as exc:
        _fail(str(exc))
    tree_text = graph_mod.to_nested_list(result.graph)
    if out:
        Path(out).write_text(tree_text + "\n")
    if as_json:
        click.echo(
            json.dumps(
                {
                    "tree": tree_text,
                    "equivalences": [list(p) for p in result.equivalences],
                    "runs": len(result.runs),
                }
            )
        )
    else:
        click.echo(tree_text)
        if result.equivalences:
            click.echo(
                "equivalences: " + ", ".join(f"{a}~{b}" for a, b in result.equivalences)
            )
        if repeats > 1:
            click.echo(f"selected modal graph from {repeats} runs")


if __name__ == "__main__":
    main()
