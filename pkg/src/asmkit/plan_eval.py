"""Scoring of predicted assembly graphs against ground truth.

Equivalent parts are interchangeable: a prediction counts as correct if any
relabeling of its leaves by permutations within equivalence classes matches
the ground truth.  Matching comes in three strengths: exact (whole-tree),
simple (per-node leaf sets), and hard (leaf sets plus child partition).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from .graph import HierarchicalAssemblyGraph, equivalence_classes

__all__ = [
    "MatchScores",
    "EvaluationReport",
    "PermutationCapExceeded",
    "DEFAULT_PERMUTATION_CAP",
    "BUCKETS",
    "exact_match",
    "node_match_scores",
    "batch_evaluate",
    "format_report_table",
]

DEFAULT_PERMUTATION_CAP = 40_320  # 8!

BUCKETS = (("2-4", 2, 4), ("5-6", 5, 6), ("7-8", 7, 8), ("9+", 9, None))


class PermutationCapExceeded(RuntimeError):
    """The equivalence-class permutation space exceeds the configured cap.

    Reported rather than silently failed; such items need manual handling.
    """


@dataclass(frozen=True)
class MatchScores:
    precision: float
    recall: float
    f1: float
    exact: bool

    @staticmethod
    def from_counts(matched_pred: int, total_pred: int, matched_gt: int, total_gt: int,
                    exact: bool) -> "MatchScores":
        p = matched_pred / total_pred if total_pred else 0.0
        r = matched_gt / total_gt if total_gt else 0.0
        f1 = 2 * p * r / (p + r) if (p + r) > 0 else 0.0
        return MatchScores(p, r, f1, exact)


def _check_part_sets(pred: HierarchicalAssemblyGraph, gt: HierarchicalAssemblyGraph):
    if pred.part_set != gt.part_set:
        raise ValueError(
            f"part-set mismatch: pred {sorted(pred.part_set)} vs gt {sorted(gt.part_set)}"
        )


def _classes(pred, gt, equivalences):
    if equivalences is None:
        equivalences = set(pred.equivalences) | set(gt.equivalences)
    classes = []
    for entry in equivalences:
        entry = frozenset(entry)
        if len(entry) == 2:
            classes.append(tuple(entry))
        else:
            # already a class: expand to pairs
            classes.extend(itertools.combinations(sorted(entry), 2))
    return equivalence_classes(classes)


def _iter_relabelings(classes, cap: int):
    """Yield part-relabeling dicts for every within-class permutation."""
    total = 1
    for cls in classes:
        total *= math.factorial(len(cls))
    if total > cap:
        raise PermutationCapExceeded(
            f"{total} within-class permutations exceed cap {cap}"
        )
    ordered = [sorted(c) for c in classes]
    perm_sets = [list(itertools.permutations(c)) for c in ordered]
    for combo in itertools.product(*perm_sets):
        relabel: dict[int, int] = {}
        for src, dst in zip(ordered, combo):
            relabel.update(zip(src, dst))
        yield relabel


def exact_match(
    pred: HierarchicalAssemblyGraph,
    gt: HierarchicalAssemblyGraph,
    equivalences=None,
    permutation_cap: int = DEFAULT_PERMUTATION_CAP,
) -> bool:
    """Whole-tree match modulo within-class leaf permutations.

    Fast path: relabel both trees by equivalence-class representative and
    compare canonical forms; a mismatch there rules out every permutation.
    Otherwise fall back to bounded explicit permutation enumeration.
    """
    _check_part_sets(pred, gt)
    classes = _classes(pred, gt, equivalences)
    if not classes:
        return pred.canonical_form() == gt.canonical_form()

    # class-quotient pre-check: map each part to its class minimum
    quotient = {p: min(c) for c in classes for p in c}
    full_quotient = {p: quotient.get(p, p) for p in pred.part_set}
    if pred.canonical_form(full_quotient) != gt.canonical_form(full_quotient):
        return False

    gt_form = gt.canonical_form()
    for relabel in _iter_relabelings(classes, permutation_cap):
        full = {p: relabel.get(p, p) for p in pred.part_set}
        if pred.canonical_form(full) == gt_form:
            return True
    return False


def _node_signatures(graph: HierarchicalAssemblyGraph, relabel: dict[int, int]):
    """(leaf set, children leaf-set multiset) per non-leaf node."""
    sigs = []
    for nid in graph.non_leaf_ids():
        node = graph.nodes[nid]
        leaf_set = frozenset(relabel.get(p, p) for p in node.part_set)
        child_sets = sorted(
            (frozenset(relabel.get(p, p) for p in graph.nodes[c].part_set)
             for c in node.children),
            key=lambda s: (min(s), sorted(s)),
        )
        sigs.append((leaf_set, tuple(child_sets)))
    return sigs


def _score_once(pred_sigs, gt_sigs, mode: str):
    if mode == "simple":
        pred_keys = [s[0] for s in pred_sigs]
        gt_keys = [s[0] for s in gt_sigs]
    elif mode == "hard":
        pred_keys = pred_sigs
        gt_keys = gt_sigs
    else:
        raise ValueError(f"unknown mode {mode!r}")
    gt_set = set(gt_keys)
    pred_set = set(pred_keys)
    matched_pred = sum(1 for k in pred_keys if k in gt_set)
    matched_gt = sum(1 for k in gt_keys if k in pred_set)
    return matched_pred, matched_gt


def node_match_scores(
    pred: HierarchicalAssemblyGraph,
    gt: HierarchicalAssemblyGraph,
    equivalences=None,
    mode: str = "simple",
    permutation_cap: int = DEFAULT_PERMUTATION_CAP,
) -> MatchScores:
    """Precision/recall/F1 over non-leaf nodes, best within-class permutation.

    simple: a node matches when its leaf part set appears in the other tree.
    hard: additionally the multiset of children part sets must agree.
    """
    _check_part_sets(pred, gt)
    classes = _classes(pred, gt, equivalences)
    gt_sigs = _node_signatures(gt, {})
    total_pred = len(pred.non_leaf_ids())
    total_gt = len(gt_sigs)

    best = (-1.0, 0, 0)
    relabelings = [{}] if not classes else _iter_relabelings(classes, permutation_cap)
    for relabel in relabelings:
        pred_sigs = _node_signatures(pred, relabel)
        mp, mg = _score_once(pred_sigs, gt_sigs, mode)
        p = mp / total_pred if total_pred else 0.0
        r = mg / total_gt if total_gt else 0.0
        f1 = 2 * p * r / (p + r) if (p + r) > 0 else 0.0
        if f1 > best[0]:
            best = (f1, mp, mg)
    is_exact = exact_match(pred, gt, equivalences, permutation_cap)
    return MatchScores.from_counts(best[1], total_pred, best[2], total_gt, is_exact)


@dataclass
class EvaluationReport:
    per_item: dict = field(default_factory=dict)
    buckets: dict = field(default_factory=dict)
    averages: dict = field(default_factory=dict)
    undecided: list = field(default_factory=list)
    errors: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "per_item": {
                str(k): {
                    "part_count": v["part_count"],
                    "exact": v["exact"],
                    "simple": vars(v["simple"]),
                    "hard": vars(v["hard"]),
                }
                for k, v in self.per_item.items()
            },
            "buckets": self.buckets,
            "averages": self.averages,
            "undecided": [str(k) for k in self.undecided],
            "errors": {str(k): v for k, v in self.errors.items()},
        }


def _bucket_of(part_count: int) -> str:
    for name, lo, hi in BUCKETS:
        if part_count >= lo and (hi is None or part_count <= hi):
            return name
    return BUCKETS[0][0]


def batch_evaluate(dataset, permutation_cap: int = DEFAULT_PERMUTATION_CAP) -> EvaluationReport:
    """Evaluate (item_key, pred, gt, equivalences) tuples into a bucketed report.

    Item-level errors and permutation-cap overruns are recorded in the report
    rather than raised; bucket success rate = exact matches / bucket size.
    """
    report = EvaluationReport()
    bucket_counts: dict[str, list[int]] = {name: [0, 0] for name, _, _ in BUCKETS}
    for item in sorted(dataset, key=lambda it: str(it[0])):
        key, pred, gt, equivalences = item
        part_count = len(gt.part_set)
        try:
            simple = node_match_scores(pred, gt, equivalences, "simple", permutation_cap)
            hard = node_match_scores(pred, gt, equivalences, "hard", permutation_cap)
        except PermutationCapExceeded:
            report.undecided.append(key)
            continue
        except Exception as exc:  # recorded, not raised
            report.errors[key] = str(exc)
            continue
        report.per_item[key] = {
            "part_count": part_count,
            "exact": simple.exact,
            "simple": simple,
            "hard": hard,
        }
        bucket = _bucket_of(part_count)
        bucket_counts[bucket][1] += 1
        if simple.exact:
            bucket_counts[bucket][0] += 1

    for name, (n_exact, n_total) in bucket_counts.items():
        report.buckets[name] = {
            "count": n_total,
            "exact": n_exact,
            "success_rate": (100.0 * n_exact / n_total) if n_total else None,
        }
    items = list(report.per_item.values())
    if items:
        report.averages = {
            "success_rate": 100.0 * sum(v["exact"] for v in items) / len(items),
            "simple_f1": sum(v["simple"].f1 for v in items) / len(items),
            "hard_f1": sum(v["hard"].f1 for v in items) / len(items),
        }
    return report


def format_report_table(report: EvaluationReport) -> str:
    """Bucketed success-rate table, one decimal place per cell."""
    names = [name for name, _, _ in BUCKETS]
    header = "Number of Parts  " + "  ".join(f"{n:>6}" for n in names) + "  Average"
    cells = []
    for n in names:
        rate = report.buckets.get(n, {}).get("success_rate")
        cells.append(f"{rate:>6.1f}" if rate is not None else f"{'-':>6}")
    avg = report.averages.get("success_rate")
    avg_cell = f"{avg:>7.1f}" if avg is not None else f"{'-':>7}"
    row = "Success Rate     " + "  ".join(cells) + avg_cell
    counts = "Furniture Count  " + "  ".join(
        f"{report.buckets.get(n, {}).get('count', 0):>6}" for n in names
    )
    lines = [header, row, counts]
    if report.undecided:
        lines.append(f"Undecided by permutation cap: {len(report.undecided)}")
    if report.errors:
        lines.append(f"Errors: {len(report.errors)}")
    return "\n".join(lines)
