"""Hierarchical assembly graphs: nested-list grammar, validation, orders.

A graph is a tree over part sets: leaves are atomic parts, each non-leaf node
is the subassembly produced by merging its children in one step, and the root
is the finished item.  An undirected relation over parts marks geometrically
equivalent (interchangeable) parts.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GraphNode",
    "HierarchicalAssemblyGraph",
    "AssemblyOrder",
    "SubassemblySpec",
    "NestedListSyntaxError",
    "NestedListSemanticError",
    "InfeasibleSampleError",
    "parse_nested_list",
    "to_nested_list",
    "graph_from_nested",
    "equivalence_classes",
    "feasible_orders",
    "count_feasible_orders",
    "is_feasible_order",
    "singlestep_baseline",
    "nearest_part_order",
    "sample_subassembly",
]


class NestedListSyntaxError(ValueError):
    """Unbalanced brackets or a non-integer token in a nested-list string."""


class NestedListSemanticError(ValueError):
    """Structurally well-formed nested list with invalid content (e.g. a
    duplicated part label)."""


class InfeasibleSampleError(RuntimeError):
    """No valid subassembly sample found within the attempt budget."""


@dataclass(frozen=True)
class GraphNode:
    id: int
    part_set: frozenset[int]
    children: tuple[int, ...] = ()
    step_index: int | None = None

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True)
class AssemblyOrder:
    """Ordered non-leaf node ids; every parent follows all its children."""

    sequence: tuple[int, ...]


@dataclass
class HierarchicalAssemblyGraph:
    nodes: dict[int, GraphNode]
    root: int
    equivalences: frozenset[frozenset[int]] = field(default_factory=frozenset)

    # -- basic accessors -------------------------------------------------

    @property
    def part_set(self) -> frozenset[int]:
        return self.nodes[self.root].part_set

    def leaves(self) -> list[GraphNode]:
        return [n for n in self.nodes.values() if n.is_leaf]

    def non_leaf_ids(self) -> list[int]:
        return [nid for nid, n in self.nodes.items() if not n.is_leaf]

    def children_of(self, nid: int) -> list[GraphNode]:
        return [self.nodes[c] for c in self.nodes[nid].children]

    def parent_map(self) -> dict[int, int]:
        parents: dict[int, int] = {}
        for nid, node in self.nodes.items():
            for c in node.children:
                parents[c] = nid
        return parents

    # -- validation ------------------------------------------------------

    def validate(self) -> list[str]:
        """Return every violated invariant; an empty list means valid."""
        violations: list[str] = []
        if self.root not in self.nodes:
            return [f"root node {self.root} missing"]

        parents: dict[int, int] = {}
        for nid, node in self.nodes.items():
            if node.id != nid:
                violations.append(f"node {nid}: key/id mismatch ({node.id})")
            for c in node.children:
                if c not in self.nodes:
                    violations.append(f"node {nid}: unknown child {c}")
                elif c in parents:
                    violations.append(f"node {c}: multiple parents ({parents[c]}, {nid})")
                else:
                    parents[c] = nid

        # reachability / single rooted tree, cycle-safe
        reached: set[int] = set()
        stack = [self.root]
        while stack:
            nid = stack.pop()
            if nid in reached:
                continue
            reached.add(nid)
            node = self.nodes.get(nid)
            if node:
                stack.extend(c for c in node.children if c in self.nodes)
        for nid in self.nodes:
            if nid not in reached:
                violations.append(f"node {nid}: unreachable from root")
        if self.root in parents:
            violations.append(f"root {self.root} has a parent")

        seen_parts: dict[int, int] = {}
        for nid in reached:
            node = self.nodes[nid]
            if node.is_leaf:
                if len(node.part_set) != 1:
                    violations.append(f"node {nid}: leaf must hold exactly one part")
                for p in node.part_set:
                    if p in seen_parts:
                        violations.append(
                            f"node {nid}: duplicate leaf part {p} (also in node {seen_parts[p]})"
                        )
                    seen_parts[p] = nid
            else:
                if len(node.children) == 1:
                    violations.append(f"node {nid}: non-leaf with one child")
                union: set[int] = set()
                ok = True
                for a, b in itertools.combinations(node.children, 2):
                    if a in self.nodes and b in self.nodes:
                        if self.nodes[a].part_set & self.nodes[b].part_set:
                            violations.append(
                                f"node {nid}: children {a} and {b} share parts"
                            )
                            ok = False
                for c in node.children:
                    if c in self.nodes:
                        union |= self.nodes[c].part_set
                if ok and union != set(node.part_set):
                    violations.append(
                        f"node {nid}: union mismatch (children cover {sorted(union)}, "
                        f"part_set {sorted(node.part_set)})"
                    )

        all_parts = self.part_set
        for pair in self.equivalences:
            for p in pair:
                if p not in all_parts:
                    violations.append(f"equivalence references unknown part {p}")
        return violations

    # -- canonical form --------------------------------------------------

    def canonical_form(self, relabel: dict[int, int] | None = None):
        """Nested-tuple canonical form: children sorted by (min part, form).

        ``relabel`` optionally maps part ids before canonicalization, which is
        how equivalence-aware comparisons are implemented.
        """

        def rec(nid: int):
            node = self.nodes[nid]
            if node.is_leaf:
                (p,) = node.part_set
                return relabel[p] if relabel else p
            subs = [rec(c) for c in node.children]
            subs.sort(key=_form_key)
            return tuple(subs)

        return rec(self.root)


def _form_key(form):
    if isinstance(form, int):
        return (form, 0, ())
    return (_min_part(form), 1, tuple(_form_key(s) for s in form))


def _min_part(form) -> int:
    if isinstance(form, int):
        return form
    return min(_min_part(s) for s in form)


# ---------------------------------------------------------------------------
# nested-list grammar
# ---------------------------------------------------------------------------


def _tokenize(text: str):
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace() or ch == ",":
            i += 1
        elif ch in "[]":
            yield ch
            i += 1
        elif ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            yield int(text[i:j])
            i = j
        else:
            raise NestedListSyntaxError(f"unexpected character {ch!r} at position {i}")


def _parse_nested(text: str):
    stack: list[list] = []
    result = None
    for tok in _tokenize(text):
        if tok == "[":
            stack.append([])
        elif tok == "]":
            if not stack:
                raise NestedListSyntaxError("unbalanced ']'")
            done = stack.pop()
            if stack:
                stack[-1].append(done)
            elif result is None:
                result = done
            else:
                raise NestedListSyntaxError("multiple top-level lists")
        else:
            if not stack:
                raise NestedListSyntaxError("integer outside brackets")
            stack[-1].append(tok)
    if stack:
        raise NestedListSyntaxError("unbalanced '['")
    if result is None:
        raise NestedListSyntaxError("no list found")
    return result


def graph_from_nested(nested, equivalences=()) -> HierarchicalAssemblyGraph:
    """Build a graph from a parsed nested list (lists = steps, ints = parts)."""
    nodes: dict[int, GraphNode] = {}
    counter = itertools.count()
    seen: set[int] = set()

    def build(item) -> int:
        nid = next(counter)
        if isinstance(item, int):
            if item in seen:
                raise NestedListSemanticError(f"duplicate part label {item}")
            seen.add(item)
            nodes[nid] = GraphNode(nid, frozenset([item]))
            return nid
        if not isinstance(item, list):
            raise NestedListSyntaxError(f"unexpected element {item!r}")
        child_ids = [build(sub) for sub in item]
        parts = frozenset().union(*(nodes[c].part_set for c in child_ids))
        nodes[nid] = GraphNode(nid, parts, tuple(child_ids))
        return nid

    # reserve id 0 for the root built last? build() assigns ids pre-order,
    # so the first call is the root.
    root = build(nested)
    eq = frozenset(frozenset(p) for p in equivalences)
    return HierarchicalAssemblyGraph(nodes=nodes, root=root, equivalences=eq)


def parse_nested_list(text: str, equivalences=()) -> HierarchicalAssemblyGraph:
    """Parse a bracketed nested list of integers into an assembly graph."""
    nested = _parse_nested(text)
    return graph_from_nested(nested, equivalences)


def to_nested_list(graph: HierarchicalAssemblyGraph) -> str:
    """Serialize; children emitted in ascending minimum-part order."""
    violations = graph.validate()
    if violations:
        raise ValueError(f"cannot serialize invalid graph: {violations}")

    def rec(nid: int) -> str:
        node = graph.nodes[nid]
        if node.is_leaf:
            (p,) = node.part_set
            return str(p)
        children = sorted(node.children, key=lambda c: min(graph.nodes[c].part_set))
        return "[" + ",".join(rec(c) for c in children) + "]"

    return rec(graph.root)


# ---------------------------------------------------------------------------
# equivalences
# ---------------------------------------------------------------------------


def equivalence_classes(pairs, parts=None) -> list[frozenset[int]]:
    """Expand pairwise equivalences into classes via transitive closure.

    Returns only classes of size >= 2, sorted by minimum member.
    """
    parent: dict[int, int] = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for pair in pairs:
        a, b = tuple(pair)
        parent[find(a)] = find(b)
    if parts:
        for p in parts:
            find(p)
    groups: dict[int, set[int]] = {}
    for x in parent:
        groups.setdefault(find(x), set()).add(x)
    classes = [frozenset(g) for g in groups.values() if len(g) >= 2]
    return sorted(classes, key=min)


# ---------------------------------------------------------------------------
# assembly orders
# ---------------------------------------------------------------------------


def _nonleaf_children(graph: HierarchicalAssemblyGraph) -> dict[int, list[int]]:
    return {
        nid: [c for c in graph.nodes[nid].children if not graph.nodes[c].is_leaf]
        for nid in graph.non_leaf_ids()
    }


def count_feasible_orders(graph: HierarchicalAssemblyGraph) -> int:
    """Exact linear-extension count of the non-leaf forest (hook formula)."""
    children = _nonleaf_children(graph)

    sizes: dict[int, int] = {}

    def size(nid: int) -> int:
        if nid not in sizes:
            sizes[nid] = 1 + sum(size(c) for c in children[nid])
        return sizes[nid]

    total = size(graph.root) if not graph.nodes[graph.root].is_leaf else 0
    if total == 0:
        return 0
    denom = 1
    for nid in children:
        denom *= size(nid)
    return math.factorial(total) // denom


def feasible_orders(graph: HierarchicalAssemblyGraph, limit: int = 1000):
    """Enumerate up to ``limit`` feasible orders, deterministically.

    Returns (orders, total_count); total_count is the exact number of
    feasible orders even when truncated.
    """
    children = _nonleaf_children(graph)
    pending = {nid: len(cs) for nid, cs in children.items()}
    parents: dict[int, int] = {}
    for nid, cs in children.items():
        for c in cs:
            parents[c] = nid

    orders: list[AssemblyOrder] = []
    sequence: list[int] = []
    available = sorted(nid for nid, k in pending.items() if k == 0)

    def rec(available: list[int]):
        if len(orders) >= limit:
            return
        if len(sequence) == len(pending):
            orders.append(AssemblyOrder(tuple(sequence)))
            return
        for nid in list(available):
            sequence.append(nid)
            nxt = [x for x in available if x != nid]
            parent = parents.get(nid)
            if parent is not None:
                pending[parent] -= 1
                if pending[parent] == 0:
                    nxt = sorted(nxt + [parent])
            rec(nxt)
            if parent is not None:
                pending[parent] += 1
            sequence.pop()
            if len(orders) >= limit:
                return

    if pending:
        rec(available)
    return orders, count_feasible_orders(graph)


def is_feasible_order(graph: HierarchicalAssemblyGraph, order: AssemblyOrder) -> bool:
    seq = order.sequence if isinstance(order, AssemblyOrder) else tuple(order)
    for nid in seq:
        if nid not in graph.nodes:
            raise KeyError(f"order references unknown node {nid}")
    non_leaves = set(graph.non_leaf_ids())
    if set(seq) != non_leaves or len(seq) != len(non_leaves):
        return False
    pos = {nid: i for i, nid in enumerate(seq)}
    for nid in non_leaves:
        for c in graph.nodes[nid].children:
            if not graph.nodes[c].is_leaf and pos[c] > pos[nid]:
                return False
    return True


# ---------------------------------------------------------------------------
# baselines
# ---------------------------------------------------------------------------


def singlestep_baseline(parts) -> HierarchicalAssemblyGraph:
    """Flat one-level tree: the root directly holds every part as a leaf."""
    parts = sorted(set(parts))
    if len(parts) < 2:
        raise ValueError("singlestep baseline needs at least 2 parts")
    return graph_from_nested(list(parts))


def nearest_part_order(
    parts: dict[int, tuple],
    seed_part: int | None = None,
    rng: np.random.Generator | None = None,
) -> list[int]:
    """Greedy assembly order by centroid proximity.

    ``parts`` maps part id -> (cloud, pose); distances are computed between
    posed centroids.  The seed defaults to the lowest part id (pass ``rng``
    for a seeded-random start).  Ties go to the lower part id.
    """
    if not parts:
        raise ValueError("nearest_part_order needs at least one part")
    centroids = {}
    for pid, (cloud, pose) in parts.items():
        pts = cloud.points if hasattr(cloud, "points") else np.asarray(cloud, dtype=float)
        centroids[pid] = pose.apply(pts).mean(axis=0)

    remaining = sorted(centroids)
    if seed_part is None:
        seed = remaining[0] if rng is None else remaining[int(rng.integers(len(remaining)))]
    else:
        if seed_part not in centroids:
            raise KeyError(f"unknown seed part {seed_part}")
        seed = seed_part
    order = [seed]
    remaining.remove(seed)
    while remaining:
        best = min(
            remaining,
            key=lambda pid: (
                min(float(np.linalg.norm(centroids[pid] - centroids[a])) for a in order),
                pid,
            ),
        )
        order.append(best)
        remaining.remove(best)
    return order


# ---------------------------------------------------------------------------
# subassembly sampling
# ---------------------------------------------------------------------------


@dataclass
class SubassemblySpec:
    """A connected part subset partitioned into connected groups."""

    selected: frozenset[int]
    grouping: tuple[frozenset[int], ...]
    connectivity: tuple[tuple[int, int], ...]

    def sizes(self) -> tuple[int, ...]:
        return tuple(len(g) for g in self.grouping)


def _adjacency(connectivity) -> dict[int, set[int]]:
    adj: dict[int, set[int]] = {}
    for a, b in connectivity:
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    return adj


def _is_connected(members: set[int], adj: dict[int, set[int]]) -> bool:
    if not members:
        return False
    start = next(iter(members))
    seen = {start}
    stack = [start]
    while stack:
        x = stack.pop()
        for y in adj.get(x, ()):
            if y in members and y not in seen:
                seen.add(y)
                stack.append(y)
    return seen == members


def sample_subassembly(
    connectivity, m: int, n: int, rng_seed: int = 0, max_attempts: int = 10_000
) -> SubassemblySpec:
    """Sample m connected parts and partition them into n connected groups.

    Rejection sampling: grow a random connected subset, then cut a random
    spanning tree of it into n components.  Raises InfeasibleSampleError when
    no valid sample is found within the attempt budget.
    """
    adj = _adjacency(connectivity)
    all_parts = sorted(adj)
    if m < 1 or n < 1 or n > m:
        raise ValueError(f"need 1 <= n <= m, got m={m} n={n}")
    if m > len(all_parts):
        raise InfeasibleSampleError(f"only {len(all_parts)} parts, cannot select {m}")
    rng = np.random.default_rng(rng_seed)

    for _ in range(max_attempts):
        # grow a random connected subset of size m
        start = all_parts[int(rng.integers(len(all_parts)))]
        members = {start}
        frontier = sorted(adj[start])
        while len(members) < m and frontier:
            pick = frontier[int(rng.integers(len(frontier)))]
            members.add(pick)
            frontier = sorted(
                {y for x in members for y in adj[x] if y not in members}
            )
        if len(members) < m:
            continue

        # random spanning tree (random-order BFS), then cut n-1 edges
        tree_edges: list[tuple[int, int]] = []
        seen = {start}
        frontier_edges = [(start, y) for y in sorted(adj[start]) if y in members]
        while frontier_edges:
            idx = int(rng.integers(len(frontier_edges)))
            a, b = frontier_edges.pop(idx)
            if b in seen:
                continue
            seen.add(b)
            tree_edges.append((a, b))
            frontier_edges.extend((b, y) for y in sorted(adj[b]) if y in members and y not in seen)
        if len(tree_edges) != m - 1:
            continue
        cut = rng.choice(len(tree_edges), size=n - 1, replace=False) if n > 1 else []
        kept = [e for i, e in enumerate(tree_edges) if i not in set(np.atleast_1d(cut).tolist())]
        group_adj = _adjacency(kept)
        groups: list[frozenset[int]] = []
        unassigned = set(members)
        while unassigned:
            seed_node = min(unassigned)
            comp = {seed_node}
            stack = [seed_node]
            while stack:
                x = stack.pop()
                for y in group_adj.get(x, ()):
                    if y in comp or y not in unassigned:
                        continue
                    comp.add(y)
                    stack.append(y)
            groups.append(frozenset(comp))
            unassigned -= comp
        if len(groups) != n:
            continue
        if not all(_is_connected(set(g), adj) for g in groups):
            continue
        groups.sort(key=min)
        return SubassemblySpec(
            selected=frozenset(members),
            grouping=tuple(groups),
            connectivity=tuple((a, b) for a, b in connectivity),
        )
    raise InfeasibleSampleError(
        f"no valid (m={m}, n={n}) subassembly found in {max_attempts} attempts"
    )
