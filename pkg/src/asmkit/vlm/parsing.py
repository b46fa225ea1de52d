"""Parsers for the structured outputs of each pipeline stage.

Model responses are messy: JSON may be fenced, nested lists may be wrapped
in prose.  These parsers strip decoration, validate, and report failures
with enough context to tag the offending stage.
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field

__all__ = [
    "ParseError",
    "PartTriplet",
    "StepAssignment",
    "parse_triplets",
    "derive_equivalences",
    "parse_step_plan",
    "parse_tree_response",
]


class ParseError(ValueError):
    pass


@dataclass(frozen=True)
class PartTriplet:
    """One labeled part: short name, numeric label(s), functional role."""

    name: str
    label: tuple[int, ...]
    role: str = ""

    def __post_init__(self):
        if not self.name:
            raise ValueError("triplet name must be non-empty")
        if not self.label:
            raise ValueError("triplet label list must be non-empty")


@dataclass(frozen=True)
class StepAssignment:
    """Parts (and earlier-step subassembly references) used in one step."""

    step: int
    parts: tuple[int, ...]
    subassembly_refs: tuple[int, ...] = ()


_FENCE_RE = re.compile(r"(?:```|''')\s*(?:python|json)?\s*\n?(.*?)(?:```|''')", re.DOTALL)


def _strip_fences(text: str) -> list[str]:
    blocks = [m.group(1) for m in _FENCE_RE.finditer(text)]
    return blocks if blocks else [text]


def _find_json_array(text: str):
    for candidate in _strip_fences(text):
        start = candidate.find("[")
        if start < 0:
            continue
        depth = 0
        for i in range(start, len(candidate)):
            if candidate[i] == "[":
                depth += 1
            elif candidate[i] == "]":
                depth -= 1
                if depth == 0:
                    snippet = candidate[start : i + 1]
                    try:
                        return json.loads(snippet)
                    except json.JSONDecodeError:
                        break
    raise ParseError("no JSON array found in response")


def _normalize_labels(value) -> tuple[int, ...]:
    if isinstance(value, int):
        return (value,)
    if isinstance(value, str):
        return (int(value),)
    if isinstance(value, list):
        return tuple(int(v) for v in value)
    raise ValueError(f"unrecognized label value {value!r}")


def parse_triplets(text: str) -> list[PartTriplet]:
    """Parse a (possibly fenced) JSON array of part descriptions.

    Accepts both "label" and "number" as the label key; labels normalize to
    integer tuples.
    """
    data = _find_json_array(text)
    triplets: list[PartTriplet] = []
    for i, entry in enumerate(data):
        if not isinstance(entry, dict):
            raise ParseError(f"entry {i}: expected an object, got {type(entry).__name__}")
        try:
            name = str(entry["name"]).strip()
            raw_label = entry.get("label", entry.get("number"))
            if raw_label is None:
                raise KeyError("label")
            label = _normalize_labels(raw_label)
            role = str(entry.get("role", entry.get("explanation", ""))).strip()
            triplets.append(PartTriplet(name=name, label=label, role=role))
        except (KeyError, ValueError, TypeError) as exc:
            raise ParseError(f"entry {i}: malformed triplet ({exc})") from exc
    return triplets


def _normalize_text(s: str) -> str:
    return " ".join(s.lower().split())


def derive_equivalences(triplets: list[PartTriplet]) -> list[tuple[int, int]]:
    """Parts whose triplets differ only by label are pairwise equivalent.

    Keyed on (normalized name, normalized role); returns sorted pairs.
    """
    groups: dict[tuple[str, str], list[int]] = {}
    for t in triplets:
        key = (_normalize_text(t.name), _normalize_text(t.role))
        for part in t.label:
            groups.setdefault(key, []).append(part)
    pairs: list[tuple[int, int]] = []
    for members in groups.values():
        members = sorted(set(members))
        pairs.extend(itertools.combinations(members, 2))
    return sorted(pairs)


_STEP_RE = re.compile(r"^#{2,4}\s*Step\s+(\d+)\b.*$", re.MULTILINE)
_PARTS_LINE_RE = re.compile(r"\*\*Parts\s+(?:Needed|Involved):?\*\*:?(.*)$", re.MULTILINE)
_SUBASSEMBLY_RE = re.compile(r"subassembl\w*\s+from\s+Step\s+(\d+)", re.IGNORECASE)
_NUMBER_GROUP_RE = re.compile(r"\(([^()]*\d[^()]*)\)")


def parse_step_plan(text: str) -> list[StepAssignment]:
    """Parse a "### Step k:" markdown plan into step assignments.

    Part ids are the parenthesized integers on each step's parts line;
    references to earlier subassemblies are recorded separately.
    """
    matches = list(_STEP_RE.finditer(text))
    if not matches:
        raise ParseError("no '### Step k' sections found")
    assignments: list[StepAssignment] = []
    for i, m in enumerate(matches):
        body_end = matches[i + 1].start() if i + 1 < len(matches) else len(text)
        body = text[m.start() : body_end]
        step_no = int(m.group(1))
        parts_m = _PARTS_LINE_RE.search(body)
        scope = parts_m.group(1) if parts_m else body
        parts: list[int] = []
        for group in _NUMBER_GROUP_RE.finditer(scope):
            for token in re.findall(r"\d+", group.group(1)):
                parts.append(int(token))
        refs = tuple(int(r) for r in _SUBASSEMBLY_RE.findall(scope))
        if not parts and not refs:
            raise ParseError(f"step {step_no}: no parts found")
        assignments.append(StepAssignment(step=step_no, parts=tuple(parts),
                                          subassembly_refs=refs))
    numbers = [a.step for a in assignments]
    if numbers != list(range(1, len(numbers) + 1)):
        raise ParseError(f"non-contiguous step numbering: {numbers}")
    for a in assignments:
        for r in a.subassembly_refs:
            if r >= a.step or r < 1:
                raise ParseError(f"step {a.step}: dangling subassembly reference to step {r}")
    return assignments


_BRACKET_CANDIDATE_RE = re.compile(r"\[[0-9,\s\[\]]*\]")


def parse_tree_response(text: str) -> str:
    """Extract the nested-list-of-integers string from a response.

    Fenced blocks are preferred; ambiguity (multiple distinct candidates)
    and absence are both errors.
    """
    candidates: list[str] = []
    for block in _strip_fences(text):
        for m in _BRACKET_CANDIDATE_RE.finditer(block):
            snippet = m.group(0)
            # must be balanced and contain at least one digit
            if snippet.count("[") == snippet.count("]") and re.search(r"\d", snippet):
                candidates.append(re.sub(r"\s+", "", snippet))
    unique = sorted(set(candidates))
    if not unique:
        raise ParseError("no nested list found in response")
    if len(unique) > 1:
        raise ParseError(f"ambiguous response: {len(unique)} distinct nested lists found")
    return unique[0]
