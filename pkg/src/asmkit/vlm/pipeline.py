"""End-to-end orchestration of the four prompt stages.

Stage outputs thread forward: part triplets -> role-refined triplets (which
also yield equivalences) -> step-by-step plan text -> nested-list tree.
Any client can drive it, including a transcript replayer, so the whole
pipeline is testable without network access.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from ..graph import HierarchicalAssemblyGraph, parse_nested_list
from .client import VlmResponse, request_fingerprint
from .parsing import (
    ParseError,
    PartTriplet,
    derive_equivalences,
    parse_step_plan,
    parse_tree_response,
    parse_triplets,
)
from .templates import render_prompt

__all__ = [
    "ManualDocument",
    "PipelineStageError",
    "PipelineResult",
    "plan_from_manual",
    "crop_manual_pages",
]


@dataclass
class ManualDocument:
    """Manual pages plus the cover sketch and the labeled pre-assembly scene."""

    pages: list
    cover: object
    scene_image: object

    def __post_init__(self):
        if not self.pages:
            raise ValueError("manual must have at least one page")


class PipelineStageError(RuntimeError):
    def __init__(self, stage: int, message: str):
        super().__init__(f"stage {stage}: {message}")
        self.stage = stage


@dataclass
class PipelineRun:
    graph: HierarchicalAssemblyGraph
    triplets: list[PartTriplet]
    equivalences: list[tuple[int, int]]
    plan_text: str
    tree_text: str


@dataclass
class PipelineResult:
    graph: HierarchicalAssemblyGraph
    equivalences: list[tuple[int, int]]
    tree_text: str
    triplets: list[PartTriplet]
    runs: list[PipelineRun] = field(default_factory=list)
    transcript: list[dict] = field(default_factory=list)


def _triplets_json(triplets: list[PartTriplet]) -> str:
    return json.dumps(
        [
            {"name": t.name, "label": list(t.label), **({"role": t.role} if t.role else {})}
            for t in triplets
        ],
        indent=2,
    )


def _run_once(doc: ManualDocument, client, transcript: list[dict],
              temperature: float, model: str) -> PipelineRun:
    def ask(stage: int, bindings: dict) -> str:
        request = render_prompt(stage, bindings, temperature=temperature, model=model)
        request.stage = stage
        response: VlmResponse = client.send(request)
        transcript.append(
            {"request": request_fingerprint(request), "response": {"text": response.text}}
        )
        return response.text

    text1 = ask(1, {"scene_image": doc.scene_image, "cover_image": doc.cover})
    try:
        triplets_1 = parse_triplets(text1)
    except ParseError as exc:
        raise PipelineStageError(1, str(exc)) from exc

    text2 = ask(
        2,
        {
            "scene_image": doc.scene_image,
            "manual_pages": doc.pages,
            "stage1_json": _triplets_json(triplets_1),
        },
    )
    try:
        triplets = parse_triplets(text2)
    except ParseError as exc:
        raise PipelineStageError(2, str(exc)) from exc
    equivalences = derive_equivalences(triplets)

    plan_text = ask(
        3,
        {
            "scene_image": doc.scene_image,
            "manual_pages": doc.pages,
            "stage2_json": _triplets_json(triplets),
        },
    )
    try:
        parse_step_plan(plan_text)
    except ParseError as exc:
        raise PipelineStageError(3, str(exc)) from exc

    text4 = ask(4, {"plan_text": plan_text})
    try:
        tree_text = parse_tree_response(text4)
        graph = parse_nested_list(tree_text, equivalences=equivalences)
    except (ParseError, ValueError) as exc:
        raise PipelineStageError(4, str(exc)) from exc
    violations = graph.validate()
    if violations:
        raise PipelineStageError(4, f"generated graph is invalid: {violations}")

    return PipelineRun(
        graph=graph,
        triplets=triplets,
        equivalences=equivalences,
        plan_text=plan_text,
        tree_text=tree_text,
    )


def plan_from_manual(
    doc: ManualDocument,
    client,
    repeats: int = 1,
    temperature: float = 0.0,
    model: str = "",
) -> PipelineResult:
    """Run prompts 1-4, threading outputs between stages.

    With ``repeats`` > 1 the full chain runs that many times and the modal
    graph (most frequent canonical form, ties to first occurrence) is
    selected.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    transcript: list[dict] = []
    runs = [_run_once(doc, client, transcript, temperature, model) for _ in range(repeats)]

    forms = [run.graph.canonical_form() for run in runs]
    counts = Counter(forms)
    best_form = max(counts, key=lambda f: (counts[f], -forms.index(f)))
    selected = runs[forms.index(best_form)]

    return PipelineResult(
        graph=selected.graph,
        equivalences=selected.equivalences,
        tree_text=selected.tree_text,
        triplets=selected.triplets,
        runs=runs,
        transcript=transcript,
    )


def save_transcript(result: PipelineResult, path) -> None:
    with open(path, "w") as f:
        for record in result.transcript:
            f.write(json.dumps(record) + "\n")


def crop_manual_pages(doc: ManualDocument, crop_boxes: list) -> ManualDocument:
    """Crop each page to its (left, upper, right, lower) pixel box.

    Produces a new document with cropped page images written next to the
    originals; boxes must lie within the image bounds.
    """
    from PIL import Image

    if len(crop_boxes) != len(doc.pages):
        raise ValueError("need one crop box per page")
    new_pages = []
    for page, box in zip(doc.pages, crop_boxes):
        page = Path(page)
        with Image.open(page) as img:
            left, upper, right, lower = box
            if left < 0 or upper < 0 or right > img.width or lower > img.height:
                raise ValueError(f"crop box {box} outside image bounds {img.size}")
            if right <= left or lower <= upper:
                raise ValueError(f"empty crop box {box}")
            out = page.with_name(f"{page.stem}_crop{page.suffix}")
            if (left, upper, right, lower) == (0, 0, img.width, img.height):
                # full-image crop: keep the original bytes untouched
                out.write_bytes(page.read_bytes())
            else:
                img.crop((left, upper, right, lower)).save(out)
        new_pages.append(out)
    return ManualDocument(pages=new_pages, cover=doc.cover, scene_image=doc.scene_image)
