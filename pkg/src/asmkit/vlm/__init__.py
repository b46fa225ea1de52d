"""Four-stage VLM pipeline: associate labeled parts with the manual, derive
part equivalences, extract a step-by-step plan, and convert it into a
hierarchical assembly graph.  Fully replayable from recorded transcripts."""

from .templates import render_prompt, TEMPLATES
from .parsing import (
    PartTriplet,
    StepAssignment,
    ParseError,
    parse_triplets,
    derive_equivalences,
    parse_step_plan,
    parse_tree_response,
)
from .client import (
    ClientError,
    VlmRequest,
    VlmResponse,
    EndpointConfig,
    HttpChatClient,
    TranscriptReplayClient,
    TranscriptRecorder,
    request_fingerprint,
)
from .pipeline import ManualDocument, PipelineResult, PipelineStageError, plan_from_manual, crop_manual_pages

__all__ = [
    "render_prompt",
    "TEMPLATES",
    "PartTriplet",
    "StepAssignment",
    "ParseError",
    "parse_triplets",
    "derive_equivalences",
    "parse_step_plan",
    "parse_tree_response",
    "ClientError",
    "VlmRequest",
    "VlmResponse",
    "EndpointConfig",
    "HttpChatClient",
    "TranscriptReplayClient",
    "TranscriptRecorder",
    "request_fingerprint",
    "ManualDocument",
    "PipelineResult",
    "PipelineStageError",
    "plan_from_manual",
    "crop_manual_pages",
]
