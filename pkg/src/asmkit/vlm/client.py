"""Chat-with-images clients: a generic HTTP endpoint client, a transcript
recorder, and a replay client for deterministic tests.

Transcripts are JSON-lines, one record per request/response.  Requests are
stored as content hashes (prompt sha256 + per-image sha256) with the image
bytes in an optional sidecar blob store, keeping fixtures small.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import httpx

__all__ = [
    "VlmRequest",
    "VlmResponse",
    "EndpointConfig",
    "ClientError",
    "HttpChatClient",
    "TranscriptReplayClient",
    "TranscriptRecorder",
]


class ClientError(RuntimeError):
    pass


@dataclass
class VlmRequest:
    images: list  # file paths or raw bytes, in prompt order
    text: str
    temperature: float = 0.0
    model: str = ""
    stage: int | None = None


@dataclass
class VlmResponse:
    text: str
    usage: dict = field(default_factory=dict)
    latency: float = 0.0


def _image_bytes(ref) -> bytes:
    if isinstance(ref, bytes):
        return ref
    return Path(ref).read_bytes()


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def request_fingerprint(request: VlmRequest) -> dict:
    return {
        "text_sha256": _sha256(request.text.encode()),
        "image_sha256": [_sha256(_image_bytes(img)) for img in request.images],
        "temperature": request.temperature,
        "model": request.model,
        "stage": request.stage,
    }


@dataclass
class EndpointConfig:
    base_url: str
    model: str
    api_key_env: str = "VLM_API_KEY"
    temperature: float = 0.0
    timeout: float = 120.0
    max_retries: int = 3

    @staticmethod
    def from_file(path) -> "EndpointConfig":
        with open(path) as f:
            data = json.load(f)
        return EndpointConfig(**data)

    def api_key(self) -> str:
        key = os.environ.get(self.api_key_env, "")
        if not key:
            raise ClientError(f"API key environment variable {self.api_key_env} not set")
        return key


class HttpChatClient:
    """Generic chat-with-images endpoint: base64 image parts + text part."""

    def __init__(self, config: EndpointConfig):
        self.config = config

    def _payload(self, request: VlmRequest) -> dict:
        content = []
        for img in request.images:
            content.append(
                {
                    "type": "image",
                    "image_base64": base64.b64encode(_image_bytes(img)).decode(),
                }
            )
        content.append({"type": "text", "text": request.text})
        return {
            "model": request.model or self.config.model,
            "temperature": request.temperature,
            "messages": [{"role": "user", "content": content}],
        }

    def send(self, request: VlmRequest) -> VlmResponse:
        payload = self._payload(request)
        headers = {"Authorization": f"Bearer {self.config.api_key()}"}
        last_exc: Exception | None = None
        for attempt in range(self.config.max_retries):
            started = time.monotonic()
            try:
                resp = httpx.post(
                    self.config.base_url,
                    json=payload,
                    headers=headers,
                    timeout=self.config.timeout,
                )
                resp.raise_for_status()
                body = resp.json()
                return VlmResponse(
                    text=body["text"] if "text" in body else body["choices"][0]["message"]["content"],
                    usage=body.get("usage", {}),
                    latency=time.monotonic() - started,
                )
            except (httpx.HTTPError, KeyError, ValueError) as exc:
                last_exc = exc
                time.sleep(min(2**attempt, 8))
        raise ClientError(f"endpoint failed after {self.config.max_retries} attempts: {last_exc}")


class TranscriptRecorder:
    """Wraps a client; persists each exchange as one JSONL record.

    Image bytes go to a sidecar blob directory keyed by hash.
    """

    def __init__(self, inner, transcript_path, blob_dir=None):
        self.inner = inner
        self.transcript_path = Path(transcript_path)
        self.blob_dir = Path(blob_dir) if blob_dir else None
        if self.blob_dir:
            self.blob_dir.mkdir(parents=True, exist_ok=True)

    def send(self, request: VlmRequest) -> VlmResponse:
        response = self.inner.send(request)
        record = {
            "request": request_fingerprint(request),
            "response": {
                "text": response.text,
                "usage": response.usage,
                "latency": response.latency,
            },
        }
        if self.blob_dir:
            for img in request.images:
                data = _image_bytes(img)
                (self.blob_dir / _sha256(data)).write_bytes(data)
        with open(self.transcript_path, "a") as f:
            f.write(json.dumps(record) + "\n")
        return response


class TranscriptReplayClient:
    """Replays a recorded transcript in order; no network involved.

    When ``strict`` is set, each request's stage must match the recorded one.
    """

    def __init__(self, transcript_path, strict: bool = True, loop: bool = False):
        self.records = []
        with open(transcript_path) as f:
            for line in f:
                line = line.strip()
                if line:
                    self.records.append(json.loads(line))
        if not self.records:
            raise ClientError(f"empty transcript: {transcript_path}")
        self.cursor = 0
        self.strict = strict
        self.loop = loop

    def send(self, request: VlmRequest) -> VlmResponse:
        if self.cursor >= len(self.records):
            if not self.loop:
                raise ClientError("transcript exhausted")
            self.cursor = 0
        record = self.records[self.cursor]
        self.cursor += 1
        recorded_stage = record.get("request", {}).get("stage")
        if self.strict and recorded_stage is not None and request.stage is not None:
            if recorded_stage != request.stage:
                raise ClientError(
                    f"transcript stage mismatch: recorded {recorded_stage}, "
                    f"requested {request.stage}"
                )
        resp = record["response"]
        return VlmResponse(
            text=resp["text"], usage=resp.get("usage", {}), latency=resp.get("latency", 0.0)
        )
