"""LLM client contract plus deterministic mock implementations.

The test suite and all offline evaluation paths use the mocks; the live
HTTP client is configured from the environment and is never exercised by
tests.  Live sessions can be recorded as transcript files (JSON lines of
``{"digest": ..., "response": ...}``) which the replay client consumes,
keyed by a digest of the canonically serialized request.
"""

from __future__ import annotations

import hashlib
import json
import os
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from .errors import UnreadableSource


@dataclass(frozen=True)
class ImageAttachment:
    role: str  # "generated" | "reference"
    data: bytes
    media_type: str = "image/png"


@dataclass(frozen=True)
class ChatMessage:
    role: str  # "user" | "assistant"
    content: str


@dataclass(frozen=True)
class ChatRequest:
    system_prompt: str
    user_prompt: str
    images: tuple[ImageAttachment, ...] = ()
    history: tuple[ChatMessage, ...] = ()
    temperature: float = 0.0


def request_digest(request: ChatRequest) -> str:
    """Stable content hash used to correlate requests with canned responses."""
    payload = {
        "system": request.system_prompt,
        "user": request.user_prompt,
        "history": [[m.role, m.content] for m in request.history],
        "images": [[img.role, img.media_type, hashlib.sha256(img.data).hexdigest()]
                   for img in request.images],
        "temperature": request.temperature,
    }
    canonical = json.dumps(payload, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class LLMClient(Protocol):
    def send(self, request: ChatRequest) -> str: ...


class ScriptExhausted(RuntimeError):
    """A scripted client ran out of canned responses."""


@dataclass
class ScriptedClient:
    """Returns canned responses in order; records every request it saw."""

    responses: list[str]
    requests: list[ChatRequest] = field(default_factory=list)

    def send(self, request: ChatRequest) -> str:
        self.requests.append(request)
        if len(self.requests) > len(self.responses):
            raise ScriptExhausted(
                f"script has {len(self.responses)} responses but got request "
                f"#{len(self.requests)}")
        return self.responses[len(self.requests) - 1]

    @property
    def calls(self) -> int:
        return len(self.requests)


class TranscriptClient:
    """Replays a recorded transcript, keyed by request digest."""

    def __init__(self, entries: dict[str, str]):
        self._entries = dict(entries)

    @classmethod
    def from_file(cls, path) -> "TranscriptClient":
        entries: dict[str, str] = {}
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise UnreadableSource(f"{path}: {exc}") from exc
        for i, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise UnreadableSource(f"{path}: line {i} is not JSON ({exc})") from exc
            entries[record["digest"]] = record["response"]
        return cls(entries)

    def send(self, request: ChatRequest) -> str:
        digest = request_digest(request)
        if digest not in self._entries:
            raise KeyError(f"transcript has no response for request digest {digest}")
        return self._entries[digest]


class RecordingClient:
    """Wraps a client and appends replayable transcript lines to a file."""

    def __init__(self, inner: LLMClient, path):
        self._inner = inner
        self._path = Path(path)

    def send(self, request: ChatRequest) -> str:
        response = self._inner.send(request)
        record = {"digest": request_digest(request),
                  "system": request.system_prompt,
                  "user": request.user_prompt,
                  "response": response}
        with self._path.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
        return response


class HttpClient:
    """Minimal OpenAI-style chat-completions client configured via env vars:
    VEGAEVAL_LLM_URL, VEGAEVAL_LLM_API_KEY, VEGAEVAL_LLM_MODEL."""

    def __init__(self, url: str | None = None, api_key: str | None = None,
                 model: str | None = None, timeout: float = 120.0):
        self.url = url or os.environ.get("VEGAEVAL_LLM_URL", "")
        self.api_key = api_key or os.environ.get("VEGAEVAL_LLM_API_KEY", "")
        self.model = model or os.environ.get("VEGAEVAL_LLM_MODEL", "")
        self.timeout = timeout
        if not self.url:
            raise ValueError("live client needs VEGAEVAL_LLM_URL")

    def send(self, request: ChatRequest) -> str:
        import base64

        def content_for(text: str, images: tuple[ImageAttachment, ...]):
            if not images:
                return text
            parts: list[dict] = [{"type": "text", "text": text}]
            for img in images:
                encoded = base64.b64encode(img.data).decode("ascii")
                parts.append({"type": "image_url",
                              "image_url": {"url": f"data:{img.media_type};base64,{encoded}"}})
            return parts

        messages: list[dict] = [{"role": "system", "content": request.system_prompt}]
        for msg in request.history:
            messages.append({"role": msg.role, "content": msg.content})
        messages.append({"role": "user",
                         "content": content_for(request.user_prompt, request.images)})
        payload = {"model": self.model, "messages": messages,
                   "temperature": request.temperature}
        http_request = urllib.request.Request(
            self.url, data=json.dumps(payload).encode("utf-8"),
            headers={"Content-Type": "application/json",
                     "Authorization": f"Bearer {self.api_key}"})
        with urllib.request.urlopen(http_request, timeout=self.timeout) as response:
            body = json.loads(response.read().decode("utf-8"))
        return body["choices"][0]["message"]["content"]
