"""Client for the renderer sidecar process.

The sidecar (a separate Node package) renders specs to SVG/PNG and reports
scene-graph emptiness over a newline-delimited JSON stdio protocol.  The
executable is configured via the RENDERER_CMD environment variable, e.g.
``RENDERER_CMD="node renderer/dist/main.js"``.  Responses may arrive out of
order; correlation is by request id.
"""

from __future__ import annotations

import base64
import itertools
import json
import os
import shlex
import subprocess
from dataclasses import dataclass

from .errors import VegaEvalError

RENDERER_CMD_ENV = "RENDERER_CMD"


@dataclass(frozen=True)
class RenderResult:
    id: str
    ok: bool
    image: bytes | None = None
    empty: bool | None = None
    error: str | None = None


class RendererClient:
    """Long-lived sidecar subprocess speaking the line protocol."""

    def __init__(self, command: str | None = None):
        command = command or os.environ.get(RENDERER_CMD_ENV, "")
        if not command:
            raise VegaEvalError(f"renderer command not configured (set {RENDERER_CMD_ENV})")
        self._argv = shlex.split(command)
        self._proc: subprocess.Popen | None = None
        self._ids = itertools.count(1)
        self._buffered: dict[str, dict] = {}

    def __enter__(self) -> "RendererClient":
        self.start()
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def start(self) -> None:
        if self._proc is None:
            self._proc = subprocess.Popen(self._argv, stdin=subprocess.PIPE,
                                          stdout=subprocess.PIPE, text=True)

    def close(self) -> None:
        if self._proc is not None:
            if self._proc.stdin:
                self._proc.stdin.close()
            self._proc.wait(timeout=30)
            self._proc = None

    def render(self, spec: dict, data: list | None = None,
               image_format: str = "svg", request_id: str | None = None) -> RenderResult:
        self.start()
        assert self._proc is not None and self._proc.stdin and self._proc.stdout
        rid = request_id or f"r{next(self._ids)}"
        request = {"id": rid, "spec": spec, "format": image_format}
        if data is not None:
            request["data"] = data
        self._proc.stdin.write(json.dumps(request) + "\n")
        self._proc.stdin.flush()
        payload = self._read_response(rid)
        image = base64.b64decode(payload["image"]) if payload.get("image") else None
        return RenderResult(id=payload["id"], ok=bool(payload["ok"]), image=image,
                            empty=payload.get("empty"), error=payload.get("error"))

    def _read_response(self, rid: str) -> dict:
        if rid in self._buffered:
            return self._buffered.pop(rid)
        assert self._proc is not None and self._proc.stdout
        while True:
            line = self._proc.stdout.readline()
            if not line:
                raise VegaEvalError("renderer process closed its output stream")
            payload = json.loads(line)
            if payload.get("id") == rid:
                return payload
            self._buffered[payload["id"]] = payload
