"""Scriptable HTTP mock provider for tests and offline runs.

Speaks the exact client protocol (``POST /caption``, ``/assert``, ``/vqa``
with ``{"id", "image_ref", "prompt"}`` in and ``{"id", "text"}`` out) and
records enough instrumentation to verify client resilience: per-request
timeline, per-id attempt counts, and the in-flight high-water mark.

Failure scripts inject status codes before success: ``fail_script={"r1":
[429, 429]}`` makes the first two requests for id ``r1`` return 429, then
succeed. ``fail_always`` ids return 500 forever.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable

ResponseFn = Callable[[dict], str]


@dataclass
class RequestLogEntry:
    path: str
    request_id: str
    started_at: float
    status: int


@dataclass
class MockProviderServer:
    """A local threaded HTTP server with deterministic, scriptable handlers."""

    caption_fn: ResponseFn | None = None
    assert_fn: ResponseFn | None = None
    vqa_fn: ResponseFn | None = None
    fail_script: dict[str, list[int]] = field(default_factory=dict)
    fail_always: set[str] = field(default_factory=set)
    latency_s: float = 0.0

    def __post_init__(self):
        self._lock = threading.Lock()
        self._in_flight = 0
        self.in_flight_high_water = 0
        self.request_log: list[RequestLogEntry] = []
        self.attempts: dict[str, int] = {}
        self._script_state: dict[str, list[int]] = {k: list(v) for k, v in self.fail_script.items()}
        self._server: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> "MockProviderServer":
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):  # silence default stderr logging
                pass

            def do_POST(self):
                length = int(self.headers.get("Content-Length", "0"))
                try:
                    payload = json.loads(self.rfile.read(length).decode("utf-8"))
                except (ValueError, UnicodeDecodeError):
                    payload = {}
                status, body = outer._handle(self.path, payload)
                data = json.dumps(body).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None

    def __enter__(self) -> "MockProviderServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    @property
    def base_url(self) -> str:
        assert self._server is not None, "server not started"
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    # -- request handling ----------------------------------------------------

    def _default_text(self, path: str, payload: dict) -> str:
        request_id = str(payload.get("id", ""))
        if path == "/caption":
            return f"caption for {request_id}"
        if path == "/assert":
            return "Mock assertion."
        return "yes"

    def _handle(self, path: str, payload: dict) -> tuple[int, dict]:
        request_id = str(payload.get("id", ""))
        started = time.monotonic()
        with self._lock:
            self._in_flight += 1
            self.in_flight_high_water = max(self.in_flight_high_water, self._in_flight)
            self.attempts[request_id] = self.attempts.get(request_id, 0) + 1
        try:
            if self.latency_s:
                time.sleep(self.latency_s)
            status = 200
            with self._lock:
                if request_id in self.fail_always:
                    status = 500
                else:
                    script = self._script_state.get(request_id)
                    if script:
                        status = script.pop(0)
            if status != 200:
                body: dict = {"id": request_id, "error": f"scripted {status}"}
            else:
                fn = {"/caption": self.caption_fn, "/assert": self.assert_fn, "/vqa": self.vqa_fn}.get(path)
                text = fn(payload) if fn is not None else self._default_text(path, payload)
                body = {"id": request_id, "text": text}
            return status, body
        finally:
            with self._lock:
                self._in_flight -= 1
                self.request_log.append(RequestLogEntry(path, request_id, started, status))

    # -- instrumentation helpers ----------------------------------------------

    def attempt_times(self, request_id: str) -> list[float]:
        with self._lock:
            return [e.started_at for e in self.request_log if e.request_id == request_id]

    def ids_requested(self) -> set[str]:
        with self._lock:
            return {e.request_id for e in self.request_log}
