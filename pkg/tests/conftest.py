"""Shared test fixtures: a local stub image server and path helpers."""

from __future__ import annotations

import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest


class StubImageServer:
    """Serves one canned (status, body) per request, in order.

    The last script entry repeats for any extra requests. Arrival
    monotonic timestamps are recorded for rate-limit assertions.
    """

    def __init__(self, script: list[tuple[int, bytes]]):
        if not script:
            raise ValueError("script must not be empty")
        self.script = script
        self.arrivals: list[float] = []
        self.request_count = 0
        self._lock = threading.Lock()

        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_GET(self):  # noqa: N802 (http.server API)
                with stub._lock:
                    index = stub.request_count
                    stub.request_count += 1
                    stub.arrivals.append(time.monotonic())
                status, body = stub.script[min(index, len(stub.script) - 1)]
                self.send_response(status)
                self.send_header("Content-Type", "image/jpeg")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                if body:
                    self.wfile.write(body)

            def log_message(self, *args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    def start(self) -> "StubImageServer":
        self._thread.start()
        return self

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}/image"

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)


@pytest.fixture
def stub_server():
    servers = []

    def make(script: list[tuple[int, bytes]]) -> StubImageServer:
        server = StubImageServer(script).start()
        servers.append(server)
        return server

    yield make
    for server in servers:
        server.stop()
