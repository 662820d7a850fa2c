"""Shared fixtures: paths and a stub semantic-similarity HTTP service."""

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer
from pathlib import Path

import pytest

DATA_DIR = Path(__file__).parent / "data"

# similarity scores for the pairs exercised by the 5-document fixture corpus;
# identical strings always score 1.0, unknown pairs 0.0
STUB_SCORES = {
    frozenset(("hole-doped La 2-x Sr x CuO 4", "La 2-x Sr x CuO 4")): 0.95,
    frozenset((
        "Bi2Sr2CaCu2O8 superconducting films",
        "Bi2Sr2CaCu2O8 superconducting film",
    )): 0.97,
    frozenset((
        "Eu 1-x K x Fe 2 As 2 samples with x = 0.35, 0.45 and 0.5",
        "Eu 0.5 K 0.5 Fe 2 As 2",
    )): 0.91,
    frozenset(("39.5 K", "39.5K")): 0.98,
    frozenset(("solar cell", "solar cells")): 0.97,
}


class _StubHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length))
        a, b = body["text_a"], body["text_b"]
        score = 1.0 if a == b else STUB_SCORES.get(frozenset((a, b)), 0.0)
        payload = json.dumps({"score": score}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture(scope="session")
def semantic_endpoint():
    """URL of a local similarity service implementing the wire contract."""
    server = HTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


@pytest.fixture(scope="session")
def data_dir():
    return DATA_DIR
