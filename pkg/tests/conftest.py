import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

_WORD_RE = re.compile(r'classify the word "([^"]+)"')


class StubLlmServer:
    """OpenAI-style chat endpoint returning canned per-word replies.

    ``reply_fn(word) -> str`` produces the assistant message. ``fail_first``
    makes the first N requests return HTTP 500 (for retry tests).
    """

    def __init__(self, reply_fn, fail_first: int = 0):
        self.reply_fn = reply_fn
        self.fail_first = fail_first
        self.requests_seen = 0
        self.lock = threading.Lock()
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                payload = json.loads(self.rfile.read(length))
                with stub.lock:
                    stub.requests_seen += 1
                    failing = stub.requests_seen <= stub.fail_first
                if failing:
                    self.send_response(500)
                    self.end_headers()
                    return
                last_user = [m for m in payload["messages"] if m["role"] == "user"][-1]
                match = _WORD_RE.search(last_user["content"])
                word = match.group(1) if match else ""
                content = stub.reply_fn(word)
                body = json.dumps({"choices": [{"message": {"content": content}}]}).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    @property
    def endpoint(self) -> str:
        host, port = self.server.server_address
        return f"http://{host}:{port}/v1/chat/completions"

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def stub_llm():
    def start(reply_fn, fail_first: int = 0):
        return StubLlmServer(reply_fn, fail_first=fail_first)

    return start
