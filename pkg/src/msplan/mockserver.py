"""Scriptable OpenAI-compatible chat endpoint for offline tests and demos.

>>> with MockChatServer(responder=lambda prompt, n, body: ["ok"] * n) as srv:
...     srv.base_url  # doctest: +ELLIPSIS
'http://127.0.0.1:...'

``script`` entries are consumed one per request before the responder is
used: an ``int`` answers with that HTTP status, ``"malformed"`` returns a 200
with a body that is not a chat completion, and ``("delay", seconds)`` stalls
before answering normally.
"""

from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
import collections
import json
import threading
import time


def echo_responder(prompt, n, body):
    return [prompt] * n


class MockChatServer:
    def __init__(self, responder=echo_responder, script=(), api_key=None, max_choices=None):
        self.responder = responder
        self.script = collections.deque(script)
        self.api_key = api_key
        self.max_choices = max_choices
        self.requests = []
        self.in_flight = 0
        self.max_in_flight = 0
        self._lock = threading.Lock()
        self._server = None
        self._thread = None

    @property
    def base_url(self):
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self):
        owner = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, *args):
                pass

            def do_POST(self):
                owner._handle(self)

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._server.daemon_threads = True
        self._thread = threading.Thread(target=self._server.serve_forever, args=(0.05,), daemon=True)
        self._thread.start()
        return self

    def stop(self):
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()

    @property
    def request_count(self):
        return len(self.requests)

    def _handle(self, h):
        length = int(h.headers.get("Content-Length") or 0)
        raw = h.rfile.read(length)
        with self._lock:
            self.in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self.in_flight)
            action = self.script.popleft() if self.script else None
        try:
            try:
                body = json.loads(raw or b"{}")
            except ValueError:
                body = None
            with self._lock:
                self.requests.append({"path": h.path, "headers": dict(h.headers), "body": body})

            if h.path.rstrip("/") != "/v1/chat/completions":
                return self._send(h, 404, {"error": {"message": "not found"}})
            if self.api_key is not None and h.headers.get("Authorization") != f"Bearer {self.api_key}":
                return self._send(h, 401, {"error": {"message": "invalid api key"}})
            if isinstance(action, int):
                return self._send(h, action, {"error": {"message": f"scripted status {action}"}})
            if action == "malformed":
                return self._send(h, 200, {"unexpected": True})
            if isinstance(action, tuple) and action[0] == "delay":
                time.sleep(action[1])
            if not isinstance(body, dict):
                return self._send(h, 400, {"error": {"message": "invalid JSON"}})

            messages = body.get("messages") or [{}]
            prompt = messages[-1].get("content", "")
            n = int(body.get("n") or 1)
            if self.max_choices:
                n = min(n, self.max_choices)
            completions = list(self.responder(prompt, n, body))[:n]
            choices = [
                {"index": i, "message": {"role": "assistant", "content": c}, "finish_reason": "stop"}
                for i, c in enumerate(completions)
            ]
            self._send(h, 200, {
                "id": f"mock-{len(self.requests)}",
                "object": "chat.completion",
                "model": body.get("model"),
                "choices": choices,
            })
        finally:
            with self._lock:
                self.in_flight -= 1

    @staticmethod
    def _send(h, status, payload):
        data = json.dumps(payload).encode("utf-8")
        try:
            h.send_response(status)
            h.send_header("Content-Type", "application/json")
            h.send_header("Content-Length", str(len(data)))
            h.end_headers()
            h.wfile.write(data)
        except (BrokenPipeError, ConnectionResetError):
            pass
