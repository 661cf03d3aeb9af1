"""In-process HTTP double of the scoring service, for client tests."""

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

DEFAULT_META = {
    "vocab_size": 1000,
    "pad_id": 0,
    "bos_id": 1,
    "eos_id": 2,
    "max_content_len": 20,
    "max_batch": 64,
    "model_ids": {"generator": "stub", "clip": "stub", "aesthetic": "stub"},
}


class StubScoringService:
    """Serves /v1/meta, /v1/tokenize and /v1/score from scripted data.

    ``score_script`` is a queue of (status, payload) pairs consumed one per
    /v1/score call; when empty, a deterministic default response is built
    from the request batch. All received bodies are recorded.
    """

    def __init__(self):
        self.meta = dict(DEFAULT_META)
        self.tokenize_map = {}
        self.score_script = []
        self.requests = []
        self._httpd = None
        self._thread = None

    # -- default behaviour --------------------------------------------------

    def default_score(self, body):
        results = [
            {"aesthetic": 5.0 + 0.25 * i, "clip_score": 0.01 * i, "image_ref": None}
            for i, _ in enumerate(body["batch"])
        ]
        return 200, {"results": results}

    # -- lifecycle -----------------------------------------------------------

    def start(self):
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _reply(self, status, payload):
                data = json.dumps(payload).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def do_GET(self):
                stub.requests.append(("GET", self.path, None))
                if self.path == "/v1/meta":
                    self._reply(200, stub.meta)
                else:
                    self._reply(404, {"detail": "not found"})

            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length) or b"{}")
                stub.requests.append(("POST", self.path, body))
                if self.path == "/v1/tokenize":
                    text = body.get("text", "")
                    self._reply(200, {"token_ids": stub.tokenize_map.get(text, [3, 4, 5])})
                elif self.path == "/v1/score":
                    if stub.score_script:
                        status, payload = stub.score_script.pop(0)
                    else:
                        status, payload = stub.default_score(body)
                    self._reply(status, payload)
                else:
                    self._reply(404, {"detail": "not found"})

        self._httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    @property
    def endpoint(self):
        host, port = self._httpd.server_address
        return f"http://{host}:{port}"

    def stop(self):
        if self._httpd is not None:
            self._httpd.shutdown()
            self._httpd.server_close()
            self._thread.join()
            self._httpd = None

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()
        return False

    def score_posts(self):
        return [body for m, path, body in self.requests if path == "/v1/score"]
