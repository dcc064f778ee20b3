"""HTTP annotation endpoint speaking the NIF exchange format.

POST /annotate with a Turtle-encoded context; the response carries the same
context plus one phrase per predicted annotation. The pipeline object is
shared read-only across request threads; there is no cross-request state.
"""

from __future__ import annotations

import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .errors import NifError, SpanlinkError
from .nif import DEFAULT_KB_PREFIX, NifDocument, emit_nif, parse_nif

CONTENT_TYPE = "application/x-turtle"


def _make_handler(linker, kb_prefix: str):
    class AnnotateHandler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, format, *args):  # noqa: A002 - stdlib signature
            pass

        def _respond(self, status: int, body: bytes, content_type: str = CONTENT_TYPE):
            self.send_response(status)
            self.send_header("Content-Type", f"{content_type}; charset=utf-8")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            if self.path == "/health":
                self._respond(200, b"ok", "text/plain")
            else:
                self._respond(404, b"not found", "text/plain")

        def do_POST(self):
            if self.path != "/annotate":
                self._respond(404, b"not found", "text/plain")
                return
            length = int(self.headers.get("Content-Length", 0))
            raw = self.rfile.read(length)
            try:
                body = raw.decode("utf-8")
            except UnicodeDecodeError:
                self._respond(400, b"request body is not valid UTF-8", "text/plain")
                return
            try:
                request = parse_nif(body)
            except NifError as exc:
                self._respond(400, str(exc).encode("utf-8"), "text/plain")
                return
            try:
                # Inbound phrases are accepted and ignored; the pipeline
                # produces both spans and entities from the raw text.
                spans = linker.annotate_text(request.text)
                context = NifDocument(context_uri=request.context_uri, text=request.text)
                reply = emit_nif(context, annotations=spans, kb_prefix=kb_prefix)
            except SpanlinkError as exc:
                self._respond(500, f"annotation failed: {exc}".encode("utf-8"), "text/plain")
                return
            self._respond(200, reply.encode("utf-8"))

    return AnnotateHandler


def make_server(linker, host: str = "127.0.0.1", port: int = 0,
                kb_prefix: str = DEFAULT_KB_PREFIX) -> ThreadingHTTPServer:
    """Create (but do not start) the threading HTTP server."""
    return ThreadingHTTPServer((host, port), _make_handler(linker, kb_prefix))


def start_in_background(server: ThreadingHTTPServer) -> threading.Thread:
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return thread


def serve(linker, bind_address: str = "127.0.0.1:5555",
          kb_prefix: str = DEFAULT_KB_PREFIX) -> None:
    """Run the annotation service until interrupted."""
    host, _, port = bind_address.rpartition(":")
    server = make_server(linker, host or "127.0.0.1", int(port), kb_prefix)
    try:
        server.serve_forever()
    finally:
        server.server_close()
