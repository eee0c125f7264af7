"""HTTP/JSON action server.

Endpoints::

    POST   /session                      {"env_id": 3}      -> new session
    GET    /session/{id}                                     -> session info
    DELETE /session/{id}
    POST   /session/{id}/{action}        {action arguments}  -> {"ok", "message", "data"?}
    GET    /session/{id}/trace                               -> canonical trace lines
    POST   /{action}, GET /trace                             -> same, on the default session
    GET    /actions                                          -> tool schemas
    GET    /health

In-domain failures (unknown object, empty gripper...) are 200 with
``"ok": false``; malformed payloads are 400; unknown actions or sessions 404.
"""

from __future__ import annotations

import json
import logging
import threading
import time
import uuid
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any
from urllib.parse import urlparse

from .actions import LocalDispatcher, SchemaError, UnknownActionError
from .llm import action_tool_schemas
from .world import ACTIONS, ConfigurationError, World, load_environment

logger = logging.getLogger(__name__)

DEFAULT_SESSION = "default"


@dataclass
class ApiSession:
    session_id: str
    world: World
    created_at: float = field(default_factory=time.time)

    def __post_init__(self) -> None:
        self.dispatcher = LocalDispatcher(self.world)


class SessionStore:
    def __init__(self, corpus_dir: str | Path | None = None, default_env: int | None = 3) -> None:
        self.corpus_dir = corpus_dir
        self._sessions: dict[str, ApiSession] = {}
        self._lock = threading.Lock()
        if default_env is not None:
            self.create(default_env, DEFAULT_SESSION)

    def create(self, env_id: int, session_id: str | None = None) -> ApiSession:
        session = ApiSession(session_id or uuid.uuid4().hex[:16], load_environment(env_id, self.corpus_dir))
        with self._lock:
            self._sessions[session.session_id] = session
        return session

    def get(self, session_id: str) -> ApiSession | None:
        with self._lock:
            return self._sessions.get(session_id)

    def delete(self, session_id: str) -> bool:
        with self._lock:
            return self._sessions.pop(session_id, None) is not None

    def __len__(self) -> int:
        return len(self._sessions)


def _envelope(ok: bool, message: str, **extra: Any) -> dict[str, Any]:
    return {"ok": ok, "message": message, **extra}


def dispatch(session: ApiSession, action: str, args: Any) -> tuple[int, dict[str, Any]]:
    """Run one action on a session; returns (HTTP status, JSON body)."""
    try:
        return 200, session.dispatcher.dispatch(action, args)
    except UnknownActionError:
        return 404, _envelope(False, f"Unknown action {action}", error="not_found")
    except SchemaError as exc:
        return 400, _envelope(False, str(exc), error="schema")


def get_trace(session: ApiSession) -> list[str]:
    return session.dispatcher.trace()


class ActionRequestHandler(BaseHTTPRequestHandler):
    server: ActionServer
    protocol_version = "HTTP/1.1"
    disable_nagle_algorithm = True

    def log_message(self, format: str, *args: Any) -> None:
        logger.debug("%s - %s", self.address_string(), format % args)

    def _send(self, status: int, body: dict[str, Any]) -> None:
        payload = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def _body(self) -> Any:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw.strip():
            return {}
        return json.loads(raw)

    def _parts(self) -> list[str]:
        return [p for p in urlparse(self.path).path.split("/") if p]

    def _session(self, session_id: str) -> ApiSession | None:
        session = self.server.store.get(session_id)
        if session is None:
            self._send(404, _envelope(False, f"Unknown session {session_id}", error="not_found"))
        return session

    def do_GET(self) -> None:
        parts = self._parts()
        if parts == ["health"]:
            self._send(200, _envelope(True, "ok", sessions=len(self.server.store)))
        elif parts == ["actions"]:
            self._send(200, _envelope(True, "8 actions", data=[t.to_wire() for t in action_tool_schemas()]))
        elif parts == ["trace"] or (len(parts) == 3 and parts[0] == "session" and parts[2] == "trace"):
            session = self._session(parts[1] if len(parts) == 3 else DEFAULT_SESSION)
            if session:
                lines = get_trace(session)
                self._send(200, _envelope(True, f"{len(lines)} actions recorded", data=lines))
        elif len(parts) == 2 and parts[0] == "session":
            session = self._session(parts[1])
            if session:
                self._send(200, _envelope(True, "session", session_id=session.session_id,
                                          env_id=session.world.env_id, created_at=session.created_at))
        else:
            self._send(404, _envelope(False, f"No route for GET {self.path}", error="not_found"))

    def do_POST(self) -> None:
        parts = self._parts()
        try:
            body = self._body()
        except (ValueError, UnicodeDecodeError) as exc:
            self._send(400, _envelope(False, f"Request body is not valid JSON: {exc}", error="schema"))
            return
        if parts == ["session"]:
            if not isinstance(body, dict) or set(body) - {"env_id"}:
                self._send(400, _envelope(False, "Expected {\"env_id\": 1|2|3}", error="schema"))
                return
            try:
                session = self.server.store.create(body.get("env_id", 3))
            except ConfigurationError as exc:
                self._send(400, _envelope(False, str(exc), error="schema"))
                return
            self._send(200, _envelope(True, f"Session {session.session_id} created",
                                      session_id=session.session_id, env_id=session.world.env_id))
            return
        if len(parts) == 3 and parts[0] == "session":
            session_id, action = parts[1], parts[2]
        elif len(parts) == 1:
            session_id, action = DEFAULT_SESSION, parts[0]
        else:
            self._send(404, _envelope(False, f"No route for POST {self.path}", error="not_found"))
            return
        if action not in ACTIONS:
            self._send(404, _envelope(False, f"Unknown action {action}", error="not_found"))
            return
        session = self._session(session_id)
        if session:
            self._send(*dispatch(session, action, body))

    def do_DELETE(self) -> None:
        parts = self._parts()
        if len(parts) == 2 and parts[0] == "session" and self.server.store.delete(parts[1]):
            self._send(200, _envelope(True, f"Session {parts[1]} deleted"))
        else:
            self._send(404, _envelope(False, f"Unknown session for DELETE {self.path}", error="not_found"))


class ActionServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address: tuple[str, int], store: SessionStore) -> None:
        super().__init__(address, ActionRequestHandler)
        self.store = store

    @property
    def url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"


def parse_bind(bind: str) -> tuple[str, int]:
    host, _, port = bind.rpartition(":")
    return (host or "127.0.0.1"), int(port)


def serve(bind: str = "127.0.0.1:8000", corpus_dir: str | Path | None = None, default_env: int = 3,
          background: bool = False) -> ActionServer:
    """Start the action server.  With ``background`` it runs on a daemon thread
    and the server object is returned immediately; otherwise this blocks."""
    server = ActionServer(parse_bind(bind), SessionStore(corpus_dir, default_env))
    if background:
        threading.Thread(target=server.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True).start()
        return server
    logger.info("action server listening on %s", server.url)
    try:
        server.serve_forever()
    finally:
        server.server_close()
    return server
