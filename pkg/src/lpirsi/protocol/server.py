"""Stateless answer server, its configuration file and the flat database format."""

from __future__ import annotations

import logging
import socketserver
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Union

from ..core import Database, Message, compute_answer
from ..errors import ProtocolError, ValidationError
from .wire import (
    AnswerMessage,
    ErrorCode,
    ErrorMessage,
    QueryMessage,
    decode_frame,
    encode_frame,
    read_frame,
)

log = logging.getLogger(__name__)

DB_MAGIC = "LPIRSI1"


def _read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from None


def write_database(db: Database, path) -> None:
    lines = [DB_MAGIC, str(db.K), str(db.L), str(db.q)]
    lines += [str(x) for m in db.messages for x in m.subpackets]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_database(path) -> Database:
    """Parse ``LPIRSI1`` header, then K, L, q, then K*L symbols row-major."""
    text = _read_text(path)
    lines = text.split("\n")
    if not lines or lines[0] != DB_MAGIC:
        raise ValidationError(f"{path}: missing {DB_MAGIC!r} header")
    try:
        values = [int(tok) for tok in "\n".join(lines[1:]).split()]
    except ValueError as exc:
        raise ValidationError(f"{path}: non-integer token ({exc})") from None
    if len(values) < 3:
        raise ValidationError(f"{path}: truncated header")
    K, L, q = values[:3]
    body = values[3:]
    if len(body) != K * L:
        raise ValidationError(f"{path}: expected {K * L} symbols, found {len(body)}")
    return Database(tuple(Message(tuple(body[i * L : (i + 1) * L])) for i in range(K)), q)


@dataclass(frozen=True)
class ServerConfig:
    port: int
    q: int
    K: int
    L: int
    database: Path
    host: str = "127.0.0.1"

    @classmethod
    def load(cls, path) -> "ServerConfig":
        """Read a ``key=value`` file; ``database`` is resolved relative to the file."""
        path = Path(path)
        entries = {}
        for raw in _read_text(path).splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}: expected key=value, got {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            entries[key] = value
        missing = {"port", "q", "K", "L", "database"} - set(entries)
        if missing:
            raise ValidationError(f"{path}: missing keys {sorted(missing)}")
        db_path = Path(entries["database"])
        if not db_path.is_absolute():
            db_path = path.parent / db_path
        return cls(
            port=int(entries["port"]),
            q=int(entries["q"]),
            K=int(entries["K"]),
            L=int(entries["L"]),
            database=db_path,
            host=entries.get("host", "127.0.0.1"),
        )

    def load_database(self) -> Database:
        db = read_database(self.database)
        if (db.K, db.L, db.q) != (self.K, self.L, self.q):
            raise ValidationError(
                f"database has (K, L, q) = ({db.K}, {db.L}, {db.q}), config says ({self.K}, {self.L}, {self.q})"
            )
        return db


def server_handle(query: QueryMessage, db: Database) -> Union[AnswerMessage, ErrorMessage]:
    """Answer one query; the server keeps no state between calls."""
    if query.K != db.K or query.q != db.q or query.N - 1 != db.L:
        return ErrorMessage(
            query.session_id,
            ErrorCode.PARAM_MISMATCH,
            f"query (N, K, q) = ({query.N}, {query.K}, {query.q}) does not match server "
            f"(N, K, q) = ({db.L + 1}, {db.K}, {db.q})",
        )
    return AnswerMessage.of(query.session_id, compute_answer(query.indices, db))


def handle_frame(frame: bytes, db: Database) -> bytes:
    """Byte-level wrapper: decode a query frame, answer it, encode the reply."""
    try:
        msg = decode_frame(frame)
    except ProtocolError as exc:
        return encode_frame(ErrorMessage(0, ErrorCode.MALFORMED, str(exc)))
    if not isinstance(msg, QueryMessage):
        return encode_frame(ErrorMessage(msg.session_id, ErrorCode.MALFORMED, "expected a query"))
    return encode_frame(server_handle(msg, db))


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        db = self.server.database
        while True:
            try:
                frame = read_frame(self.rfile)
            except ProtocolError as exc:
                log.info("dropping %s: %s", self.client_address, exc)
                return
            if frame is None:
                return
            self.wfile.write(handle_frame(frame, db))
            self.wfile.flush()


class PIRServer(socketserver.ThreadingTCPServer):
    """One thread per connection; connections are served sequentially frame by frame."""

    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address, database: Database):
        self.database = database
        super().__init__(address, _Handler)

    @property
    def port(self) -> int:
        return self.server_address[1]

    def start_background(self, poll_interval: float = 0.05) -> threading.Thread:
        """Serve from a daemon thread; a short poll interval keeps ``shutdown()`` quick."""
        thread = threading.Thread(target=self.serve_forever, args=(poll_interval,), daemon=True)
        thread.start()
        return thread
