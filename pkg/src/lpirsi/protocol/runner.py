"""User side of one retrieval, either in-process or over TCP."""

from __future__ import annotations

import socket
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from ..core import (
    Answer,
    Database,
    Message,
    Query,
    RandomPattern,
    RetrievalRequest,
    SchemeParams,
    build_queries,
    decode,
    downloaded_symbols,
)
from ..errors import ProtocolError, SelfCheckError, TransportError, ValidationError
from ..schemes import sample_pattern
from .server import handle_frame
from .wire import AnswerMessage, ErrorMessage, QueryMessage, decode_frame, encode_frame, read_frame

DEFAULT_TIMEOUT = 10.0


@dataclass(frozen=True)
class RetrievalResult:
    message: Message
    symbols: int
    pattern: RandomPattern
    queries: tuple[Query, ...]
    answers: tuple[Answer, ...]
    transcript: bytes

    @property
    def normalized_cost(self) -> float:
        return self.symbols / len(self.message)


def parse_endpoint(text: str) -> tuple[str, int]:
    host, sep, port = text.strip().rpartition(":")
    if not sep:
        raise ValidationError(f"endpoint {text!r} must look like host:port")
    return host or "127.0.0.1", int(port)


def _exchange(endpoint: tuple[str, int], frame: bytes, timeout: float) -> bytes:
    try:
        with socket.create_connection(endpoint, timeout=timeout) as sock:
            sock.sendall(frame)
            with sock.makefile("rb") as stream:
                reply = read_frame(stream)
    except OSError as exc:
        raise TransportError(f"{endpoint[0]}:{endpoint[1]}: {exc}") from None
    if reply is None:
        raise TransportError(f"{endpoint[0]}:{endpoint[1]}: connection closed without an answer")
    return reply


def _unwrap(reply: bytes, session_id: int, q: int, n: int) -> Answer:
    msg = decode_frame(reply)
    if isinstance(msg, ErrorMessage):
        raise ProtocolError(f"server {n} rejected the query (code {msg.code}): {msg.detail}")
    if not isinstance(msg, AnswerMessage):
        raise ProtocolError(f"server {n} replied with {type(msg).__name__}")
    if msg.session_id != session_id:
        raise ProtocolError(f"server {n} answered session {msg.session_id}, expected {session_id}")
    if msg.value is not None and not 0 <= msg.value < q:
        raise ProtocolError(f"server {n} returned symbol {msg.value} outside [0, {q})")
    return msg.answer


def run_retrieval(
    params: SchemeParams,
    req: RetrievalRequest,
    rng,
    db: Optional[Database] = None,
    endpoints: Optional[Sequence[tuple[str, int]]] = None,
    side_info: Optional[Mapping[int, Message]] = None,
    self_check: bool = True,
    timeout: float = DEFAULT_TIMEOUT,
) -> RetrievalResult:
    """Sample a pattern, query all N servers, decode the demand message.

    Without ``endpoints`` the servers are simulated in-process against ``db``;
    with them, one TCP connection per server is opened and all N queries are
    in flight concurrently.  Both paths exchange the same encoded frames, so
    a fixed seed gives the same transcript either way.  Side information is
    taken from ``side_info`` or, failing that, from ``db``.
    """
    req.validate(params)
    if endpoints is None and db is None:
        raise ValidationError("in-process retrieval needs a database")
    if endpoints is not None and len(endpoints) != params.N:
        raise ValidationError(f"{len(endpoints)} endpoints given, N = {params.N}")
    if side_info is None:
        if db is None:
            raise ValidationError("side information must come from side_info or db")
        side_info = {s: db.message(s) for s in req.S}

    session_id = rng.getrandbits(64)
    pattern = sample_pattern(params, req, rng)
    queries = build_queries(pattern, req, params)
    frames = [encode_frame(QueryMessage(session_id, params.N, params.K, params.q, qv)) for qv in queries]

    if endpoints is None:
        replies = [handle_frame(f, db) for f in frames]
    else:
        with ThreadPoolExecutor(max_workers=len(frames)) as pool:
            futures = [pool.submit(_exchange, ep, f, timeout) for ep, f in zip(endpoints, frames)]
            replies = [fut.result() for fut in futures]

    answers = tuple(_unwrap(r, session_id, params.q, n) for n, r in enumerate(replies, start=1))
    message = decode(answers, queries, pattern, side_info, req, params)
    if self_check and db is not None and message != db.message(req.W):
        raise SelfCheckError(f"decoded {message.subpackets}, expected {db.message(req.W).subpackets}")
    transcript = b"".join(f + r for f, r in zip(frames, replies))
    return RetrievalResult(message, downloaded_symbols(answers), pattern, tuple(queries), answers, transcript)
