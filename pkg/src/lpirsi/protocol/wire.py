"""Length-prefixed binary codec for queries and answers.

Every frame is a 4-byte big-endian payload length followed by the payload.
Payloads start with a one-byte message type; all integers are big-endian.

======  ============================================================
type    layout after the type byte
======  ============================================================
0x01    QUERY:  session u64 | N u16 | K u16 | q u64 | K x index u16
0x02    ANSWER: session u64 | kind u8 (0 empty, 1 symbol) | [value u64]
0x03    ERROR:  session u64 | code u8 | length u16 | UTF-8 detail
======  ============================================================

Example: ``QueryMessage(1, 3, 3, 257, (0, 1, 1))`` encodes to::

    00 00 00 1b 01 00 00 00 00 00 00 00 01 00 03 00 03
    00 00 00 00 00 00 01 01 00 00 00 01 00 01
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from typing import Optional, Union

from ..errors import ProtocolError

MAX_PAYLOAD = 1 << 20

TYPE_QUERY = 0x01
TYPE_ANSWER = 0x02
TYPE_ERROR = 0x03

KIND_EMPTY = 0
KIND_SYMBOL = 1

_LEN = struct.Struct(">I")
_QUERY_HEAD = struct.Struct(">BQHHQ")
_ANSWER_HEAD = struct.Struct(">BQB")
_ERROR_HEAD = struct.Struct(">BQBH")
_U64 = struct.Struct(">Q")


class ErrorCode(enum.IntEnum):
    PARAM_MISMATCH = 1
    BAD_INDEX = 2
    MALFORMED = 3


@dataclass(frozen=True)
class QueryMessage:
    session_id: int
    N: int
    K: int
    q: int
    indices: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(self.indices))
        if len(self.indices) != self.K:
            raise ProtocolError(f"query carries {len(self.indices)} indices, K = {self.K}")
        if any(not 0 <= i < self.N for i in self.indices):
            raise ProtocolError(f"query indices must lie in [0, {self.N - 1}]")


@dataclass(frozen=True)
class AnswerMessage:
    session_id: int
    kind: int
    value: Optional[int] = None

    def __post_init__(self):
        if self.kind == KIND_EMPTY and self.value is not None:
            raise ProtocolError("empty answer cannot carry a value")
        if self.kind == KIND_SYMBOL and self.value is None:
            raise ProtocolError("symbol answer requires a value")
        if self.kind not in (KIND_EMPTY, KIND_SYMBOL):
            raise ProtocolError(f"unknown answer kind {self.kind}")

    @property
    def answer(self) -> Optional[int]:
        return self.value

    @classmethod
    def of(cls, session_id: int, answer: Optional[int]) -> "AnswerMessage":
        if answer is None:
            return cls(session_id, KIND_EMPTY)
        return cls(session_id, KIND_SYMBOL, answer)


@dataclass(frozen=True)
class ErrorMessage:
    session_id: int
    code: int
    detail: str = ""


WireMessage = Union[QueryMessage, AnswerMessage, ErrorMessage]


def encode_payload(msg: WireMessage) -> bytes:
    try:
        if isinstance(msg, QueryMessage):
            return _QUERY_HEAD.pack(TYPE_QUERY, msg.session_id, msg.N, msg.K, msg.q) + struct.pack(
                f">{msg.K}H", *msg.indices
            )
        if isinstance(msg, AnswerMessage):
            head = _ANSWER_HEAD.pack(TYPE_ANSWER, msg.session_id, msg.kind)
            return head if msg.kind == KIND_EMPTY else head + _U64.pack(msg.value)
        if isinstance(msg, ErrorMessage):
            detail = msg.detail.encode("utf-8")
            return _ERROR_HEAD.pack(TYPE_ERROR, msg.session_id, msg.code, len(detail)) + detail
    except struct.error as exc:
        raise ProtocolError(f"field out of range: {exc}") from None
    raise TypeError(f"cannot encode {type(msg).__name__}")


def decode_payload(payload: bytes) -> WireMessage:
    if not payload:
        raise ProtocolError("empty payload")
    kind = payload[0]
    if kind == TYPE_QUERY:
        if len(payload) < _QUERY_HEAD.size:
            raise ProtocolError("truncated query header")
        _, session, N, K, q = _QUERY_HEAD.unpack_from(payload)
        if len(payload) != _QUERY_HEAD.size + 2 * K:
            raise ProtocolError(f"query payload has {len(payload)} bytes, expected {_QUERY_HEAD.size + 2 * K}")
        indices = struct.unpack_from(f">{K}H", payload, _QUERY_HEAD.size)
        return QueryMessage(session, N, K, q, indices)
    if kind == TYPE_ANSWER:
        if len(payload) < _ANSWER_HEAD.size:
            raise ProtocolError("truncated answer header")
        _, session, answer_kind = _ANSWER_HEAD.unpack_from(payload)
        if answer_kind == KIND_EMPTY:
            if len(payload) != _ANSWER_HEAD.size:
                raise ProtocolError("empty answer carries trailing bytes")
            return AnswerMessage(session, KIND_EMPTY)
        if answer_kind == KIND_SYMBOL:
            if len(payload) != _ANSWER_HEAD.size + _U64.size:
                raise ProtocolError("symbol answer has wrong length")
            return AnswerMessage(session, KIND_SYMBOL, _U64.unpack_from(payload, _ANSWER_HEAD.size)[0])
        raise ProtocolError(f"unknown answer kind {answer_kind}")
    if kind == TYPE_ERROR:
        if len(payload) < _ERROR_HEAD.size:
            raise ProtocolError("truncated error header")
        _, session, code, n = _ERROR_HEAD.unpack_from(payload)
        if len(payload) != _ERROR_HEAD.size + n:
            raise ProtocolError("error detail length mismatch")
        try:
            detail = payload[_ERROR_HEAD.size :].decode("utf-8")
        except UnicodeDecodeError:
            raise ProtocolError("error detail is not valid UTF-8") from None
        return ErrorMessage(session, code, detail)
    raise ProtocolError(f"unknown message type 0x{kind:02x}")


def encode_frame(msg: WireMessage) -> bytes:
    payload = encode_payload(msg)
    if len(payload) > MAX_PAYLOAD:
        raise ProtocolError(f"payload of {len(payload)} bytes exceeds {MAX_PAYLOAD}")
    return _LEN.pack(len(payload)) + payload


def split_frame(data: bytes) -> tuple[bytes, bytes]:
    """Split one frame off ``data``; returns ``(payload, rest)``."""
    if len(data) < _LEN.size:
        raise ProtocolError("truncated frame header")
    (length,) = _LEN.unpack_from(data)
    if length > MAX_PAYLOAD:
        raise ProtocolError(f"declared payload of {length} bytes exceeds {MAX_PAYLOAD}")
    end = _LEN.size + length
    if len(data) < end:
        raise ProtocolError(f"frame declares {length} bytes but only {len(data) - _LEN.size} follow")
    return data[_LEN.size : end], data[end:]


def decode_frame(data: bytes) -> WireMessage:
    """Decode exactly one frame; trailing bytes are an error."""
    payload, rest = split_frame(data)
    if rest:
        raise ProtocolError(f"{len(rest)} trailing bytes after frame")
    return decode_payload(payload)


def _read_exact(stream, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = stream.read(n - len(buf))
        if not chunk:
            break
        buf.extend(chunk)
    return bytes(buf)


def read_frame(stream) -> Optional[bytes]:
    """Read one raw frame from a binary stream; ``None`` on clean EOF."""
    head = _read_exact(stream, _LEN.size)
    if not head:
        return None
    if len(head) < _LEN.size:
        raise ProtocolError("connection closed inside frame header")
    (length,) = _LEN.unpack(head)
    if length > MAX_PAYLOAD:
        raise ProtocolError(f"declared payload of {length} bytes exceeds {MAX_PAYLOAD}")
    payload = _read_exact(stream, length)
    if len(payload) < length:
        raise ProtocolError("connection closed inside frame payload")
    return head + payload
