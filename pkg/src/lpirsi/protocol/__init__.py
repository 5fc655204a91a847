"""Wire codec, stateless server and the user-side retrieval runner."""

from .runner import RetrievalResult, parse_endpoint, run_retrieval
from .server import PIRServer, ServerConfig, read_database, server_handle, write_database
from .wire import (
    AnswerMessage,
    ErrorCode,
    ErrorMessage,
    QueryMessage,
    decode_frame,
    encode_frame,
)

__all__ = [
    "AnswerMessage",
    "ErrorCode",
    "ErrorMessage",
    "PIRServer",
    "QueryMessage",
    "RetrievalResult",
    "ServerConfig",
    "decode_frame",
    "encode_frame",
    "parse_endpoint",
    "read_database",
    "run_retrieval",
    "server_handle",
    "write_database",
]
