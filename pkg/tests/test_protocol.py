from __future__ import annotations

import io
import random
import socket
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from lpirsi.core import Database, RetrievalRequest, SchemeParams
from lpirsi.errors import ProtocolError, SelfCheckError, TransportError, ValidationError
from lpirsi.protocol import (
    PIRServer,
    ServerConfig,
    parse_endpoint,
    read_database,
    run_retrieval,
    server_handle,
    write_database,
)
from lpirsi.protocol.server import handle_frame
from lpirsi.protocol.wire import (
    MAX_PAYLOAD,
    AnswerMessage,
    ErrorCode,
    ErrorMessage,
    QueryMessage,
    decode_frame,
    encode_frame,
    read_frame,
    split_frame,
)

u64 = st.integers(0, 2**64 - 1)


def test_documented_query_bytes():
    frame = encode_frame(QueryMessage(1, 3, 3, 257, (0, 1, 1)))
    expected = bytes.fromhex(
        "0000001b" "01" "0000000000000001" "0003" "0003" "0000000000000101" "0000" "0001" "0001"
    )
    assert frame == expected


def test_answer_and_error_bytes():
    assert encode_frame(AnswerMessage.of(2, None)) == bytes.fromhex("0000000a" "02" "0000000000000002" "00")
    assert encode_frame(AnswerMessage.of(2, 5)) == bytes.fromhex(
        "00000012" "02" "0000000000000002" "01" "0000000000000005"
    )
    assert encode_frame(ErrorMessage(0, ErrorCode.MALFORMED, "x")) == bytes.fromhex(
        "0000000d" "03" "0000000000000000" "03" "0001" "78"
    )


@st.composite
def _queries(draw):
    N = draw(st.integers(1, 2**16 - 1))
    K = draw(st.integers(0, 50))
    indices = draw(st.lists(st.integers(0, N - 1), min_size=K, max_size=K))
    return QueryMessage(draw(u64), N, K, draw(u64), tuple(indices))


_messages = st.one_of(
    _queries(),
    st.builds(AnswerMessage.of, u64, st.one_of(st.none(), u64)),
    st.builds(ErrorMessage, u64, st.integers(0, 255), st.text(max_size=60)),
)


@given(_messages)
def test_round_trip(msg):
    frame = encode_frame(msg)
    assert decode_frame(frame) == msg
    assert read_frame(io.BytesIO(frame + frame)) == frame


@given(_messages, st.data())
def test_truncated_frames_rejected(msg, data):
    frame = encode_frame(msg)
    cut = data.draw(st.integers(0, len(frame) - 1))
    with pytest.raises(ProtocolError):
        decode_frame(frame[:cut])


@pytest.mark.parametrize(
    "payload,match",
    [
        (b"", "empty payload"),
        (b"\x09", "unknown message type"),
        (b"\x01\x00", "truncated query"),
        (b"\x02" + bytes(8) + b"\x07", "unknown answer kind"),
        (b"\x02" + bytes(8) + b"\x00\x00", "trailing"),
        (b"\x02" + bytes(8) + b"\x01\x00", "wrong length"),
        (b"\x03" + bytes(8) + b"\x01\x00\x02\xff\xfe", "UTF-8"),
        (b"\x03" + bytes(8) + b"\x01\x00\x05ab", "length mismatch"),
    ],
)
def test_malformed_payloads(payload, match):
    frame = len(payload).to_bytes(4, "big") + payload
    with pytest.raises(ProtocolError, match=match):
        decode_frame(frame)


def test_frame_limits():
    with pytest.raises(ProtocolError, match="exceeds"):
        split_frame((MAX_PAYLOAD + 1).to_bytes(4, "big"))
    frame = encode_frame(AnswerMessage.of(1, 1))
    with pytest.raises(ProtocolError, match="trailing"):
        decode_frame(frame + b"\x00")
    payload, rest = split_frame(frame + b"xyz")
    assert rest == b"xyz"
    assert read_frame(io.BytesIO(b"")) is None
    with pytest.raises(ProtocolError):
        read_frame(io.BytesIO(frame[:6]))


def test_message_invariants():
    with pytest.raises(ProtocolError):
        QueryMessage(0, 3, 3, 257, (0, 3, 1))
    with pytest.raises(ProtocolError):
        QueryMessage(0, 3, 2, 257, (0, 1, 1))
    with pytest.raises(ProtocolError):
        AnswerMessage(0, 0, 5)
    with pytest.raises(ProtocolError):
        AnswerMessage(0, 1)
    with pytest.raises(ProtocolError, match="out of range"):
        encode_frame(AnswerMessage.of(2**64, 1))


# ---------------------------------------------------------------------------
# Server


@pytest.fixture
def db():
    return Database(((1, 2), (3, 4), (5, 6)), q=7)


def test_server_handle(db):
    assert server_handle(QueryMessage(9, 3, 3, 7, (1, 2, 0)), db) == AnswerMessage.of(9, 1 + 4)
    assert server_handle(QueryMessage(9, 3, 3, 7, (0, 0, 0)), db) == AnswerMessage.of(9, None)
    for bad in (QueryMessage(9, 4, 3, 7, (0, 0, 0)), QueryMessage(9, 3, 2, 7, (0, 0)), QueryMessage(9, 3, 3, 5, (0, 0, 0))):
        reply = server_handle(bad, db)
        assert isinstance(reply, ErrorMessage) and reply.code == ErrorCode.PARAM_MISMATCH


def test_handle_frame_malformed(db):
    reply = decode_frame(handle_frame(b"\x00\x00\x00\x01\x09", db))
    assert isinstance(reply, ErrorMessage) and reply.code == ErrorCode.MALFORMED
    reply = decode_frame(handle_frame(encode_frame(AnswerMessage.of(4, 1)), db))
    assert reply == ErrorMessage(4, ErrorCode.MALFORMED, "expected a query")


def test_database_file_round_trip(tmp_path, db):
    path = tmp_path / "db.txt"
    write_database(db, path)
    assert path.read_text().splitlines()[:4] == ["LPIRSI1", "3", "2", "7"]
    assert read_database(path) == db


@pytest.mark.parametrize(
    "text,match",
    [("NOPE\n1\n1\n7\n0\n", "header"), ("LPIRSI1\n2\n2\n7\n1 2 3\n", "expected 4"), ("LPIRSI1\n1\nx\n", "non-integer"), ("LPIRSI1\n1\n", "truncated")],
)
def test_database_file_malformed(tmp_path, text, match):
    path = tmp_path / "db.txt"
    path.write_text(text)
    with pytest.raises(ValidationError, match=match):
        read_database(path)


def test_server_config(tmp_path, db):
    (tmp_path / "data").mkdir()
    write_database(db, tmp_path / "data" / "db.txt")
    cfg = tmp_path / "srv.cfg"
    cfg.write_text("# server one\nport = 0\nq=7\nK=3\nL=2\ndatabase=data/db.txt\n")
    config = ServerConfig.load(cfg)
    assert config.database == tmp_path / "data" / "db.txt"
    assert config.host == "127.0.0.1"
    assert config.load_database() == db
    cfg.write_text("port=0\nq=11\nK=3\nL=2\ndatabase=data/db.txt\n")
    with pytest.raises(ValidationError, match="config says"):
        ServerConfig.load(cfg).load_database()
    cfg.write_text("port=0\nq=7\n")
    with pytest.raises(ValidationError, match="missing keys"):
        ServerConfig.load(cfg)
    cfg.write_text("port 0\n")
    with pytest.raises(ValidationError, match="key=value"):
        ServerConfig.load(cfg)


def test_parse_endpoint():
    assert parse_endpoint("localhost:9000") == ("localhost", 9000)
    assert parse_endpoint(":81") == ("127.0.0.1", 81)
    with pytest.raises(ValidationError):
        parse_endpoint("localhost")


# ---------------------------------------------------------------------------
# Runner


@pytest.fixture
def servers():
    params = SchemeParams(3, 4, 1, Fraction(1, 2))
    database = Database.random(params.K, params.L, params.q, random.Random(8))
    running = [PIRServer(("127.0.0.1", 0), database) for _ in range(params.N)]
    for s in running:
        s.start_background()
    yield params, database, [("127.0.0.1", s.port) for s in running]
    for s in running:
        s.shutdown()
        s.server_close()


def test_in_process_retrieval(rng):
    params = SchemeParams(3, 3, 1, Fraction(1, 2), variant="ws")
    database = Database.random(3, 2, params.q, rng)
    req = RetrievalRequest(3, (1,))
    for _ in range(50):
        result = run_retrieval(params, req, rng, db=database)
        assert result.message == database.message(3)
        assert result.symbols in (2, 3)
        assert result.normalized_cost in (1.0, 1.5)
        assert len(list(_frames(result.transcript))) == 2 * params.N


def _frames(data: bytes):
    while data:
        payload, data = split_frame(data)
        yield len(payload).to_bytes(4, "big") + payload


def test_networked_retrieval_with_side_info_only(servers):
    params, database, endpoints = servers
    req = RetrievalRequest(1, (2,))
    side = {2: database.message(2)}
    result = run_retrieval(params, req, random.Random(7), endpoints=endpoints, side_info=side)
    assert result.message == database.message(1)
    local = run_retrieval(params, req, random.Random(7), db=database)
    assert result.transcript == local.transcript


def test_self_check_detects_wrong_side_info(servers):
    params, database, endpoints = servers
    req = RetrievalRequest(1, (2,))
    wrong = {2: database.message(3)}
    with pytest.raises(SelfCheckError):
        for seed in range(20):
            run_retrieval(params, req, random.Random(seed), db=database, endpoints=endpoints, side_info=wrong)


def test_unreachable_server_is_transport_error(servers):
    params, database, endpoints = servers
    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    dead = sock.getsockname()[1]
    sock.close()
    with pytest.raises(TransportError):
        run_retrieval(params, RetrievalRequest(1, (2,)), random.Random(1), db=database,
                      endpoints=endpoints[:2] + [("127.0.0.1", dead)], timeout=2.0)


def test_runner_argument_checks(servers):
    params, database, endpoints = servers
    req = RetrievalRequest(1, (2,))
    with pytest.raises(ValidationError, match="needs a database"):
        run_retrieval(params, req, random.Random(1))
    with pytest.raises(ValidationError, match="endpoints"):
        run_retrieval(params, req, random.Random(1), db=database, endpoints=endpoints[:2])
    with pytest.raises(ValidationError, match="side information"):
        run_retrieval(params, req, random.Random(1), endpoints=endpoints)


def test_server_rejects_mismatched_parameters(servers):
    params, database, endpoints = servers
    other = SchemeParams(3, 4, 1, q=251)
    with pytest.raises(ProtocolError, match="rejected"):
        run_retrieval(other, RetrievalRequest(1, (2,)), random.Random(1), endpoints=endpoints,
                      side_info={2: database.message(2)})
