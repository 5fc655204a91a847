"""Message model, random patterns, query construction, answers and decoding.

Conventions used throughout the package:

* messages are numbered ``1..K``; a query is a length-``K`` tuple whose
  Python position ``i - 1`` holds the sub-packet index requested from
  message ``i``;
* sub-packet indices live in ``[0, N-1]`` and index ``0`` is the dummy
  symbol, which is always the field zero;
* servers are numbered ``1..N``; ``pattern.pi[n - 1]`` is the sub-packet of
  the demand message requested from server ``n``;
* an answer is either :data:`EMPTY` (``None``) or an ``int`` field element.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .errors import ParameterError, ProtocolError, ValidationError

DEFAULT_MODULUS = 257

Query = tuple[int, ...]
Answer = Optional[int]
EMPTY: Answer = None


class Variant(enum.Enum):
    W = "w"
    WS = "ws"

    @classmethod
    def parse(cls, value: "str | Variant") -> "Variant":
        if isinstance(value, Variant):
            return value
        try:
            return cls(value.lower())
        except ValueError:
            raise ParameterError(f"unknown variant {value!r} (expected 'w' or 'ws')") from None


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    return all(n % d for d in range(3, math.isqrt(n) + 1, 2))


def field_add(a: int, b: int, q: int) -> int:
    return (a + b) % q


def field_sub(a: int, b: int, q: int) -> int:
    return (a - b) % q


@dataclass(frozen=True)
class SchemeParams:
    """System and scheme parameters.

    ``t`` is the leakage parameter ``exp(-epsilon)`` kept as an exact rational
    so that every derived probability is exact.
    """

    N: int
    K: int
    M: int
    t: Fraction = Fraction(1)
    q: int = DEFAULT_MODULUS
    variant: Variant = Variant.W

    def __post_init__(self):
        object.__setattr__(self, "t", Fraction(self.t))
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        if self.N < 2:
            raise ParameterError(f"N must be at least 2, got {self.N}")
        if self.K < 2:
            raise ParameterError(f"K must be at least 2, got {self.K}")
        if not 0 <= self.M <= self.K - 1:
            raise ParameterError(f"M must lie in [0, K-1] = [0, {self.K - 1}], got {self.M}")
        if not 0 < self.t <= 1:
            raise ParameterError(f"t = exp(-epsilon) must lie in (0, 1], got {self.t}")
        if not is_prime(self.q):
            raise ParameterError(f"field modulus must be prime, got {self.q}")
        if self.variant is Variant.WS and self.M != 1:
            raise ParameterError(f"WS variant requires M=1, got M={self.M}")

    @property
    def L(self) -> int:
        """Sub-packets per message."""
        return self.N - 1

    @property
    def g(self) -> Fraction:
        return Fraction(self.K, self.M + 1)

    @property
    def ceil_g(self) -> int:
        return math.ceil(self.g)

    @property
    def r(self) -> Fraction:
        return (self.N - 1) * self.t

    @property
    def epsilon(self) -> float:
        return -math.log(self.t)

    def replace(self, **changes) -> "SchemeParams":
        values = dict(N=self.N, K=self.K, M=self.M, t=self.t, q=self.q, variant=self.variant)
        values.update(changes)
        return SchemeParams(**values)


@dataclass(frozen=True)
class Message:
    """``L`` field symbols; ``msg[0]`` is the dummy zero and ``msg[1..L]`` the payload."""

    subpackets: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "subpackets", tuple(self.subpackets))

    def __getitem__(self, index: int) -> int:
        if index == 0:
            return 0
        if not 1 <= index <= len(self.subpackets):
            raise IndexError(f"sub-packet index {index} outside [0, {len(self.subpackets)}]")
        return self.subpackets[index - 1]

    def __len__(self) -> int:
        return len(self.subpackets)


@dataclass(frozen=True)
class Database:
    messages: tuple[Message, ...]
    q: int = DEFAULT_MODULUS

    def __post_init__(self):
        msgs = tuple(m if isinstance(m, Message) else Message(m) for m in self.messages)
        object.__setattr__(self, "messages", msgs)
        if msgs:
            L = len(msgs[0])
            if any(len(m) != L for m in msgs):
                raise ValidationError("all messages must have the same length")
        for m in msgs:
            if any(not 0 <= x < self.q for x in m.subpackets):
                raise ValidationError(f"message symbols must lie in [0, {self.q})")

    @property
    def K(self) -> int:
        return len(self.messages)

    @property
    def L(self) -> int:
        return len(self.messages[0]) if self.messages else 0

    def message(self, i: int) -> Message:
        """Message ``i`` using 1-based numbering."""
        if not 1 <= i <= self.K:
            raise IndexError(f"message index {i} outside [1, {self.K}]")
        return self.messages[i - 1]

    @classmethod
    def random(cls, K: int, L: int, q: int, rng) -> "Database":
        return cls(tuple(Message(tuple(rng.randrange(q) for _ in range(L))) for _ in range(K)), q)


@dataclass(frozen=True)
class RetrievalRequest:
    W: int
    S: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "S", tuple(sorted(self.S)))
        if len(set(self.S)) != len(self.S):
            raise ValidationError(f"side information indices must be distinct: {self.S}")
        if self.W in self.S:
            raise ValidationError(f"demand index {self.W} must not be in side information {self.S}")

    def validate(self, params: SchemeParams) -> None:
        if not 1 <= self.W <= params.K:
            raise ValidationError(f"demand index {self.W} outside [1, {params.K}]")
        if any(not 1 <= s <= params.K for s in self.S):
            raise ValidationError(f"side information {self.S} outside [1, {params.K}]")
        if len(self.S) != params.M:
            raise ValidationError(f"|S| = {len(self.S)} but M = {params.M}")

    def unknown(self, K: int) -> tuple[int, ...]:
        known = set(self.S) | {self.W}
        return tuple(i for i in range(1, K + 1) if i not in known)

    @classmethod
    def default(cls, params: SchemeParams, W: int = 1) -> "RetrievalRequest":
        """Demand ``W`` with the first ``M`` other indices as side information."""
        others = [i for i in range(1, params.K + 1) if i != W]
        return cls(W, tuple(others[: params.M]))


@dataclass(frozen=True)
class RandomPattern:
    """One realization of the scheme randomness.

    ``pi[n - 1]`` is the demand sub-packet requested from server ``n``;
    ``f_U`` maps each unknown index to its shared sub-packet index and
    ``f_S0`` / ``f_S1`` map each side-information index to the sub-packet used
    by the inference server / the other servers.
    """

    pi: tuple[int, ...]
    f_U: Mapping[int, int] = field(default_factory=dict)
    f_S0: Mapping[int, int] = field(default_factory=dict)
    f_S1: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "pi", tuple(self.pi))
        if sorted(self.pi) != list(range(len(self.pi))):
            raise ValidationError(f"pi must be a bijection onto [0, N-1], got {self.pi}")

    @property
    def inference_server(self) -> int:
        return self.pi.index(0) + 1

    def server_for_subpacket(self, i: int) -> int:
        return self.pi.index(i) + 1

    def key(self) -> tuple:
        """Hashable form, used when aggregating enumerated patterns."""
        return (
            self.pi,
            tuple(sorted(self.f_U.items())),
            tuple(sorted(self.f_S0.items())),
            tuple(sorted(self.f_S1.items())),
        )


def hamming_weight(query: Sequence[int]) -> int:
    return sum(1 for x in query if x != 0)


def _check_pattern(pattern: RandomPattern, req: RetrievalRequest, params: SchemeParams) -> None:
    if len(pattern.pi) != params.N:
        raise ValidationError(f"pi has {len(pattern.pi)} entries, expected N = {params.N}")
    U = set(req.unknown(params.K))
    if set(pattern.f_U) != U:
        raise ValidationError(f"f_U keyed by {sorted(pattern.f_U)}, expected U = {sorted(U)}")
    S = set(req.S)
    if set(pattern.f_S0) != S or set(pattern.f_S1) != S:
        raise ValidationError(f"f_S0/f_S1 must be keyed by S = {sorted(S)}")
    for f in (pattern.f_U, pattern.f_S0, pattern.f_S1):
        if any(not 0 <= v < params.N for v in f.values()):
            raise ValidationError(f"sub-packet indices must lie in [0, {params.N - 1}]")


def build_queries(pattern: RandomPattern, req: RetrievalRequest, params: SchemeParams) -> list[Query]:
    """Queries for servers ``1..N``; depends only on the pattern and the request."""
    req.validate(params)
    _check_pattern(pattern, req, params)
    n_star = pattern.inference_server
    queries = []
    for n in range(1, params.N + 1):
        q = [0] * params.K
        q[req.W - 1] = pattern.pi[n - 1]
        for u, v in pattern.f_U.items():
            q[u - 1] = v
        side = pattern.f_S0 if n == n_star else pattern.f_S1
        for s, v in side.items():
            q[s - 1] = v
        queries.append(tuple(q))
    return queries


def compute_answer(query: Sequence[int], db: Database) -> Answer:
    if len(query) != db.K:
        raise ValidationError(f"query has {len(query)} entries, database has K = {db.K}")
    if hamming_weight(query) == 0:
        return EMPTY
    return sum(db.messages[i][idx] for i, idx in enumerate(query)) % db.q


def decode(
    answers: Sequence[Answer],
    queries: Sequence[Query],
    pattern: RandomPattern,
    side_info: Mapping[int, Message],
    req: RetrievalRequest,
    params: SchemeParams,
) -> Message:
    """Reconstruct the demand message from the N answers and the side information.

    Each sub-packet ``i`` comes from the server holding ``pi = i`` minus the
    inference server, after stripping from both answers the side-information
    symbols that each server's own query named.
    """
    q = params.q
    n_star = pattern.inference_server
    if set(side_info) != set(req.S):
        raise ValidationError(f"side information keyed by {sorted(side_info)}, expected {list(req.S)}")

    def cleaned(n: int) -> int:
        a = answers[n - 1]
        if a is EMPTY:
            if n != n_star:
                raise ProtocolError(f"server {n} returned an empty answer but is not the inference server")
            a = 0
        return (a - sum(side_info[s][queries[n - 1][s - 1]] for s in req.S)) % q

    base = cleaned(n_star)
    return Message(tuple((cleaned(pattern.server_for_subpacket(i)) - base) % q for i in range(1, params.L + 1)))


def downloaded_symbols(answers: Sequence[Answer]) -> int:
    return sum(1 for a in answers if a is not EMPTY)


def normalized_cost(answers: Sequence[Answer], L: int) -> Fraction:
    return Fraction(downloaded_symbols(answers), L)
