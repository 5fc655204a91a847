"""Random-pattern distributions for the two leaky schemes and closed-form costs.

All probabilities are exact :class:`fractions.Fraction` values, polynomial in
the leakage parameter ``t = exp(-epsilon)``.  Samplers take an externally
owned :class:`random.Random` and draw weighted categories by inverting the
exact cumulative distribution against a 64-bit uniform integer, so a seed
fully determines every realization.
"""

from __future__ import annotations

import bisect
import enum
import functools
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterator, Sequence

from .core import RandomPattern, RetrievalRequest, SchemeParams, Variant
from .errors import ParameterError

_TWO_64 = 1 << 64


@dataclass(frozen=True)
class Distribution:
    """Finite distribution with exact rational probabilities."""

    support: tuple[Any, ...]
    probs: tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(self.support))
        object.__setattr__(self, "probs", tuple(Fraction(p) for p in self.probs))
        if len(self.support) != len(self.probs):
            raise ValueError("support and probs must have equal length")
        if any(p < 0 for p in self.probs):
            raise ValueError(f"negative probability in {self.probs}")
        if sum(self.probs) != 1:
            raise ValueError(f"probabilities sum to {sum(self.probs)}, not 1")

    def __getitem__(self, outcome) -> Fraction:
        for x, p in zip(self.support, self.probs):
            if x == outcome:
                return p
        return Fraction(0)

    def items(self):
        return zip(self.support, self.probs)

    @functools.cached_property
    def _thresholds(self) -> list[int]:
        # integer u satisfies u / 2^64 < c  iff  u < ceil(c * 2^64)
        out, acc = [], Fraction(0)
        for p in self.probs:
            acc += p
            out.append(-((-acc.numerator * _TWO_64) // acc.denominator))
        return out

    def sample(self, rng) -> Any:
        """Cumulative inversion against ``u / 2**64`` with ``u`` a 64-bit draw."""
        u = rng.getrandbits(64)
        return self.support[bisect.bisect_right(self._thresholds, u)]


def generalized_binomial(a: Fraction, k: int) -> Fraction:
    """``a (a-1) ... (a-k+1) / k!`` for rational ``a``; called with ``a = g - 1``."""
    if k < 0:
        raise ParameterError(f"k must be non-negative, got {k}")
    a = Fraction(a)
    out = Fraction(1)
    for j in range(k):
        out *= a - j
    return out / math.factorial(k)


def _require(params: SchemeParams, variant: Variant) -> None:
    if params.variant is not variant:
        raise ParameterError(f"operation requires the {variant.value} variant, got {params.variant.value}")


# ---------------------------------------------------------------------------
# W-privacy scheme


@dataclass(frozen=True)
class WeightLevel:
    k: int
    ell: int
    s0_weight: int


def _w_level_weights(N: int, K: int, M: int, t: Fraction) -> list[Fraction]:
    g = Fraction(K, M + 1)
    return [generalized_binomial(g - 1, k) * (N - 1) ** k * t**k for k in range(math.ceil(g))]


@functools.lru_cache(maxsize=256)
def w_level_distribution(params: SchemeParams) -> Distribution:
    """Law of the level ``k`` in ``[0, ceil(g) - 1]``."""
    _require(params, Variant.W)
    weights = _w_level_weights(params.N, params.K, params.M, params.t)
    total = sum(weights)
    return Distribution(tuple(range(len(weights))), tuple(w / total for w in weights))


@functools.lru_cache(maxsize=256)
def w_weight_levels(params: SchemeParams) -> tuple[WeightLevel, ...]:
    _require(params, Variant.W)
    K, M = params.K, params.M
    levels = []
    for k in range(params.ceil_g):
        ell = min(k * (M + 1), K - M - 1)
        levels.append(WeightLevel(k, ell, k * (M + 1) - ell))
    return tuple(levels)


def _uniform_weight_vector(keys: Sequence[int], weight: int, N: int, rng) -> dict[int, int]:
    """Uniform over vectors on ``keys`` with exactly ``weight`` entries in ``[1, N-1]``."""
    chosen = set(rng.sample(list(keys), weight))
    return {i: (1 + rng.randrange(N - 1) if i in chosen else 0) for i in keys}


def _uniform_permutation(N: int, rng) -> tuple[int, ...]:
    pi = list(range(N))
    rng.shuffle(pi)
    return tuple(pi)


def sample_pattern_w(params: SchemeParams, req: RetrievalRequest, rng) -> RandomPattern:
    _require(params, Variant.W)
    req.validate(params)
    N = params.N
    U = req.unknown(params.K)
    pi = _uniform_permutation(N, rng)
    level = w_weight_levels(params)[w_level_distribution(params).sample(rng)]
    f_U = _uniform_weight_vector(U, level.ell, N, rng)
    f_S1 = {s: 1 + rng.randrange(N - 1) for s in req.S}
    f_S0 = _uniform_weight_vector(req.S, level.s0_weight, N, rng)
    return RandomPattern(pi, f_U, f_S0, f_S1)


# ---------------------------------------------------------------------------
# (W,S)-privacy scheme, M = 1


@functools.lru_cache(maxsize=256)
def ws_level_distribution(params: SchemeParams) -> Distribution:
    """Law of the weight ``ell`` of ``f_U`` over ``[0, K-2]``."""
    _require(params, Variant.WS)
    r, n = params.r, params.K - 2
    total = (r + 1) ** n
    return Distribution(tuple(range(n + 1)), tuple(math.comb(n, ell) * r**ell / total for ell in range(n + 1)))


@functools.lru_cache(maxsize=256)
def ws_side_conditional(ell: int, j: int, params: SchemeParams) -> Distribution:
    """Law of the side-information weight ``s_j`` given ``ell``; ``j = 0`` is the inference server."""
    _require(params, Variant.WS)
    if j not in (0, 1):
        raise ParameterError(f"j must be 0 or 1, got {j}")
    r = params.r
    if r < 1:
        raise ParameterError(f"WS scheme requires r ≥ 1, got r = (N-1)t = {r}")
    probs = []
    for s in (0, 1):
        e = ell + s + j
        probs.append((r**e + (-1) ** e * r) / ((r + 1) * r ** (ell + j)))
    return Distribution((0, 1), probs)


def sample_pattern_ws(params: SchemeParams, req: RetrievalRequest, rng) -> RandomPattern:
    _require(params, Variant.WS)
    req.validate(params)
    N = params.N
    U = req.unknown(params.K)
    pi = _uniform_permutation(N, rng)
    ell = ws_level_distribution(params).sample(rng)
    f_U = _uniform_weight_vector(U, ell, N, rng)
    s0 = ws_side_conditional(ell, 0, params).sample(rng)
    s1 = ws_side_conditional(ell, 1, params).sample(rng)
    f_S0 = _uniform_weight_vector(req.S, s0, N, rng)
    f_S1 = _uniform_weight_vector(req.S, s1, N, rng)
    return RandomPattern(pi, f_U, f_S0, f_S1)


def sample_pattern(params: SchemeParams, req: RetrievalRequest, rng) -> RandomPattern:
    if params.variant is Variant.W:
        return sample_pattern_w(params, req, rng)
    return sample_pattern_ws(params, req, rng)


# ---------------------------------------------------------------------------
# Exact enumeration of the pattern law


def _weight_vectors(keys: Sequence[int], weight: int, N: int) -> Iterator[dict[int, int]]:
    for support in itertools.combinations(keys, weight):
        for values in itertools.product(range(1, N), repeat=weight):
            vec = dict.fromkeys(keys, 0)
            vec.update(zip(support, values))
            yield vec


def _weight_vector_count(n_keys: int, weight: int, N: int) -> int:
    return math.comb(n_keys, weight) * (N - 1) ** weight


def _side_laws(params: SchemeParams, req: RetrievalRequest) -> Iterator[tuple[Fraction, dict, dict, dict]]:
    """Yield ``(prob, f_U, f_S0, f_S1)`` over the support, excluding ``pi``."""
    N, S = params.N, req.S
    U = req.unknown(params.K)
    if params.variant is Variant.W:
        levels = w_weight_levels(params)
        for k, pk in w_level_distribution(params).items():
            if pk == 0:
                continue
            lvl = levels[k]
            p_u = Fraction(1, _weight_vector_count(len(U), lvl.ell, N))
            p_s0 = Fraction(1, _weight_vector_count(len(S), lvl.s0_weight, N))
            p_s1 = Fraction(1, (N - 1) ** len(S))
            for f_U in _weight_vectors(U, lvl.ell, N):
                for f_S0 in _weight_vectors(S, lvl.s0_weight, N):
                    for f_S1 in _weight_vectors(S, len(S), N):
                        yield pk * p_u * p_s0 * p_s1, f_U, f_S0, f_S1
        return
    for ell, pl in ws_level_distribution(params).items():
        if pl == 0:
            continue
        p_u = Fraction(1, _weight_vector_count(len(U), ell, N))
        law0 = ws_side_conditional(ell, 0, params)
        law1 = ws_side_conditional(ell, 1, params)
        for s0, p0 in law0.items():
            if p0 == 0:
                continue
            for s1, p1 in law1.items():
                if p1 == 0:
                    continue
                p_side = (p0 / _weight_vector_count(len(S), s0, N)) * (p1 / _weight_vector_count(len(S), s1, N))
                for f_U in _weight_vectors(U, ell, N):
                    for f_S0 in _weight_vectors(S, s0, N):
                        for f_S1 in _weight_vectors(S, s1, N):
                            yield pl * p_u * p_side, f_U, f_S0, f_S1


def enumerate_patterns(params: SchemeParams, req: RetrievalRequest, pi=None) -> Iterator[tuple[RandomPattern, Fraction]]:
    """Every pattern in the scheme's support with its exact joint probability.

    With ``pi`` given, only patterns with that permutation are produced; their
    probabilities remain joint, i.e. include the ``1/N!`` of the permutation.
    """
    req.validate(params)
    p_pi = Fraction(1, math.factorial(params.N))
    perms = [tuple(pi)] if pi is not None else list(itertools.permutations(range(params.N)))
    side = list(_side_laws(params, req))
    for perm in perms:
        for p, f_U, f_S0, f_S1 in side:
            yield RandomPattern(perm, f_U, f_S0, f_S1), p_pi * p


def empty_probability(params: SchemeParams) -> Fraction:
    """Probability that the inference server's query is all-zero."""
    if params.variant is Variant.W:
        return w_level_distribution(params)[0]
    return ws_level_distribution(params)[0] * ws_side_conditional(0, 0, params)[0]


# ---------------------------------------------------------------------------
# Closed-form download costs and leakage bounds


class CostModel(enum.Enum):
    PIR = "pir"                  # replicated PIR, no side information
    PIR_SI_WS = "pir_si_ws"      # perfect (W,S)-privacy with side information
    PIR_SI_W_GEOM = "pir_si_w_geom"  # earlier geometric bound under W-privacy
    PIR_SI_W_UB = "pir_si_w_ub"  # generalized-binomial bound under W-privacy
    L_PIR = "l_pir"              # leaky PIR, no side information
    LPIRSI_W = "lpirsi_w"
    LPIRSI_WS = "lpirsi_ws"


def _cost_from_inverse_p0(N: int, inv_p0: Fraction) -> Fraction:
    return 1 + Fraction(1, N - 1) * (1 - 1 / Fraction(inv_p0))


def reference_cost_exact(model: "CostModel | str", N: int, K: int, M: int = 0, t=1) -> Fraction:
    """Exact rational value of a closed-form download cost."""
    model = CostModel(model) if not isinstance(model, CostModel) else model
    t = Fraction(t)
    if N < 2 or K < 2 or not 0 <= M <= K - 1:
        raise ParameterError(f"invalid (N, K, M) = ({N}, {K}, {M})")
    if not 0 < t <= 1:
        raise ParameterError(f"t must lie in (0, 1], got {t}")
    g = Fraction(K, M + 1)
    if model is CostModel.PIR:
        return sum(Fraction(1, N**i) for i in range(K))
    if model is CostModel.PIR_SI_WS:
        return _cost_from_inverse_p0(N, Fraction(N) ** (K - M - 1))
    if model is CostModel.PIR_SI_W_GEOM:
        return _cost_from_inverse_p0(N, Fraction(N) ** (math.ceil(g) - 1))
    if model is CostModel.PIR_SI_W_UB:
        return _cost_from_inverse_p0(N, sum(_w_level_weights(N, K, M, Fraction(1))))
    if model is CostModel.L_PIR:
        return _cost_from_inverse_p0(N, ((N - 1) * t + 1) ** (K - 1))
    if model is CostModel.LPIRSI_W:
        return _cost_from_inverse_p0(N, sum(_w_level_weights(N, K, M, t)))
    if M != 1:
        raise ParameterError(f"WS variant requires M=1, got M={M}")
    return _cost_from_inverse_p0(N, ((N - 1) * t + 1) ** (K - 2))


def reference_cost(model: "CostModel | str", N: int, K: int, M: int = 0, t=1) -> float:
    return float(reference_cost_exact(model, N, K, M, t))


def _neg_log_one_minus(x: Fraction) -> float:
    """``-ln(1 - x)`` for exact rational ``0 <= x < 1`` without cancellation."""
    if x < Fraction(1, 2):
        return -math.log1p(-float(x))
    y = 1 - x
    return -(math.log(y.numerator) - math.log(y.denominator))


def leakage_exponent_bound(variant: "Variant | str", D, params: SchemeParams) -> float:
    """Largest leakage exponent compatible with download cost ``D``.

    Returns ``-inf`` at ``D = 1 + 1/(N-1)``, where no leakage is needed.
    """
    variant = Variant.parse(variant)
    N, K = params.N, params.K
    D = Fraction(D)
    top = 1 + Fraction(1, N - 1)
    if not 1 < D <= top:
        raise ParameterError(f"D must lie in (1, {top}], got {float(D)}")
    if D == top:
        return -math.inf
    C = _neg_log_one_minus((N - 1) * (D - 1))
    if variant is Variant.W:
        terms = params.ceil_g - 1
    else:
        if params.M != 1:
            raise ParameterError(f"WS variant requires M=1, got M={params.M}")
        terms = K - 2
    if terms <= 0:
        raise ParameterError("no admissible download cost above 1 for these parameters")
    return math.log(terms * (N - 1)) - math.log(C)
