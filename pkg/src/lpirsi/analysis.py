"""Exact leakage certification, download-cost evaluation and parameter sweeps.

Leakage is certified on per-server query laws obtained by summing the exact
probabilities of every pattern in a scheme's support.  A separate brute-force
oracle sums jointly over patterns and all databases of a tiny field to check
that answers add nothing to what the queries leak.
"""

from __future__ import annotations

import csv
import itertools
import logging
import math
import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Iterable, Optional, Sequence

from .core import (
    Database,
    Message,
    RetrievalRequest,
    SchemeParams,
    Variant,
    build_queries,
    compute_answer,
)
from .errors import InfeasibleError, LPIRSIError
from .protocol.runner import run_retrieval
from .schemes import CostModel, empty_probability, enumerate_patterns, leakage_exponent_bound, reference_cost_exact

log = logging.getLogger(__name__)

WORK_GUARD = 10**8


def requests(params: SchemeParams) -> list[RetrievalRequest]:
    """Every admissible ``(W, S)`` pair."""
    out = []
    for W in range(1, params.K + 1):
        others = [i for i in range(1, params.K + 1) if i != W]
        out.extend(RetrievalRequest(W, S) for S in itertools.combinations(others, params.M))
    return out


def _check_feasible(params: SchemeParams) -> None:
    work = params.N**params.K * math.factorial(params.N)
    if work > WORK_GUARD:
        raise InfeasibleError(
            f"pattern space N^K * N! = {work} exceeds {WORK_GUARD}; use Monte Carlo estimation instead"
        )


@dataclass
class QueryLaw:
    """Per-server law of the query for one request: ``laws[n - 1][query] = prob``."""

    req: RetrievalRequest
    laws: list[dict[tuple, Fraction]]

    def prob(self, n: int, query: Sequence[int]) -> Fraction:
        return self.laws[n - 1].get(tuple(query), Fraction(0))


def enumerate_query_law(params: SchemeParams, req: RetrievalRequest) -> QueryLaw:
    _check_feasible(params)
    laws: list[dict] = [defaultdict(Fraction) for _ in range(params.N)]
    for pattern, p in enumerate_patterns(params, req):
        for n, qv in enumerate(build_queries(pattern, req, params)):
            laws[n][qv] += p
    return QueryLaw(req, [dict(d) for d in laws])


@dataclass
class LeakageReport:
    """Largest ratio of observation probabilities between two secrets at one server.

    ``max_ratio`` is ``None`` when some observation is possible under one
    secret and impossible under another (unbounded leakage).
    """

    max_ratio: Optional[Fraction]
    witness: Optional[tuple]
    t: Fraction
    ratios: frozenset = field(default_factory=frozenset)

    @property
    def certified(self) -> bool:
        return self.max_ratio is not None and self.max_ratio <= 1 / self.t

    @property
    def epsilon(self) -> float:
        """Realized leakage exponent ``ln(max_ratio)``."""
        return math.inf if self.max_ratio is None else math.log(self.max_ratio)


def _ratio_report(
    observations: dict[int, dict[Hashable, dict[Hashable, Fraction]]], secrets: Sequence[Hashable], t: Fraction
) -> LeakageReport:
    """Maximise ``P[obs | a] / P[obs | b]`` over servers, observations and ``a != b``.

    ``observations[n][obs][secret]`` holds the probability; missing entries
    are zero.  Observations impossible under every secret are ignored.
    """
    best: Optional[Fraction] = Fraction(0)
    witness = None
    ratios: set[Fraction] = set()
    for n in sorted(observations):
        for obs, by_secret in observations[n].items():
            values = [by_secret.get(s, Fraction(0)) for s in secrets]
            counts = Counter(values)
            if any(c > 1 for c in counts.values()):
                ratios.add(Fraction(1))
            hi = max(values)
            lo = min(values)
            if lo == 0:
                best = None
                witness = (n, obs, secrets[values.index(hi)], secrets[values.index(lo)])
                return LeakageReport(None, witness, t, frozenset(ratios))
            distinct = sorted(counts)
            for a, b in itertools.permutations(distinct, 2):
                ratios.add(a / b)
            if hi / lo > best:
                best = hi / lo
                witness = (n, obs, secrets[values.index(hi)], secrets[values.index(lo)])
    return LeakageReport(best, witness, t, frozenset(ratios))


def _secret(params: SchemeParams, req: RetrievalRequest):
    return req.W if params.variant is Variant.W else (req.W, req.S)


def query_observations(params: SchemeParams) -> tuple[dict, list]:
    """Per-server query probabilities keyed by the protected secret.

    For the W variant the side-information set is averaged out uniformly
    over its ``C(K-1, M)`` choices, since only ``W`` is protected.
    """
    _check_feasible(params)
    reqs = requests(params)
    weight = Fraction(1, math.comb(params.K - 1, params.M)) if params.variant is Variant.W else Fraction(1)
    obs: dict[int, dict] = {n: defaultdict(lambda: defaultdict(Fraction)) for n in range(1, params.N + 1)}
    for req in reqs:
        secret = _secret(params, req)
        law = enumerate_query_law(params, req)
        for n in range(1, params.N + 1):
            for qv, p in law.laws[n - 1].items():
                obs[n][qv][secret] += weight * p
    secrets = sorted({_secret(params, r) for r in reqs})
    return obs, secrets


def max_leakage_ratio(params: SchemeParams) -> LeakageReport:
    obs, secrets = query_observations(params)
    return _ratio_report(obs, secrets, params.t)


def joint_leakage_oracle(params: SchemeParams, small_q: int = 2) -> LeakageReport:
    """Brute-force leakage over (query, answer) pairs for uniform databases in ``F_small_q``."""
    params = params.replace(q=small_q)
    K, L = params.K, params.L
    n_db = small_q ** (K * L)
    reqs = requests(params)
    support = {r: list(enumerate_patterns(params, r)) for r in reqs}
    work = n_db * max(len(s) for s in support.values())
    if work > WORK_GUARD:
        raise InfeasibleError(f"joint enumeration needs {work} steps, above {WORK_GUARD}")
    databases = [
        Database(tuple(Message(values[i * L : (i + 1) * L]) for i in range(K)), small_q)
        for values in itertools.product(range(small_q), repeat=K * L)
    ]
    p_db = Fraction(1, n_db)
    weight = Fraction(1, math.comb(K - 1, params.M)) if params.variant is Variant.W else Fraction(1)
    obs: dict[int, dict] = {n: defaultdict(lambda: defaultdict(Fraction)) for n in range(1, params.N + 1)}
    for req in reqs:
        secret = _secret(params, req)
        for pattern, p in support[req]:
            queries = build_queries(pattern, req, params)
            for n, qv in enumerate(queries, start=1):
                answers = Counter(compute_answer(qv, db) for db in databases)
                for a, count in answers.items():
                    obs[n][(qv, a)][secret] += weight * p * p_db * count
    secrets = sorted({_secret(params, r) for r in reqs})
    return _ratio_report(obs, secrets, params.t)


# ---------------------------------------------------------------------------
# Download cost


def exact_download_cost(params: SchemeParams) -> Fraction:
    return 1 + (1 - empty_probability(params)) / (params.N - 1)


def theorem_cost(params: SchemeParams) -> Fraction:
    model = CostModel.LPIRSI_W if params.variant is Variant.W else CostModel.LPIRSI_WS
    return reference_cost_exact(model, params.N, params.K, params.M, params.t)


def estimate_download_cost(
    params: SchemeParams, trials: int, seed: int, req: Optional[RetrievalRequest] = None
) -> tuple[float, float]:
    """Monte Carlo mean and standard error of the normalized download cost.

    Every trial is a full in-process retrieval with self-check enabled.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = random.Random(seed)
    req = req or RetrievalRequest.default(params)
    db = Database.random(params.K, params.L, params.q, rng)
    counts = Counter(run_retrieval(params, req, rng, db).symbols for _ in range(trials))
    L = params.L
    mean = sum(c * k for k, c in counts.items()) / (trials * L)
    if trials == 1:
        return mean, 0.0
    var = sum(c * (k / L - mean) ** 2 for k, c in counts.items()) / (trials - 1)
    return mean, math.sqrt(var / trials)


# ---------------------------------------------------------------------------
# Sweeps

SWEEP_COLUMNS = (
    "variant",
    "N",
    "K",
    "M",
    "t",
    "epsilon",
    "exact_cost",
    "measured_cost",
    "measured_stderr",
    "certified_max_leakage",
    "leakage_bound",
    "error",
)


def _fmt(x) -> str:
    if x is None or x == "":
        return ""
    if isinstance(x, str):
        return x
    return f"{float(x):.12g}"


def sweep(
    grid: Iterable[tuple[int, int, int, Fraction]],
    variant: "Variant | str",
    trials: int = 0,
    seed: int = 0,
    q: int = 257,
    certify: bool = True,
) -> list[dict]:
    """Evaluate each ``(N, K, M, t)`` point; failures land in the ``error`` column."""
    variant = Variant.parse(variant)
    rows = []
    for N, K, M, t in grid:
        row = dict.fromkeys(SWEEP_COLUMNS, "")
        row.update(variant=variant.value, N=N, K=K, M=M, t=str(Fraction(t)))
        errors = []
        try:
            params = SchemeParams(N, K, M, Fraction(t), q, variant)
            row["epsilon"] = _fmt(params.epsilon)
            cost = exact_download_cost(params)
            row["exact_cost"] = _fmt(cost)
            if cost > 1:
                row["leakage_bound"] = _fmt(leakage_exponent_bound(variant, cost, params))
            if trials:
                mean, se = estimate_download_cost(params, trials, seed)
                row["measured_cost"], row["measured_stderr"] = _fmt(mean), _fmt(se)
            if certify:
                try:
                    row["certified_max_leakage"] = _fmt(max_leakage_ratio(params).epsilon)
                except InfeasibleError as exc:
                    errors.append(str(exc))
        except LPIRSIError as exc:
            errors.append(str(exc))
        row["error"] = "; ".join(errors)
        if errors:
            log.info("sweep point N=%s K=%s M=%s t=%s: %s", N, K, M, t, row["error"])
        rows.append(row)
    return rows


def write_csv(rows: Sequence[dict], stream) -> None:
    writer = csv.DictWriter(stream, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: row.get(k, "") for k in SWEEP_COLUMNS})
