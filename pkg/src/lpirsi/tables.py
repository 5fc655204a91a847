"""Pattern-support tables conditioned on a fixed permutation, and fixture checks."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from typing import Optional, Sequence

from .core import RetrievalRequest, SchemeParams, Variant, build_queries, hamming_weight
from .schemes import enumerate_patterns, w_weight_levels


@dataclass(frozen=True)
class TableRow:
    f_U: str
    f_S0: str
    f_S1: str
    level: int
    prob: Fraction
    queries: tuple[tuple[int, ...], ...]

    @property
    def columns(self) -> tuple[str, str, str]:
        return (self.f_U, self.f_S0, self.f_S1)


def _digits(mapping) -> str:
    return "".join(str(mapping[i]) for i in sorted(mapping))


def symbolic_answer(query: Sequence[int]) -> str:
    if hamming_weight(query) == 0:
        return "(empty)"
    return "+".join(f"X{i}[{v}]" for i, v in enumerate(query, start=1) if v)


def support_table(params: SchemeParams, req: RetrievalRequest, pi: Sequence[int]) -> list[TableRow]:
    """Rows of the pattern support with the given ``pi``, in lexicographic column order.

    ``prob`` is the joint probability of the row, permutation included.
    """
    if params.variant is Variant.W:
        ells = [lvl.ell for lvl in w_weight_levels(params)]
    rows = []
    for pattern, p in enumerate_patterns(params, req, pi=pi):
        weight = hamming_weight(pattern.f_U.values())
        level = ells.index(weight) if params.variant is Variant.W else weight
        rows.append(
            TableRow(
                _digits(pattern.f_U),
                _digits(pattern.f_S0),
                _digits(pattern.f_S1),
                level,
                p,
                tuple(build_queries(pattern, req, params)),
            )
        )
    rows.sort(key=lambda r: (r.level, r.columns))
    return rows


def group_probabilities(rows: Sequence[TableRow]) -> dict[int, Fraction]:
    """Total probability per level; equals ``P_level / N!`` for one fixed permutation."""
    out: dict[int, Fraction] = {}
    for row in rows:
        out[row.level] = out.get(row.level, Fraction(0)) + row.prob
    return out


def render_table(params: SchemeParams, rows: Sequence[TableRow]) -> str:
    header = ["f_U", "f_S0", "f_S1"]
    for n in range(1, params.N + 1):
        header += [f"q{n}", f"a{n}"]
    header += ["level", "prob"]
    body = []
    for row in rows:
        cells = list(row.columns)
        for qv in row.queries:
            cells += ["".join(map(str, qv)), symbolic_answer(qv)]
        cells += [str(row.level), str(row.prob)]
        body.append(cells)
    widths = [max(len(h), *(len(b[i]) for b in body)) if body else len(h) for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.ljust(w) for c, w in zip(cells, widths)) for cells in body]
    groups = group_probabilities(rows)
    fact = math.factorial(params.N)
    lines.append("")
    for level in sorted(groups):
        lines.append(f"level {level}: total {groups[level]} = (1/{fact}) * {groups[level] * fact}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Embedded fixtures


@dataclass(frozen=True)
class Fixture:
    name: str
    params: SchemeParams
    req: RetrievalRequest
    pi: tuple[int, ...]
    complete: bool
    rows: frozenset
    group_sizes: dict


def load_fixtures(t: Fraction = Fraction(1)) -> list[Fixture]:
    """Reference fixtures I-IV rebuilt from their pattern columns; ``complete`` is false for the elided IV."""
    raw = json.loads(resources.files("lpirsi.fixtures").joinpath("tables.json").read_text(encoding="utf-8"))
    out = []
    for tab in raw["tables"]:
        params = SchemeParams(tab["N"], tab["K"], tab["M"], t, variant=tab["variant"])
        rows = frozenset((r["f_U"], r["f_S0"], r["f_S1"], r["level"]) for r in tab["rows"])
        out.append(
            Fixture(
                tab["name"],
                params,
                RetrievalRequest(tab["W"], tuple(tab["S"])),
                tuple(tab["pi"]),
                tab["complete"],
                rows,
                {int(k): v for k, v in tab["group_sizes"].items()},
            )
        )
    return out


def find_fixture(params: SchemeParams) -> Optional[Fixture]:
    for fx in load_fixtures(params.t):
        p = fx.params
        if (p.N, p.K, p.M, p.variant) == (params.N, params.K, params.M, params.variant):
            return fx
    return None


@dataclass
class FixtureCheck:
    fixture: Fixture
    missing: set
    extra: set
    group_sizes: dict

    @property
    def ok(self) -> bool:
        return not self.missing and not self.extra and self.group_sizes == self.fixture.group_sizes


def check_fixture(fx: Fixture) -> FixtureCheck:
    """Compare enumerated support against a fixture.

    Complete fixtures must match exactly; an elided one must be a subset of
    the enumerated support, with per-level row counts matching.
    """
    rows = support_table(fx.params, fx.req, fx.pi)
    got = {(r.f_U, r.f_S0, r.f_S1, r.level) for r in rows}
    sizes: dict[int, int] = {}
    for r in rows:
        sizes[r.level] = sizes.get(r.level, 0) + 1
    missing = set(fx.rows - got)
    extra = set(got - fx.rows) if fx.complete else set()
    return FixtureCheck(fx, missing, extra, sizes)
