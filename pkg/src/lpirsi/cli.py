"""Command-line entry point.

Exit codes: 0 success or certified, 1 self-check or certification failure,
2 usage or parameter-domain error, 3 infeasible enumeration, 4 transport error.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import random
import sys
from fractions import Fraction
from typing import Optional, Sequence

from . import analysis, tables
from .core import Database, RetrievalRequest, SchemeParams, Variant
from .errors import (
    InfeasibleError,
    LPIRSIError,
    ParameterError,
    ProtocolError,
    SelfCheckError,
    TransportError,
    ValidationError,
)
from .protocol import PIRServer, ServerConfig, parse_endpoint, read_database, run_retrieval

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_TRANSPORT = 4

log = logging.getLogger("lpirsi")


class UsageError(Exception):
    pass


def _rational(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def _int_list(text: str) -> list[int]:
    """``3``, ``3,5,7`` or an inclusive range ``3:8``."""
    out = []
    for part in text.split(","):
        lo, sep, hi = part.partition(":")
        try:
            out.extend(range(int(lo), int(hi) + 1) if sep else [int(part)])
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected integers or lo:hi ranges, got {text!r}") from None
    return out


def _leakage_t(args) -> tuple[Fraction, bool]:
    """Leakage parameter from ``--t`` or ``--epsilon``; flag says whether it is exact."""
    if args.t is not None:
        return args.t, True
    eps = args.epsilon
    if eps < 0:
        raise UsageError(f"epsilon must be non-negative, got {eps}")
    if eps == 0:
        return Fraction(1), True
    return Fraction(math.exp(-eps)).limit_denominator(10**12), False


def _params(args, N=None, K=None, M=None, q=None) -> SchemeParams:
    t, _ = _leakage_t(args)
    return SchemeParams(
        N if N is not None else args.n,
        K if K is not None else args.k,
        M if M is not None else args.m,
        t,
        q if q is not None else args.q,
        args.variant,
    )


def _request(args, params: SchemeParams) -> RetrievalRequest:
    if args.s is None:
        req = RetrievalRequest.default(params, args.w)
    else:
        req = RetrievalRequest(args.w, tuple(args.s))
    req.validate(params)
    return req


def _add_scheme_args(p: argparse.ArgumentParser, grid: bool = False) -> None:
    kind, wrap = (_int_list, lambda v: [v]) if grid else (int, lambda v: v)
    p.add_argument("--n", type=kind, default=wrap(3), help="number of servers N")
    p.add_argument("--k", type=kind, default=wrap(3), help="number of messages K")
    p.add_argument("--m", type=kind, default=wrap(1), help="side information size M")
    leak = p.add_mutually_exclusive_group()
    leak.add_argument("--epsilon", type=float, default=0.0, help="leakage exponent (decimal)")
    leak.add_argument("--t", type=_rational, default=None, help="exact t = exp(-epsilon), e.g. 1/2")
    p.add_argument("--q", type=int, default=257, help="prime field modulus")
    p.add_argument("--variant", choices=["w", "ws"], default="w")
    p.add_argument("--seed", type=int, default=0)


def _add_request_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--w", type=int, default=1, help="demand index W")
    p.add_argument("--s", type=_int_list, default=None, help="side information indices, e.g. 2 or 2,3")


# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    params = _params(args)
    req = _request(args, params)
    exact = analysis.exact_download_cost(params)
    print(f"parameters: N={params.N} K={params.K} M={params.M} t={params.t} variant={params.variant.value}")
    print(f"request: W={req.W} S={list(req.S)}")
    print(f"exact cost = {exact} ({float(exact):.12g})")
    if args.trials > 0:
        mean, se = analysis.estimate_download_cost(params, args.trials, args.seed, req)
        sigmas = abs(mean - float(exact)) / se if se > 0 else 0.0
        print(f"measured cost = {mean:.6f} +/- {se:.6f} (trials={args.trials}, seed={args.seed}, {sigmas:.2f} stderr from exact)")
    return EXIT_OK


def _describe(report: analysis.LeakageReport) -> str:
    if report.max_ratio is None:
        return "max ratio = unbounded (an observation is impossible under some secret)"
    bound = 1 / report.t
    if report.max_ratio == bound:
        rel = f"= e^eps = {bound}"
    elif report.max_ratio < bound:
        rel = f"<= e^eps = {bound}"
    else:
        rel = f"> e^eps = {bound}"
    return f"max ratio = {report.max_ratio} {rel}"


def cmd_verify(args) -> int:
    t, exact = _leakage_t(args)
    if not exact:
        print(
            f"note: exact certification requires rational t; using t = {t} as a rational approximation "
            f"of exp(-{args.epsilon}). Pass --t for an exact value."
        )
    params = _params(args)
    reports = [("query", analysis.max_leakage_ratio(params))]
    if args.joint:
        reports.append((f"joint (q={args.small_q})", analysis.joint_leakage_oracle(params, args.small_q)))
    ok = True
    for label, report in reports:
        status = "certified" if report.certified else "NOT certified"
        ok &= report.certified
        print(f"{label}: {_describe(report)}, {status}")
        print(f"  realized ratios: {', '.join(str(r) for r in sorted(report.ratios))}")
        if report.witness is not None:
            n, obs, a, b = report.witness
            print(f"  witness: server {n}, observation {obs}, secrets {a} vs {b}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_table(args) -> int:
    params = _params(args)
    if args.check:
        fx = tables.find_fixture(params)
        if fx is None:
            names = ", ".join(
                f"{f.name}: N={f.params.N} K={f.params.K} M={f.params.M} variant={f.params.variant.value}"
                for f in tables.load_fixtures()
            )
            print(f"no embedded fixture for these parameters; available: {names}", file=sys.stderr)
            return EXIT_USAGE
        result = tables.check_fixture(fx)
        kind = "support equality" if fx.complete else "listed rows contained in support"
        print(f"fixture {fx.name}: {kind}: {'ok' if not result.missing and not result.extra else 'MISMATCH'}")
        print(f"  rows per level: {result.group_sizes} (expected {fx.group_sizes})")
        for row in sorted(result.missing):
            print(f"  missing: {row}")
        for row in sorted(result.extra):
            print(f"  unexpected: {row}")
        return EXIT_OK if result.ok else EXIT_FAIL
    pi = tuple(args.pi) if args.pi is not None else tuple(range(params.N))
    if sorted(pi) != list(range(params.N)):
        raise UsageError(f"--pi must be a permutation of 0..{params.N - 1}")
    req = _request(args, params)
    rows = tables.support_table(params, req, pi)
    print(f"pi = {pi}, W = {req.W}, S = {list(req.S)}, U = {list(req.unknown(params.K))}, t = {params.t}")
    print(tables.render_table(params, rows))
    return EXIT_OK


def cmd_sweep(args) -> int:
    t, _ = _leakage_t(args)
    ts = args.t_list or [t]
    grid = [(N, K, M, tt) for N in args.n for K in args.k for M in args.m for tt in ts]
    rows = analysis.sweep(grid, args.variant, trials=args.trials, seed=args.seed, q=args.q, certify=not args.no_certify)
    if args.output and args.output != "-":
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            analysis.write_csv(rows, fh)
        print(f"wrote {len(rows)} rows to {args.output}")
    else:
        analysis.write_csv(rows, sys.stdout)
    return EXIT_OK


def cmd_serve(args) -> int:
    config = ServerConfig.load(args.config)
    db = config.load_database()
    try:
        server = PIRServer((config.host, config.port), db)
    except OSError as exc:
        raise TransportError(f"cannot bind {config.host}:{config.port}: {exc}") from None
    print(f"serving K={db.K} L={db.L} q={db.q} on {config.host}:{server.port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def cmd_query(args) -> int:
    endpoints = [parse_endpoint(e) for e in args.servers.split(",")]
    local = read_database(args.db)
    params = _params(args, N=len(endpoints), K=local.K, q=local.q)
    if local.L != params.L:
        raise UsageError(f"database has L={local.L} but {len(endpoints)} servers need L={params.L}")
    req = _request(args, params)
    side_info = {s: local.message(s) for s in req.S}
    rng = random.Random(args.seed)
    result = run_retrieval(
        params,
        req,
        rng,
        db=local if args.self_check else None,
        endpoints=endpoints,
        side_info=side_info,
        self_check=args.self_check,
        timeout=args.timeout,
    )
    print(f"X{req.W} = {' '.join(map(str, result.message.subpackets))}")
    print(f"symbols = {result.symbols}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lpirsi", description="Leaky PIR with side information")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run retrievals and compare measured against exact download cost")
    _add_scheme_args(p)
    _add_request_args(p)
    p.add_argument("--trials", type=int, default=10000)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="certify leakage by exact enumeration")
    _add_scheme_args(p)
    p.add_argument("--joint", action="store_true", help="also run the joint (query, answer) oracle")
    p.add_argument("--small-q", type=int, default=2, help="field size for the joint oracle")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("table", help="print the pattern support for a fixed permutation")
    _add_scheme_args(p)
    _add_request_args(p)
    p.add_argument("--pi", type=_int_list, default=None, help="permutation, e.g. 0,1,2")
    p.add_argument("--check", action="store_true", help="compare against the embedded reference fixtures")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("sweep", help="write a CSV of costs and leakage over a parameter grid")
    _add_scheme_args(p, grid=True)
    p.add_argument("--t-list", type=lambda s: [_rational(x) for x in s.split(",")], default=None,
                   help="comma-separated exact t values; overrides --t/--epsilon")
    p.add_argument("--trials", type=int, default=0, help="Monte Carlo trials per point (0 disables)")
    p.add_argument("--no-certify", action="store_true", help="skip exact leakage enumeration")
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("serve", help="run one answer server")
    p.add_argument("--config", required=True, help="key=value file with port, q, K, L, database")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("query", help="retrieve one message from N running servers")
    _add_scheme_args(p)
    _add_request_args(p)
    p.add_argument("--servers", required=True, help="comma-separated host:port list, one per server")
    p.add_argument("--db", required=True, help="local database file supplying K, q and the side information")
    p.add_argument("--self-check", action="store_true", help="compare the result against --db")
    p.add_argument("--timeout", type=float, default=10.0)
    p.set_defaults(func=cmd_query)
    return parser


def _configure_logging() -> None:
    level = os.environ.get("LPIRSI_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")


def main(argv: Optional[Sequence[str]] = None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ParameterError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except TransportError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (SelfCheckError, ProtocolError) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except LPIRSIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
