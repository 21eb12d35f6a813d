"""Command-line front end: ``generate``, ``analyze`` and ``verify``.

Exit codes: 0 clean, 1 inequality failure or corpus error, 2 usage or
input error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from fractions import Fraction

from . import __version__
from .chain import EXACT, MODES, read_chain
from .conductance import DEFAULT_ENUM_LIMIT
from .errors import CurvmixError
from .generators import FAMILIES, corpus
from .mixing import displacement_curve, write_trace
from .report import FAIL, CORPUS_ERROR, PASS, SKIP
from .verifier import ChainAnalysis, VerifyConfig, chain_profile, run_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
TRACE_PHI_LIMIT = 64


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    mode: str = EXACT
    horizon: int | None = None
    enum_limit: int = DEFAULT_ENUM_LIMIT
    seed: int = 0
    out: str | None = None
    trace: str | None = None
    corpus: str = "default"
    threads: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise UsageError(f"--mode must be one of {', '.join(MODES)}")
        if self.horizon is not None and self.horizon < 1:
            raise UsageError("--horizon must be at least 1")
        if not 2 <= self.enum_limit <= DEFAULT_ENUM_LIMIT:
            raise UsageError(f"--enum-limit must lie in [2, {DEFAULT_ENUM_LIMIT}]")
        if not 0 <= self.seed < 2**64:
            raise UsageError("--seed must be a 64-bit unsigned integer")
        if self.threads < 1:
            raise UsageError("CURVMIX_THREADS must be a positive integer")

    def verify_config(self) -> VerifyConfig:
        return VerifyConfig(seed=self.seed, horizon=self.horizon, enum_limit=self.enum_limit, mode=self.mode, threads=self.threads)


def _threads() -> int:
    raw = os.environ.get("CURVMIX_THREADS", "1")
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"CURVMIX_THREADS={raw!r} is not an integer") from None


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


# -- generate ----------------------------------------------------------------


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace("x", ",").split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _generators(text: str) -> list[list[int]]:
    return [_ints(g) for g in text.split(";") if g.strip()]


def _edges(text: str) -> list[tuple[int, int]]:
    out = []
    for item in text.split(","):
        if not item.strip():
            continue
        try:
            u, v = item.split("-")
            out.append((int(u), int(v)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"edges look like '0-1,1-2', got {item!r}") from None
    return out


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected a rational number, got {text!r}") from None


def _lazy(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lazy", action=argparse.BooleanOptionalAction, default=True, help="hold with probability 1/2 (default on)")


def _family_parsers(sub) -> None:
    out = argparse.ArgumentParser(add_help=False)
    out.add_argument("--out", default=argparse.SUPPRESS, help="output path (default: stdout)")
    _add = sub.add_parser

    def add_parser(name, **kw):
        return _add(name, parents=[out], **kw)

    sub.add_parser = add_parser
    p = sub.add_parser("cycle", help="simple random walk on the n-cycle")
    p.add_argument("--n", type=int, required=True)
    _lazy(p)
    p.set_defaults(build=lambda a: FAMILIES["cycle"](a.n, a.lazy))

    p = sub.add_parser("abelian-cayley", help="walk on a product of cyclic groups")
    p.add_argument("--group", type=_ints, required=True, help="moduli, e.g. 8 or 2,2,2")
    p.add_argument("--generators", type=_generators, help="explicit generators, e.g. '1,0;0,1'")
    p.add_argument("--degree", type=int, help="number of random generators before closing under inverses")
    p.add_argument("--seed", type=int, default=0)
    _lazy(p)
    p.set_defaults(build=lambda a: FAMILIES["abelian_cayley"](a.group, a.generators, a.degree, a.lazy, a.seed))

    p = sub.add_parser("hypercube-times-cycle", help="walk on Z_2^d x Z_n")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    _lazy(p)
    p.set_defaults(build=lambda a: FAMILIES["hypercube_times_cycle"](a.d, a.n, a.lazy))

    p = sub.add_parser("transposition-walk", help="random transpositions on S_m")
    p.add_argument("--m", type=int, required=True)
    _lazy(p)
    p.set_defaults(build=lambda a: FAMILIES["transposition_walk"](a.m, a.lazy))

    p = sub.add_parser("biased-segment", help="lazy birth-death chain with drift")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--up-prob", type=_fraction, default=Fraction(3, 4))
    p.set_defaults(build=lambda a: FAMILIES["biased_segment"](a.n, a.up_prob))

    p = sub.add_parser("directed-lazy-cycle", help="hold or step forward, 1/2 each")
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(build=lambda a: FAMILIES["directed_lazy_cycle"](a.n))

    p = sub.add_parser("graph-walk", help="simple random walk on an edge list")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--edges", type=_edges, required=True, help="e.g. 0-1,1-2,2-0")
    _lazy(p)
    p.set_defaults(build=lambda a: FAMILIES["graph_walk"](a.n, a.edges, a.lazy))

    p = sub.add_parser("double-star", help="two adjacent hubs with k leaves each")
    p.add_argument("--k", type=int, default=3)
    _lazy(p)
    p.set_defaults(build=lambda a: FAMILIES["double_star"](a.k, a.lazy))


def cmd_generate(args) -> int:
    chain = args.build(args)
    _emit(_dump(chain.to_json_dict()), args.out)
    return EXIT_OK


# -- analyze -----------------------------------------------------------------


def cmd_analyze(args, cfg: RunConfig) -> int:
    chain = read_chain(args.chain)
    vc = cfg.verify_config()
    analysis = ChainAnalysis("input", chain, vc)
    profile = chain_profile(analysis)
    _emit(_dump(profile), cfg.out)
    if cfg.trace:
        mix = analysis.mixing
        steps = len(mix.tv_curve) - 1
        disp = displacement_curve(analysis.chain, analysis.metric, steps, vc.bit_budget)
        phis = {}
        if analysis.enumerable:
            for t in range(1, min(steps, TRACE_PHI_LIMIT) + 1):
                phis[t] = analysis.phi(t).phi
        write_trace(cfg.trace, mix, disp, phis)
    return EXIT_OK


# -- verify ------------------------------------------------------------------


def _table(summary: dict) -> str:
    lines = [f"{'chain':50s} {PASS:>5s} {FAIL:>5s} {SKIP:>5s} {CORPUS_ERROR:>12s}"]
    for cid, counts in summary["by_chain"].items():
        lines.append(f"{cid:50s} {counts[PASS]:5d} {counts[FAIL]:5d} {counts[SKIP]:5d} {counts[CORPUS_ERROR]:12d}")
    lines.append(
        f"{'total (' + str(summary['total']) + ' reports)':50s} {summary[PASS]:5d} {summary[FAIL]:5d} {summary[SKIP]:5d} {summary[CORPUS_ERROR]:12d}"
    )
    return "\n".join(lines) + "\n"


def cmd_verify(args, cfg: RunConfig) -> int:
    try:
        chains = corpus(cfg.corpus)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    result = run_suite(chains, cfg.verify_config())
    doc = result.to_json_dict()
    table = _table(doc["summary"])
    if cfg.out is None:
        sys.stdout.write(_dump(doc))
        sys.stderr.write(table)
    else:
        _emit(_dump(doc), cfg.out)
        sys.stdout.write(table)
    return result.exit_code


# -- entry point -------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=MODES, default=EXACT)
    p.add_argument("--horizon", type=int)
    p.add_argument("--enum-limit", type=int, default=DEFAULT_ENUM_LIMIT)
    p.add_argument("--out", help="output path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="curvmix", description="Mixing of non-negatively curved Markov chains.")
    parser.add_argument("--version", action="version", version=f"curvmix {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a chain from one of the families as JSON")
    gen.add_argument("--out", help="output path (default: stdout)")
    fam = gen.add_subparsers(dest="family", required=True)
    _family_parsers(fam)

    ana = sub.add_parser("analyze", help="profile a chain file")
    ana.add_argument("chain", help="chain JSON file")
    _common(ana)
    ana.add_argument("--trace", help="per-t CSV trace path")
    ana.add_argument("--seed", type=int, default=0)

    ver = sub.add_parser("verify", help="run every check on a corpus")
    ver.add_argument("--corpus", default="default", help="'default' or 'none'")
    ver.add_argument("--seed", type=int, default=0)
    _common(ver)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "generate":
            return cmd_generate(args)
        cfg = RunConfig(
            mode=args.mode,
            horizon=args.horizon,
            enum_limit=args.enum_limit,
            seed=args.seed,
            out=args.out,
            trace=getattr(args, "trace", None),
            corpus=getattr(args, "corpus", "default"),
            threads=_threads(),
        )
        if args.command == "analyze":
            return cmd_analyze(args, cfg)
        return cmd_verify(args, cfg)
    except UsageError as exc:
        parser.error(str(exc))
    except (CurvmixError, ValueError, OSError) as exc:
        sys.stderr.write(f"curvmix: error: {type(exc).__name__}: {exc}\n")
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
