"""Command-line front end.

Subcommands: `typecheck` a program, `sample` a distribution, `measure` an
open set against a distribution (exhaustive prefix bounds or Monte Carlo),
and `condition` a prior on observed data.  All output is JSON lines, exact
rationals serialized as "p/q"; `--pretty` adds an aligned human rendering.

Exit codes: 0 success, 1 static error (parse/type), 2 runtime certification
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from .condition import (
    DenominatorIndistinguishableFromZero,
    obs_dens,
    parse_density,
    posterior_bounds,
)
from .exactreal import Diverged, default_fuel, format_rational, parse_rational
from .lang import (
    DistV,
    ParseError,
    TDist,
    TypecheckError,
    as_raw_sampler,
    default_global_env,
    eval_term,
    infer,
    parse,
    run_dist,
    whnf,
)
from .measure import measure_bounds, measure_mc
from .sampler import BitTape, force


def _load_program(args, genv):
    if getattr(args, "dist", None):
        if args.dist not in genv.dists:
            raise TypecheckError("unknown distribution %r" % args.dist)
        return args.dist
    if getattr(args, "expr", None):
        return args.expr
    if getattr(args, "path", None):
        with open(args.path, "r", encoding="utf-8") as handle:
            return handle.read()
    raise TypecheckError("no program given (use a path, --dist, or --expr)")


def _dist_value(source, genv, fuel):
    term = parse(source, genv)
    ty = infer({}, genv, term)
    if not isinstance(ty, TDist):
        raise TypecheckError("expected a distribution program, found %s" % ty)
    value = whnf(eval_term(term, {}, genv, fuel))
    assert isinstance(value, DistV)
    return value


def _emit(record: dict, pretty: bool):
    if pretty:
        width = max(len(k) for k in record)
        for key, val in record.items():
            print("%-*s  %s" % (width, key, val))
        print()
    else:
        print(json.dumps(record, sort_keys=True))


def cmd_typecheck(args) -> int:
    genv = default_global_env()
    try:
        source = _load_program(args, genv)
        term = parse(source, genv)
        ty = infer({}, genv, term)
    except (ParseError, TypecheckError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    print(str(ty))
    return 0


def cmd_sample(args) -> int:
    genv = default_global_env()
    fuel = args.fuel or default_fuel()
    try:
        source = _load_program(args, genv)
        parse(source, genv)
    except (ParseError, TypecheckError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    for i in range(args.n):
        seed = args.seed + i
        tape = BitTape.from_seed(seed)
        try:
            report = run_dist(source, tape, precision=args.precision,
                              fuel=fuel, genv=genv)
        except (ParseError, TypecheckError) as exc:
            print("error: %s" % exc, file=sys.stderr)
            return 1
        record = {"seed": seed}
        record.update(report)
        _emit(record, args.pretty)
    return 0


def cmd_measure(args) -> int:
    genv = default_global_env()
    fuel = args.fuel or default_fuel()
    try:
        source = _load_program(args, genv)
        dist = _dist_value(source, genv, fuel)
        region = _parse_set(args.set)
    except (ParseError, TypecheckError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    sampler = as_raw_sampler(dist)
    if args.mc:
        bounds = measure_mc(sampler, region, args.mc, args.seed,
                            args.precision, args.delta)
    else:
        bounds = measure_bounds(sampler, region, args.prefix_bits, args.precision)
    _emit(bounds.to_json(), args.pretty)
    return 0


def _parse_set(text: str):
    from .measure import parse_open_set
    return parse_open_set(text)


def cmd_condition(args) -> int:
    genv = default_global_env()
    fuel = args.fuel or default_fuel()
    try:
        source = args.prior_dist or None
        if source is None and args.prior:
            with open(args.prior, "r", encoding="utf-8") as handle:
                source = handle.read()
        if source is None:
            raise TypecheckError("no prior given (use --prior or --prior-dist)")
        prior = as_raw_sampler(_dist_value(source, genv, fuel))
        density = parse_density(args.density)
        observed = parse_rational(args.observe)
    except (ParseError, TypecheckError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    if args.posterior_samples:
        posterior = obs_dens(prior, density, observed, max_rounds=fuel)
        accepted = 0
        diverged = 0
        total = Fraction(0)
        for i in range(args.posterior_samples):
            tape = BitTape.from_seed(args.seed + i)
            try:
                value = force(posterior.run(tape))
                coord = value[0] if isinstance(value, tuple) else value
                total += force(coord).approx(args.precision)
                accepted += 1
            except Diverged:
                diverged += 1
        record = {
            "samples": args.posterior_samples,
            "accepted": accepted,
            "diverged": diverged,
            "posterior_mean": format_rational(total / accepted) if accepted else None,
        }
        _emit(record, args.pretty)
        return 0
    try:
        region = _parse_set(args.query_set)
        bounds = posterior_bounds(prior, density, observed, region,
                                  args.prefix_bits, args.precision)
    except ValueError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    except DenominatorIndistinguishableFromZero as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    _emit(bounds.to_json(), args.pretty)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exactdist",
        description="Exact samplers, certified measure bounds, and a typed "
                    "probabilistic core language.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_program_args(p, with_dist=True):
        p.add_argument("path", nargs="?", help="program file (.lcd)")
        p.add_argument("--expr", help="inline program text")
        if with_dist:
            p.add_argument("--dist", help="registered primitive distribution name")

    p_type = sub.add_parser("typecheck", help="infer a program's type")
    add_program_args(p_type, with_dist=False)
    p_type.set_defaults(run=cmd_typecheck)

    p_sample = sub.add_parser("sample", help="draw seeded samples")
    add_program_args(p_sample)
    p_sample.add_argument("--n", type=int, default=1)
    p_sample.add_argument("--precision", type=int, default=10)
    p_sample.add_argument("--seed", type=int, default=0)
    p_sample.add_argument("--fuel", type=int, default=None)
    p_sample.set_defaults(run=cmd_sample)

    p_measure = sub.add_parser("measure", help="bound the measure of an open set")
    add_program_args(p_measure)
    p_measure.add_argument("--set", required=True, help='e.g. "(0,1/2)" or "{1,2}"')
    p_measure.add_argument("--prefix-bits", type=int, default=12, dest="prefix_bits")
    p_measure.add_argument("--precision", type=int, default=10)
    p_measure.add_argument("--mc", type=int, default=None,
                           help="Monte Carlo sample count instead of enumeration")
    p_measure.add_argument("--seed", type=int, default=0)
    p_measure.add_argument("--delta", type=float, default=0.01)
    p_measure.add_argument("--fuel", type=int, default=None)
    p_measure.set_defaults(run=cmd_measure)

    p_cond = sub.add_parser("condition", help="condition a prior on observed data")
    p_cond.add_argument("--prior", help="prior program file")
    p_cond.add_argument("--prior-dist", dest="prior_dist",
                        help="registered primitive as the prior")
    p_cond.add_argument("--density", required=True,
                        help='e.g. "gaussian-noise(1)" or "constant(2/5)"')
    p_cond.add_argument("--observe", required=True, help="observed value (decimal or p/q)")
    p_cond.add_argument("--query-set", dest="query_set",
                        help="open set for posterior bounds")
    p_cond.add_argument("--posterior-samples", dest="posterior_samples",
                        type=int, default=None)
    p_cond.add_argument("--prefix-bits", type=int, default=12, dest="prefix_bits")
    p_cond.add_argument("--precision", type=int, default=10)
    p_cond.add_argument("--seed", type=int, default=0)
    p_cond.add_argument("--fuel", type=int, default=None)
    p_cond.set_defaults(run=cmd_condition)

    for p in (p_type, p_sample, p_measure, p_cond):
        p.add_argument("--pretty", action="store_true",
                       help="aligned human-readable output")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.run(args)


if __name__ == "__main__":
    sys.exit(main())
