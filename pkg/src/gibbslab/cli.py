"""Command-line front end.

Exit codes: 0 success, 2 invalid input (bad flags, unreadable or malformed
files, infeasible models), 3 state-space cap exceeded.
"""
from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import couplings, diagnostics, dynamics, measures
from .errors import GibbsError, StateSpaceTooLarge
from .io import (
    ConfigError,
    assignment_over,
    coupling_csv,
    distribution_csv,
    fmt,
    kernel_csv,
    load_distribution,
    load_model,
    parse_assignment,
    parse_sites,
)
from .model import specification

EXIT_OK, EXIT_INVALID, EXIT_TOO_LARGE = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


class _UsageError(Exception):
    pass


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _setup(args):
    model, file_blocks = load_model(args.config)
    vol = model.volume(parse_sites(args.volume)) if getattr(args, "volume", None) else model.sites
    if not vol:
        raise ConfigError("--volume must name at least one site")
    given = parse_assignment(getattr(args, "boundary", None))
    exterior = assignment_over(model, given, model.graph.boundary(vol))
    return model, file_blocks, vol, exterior


def _blocks(args, model, file_blocks, vol) -> dynamics.BlockSystem:
    recipe = args.blocks
    if recipe == "config":
        if file_blocks is None:
            raise ConfigError("--blocks config needs a [blocks] section in the model file")
        inside = set(vol)
        kept = [(b, w) for b, w in zip(file_blocks.blocks, file_blocks.weights) if inside & set(b)]
        return dynamics.BlockSystem(vol, tuple(b for b, _ in kept), tuple(w for _, w in kept))
    return diagnostics.block_recipe(recipe, model, vol)


def _subset(args):
    if not args.subset:
        return None
    try:
        return tuple(int(s) for s in parse_sites(args.subset))
    except ValueError:
        raise ConfigError("--subset must be comma-separated block indices") from None


def _numbers(text: str, flag: str) -> list[float]:
    try:
        return [float(Fraction(s)) for s in parse_sites(text)]
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{flag}: expected comma-separated numbers or fractions") from None


# ---------------------------------------------------------------------------


def cmd_specify(args) -> int:
    model, _, vol, exterior = _setup(args)
    _emit(distribution_csv(specification(model, vol, exterior)), args.out)
    return EXIT_OK


def cmd_tv(args) -> int:
    mu, nu = load_distribution(args.a), load_distribution(args.b)
    methods = measures.TV_METHODS if args.method == "all" else (args.method,)
    if len(methods) == 1:
        text = fmt(measures.tv_distance(mu, nu, methods[0])) + "\n"
    else:
        text = "".join(f"{m},{fmt(measures.tv_distance(mu, nu, m))}\n" for m in methods)
    _emit(text, args.out)
    return EXIT_OK


def cmd_couple(args) -> int:
    mu, nu = load_distribution(args.a), load_distribution(args.b)
    if args.strategy == "optimal":
        Q = couplings.optimal_coupling(mu, nu)
    elif args.strategy == "independent":
        Q = couplings.independent_coupling(mu, nu)
    else:
        if measures.tv_distance(mu, nu) > 0:
            raise ConfigError("identity coupling needs identical distributions")
        Q = couplings.identity_coupling(mu)
    _emit(coupling_csv(Q), args.out)
    if args.summary:
        Path(args.summary).write_text(
            f"strategy,{args.strategy}\nmismatch,{fmt(couplings.mismatch(Q))}\ntv,{fmt(measures.tv_distance(mu, nu))}\n"
        )
    return EXIT_OK


def cmd_dynamics(args) -> int:
    model, file_blocks, vol, exterior = _setup(args)
    blocks = _blocks(args, model, file_blocks, vol)
    subset = _subset(args)
    if args.advance:
        other = assignment_over(model, parse_assignment(args.boundary2, "--boundary2"), model.graph.boundary(vol))
        mu, nu = specification(model, vol, exterior), specification(model, vol, other)
        Q = couplings.independent_coupling(mu, nu)
        lines = ["step,mismatch,tv,marginal_residual"]
        for t in range(args.advance + 1):
            if t:
                Q = dynamics.advance_coupling(Q, model, blocks, exterior, other, subset, args.strategy)
            lines.append(
                f"{t},{fmt(couplings.mismatch(Q))},{fmt(measures.tv_distance(mu, nu))},{fmt(Q.marginal_residual(mu, nu))}"
            )
        _emit("\n".join(lines) + "\n", args.out)
    else:
        kernels = dynamics.block_kernels(model, blocks, exterior)
        _emit(kernel_csv(dynamics.mixed_kernel(kernels, blocks, subset)), args.out)
    if args.summary:
        res = dynamics.stationarity_check(model, vol, exterior, blocks, subset)
        Path(args.summary).write_text(f"stationarity_residual,{fmt(res)}\n")
    return EXIT_OK


def cmd_influence(args) -> int:
    model, _ = load_model(args.config)
    window = model.volume(parse_sites(args.window))
    if not window:
        raise ConfigError("--window must name at least one site")
    lo = args.min_m if args.min_m is not None else len(window)
    if args.max_m < lo:
        raise ConfigError(f"--max-m must be at least {lo}")
    sizes = list(range(lo, args.max_m + 1))
    vols = diagnostics.growing_volumes(model, window, sizes)
    curve = diagnostics.influence_decay_curve(model, window, vols, labels=sizes)
    rows = ["m,sup_tv,log_slope"]
    rows += [f"{m},{fmt(v)},{fmt(s)}" for m, v, s in zip(curve.labels, curve.values, curve.log_slopes)]
    _emit("\n".join(rows) + "\n", args.out)
    if args.summary:
        report = diagnostics.uniqueness_report(model, window, vols, args.blocks, args.strategy)
        Path(args.summary).write_text(report.summary() + "\n")
    return EXIT_OK


def cmd_contract(args) -> int:
    model, file_blocks, vol, exterior = _setup(args)
    blocks = _blocks(args, model, file_blocks, vol)
    rep = diagnostics.contraction_constant(model, blocks, exterior, _subset(args), None, args.strategy)
    space = model.space(vol)
    rows = ["site,max_ratio,eta,xi"]
    for site, (ratio, pair) in rep.per_site.items():
        a, b = (space.label(pair[0]), space.label(pair[1])) if pair else ("", "")
        rows.append(f"{site},{fmt(ratio)},{a},{b}")
    _emit("\n".join(rows) + "\n", args.out)
    if args.summary:
        Path(args.summary).write_text(
            f"strategy,{rep.strategy}\nconstant,{fmt(rep.constant)}\nsite,{rep.site}\n"
            f"contracting,{str(rep.contracting).lower()}\n"
        )
    return EXIT_OK


def cmd_fkg_check(args) -> int:
    grid = _numbers(args.grid, "--grid")
    probs = _numbers(args.probs, "--probs") if args.probs else [1.0 / len(grid)] * len(grid)
    f = _numbers(args.f, "--f") if args.f else grid
    g = _numbers(args.g, "--g") if args.g else grid
    try:
        res = couplings.monotone_correlation_check(grid, probs, f, g)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    _emit(f"lhs,rhs,holds\n{fmt(res.lhs)},{fmt(res.rhs)},{str(res.holds).lower()}\n", args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.seed is None:
        raise ConfigError("simulate requires --seed")
    if args.steps < 1:
        raise ConfigError("--steps must be positive")
    model, file_blocks, vol, exterior = _setup(args)
    blocks = _blocks(args, model, file_blocks, vol)
    subset = _subset(args)
    start = parse_assignment(args.start, "--start") or None
    path = dynamics.run_chain(model, vol, exterior, blocks, subset, args.steps, args.seed, start)
    burn = args.steps // 10 if args.burn_in is None else args.burn_in
    if not 0 <= burn < args.steps:
        raise ConfigError(f"--burn-in must lie in [0, {args.steps})")
    space = model.space(vol)
    counts = np.bincount(path[burn:], minlength=space.size)
    emp = dynamics.FiniteDistribution(space, counts / counts.sum())
    _emit(distribution_csv(emp), args.out)
    if args.trajectory:
        Path(args.trajectory).write_text("step,index\n" + "".join(f"{t + 1},{s}\n" for t, s in enumerate(path)))
    if args.summary:
        exact = specification(model, vol, exterior)
        Path(args.summary).write_text(
            f"steps,{args.steps}\nburn_in,{burn}\nseed,{args.seed}\ntv_to_exact,{fmt(measures.tv_distance(emp, exact))}\n"
        )
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gibbslab", description="Exact finite-volume Gibbs measure computations.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    def model_args(sp, volume=True):
        sp.add_argument("--config", required=True, help="model file (TOML)")
        if volume:
            sp.add_argument("--volume", help="comma-separated sites (default: all)")
            sp.add_argument("--boundary", help="site=value pairs for the sites adjacent to the volume")

    def block_args(sp):
        sp.add_argument("--blocks", default="single-site", choices=("single-site", "edges", "whole", "config"))
        sp.add_argument("--subset", help="comma-separated block indices forming S (default: all)")

    def outputs(sp, summary=True):
        sp.add_argument("--out", help="output file (default: stdout)")
        if summary:
            sp.add_argument("--summary", help="also write a key,value summary to this file")

    sp = sub.add_parser("specify", help="Gibbs specification of a volume as a distribution CSV")
    model_args(sp)
    outputs(sp, summary=False)
    sp.set_defaults(func=cmd_specify)

    sp = sub.add_parser("tv", help="total variation distance between two distribution CSVs")
    sp.add_argument("--a", required=True)
    sp.add_argument("--b", required=True)
    sp.add_argument("--method", default="half_sum", choices=(*measures.TV_METHODS, "all"))
    outputs(sp, summary=False)
    sp.set_defaults(func=cmd_tv)

    sp = sub.add_parser("couple", help="couple two distribution CSVs")
    sp.add_argument("--a", required=True)
    sp.add_argument("--b", required=True)
    sp.add_argument("--strategy", default="optimal", choices=("optimal", "independent", "identity"))
    outputs(sp)
    sp.set_defaults(func=cmd_couple)

    sp = sub.add_parser("dynamics", help="heat-bath kernel, or iterate the coupling-advance operator")
    model_args(sp)
    block_args(sp)
    sp.add_argument("--strategy", default="optimal", choices=dynamics.STRATEGIES)
    sp.add_argument("--advance", type=int, default=0, help="iterate F_S this many times from the independent coupling")
    sp.add_argument("--boundary2", help="second boundary for --advance")
    outputs(sp)
    sp.set_defaults(func=cmd_dynamics)

    sp = sub.add_parser("influence", help="boundary-influence decay curve on growing volumes")
    model_args(sp, volume=False)
    sp.add_argument("--window", required=True)
    sp.add_argument("--max-m", type=int, required=True, help="largest volume size")
    sp.add_argument("--min-m", type=int, help="smallest volume size (default: window size)")
    sp.add_argument("--blocks", default="single-site", choices=("single-site", "edges", "whole"))
    sp.add_argument("--strategy", default="optimal", choices=dynamics.STRATEGIES)
    outputs(sp)
    sp.set_defaults(func=cmd_influence)

    sp = sub.add_parser("contract", help="worst one-step contraction ratio per site")
    model_args(sp)
    block_args(sp)
    sp.add_argument("--strategy", default="optimal", choices=dynamics.STRATEGIES)
    outputs(sp)
    sp.set_defaults(func=cmd_contract)

    sp = sub.add_parser("fkg-check", help="E[f]E[g] <= E[fg] for nondecreasing f, g")
    sp.add_argument("--grid", required=True, help="strictly increasing grid points")
    sp.add_argument("--probs", help="probabilities on the grid (default: uniform)")
    sp.add_argument("--f", help="values of f on the grid (default: identity)")
    sp.add_argument("--g", help="values of g on the grid (default: identity)")
    outputs(sp, summary=False)
    sp.set_defaults(func=cmd_fkg_check)

    sp = sub.add_parser("simulate", help="seeded heat-bath simulation; empirical distribution CSV")
    model_args(sp)
    block_args(sp)
    sp.add_argument("--steps", type=int, required=True)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--burn-in", type=int)
    sp.add_argument("--start", help="site=value start state (default: lowest-index admissible)")
    sp.add_argument("--trajectory", help="write (step, configuration index) pairs here")
    outputs(sp)
    sp.set_defaults(func=cmd_simulate)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except StateSpaceTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOO_LARGE
    except (GibbsError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(run())
