"""Command line: ``polyqre run | verify | gen``.

Exit status is 0 when a run converged, 2 when it hit the iteration cap,
and 1 on any error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

from . import bench
from .game import GameError
from .reduced import DomainError, TauError

EXIT_OK, EXIT_ERROR, EXIT_MAX_ITERS = 0, 1, 2


def _parse_point(text: str):
    """``"0.3,0.7;0.5,0.5"`` -> per-player lists; fractions like ``1/3`` allowed."""
    players = []
    for block in text.split(";"):
        block = block.strip()
        players.append([float(Fraction(t.strip())) for t in block.split(",") if t.strip()])
    return players


def _apply_overrides(cfg: bench.ExperimentConfig, args) -> None:
    simple = {
        "game": "source", "algorithm": "algorithm", "epsilon": "epsilon",
        "seed": "seed", "topology": "topology", "beta": "beta",
        "utility_scale": "utility_scale", "output_dir": "output_dir", "thin": "thin",
    }
    for arg, attr in simple.items():
        val = getattr(args, arg, None)
        if val is not None:
            setattr(cfg, attr, val)
    if args.tau is not None:
        cfg.tau = "auto" if args.tau == "auto" else float(args.tau)
    if args.strict:
        cfg.strict = True
    if args.max_iters is not None:
        cfg.pgd.max_iters = cfg.fixed_point.max_iters = args.max_iters
    if args.damping is not None:
        cfg.fixed_point.damping = args.damping
    if args.gamma0 is not None:
        cfg.pgd.gamma0 = args.gamma0
    if args.schedule is not None:
        cfg.pgd.schedule = args.schedule
    if args.tol is not None:
        cfg.fixed_point.tol = args.tol
        cfg.pgd.stop_residual = args.tol


def _run_one(cfg: bench.ExperimentConfig) -> int:
    result = bench.run(cfg)
    print(bench.summary_text(result), end="")
    return EXIT_OK if result.converged else EXIT_MAX_ITERS


def cmd_run(args) -> int:
    configs = []
    for path in args.config or [None]:
        cfg = bench.load_config(path) if path else bench.ExperimentConfig()
        _apply_overrides(cfg, args)
        if len(args.config or []) > 1:
            base = Path(cfg.output_dir or "polyqre_out")
            cfg.output_dir = str(base / Path(path).stem)
        configs.append(cfg)
    if len(configs) == 1:
        return _run_one(configs[0])
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        codes = list(pool.map(_run_one, configs))
    return max(codes)


def cmd_verify(args) -> int:
    game = bench.load_game_source(args.game)
    if args.utility_scale is not None:
        game = game.scaled(args.utility_scale)
    point = _parse_point(args.point)
    if args.reduced:
        point = [v for block in point for v in block]
    print(bench.verify(game, point, epsilon=args.epsilon, tau=args.tau, reduced=args.reduced), end="")
    return EXIT_OK


def cmd_gen(args) -> int:
    game = bench.gen_random_game(args.players, args.dims, args.range, args.seed)
    text = bench.format_game(game)
    if args.output:
        Path(args.output).write_text(text)
    else:
        print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polyqre", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a solver and write trace.csv / summary.txt")
    r.add_argument("--config", action="append", help="INI config; repeat for a sweep")
    r.add_argument("--jobs", type=int, default=None, help="parallel workers for sweeps")
    r.add_argument("--game", help="builtin:NAME, file:PATH or random")
    r.add_argument("--algorithm", choices=["pgd", "fixed_point"])
    r.add_argument("--epsilon", type=float)
    r.add_argument("--tau", help="number or 'auto'")
    r.add_argument("--strict", action="store_true", help="refuse tau >= tau_max")
    r.add_argument("--seed", type=int)
    r.add_argument("--max-iters", type=int)
    r.add_argument("--damping", type=float)
    r.add_argument("--gamma0", type=float)
    r.add_argument("--schedule", choices=["harmonic", "constant", "power"])
    r.add_argument("--tol", type=float)
    r.add_argument("--topology", choices=["complete", "ring", "line"])
    r.add_argument("--beta", type=float)
    r.add_argument("--utility-scale", type=float)
    r.add_argument("--output-dir", help=f"defaults to ${bench.OUTPUT_ENV} or ./polyqre_out")
    r.add_argument("--thin", type=int)
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="report the epsilon-gap of a point")
    v.add_argument("--game", default="builtin:table1")
    v.add_argument("--point", required=True, help="'0.3,0.7;0.5,0.5' (full) or '0.3;0.5' with --reduced")
    v.add_argument("--reduced", action="store_true")
    v.add_argument("--epsilon", type=float)
    v.add_argument("--tau", type=float, help="also report residual stationarity at this tau")
    v.add_argument("--utility-scale", type=float)
    v.set_defaults(func=cmd_verify)

    g = sub.add_parser("gen", help="write a random polymatrix game file")
    g.add_argument("--players", type=int, required=True)
    g.add_argument("--dims", type=int, nargs="+", required=True)
    g.add_argument("--range", type=float, default=6.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (bench.ConfigError, GameError, DomainError, TauError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
