"""Experiment runner: configs, game files, random games, CSV traces.

Config files are INI-style (``key = value`` under sections)::

    [game]
    source = builtin:table1        # or file:path/to/game.txt, or random
    players = 2                    # random games only
    dims = 1 1
    range = 6
    seed = 3
    utility_scale = 1

    [solver]
    algorithm = fixed_point        # or pgd
    epsilon = 0.035
    tau = 0.05                     # or auto
    strict = false
    seed = 7
    damping = 0.1                  # fixed_point
    gamma0 = 5                     # pgd
    schedule = harmonic

    [graph]
    topology = complete            # ring, line, custom
    beta = 0.5
    edges = 0-1 1-2                # custom only
    weights = 0.25 0.25            # optional

    [output]
    dir = runs/table1
    thin = 1

Game files are plain text: ``N``, ``dims``, then ``Q i k`` and ``r i``
headers each followed by the matrix rows::

    N = 2
    dims = 1 1
    Q 0 1
    -6 1
    -4 0
    ...
"""

from __future__ import annotations

import configparser
import io
import os
import secrets
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .algorithms import (
    CONVERGED,
    FixedPointConfig,
    PGDConfig,
    RunTrace,
    epsilon_bound,
    run_fixed_point,
    run_pgd,
    stationarity_report,
)
from .consensus import build_graph, extend
from .game import (
    BUILTIN_GAMES,
    PolymatrixGame,
    best_response,
    epsilon_gap,
    make_game,
    validate_game,
)
from .reduced import (
    TauParams,
    lift,
    max_log_size,
    reduce_point,
    resolve_tau,
    transform,
    truncated_box,
)

OUTPUT_ENV = "POLYQRE_OUTPUT_DIR"
FLOAT_FMT = "%.17g"


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    source: str = "builtin:table1"
    players: int = 2
    dims: tuple[int, ...] = (1, 1)
    coef_range: float = 6.0
    game_seed: int = 0
    utility_scale: float = 1.0
    algorithm: str = "fixed_point"
    epsilon: float | None = None
    tau: float | str = "auto"
    strict: bool = False
    seed: int | None = None
    pgd: PGDConfig = field(default_factory=PGDConfig)
    fixed_point: FixedPointConfig = field(default_factory=FixedPointConfig)
    topology: str = "complete"
    beta: float = 0.5
    edges: list[tuple[int, int]] | None = None
    weights: list[float] | None = None
    output_dir: str | None = None
    thin: int = 1


def _fmt(x: float) -> str:
    return FLOAT_FMT % x


# -- game files ---------------------------------------------------------------

def gen_random_game(N: int, dims, coef_range: float, seed: int) -> PolymatrixGame:
    """Game with every ``Q`` and ``r`` entry i.i.d. uniform on ``[-range, range]``."""
    dims = tuple(int(d) for d in dims)
    if len(dims) != N:
        raise ConfigError(f"{len(dims)} dims given for {N} players")
    rng = np.random.default_rng(seed)
    Q = {}
    for i in range(N):
        for k in range(N):
            if i != k:
                Q[(i, k)] = rng.uniform(-coef_range, coef_range, (dims[i] + 1, dims[k] + 1))
    r = [rng.uniform(-coef_range, coef_range, d + 1) for d in dims]
    return make_game(dims, Q, r, name=f"random-{seed}")


def format_game(game: PolymatrixGame) -> str:
    out = io.StringIO()
    out.write(f"N = {game.N}\n")
    out.write("dims = " + " ".join(str(d) for d in game.dims) + "\n")
    for (i, k) in sorted(game.Q):
        out.write(f"Q {i} {k}\n")
        for row in np.atleast_2d(game.Q[(i, k)]):
            out.write(" ".join(_fmt(v) for v in row) + "\n")
    for i, v in enumerate(game.r):
        out.write(f"r {i}\n")
        out.write(" ".join(_fmt(x) for x in v) + "\n")
    return out.getvalue()


def parse_game(text: str, name: str = "") -> PolymatrixGame:
    """Parse the plain-text game format; errors carry the line number."""
    N = dims = None
    Q, r = {}, {}
    current, rows, expect, width = None, [], 0, 0
    lines = text.splitlines()

    def close(lineno):
        nonlocal current, rows
        if current is None:
            return
        if len(rows) != expect:
            raise ConfigError(f"line {lineno}: block {current} has {len(rows)} rows, expected {expect}")
        kind, key = current
        if kind == "Q":
            Q[key] = np.array(rows)
        else:
            r[key] = np.array(rows[0])
        current, rows = None, []

    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            if "=" in line:
                key, val = (s.strip() for s in line.split("=", 1))
                close(lineno)
                if key == "N":
                    N = int(val)
                elif key == "dims":
                    dims = tuple(int(t) for t in val.split())
                else:
                    raise ConfigError(f"line {lineno}: unknown field {key!r}")
            elif line.split()[0] in ("Q", "r"):
                close(lineno)
                parts = line.split()
                if dims is None:
                    raise ConfigError(f"line {lineno}: dims must precede {parts[0]} blocks")
                if parts[0] == "Q":
                    i, k = int(parts[1]), int(parts[2])
                    current, expect, width = ("Q", (i, k)), dims[i] + 1, dims[k] + 1
                else:
                    i = int(parts[1])
                    current, expect, width = ("r", i), 1, dims[i] + 1
            else:
                if current is None:
                    raise ConfigError(f"line {lineno}: numbers outside a Q or r block")
                row = [float(t) for t in line.split()]
                if len(row) != width:
                    raise ConfigError(f"line {lineno}: expected {width} numbers, got {len(row)}")
                rows.append(row)
        except (ValueError, IndexError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"line {lineno}: {exc}") from None
    close(len(lines))
    if N is None or dims is None:
        raise ConfigError("game file needs both N and dims")
    if len(dims) != N:
        raise ConfigError(f"dims lists {len(dims)} players, N = {N}")
    r_list = [r.get(i, np.zeros(dims[i] + 1)) for i in range(N)]
    game = make_game(dims, Q, r_list, name=name)
    problems = validate_game(game)
    if problems:
        raise ConfigError("invalid game: " + "; ".join(problems))
    return game


def load_game_source(source: str) -> PolymatrixGame:
    kind, _, arg = source.partition(":")
    if kind == "builtin":
        if arg not in BUILTIN_GAMES:
            raise ConfigError(f"unknown builtin game {arg!r}; have {sorted(BUILTIN_GAMES)}")
        return BUILTIN_GAMES[arg]()
    if kind == "file":
        path = Path(arg)
        return parse_game(path.read_text(), name=path.stem)
    if kind in BUILTIN_GAMES and not arg:
        return BUILTIN_GAMES[kind]()
    raise ConfigError(f"unrecognised game source {source!r}")


# -- configs ------------------------------------------------------------------

def _bool(val: str) -> bool:
    v = val.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {val!r}")


def _edges(val: str) -> list[tuple[int, int]]:
    out = []
    for tok in val.replace(",", " ").split():
        a, b = tok.split("-")
        out.append((int(a), int(b)))
    return out


_FIELDS = {
    ("game", "source"): ("source", str),
    ("game", "players"): ("players", int),
    ("game", "dims"): ("dims", lambda v: tuple(int(t) for t in v.split())),
    ("game", "range"): ("coef_range", float),
    ("game", "seed"): ("game_seed", int),
    ("game", "utility_scale"): ("utility_scale", float),
    ("solver", "algorithm"): ("algorithm", str),
    ("solver", "epsilon"): ("epsilon", float),
    ("solver", "tau"): ("tau", lambda v: "auto" if v.strip() == "auto" else float(v)),
    ("solver", "strict"): ("strict", _bool),
    ("solver", "seed"): ("seed", int),
    ("graph", "topology"): ("topology", str),
    ("graph", "beta"): ("beta", float),
    ("graph", "edges"): ("edges", _edges),
    ("graph", "weights"): ("weights", lambda v: [float(t) for t in v.split()]),
    ("output", "dir"): ("output_dir", str),
    ("output", "thin"): ("thin", int),
}
_PGD_FIELDS = {
    "gamma0": float, "schedule": str, "power": float, "max_iters": int,
    "restart_threshold": float, "max_restarts": int, "stop_residual": float,
    "consensus_tol": float,
}
_FP_FIELDS = {"damping": float, "max_iters": int, "tol": float}


def _line_of(text: str, section: str, key: str) -> int | None:
    cur = None
    for n, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        if s.startswith("[") and s.endswith("]"):
            cur = s[1:-1].strip()
        elif cur == section and s.split("=", 1)[0].strip() == key:
            return n
    return None


def parse_config(text: str) -> ExperimentConfig:
    """Parse an INI experiment config. Unknown keys are errors."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    cfg = ExperimentConfig()
    pgd, fp = {}, {}
    for section in cp.sections():
        for key, val in cp[section].items():
            where = _line_of(text, section, key)
            loc = f"line {where}: " if where else ""
            try:
                if (section, key) in _FIELDS:
                    attr, conv = _FIELDS[(section, key)]
                    setattr(cfg, attr, conv(val))
                elif section == "solver" and key in _PGD_FIELDS and key in _FP_FIELDS:
                    pgd[key] = _PGD_FIELDS[key](val)
                    fp[key] = _FP_FIELDS[key](val)
                elif section == "solver" and key in _PGD_FIELDS:
                    pgd[key] = _PGD_FIELDS[key](val)
                elif section == "solver" and key in _FP_FIELDS:
                    fp[key] = _FP_FIELDS[key](val)
                else:
                    raise ConfigError(f"{loc}unknown field [{section}] {key}")
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(f"{loc}[{section}] {key}: {exc}") from None
    if cfg.algorithm not in ("pgd", "fixed_point"):
        raise ConfigError(f"unknown algorithm {cfg.algorithm!r}")
    try:
        cfg.pgd = PGDConfig(**pgd)
        cfg.fixed_point = FixedPointConfig(**fp)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def config_echo(cfg: ExperimentConfig) -> str:
    """Config text with every resolved field written out."""
    cp = configparser.ConfigParser()
    cp["game"] = {
        "source": cfg.source,
        "players": str(cfg.players),
        "dims": " ".join(str(d) for d in cfg.dims),
        "range": repr(cfg.coef_range),
        "seed": str(cfg.game_seed),
        "utility_scale": repr(cfg.utility_scale),
    }
    solver = {
        "algorithm": cfg.algorithm,
        "epsilon": "" if cfg.epsilon is None else repr(cfg.epsilon),
        "tau": cfg.tau if isinstance(cfg.tau, str) else repr(cfg.tau),
        "strict": str(cfg.strict).lower(),
        "seed": str(cfg.seed),
    }
    sub = asdict(cfg.pgd) if cfg.algorithm == "pgd" else asdict(cfg.fixed_point)
    sub.pop("seed")
    solver.update({k: repr(v) if isinstance(v, float) else str(v) for k, v in sub.items()})
    if not solver["epsilon"]:
        del solver["epsilon"]
    cp["solver"] = solver
    graph = {"topology": cfg.topology, "beta": repr(cfg.beta)}
    if cfg.edges is not None:
        graph["edges"] = " ".join(f"{a}-{b}" for a, b in cfg.edges)
    if cfg.weights is not None:
        graph["weights"] = " ".join(repr(w) for w in cfg.weights)
    cp["graph"] = graph
    cp["output"] = {"dir": str(cfg.output_dir), "thin": str(cfg.thin)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


# -- running ------------------------------------------------------------------

@dataclass
class RunResult:
    game: PolymatrixGame
    params: TauParams
    trace: RunTrace
    config: ExperimentConfig
    mixing_corrected: bool
    output_dir: Path | None

    @property
    def converged(self) -> bool:
        return self.trace.status == CONVERGED

    @property
    def final_gap(self) -> float:
        return epsilon_gap(self.game, lift(transform(self.game), self.trace.final_point))


def build_game(cfg: ExperimentConfig) -> PolymatrixGame:
    if cfg.source == "random":
        game = gen_random_game(cfg.players, cfg.dims, cfg.coef_range, cfg.game_seed)
    else:
        game = load_game_source(cfg.source)
    if cfg.utility_scale != 1.0:
        game = game.scaled(cfg.utility_scale)
    return game


def resolve(cfg: ExperimentConfig, game: PolymatrixGame) -> TauParams:
    if cfg.epsilon is None:
        if cfg.tau == "auto":
            raise ConfigError("tau = auto needs an epsilon")
        cfg.epsilon = float(cfg.tau) * max_log_size(game.dims)
    return resolve_tau(game, cfg.epsilon, cfg.tau, strict=cfg.strict)


def write_trace_csv(trace: RunTrace, path, dims) -> None:
    coords = [f"x_{i}_{j}" for i, d in enumerate(dims) for j in range(d)]
    header = ["iter", "total_residual", "epsilon_gap", "disagreement"] + coords
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for t, res, gap, dis, m in zip(
            trace.iters, trace.total_residual, trace.epsilon_gap, trace.disagreement, trace.mean
        ):
            fh.write(",".join([str(t), _fmt(res), _fmt(gap), _fmt(dis)] + [_fmt(v) for v in m]) + "\n")


def summary_text(result: RunResult) -> str:
    tr, p, cfg = result.trace, result.params, result.config
    rg = transform(result.game)
    lines = {
        "status": tr.status,
        "restarts": tr.restarts,
        "iterations": tr.iters[-1] if tr.iters else 0,
        "algorithm": cfg.algorithm,
        "final_gap": _fmt(result.final_gap),
        "epsilon_bound": _fmt(epsilon_bound(rg, p.tau)),
        "final_total_residual": _fmt(tr.total_residual[-1]),
        "final_disagreement": _fmt(tr.disagreement[-1]),
        "final_point": " ".join(_fmt(v) for v in tr.final_point),
        "epsilon": _fmt(p.epsilon),
        "tau": _fmt(p.tau),
        "tau_max": _fmt(p.tau_max),
        "delta_f": _fmt(p.delta_f),
        "delta_f_exact": str(p.delta_f_exact).lower(),
        "R": _fmt(p.R),
        "tau_below_tau_max": str(p.tau < p.tau_max).lower(),
        "seed": cfg.seed,
        "utility_scale": _fmt(cfg.utility_scale),
        "flag_mixing_diagonal_correction": str(result.mixing_corrected).lower(),
        "flag_damping": _fmt(cfg.fixed_point.damping) if cfg.algorithm == "fixed_point" else "n/a",
        "wall_time": "%.3f" % tr.wall_time,
    }
    return "".join(f"{k}: {v}\n" for k, v in lines.items())


def run(cfg: ExperimentConfig, write: bool = True) -> RunResult:
    """Run one experiment and, if ``write``, emit trace.csv, summary.txt, config_echo.ini."""
    if cfg.seed is None:
        cfg.seed = secrets.randbelow(2**31)
    game = build_game(cfg)
    params = resolve(cfg, game)
    rg = transform(game)
    box = truncated_box(rg, params.tau)
    graph = build_graph(game.N, cfg.topology, cfg.beta, edges=cfg.edges, weights=cfg.weights)
    M = extend(graph, rg.dims)
    if cfg.algorithm == "pgd":
        cfg.pgd.seed = cfg.seed
        trace = run_pgd(rg, box, M, cfg.pgd, game=game, thin=cfg.thin)
    else:
        cfg.fixed_point.seed = cfg.seed
        trace = run_fixed_point(rg, box, M, cfg.fixed_point, game=game, thin=cfg.thin)
    out = None
    if write:
        out = Path(cfg.output_dir or os.environ.get(OUTPUT_ENV, "polyqre_out"))
        cfg.output_dir = str(out)
        out.mkdir(parents=True, exist_ok=True)
    result = RunResult(game, params, trace, cfg, M.corrected, out)
    if write:
        write_trace_csv(trace, out / "trace.csv", rg.dims)
        (out / "summary.txt").write_text(summary_text(result))
        (out / "config_echo.ini").write_text(config_echo(cfg))
    return result


def verify(game: PolymatrixGame, point, epsilon: float | None = None, tau: float | None = None,
           reduced: bool = False) -> str:
    """Human-readable equilibrium report for a full or reduced point."""
    rg = transform(game)
    if reduced:
        x_red = np.asarray(point, dtype=float)
        x = lift(rg, x_red)
    else:
        x = [np.asarray(v, dtype=float) for v in point]
        x_red = reduce_point(x)
    gap = epsilon_gap(game, x)
    lines = [f"epsilon_gap: {_fmt(gap)}"]
    if epsilon is not None:
        lines.append(f"epsilon: {_fmt(epsilon)}")
        lines.append(f"is_epsilon_ne: {str(gap <= epsilon).lower()}")
    for i in range(game.N):
        br = best_response(game, i, x)
        lines.append(
            f"player {i}: coefficients {' '.join(_fmt(c) for c in br.coefficients)} "
            f"best {_fmt(br.best_value)} current {_fmt(br.current_value)} gap {_fmt(br.gap)}"
        )
    if tau is not None and rg.n:
        box = truncated_box(rg, tau)
        interior = all(v > 0 for v in x_red) and all(xi[-1] > 0 for xi in x)
        if interior:
            rep = stationarity_report(rg, box, x_red, tau, tol=1e-12)
            lines.append(f"stationarity: {rep.classification}")
            for rec in rep.records:
                lines.append(
                    f"  ({rec.i},{rec.j}) residual {_fmt(rec.residual)} grad_norm {_fmt(rec.grad_norm)} "
                    f"at_lower {str(rec.at_lower).lower()} at_cap {str(rec.at_cap).lower()}"
                )
        else:
            lines.append("stationarity: point on the simplex boundary, residuals undefined")
    return "\n".join(lines) + "\n"
