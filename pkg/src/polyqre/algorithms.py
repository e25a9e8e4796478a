"""Distributed solvers for the entropy-regularized game.

Both solvers keep an estimate cloud ``X`` of shape ``(n, n)``: row
``e = (i, j)`` is the joint reduced action as seen by player ``i``'s
``j``-th estimate. A round is always *mix, then local update*.

* :func:`run_pgd` does projected gradient descent of each estimate on its
  own residual ``l_e`` and restarts from fresh random estimates when a
  run ends with large residual gradients.
* :func:`run_fixed_point` moves each player's own coordinates toward the
  logit (softmax) response, with optional damping ``eta``.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .consensus import ExtendedMixing, disagreement, mix
from .game import PolymatrixGame, epsilon_gap
from .projection import project, project_blocks
from .reduced import (
    ReducedGame,
    TruncatedBox,
    estimate_gradients,
    lift,
    max_log_size,
    pseudo_gradient,
    total_residual,
)

log = logging.getLogger(__name__)

CONVERGED = "converged"
MAX_ITERS = "max_iters"


class NonFiniteError(FloatingPointError):
    pass


class InfeasibleInitError(ValueError):
    pass


@dataclass
class PGDConfig:
    gamma0: float = 5.0
    schedule: str = "harmonic"
    power: float = 1.0
    max_iters: int = 10_000
    restart_threshold: float = 1e-3
    max_restarts: int = 5
    stop_residual: float = 1e-12
    consensus_tol: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if self.schedule not in ("harmonic", "constant", "power"):
            raise ValueError(f"unknown step-size schedule {self.schedule!r}")
        if self.schedule == "power" and not 0 < self.power <= 1:
            raise ValueError("power schedule needs an exponent in (0, 1]")

    def step(self, t: int) -> float:
        if self.schedule == "harmonic":
            return self.gamma0 / t
        if self.schedule == "constant":
            return self.gamma0
        return self.gamma0 * t ** (-self.power)

    @property
    def satisfies_robbins_monro(self) -> bool:
        """Steps sum to infinity while their squares stay summable."""
        if self.gamma0 == 0:
            return False
        if self.schedule == "harmonic":
            return True
        return self.schedule == "power" and 0.5 < self.power <= 1


@dataclass
class FixedPointConfig:
    damping: float = 0.1
    max_iters: int = 10_000
    tol: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.damping <= 1:
            raise ValueError(f"damping must lie in (0, 1], got {self.damping}")


@dataclass
class RunTrace:
    """Per-iteration diagnostics of one solver run.

    ``mean`` rows hold the average estimate; ``points`` holds the full
    cloud at recorded iterations when ``keep_points`` was requested.
    """

    iters: list[int] = field(default_factory=list)
    total_residual: list[float] = field(default_factory=list)
    epsilon_gap: list[float] = field(default_factory=list)
    disagreement: list[float] = field(default_factory=list)
    mean: list[np.ndarray] = field(default_factory=list)
    points: list[np.ndarray] = field(default_factory=list)
    status: str = MAX_ITERS
    restarts: int = 0
    wall_time: float = 0.0
    final_cloud: np.ndarray | None = None
    estimate_gaps: list[float] = field(default_factory=list)
    info: dict = field(default_factory=dict)

    @property
    def final_point(self) -> np.ndarray:
        return self.final_cloud.mean(axis=0)


@dataclass(frozen=True)
class StationarityRecord:
    i: int
    j: int
    residual: float
    objective: float
    grad_norm: float
    projected_grad_norm: float
    at_lower: bool
    at_cap: bool


@dataclass(frozen=True)
class StationarityReport:
    records: list[StationarityRecord]
    classification: str

    CERTIFIED = "certified"
    BOUNDARY = "boundary-stationary-suspect"
    NON_STATIONARY = "non-stationary"


def random_cloud(rg: ReducedGame, box: TruncatedBox, rng: np.random.Generator) -> np.ndarray:
    """Random estimates, each player block drawn from Dirichlet(1) and mapped into the box."""
    n = rg.n
    X = np.empty((n, n))
    for e in range(n):
        for i in range(rg.N):
            d = rg.dims[i]
            if d == 0:
                continue
            u = rng.dirichlet(np.ones(d + 1))[:d]
            X[e, rg.block(i)] = box.lower + u * (box.upper - d * box.lower)
    return X


def _check_cloud(rg: ReducedGame, box: TruncatedBox, X: np.ndarray) -> None:
    if X.shape != (rg.n, rg.n):
        raise InfeasibleInitError(f"cloud has shape {X.shape}, expected {(rg.n, rg.n)}")
    for e in range(rg.n):
        for i in range(rg.N):
            if rg.dims[i] and not box.contains(X[e, rg.block(i)]):
                raise InfeasibleInitError(f"estimate {e}: player {i} block outside the box")


def _blocks(rg: ReducedGame) -> list[slice]:
    return [rg.block(i) for i in range(rg.N)]


def _record(trace, t, rg, game, tau, X, keep_points, thin):
    if thin > 1 and t % thin:
        return
    m = X.mean(axis=0)
    trace.iters.append(t)
    trace.total_residual.append(total_residual(rg, m, tau))
    trace.epsilon_gap.append(epsilon_gap(game, lift(rg, m)) if game is not None else math.nan)
    trace.disagreement.append(disagreement(X))
    trace.mean.append(m)
    if keep_points:
        trace.points.append(X.copy())


def _finish(trace, rg, game, X, start):
    trace.final_cloud = X
    trace.wall_time = time.perf_counter() - start
    if game is not None:
        trace.estimate_gaps = [epsilon_gap(game, lift(rg, x)) for x in X]


def run_pgd(
    rg: ReducedGame,
    box: TruncatedBox,
    M: ExtendedMixing,
    cfg: PGDConfig,
    init=None,
    game: PolymatrixGame | None = None,
    keep_points: bool = False,
    thin: int = 1,
) -> RunTrace:
    """Distributed projected gradient descent with restarts.

    Per round every estimate is averaged with its neighbours and then takes
    a projected step along ``-grad l_e``. After ``max_iters`` rounds without
    convergence, if some estimate still has ``||grad l_e|| > restart_threshold``,
    the cloud is re-drawn at random and the run starts over.
    """
    rng = np.random.default_rng(cfg.seed)
    X = random_cloud(rg, box, rng) if init is None else np.array(init, dtype=float)
    _check_cloud(rg, box, X)
    tau = box.tau
    blocks = _blocks(rg)
    trace = RunTrace()
    trace.info["stochasticity_corrected"] = M.corrected
    start = time.perf_counter()
    clock = 0
    _record(trace, clock, rg, game, tau, X, keep_points, 1)

    while True:
        converged = False
        for t in range(1, cfg.max_iters + 1):
            clock += 1
            mixed = mix(M, X)
            _, grads = estimate_gradients(rg, mixed, tau)
            if not np.all(np.isfinite(grads)):
                raise NonFiniteError(f"non-finite gradient at iteration {clock}")
            stepped = mixed - cfg.step(t) * grads
            X = np.stack([project_blocks(row, blocks, box.lower, box.upper) for row in stepped])
            _record(trace, clock, rg, game, tau, X, keep_points, thin)
            if cfg.stop_residual > 0 and disagreement(X) <= cfg.consensus_tol:
                if total_residual(rg, X.mean(axis=0), tau) <= cfg.stop_residual:
                    converged = True
                    break
        if trace.iters[-1] != clock:
            _record(trace, clock, rg, game, tau, X, keep_points, 1)
        if converged:
            trace.status = CONVERGED
            break
        _, grads = estimate_gradients(rg, X, tau)
        with np.errstate(over="ignore"):  # inf is an honest norm for huge gradients
            worst = float(np.max(np.linalg.norm(grads, axis=1))) if rg.n else 0.0
        trace.info["final_grad_norm"] = worst
        if worst <= cfg.restart_threshold or trace.restarts >= cfg.max_restarts:
            break
        log.info("restart %d: max gradient norm %.3g", trace.restarts + 1, worst)
        trace.restarts += 1
        X = random_cloud(rg, box, rng)

    _finish(trace, rg, game, X, start)
    return trace


def softmax_response(logits: np.ndarray, tau: float) -> np.ndarray:
    """Logit response with an implicit zero logit for the eliminated action.

    ``logits`` has the ``n_i`` explicit payoff differences on its last axis.
    """
    z = np.asarray(logits, dtype=float) / tau
    top = np.maximum(z.max(axis=-1, keepdims=True), 0.0)
    w = np.exp(z - top)
    return w / (np.exp(-top) + w.sum(axis=-1, keepdims=True))


def run_fixed_point(
    rg: ReducedGame,
    box: TruncatedBox,
    M: ExtendedMixing,
    cfg: FixedPointConfig,
    init=None,
    game: PolymatrixGame | None = None,
    keep_points: bool = False,
    thin: int = 1,
) -> RunTrace:
    """Distributed damped logit-response iteration.

    After mixing, player ``i`` replaces its own coordinates in each of its
    estimates by ``(1 - eta) * x + eta * softmax(g / tau)``, where ``g`` is
    the vector of payoff differences computed from that estimate. The
    result is projected into the truncated box. ``eta = 1`` is the plain
    undamped map. Stops once no estimate moves by ``tol`` or more.
    """
    rng = np.random.default_rng(cfg.seed)
    X = random_cloud(rg, box, rng) if init is None else np.array(init, dtype=float)
    _check_cloud(rg, box, X)
    tau, eta = box.tau, cfg.damping
    G = rg.coupling_matrix()
    rhat = rg.rhat_flat()
    own = rg.owners()
    blocks = _blocks(rg)
    trace = RunTrace()
    trace.info["stochasticity_corrected"] = M.corrected
    trace.info["lipschitz"] = float(np.abs(G).sum(axis=1).max(initial=0.0)) / (4 * tau)
    start = time.perf_counter()
    _record(trace, 0, rg, game, tau, X, keep_points, 1)

    t, step = 0, math.nan
    for t in range(1, cfg.max_iters + 1):
        mixed = mix(M, X)
        if not np.all(np.isfinite(mixed)):
            raise NonFiniteError(f"non-finite estimate at iteration {t}")
        g = rhat + mixed @ G.T
        new = mixed.copy()
        for i, sl in enumerate(blocks):
            rows = np.flatnonzero(own == i)
            if rows.size == 0:
                continue
            p = softmax_response(g[rows, sl], tau)
            cur = mixed[rows, sl]
            upd = (1 - eta) * cur + eta * p
            new[rows, sl] = np.stack([project(u, box.lower, box.upper).point for u in upd])
        step = float(np.max(np.abs(new - X))) if new.size else 0.0
        X = new
        _record(trace, t, rg, game, tau, X, keep_points, thin)
        if step < cfg.tol:
            trace.status = CONVERGED
            break
    if trace.iters[-1] != t:
        _record(trace, t, rg, game, tau, X, keep_points, 1)
    trace.info["last_step"] = step
    _finish(trace, rg, game, X, start)
    return trace


def epsilon_bound(rg: ReducedGame, tau: float) -> float:
    """Approximation level ``tau * max ln(n_i + 1)`` guaranteed at a QRE."""
    return tau * max_log_size(rg.dims)


def stationarity_report(
    rg: ReducedGame,
    box: TruncatedBox,
    x,
    tau: float,
    tol: float,
    rtol: float = 1e-9,
) -> StationarityReport:
    """Classify a reduced point by its residuals and boundary contacts.

    ``certified`` when every residual ``l_e`` is at most ``tol``; otherwise
    ``boundary-stationary-suspect`` when some coordinate sits on the lower
    bound or some player's sum sits on the cap (the only places a common
    stationary point can fail to be an equilibrium); else
    ``non-stationary``.
    """
    x = np.asarray(x, dtype=float)
    roots = pseudo_gradient(rg, x, tau)
    X = np.tile(x, (rg.n, 1))
    _, grads = estimate_gradients(rg, X, tau)
    blocks = _blocks(rg)
    records = []
    for e, (i, j) in enumerate(rg.estimates()):
        xi = x[rg.block(i)]
        at_lower = bool(xi[j] <= box.lower * (1 + rtol))
        at_cap = bool(1.0 - xi.sum() <= box.slack * (1 + rtol))
        moved = project_blocks(x - grads[e], blocks, box.lower, box.upper)
        records.append(
            StationarityRecord(
                i, j, float(roots[e]), float(roots[e] ** 2),
                float(np.linalg.norm(grads[e])), float(np.linalg.norm(x - moved)),
                at_lower, at_cap,
            )
        )
    if all(r.objective <= tol for r in records):
        cls = StationarityReport.CERTIFIED
    elif any(r.at_lower or r.at_cap for r in records):
        cls = StationarityReport.BOUNDARY
    else:
        cls = StationarityReport.NON_STATIONARY
    return StationarityReport(records, cls)
