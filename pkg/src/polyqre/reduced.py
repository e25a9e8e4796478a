"""Reduced (last-coordinate-eliminated) game and its entropy residuals.

Substituting ``x_i^{n_i+1} = 1 - sum_j x_i^j`` turns each simplex into
``{x_i >= 0, sum x_i <= 1}`` in ``R^{n_i}``. Points of the reduced game are
stored as one flat vector in player-major order; ``ReducedGame.offsets``
maps player ``i`` to its slice.

For every estimate index ``e = (i, j)`` the signed residual is::

    root_e(x) = g_e(x) - tau * ln x_e + tau * ln(1 - sum x_i)
    g_e(x)    = rhat_i^j + sum_{k != i} <qhat_ik^j, x_k>

and the objective is ``l_e = root_e ** 2``. QREs are exactly the joint
zeros of every ``root_e``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .game import GameError, PolymatrixGame, delta_f, validate_game

LOWER_FLOOR = 1e-300
# 1 - sum(x) must stay representable after summation rounding.
SLACK_FLOOR = 1e-12


class DomainError(ValueError):
    """A log argument left the open domain of the residuals."""


class TauError(ValueError):
    """The regularization weight violates an admissibility bound."""


@dataclass(frozen=True)
class ReducedGame:
    """Coefficients of the reduced utilities.

    ``f_i^t(x) = sum_k x_i^T Qhat[i,k] x_k + rhat_i^T x_i
    + sum_{k != i} cross[i,k]^T x_k + const_i``. Only ``Qhat`` and ``rhat``
    enter player ``i``'s own gradient; ``cross`` and ``const`` are kept so
    reduced utilities reproduce the full ones exactly.
    """

    dims: tuple[int, ...]
    Qhat: dict[tuple[int, int], np.ndarray]
    rhat: tuple[np.ndarray, ...]
    cross: dict[tuple[int, int], np.ndarray]
    const: tuple[float, ...]

    @property
    def N(self) -> int:
        return len(self.dims)

    @property
    def n(self) -> int:
        return int(sum(self.dims))

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.dims)]).astype(int)

    def block(self, i: int) -> slice:
        off = self.offsets
        return slice(int(off[i]), int(off[i + 1]))

    def owners(self) -> np.ndarray:
        """Player owning each flat coordinate."""
        return np.repeat(np.arange(self.N), self.dims)

    def estimate_index(self, i: int, j: int) -> int:
        return int(self.offsets[i]) + j

    def estimates(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.N) for j in range(self.dims[i])]

    def coupling_matrix(self) -> np.ndarray:
        """Dense ``n x n`` matrix with ``Qhat[i,k]`` in block ``(i,k)``, zero diagonal blocks."""
        G = getattr(self, "_G", None)
        if G is None:
            G = np.zeros((self.n, self.n))
            for (i, k), m in self.Qhat.items():
                G[self.block(i), self.block(k)] = m
            G.setflags(write=False)
            object.__setattr__(self, "_G", G)
        return G

    def rhat_flat(self) -> np.ndarray:
        if self.n == 0:
            return np.zeros(0)
        return np.concatenate(self.rhat)

    def split(self, x) -> list[np.ndarray]:
        x = np.asarray(x, dtype=float)
        return [x[self.block(i)] for i in range(self.N)]

    def join(self, parts) -> np.ndarray:
        if not parts:
            return np.zeros(0)
        return np.concatenate([np.atleast_1d(np.asarray(p, dtype=float)) for p in parts])


@dataclass(frozen=True)
class TruncatedBox:
    """Per-player feasible set ``{x_j >= lower, sum x <= 1 - slack}``.

    ``log_lower`` and ``log_slack`` are exact; ``lower`` and ``slack`` are
    their linear-domain values floored at ``LOWER_FLOOR`` and ``SLACK_FLOOR``.
    """

    tau: float
    lower: float
    log_lower: float
    slack: float
    log_slack: float
    max_dim: int

    @property
    def upper(self) -> float:
        return 1.0 - self.slack

    def contains(self, xi, atol: float = 1e-12) -> bool:
        xi = np.asarray(xi, dtype=float)
        return bool(np.all(xi >= self.lower - atol) and xi.sum() <= self.upper + atol)


@dataclass(frozen=True)
class TauParams:
    epsilon: float
    tau: float
    tau_max: float
    delta_f: float
    R: float
    delta_f_exact: bool = True


def transform(game: PolymatrixGame) -> ReducedGame:
    """Eliminate each player's last coordinate."""
    problems = validate_game(game)
    if problems:
        raise GameError("invalid game: " + "; ".join(problems))
    N, dims = game.N, game.dims
    r_red = []
    const = [0.0] * N
    for j in range(N):
        rj = np.asarray(game.r[j], dtype=float)
        r_red.append(rj[:-1] - rj[-1])
    for i in range(N):
        const[i] = sum(float(game.r[j][-1]) for j in range(N))

    Qhat, cross = {}, {}
    rhat = [r_red[i].copy() for i in range(N)]
    for i in range(N):
        for k in range(N):
            if k == i:
                continue
            Q = np.asarray(game.Q[(i, k)], dtype=float)
            A, b, c, d = Q[:-1, :-1], Q[:-1, -1], Q[-1, :-1], Q[-1, -1]
            Qhat[(i, k)] = A - b[:, None] - c[None, :] + d
            rhat[i] = rhat[i] + (b - d)
            cross[(i, k)] = (c - d) + r_red[k]
            const[i] += float(d)
    return ReducedGame(tuple(dims), Qhat, tuple(rhat), cross, tuple(const))


def reduced_utility(rg: ReducedGame, i: int, x, include_constant: bool = True) -> float:
    parts = rg.split(x)
    value = float(rg.rhat[i] @ parts[i])
    for k in range(rg.N):
        if k == i:
            continue
        value += float(parts[i] @ rg.Qhat[(i, k)] @ parts[k])
        value += float(rg.cross[(i, k)] @ parts[k])
    if include_constant:
        value += rg.const[i]
    return value


def lift(rg: ReducedGame, x, atol: float = 1e-12) -> list[np.ndarray]:
    """Append ``1 - sum x_i`` to each player's block."""
    out = []
    for i, xi in enumerate(rg.split(x)):
        last = 1.0 - xi.sum()
        if last < -atol or np.any(xi < -atol):
            raise DomainError(f"player {i}: point lies outside the reduced simplex")
        out.append(np.append(xi, max(last, 0.0)))
    return out


def reduce_point(x) -> np.ndarray:
    """Inverse of :func:`lift`: drop every player's last coordinate."""
    return np.concatenate([np.asarray(xi, dtype=float)[:-1] for xi in x])


def _slacks(rg: ReducedGame, x: np.ndarray) -> np.ndarray:
    return np.array([1.0 - x[rg.block(i)].sum() for i in range(rg.N)])


def _check_domain(rg: ReducedGame, x: np.ndarray, slacks: np.ndarray) -> None:
    bad = np.flatnonzero(~(x >= LOWER_FLOOR))
    if bad.size:
        e = int(bad[0])
        i = int(rg.owners()[e])
        raise DomainError(
            f"coordinate ({i},{e - rg.offsets[i]}) = {x[e]!r} below {LOWER_FLOOR}"
        )
    bad = np.flatnonzero(~(slacks >= LOWER_FLOOR))
    if bad.size:
        i = int(bad[0])
        raise DomainError(f"player {i}: 1 - sum(x_i) = {slacks[i]!r} is not positive")


def gradient_differences(rg: ReducedGame, x) -> np.ndarray:
    """Unregularized part ``g_e(x)`` for every estimate index."""
    x = np.asarray(x, dtype=float)
    return rg.rhat_flat() + rg.coupling_matrix() @ x


def reduced_gradient_difference(rg: ReducedGame, x, i: int, j: int) -> float:
    return float(gradient_differences(rg, x)[rg.estimate_index(i, j)])


def pseudo_gradient(rg: ReducedGame, x, tau: float) -> np.ndarray:
    """Stacked own-gradients of the regularized reduced utilities.

    Component ``e`` equals ``root_e(x)``, so ``||F||^2 = sum_e l_e``.
    """
    x = np.asarray(x, dtype=float)
    s = _slacks(rg, x)
    _check_domain(rg, x, s)
    g = gradient_differences(rg, x)
    if tau == 0:
        return g
    return g - tau * np.log(x) + tau * np.log(s)[rg.owners()]


def residual_root(rg: ReducedGame, x, i: int, j: int, tau: float) -> float:
    return float(pseudo_gradient(rg, x, tau)[rg.estimate_index(i, j)])


def residual_l(rg: ReducedGame, x, i: int, j: int, tau: float) -> float:
    return residual_root(rg, x, i, j, tau) ** 2


def total_residual(rg: ReducedGame, x, tau: float) -> float:
    """Mean of ``l_e`` over all ``n`` estimate indices."""
    if rg.n == 0:
        return 0.0
    F = pseudo_gradient(rg, x, tau)
    return float(F @ F) / rg.n


def _direction(rg: ReducedGame, x: np.ndarray, e: int, tau: float, slack: float) -> np.ndarray:
    """Gradient of ``root_e`` with respect to the flat point."""
    i = int(rg.owners()[e])
    q = rg.coupling_matrix()[e].copy()
    q[rg.block(i)] = -tau / slack
    q[e] -= tau / x[e]
    return q


def grad_residual(rg: ReducedGame, x, i: int, j: int, tau: float) -> np.ndarray:
    """Gradient of ``l_ij`` in canonical player-major order."""
    x = np.asarray(x, dtype=float)
    s = _slacks(rg, x)
    _check_domain(rg, x, s)
    e = rg.estimate_index(i, j)
    root = residual_root(rg, x, i, j, tau)
    return 2.0 * root * _direction(rg, x, e, tau, s[i])


def estimate_gradients(rg: ReducedGame, X, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """Row ``e`` of the result is ``grad l_e`` evaluated at ``X[e]``.

    Returns ``(roots, grads)`` where ``roots[e] = root_e(X[e])``. This is the
    batched form used by the distributed algorithms, where each estimate
    only descends its own objective.
    """
    X = np.asarray(X, dtype=float)
    n = rg.n
    own = rg.owners()
    S = np.stack([1.0 - X[:, rg.block(i)].sum(axis=1) for i in range(rg.N)], axis=1)
    for e in range(n):
        _check_domain(rg, X[e], S[e])
    idx = np.arange(n)
    s_own = S[idx, own]
    x_own = X[idx, idx]
    g = rg.rhat_flat() + np.einsum("ek,ek->e", rg.coupling_matrix(), X)
    roots = g - tau * np.log(x_own) + tau * np.log(s_own)
    Q = np.array(rg.coupling_matrix())
    Q[own[:, None] == own[None, :]] = 0.0
    Q = Q - np.where(own[:, None] == own[None, :], tau / s_own[:, None], 0.0)
    Q[idx, idx] -= tau / x_own
    return roots, 2.0 * roots[:, None] * Q


def truncated_box(source, tau: float) -> TruncatedBox:
    """Truncated feasible set for regularization weight ``tau``.

    ``source`` is a game, a reduced game, or a sequence of reduced dims.
    """
    if tau <= 0:
        raise TauError(f"tau must be positive, got {tau}")
    dims = getattr(source, "dims", source)
    m = max(dims) + 1 if len(dims) else 1
    log_lower = -1.0 / tau**2 - math.log(m)
    log_slack = -1.0 / tau**1.5 - math.log(m)
    lower = max(math.exp(log_lower), LOWER_FLOOR)
    slack = max(math.exp(log_slack), SLACK_FLOOR)
    return TruncatedBox(float(tau), lower, log_lower, slack, log_slack, m - 1)


def row_maximum(rg: ReducedGame, box: TruncatedBox | None = None) -> float:
    """Largest value of ``g_e(x)`` over the feasible set.

    With ``box=None`` the maximum runs over the whole reduced simplex
    (bounds 0 and 1), which dominates every truncated box.
    """
    lb, ub = (0.0, 1.0) if box is None else (box.lower, box.upper)
    best = -math.inf
    for i in range(rg.N):
        for j in range(rg.dims[i]):
            value = float(rg.rhat[i][j])
            for k in range(rg.N):
                if k == i or rg.dims[k] == 0:
                    continue
                q = rg.Qhat[(i, k)][j]
                # Linear over {x >= lb, sum x <= ub}: extreme at lb*1 or lb*1 + room*e_m.
                room = ub - rg.dims[k] * lb
                value += lb * float(q.sum()) + room * max(0.0, float(q.max()))
            best = max(best, value)
    return best


def max_log_size(dims) -> float:
    return max((math.log(n + 1) for n in dims), default=0.0)


def tau_max(game: PolymatrixGame, box_tau: float | None = None) -> TauParams:
    """Admissible range for ``tau`` and ``epsilon``.

    ``tau_max = min(1/delta_f, 1/delta_f**2, 1/4, 1/R**2)`` with terms
    dropped when ``delta_f == 0`` or ``R <= 0``. The returned ``epsilon`` is
    the supremum ``tau_max * max_i ln(n_i + 1)`` of valid epsilons.
    """
    rg = transform(game)
    df, exact = delta_f(game)
    box = None if box_tau is None else truncated_box(rg, box_tau)
    R = row_maximum(rg, box)
    candidates = [0.25]
    if df > 0:
        candidates += [1.0 / df, 1.0 / df**2]
    if R > 0:
        candidates.append(1.0 / R**2)
    tm = min(candidates)
    return TauParams(tm * max_log_size(game.dims), tm, tm, df, R, exact)


def resolve_tau(game: PolymatrixGame, epsilon: float, tau="auto", strict: bool = False) -> TauParams:
    """Pick or check ``tau`` for a target ``epsilon``.

    ``"auto"`` gives ``min(epsilon / max ln(n_i+1), 0.99 * tau_max)``. An
    explicit ``tau`` above ``epsilon / max ln(n_i+1)`` is always rejected;
    one at or above ``tau_max`` is rejected in strict mode and warned about
    otherwise.
    """
    if epsilon <= 0:
        raise TauError(f"epsilon must be positive, got {epsilon}")
    params = tau_max(game)
    logs = max_log_size(game.dims)
    tau_eps = epsilon / logs if logs > 0 else math.inf
    if tau == "auto" or tau is None:
        tau = min(tau_eps, 0.99 * params.tau_max)
    tau = float(tau)
    if tau <= 0:
        raise TauError(f"tau must be positive, got {tau}")
    if tau > tau_eps * (1 + 1e-12):
        raise TauError(
            f"tau={tau} exceeds epsilon/max ln(n_i+1) = {tau_eps}; "
            "QREs are then not guaranteed to be epsilon-NE"
        )
    if tau >= params.tau_max:
        msg = (
            f"tau={tau} is not below tau_max={params.tau_max} "
            f"(delta_f={params.delta_f}, R={params.R}); "
            f"valid epsilon < {params.epsilon}"
        )
        if strict:
            raise TauError(msg)
        warnings.warn(msg, stacklevel=2)
    return TauParams(float(epsilon), tau, params.tau_max, params.delta_f, params.R, params.delta_f_exact)
