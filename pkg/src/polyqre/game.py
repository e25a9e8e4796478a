"""Polymatrix games over products of simplices.

Player ``i`` picks a mixed action ``x_i`` from the simplex with ``n_i + 1``
coordinates. Utilities are bilinear in pairs of players plus a shared
linear part::

    f_i(x) = sum_{k != i} x_i^T Q[i, k] x_k + sum_j r_j^T x_j

Because ``f_i`` is linear in ``x_i``, best responses are attained at
vertices and are computed exactly without an LP solver.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

SIMPLEX_ATOL = 1e-12
ENUMERATION_CAP = 10**6


class GameError(ValueError):
    """Raised for malformed games or actions that do not fit a game."""


@dataclass(frozen=True)
class PolymatrixGame:
    """Simplex-constrained polymatrix game.

    Parameters
    ----------
    dims : tuple of int
        Reduced dimension ``n_i`` per player; player ``i`` has ``n_i + 1``
        pure actions.
    Q : dict
        ``(i, k) -> ndarray`` of shape ``(n_i + 1, n_k + 1)`` for every
        ordered pair ``i != k``.
    r : tuple of ndarray
        Linear term per player, length ``n_i + 1``.
    """

    dims: tuple[int, ...]
    Q: dict[tuple[int, int], np.ndarray]
    r: tuple[np.ndarray, ...]
    name: str = field(default="", compare=False)

    @property
    def N(self) -> int:
        return len(self.dims)

    def sizes(self) -> list[int]:
        return [n + 1 for n in self.dims]

    def scaled(self, factor: float) -> "PolymatrixGame":
        """Return the game with every utility multiplied by ``factor``."""
        Q = {key: factor * np.asarray(m, dtype=float) for key, m in self.Q.items()}
        r = tuple(factor * np.asarray(v, dtype=float) for v in self.r)
        return PolymatrixGame(self.dims, Q, r, name=self.name)


@dataclass(frozen=True)
class BestResponseResult:
    coefficients: np.ndarray
    best_value: float
    current_value: float
    gap: float


def make_game(dims, Q, r=None, name="") -> PolymatrixGame:
    """Build a game from loosely typed inputs, filling absent ``r`` with zeros."""
    dims = tuple(int(n) for n in dims)
    Qd = {(int(i), int(k)): np.asarray(m, dtype=float) for (i, k), m in Q.items()}
    if r is None:
        r = [np.zeros(n + 1) for n in dims]
    r = tuple(np.asarray(v, dtype=float) for v in r)
    return PolymatrixGame(dims, Qd, r, name=name)


def zero_game(dims) -> PolymatrixGame:
    dims = tuple(int(n) for n in dims)
    Q = {
        (i, k): np.zeros((dims[i] + 1, dims[k] + 1))
        for i in range(len(dims))
        for k in range(len(dims))
        if i != k
    }
    return make_game(dims, Q, name="zero")


def table1_game() -> PolymatrixGame:
    """Two-vehicle intersection game with actions (go, stop).

    Payoffs (row player, column player)::

               go        stop
        go   (-6, -6)   (1, -4)
        stop (-4,  1)   (0,  0)

    ``Q[1, 0]`` is indexed ``[own action, opponent action]`` like ``Q[0, 1]``,
    so the symmetric game has ``Q[1, 0] == Q[0, 1]``.
    """
    A = np.array([[-6.0, 1.0], [-4.0, 0.0]])
    return make_game((1, 1), {(0, 1): A, (1, 0): A.copy()}, name="table1")


BUILTIN_GAMES = {"table1": table1_game}


def validate_game(game: PolymatrixGame) -> list[str]:
    """List every structural problem in ``game``; empty means valid."""
    problems = []
    N = len(game.dims)
    for i, n in enumerate(game.dims):
        if n < 0:
            problems.append(f"player {i}: negative dimension {n}")
    if len(game.r) != N:
        problems.append(f"r has {len(game.r)} entries, expected {N}")
    for i, v in enumerate(game.r[:N]):
        if np.shape(v) != (game.dims[i] + 1,):
            problems.append(
                f"r[{i}]: shape {np.shape(v)}, expected ({game.dims[i] + 1},)"
            )
        elif not np.all(np.isfinite(v)):
            problems.append(f"r[{i}]: non-finite entries")
    for i in range(N):
        for k in range(N):
            if i == k:
                continue
            if (i, k) not in game.Q:
                problems.append(f"Q[{i},{k}]: missing coupling matrix")
                continue
            expected = (game.dims[i] + 1, game.dims[k] + 1)
            shape = np.shape(game.Q[(i, k)])
            if shape != expected:
                problems.append(f"Q[{i},{k}]: shape {shape}, expected {expected}")
            elif not np.all(np.isfinite(game.Q[(i, k)])):
                problems.append(f"Q[{i},{k}]: non-finite entries")
    for key in game.Q:
        i, k = key
        if i == k or not (0 <= i < N and 0 <= k < N):
            problems.append(f"Q[{i},{k}]: not an ordered pair of distinct players")
    return problems


def check_action(game: PolymatrixGame, x, atol: float = SIMPLEX_ATOL) -> list[np.ndarray]:
    """Coerce ``x`` to a list of simplex vectors, raising on mismatch."""
    if len(x) != game.N:
        raise GameError(f"joint action has {len(x)} players, game has {game.N}")
    out = []
    for i, xi in enumerate(x):
        xi = np.asarray(xi, dtype=float)
        if xi.shape != (game.dims[i] + 1,):
            raise GameError(
                f"player {i}: action has shape {xi.shape}, expected ({game.dims[i] + 1},)"
            )
        if np.any(xi < -atol) or abs(xi.sum() - 1.0) > atol:
            raise GameError(f"player {i}: action is not on the simplex")
        out.append(xi)
    return out


def _payoff_coefficients(game: PolymatrixGame, i: int, x) -> np.ndarray:
    c = np.array(game.r[i], dtype=float)
    for k in range(game.N):
        if k != i:
            c = c + game.Q[(i, k)] @ x[k]
    return c


def utility(game: PolymatrixGame, i: int, x) -> float:
    x = check_action(game, x)
    value = sum(float(game.r[j] @ x[j]) for j in range(game.N))
    for k in range(game.N):
        if k != i:
            value += float(x[i] @ game.Q[(i, k)] @ x[k])
    return value


def best_response(game: PolymatrixGame, i: int, x) -> BestResponseResult:
    """Exact best response of player ``i`` against ``x_{-i}``.

    Only player ``i``'s own linear term enters the coefficients; the other
    players' linear terms shift every deviation equally.
    """
    x = check_action(game, x)
    c = _payoff_coefficients(game, i, x)
    best = float(c.max())
    current = float(c @ x[i])
    return BestResponseResult(c, best, current, max(best - current, 0.0))


def epsilon_gap(game: PolymatrixGame, x) -> float:
    """Largest unilateral improvement available to any player at ``x``."""
    return max(best_response(game, i, x).gap for i in range(game.N))


def _vertex_values(game: PolymatrixGame, i: int) -> np.ndarray:
    sizes = game.sizes()
    values = np.zeros(sizes)
    for j in range(game.N):
        shape = [1] * game.N
        shape[j] = sizes[j]
        values = values + np.reshape(game.r[j], shape)
    for k in range(game.N):
        if k == i:
            continue
        shape = [1] * game.N
        shape[i], shape[k] = sizes[i], sizes[k]
        block = game.Q[(i, k)] if i < k else game.Q[(i, k)].T
        values = values + np.reshape(block, shape)
    return values


def delta_f(game: PolymatrixGame, cap: int = ENUMERATION_CAP) -> tuple[float, bool]:
    """Largest utility range over the joint action set.

    Returns ``(value, exact)``. Up to ``cap`` joint vertices the range is
    enumerated exactly; beyond it an interval upper bound is returned and
    ``exact`` is False.
    """
    if game.N == 0:
        return 0.0, True
    if np.prod([float(s) for s in game.sizes()]) <= cap:
        spread = 0.0
        for i in range(game.N):
            v = _vertex_values(game, i)
            spread = max(spread, float(v.max() - v.min()))
        return spread, True
    r_range = sum(float(np.ptp(v)) for v in game.r)
    bound = 0.0
    for i in range(game.N):
        coupling = sum(
            float(np.ptp(game.Q[(i, k)])) if game.Q[(i, k)].size else 0.0
            for k in range(game.N)
            if k != i
        )
        bound = max(bound, coupling + r_range)
    return bound, False


def pure_profiles(game: PolymatrixGame):
    """Iterate over pure joint actions as lists of one-hot vectors."""
    for idx in itertools.product(*(range(s) for s in game.sizes())):
        yield [np.eye(s)[a] for s, a in zip(game.sizes(), idx)]
