"""Brute-force and numerical oracles.

These deliberately avoid the code paths they are used to check: residuals
are re-derived here from the reduced coefficients, projections are solved
by bisection, and extrema are found by enumerating pure profiles.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .game import PolymatrixGame, utility
from .reduced import ReducedGame, TruncatedBox


def fd_gradient(f, x, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for c in range(x.size):
        e = np.zeros_like(x)
        e[c] = h
        grad[c] = (f(x + e) - f(x - e)) / (2 * h)
    return grad


def project_bisection(y, lb: float, ub: float, tol: float = 1e-14) -> np.ndarray:
    """Projection onto ``{x >= lb, sum x <= ub}`` by bisecting the KKT shift."""
    y = np.asarray(y, dtype=float)
    if np.maximum(y, lb).sum() <= ub:
        return np.maximum(y, lb)
    lo, hi = 0.0, float(y.max() - lb)
    for _ in range(200):
        if hi - lo <= tol * max(1.0, hi):
            break
        mid = 0.5 * (lo + hi)
        if np.maximum(y - mid, lb).sum() > ub:
            lo = mid
        else:
            hi = mid
    return np.maximum(y - hi, lb)


def _logistic(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def bisect_symmetric_qre(q: float, r: float, tau: float, tol: float = 1e-15,
                         lo: float = 0.0, hi: float = 1.0) -> float:
    """Root of ``x - logistic((r + q*x) / tau)`` for a symmetric 2x2 game."""
    h = lambda x: x - _logistic((r + q * x) / tau)
    if h(lo) > 0 or h(hi) < 0:
        raise ValueError("no sign change on the bracket")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if h(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def bisect_2x2_qres(rg: ReducedGame, tau: float, samples: int = 4001,
                    tol: float = 1e-15) -> list[np.ndarray]:
    """QREs of a two-player game with two actions each.

    Substitutes player 2's logit response into player 1's, scans the
    resulting scalar equation for sign changes and bisects every bracket.
    Some QRE always exists because ``h(0) < 0 < h(1)``.
    """
    if rg.dims != (1, 1):
        raise ValueError("needs a two-player game with one reduced coordinate each")
    q1, r1 = float(rg.Qhat[(0, 1)][0, 0]), float(rg.rhat[0][0])
    q2, r2 = float(rg.Qhat[(1, 0)][0, 0]), float(rg.rhat[1][0])
    resp2 = lambda x1: _logistic((r2 + q2 * x1) / tau)
    h = lambda x1: x1 - _logistic((r1 + q1 * resp2(x1)) / tau)
    grid = np.linspace(0.0, 1.0, samples)
    signs = np.sign(h(grid))
    roots = []
    for a in range(samples - 1):
        if signs[a] == 0:
            roots.append(grid[a])
            continue
        if signs[a] * signs[a + 1] >= 0:
            continue
        lo, hi = grid[a], grid[a + 1]
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi):
                break
            if np.sign(h(mid)) == signs[a]:
                lo = mid
            else:
                hi = mid
        roots.append(0.5 * (lo + hi))
    if signs[-1] == 0:
        roots.append(grid[-1])
    return [np.array([x1, resp2(x1)]) for x1 in roots]


def _grid_residuals(rg: ReducedGame, pts: np.ndarray, tau: float) -> np.ndarray:
    """Mean squared residual at each row of ``pts``, written out from the coefficients."""
    total = np.zeros(len(pts))
    off = 0
    blocks = []
    for i, d in enumerate(rg.dims):
        blocks.append((off, off + d))
        off += d
    for i, (a, b) in enumerate(blocks):
        s = 1.0 - pts[:, a:b].sum(axis=1)
        for j in range(b - a):
            g = np.full(len(pts), float(rg.rhat[i][j]))
            for k, (c, d) in enumerate(blocks):
                if k != i and d > c:
                    g = g + pts[:, c:d] @ rg.Qhat[(i, k)][j]
            root = g - tau * np.log(pts[:, a + j]) + tau * np.log(s)
            total += root**2
    return total / max(off, 1)


def grid_qre_search(rg: ReducedGame, box: TruncatedBox, tau: float,
                    grid_step: float = 1e-3) -> tuple[np.ndarray, float]:
    """Exhaustive minimizer of the mean residual over a regular grid.

    Grid values are ``k * grid_step``; points outside the truncated box are
    discarded. Limited to total reduced dimension 3.
    """
    n = int(sum(rg.dims))
    if not 1 <= n <= 3:
        raise ValueError(f"grid search supports 1 to 3 reduced coordinates, got {n}")
    K = int(math.floor(1.0 / grid_step + 1e-9))
    axis = np.arange(1, K + 1) * grid_step
    axis = axis[axis >= box.lower]
    best_pt, best_val = None, math.inf
    first = axis if n > 1 else [None]
    for head in first:
        if head is None:
            pts = axis[:, None]
        else:
            rest = np.stack(np.meshgrid(*([axis] * (n - 1)), indexing="ij"), axis=-1)
            rest = rest.reshape(-1, n - 1)
            pts = np.column_stack([np.full(len(rest), head), rest])
        ok = np.ones(len(pts), dtype=bool)
        off = 0
        for d in rg.dims:
            ok &= pts[:, off:off + d].sum(axis=1) <= box.upper
            off += d
        pts = pts[ok]
        if not len(pts):
            continue
        vals = _grid_residuals(rg, pts, tau)
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_pt, best_val = pts[k].copy(), float(vals[k])
    if best_pt is None:
        raise ValueError("grid does not meet the truncated box")
    return best_pt, best_val


def vertex_extrema(game: PolymatrixGame, i: int) -> tuple[float, float]:
    """``(max, min)`` of player ``i``'s utility over pure joint actions."""
    values = []
    for idx in itertools.product(*(range(n + 1) for n in game.dims)):
        x = [np.eye(n + 1)[a] for n, a in zip(game.dims, idx)]
        values.append(utility(game, i, x))
    return max(values), min(values)
