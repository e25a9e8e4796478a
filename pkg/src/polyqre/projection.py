"""Euclidean projection onto ``{x : x_j >= lb, sum x <= ub}``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class InfeasibleBoxError(ValueError):
    pass


@dataclass(frozen=True)
class ProjectionResult:
    point: np.ndarray
    active_lower: np.ndarray
    sum_active: bool
    multiplier: float


def _check_box(n: int, lb: float, ub: float) -> None:
    if not (lb >= 0 and n * lb < ub and ub <= 1):
        raise InfeasibleBoxError(f"empty or invalid box: n={n}, lb={lb}, ub={ub}")


def project(y, lb: float, ub: float) -> ProjectionResult:
    """Project ``y`` onto the truncated simplex.

    With ``u = x - lb`` the problem becomes projection onto
    ``{u >= 0, sum u <= ub - n*lb}``. If clipping at ``lb`` already meets the
    sum cap the clip is optimal; otherwise the cap is active and
    ``x = max(y - theta, lb)`` with ``theta > 0`` read off the sorted
    breakpoints.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    _check_box(n, lb, ub)
    z = np.maximum(y, lb)
    if z.sum() <= ub:
        return ProjectionResult(z, np.flatnonzero(y <= lb), False, 0.0)

    v = y - lb
    budget = ub - n * lb
    w = np.sort(v)[::-1]
    cums = np.cumsum(w) - budget
    k = np.arange(1, n + 1)
    # Largest k with w_k > (sum_{<=k} w - budget) / k.
    support = np.flatnonzero(w * k > cums)
    # Empty only when the budget is lost to rounding against huge entries.
    rho = int(support[-1]) if support.size else 0
    theta = float(cums[rho] / (rho + 1))
    x = np.maximum(v - theta, 0.0) + lb
    # Absorb rounding so the cap holds exactly.
    excess = x.sum() - ub
    if excess > 0:
        free = x > lb
        x[free] = np.maximum(x[free] - excess / free.sum(), lb)
    return ProjectionResult(x, np.flatnonzero(v - theta <= 0), True, max(theta, 0.0))


def project_blocks(x, blocks, lb: float, ub: float) -> np.ndarray:
    """Project each player block of a flat reduced point independently."""
    out = np.array(x, dtype=float)
    for sl in blocks:
        if sl.stop > sl.start:
            out[sl] = project(out[sl], lb, ub).point
    return out
