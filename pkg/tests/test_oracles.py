import math

import numpy as np
import pytest

from polyqre.game import make_game, table1_game
from polyqre.oracles import (
    bisect_2x2_qres,
    bisect_symmetric_qre,
    fd_gradient,
    grid_qre_search,
    project_bisection,
)
from polyqre.reduced import total_residual, transform, truncated_box


def test_fd_gradient_quadratic():
    np.testing.assert_allclose(fd_gradient(lambda x: x @ x, np.array([1.0, -2.0])), [2.0, -4.0], atol=1e-8)


def test_symmetric_bisection_bracket():
    x = bisect_symmetric_qre(-3.0, 1.0, 0.05)
    assert 0.343 <= x <= 0.345
    assert x == pytest.approx(0.3442, abs=1e-3)


def test_symmetric_bisection_needs_sign_change():
    with pytest.raises(ValueError):
        bisect_symmetric_qre(-3.0, 1.0, 0.05, lo=0.5, hi=0.9)


def test_table1_has_three_qres():
    roots = bisect_2x2_qres(transform(table1_game()), 0.05)
    assert len(roots) == 3
    sym = [p for p in roots if abs(p[0] - p[1]) < 1e-9]
    assert len(sym) == 1 and sym[0][0] == pytest.approx(0.344085659428, abs=1e-11)


def test_bisection_roots_have_zero_residual():
    rg = transform(table1_game())
    # Near-pure roots carry log-domain rounding, so the bound is loose.
    for p in bisect_2x2_qres(rg, 0.1):
        assert total_residual(rg, p, 0.1) < 1e-12


def test_grid_search_table1():
    rg = transform(table1_game())
    tau = 0.1
    pt, val = grid_qre_search(rg, truncated_box(rg, tau), tau)
    exact = bisect_2x2_qres(rg, tau)
    assert min(np.abs(pt - p).max() for p in exact) <= 2e-3
    assert val < 1e-3


def test_grid_search_dimension_limit():
    g = make_game((2, 2), {(0, 1): np.zeros((3, 3)), (1, 0): np.zeros((3, 3))})
    rg = transform(g)
    with pytest.raises(ValueError):
        grid_qre_search(rg, truncated_box(rg, 0.1), 0.1)


def test_projection_oracle_simple():
    np.testing.assert_allclose(project_bisection([0.8, 0.8], 0.01, 0.99), [0.495, 0.495], atol=1e-13)
    assert math.isclose(project_bisection([0.2], 0.0, 1.0)[0], 0.2)


@pytest.mark.parametrize("seed", [3, 11, 13])
def test_grid_search_interior_qre_games(seed):
    """Random games whose QRE lies inside the grid span: the argmin is a tau ln 2 equilibrium."""
    from polyqre.bench import gen_random_game
    from polyqre.game import epsilon_gap
    from polyqre.reduced import lift

    tau = 0.1
    game = gen_random_game(2, (1, 1), 6.0, seed)
    rg = transform(game)
    pt, _ = grid_qre_search(rg, truncated_box(rg, tau), tau)
    assert epsilon_gap(game, lift(rg, pt)) <= tau * math.log(2) + 0.01
