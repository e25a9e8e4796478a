import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from polyqre.game import make_game, table1_game, utility, zero_game
from polyqre.oracles import fd_gradient
from polyqre.reduced import (
    LOWER_FLOOR,
    SLACK_FLOOR,
    DomainError,
    TauError,
    estimate_gradients,
    grad_residual,
    lift,
    pseudo_gradient,
    reduce_point,
    reduced_utility,
    residual_l,
    residual_root,
    resolve_tau,
    total_residual,
    tau_max,
    transform,
    truncated_box,
)

from conftest import random_dims, random_game, random_interior

LN2 = math.log(2.0)


def test_transform_table1():
    rg = transform(table1_game())
    assert rg.Qhat[(0, 1)][0, 0] == -3.0
    assert rg.Qhat[(1, 0)][0, 0] == -3.0
    assert rg.rhat[0][0] == 1.0 and rg.rhat[1][0] == 1.0


def test_transform_zero_game():
    rg = transform(zero_game((2, 1)))
    assert not rg.coupling_matrix().any()
    assert not rg.rhat_flat().any()


def test_lift_and_reduce():
    rg = transform(table1_game())
    parts = lift(rg, [0.25, 0.6])
    np.testing.assert_allclose(parts[0], [0.25, 0.75])
    np.testing.assert_allclose(parts[1], [0.6, 0.4])
    np.testing.assert_allclose(reduce_point(parts), [0.25, 0.6])


def test_lift_rejects_infeasible():
    with pytest.raises(DomainError):
        lift(transform(table1_game()), [0.7, 1.2])


def test_reduced_utility_matches_full(rng):
    for _ in range(30):
        dims = random_dims(rng)
        g = random_game(rng, dims)
        rg = transform(g)
        x = random_interior(rng, dims)
        full = lift(rg, x)
        for i in range(g.N):
            assert reduced_utility(rg, i, x) == pytest.approx(utility(g, i, full), abs=1e-10)


def test_residual_root_table1_at_third():
    rg = transform(table1_game())
    x = np.array([1 / 3, 1 / 3])
    np.testing.assert_allclose(pseudo_gradient(rg, x, 0.1), [0.1 * LN2] * 2, rtol=1e-12)
    assert residual_root(rg, x, 0, 0, 0.1) == pytest.approx(0.1 * LN2, rel=1e-12)
    assert residual_l(rg, x, 0, 0, 0.1) == pytest.approx(4.80453013918e-3, rel=1e-10)


def test_grad_residual_table1_at_third():
    rg = transform(table1_game())
    x = np.array([1 / 3, 1 / 3])
    root = 0.1 * LN2
    expected = 2 * root * np.array([-0.45, -3.0])
    np.testing.assert_allclose(grad_residual(rg, x, 0, 0, 0.1), expected, rtol=1e-12)


def test_zero_game_residual_closed_form():
    rg = transform(zero_game((2,)))
    tau = 0.1
    # Slack 0.5 against coordinates 0.25: every root is tau*ln 2.
    assert total_residual(rg, [0.25, 0.25], tau) == pytest.approx((tau * LN2) ** 2, rel=1e-12)
    assert total_residual(rg, [1 / 3, 1 / 3], tau) == pytest.approx(0.0, abs=1e-30)


def test_domain_errors():
    rg = transform(table1_game())
    with pytest.raises(DomainError):
        pseudo_gradient(rg, [0.0, 0.5], 0.1)
    with pytest.raises(DomainError):
        pseudo_gradient(rg, [1.0, 0.5], 0.1)


def test_gradient_matches_finite_differences(rng):
    for _ in range(10):
        dims = random_dims(rng)
        rg = transform(random_game(rng, dims))
        x = random_interior(rng, dims, margin=0.3)
        tau = 0.2
        for i, j in rg.estimates():
            fd = fd_gradient(lambda z: residual_l(rg, z, i, j, tau), x)
            an = grad_residual(rg, x, i, j, tau)
            assert np.linalg.norm(fd - an) <= 1e-5 * max(np.linalg.norm(an), 1e-3)


def test_estimate_gradients_batch_matches_single(rng):
    dims = (2, 1, 3)
    rg = transform(random_game(rng, dims))
    X = np.stack([random_interior(rng, dims) for _ in range(rg.n)])
    roots, grads = estimate_gradients(rg, X, 0.3)
    for e, (i, j) in enumerate(rg.estimates()):
        assert roots[e] == pytest.approx(residual_root(rg, X[e], i, j, 0.3), rel=1e-12)
        np.testing.assert_allclose(grads[e], grad_residual(rg, X[e], i, j, 0.3), rtol=1e-10, atol=1e-14)


def test_total_residual_is_mean_squared_root(rng):
    dims = (3, 2)
    rg = transform(random_game(rng, dims))
    x = random_interior(rng, dims)
    F = pseudo_gradient(rg, x, 0.4)
    assert F @ F == pytest.approx(rg.n * total_residual(rg, x, 0.4), rel=1e-12)


def test_permutation_equivariance(rng):
    dims = (1, 2, 1)
    g = random_game(rng, dims)
    perm = [2, 0, 1]
    gp = make_game(
        tuple(dims[p] for p in perm),
        {(a, b): g.Q[(perm[a], perm[b])] for a in range(3) for b in range(3) if a != b},
        [g.r[p] for p in perm],
    )
    rg, rgp = transform(g), transform(gp)
    x = random_interior(rng, dims)
    parts = rg.split(x)
    xp = rgp.join([parts[p] for p in perm])
    F, Fp = rg.split(pseudo_gradient(rg, x, 0.3)), rgp.split(pseudo_gradient(rgp, xp, 0.3))
    for a in range(3):
        np.testing.assert_allclose(Fp[a], F[perm[a]], rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), c=st.floats(-20, 20))
def test_uniform_shift_of_all_payoffs_leaves_residual(seed, c):
    rng = np.random.default_rng(seed)
    dims = (2, 1)
    g = random_game(rng, dims)
    shifted = make_game(dims, {k: v + c for k, v in g.Q.items()}, g.r)
    x = random_interior(rng, dims)
    a = pseudo_gradient(transform(g), x, 0.3)
    b = pseudo_gradient(transform(shifted), x, 0.3)
    np.testing.assert_allclose(a, b, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_stationary_iff_zero_residual(seed):
    """Each gradient vanishes exactly when its residual does on interior points."""
    rng = np.random.default_rng(seed)
    dims = random_dims(rng)
    rg = transform(random_game(rng, dims))
    x = random_interior(rng, dims)
    for i, j in rg.estimates():
        l = residual_l(rg, x, i, j, 0.2)
        gnorm = np.linalg.norm(grad_residual(rg, x, i, j, 0.2))
        assert (gnorm <= 1e-10) == (l <= 1e-20)


def test_truncated_box_values():
    b = truncated_box((1, 1), 0.5)
    assert b.lower == pytest.approx(9.158e-3, rel=1e-3)
    assert b.slack == pytest.approx(2.956e-2, rel=1e-3)
    assert b.upper == pytest.approx(1 - 2.956e-2, rel=1e-3)
    tiny = truncated_box((1, 1), 0.02)
    assert tiny.lower == LOWER_FLOOR
    assert tiny.log_lower == pytest.approx(-2500 - LN2, rel=1e-14)
    assert tiny.slack == SLACK_FLOOR and tiny.upper < 1.0


def test_truncated_box_rejects_nonpositive_tau():
    with pytest.raises(TauError):
        truncated_box((1,), 0.0)


def test_tau_max_table1():
    p = tau_max(table1_game())
    assert p.delta_f == 7.0 and p.R == 1.0
    assert p.tau_max == pytest.approx(1 / 49, rel=1e-15)
    assert p.epsilon == pytest.approx(LN2 / 49, rel=1e-15)


def test_tau_max_zero_game():
    p = tau_max(zero_game((1, 2)))
    assert p.tau_max == 0.25


def test_resolve_tau():
    g = table1_game()
    auto = resolve_tau(g, 0.01)
    assert auto.tau == pytest.approx(0.01 / LN2)
    assert resolve_tau(g, 1.0).tau == pytest.approx(0.99 / 49)
    with pytest.raises(TauError):
        resolve_tau(g, 0.01, tau=0.1)
    with pytest.raises(TauError):
        resolve_tau(g, 1.0, tau=0.05, strict=True)
    with pytest.warns(UserWarning):
        resolve_tau(g, 1.0, tau=0.05)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        resolve_tau(g, 1.0, tau=0.01)


def test_gradient_vanishes_at_constructed_zeros(rng):
    """Solve one residual to zero along its own axis; its gradient must vanish too."""
    tau = 0.3
    checked = 0
    for _ in range(200):
        dims = random_dims(rng)
        rg = transform(random_game(rng, dims, scale=1.0))
        x = random_interior(rng, dims, margin=0.5)
        i, j = rg.estimates()[int(rng.integers(rg.n))]
        e = rg.offsets[i] + j
        room = 1.0 - (x[rg.block(i)].sum() - x[e])

        def f(v):
            y = x.copy()
            y[e] = v
            return residual_root(rg, y, i, j, tau)

        a, b = room * 1e-6, room * (1 - 1e-6)
        if f(a) * f(b) >= 0:
            continue
        x[e] = brentq(f, a, b, xtol=1e-16, rtol=1e-15)
        if min(x[e], 1.0 - x[rg.block(i)].sum()) < 0.01:
            continue  # near the boundary the thresholds are not attainable in floats
        assert residual_l(rg, x, i, j, tau) <= 1e-20
        assert np.linalg.norm(grad_residual(rg, x, i, j, tau)) <= 1e-10
        checked += 1
    assert checked >= 50
