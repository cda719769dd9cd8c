import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import linear_net
from pinnbias.jetnet import ParamVector, StructureError, forward, init_params
from pinnbias.losses import (
    LossWeights,
    boundary_residual,
    interior_residual,
    supervised_loss_and_grad,
    total_loss_and_grad,
)
from pinnbias.problems import BoundaryConstraint, catalog, forcing_eval, sample_collocation

SIZES = (1, 12, 12, 1)


def total(params, problem, pts, weights=LossWeights(), act="tanh"):
    return total_loss_and_grad(params, problem, pts, weights, act)[0].total


def test_zero_network_interior_residual():
    zero = init_params(0, SIZES).zeros_like()
    assert interior_residual(zero, catalog("eq21", 2), math.pi / 4) == pytest.approx(-1.0, abs=1e-15)


def test_affine_network_on_second_order_problem():
    p = catalog("eq19")
    x = np.linspace(-3, 3, 5)
    np.testing.assert_allclose(interior_residual(linear_net(0.7, 0.2), p, x), -forcing_eval(p, x))


def test_boundary_residuals_of_simple_nets():
    zero = init_params(0, SIZES).zeros_like()
    assert boundary_residual(zero, BoundaryConstraint(math.pi)) == 0.0
    lin = linear_net(0.5, 0.1)
    assert boundary_residual(lin, BoundaryConstraint(-math.pi)) == pytest.approx(-0.5 * math.pi + 0.1)
    assert boundary_residual(lin, BoundaryConstraint(1.0, order=1, target=0.2)) == pytest.approx(0.3)


def test_zero_network_interior_loss_monte_carlo():
    zero = init_params(0, SIZES).zeros_like()
    p = catalog("eq25", 2)
    loss, _ = total_loss_and_grad(zero, p, sample_collocation(p, 1024))
    assert loss.interior == pytest.approx(0.5, abs=0.05)
    assert loss.boundary == 0.0


def test_supervised_hand_example():
    p = ParamVector([np.array([[2.0]])], [np.zeros(1)], use_bias=False)
    loss, grad = supervised_loss_and_grad(p, [1.0], [0.0])
    assert loss == 4.0
    assert grad.flat().tolist() == [4.0]


def test_supervised_zero_at_own_outputs():
    p = init_params(2, SIZES)
    x = np.linspace(-3, 3, 17)
    loss, grad = supervised_loss_and_grad(p, x, forward(p, x))
    assert loss == 0.0 and not grad.flat().any()


def test_structure_errors():
    p = init_params(0, SIZES)
    with pytest.raises(StructureError):
        supervised_loss_and_grad(p, [0.0, 1.0], [0.0])
    with pytest.raises(StructureError):
        total_loss_and_grad(p, catalog("eq18"), [])


@pytest.mark.parametrize("weights", [LossWeights(), LossWeights(0.0, 1.0), LossWeights(1.0, 0.0)])
def test_weight_validation_accepts(weights):
    assert weights.interior >= 0


@pytest.mark.parametrize("bad", [(0.0, 0.0), (-1.0, 1.0), (math.inf, 1.0)])
def test_weight_validation_rejects(bad):
    with pytest.raises(ValueError):
        LossWeights(*bad)


def fd_check(fun, params, n_entries=50, seed=0, h=1e-6, five_point=False):
    """Gradient entries vs central differences; the five-point stencil is for large losses."""
    loss, grad = fun(params)
    g = grad.flat()
    theta = params.flat()
    rng = np.random.default_rng(seed)
    f = lambda e: fun(params.with_flat(theta + e))[0]
    for idx in rng.choice(theta.size, n_entries, replace=False):
        e = np.zeros_like(theta)
        e[idx] = h
        if five_point:
            fd = (-f(2 * e) + 8 * f(e) - 8 * f(-e) + f(-2 * e)) / (12 * h)
        else:
            fd = (f(e) - f(-e)) / (2 * h)
        assert abs(fd - g[idx]) <= 1e-5 * max(abs(fd), abs(g[idx]), 1e-4), (idx, fd, g[idx])


@pytest.mark.parametrize("pid,k", [("eq17", None), ("eq18", None), ("eq21", 6), ("eq23", 2), ("eq20", None)])
@pytest.mark.parametrize("act", ["tanh", "swish"])
def test_total_gradient_matches_finite_differences(pid, k, act):
    problem = catalog(pid, k, well_posed=True)
    pts = sample_collocation(problem, 40, seed=1)
    params = init_params(4, SIZES, bias_std=0.3)
    weights = LossWeights(0.7, 1.9)
    # eq20's loss is O(1e3): at a 1e-6 step the plain quotient is mostly roundoff
    big = pid == "eq20"
    fd_check(
        lambda p: (total(p, problem, pts, weights, act), total_loss_and_grad(p, problem, pts, weights, act)[1]),
        params,
        h=1e-3 if big else 1e-6,
        five_point=big,
    )


@pytest.mark.parametrize("pid,k", [("eq20", None), ("eq21", 2)])
def test_each_loss_part_gradient(pid, k):
    problem = catalog(pid, k)
    pts = sample_collocation(problem, 30, seed=3)
    params = init_params(6, SIZES, bias_std=0.3)
    for weights in (LossWeights(1.0, 0.0), LossWeights(0.0, 1.0)):
        fd_check(
            lambda p: (total(p, problem, pts, weights), total_loss_and_grad(p, problem, pts, weights)[1]),
            params,
            30,
            h=1e-3 if pid == "eq20" else 1e-6,
            five_point=pid == "eq20",
        )


def test_supervised_gradient_matches_finite_differences():
    x = np.linspace(-math.pi, math.pi, 25)
    y = np.sin(3 * x)
    fd_check(lambda p: supervised_loss_and_grad(p, x, y, "swish"), init_params(8, SIZES, bias_std=0.2))


def test_breakdown_identity_and_weight_linearity():
    problem = catalog("eq21", 2)
    pts = sample_collocation(problem, 64)
    params = init_params(1, SIZES)
    one, g1 = total_loss_and_grad(params, problem, pts, LossWeights(1.0, 1.0))
    two, g2 = total_loss_and_grad(params, problem, pts, LossWeights(2.0, 1.0))
    only_bc, g_bc = total_loss_and_grad(params, problem, pts, LossWeights(0.0, 1.0))
    assert one.total == pytest.approx(one.interior + one.boundary, rel=1e-15)
    assert two.total - only_bc.total == pytest.approx(2 * one.interior, rel=1e-13)
    np.testing.assert_allclose(g2.flat() - g_bc.flat(), 2 * (g1.flat() - g_bc.flat()), rtol=1e-10, atol=1e-14)


def test_gradient_splits_over_points():
    problem = catalog("eq18")
    pts = sample_collocation(problem, 50, seed=9)
    params = init_params(2, SIZES)
    w = LossWeights(1.0, 0.0)
    _, g = total_loss_and_grad(params, problem, pts, w)
    _, ga = total_loss_and_grad(params, problem, pts[:20], LossWeights(20 / 50, 0.0))
    _, gb = total_loss_and_grad(params, problem, pts[20:], LossWeights(30 / 50, 0.0))
    np.testing.assert_allclose(g.flat(), ga.flat() + gb.flat(), rtol=1e-10, atol=1e-15)


@given(seed=st.integers(0, 2**32 - 1), pid=st.sampled_from(["eq17", "eq18", "eq19", "eq20"]))
def test_losses_non_negative_and_descent(seed, pid):
    problem = catalog(pid)
    pts = sample_collocation(problem, 32, seed=seed)
    params = init_params(seed, (1, 8, 1))
    loss, grad = total_loss_and_grad(params, problem, pts)
    assert loss.interior >= 0 and loss.boundary >= 0 and loss.total >= 0
    g = grad.flat()
    if np.linalg.norm(g) < 1e-12:
        return
    eps = 1e-8 / max(1.0, float(np.linalg.norm(g)))
    stepped = params.with_flat(params.flat() - eps * g)
    assert total(stepped, problem, pts) < loss.total
