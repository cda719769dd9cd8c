"""Residual losses for the PINN and supervised training modes.

Interior and boundary losses are mean squared residuals.  Gradients come from
a single jet forward/reverse pass per point set: the cotangent for a residual
``r`` of derivative order ``m`` is ``2 * lam * r / count`` on jet component
``m``.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .jetnet import Activation, ParamVector, StructureError, forward_jet, jet_and_backprop
from .problems import BoundaryConstraint, Problem, forcing_eval


@dataclasses.dataclass(frozen=True)
class LossWeights:
    interior: float = 1.0
    boundary: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.interior) and np.isfinite(self.boundary)):
            raise ValueError("loss weights must be finite")
        if self.interior < 0 or self.boundary < 0:
            raise ValueError("loss weights must be non-negative")
        if self.interior == 0 and self.boundary == 0:
            raise ValueError("at least one loss weight must be positive")


@dataclasses.dataclass
class LossBreakdown:
    interior: float
    boundary: float
    total: float
    boundary_residuals: list


def interior_residual(params: ParamVector, problem: Problem, x, activation="tanh"):
    jet = forward_jet(params, x, problem.order, activation)
    return jet.component(problem.order) - forcing_eval(problem, x)


def boundary_residual(params: ParamVector, constraint: BoundaryConstraint, activation="tanh") -> float:
    jet = forward_jet(params, constraint.location, constraint.order, activation)
    return float(jet.component(constraint.order) - constraint.target)


def _add(a: ParamVector, b: ParamVector) -> ParamVector:
    return ParamVector(
        [x + y for x, y in zip(a.weights, b.weights)],
        [x + y for x, y in zip(a.biases, b.biases)],
        a.use_bias,
    )


def interior_loss_and_grad(params, problem, collocation, weight=1.0, activation="tanh"):
    pts = np.asarray(collocation, dtype=np.float64)
    if pts.size == 0:
        raise StructureError("empty collocation set")
    m = problem.order
    rhs = forcing_eval(problem, pts)
    box = {}

    def cot(jet):
        r = jet[m] - rhs
        box["r"] = r
        g = np.zeros_like(jet)
        g[m] = 2.0 * weight * r / pts.size
        return g

    _, grad = jet_and_backprop(params, pts, cot, m, activation)
    return float(np.mean(box["r"] ** 2)), grad


def boundary_loss_and_grad(params, constraints, weight=1.0, activation="tanh"):
    if not constraints:
        return 0.0, [], params.zeros_like()
    pts = np.array([c.location for c in constraints], dtype=np.float64)
    orders = np.array([c.order for c in constraints])
    targets = np.array([c.target for c in constraints], dtype=np.float64)
    idx = np.arange(len(constraints))
    box = {}

    def cot(jet):
        r = jet[orders, idx] - targets
        box["r"] = r
        g = np.zeros_like(jet)
        g[orders, idx] = 2.0 * weight * r / len(constraints)
        return g

    _, grad = jet_and_backprop(params, pts, cot, int(orders.max()), activation)
    r = box["r"]
    return float(np.mean(r**2)), [float(v) for v in r], grad


def total_loss_and_grad(
    params: ParamVector,
    problem: Problem,
    collocation,
    weights: LossWeights = LossWeights(),
    activation="tanh",
) -> tuple[LossBreakdown, ParamVector]:
    interior, g_int = interior_loss_and_grad(params, problem, collocation, weights.interior, activation)
    boundary, residuals, g_bc = boundary_loss_and_grad(
        params, problem.constraints, weights.boundary, activation
    )
    total = weights.interior * interior + weights.boundary * boundary
    return LossBreakdown(interior, boundary, total, residuals), _add(g_int, g_bc)


def supervised_loss_and_grad(params: ParamVector, inputs, targets, activation="tanh"):
    """Mean squared error of the network value against ``targets``."""
    xs = np.asarray(inputs, dtype=np.float64).ravel()
    ys = np.asarray(targets, dtype=np.float64).ravel()
    if xs.shape != ys.shape:
        raise StructureError(f"{xs.size} inputs vs {ys.size} targets")
    if xs.size == 0:
        raise StructureError("empty training set")
    box = {}

    def cot(jet):
        r = jet[0] - ys
        box["r"] = r
        return (2.0 / xs.size) * r[None, :]

    _, grad = jet_and_backprop(params, xs, cot, 0, activation)
    return float(np.mean(box["r"] ** 2)), grad
