"""Empirical neural tangent kernel and linearised per-mode error dynamics.

Under gradient flow on the mean squared error ``(1/N) sum (f - y)^2`` the
outputs on the training points evolve as ``df/dt = -(2/N) K (f - Y)``.  In
the eigenbasis of ``K`` each projected error component decays on its own
exponential clock, so large-eigenvalue modes are fitted first.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Optional

import numpy as np
from scipy import stats

from .jetnet import ParamVector, backprop_jet, forward, init_params
from .problems import Problem, catalog, closed_form_eval
from .spectral import periodic_grid
from .trainer import TrainConfig, train

# Only the opening stretch of each mode's decay is fitted; later on the
# kernel has drifted from its value at initialisation.
DECAY_FLOOR = 0.3


@dataclasses.dataclass
class NtkResult:
    points: np.ndarray
    kernel: np.ndarray
    eigenvalues: Optional[np.ndarray] = None
    eigenvectors: Optional[np.ndarray] = None
    # (iteration, ||K_t - K_0||_F / ||K_0||_F, largest eigenvalue of K_t)
    drift: Optional[list] = None

    @property
    def n(self) -> int:
        return self.points.size


def parameter_jacobian(params: ParamVector, points, activation="tanh") -> np.ndarray:
    """Rows ``d f(x_i) / d theta``, one reverse pass per point."""
    pts = np.asarray(points, dtype=np.float64).ravel()
    return np.stack([backprop_jet(params, x, (1.0, 0.0, 0.0, 0.0), activation).flat() for x in pts])


def empirical_ntk(params: ParamVector, points, activation="tanh") -> NtkResult:
    pts = np.asarray(points, dtype=np.float64).ravel()
    if pts.size == 0:
        raise ValueError("need at least one point")
    jac = parameter_jacobian(params, pts, activation)
    n = pts.size
    kernel = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            kernel[i, j] = kernel[j, i] = float(np.dot(jac[i], jac[j]))
    return NtkResult(pts, kernel)


def eigendecompose(result: NtkResult, sym_tol: float = 1e-12) -> NtkResult:
    """Fill eigenvalues (descending) and orthonormal eigenvector columns."""
    k = np.asarray(result.kernel, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValueError(f"square kernel required, got shape {k.shape}")
    asym = float(np.max(np.abs(k - k.T))) if k.size else 0.0
    if asym > sym_tol * max(1.0, float(np.max(np.abs(k)))):
        raise ValueError(f"kernel is not symmetric (max asymmetry {asym:.3e})")
    lam, q = np.linalg.eigh(k)
    order = np.argsort(lam)[::-1]
    return dataclasses.replace(result, eigenvalues=lam[order], eigenvectors=q[:, order])


def predicted_mode_error(result: NtkResult, targets, t: float) -> np.ndarray:
    """``exp(-lambda_i t) |q_i^T Y|`` with negative eigenvalues clamped to zero."""
    y = np.asarray(targets, dtype=np.float64)
    lam = np.maximum(result.eigenvalues, 0.0)
    return np.exp(-lam * t) * np.abs(result.eigenvectors.T @ y)


def actual_mode_error(result: NtkResult, outputs, targets) -> np.ndarray:
    out = np.asarray(outputs, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if out.shape != y.shape or out.size != result.n:
        raise ValueError(f"expected {result.n} outputs and targets, got {out.size} and {y.size}")
    return np.abs(result.eigenvectors.T @ (out - y))


@dataclasses.dataclass
class ModeTrace:
    index: int
    eigenvalue: float
    iterations: list
    times: list
    predicted: list
    actual: list

    def decay_rate(self, floor: float = DECAY_FLOOR) -> float:
        """Least-squares slope of ``-log(actual)`` against time.

        Points after the series first drops below ``floor`` times its
        starting value are ignored, as is everything once it hits zero.
        """
        a = np.asarray(self.actual, dtype=np.float64)
        t = np.asarray(self.times, dtype=np.float64)
        if a.size < 2 or a[0] <= 0:
            return 0.0
        keep = np.cumprod(a > floor * a[0]).astype(bool)
        if keep.sum() < 2:
            keep[:2] = True
            if a[1] <= 0:
                return math.inf
        slope = np.polyfit(t[keep], np.log(a[keep]), 1)[0]
        return float(-slope)


def sum_of_sines_benchmark(n_points: int = 32):
    """Default supervised NTK benchmark: 32 periodic-grid points, sum of five sines."""
    problem = catalog("eq17")
    pts = periodic_grid(n_points, problem.domain)
    return problem, pts


def benchmark_config(seed: int = 0, lr: float = None, iterations: int = None, checkpoint_interval: int = None) -> TrainConfig:
    """Training settings for the default benchmark: plain gradient descent at a constant rate.

    LeCun-scaled weights with unit-variance biases give a kernel whose
    leading eigenvalues span a few decades rather than a dozen, so each of
    the top modes visibly moves within the run.
    """
    iterations = iterations or 50_000
    return TrainConfig(
        seed=seed,
        mode="supervised",
        layer_sizes=(1, 32, 32, 1),
        init_scheme="lecun",
        init_bias_std=1.0,
        optimizer="gd",
        lr0=0.02 if lr is None else lr,
        lr_decay=1.0,
        max_iterations=iterations,
        checkpoint_interval=checkpoint_interval or max(1, iterations // 100),
    )


def ntk_time(config: TrainConfig, iteration: int, n_points: int) -> float:
    """Continuous NTK time reached after ``iteration`` steps.

    Gradient descent on the mean squared error moves outputs by
    ``-(2 lr / N) K (f - Y)`` per step, so ``t = 2 lr iteration / N``.
    """
    return 2.0 * config.lr0 * iteration / n_points


def mode_trace(
    problem: Problem,
    config: TrainConfig,
    points,
    targets=None,
    params: ParamVector = None,
    modes: int = None,
    drift: bool = False,
) -> tuple[NtkResult, list[ModeTrace]]:
    """Train in supervised mode on ``points`` and compare per-mode error decay.

    The kernel is taken at initialisation.  Returns the decomposed kernel and
    one :class:`ModeTrace` per eigenmode (all modes unless ``modes`` is set).
    With ``drift`` the kernel is recomputed at every checkpoint and its
    movement away from the initial kernel is stored in ``result.drift``.
    """
    if config.mode != "supervised":
        raise ValueError("mode tracing is defined for supervised (MSE) training only")
    pts = np.asarray(points, dtype=np.float64).ravel()
    y = closed_form_eval(problem, pts) if targets is None else np.asarray(targets, dtype=np.float64)
    if params is None:
        params = init_params(
            config.seed, config.layer_sizes, config.init_scheme, bias_std=config.init_bias_std
        )
    result = eigendecompose(empirical_ntk(params, pts, config.activation))
    n_modes = result.n if modes is None else min(modes, result.n)
    iters, actual = [], []
    k0_norm = np.linalg.norm(result.kernel)
    if drift:
        result.drift = []

    def record(it, p):
        iters.append(it)
        actual.append(actual_mode_error(result, forward(p, pts, config.activation), y)[:n_modes])
        if drift:
            kt = empirical_ntk(p, pts, config.activation).kernel
            change = np.linalg.norm(kt - result.kernel) / k0_norm if k0_norm > 0 else 0.0
            result.drift.append((it, float(change), float(np.linalg.eigvalsh(kt)[-1])))

    def fit_error(p):
        diff = forward(p, pts, config.activation) - y
        return float(np.max(np.abs(diff)) / np.max(np.abs(y))), float(np.linalg.norm(diff) / np.linalg.norm(y))

    train(problem, config, params=params, data=(pts, y), callback=record, error_fn=fit_error, stop_early=False)
    times = [ntk_time(config, it, result.n) for it in iters]
    predicted = [predicted_mode_error(result, y, t)[:n_modes] for t in times]
    traces = [
        ModeTrace(
            i,
            float(result.eigenvalues[i]),
            list(iters),
            times,
            [float(p[i]) for p in predicted],
            [float(a[i]) for a in actual],
        )
        for i in range(n_modes)
    ]
    return result, traces


def rank_correlation(traces: list, top: int = 10, floor: float = DECAY_FLOOR) -> float:
    """Spearman correlation of eigenvalue against fitted decay rate over the top modes."""
    sel = traces[:top]
    lam = [t.eigenvalue for t in sel]
    rates = [t.decay_rate(floor) for t in sel]
    return float(stats.spearmanr(lam, rates).correlation)
