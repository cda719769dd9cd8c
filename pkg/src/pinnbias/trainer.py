"""Adam training loops with checkpointed error tracking and early stopping."""

from __future__ import annotations

import dataclasses
import logging
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .jetnet import DEFAULT_LAYERS, Activation, ParamVector, forward, init_params, save_params
from .losses import LossBreakdown, LossWeights, supervised_loss_and_grad, total_loss_and_grad
from .problems import Problem, closed_form_eval, evaluation_grid, sample_collocation
from .spectral import network_spectrum

log = logging.getLogger(__name__)


class NumericError(FloatingPointError):
    pass


class DegenerateProblemError(ValueError):
    pass


@dataclasses.dataclass
class TrainConfig:
    seed: int = 0
    mode: str = "pinn"
    activation: str = "tanh"
    layer_sizes: tuple = DEFAULT_LAYERS
    init_scheme: str = "glorot"
    init_bias_std: float = 0.0
    optimizer: str = "adam"
    max_iterations: int = 300_000
    checkpoint_interval: int = 1000
    lr0: float = 0.005
    lr_decay: float = 0.95
    lr_decay_period: int = 2000
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    collocation: int = 1024
    sampling: str = "stratified"
    resample: bool = False
    tol: float = 0.05
    divergence_factor: float = 10.0
    eval_points: int = 1001
    supervised_samples: int = 200
    lambda_interior: float = 1.0
    lambda_boundary: float = 1.0

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        self.validate()

    def validate(self):
        if self.mode not in ("pinn", "supervised"):
            raise ValueError(f"mode must be 'pinn' or 'supervised', got {self.mode!r}")
        if self.optimizer not in ("adam", "gd"):
            raise ValueError(f"optimizer must be 'adam' or 'gd', got {self.optimizer!r}")
        Activation(self.activation)
        if not self.max_iterations >= self.checkpoint_interval >= 1:
            raise ValueError("need max_iterations >= checkpoint_interval >= 1")
        if not self.lr0 > 0:
            raise ValueError("lr0 must be positive")
        if not 0 < self.lr_decay <= 1:
            raise ValueError("lr_decay must lie in (0, 1]")
        if self.lr_decay_period < 1:
            raise ValueError("lr_decay_period must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    @property
    def weights(self) -> LossWeights:
        return LossWeights(self.lambda_interior, self.lambda_boundary)


@dataclasses.dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def fresh(cls, params: ParamVector) -> "AdamState":
        return cls(np.zeros(params.size), np.zeros(params.size), 0)


@dataclasses.dataclass
class CheckpointRecord:
    iteration: int
    lr: float
    loss: LossBreakdown
    rel_linf: float
    rel_l2: float
    spectrum: object = None


@dataclasses.dataclass
class TrainingTrace:
    records: list = dataclasses.field(default_factory=list)
    initial_loss: Optional[LossBreakdown] = None

    def errors(self) -> list[float]:
        return [r.rel_linf for r in self.records]

    def iterations(self) -> list[int]:
        return [r.iteration for r in self.records]


@dataclasses.dataclass
class ConvergenceReport:
    status: str  # converged | diverged | budget_exhausted
    iteration: Optional[int]
    final_error: float
    best_error: float
    best_iteration: int

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def summary(self) -> str:
        if self.status == "budget_exhausted":
            return self.status
        return f"{self.status}@{self.iteration}"


def lr_at(config: TrainConfig, iteration: int) -> float:
    return config.lr0 * config.lr_decay ** (iteration / config.lr_decay_period)


def adam_step(params: ParamVector, state: AdamState, grad: ParamVector, lr: float, config: TrainConfig = None):
    config = config or TrainConfig()
    theta, st = adam_update(params.flat(), state, grad.flat(), lr, config.beta1, config.beta2, config.eps)
    return params.with_flat(theta), st


def adam_update(theta, state: AdamState, g, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Flat-vector Adam step with bias correction; returns new vector and state."""
    bad = np.flatnonzero(~np.isfinite(g))
    if bad.size:
        raise NumericError(f"non-finite gradient entry at flat index {int(bad[0])} ({g[bad[0]]})")
    t = state.step + 1
    m = beta1 * state.m + (1.0 - beta1) * g
    v = beta2 * state.v + (1.0 - beta2) * g * g
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    return theta - lr * m_hat / (np.sqrt(v_hat) + eps), AdamState(m, v, t)


def solution_errors(params: ParamVector, problem: Problem, config: TrainConfig) -> tuple[float, float]:
    """Relative L-inf and L2 errors against the closed form on the evaluation grid."""
    grid = evaluation_grid(problem, config.eval_points)
    exact = closed_form_eval(problem, grid)
    scale = np.max(np.abs(exact))
    if scale == 0.0:
        raise DegenerateProblemError(f"{problem.label}: closed form is identically zero")
    diff = forward(params, grid, config.activation) - exact
    return float(np.max(np.abs(diff)) / scale), float(np.linalg.norm(diff) / np.linalg.norm(exact))


def assess(trace: TrainingTrace, config: TrainConfig) -> ConvergenceReport:
    if not trace.records:
        raise ValueError("empty trace")
    errors = trace.errors()
    iters = trace.iterations()
    first = errors[0]
    best, best_it = np.inf, iters[0]
    for it, err in zip(iters, errors):
        if err <= config.tol:
            return ConvergenceReport("converged", it, err, min(best, err), it if err < best else best_it)
        if err > config.divergence_factor * best and err > first:
            return ConvergenceReport("diverged", it, err, best, best_it)
        if err < best:
            best, best_it = err, it
    return ConvergenceReport("budget_exhausted", None, errors[-1], best, best_it)


def supervised_data(problem: Problem, config: TrainConfig):
    lo, hi = problem.domain
    xs = np.linspace(lo, hi, config.supervised_samples)
    return xs, closed_form_eval(problem, xs)


def _collocation_seed(seed: int, iteration: int = 0) -> int:
    return int(np.random.SeedSequence([seed, 1, iteration]).generate_state(1)[0])


def train(
    problem: Problem,
    config: TrainConfig,
    *,
    params: ParamVector = None,
    data=None,
    checkpoint_dir=None,
    callback: Callable = None,
    error_fn: Callable = None,
    stop_early: bool = True,
    spectrum_freqs=None,
    spectrum_grid: int = 256,
):
    """Run one training job.

    ``data`` overrides the supervised training set as ``(inputs, targets)``.
    ``callback(iteration, params)`` fires at iteration 0 and at every
    checkpoint.  ``error_fn(params)`` replaces the closed-form error metric
    and must return ``(rel_linf, rel_l2)``.
    Returns ``(params, trace, report)``.
    """
    config.validate()
    if params is None:
        params = init_params(
            config.seed, config.layer_sizes, config.init_scheme, bias_std=config.init_bias_std
        )
    act = Activation(config.activation)
    error_fn = error_fn or (lambda p: solution_errors(p, problem, config))
    if config.mode == "supervised":
        xs, ys = data if data is not None else supervised_data(problem, config)

        def loss_and_grad(p, it):
            loss, grad = supervised_loss_and_grad(p, xs, ys, act)
            return LossBreakdown(loss, 0.0, loss, []), grad

    else:
        colloc = sample_collocation(problem, config.collocation, config.sampling, _collocation_seed(config.seed))
        weights = config.weights

        def loss_and_grad(p, it):
            pts = colloc
            if config.resample and it > 0:
                pts = sample_collocation(
                    problem, config.collocation, config.sampling, _collocation_seed(config.seed, it)
                )
            return total_loss_and_grad(p, problem, pts, weights, act)

    if checkpoint_dir is not None:
        checkpoint_dir = Path(checkpoint_dir)
        checkpoint_dir.mkdir(parents=True, exist_ok=True)

    trace = TrainingTrace()
    state = AdamState.fresh(params)
    theta = params.flat()
    if callback is not None:
        callback(0, params)
    report = None
    for it in range(config.max_iterations):
        loss, grad = loss_and_grad(params, it)
        if it == 0:
            trace.initial_loss = loss
        lr = lr_at(config, it)
        g = grad.flat()
        try:
            if config.optimizer == "adam":
                theta, state = adam_update(theta, state, g, lr, config.beta1, config.beta2, config.eps)
            else:
                bad = np.flatnonzero(~np.isfinite(g))
                if bad.size:
                    raise NumericError(f"non-finite gradient entry at flat index {int(bad[0])}")
                theta = theta - lr * g
                state = AdamState(state.m, state.v, state.step + 1)
        except NumericError as exc:
            raise NumericError(f"iteration {it + 1}: {exc}") from exc
        params = params.with_flat(theta)
        done = it + 1
        if done % config.checkpoint_interval:
            continue
        rel_linf, rel_l2 = error_fn(params)
        # loss at the checkpointed parameters
        rec_loss, _ = loss_and_grad(params, it)
        spec = None
        if spectrum_freqs:
            spec = network_spectrum(params, problem, spectrum_freqs, spectrum_grid, act)
        trace.records.append(CheckpointRecord(done, lr_at(config, done), rec_loss, rel_linf, rel_l2, spec))
        log.debug("%s it=%d loss=%.3e err=%.4f", problem.label, done, rec_loss.total, rel_linf)
        if checkpoint_dir is not None:
            save_params(params, checkpoint_dir / f"params_{done:07d}.bin")
        if callback is not None:
            callback(done, params)
        report = assess(trace, config)
        if stop_early and report.status != "budget_exhausted":
            break
    if report is None:
        raise ValueError("no checkpoint reached; max_iterations < checkpoint_interval")
    return params, trace, report
