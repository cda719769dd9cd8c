"""Benchmark ODE problems built from sinusoids on [-pi, pi].

Every problem is ``d^m u / dx^m = forcing(x)`` with a closed-form solution
made of sine/cosine terms, plus point constraints ``u^(j)(x0) = target``.
Order-0 problems are plain function fitting written as a residual
``u(x) - g(x)``.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Sequence

import numpy as np

DOMAIN = (-math.pi, math.pi)
SINGLE_FREQUENCIES = (2, 6, 10)
PROBLEM_IDS = tuple(f"eq{n}" for n in range(17, 26))


class CatalogError(KeyError):
    pass


@dataclasses.dataclass(frozen=True)
class SinusoidTerm:
    """``amplitude * sin(frequency x)`` or ``amplitude * cos(frequency x)``."""

    amplitude: float
    frequency: int
    phase: str = "sin"

    def __post_init__(self):
        if self.phase not in ("sin", "cos"):
            raise ValueError(f"phase must be 'sin' or 'cos', got {self.phase!r}")
        if self.frequency < 1:
            raise ValueError("frequency must be >= 1")
        if not math.isfinite(self.amplitude):
            raise ValueError("amplitude must be finite")

    def derivative(self, n: int = 1) -> "SinusoidTerm":
        # d/dx sin = cos, d/dx cos = -sin; the phase cycles with period 4
        amp, phase = self.amplitude, self.phase
        for _ in range(n):
            amp *= self.frequency
            if phase == "sin":
                phase = "cos"
            else:
                phase = "sin"
                amp = -amp
        return SinusoidTerm(amp, self.frequency, phase)

    def __call__(self, x):
        fn = np.sin if self.phase == "sin" else np.cos
        return self.amplitude * fn(self.frequency * np.asarray(x, dtype=np.float64))


@dataclasses.dataclass(frozen=True)
class BoundaryConstraint:
    location: float
    order: int = 0
    target: float = 0.0


@dataclasses.dataclass(frozen=True)
class Problem:
    id: str
    k: int | None
    order: int
    forcing: tuple
    closed_form: tuple
    constraints: tuple
    domain: tuple = DOMAIN
    well_posed: bool = False

    @property
    def label(self) -> str:
        return self.id if self.k is None else f"{self.id}(k={self.k})"

    def amplitude(self) -> float:
        return max(abs(t.amplitude) for t in self.closed_form)


def _sum_terms(terms: Sequence[SinusoidTerm], x):
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    for term in terms:
        out = out + term(x)
    return out


def closed_form_eval(problem: Problem, x, deriv: int = 0):
    """``deriv``-th derivative of the closed-form solution at ``x``."""
    if not 0 <= deriv <= 3:
        raise ValueError("deriv must be in 0..3")
    return _sum_terms([t.derivative(deriv) for t in problem.closed_form], x)


def forcing_eval(problem: Problem, x):
    return _sum_terms(problem.forcing, x)


def _combined(order: int) -> tuple:
    """Closed form sum_{j=1..5} sin(2jx)/(2j) and its ``order``-th derivative."""
    base = tuple(SinusoidTerm(1.0 / (2 * j), 2 * j, "sin") for j in range(1, 6))
    return base, tuple(t.derivative(order) for t in base)


def catalog(problem_id: str, k: int | None = None, well_posed: bool = False) -> Problem:
    """Look up a benchmark problem.

    ``k`` selects the frequency for the single-sinusoid problems (eq21-eq25)
    and is ignored for the combined ones (eq17-eq20).  ``well_posed`` adds
    ``u(0) = 0`` to the third-order problems, which otherwise only pin the
    solution up to ``c (x^2 - pi^2)``.
    """
    if problem_id not in PROBLEM_IDS:
        raise CatalogError(f"unknown problem {problem_id!r}; choose from {', '.join(PROBLEM_IDS)}")
    num = int(problem_id[2:])
    if num <= 20:
        order = num - 17
        closed, forcing = _combined(order)
        k = None
    else:
        if k not in SINGLE_FREQUENCIES:
            raise CatalogError(f"{problem_id} needs k in {SINGLE_FREQUENCIES}, got {k!r}")
        coeff = {21: 1.0 / k**2, 22: 1.0 / k**2, 23: 1.0 / k**3, 24: 1.0 / k**3, 25: 1.0}[num]
        order = {21: 2, 22: 0, 23: 3, 24: 0, 25: 0}[num]
        closed = (SinusoidTerm(-coeff, k, "sin"),)
        if num == 21:
            forcing = (SinusoidTerm(1.0, k, "sin"),)
        elif num == 23:
            forcing = (SinusoidTerm(1.0, k, "cos"),)
        else:
            forcing = closed
    lo, hi = DOMAIN
    constraints = [BoundaryConstraint(lo), BoundaryConstraint(hi)]
    well_posed = bool(well_posed and order == 3)
    if well_posed:
        constraints.append(BoundaryConstraint(0.0))
    return Problem(problem_id, k, order, forcing, closed, tuple(constraints), DOMAIN, well_posed)


def all_problems(well_posed: bool = False) -> list[Problem]:
    out = []
    for pid in PROBLEM_IDS:
        if int(pid[2:]) <= 20:
            out.append(catalog(pid, well_posed=well_posed))
        else:
            out.extend(catalog(pid, k, well_posed) for k in SINGLE_FREQUENCIES)
    return out


def sample_collocation(problem: Problem, n: int, strategy: str = "stratified", seed: int = 0) -> np.ndarray:
    """``n`` points in the open interior of the domain, sorted for stratified."""
    if n < 1:
        raise ValueError("need at least one collocation point")
    lo, hi = problem.domain
    rng = np.random.default_rng(np.uint64(seed % 2**64))
    u = rng.random(n)
    u[u == 0.0] = 0.5  # keep the open interval
    if strategy == "stratified":
        width = (hi - lo) / n
        pts = lo + (np.arange(n) + u) * width
    elif strategy == "uniform-random":
        pts = lo + u * (hi - lo)
    else:
        raise ValueError(f"unknown sampling strategy {strategy!r}")
    return np.clip(pts, np.nextafter(lo, hi), np.nextafter(hi, lo))


def evaluation_grid(problem: Problem, n: int = 1001) -> np.ndarray:
    lo, hi = problem.domain
    return np.linspace(lo, hi, n)
