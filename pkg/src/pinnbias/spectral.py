"""Fourier amplitudes of sampled solutions at integer frequencies."""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Sequence

import numpy as np

from .jetnet import forward
from .problems import closed_form_eval


class AliasingError(ValueError):
    pass


@dataclasses.dataclass
class Spectrum:
    freqs: list
    amplitudes: list
    n: int

    def __post_init__(self):
        if len(self.freqs) != len(self.amplitudes):
            raise ValueError("one amplitude per frequency")
        if any(b <= a for a, b in zip(self.freqs, self.freqs[1:])):
            raise ValueError("frequencies must be strictly increasing")

    def rows(self):
        return list(zip(self.freqs, self.amplitudes))


def periodic_grid(n: int, domain=(-math.pi, math.pi)) -> np.ndarray:
    lo, hi = domain
    return lo + np.arange(n) * ((hi - lo) / n)


def sample_uniform(evaluate: Callable, n: int = 256, domain=(-math.pi, math.pi)) -> np.ndarray:
    """Evaluate on the periodic grid ``lo + j (hi - lo) / n``, right end excluded."""
    if n < 2 or n & (n - 1):
        raise ValueError(f"grid size must be a power of two >= 2, got {n}")
    grid = periodic_grid(n, domain)
    return np.asarray(evaluate(grid), dtype=np.float64) * np.ones(n)


def dft_amplitudes(samples, freqs: Sequence[int], domain=(-math.pi, math.pi)) -> Spectrum:
    """Amplitude ``(2/N) |sum_j s_j exp(-i k x_j)|`` at each integer frequency ``k``.

    A pure tone ``A sin(kx)`` or ``A cos(kx)`` comes back as ``|A|``.  The
    domain length must be 2*pi so that integer ``k`` lands on DFT bins.
    """
    s = np.asarray(samples, dtype=np.float64)
    n = s.size
    freqs = sorted(int(k) for k in freqs)
    for k in freqs:
        if k < 1:
            raise ValueError(f"frequency must be positive, got {k}")
        if 2 * k >= n:
            raise AliasingError(f"frequency {k} is not below N/2 = {n / 2:g}")
    x = periodic_grid(n, domain)
    amps = [float(2.0 / n * abs(np.dot(s, np.exp(-1j * k * x)))) for k in freqs]
    return Spectrum(freqs, amps, n)


def spectrum_error(measured: Spectrum, exact: Spectrum) -> list[tuple[int, float]]:
    if list(measured.freqs) != list(exact.freqs):
        raise ValueError(f"frequency lists differ: {measured.freqs} vs {exact.freqs}")
    return [(k, abs(a - b)) for k, a, b in zip(measured.freqs, measured.amplitudes, exact.amplitudes)]


def closed_form_spectrum(problem, freqs, n: int = 256) -> Spectrum:
    return dft_amplitudes(sample_uniform(lambda x: closed_form_eval(problem, x), n, problem.domain), freqs, problem.domain)


def network_spectrum(params, problem, freqs, n: int = 256, activation="tanh") -> Spectrum:
    return dft_amplitudes(
        sample_uniform(lambda x: forward(params, x, activation), n, problem.domain), freqs, problem.domain
    )


def problem_frequencies(problem) -> list[int]:
    return sorted({t.frequency for t in problem.closed_form})
