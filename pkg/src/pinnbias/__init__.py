"""Physics-informed networks on sinusoidal ODE benchmarks, with spectral-bias diagnostics."""

__version__ = "0.1.0"
