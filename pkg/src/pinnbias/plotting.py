"""Static figures for runs, spectra, NTK mode traces and suite summaries.

Everything is written through the Agg backend to files; the format follows
the output suffix (``.svg`` by default).  Path simplification is switched
off so that each plotted curve keeps every evaluation-grid vertex.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "path.simplify": False,
    "svg.fonttype": "none",
    "svg.hashsalt": "pinnbias",
    "font.size": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "xtick.direction": "in",
    "ytick.direction": "in",
    "axes.linewidth": 0.8,
    "lines.linewidth": 1.2,
    "figure.figsize": (6.0, 3.7),
}

NET_COLOR = "tab:red"
EXACT_COLOR = "tab:blue"


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata={"Date": None} if path.suffix == ".svg" else None)
    plt.close(fig)
    return path


def plot_solution(x, u_net, closed_form, path, title: str = "") -> Path:
    """Network output (red) against the closed form (blue) on the evaluation grid."""
    x = np.asarray(x)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(x, closed_form, color=EXACT_COLOR, label="closed form", gid="closed_form")
        ax.plot(x, u_net, color=NET_COLOR, label="network", gid="network")
        ax.set_xlabel("x")
        ax.set_ylabel("f(x)")
        ax.set_xlim(x[0], x[-1])
        if title:
            ax.set_title(title)
        ax.legend(loc="best", frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def plot_spectrum_history(rows, path, title: str = "") -> Path:
    """Measured amplitude per frequency at each checkpoint, exact levels dashed.

    ``rows`` are spectrum-CSV style tuples
    ``(iteration, frequency, measured, exact, abs_error)``.
    """
    rows = list(rows)
    freqs = sorted({int(r[1]) for r in rows})
    iters = sorted({int(r[0]) for r in rows})
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        cmap = plt.get_cmap("viridis", max(len(iters), 2))
        for n, it in enumerate(iters):
            amps = {int(r[1]): float(r[2]) for r in rows if int(r[0]) == it}
            ax.plot(freqs, [amps[k] for k in freqs], marker="o", ms=3, color=cmap(n), label=f"{it // 1000}K")
        exact = {int(r[1]): float(r[3]) for r in rows}
        ax.plot(freqs, [exact[k] for k in freqs], "k--", marker="s", ms=3, label="exact")
        ax.set_xlabel("frequency k")
        ax.set_ylabel("amplitude")
        ax.set_xticks(freqs)
        if title:
            ax.set_title(title)
        if len(iters) <= 12:
            ax.legend(frameon=False, ncol=2)
        fig.tight_layout()
        return _save(fig, path)


def plot_mode_traces(traces, path, top: int = 6) -> Path:
    """Predicted (dashed) vs measured (solid) projected error for the leading modes."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for tr in traces[:top]:
            line = ax.semilogy(tr.iterations, np.maximum(tr.actual, 1e-16), label=f"mode {tr.index + 1}")[0]
            ax.semilogy(tr.iterations, np.maximum(tr.predicted, 1e-16), "--", color=line.get_color())
        ax.set_xlabel("iteration")
        ax.set_ylabel("|q_i^T (f - Y)|")
        ax.legend(frameon=False, ncol=2)
        fig.tight_layout()
        return _save(fig, path)


def plot_suite(rows, path, budget: int, title: str = "") -> Path:
    """Iterations to convergence per suite row; non-converged rows drawn at the budget, hatched."""
    labels, heights, hatched = [], [], []
    for r in rows:
        k = f" k={r['k']}" if r["k"] not in ("", None) else ""
        labels.append(f"{r['problem']}{k}\n{r['activation']}/{r['mode']}")
        it = r["iterations_to_convergence"]
        ok = str(it).isdigit()
        heights.append(int(it) if ok else budget)
        hatched.append(not ok)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(6.0, 0.8 * len(labels)), 3.7))
        bars = ax.bar(range(len(labels)), heights, color=EXACT_COLOR)
        for bar, h in zip(bars, hatched):
            if h:
                bar.set_hatch("//")
                bar.set_facecolor("white")
                bar.set_edgecolor(NET_COLOR)
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels, fontsize=7)
        ax.set_yscale("log")
        ax.set_ylabel("iterations to convergence")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        return _save(fig, path)
