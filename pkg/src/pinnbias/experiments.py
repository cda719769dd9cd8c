"""Experiment orchestration: single training jobs and the table suites."""

from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .artifacts import (
    NO_CONVERGENCE,
    SOLUTION_COLUMNS,
    SPECTRUM_COLUMNS,
    SUMMARY_COLUMNS,
    TRACE_COLUMNS,
    RunManifest,
    now,
    spectrum_rows,
    trace_rows,
    write_csv,
)
from .jetnet import forward, save_params
from .plotting import plot_solution, plot_spectrum_history, plot_suite
from .problems import catalog, closed_form_eval, evaluation_grid
from .spectral import closed_form_spectrum, problem_frequencies
from .trainer import TrainConfig, train

log = logging.getLogger(__name__)

REDUCED_BUDGET = 50_000
FULL_BUDGET = 300_000
SUITE_IDS = ("table1", "table2", "table3", "table4", "table5")


@dataclasses.dataclass
class JobResult:
    params: object
    trace: object
    report: object
    manifest: RunManifest
    out_dir: Path


def run_job(
    problem_id: str,
    k,
    config: TrainConfig,
    out_dir,
    *,
    well_posed: bool = False,
    spectrum: bool = False,
    checkpoints: bool = False,
    plots: bool = True,
) -> JobResult:
    """Train one problem and write manifest, trace, solution and optional extras."""
    problem = catalog(problem_id, k, well_posed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = now()
    freqs = problem_frequencies(problem) if spectrum else None
    params, trace, report = train(
        problem,
        config,
        checkpoint_dir=out / "checkpoints" if checkpoints else None,
        spectrum_freqs=freqs,
    )
    artifacts = {
        "trace": write_csv(out / "trace.csv", TRACE_COLUMNS, trace_rows(trace)).name,
    }
    grid = evaluation_grid(problem, config.eval_points)
    u = forward(params, grid, config.activation)
    exact = closed_form_eval(problem, grid)
    artifacts["solution"] = write_csv(
        out / "solution.csv", SOLUTION_COLUMNS, zip(grid.tolist(), u.tolist(), exact.tolist())
    ).name
    save_params(params, out / "params.bin")
    artifacts["params"] = "params.bin"
    if spectrum:
        rows = list(spectrum_rows(trace, closed_form_spectrum(problem, freqs)))
        artifacts["spectrum"] = write_csv(out / "spectrum.csv", SPECTRUM_COLUMNS, rows).name
        if plots and rows:
            artifacts["spectrum_plot"] = plot_spectrum_history(rows, out / "spectrum.svg", problem.label).name
    if plots:
        title = f"{problem.label}, {report.summary()}"
        artifacts["solution_plot"] = plot_solution(grid, u, exact, out / "solution.svg", title).name
    if checkpoints:
        artifacts["checkpoints"] = "checkpoints/"
    manifest = RunManifest(
        problem=problem_id,
        k=problem.k,
        well_posed=problem.well_posed,
        config=config,
        version=__version__,
        started=started,
        finished=now(),
        report={
            "status": report.status,
            "iteration": report.iteration,
            "final_error": report.final_error,
            "best_error": report.best_error,
            "best_iteration": report.best_iteration,
        },
        artifacts=artifacts,
    )
    manifest.write(out / "manifest.ini")
    return JobResult(params, trace, report, manifest, out)


# ------------------------------------------------------------------ suites


@dataclasses.dataclass(frozen=True)
class SuiteRow:
    problem: str
    k: int | None = None
    activation: str = "tanh"
    mode: str = "pinn"
    overrides: tuple = ()

    @property
    def name(self) -> str:
        k = "" if self.k is None else f"_k{self.k}"
        return f"{self.problem}{k}_{self.activation}_{self.mode}"


@dataclasses.dataclass
class SuiteSpec:
    suite_id: str
    rows: list
    output_dir: Path = Path("runs")
    base_config: TrainConfig = dataclasses.field(default_factory=lambda: TrainConfig(max_iterations=REDUCED_BUDGET))
    well_posed: bool = False

    def __post_init__(self):
        for row in self.rows:
            catalog(row.problem, row.k)  # raises on unknown rows


def _single(problems, ks=(2, 6, 10), **kw):
    return [SuiteRow(p, k, **kw) for k in ks for p in problems]


def build_suite(suite_id: str, output_dir="runs", *, full: bool = False, base: TrainConfig = None) -> SuiteSpec:
    """Rows of one of the five convergence-table suites.

    Without ``full`` every row gets the reduced budget, so slow rows that
    need a few hundred thousand iterations report no convergence.
    """
    budget = FULL_BUDGET if full else REDUCED_BUDGET
    base = (base or TrainConfig()).replace(max_iterations=budget)
    if suite_id == "table1":
        rows = [SuiteRow(f"eq{n}", None, act) for act in ("tanh", "swish") for n in range(17, 21)]
    elif suite_id == "table2":
        rows = _single(("eq22", "eq21", "eq23"))
    elif suite_id == "table3":
        rows = _single(("eq22", "eq25"))
    elif suite_id == "table4":
        rows = _single(("eq25", "eq21", "eq23"))
    elif suite_id == "table5":
        rows = [SuiteRow("eq22", k, mode=m) for k in (2, 6, 10) for m in ("pinn", "supervised")]
    else:
        raise KeyError(f"unknown suite {suite_id!r}; choose from {', '.join(SUITE_IDS)}")
    return SuiteSpec(suite_id, rows, Path(output_dir) / suite_id, base)


def _row_config(spec: SuiteSpec, row: SuiteRow) -> TrainConfig:
    return spec.base_config.replace(activation=row.activation, mode=row.mode, **dict(row.overrides))


def _run_row(args) -> dict:
    spec, row = args
    problem = None
    summary = {
        "problem": row.problem,
        "k": "" if row.k is None else row.k,
        "order": "",
        "activation": row.activation,
        "mode": row.mode,
    }
    try:
        problem = catalog(row.problem, row.k, spec.well_posed)
        summary["order"] = problem.order
        result = run_job(
            row.problem,
            row.k,
            _row_config(spec, row),
            spec.output_dir / row.name,
            well_posed=spec.well_posed,
            spectrum=True,
        )
        rep = result.report
        summary["status"] = rep.status
        summary["iterations_to_convergence"] = rep.iteration if rep.converged else NO_CONVERGENCE
        summary["final_error"] = float(rep.final_error)
    except Exception as exc:  # recorded in-table, the suite carries on
        log.exception("suite row %s failed", row.name)
        summary["status"] = f"error: {exc}"
        summary["iterations_to_convergence"] = NO_CONVERGENCE
        summary["final_error"] = ""
    return summary


def run_suite(spec: SuiteSpec, workers: int = 1, plots: bool = True) -> list[dict]:
    """Run every row and write ``summary.csv``, ``report.txt`` and a bar chart.

    Rows keep spec order whatever the worker count.
    """
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(spec, row) for row in spec.rows]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_row, jobs))
    else:
        results = [_run_row(j) for j in jobs]
    write_csv(out / "summary.csv", SUMMARY_COLUMNS, ([r[c] for c in SUMMARY_COLUMNS] for r in results))
    _write_report(spec, results, out / "report.txt")
    if plots and results:
        plot_suite(results, out / "summary.svg", spec.base_config.max_iterations, spec.suite_id)
    return results


def _write_report(spec: SuiteSpec, results, path):
    lines = [
        "[suite]",
        f"id = {spec.suite_id}",
        f"rows = {len(results)}",
        f"budget = {spec.base_config.max_iterations}",
        f"tol = {spec.base_config.tol!r}",
        f"seed = {spec.base_config.seed}",
        f"version = {__version__}",
        "",
    ]
    for n, r in enumerate(results, 1):
        lines.append(f"[row{n}]")
        lines.extend(f"{c} = {r[c]}" for c in SUMMARY_COLUMNS)
        lines.append("")
    Path(path).write_text("\n".join(lines))


def iterations_or_none(summary: dict):
    it = summary["iterations_to_convergence"]
    return int(it) if str(it).isdigit() else None
