"""Command-line entry point: ``pinnbias {train,suite,spectrum,ntk,plot,compare}``.

Exit codes: 0 converged / success, 2 no convergence, 1 runtime error,
64 usage error, 65 bad data (e.g. aliased frequency), 66 unreadable input.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import os
import re
import sys
from pathlib import Path

import numpy as np

from .artifacts import (
    DRIFT_COLUMNS,
    EIGENVALUE_COLUMNS,
    MODE_TRACE_COLUMNS,
    SPECTRUM_COLUMNS,
    SUMMARY_COLUMNS,
    NO_CONVERGENCE,
    RunManifest,
    config_from_strings,
    read_config_file,
    read_csv,
    write_csv,
)
from .experiments import FULL_BUDGET, REDUCED_BUDGET, SUITE_IDS, build_suite, run_job, run_suite
from .jetnet import CheckpointError, ParamVector, forward, load_params
from .ntk import ModeTrace, benchmark_config, mode_trace, rank_correlation, sum_of_sines_benchmark
from .plotting import plot_mode_traces, plot_solution
from .problems import CatalogError, catalog, closed_form_eval, evaluation_grid
from .spectral import AliasingError, closed_form_spectrum, network_spectrum, spectrum_error
from .trainer import TrainConfig

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2
EXIT_USAGE = 64
EXIT_DATAERR = 65
EXIT_NOINPUT = 66

OUTPUT_ENV = "PINNBIAS_OUTPUT_DIR"

log = logging.getLogger("pinnbias")


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


def _config_keys(path) -> set:
    parser = configparser.ConfigParser()
    parser.read(path)
    return set(parser["train"]) if parser.has_section("train") else set()


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _default_out() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "runs"))


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _add_problem_args(p, required=False):
    p.add_argument("--problem", required=required, help="catalog id, eq17 .. eq25")
    p.add_argument("--k", type=int, default=None, help="frequency for eq21-eq25 (2, 6 or 10)")
    p.add_argument("--well-posed", action="store_true", help="add u(0)=0 to the third-order problems")


def _add_train_args(p):
    p.add_argument("--seed", type=int)
    p.add_argument("--budget", type=int, help=f"max iterations (default {REDUCED_BUDGET})")
    p.add_argument("--full", action="store_true", help=f"use the long budget ({FULL_BUDGET})")
    p.add_argument("--tol", type=float, help="relative L-inf convergence tolerance")
    p.add_argument("--activation", choices=("tanh", "swish"))
    p.add_argument("--mode", choices=("pinn", "supervised"))
    p.add_argument("--lr", type=float, help="initial learning rate")
    p.add_argument("--checkpoint-interval", type=int)
    p.add_argument("--collocation", type=int, help="number of interior collocation points")
    p.add_argument("--resample", action="store_true", help="redraw collocation points every iteration")
    p.add_argument("--config", type=Path, help="key = value config file ([problem] and [train] sections)")


def _read_config(path) -> tuple[dict, TrainConfig]:
    try:
        return read_config_file(path)
    except FileNotFoundError:
        raise InputError(f"cannot read config file {path}")
    except (KeyError, ValueError) as exc:
        raise UsageError(f"bad config file {path}: {exc}") from exc


def _resolve_config(args, base: TrainConfig = None) -> TrainConfig:
    """Flags override the config file (or manifest), which overrides defaults."""
    if base is None and getattr(args, "config", None):
        _, base = _read_config(args.config)
        if "max_iterations" not in _config_keys(args.config):
            base = base.replace(max_iterations=REDUCED_BUDGET)
    cfg = base or TrainConfig(max_iterations=REDUCED_BUDGET)
    if getattr(args, "full", False):
        cfg = cfg.replace(max_iterations=FULL_BUDGET)
    flags = {
        "seed": args.seed,
        "max_iterations": args.budget,
        "tol": args.tol,
        "activation": args.activation,
        "mode": args.mode,
        "lr0": args.lr,
        "checkpoint_interval": args.checkpoint_interval,
        "collocation": args.collocation,
    }
    changes = {k: v for k, v in flags.items() if v is not None}
    if args.resample:
        changes["resample"] = True
    try:
        return cfg.replace(**changes)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _problem_from_args(args):
    if args.problem is None:
        raise UsageError("--problem is required")
    try:
        return catalog(args.problem, args.k, args.well_posed)
    except CatalogError as exc:
        raise UsageError(exc.args[0]) from exc


def _exit_for(report) -> int:
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


# ---------------------------------------------------------------- commands


def cmd_train(args) -> int:
    problem_fields = {}
    base = None
    if args.manifest:
        try:
            man = RunManifest.read(args.manifest)
        except (OSError, KeyError) as exc:
            raise InputError(f"cannot read manifest {args.manifest}: {exc}") from exc
        problem_fields = {"id": man.problem, "k": man.k, "well_posed": man.well_posed}
        base = man.config
    elif args.config:
        fields, _ = _read_config(args.config)
        problem_fields = {
            "id": fields.get("id"),
            "k": int(fields["k"]) if fields.get("k") else None,
            "well_posed": fields.get("well_posed", "false").lower() in ("1", "true", "yes"),
        }
    if args.problem is None:
        args.problem = problem_fields.get("id")
    if args.k is None:
        args.k = problem_fields.get("k")
    args.well_posed = args.well_posed or problem_fields.get("well_posed", False)
    problem = _problem_from_args(args)
    config = _resolve_config(args, base)
    k = "" if problem.k is None else f"_k{problem.k}"
    out = args.out or _default_out() / f"{problem.id}{k}_s{config.seed}"
    result = run_job(
        problem.id,
        problem.k,
        config,
        out,
        well_posed=problem.well_posed,
        spectrum=args.spectrum,
        checkpoints=args.checkpoints,
        plots=not args.no_plot,
    )
    rep = result.report
    print(f"{problem.label}: {rep.summary()} final_error={rep.final_error:.4g} -> {result.out_dir}")
    return _exit_for(rep)


_ITER_RE = re.compile(r"(\d+)(?=\.bin$)")


def cmd_spectrum(args) -> int:
    problem = _problem_from_args(args)
    try:
        params = load_params(args.checkpoint)
    except CheckpointError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_NOINPUT
    freqs = args.freqs or sorted({t.frequency for t in problem.closed_form})
    try:
        measured = network_spectrum(params, problem, freqs, args.grid, args.activation)
        exact = closed_form_spectrum(problem, freqs, args.grid)
    except AliasingError as exc:
        print(f"aliasing: {exc}", file=sys.stderr)
        return EXIT_DATAERR
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    iteration = args.iteration
    if iteration is None:
        m = _ITER_RE.search(Path(args.checkpoint).name)
        iteration = int(m.group(1)) if m else 0
    errors = dict(spectrum_error(measured, exact))
    rows = [
        (iteration, k, float(a), float(e), float(errors[k]))
        for k, a, e in zip(measured.freqs, measured.amplitudes, exact.amplitudes)
    ]
    out = args.out or Path(args.checkpoint).with_name("spectrum.csv")
    write_csv(out, SPECTRUM_COLUMNS, rows)
    for row in rows:
        print(f"k={row[1]:3d} measured={row[2]:.6f} exact={row[3]:.6f} abs_error={row[4]:.3e}")
    return EXIT_OK


def cmd_ntk(args) -> int:
    out = Path(args.out or _default_out() / "ntk")
    out.mkdir(parents=True, exist_ok=True)
    if args.linear:
        points = np.asarray(args.points_list or [1.0, 2.0])
        params = ParamVector([np.array([[args.linear_init]])], [np.zeros(1)], use_bias=False)
        problem = catalog("eq25", 2)
        targets = args.linear_target * points
        config = TrainConfig(
            seed=args.seed,
            mode="supervised",
            layer_sizes=(1, 1),
            optimizer="gd",
            lr0=args.lr if args.lr is not None else 0.01,
            lr_decay=1.0,
            max_iterations=args.iterations or 200,
            checkpoint_interval=args.checkpoint_interval or 1,
        )
    else:
        problem, points = sum_of_sines_benchmark(args.points)
        params, targets = None, None
        config = benchmark_config(
            seed=args.seed,
            lr=args.lr,
            iterations=args.iterations,
            checkpoint_interval=args.checkpoint_interval,
        )
    result, traces = mode_trace(problem, config, points, targets=targets, params=params, drift=args.drift)
    write_csv(
        out / "eigenvalues.csv",
        EIGENVALUE_COLUMNS,
        [(i + 1, float(lam)) for i, lam in enumerate(result.eigenvalues)],
    )
    write_csv(out / "mode_trace.csv", MODE_TRACE_COLUMNS, _mode_rows(traces))
    if args.drift:
        write_csv(out / "drift.csv", DRIFT_COLUMNS, result.drift)
        it, change, _ = result.drift[-1]
        print(f"kernel drift at iteration {it}: {change:.4f}")
    if not args.no_plot:
        plot_mode_traces(traces, out / "mode_trace.svg")
    top = min(args.top, len(traces))
    if top >= 3:
        rho = rank_correlation(traces, top)
        print(f"rank_correlation(top {top}) = {rho:.4f}")
    else:
        print("rank_correlation: fewer than 3 modes")
    print(f"eigenvalues: {', '.join(f'{v:.6g}' for v in result.eigenvalues[:10])}")
    return EXIT_OK


def _mode_rows(traces: list[ModeTrace]):
    for tr in traces:
        for it, pred, act in zip(tr.iterations, tr.predicted, tr.actual):
            yield (tr.index + 1, tr.eigenvalue, it, pred, act)


def cmd_plot(args) -> int:
    if args.solution:
        try:
            rows = read_csv(args.solution)
            x = np.array([float(r["x"]) for r in rows])
            u = np.array([float(r["u_net"]) for r in rows])
            exact = np.array([float(r["closed_form"]) for r in rows])
        except (OSError, KeyError, ValueError) as exc:
            print(f"cannot read solution CSV: {exc}", file=sys.stderr)
            return EXIT_NOINPUT
        title = args.title or Path(args.solution).parent.name
    elif args.checkpoint:
        problem = _problem_from_args(args)
        try:
            params = load_params(args.checkpoint)
        except CheckpointError as exc:
            print(str(exc), file=sys.stderr)
            return EXIT_NOINPUT
        x = evaluation_grid(problem, args.grid)
        u = forward(params, x, args.activation)
        exact = closed_form_eval(problem, x)
        title = args.title or problem.label
    else:
        raise UsageError("plot needs --solution or --checkpoint")
    try:
        path = plot_solution(x, u, exact, args.out, title)
    except OSError as exc:
        print(f"cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(path)
    return EXIT_OK


def cmd_suite(args) -> int:
    base = _resolve_config(args)
    try:
        spec = build_suite(args.suite, args.out or _default_out(), full=args.full, base=base)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from exc
    if args.budget is not None:
        spec.base_config = spec.base_config.replace(max_iterations=args.budget)
    spec.well_posed = args.well_posed
    seeds = [base.seed + r for r in range(args.repeats)]
    results = []
    root = spec.output_dir
    for seed in seeds:
        spec.base_config = spec.base_config.replace(seed=seed)
        if len(seeds) > 1:
            spec.output_dir = root / f"seed{seed}"
        results = run_suite(spec, workers=args.workers, plots=not args.no_plot)
        for r in results:
            print(",".join(str(r[c]) for c in SUMMARY_COLUMNS))
    return EXIT_OK if all(not str(r["status"]).startswith("error") for r in results) else EXIT_ERROR


def cmd_compare(args) -> int:
    problem = _problem_from_args(args)
    base = _resolve_config(args)
    out = Path(args.out or _default_out() / f"compare_{problem.id}_k{problem.k}")
    rows = []
    iters = {}
    for mode in ("pinn", "supervised"):
        res = run_job(
            problem.id,
            problem.k,
            base.replace(mode=mode),
            out / mode,
            well_posed=problem.well_posed,
            plots=not args.no_plot,
        )
        rep = res.report
        iters[mode] = rep.iteration if rep.converged else None
        rows.append(
            (
                problem.id,
                "" if problem.k is None else problem.k,
                problem.order,
                base.activation,
                mode,
                rep.status,
                rep.iteration if rep.converged else NO_CONVERGENCE,
                float(rep.final_error),
            )
        )
    write_csv(out / "compare.csv", SUMMARY_COLUMNS, rows)
    for r in rows:
        print(",".join(str(v) for v in r))
    if iters["pinn"] and iters["supervised"]:
        print(f"speedup (pinn / supervised) = {iters['pinn'] / iters['supervised']:.2f}")
    elif iters["supervised"]:
        print(f"speedup (pinn / supervised) > {base.max_iterations / iters['supervised']:.2f}")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="pinnbias",
        description="Train PINNs on sinusoid benchmarks and measure spectral bias.",
        epilog=__doc__.split("\n\n")[1],
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("train", help="train one catalog problem")
    _add_problem_args(p)
    _add_train_args(p)
    p.add_argument("--manifest", type=Path, help="re-run the job recorded in a manifest")
    p.add_argument("--out", type=Path)
    p.add_argument("--spectrum", action="store_true", help="record Fourier amplitudes at each checkpoint")
    p.add_argument("--checkpoints", action="store_true", help="save parameters at each checkpoint")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("suite", help="reproduce one of the convergence tables")
    p.add_argument("suite", choices=SUITE_IDS)
    _add_train_args(p)
    p.add_argument("--well-posed", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--repeats", type=int, default=1, help="run the suite for this many consecutive seeds")
    p.add_argument("--out", type=Path)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("spectrum", help="Fourier amplitudes of a saved network")
    p.add_argument("--checkpoint", type=Path, required=True)
    _add_problem_args(p, required=True)
    p.add_argument("--freqs", type=_int_list)
    p.add_argument("--grid", type=int, default=256)
    p.add_argument("--activation", choices=("tanh", "swish"), default="tanh")
    p.add_argument("--iteration", type=int)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("ntk", help="NTK eigenmodes: predicted vs measured error decay")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--points", type=int, default=32)
    p.add_argument("--iterations", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--checkpoint-interval", type=int)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--linear", action="store_true", help="debug: one-parameter model f = theta x")
    p.add_argument("--drift", action="store_true", help="recompute the kernel at every checkpoint and write drift.csv")
    p.add_argument("--points-list", type=_float_list, help="sample points for --linear")
    p.add_argument("--linear-init", type=float, default=0.0)
    p.add_argument("--linear-target", type=float, default=1.0)
    p.add_argument("--out", type=Path)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_ntk)

    p = sub.add_parser("plot", help="network vs closed form figure")
    p.add_argument("--solution", type=Path, help="solution CSV written by train")
    p.add_argument("--checkpoint", type=Path)
    _add_problem_args(p)
    p.add_argument("--activation", choices=("tanh", "swish"), default="tanh")
    p.add_argument("--grid", type=int, default=1001)
    p.add_argument("--title")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("compare", help="PINN vs supervised training on one problem")
    _add_problem_args(p, required=True)
    _add_train_args(p)
    p.add_argument("--out", type=Path)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        logging.basicConfig(
            level=logging.DEBUG if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
        )
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_NOINPUT
    except Exception as exc:
        log.debug("failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
