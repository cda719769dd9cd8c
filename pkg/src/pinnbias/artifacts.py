"""CSV schemas, run manifests and config files.

Floats are written with ``repr`` so that a trace read back parses to the
same doubles, and so that two identical runs produce identical bytes.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import datetime as _dt
from pathlib import Path

from .trainer import TrainConfig

TRACE_COLUMNS = (
    "iteration",
    "lr",
    "interior_loss",
    "boundary_loss",
    "total_loss",
    "rel_linf_error",
    "rel_l2_error",
)
SPECTRUM_COLUMNS = ("iteration", "frequency", "measured_amplitude", "exact_amplitude", "abs_error")
MODE_TRACE_COLUMNS = ("mode_index", "eigenvalue", "checkpoint_iteration", "predicted_error", "actual_error")
EIGENVALUE_COLUMNS = ("mode_index", "eigenvalue")
DRIFT_COLUMNS = ("iteration", "relative_change", "top_eigenvalue")
SOLUTION_COLUMNS = ("x", "u_net", "closed_form")
SUMMARY_COLUMNS = (
    "problem",
    "k",
    "order",
    "activation",
    "mode",
    "status",
    "iterations_to_convergence",
    "final_error",
)

NO_CONVERGENCE = "no convergence"


def fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


def write_csv(path, columns, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"row has {len(row)} fields, expected {len(columns)}")
            writer.writerow([fmt(v) for v in row])
    return path


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def trace_rows(trace):
    for r in trace.records:
        yield (
            r.iteration,
            float(r.lr),
            float(r.loss.interior),
            float(r.loss.boundary),
            float(r.loss.total),
            float(r.rel_linf),
            float(r.rel_l2),
        )


def spectrum_rows(trace, exact):
    """Rows for every checkpoint that carries a measured spectrum."""
    for r in trace.records:
        if r.spectrum is None:
            continue
        for k, meas, ex in zip(r.spectrum.freqs, r.spectrum.amplitudes, exact.amplitudes):
            yield (r.iteration, int(k), float(meas), float(ex), float(abs(meas - ex)))


# ------------------------------------------------------------- configuration

_INT_FIELDS = {f.name for f in dataclasses.fields(TrainConfig) if f.type in ("int", int)}
_FLOAT_FIELDS = {f.name for f in dataclasses.fields(TrainConfig) if f.type in ("float", float)}
_BOOL_FIELDS = {f.name for f in dataclasses.fields(TrainConfig) if f.type in ("bool", bool)}


def config_to_strings(config: TrainConfig) -> dict:
    out = {}
    for key, value in config.as_dict().items():
        if key == "layer_sizes":
            out[key] = ",".join(str(s) for s in value)
        else:
            out[key] = fmt(value)
    return out


def config_from_strings(values: dict, base: TrainConfig = None) -> TrainConfig:
    base = base or TrainConfig()
    known = {f.name for f in dataclasses.fields(TrainConfig)}
    changes = {}
    for key, raw in values.items():
        if key not in known:
            raise KeyError(f"unknown config key {key!r}")
        raw = raw.strip()
        if key == "layer_sizes":
            changes[key] = tuple(int(s) for s in raw.split(","))
        elif key in _INT_FIELDS:
            changes[key] = int(raw)
        elif key in _FLOAT_FIELDS:
            changes[key] = float(raw)
        elif key in _BOOL_FIELDS:
            changes[key] = raw.lower() in ("1", "true", "yes", "on")
        else:
            changes[key] = raw
    return base.replace(**changes)


def read_config_file(path) -> tuple[dict, TrainConfig]:
    """Parse a ``key = value`` config file.

    ``[problem]`` holds ``id``, ``k`` and ``well_posed``; ``[train]`` holds
    TrainConfig fields.  Returns ``(problem_fields, config)``.
    """
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise FileNotFoundError(path)
    problem = dict(parser["problem"]) if parser.has_section("problem") else {}
    cfg = config_from_strings(dict(parser["train"])) if parser.has_section("train") else TrainConfig()
    return problem, cfg


@dataclasses.dataclass
class RunManifest:
    problem: str
    k: int | None
    well_posed: bool
    config: TrainConfig
    version: str
    started: str = ""
    finished: str = ""
    report: dict = dataclasses.field(default_factory=dict)
    artifacts: dict = dataclasses.field(default_factory=dict)

    @property
    def seed(self) -> int:
        return self.config.seed

    def write(self, path) -> Path:
        parser = configparser.ConfigParser()
        parser["run"] = {
            "problem": self.problem,
            "k": fmt(self.k),
            "well_posed": str(self.well_posed).lower(),
            "seed": str(self.seed),
            "version": self.version,
            "started": self.started,
            "finished": self.finished,
        }
        parser["config"] = config_to_strings(self.config)
        parser["report"] = {k: fmt(v) for k, v in self.report.items()}
        parser["artifacts"] = {k: str(v) for k, v in self.artifacts.items()}
        path = Path(path)
        with open(path, "w") as fh:
            parser.write(fh)
        return path

    @classmethod
    def read(cls, path) -> "RunManifest":
        parser = configparser.ConfigParser()
        if not parser.read(path):
            raise FileNotFoundError(path)
        run = parser["run"]
        k = run.get("k", "")
        return cls(
            problem=run["problem"],
            k=int(k) if k else None,
            well_posed=run.getboolean("well_posed", False),
            config=config_from_strings(dict(parser["config"])),
            version=run.get("version", ""),
            started=run.get("started", ""),
            finished=run.get("finished", ""),
            report=dict(parser["report"]) if parser.has_section("report") else {},
            artifacts=dict(parser["artifacts"]) if parser.has_section("artifacts") else {},
        )


def now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
