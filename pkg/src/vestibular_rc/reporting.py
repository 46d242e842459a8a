"""CSV, config-file, and figure emission for experiment artifacts.

All CSV schemas are fixed: time series as (t, ch1..chD), single-run
reports as (metric, value), sweeps as (n, metric, mean, std,
n_divergent), memory summaries as (tau, mf_mean, mf_std), and
per-trial memory curves as (tau, mf, method, trial).  Config files are
flat key=value text mirroring ExperimentConfig.  The SVG plotters read
the CSVs back rather than taking live objects, so a figure can always
be regenerated from the emitted artifacts alone.
"""

from __future__ import annotations

import csv
import json
from dataclasses import fields

import numpy as np

from .dynamics import TimeSeries
from .errors import ConfigurationError, InvalidInputError
from .harness import ExperimentConfig, ExperimentReport, SizeAggregate
from .memory import MemoryCurve
from .readout import ReadoutMatrix

__all__ = [
    "write_timeseries_csv",
    "read_timeseries_csv",
    "write_report_csv",
    "report_to_dict",
    "write_report_json",
    "format_config",
    "parse_config",
    "write_config_file",
    "read_config_file",
    "write_sweep_csv",
    "write_memory_summary_csv",
    "write_memory_curves_csv",
    "save_readout",
    "load_readout",
    "plot_timeseries_csv",
    "plot_memory_csv",
]

# The config file key for the ridge strength keeps the conventional
# single-letter name even though the attribute spells it out.
_KEY_TO_FIELD = {"lambda": "ridge_lambda"}
_FIELD_TO_KEY = {v: k for k, v in _KEY_TO_FIELD.items()}

REPORT_METRICS = (
    "train_nrmse", "val_nrmse", "dv", "kl", "lle_pred", "lle_truth",
)


def write_timeseries_csv(path, series: TimeSeries) -> None:
    """Emit a series as t, ch1..chD rows with t = index * dt."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"ch{i + 1}" for i in range(series.n_channels)])
        for i, row in enumerate(series.values):
            writer.writerow([repr(i * series.dt)]
                            + [repr(float(v)) for v in row])


def read_timeseries_csv(path) -> TimeSeries:
    """Parse a t, ch1..chD file back into a TimeSeries."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "t":
            raise InvalidInputError(f"{path} is not a timeseries CSV")
        rows = [[float(v) for v in row] for row in reader if row]
    if len(rows) < 2:
        raise InvalidInputError("timeseries CSV needs at least 2 samples")
    data = np.asarray(rows)
    steps = np.diff(data[:, 0])
    dt = float(steps[0])
    if dt <= 0 or not np.allclose(steps, dt, rtol=1e-6, atol=1e-12):
        raise InvalidInputError("timeseries CSV must be uniformly sampled")
    return TimeSeries(values=data[:, 1:], dt=dt,
                      channel_names=tuple(header[1:]))


def write_report_csv(path, report: ExperimentReport) -> None:
    """Single-run scores as metric, value rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        for name in REPORT_METRICS:
            writer.writerow([name, repr(float(getattr(report.stats, name)))])
        writer.writerow(["diverged", int(report.stats.diverged)])
        if report.memory is not None:
            writer.writerow(["mc", repr(float(report.memory.mc))])
        writer.writerow(["wall_time", repr(report.wall_time)])


def report_to_dict(report: ExperimentReport) -> dict:
    stats = {name: float(getattr(report.stats, name)) for name in REPORT_METRICS}
    stats["diverged"] = report.stats.diverged
    out = {
        "config": {_FIELD_TO_KEY.get(f.name, f.name): getattr(report.config, f.name)
                   for f in fields(ExperimentConfig)},
        "stats": stats,
        "wall_time": report.wall_time,
    }
    if report.memory is not None:
        out["memory"] = {
            "tau": list(range(report.memory.mf.size)),
            "mf": [float(v) for v in report.memory.mf],
            "mc": float(report.memory.mc),
            "method": report.memory.method,
        }
    else:
        out["memory"] = None
    return out


def write_report_json(path, report: ExperimentReport) -> None:
    with open(path, "w") as fh:
        json.dump(report_to_dict(report), fh, indent=2)
        fh.write("\n")


def _format_value(value) -> str:
    if value is None:
        return "none"
    # numpy float subclasses repr as np.float64(...); coerce first.
    return repr(float(value)) if isinstance(value, float) else str(value)


def format_config(config: ExperimentConfig) -> str:
    """Flat key=value text, one field per line, in declaration order."""
    lines = []
    for f in fields(ExperimentConfig):
        key = _FIELD_TO_KEY.get(f.name, f.name)
        lines.append(f"{key}={_format_value(getattr(config, f.name))}")
    return "\n".join(lines) + "\n"


def parse_config(text: str) -> ExperimentConfig:
    """Parse key=value text; omitted keys fall back to field defaults."""
    by_name = {f.name: f for f in fields(ExperimentConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InvalidInputError(f"line {lineno}: expected key=value, got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        name = _KEY_TO_FIELD.get(key, key)
        if name not in by_name:
            raise InvalidInputError(f"line {lineno}: unknown config key {key!r}")
        try:
            values[name] = _parse_field(name, raw)
        except ValueError:
            raise InvalidInputError(
                f"line {lineno}: cannot parse {raw!r} for {key}"
            ) from None
    for required in ("system", "topology"):
        if required not in values:
            raise ConfigurationError(f"config must set {required}")
    return ExperimentConfig(**values)


def _parse_field(name: str, raw: str):
    if name in ("system", "topology"):
        return raw
    if name == "clip_margin":
        return None if raw.lower() == "none" else float(raw)
    if name in ("n", "l_transient", "l_train", "l_validation", "l_test",
                "seed", "substeps", "gen_transient"):
        return int(raw)
    return float(raw)


def write_config_file(path, config: ExperimentConfig) -> None:
    with open(path, "w") as fh:
        fh.write(format_config(config))


def read_config_file(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def write_sweep_csv(path, aggregates: list[SizeAggregate]) -> None:
    """Sweep aggregates as n, metric, mean, std, n_divergent rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "metric", "mean", "std", "n_divergent"])
        for agg in aggregates:
            for metric in agg.means:
                writer.writerow([
                    agg.n, metric, repr(agg.means[metric]),
                    repr(agg.stds[metric]), agg.n_divergent,
                ])


def write_memory_summary_csv(path, curves: list[MemoryCurve]) -> None:
    """Trial-averaged memory curve as tau, mf_mean, mf_std rows.

    All curves must cover the same delay range.
    """
    if not curves:
        raise InvalidInputError("need at least one memory curve")
    sizes = {c.mf.size for c in curves}
    if len(sizes) > 1:
        raise InvalidInputError("memory curves cover different delay ranges")
    stack = np.stack([c.mf for c in curves])
    mean = stack.mean(axis=0)
    std = stack.std(axis=0)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tau", "mf_mean", "mf_std"])
        for tau in range(mean.size):
            writer.writerow([tau, repr(float(mean[tau])), repr(float(std[tau]))])


def write_memory_curves_csv(path, curves: list[MemoryCurve]) -> None:
    """Per-trial memory samples as tau, mf, method, trial rows."""
    if not curves:
        raise InvalidInputError("need at least one memory curve")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tau", "mf", "method", "trial"])
        for trial, curve in enumerate(curves):
            for tau in range(curve.mf.size):
                writer.writerow([tau, repr(float(curve.mf[tau])),
                                 curve.method, trial])


def save_readout(path, readout: ReadoutMatrix) -> None:
    """Persist trained output weights to an npz archive."""
    np.savez(path, w_out=readout.w_out,
             ridge_lambda=np.array(readout.ridge_lambda))


def load_readout(path) -> ReadoutMatrix:
    with np.load(path) as archive:
        if "w_out" not in archive or "ridge_lambda" not in archive:
            raise InvalidInputError(f"{path} is not a saved readout")
        return ReadoutMatrix(w_out=archive["w_out"],
                             ridge_lambda=float(archive["ridge_lambda"]))


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_timeseries_csv(csv_path, svg_path, max_samples: int = 5000) -> None:
    """Line plot of every channel in a timeseries CSV, written as SVG.

    Long records are truncated to max_samples so figures stay light.
    """
    series = read_timeseries_csv(csv_path)
    plt = _pyplot()
    n = min(series.n_samples, max_samples)
    t = np.arange(n) * series.dt
    fig, ax = plt.subplots(figsize=(8, 3.2))
    for i, name in enumerate(series.channel_names):
        ax.plot(t, series.values[:n, i], lw=0.8, label=name)
    ax.set_xlabel("t")
    ax.set_ylabel("value")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(svg_path, format="svg")
    plt.close(fig)


def plot_memory_csv(csv_path, svg_path) -> None:
    """Plot a memory CSV: per-trial curves, or a mean with a std band."""
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        rows = [row for row in reader if row]
    if not header or header[0] != "tau":
        raise InvalidInputError(f"{csv_path} is not a memory CSV")
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.2))
    if header[:3] == ["tau", "mf_mean", "mf_std"]:
        tau = np.array([float(r[0]) for r in rows])
        mean = np.array([float(r[1]) for r in rows])
        std = np.array([float(r[2]) for r in rows])
        ax.plot(tau, mean, lw=1.2)
        ax.fill_between(tau, mean - std, mean + std, alpha=0.3)
    elif header[:4] == ["tau", "mf", "method", "trial"]:
        trials = {}
        for r in rows:
            trials.setdefault(r[3], []).append((float(r[0]), float(r[1])))
        for points in trials.values():
            points.sort()
            ax.plot([p[0] for p in points], [p[1] for p in points],
                    lw=0.8, alpha=0.7)
    else:
        raise InvalidInputError(f"unrecognized memory CSV header {header}")
    ax.set_xlabel("delay")
    ax.set_ylabel("memory function")
    ax.set_ylim(-0.05, 1.05)
    fig.tight_layout()
    fig.savefig(svg_path, format="svg")
    plt.close(fig)
