"""Command-line interface: benchmark emission, pipelines, sweeps, search.

Every subcommand writes CSV artifacts into --out (current directory by
default); --plot additionally renders SVG figures from those CSVs.
"""

from __future__ import annotations

import csv
import pathlib
from dataclasses import replace

import click
import numpy as np

from .dynamics import generate_benchmark
from .errors import SearchFailureError
from .harness import (
    SYSTEMS,
    _GEN_STATE0,
    ensemble_sweep,
    memory_curve_for,
    random_search,
    replay_closed_loop,
    run_experiment_artifacts,
    trial_seed,
)
from .reporting import (
    load_readout,
    plot_memory_csv,
    plot_timeseries_csv,
    read_config_file,
    save_readout,
    write_config_file,
    write_memory_curves_csv,
    write_memory_summary_csv,
    write_report_csv,
    write_report_json,
    write_sweep_csv,
    write_timeseries_csv,
)

# Generator settings that resolve a benchmark's natural sampling when
# the caller does not override them: (integrator step, sample interval,
# transient samples).
_GEN_DEFAULTS = {
    "lorenz": (1e-3, 0.1, 1000),
    "food_chain": (1e-2, 1.0, 2000),
}


def _outdir(out) -> pathlib.Path:
    path = pathlib.Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_config(config_path, seed):
    config = read_config_file(config_path)
    if seed is not None:
        config = replace(config, seed=seed)
    return config


@click.group()
def main():
    """Reservoir-computing benchmark toolkit."""


@main.command()
@click.option("--system", type=click.Choice(SYSTEMS), required=True)
@click.option("--trials", "samples", type=int, default=10000, show_default=True,
              help="Number of samples to emit.")
@click.option("--dt", type=float, default=None, help="Sample interval.")
@click.option("--step", "h", type=float, default=None, help="Integrator step.")
@click.option("--transient", type=int, default=None,
              help="Samples discarded from the front.")
@click.option("--out", type=click.Path(), default=".", show_default=True)
@click.option("--plot", is_flag=True, help="Also render an SVG.")
def generate(system, samples, dt, h, transient, out, plot):
    """Integrate a benchmark system and write its normalized series."""
    default_h, default_dt, default_transient = _GEN_DEFAULTS[system]
    series = generate_benchmark(
        system,
        h=default_h if h is None else h,
        dt=default_dt if dt is None else dt,
        n_samples=samples,
        transient_samples=default_transient if transient is None else transient,
        state0=_GEN_STATE0[system],
    )
    outdir = _outdir(out)
    csv_path = outdir / f"{system}_timeseries.csv"
    write_timeseries_csv(csv_path, series)
    click.echo(f"wrote {csv_path}")
    if plot:
        svg_path = outdir / f"{system}_timeseries.svg"
        plot_timeseries_csv(csv_path, svg_path)
        click.echo(f"wrote {svg_path}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True),
              required=True)
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--out", type=click.Path(), default=".", show_default=True)
@click.option("--memory", "with_memory", is_flag=True,
              help="Also estimate the reservoir's memory curve.")
@click.option("--plot", is_flag=True, help="Also render SVG figures.")
def train(config_path, seed, out, with_memory, plot):
    """Run one full experiment and write its report and artifacts."""
    config = _load_config(config_path, seed)
    report, artifacts = run_experiment_artifacts(config, with_memory=with_memory)
    outdir = _outdir(out)
    write_report_json(outdir / "report.json", report)
    write_report_csv(outdir / "report.csv", report)
    write_config_file(outdir / "config_echo.txt", config)
    save_readout(outdir / "readout.npz", artifacts.readout)
    write_timeseries_csv(outdir / "prediction.csv", artifacts.prediction)
    write_timeseries_csv(outdir / "truth.csv", artifacts.truth)
    if report.memory is not None:
        write_memory_curves_csv(outdir / "memory_curve.csv", [report.memory])
    if plot:
        for stem in ("prediction", "truth"):
            plot_timeseries_csv(outdir / f"{stem}.csv", outdir / f"{stem}.svg")
        if report.memory is not None:
            plot_memory_csv(outdir / "memory_curve.csv",
                            outdir / "memory_curve.svg")
    status = "diverged" if report.stats.diverged else "completed"
    click.echo(
        f"{status}: train={report.stats.train_nrmse:.4g} "
        f"val={report.stats.val_nrmse:.4g} ({report.wall_time:.1f}s)"
    )


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True),
              required=True)
@click.option("--readout", "readout_path", type=click.Path(exists=True),
              required=True, help="Saved readout archive from train.")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--out", type=click.Path(), default=".", show_default=True)
@click.option("--plot", is_flag=True, help="Also render SVG figures.")
def predict(config_path, readout_path, seed, out, plot):
    """Re-run the closed loop with a previously trained readout."""
    config = _load_config(config_path, seed)
    artifacts = replay_closed_loop(config, load_readout(readout_path))
    outdir = _outdir(out)
    write_timeseries_csv(outdir / "prediction.csv", artifacts.prediction)
    write_timeseries_csv(outdir / "truth.csv", artifacts.truth)
    if plot:
        plot_timeseries_csv(outdir / "prediction.csv", outdir / "prediction.svg")
    status = "diverged" if artifacts.diverged else "completed"
    click.echo(f"{status}: {artifacts.prediction.n_samples} samples")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True),
              required=True)
@click.option("--trials", type=int, default=20, show_default=True)
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--out", type=click.Path(), default=".", show_default=True)
@click.option("--plot", is_flag=True, help="Also render an SVG.")
def memory(config_path, trials, seed, out, plot):
    """Estimate memory curves over independent reservoir draws."""
    config = _load_config(config_path, seed)
    curves = [
        memory_curve_for(
            replace(config, seed=trial_seed(config.seed, config.n, trial))
        )
        for trial in range(trials)
    ]
    outdir = _outdir(out)
    write_memory_summary_csv(outdir / "memory_summary.csv", curves)
    write_memory_curves_csv(outdir / "memory_curves.csv", curves)
    if plot:
        plot_memory_csv(outdir / "memory_summary.csv",
                        outdir / "memory_summary.svg")
    mc = np.mean([c.mc for c in curves])
    click.echo(f"mean memory capacity over {trials} trials: {mc:.3f}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True),
              required=True)
@click.option("--sizes", default="10,20,40,60", show_default=True,
              help="Comma-separated reservoir sizes.")
@click.option("--trials", type=int, default=20, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--memory", "with_memory", is_flag=True,
              help="Also aggregate memory capacity per size.")
@click.option("--out", type=click.Path(), default=".", show_default=True)
def sweep(config_path, sizes, trials, jobs, seed, with_memory, out):
    """Aggregate the pipeline over reservoir sizes and trial seeds."""
    config = _load_config(config_path, seed)
    size_list = [int(s) for s in sizes.split(",") if s.strip()]
    aggregates = ensemble_sweep(
        config, size_list, trials, with_memory=with_memory, jobs=jobs
    )
    outdir = _outdir(out)
    write_sweep_csv(outdir / "sweep.csv", aggregates)
    for agg in aggregates:
        click.echo(
            f"n={agg.n}: val={agg.means['val_nrmse']:.4g} "
            f"divergent={agg.n_divergent}/{agg.n_trials}"
        )


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True),
              required=True)
@click.option("--trials", "budget", type=int, default=20, show_default=True,
              help="Number of hyperparameter draws.")
@click.option("--seed", type=int, default=None,
              help="Seed for the search draws (defaults to the config seed).")
@click.option("--out", type=click.Path(), default=".", show_default=True)
def search(config_path, budget, seed, out):
    """Random hyperparameter search on validation error."""
    config = read_config_file(config_path)
    rng = np.random.default_rng(config.seed if seed is None else seed)
    try:
        result = random_search(None, budget, config, rng)
    except SearchFailureError as exc:
        raise click.ClickException(str(exc))
    outdir = _outdir(out)
    write_config_file(outdir / "best_config.txt", result.config)
    with open(outdir / "search_history.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "gamma", "rho", "lambda", "val_nrmse"])
        for i, (cand, score) in enumerate(result.history):
            writer.writerow([i, repr(cand.gamma), repr(cand.rho),
                             repr(cand.ridge_lambda), repr(float(score))])
    click.echo(
        f"best val={result.score:.4g} after {result.n_evaluated} draws: "
        f"gamma={result.config.gamma:.3g} rho={result.config.rho:.3g} "
        f"lambda={result.config.ridge_lambda:.3g}"
    )


if __name__ == "__main__":
    main()
