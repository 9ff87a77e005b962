"""CLI interface for the PF-ODE sampling lab."""

import dataclasses
import logging
import math
from collections import Counter
from contextlib import contextmanager
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np
import typer

try:  # typer>=0.22 vendors its own click; its exceptions are what app() raises
    from typer import _click as click
except ImportError:  # pragma: no cover - older typer depends on standalone click
    import click
from rich import box
from rich.console import Console
from rich.panel import Panel

from pfode_lab.config import ExperimentConfig, load_config
from pfode_lab.engine.pool import worker_count
from pfode_lab.engine.reference import prior_sample, reference_flow
from pfode_lab.engine.scheduler import build_schedule, eta_profile, refine_schedule, resample_n_steps
from pfode_lab.engine.solvers import sample_trajectories
from pfode_lab.errors import ConfigError, ConvergenceError, PfodeError, VerificationFailed
from pfode_lab.io import (
    load_mixture,
    read_schedule,
    trajectory_fields,
    trajectory_rows,
    write_csv,
    write_json,
    write_mixture,
    write_schedule,
)
from pfode_lab.log import configure_logging
from pfode_lab.metrics.analysis import (
    CurvatureRow,
    EtaRow,
    TauRow,
    curvature_sweep,
    curvature_trend,
    eta_rows,
    first_bound_step,
    has_interior_peak,
    log_sigma_grid,
    profile_rises,
    rows_as_dicts,
    tau_sweep,
)
from pfode_lab.metrics.transport import w2
from pfode_lab.models.parameterization import Parameterization, edm_reference_grid
from pfode_lab.models.schedule import TimestepSchedule
from pfode_lab.presets import PRESETS
from pfode_lab.ui import ReportDisplay, ScheduleDisplay
from pfode_lab.verify import Suite, VerifySettings, run_suite

logger = logging.getLogger(__name__)

console = Console()
err_console = Console(stderr=True)
app = typer.Typer(help="PF-ODE sampling lab - adaptive schedules and mixed Euler/Heun solvers on Gaussian mixtures")


# floating-point and linear-algebra failures from numpy/scipy
NUMERICAL_ERRORS = (ArithmeticError, np.linalg.LinAlgError)


class Analysis(str, Enum):
    CURVATURE_VS_SIGMA = "curvature_vs_sigma"
    ETA_PROFILE = "eta_profile"
    TAU_SWEEP = "tau_sweep"


ROW_TYPES = {
    Analysis.CURVATURE_VS_SIGMA: CurvatureRow,
    Analysis.ETA_PROFILE: EtaRow,
    Analysis.TAU_SWEEP: TauRow,
}


@contextmanager
def _exit_on_error():
    """Turn package errors into a red message and the matching exit code."""
    try:
        yield
    except PfodeError as exc:
        err_console.print(f"[bold red]error:[/bold red] [red]{exc}[/red]")
        raise typer.Exit(exc.exit_code) from exc
    except NUMERICAL_ERRORS as exc:
        err_console.print(f"[bold red]numerical error:[/bold red] [red]{exc}[/red]")
        raise typer.Exit(ConvergenceError.exit_code) from exc


def _load(config_path: Path, seed: Optional[int], out: Optional[Path]) -> ExperimentConfig:
    config = load_config(config_path)
    return config.override(seed=seed, output_dir=None if out is None else str(out))


def _schedule_for(config: ExperimentConfig, p: Parameterization, schedule_path: Optional[Path]) -> TimestepSchedule:
    """Schedule from file (checked against the config) or the configured EDM grid."""
    if schedule_path is None:
        return edm_reference_grid(p, config.grid.steps, config.grid.rho)
    schedule, built_for = read_schedule(schedule_path)
    if built_for is not None and built_for != p:
        raise ConfigError(
            f"{schedule_path} was built for {built_for.kind.value} on "
            f"[{built_for.sigma_min:g}, {built_for.sigma_max:g}], config has {p.kind.value} on "
            f"[{p.sigma_min:g}, {p.sigma_max:g}]"
        )
    if schedule.t0 > p.t_max * (1.0 + 1e-12):
        raise ConfigError(f"{schedule_path} starts at t={schedule.t0:g}, beyond T={p.t_max:g}")
    return schedule


def _output_dir(config: ExperimentConfig, config_path: Path) -> Path:
    """Create the output directory and record the effective config next to the results."""
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    target = out / "config.yaml"
    if target.resolve() == config_path.resolve():
        logger.warning("keeping %s: it is the input config", config_path)
    else:
        target.write_text(config.dump(), encoding="utf-8")
    return out


@app.callback()
def root(
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Log per-step detail"),
    quiet: bool = typer.Option(False, "--quiet", "-q", help="Only log warnings and errors"),
):
    """Configure logging for every command."""
    configure_logging(verbose=verbose, quiet=quiet)


@app.command()
def schedule(
    config_path: Path = typer.Option(..., "--config", "-c", help="Experiment YAML file"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Output directory (overrides output_dir)"),
    seed: Optional[int] = typer.Option(None, "--seed", "-s", help="Random seed (overrides seed)"),
):
    """
    📐 Build a Wasserstein-bounded timestep schedule.

    Writes schedule.json; with a resample block the schedule is redistributed to N steps.
    """
    with _exit_on_error():
        config = _load(config_path, seed, out)
        gm = load_mixture(config.mixture, config.base_dir)
        p = config.parameterization.build()
        eta = config.eta.build()

        built = build_schedule(gm, p, eta, seed=config.seed, opts=config.scheduler.build())
        result, resample_meta = built, None
        if config.resample is not None:
            rs = config.resample
            base = built
            if rs.N > base.num_steps:
                factor = math.ceil((rs.N - 1) / max(base.num_steps - 1, 1))
                logger.info("refining %d-step base %dx before resampling to %d", base.num_steps, factor, rs.N)
                base = refine_schedule(base, p, factor)
            result = resample_n_steps(base, rs.weights(), rs.N, p, rs.proxy)
            resample_meta = {"q": rs.q, "N": rs.N, "proxy": rs.proxy, "base_steps": built.num_steps}

        out_dir = _output_dir(config, config_path)
        path = write_schedule(out_dir / "schedule.json", result, p, eta=eta, resample=resample_meta)

    console.print(ScheduleDisplay.render(built, p, title="Adaptive schedule"))
    if resample_meta is not None:
        console.print(ScheduleDisplay.render_summary(result, p, title=f"Resampled to {result.num_steps} steps"))
    console.print(f"[dim]wrote {path}[/dim]")


@app.command()
def sample(
    config_path: Path = typer.Option(..., "--config", "-c", help="Experiment YAML file"),
    schedule_path: Optional[Path] = typer.Option(None, "--schedule", help="Schedule JSON (default: EDM grid from config)"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Output directory (overrides output_dir)"),
    seed: Optional[int] = typer.Option(None, "--seed", "-s", help="Random seed (overrides seed)"),
):
    """
    🎯 Sample trajectories with the configured solver policy.

    Writes trajectories.csv and summary.json with NFE counts and endpoint W₂ to the reference flow.
    """
    with _exit_on_error():
        config = _load(config_path, seed, out)
        gm = load_mixture(config.mixture, config.base_dir)
        p = config.parameterization.build()
        grid = _schedule_for(config, p, schedule_path)
        policy = config.policy.build()
        n = config.samples

        x0 = prior_sample(p, gm.dim, n, config.seed, "sample", t0=grid.t0)
        runs = sample_trajectories(gm, p, grid, policy, x0, worker_count()) if n > 0 else []

        endpoint_w2 = None
        if runs:
            endpoints = np.stack([np.ravel(run.endpoint) for run in runs])
            reference = reference_flow(gm, p, x0, grid.t0, 0.0, config.reference.substeps, config.reference.tail_sigma)
            endpoint_w2 = w2(reference, endpoints, config.verify.assignment_cap).w2

        total = sum(run.total_nfe for run in runs)
        nfe_counts = Counter(r.nfe for run in runs for r in run.records)
        solver_counts = Counter(r.solver_used.value for run in runs for r in run.records)
        summary = {
            "samples": n,
            "steps": grid.num_steps,
            "schedule_source": grid.source,
            "policy": policy.describe(),
            "policy_config": policy.to_dict(),
            "seed": config.seed,
            "total_nfe": total,
            "nfe_per_step": total / (n * grid.num_steps) if n else 0.0,
            "per_step_nfe_histogram": {str(k): nfe_counts[k] for k in sorted(nfe_counts)},
            "solver_counts": dict(sorted(solver_counts.items())),
            "endpoint_w2_vs_reference": endpoint_w2,
        }

        out_dir = _output_dir(config, config_path)
        rows = [row for i, run in enumerate(runs) for row in trajectory_rows(i, run, grid.sigmas)]
        write_csv(out_dir / "trajectories.csv", rows, trajectory_fields(gm.dim))
        path = write_json(out_dir / "summary.json", summary)

    console.print(ReportDisplay.render_sample(summary))
    console.print(f"[dim]wrote {path}[/dim]")


@app.command()
def verify(
    suite: Suite = typer.Option(..., "--suite", help="Invariant battery to run"),
    config_path: Path = typer.Option(..., "--config", "-c", help="Experiment YAML file"),
    schedule_path: Optional[Path] = typer.Option(None, "--schedule", help="Schedule JSON for totalbound/resample"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Output directory (overrides output_dir)"),
    seed: Optional[int] = typer.Option(None, "--seed", "-s", help="Random seed (overrides seed)"),
):
    """
    ✅ Check the analytic invariants against finite differences and transport oracles.

    Exits with code 2 when any check fails.
    """
    with _exit_on_error():
        config = _load(config_path, seed, out)
        gm = load_mixture(config.mixture, config.base_dir)
        p = config.parameterization.build()
        fixed = None if schedule_path is None else _schedule_for(config, p, schedule_path)
        settings = VerifySettings(
            points=config.verify.points,
            samples=config.verify.samples,
            assignment_cap=config.verify.assignment_cap,
            substeps=config.reference.substeps,
            tail_sigma=config.reference.tail_sigma,
            seed=config.seed,
            threads=worker_count(),
            grid_steps=config.grid.steps,
            grid_rho=config.grid.rho,
            eta=config.eta.build(),
            q=0.25 if config.resample is None else config.resample.q,
            scheduler=config.scheduler.build(),
        )
        report = run_suite(suite, gm, p, settings, fixed)
        path = write_json(_output_dir(config, config_path) / f"verify-{suite.value}.json", report.to_dict())

        console.print(ReportDisplay.render_verify(report))
        console.print(f"[dim]wrote {path}[/dim]")
        if not report.passed:
            names = ", ".join(c.name for c in report.failures)
            raise VerificationFailed(f"{len(report.failures)} of {len(report.checks)} checks failed: {names}")


@app.command()
def analyze(
    what: Analysis = typer.Option(..., "--what", "-w", help="Which table to produce"),
    config_path: Path = typer.Option(..., "--config", "-c", help="Experiment YAML file"),
    schedule_path: Optional[Path] = typer.Option(None, "--schedule", help="Schedule JSON (default: EDM grid from config)"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Output directory (overrides output_dir)"),
    seed: Optional[int] = typer.Option(None, "--seed", "-s", help="Random seed (overrides seed)"),
    points: int = typer.Option(40, "--points", help="Noise levels for curvature_vs_sigma"),
):
    """
    📊 Produce plot-ready CSV tables.

    curvature_vs_sigma, eta_profile along a schedule, or an NFE/W₂ sweep over tau_k.
    """
    with _exit_on_error():
        config = _load(config_path, seed, out)
        if config.samples < 1:
            raise ConfigError("analyze needs samples >= 1")
        gm = load_mixture(config.mixture, config.base_dir)
        p = config.parameterization.build()
        ref = config.reference

        if what is Analysis.CURVATURE_VS_SIGMA:
            rows = curvature_sweep(gm, p, log_sigma_grid(p, points), config.samples, config.seed)
            logger.info("spearman(log sigma, log kappa) = %.3f", curvature_trend(rows))
        elif what is Analysis.ETA_PROFILE:
            grid = _schedule_for(config, p, schedule_path)
            profile = eta_profile(grid, gm, p, config.samples, config.seed, ref.substeps, ref.tail_sigma)
            rows = eta_rows(grid, profile)
            rises = profile_rises(profile, start=first_bound_step(grid))
            logger.info(
                "eta_t peaks at step %d of %d (interior: %s); %d rise(s) over 10%% after the first budget-limited step",
                int(np.argmax(profile)), len(profile), has_interior_peak(profile), len(rises),
            )
        else:
            grid = _schedule_for(config, p, schedule_path)
            rows = tau_sweep(
                gm,
                p,
                grid,
                n_samples=config.samples,
                seed=config.seed,
                substeps=ref.substeps,
                tail_sigma=ref.tail_sigma,
                threads=worker_count(),
                cap=config.verify.assignment_cap,
            )

        table = rows_as_dicts(rows)
        fields = [f.name for f in dataclasses.fields(ROW_TYPES[what])]
        path = write_csv(_output_dir(config, config_path) / f"{what.value}.csv", table, fields)

    console.print(ReportDisplay.render_rows(what.value, table))
    console.print(f"[dim]wrote {path}[/dim]")


@app.command()
def presets(
    out: Path = typer.Option(Path("presets"), "--out", "-o", help="Directory for the mixture JSON files"),
):
    """
    🎲 Write the built-in Gaussian-mixture presets as JSON files.
    """
    with _exit_on_error():
        mixtures = {name: build() for name, build in PRESETS.items()}
        for name, gm in mixtures.items():
            write_mixture(out / f"{name}.json", gm)

    console.print(ReportDisplay.render_presets(mixtures))
    console.print(
        Panel(
            f"Use a file with [cyan]mixture: {out}/<name>.json[/cyan] or refer to a preset directly with "
            "[cyan]mixture: preset:<name>[/cyan]",
            border_style="dim",
            box=box.ROUNDED,
        )
    )


def main(argv: Optional[list[str]] = None) -> int:
    """Main entry point for the CLI; returns the process exit code."""
    try:
        result = app(args=argv, prog_name="pfode", standalone_mode=False)
    except click.ClickException as exc:
        exc.show(file=err_console.file)
        return 1
    except click.exceptions.Abort:
        err_console.print("[red]aborted[/red]")
        return 1
    except PfodeError as exc:
        err_console.print(f"[bold red]error:[/bold red] [red]{exc}[/red]")
        return exc.exit_code
    except NUMERICAL_ERRORS as exc:
        err_console.print(f"[bold red]numerical error:[/bold red] [red]{exc}[/red]")
        return ConvergenceError.exit_code
    return result if isinstance(result, int) else 0
