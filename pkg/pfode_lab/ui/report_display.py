"""Rendering for sampling summaries, verification reports, presets and analysis tables."""

import math
from collections.abc import Sequence

from rich.box import DOUBLE_EDGE, ROUNDED, SIMPLE
from rich.panel import Panel
from rich.table import Table
from rich.text import Text

from pfode_lab.models.mixture import GaussianMixture
from pfode_lab.verify import VerifyReport


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.4g}"
    return str(value)


class ReportDisplay:
    """Tables and panels for command results."""

    @staticmethod
    def render_sample(summary: dict) -> Panel:
        """
        Render a sampling run summary.

        Args:
            summary: The dict written to summary.json

        Returns:
            Rich Panel with evaluations, solver mix and endpoint W₂
        """
        table = Table(box=None, show_header=False, padding=(0, 1))
        table.add_column("Field", style="dim")
        table.add_column("Value", style="bold")

        table.add_row("policy", summary["policy"])
        table.add_row("trajectories", str(summary["samples"]))
        table.add_row("steps", str(summary["steps"]))
        table.add_row("total NFE", Text(str(summary["total_nfe"]), style="yellow"))
        table.add_row("NFE / step", _fmt(summary.get("nfe_per_step")))
        # Evaluations per step and which solver took them
        hist = summary.get("per_step_nfe_histogram", {})
        table.add_row("NFE histogram", ", ".join(f"{k}: {v}" for k, v in hist.items()) or "-")
        solvers = summary.get("solver_counts", {})
        table.add_row("solvers", ", ".join(f"{k}: {v}" for k, v in solvers.items()) or "-")
        # None when no trajectories were run
        w2 = summary.get("endpoint_w2_vs_reference")
        table.add_row("endpoint W₂", Text(_fmt(w2), style="magenta"))

        return Panel(table, title="Sampling run", border_style="green", box=ROUNDED, padding=(0, 1))

    @staticmethod
    def render_verify(report: VerifyReport) -> Table:
        """One row per check, failed checks highlighted."""
        status = "[bold green]PASS[/bold green]" if report.passed else "[bold red]FAIL[/bold red]"
        table = Table(title=f"Verify {report.suite}: {status}", box=DOUBLE_EDGE)
        table.add_column("Check", style="cyan")
        table.add_column("Observed", justify="right")
        table.add_column("", justify="center", style="dim")
        table.add_column("Bound", justify="right")
        table.add_column("Result", justify="center")

        for check in report.checks:
            result = Text("pass", style="green") if check.passed else Text("FAIL", style="bold red")
            table.add_row(check.name, _fmt(check.observed), check.relation, _fmt(check.bound), result)
        return table

    @staticmethod
    def render_presets(presets: dict[str, GaussianMixture]) -> Table:
        table = Table(title="[bold]Mixture presets[/bold]", box=ROUNDED)
        table.add_column("Name", style="cyan")
        table.add_column("Dim", justify="center", style="yellow")
        table.add_column("Components", justify="center", style="yellow")
        table.add_column("Weights", style="dim")

        for name, gm in presets.items():
            weights = ", ".join(f"{w:g}" for w in gm.weights)
            table.add_row(f"preset:{name}", str(gm.dim), str(gm.num_components), weights)
        return table

    @staticmethod
    def render_rows(title: str, rows: Sequence[dict], limit: int = 20) -> Table:
        """Plain table of analysis rows; only the first `limit` are shown."""
        table = Table(title=title, box=SIMPLE)
        # Columns come from the first row
        if not rows:
            return table
        for name in rows[0]:
            table.add_column(name, justify="right")
        for row in rows[:limit]:
            table.add_row(*(_fmt(v) for v in row.values()))
        if len(rows) > limit:
            table.caption = f"{len(rows) - limit} more rows in the CSV"
        return table
