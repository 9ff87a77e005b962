"""Schedule rendering."""

from collections import Counter
from typing import Optional

import numpy as np
from rich.box import ROUNDED, SIMPLE
from rich.console import Group
from rich.panel import Panel
from rich.table import Table
from rich.text import Text

from pfode_lab.models.parameterization import Parameterization
from pfode_lab.models.schedule import TimestepSchedule


class ScheduleDisplay:
    """Summary panel and step table for a timestep schedule."""

    @staticmethod
    def eta_summary(schedule: TimestepSchedule) -> Optional[tuple[float, float, float]]:
        """(min, mean, max) of η over the committed positive steps, or None for fixed grids."""
        used = [m.eta_used for m in schedule.per_step if m.limited_by != "terminal"]
        if not used:
            return None
        values = np.asarray(used)
        return float(values.min()), float(values.mean()), float(values.max())

    @staticmethod
    def render_summary(schedule: TimestepSchedule, p: Parameterization, title: str = "Schedule") -> Panel:
        """
        Render the headline numbers of a schedule.

        Args:
            schedule: The schedule to describe
            p: Parameterization it was built for
            title: Panel title

        Returns:
            Rich Panel with step count, evaluations spent and η range
        """
        # Headline counts
        text = Text()
        text.append(f"{schedule.num_steps}", style="bold cyan")
        text.append(" steps  |  ", style="dim")
        text.append(f"{schedule.total_nfe}", style="bold yellow")
        text.append(" evaluations to build  |  ", style="dim")
        text.append(f"{p.kind.value.upper()}", style="bold green")
        text.append(f"  σ ∈ [{p.sigma_min:g}, {p.sigma_max:g}]", style="dim")

        # Budget spread; fixed grids have none
        eta = ScheduleDisplay.eta_summary(schedule)
        if eta is not None:
            text.append("\nη  min ", style="dim")
            text.append(f"{eta[0]:.4g}", style="magenta")
            text.append("  mean ", style="dim")
            text.append(f"{eta[1]:.4g}", style="magenta")
            text.append("  max ", style="dim")
            text.append(f"{eta[2]:.4g}", style="magenta")

            # How each step length was decided
            limits = Counter(m.limited_by for m in schedule.per_step)
            text.append("\nlimited by  ", style="dim")
            text.append(", ".join(f"{k}: {limits[k]}" for k in sorted(limits)), style="white")

        return Panel(text, title=f"{title} ({schedule.source})", border_style="cyan", box=ROUNDED, padding=(0, 1))

    @staticmethod
    def render_steps(schedule: TimestepSchedule, limit: int = 12) -> Table:
        """Per-step table; long schedules show the first and last limit//2 steps."""
        table = Table(box=SIMPLE, padding=(0, 1))
        table.add_column("i", justify="right", style="dim")
        table.add_column("t", justify="right", style="cyan")
        table.add_column("σ", justify="right", style="cyan")
        table.add_column("Δt", justify="right", style="yellow")
        table.add_column("η", justify="right", style="magenta")
        table.add_column("Ŝ", justify="right")
        table.add_column("limit", justify="center", style="green")

        # Elide the middle of long schedules
        n = schedule.num_steps
        if n <= limit:
            shown = list(range(n))
        else:
            shown = list(range(limit // 2)) + [-1] + list(range(n - limit // 2, n))

        dts = schedule.dts
        for i in shown:
            if i < 0:
                # Gap marker
                table.add_row("…", "", "", "", "", "", "")
                continue
            meta = schedule.per_step[i] if schedule.per_step else None
            table.add_row(
                str(i),
                f"{schedule.times[i]:.5g}",
                f"{schedule.sigmas[i]:.5g}",
                f"{dts[i]:.4g}",
                "" if meta is None else f"{meta.eta_used:.4g}",
                "" if meta is None else f"{meta.s_hat:.4g}",
                "" if meta is None else meta.limited_by,
            )
        return table

    @staticmethod
    def render(schedule: TimestepSchedule, p: Parameterization, title: str = "Schedule") -> Group:
        return Group(ScheduleDisplay.render_summary(schedule, p, title), ScheduleDisplay.render_steps(schedule))
