"""Rich rendering for command output."""

from pfode_lab.ui.report_display import ReportDisplay
from pfode_lab.ui.schedule_display import ScheduleDisplay

__all__ = ["ReportDisplay", "ScheduleDisplay"]
