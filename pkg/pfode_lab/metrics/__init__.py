"""Transport distances and convergence-order estimates."""

from pfode_lab.metrics.convergence import order_of_convergence
from pfode_lab.metrics.transport import TransportReport, bootstrap_ci, w2

__all__ = ["order_of_convergence", "TransportReport", "bootstrap_ci", "w2"]
