"""Empirical order of convergence."""

from collections.abc import Sequence

import numpy as np

from pfode_lab.errors import DomainError


def order_of_convergence(errors: Sequence[tuple[float, float]]) -> float:
    """Least-squares slope of log(err) against log(Δt)."""
    pairs = np.asarray(errors, dtype=float)
    if pairs.ndim != 2 or pairs.shape[1] != 2 or len(pairs) < 4:
        raise DomainError("order of convergence needs at least 4 (dt, err) pairs")
    dt, err = pairs[:, 0], pairs[:, 1]
    if np.any(dt <= 0.0) or np.any(err <= 0.0):
        raise DomainError("step sizes and errors must be positive")
    log_dt = np.log(dt)
    if np.ptp(log_dt) == 0.0:
        raise DomainError("all step sizes are equal; slope undefined")
    slope, _ = np.polyfit(log_dt, np.log(err), 1)
    return float(slope)
