"""Tests for the empirical order of convergence."""

import numpy as np
import pytest

from pfode_lab.engine.solvers import euler_step, heun_step
from pfode_lab.errors import DomainError
from pfode_lab.metrics.convergence import order_of_convergence
from tests.conftest import gaussian_flow


def _integrate(step, gm, p, x, t_from, t_to, n):
    times = np.linspace(t_from, t_to, n + 1)
    for a, b in zip(times[:-1], times[1:]):
        x = step(gm, p, x, float(a), float(b)).x_out
    return x


def test_slope_of_synthetic_series():
    pairs = [(dt, 3.0 * dt**2) for dt in (0.4, 0.2, 0.1, 0.05)]
    assert order_of_convergence(pairs) == pytest.approx(2.0)


def test_invalid_series():
    with pytest.raises(DomainError, match="at least 4"):
        order_of_convergence([(0.1, 1.0), (0.05, 0.5), (0.025, 0.25)])
    with pytest.raises(DomainError, match="equal"):
        order_of_convergence([(0.1, 1.0), (0.1, 0.5), (0.1, 0.25), (0.1, 0.1)])
    with pytest.raises(DomainError, match="positive"):
        order_of_convergence([(0.1, 0.0), (0.05, 0.5), (0.025, 0.25), (0.01, 0.1)])


@pytest.mark.parametrize("step,lo,hi", [(euler_step, 0.8, 1.2), (heun_step, 1.8, 2.2)])
def test_solver_orders(standard_normal, edm, step, lo, hi):
    """Euler is first order and Heun second order on a smooth stretch of the flow."""
    x0 = np.array([1.5])
    exact = gaussian_flow(x0, 2.0, 0.5)
    pairs = []
    for n in (8, 16, 32, 64):
        end = _integrate(step, standard_normal, edm, x0, 2.0, 0.5, n)
        pairs.append((1.5 / n, float(np.abs(end - exact)[0])))
    assert lo <= order_of_convergence(pairs) <= hi


@pytest.mark.parametrize("step,lo,hi", [(euler_step, 1.85, 2.15), (heun_step, 2.8, 3.2)])
def test_local_error_orders(standard_normal, edm, step, lo, hi):
    """One step from t = 2: Euler's error shrinks like h², Heun's like h³."""
    x0 = np.array([1.5])
    pairs = []
    for h in (0.1, 0.05, 0.025, 0.0125):
        out = step(standard_normal, edm, x0, 2.0, 2.0 - h).x_out
        pairs.append((h, float(np.abs(out - gaussian_flow(x0, 2.0, 2.0 - h))[0])))
    assert lo <= order_of_convergence(pairs) <= hi


def test_heun_local_error_ratio(standard_normal, edm):
    """Halving h cuts Heun's one-step error by about 8."""
    x0 = np.array([1.5])

    def error(h):
        out = heun_step(standard_normal, edm, x0, 2.0, 2.0 - h).x_out
        return float(np.abs(out - gaussian_flow(x0, 2.0, 2.0 - h))[0])

    assert 7.0 <= error(0.02) / error(0.01) <= 9.0
