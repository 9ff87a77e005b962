"""Tests for the analysis sweeps."""

import math

import numpy as np
import pytest

from pfode_lab.errors import DomainError
from pfode_lab.metrics.analysis import (
    CurvatureRow,
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
from pfode_lab.models.parameterization import edm_reference_grid
from pfode_lab.models.schedule import StepMeta, TimestepSchedule
from pfode_lab.presets import PRESETS


def test_log_sigma_grid(edm):
    grid = log_sigma_grid(edm, 5)
    assert grid[0] == pytest.approx(edm.sigma_max)
    assert grid[-1] == pytest.approx(edm.sigma_min)
    assert np.all(np.diff(np.log(grid)) < 0.0)
    np.testing.assert_allclose(np.diff(np.log(grid)), np.diff(np.log(grid))[0])


def test_constant_field_has_no_curvature(constant_field, edm):
    rows = curvature_sweep(constant_field, edm, log_sigma_grid(edm, 6), n_samples=8)
    assert len(rows) == 5
    assert all(row.kappa_mean == 0.0 and row.kappa_std == 0.0 for row in rows)
    assert math.isnan(curvature_trend(rows))


def test_curvature_rows_sit_inside_their_interval(bimodal, vp):
    grid = log_sigma_grid(vp, 8)
    rows = curvature_sweep(bimodal, vp, grid, n_samples=16)
    for row, hi, lo in zip(rows, grid[:-1], grid[1:]):
        assert lo < row.sigma < hi
        assert row.kappa_mean >= 0.0


@pytest.mark.parametrize("grid", [[1.0, 0.5], [1.0, 2.0, 0.5], [1.0, 0.5, 0.0]])
def test_curvature_grid_validation(bimodal, edm, grid):
    with pytest.raises(DomainError):
        curvature_sweep(bimodal, edm, grid)


def test_curvature_trend():
    rows = [CurvatureRow(sigma=s, kappa_mean=1.0 / s, kappa_std=0.0) for s in (4.0, 2.0, 1.0, 0.5)]
    assert curvature_trend(rows) == pytest.approx(-1.0)


def test_eta_rows(edm):
    grid = edm_reference_grid(edm, 4)
    rows = eta_rows(grid, [0.1, 0.2, 0.3, 0.4])
    assert [r.step for r in rows] == [0, 1, 2, 3]
    assert rows[0].sigma == edm.sigma_max
    assert rows_as_dicts(rows)[2] == {"step": 2, "t": rows[2].t, "sigma": rows[2].sigma, "eta_t": 0.3}


def test_tau_sweep_extremes(bimodal, edm):
    """τ_k = 0 is pure Heun; a huge τ_k is Euler after the first step."""
    grid = edm_reference_grid(edm, 8)
    rows = tau_sweep(bimodal, edm, grid, taus=(1e9, 0.0), n_samples=8, substeps=32)
    assert [r.tau_k for r in rows] == [0.0, 1e9]
    assert rows[0].nfe_per_step == pytest.approx(15 / 8)
    assert rows[1].nfe_per_step == pytest.approx(9 / 8)
    assert all(r.endpoint_w2 >= 0.0 for r in rows)


def test_profile_rises_counts_relative_jumps():
    assert profile_rises([0.2, 0.19, 0.2, 0.1]) == []
    assert profile_rises([0.2, 0.1, 0.15, 0.1]) == [1]
    assert profile_rises([0.01, 0.2, 0.1], start=1) == []
    assert profile_rises([0.01, 0.2, 0.1]) == [0]


def test_profile_rises_ignores_negligible_steps():
    """A rise among values under slack × peak does not count."""
    assert profile_rises([0.2, 0.1, 1e-6, 1e-3]) == []
    assert profile_rises([0.5], start=0) == []


def test_has_interior_peak():
    assert has_interior_peak([0.1, 0.3, 0.2])
    assert not has_interior_peak([0.3, 0.2, 0.1])
    assert not has_interior_peak([0.1, 0.2, 0.3])


def test_first_bound_step(edm):
    metas = [StepMeta(0.1, 0.0, limited_by="cap"), StepMeta(0.1, 1.0), StepMeta(0.1, 0.0, limited_by="terminal")]
    schedule = TimestepSchedule([3.0, 2.0, 1.0, 0.0], [3.0, 2.0, 1.0, 0.0], metas)
    assert first_bound_step(schedule) == 1
    assert first_bound_step(edm_reference_grid(edm, 4)) == 0


def test_step_policy_saves_calls_at_heun_accuracy(standard_normal, edm):
    """Euler on the flat early steps costs under 10% of the endpoint W₂ and saves evaluations."""
    grid = edm_reference_grid(edm, 18)
    heun, step = tau_sweep(standard_normal, edm, grid, taus=(0.0, 2e-4), n_samples=256, substeps=128)
    assert step.nfe_per_step < heun.nfe_per_step == pytest.approx(35 / 18)
    assert step.endpoint_w2 <= 1.1 * heun.endpoint_w2


@pytest.mark.slow
@pytest.mark.parametrize("name", sorted(PRESETS))
def test_curvature_grows_as_noise_falls(name, edm):
    """Mean κ̂_rel rises monotonically as σ falls along the EDM path."""
    rows = curvature_sweep(PRESETS[name](), edm, log_sigma_grid(edm, 40), n_samples=256)
    assert curvature_trend(rows) < -0.9
