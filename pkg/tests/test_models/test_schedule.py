"""Tests for timestep schedules, error budgets and resampling weights."""

import numpy as np
import pytest

from pfode_lab.errors import ConfigError, DomainError
from pfode_lab.models.schedule import EtaSchedule, ResampleWeights, StepMeta, TimestepSchedule


def test_schedule_requires_decreasing_times():
    """Times must strictly decrease."""
    with pytest.raises(DomainError):
        TimestepSchedule(times=[1.0, 1.0, 0.0], sigmas=[1.0, 1.0, 0.0])


def test_schedule_must_end_at_zero():
    """The last point is exactly t = 0, σ = 0."""
    with pytest.raises(DomainError):
        TimestepSchedule(times=[2.0, 1.0, 0.5], sigmas=[2.0, 1.0, 0.5])


def test_schedule_per_step_length_checked():
    """per_step is empty or has one entry per step."""
    with pytest.raises(DomainError):
        TimestepSchedule(times=[2.0, 1.0, 0.0], sigmas=[2.0, 1.0, 0.0], per_step=[StepMeta(0.1, 1.0)])


def test_schedule_steps_and_dts():
    """steps() walks consecutive pairs; dts are positive."""
    schedule = TimestepSchedule(times=[2.0, 1.5, 0.5, 0.0], sigmas=[2.0, 1.5, 0.5, 0.0])
    assert list(schedule.steps()) == [(0, 2.0, 1.5), (1, 1.5, 0.5), (2, 0.5, 0.0)]
    np.testing.assert_allclose(schedule.dts, [0.5, 1.0, 0.5])
    assert schedule.t0 == 2.0


def test_realized_eta_proxy():
    """The realised proxy is Δt²·Ŝ_realized/2, falling back to Ŝ."""
    metas = [StepMeta(0.1, 4.0, s_hat_realized=2.0), StepMeta(0.1, 8.0)]
    schedule = TimestepSchedule(times=[2.0, 1.0, 0.0], sigmas=[2.0, 1.0, 0.0], per_step=metas)
    np.testing.assert_allclose(schedule.eta_proxies("realized"), [1.0, 4.0])
    np.testing.assert_allclose(schedule.eta_proxies("budget"), [0.1, 0.1])
    with pytest.raises(ConfigError):
        schedule.eta_proxies("median")


def test_eta_proxies_need_metadata():
    """Fixed grids carry nothing to resample from."""
    schedule = TimestepSchedule(times=[1.0, 0.0], sigmas=[1.0, 0.0])
    with pytest.raises(DomainError):
        schedule.eta_proxies()


def test_step_meta_round_trip():
    """StepMeta survives to_dict/from_dict."""
    meta = StepMeta(0.05, 3.0, linesearch_iters=2, dt_trial=0.4, dt=0.3, limited_by="cap", s_hat_realized=2.5)
    assert StepMeta.from_dict(meta.to_dict()) == meta


def test_step_meta_rejects_unknown_limit():
    """limited_by is one of bound/cap/terminal."""
    with pytest.raises(ConfigError):
        StepMeta(0.1, 1.0, limited_by="budget")


def test_eta_schedule_endpoints():
    """η(σ_max) = η_max exactly and η(0) = η_min."""
    eta = EtaSchedule(0.02, 0.2, 1.5)
    assert eta(80.0, 80.0) == 0.2
    assert eta(0.0, 80.0) == pytest.approx(0.02)
    values = eta(np.linspace(0.0, 80.0, 20), 80.0)
    assert np.all(np.diff(values) >= 0.0)


def test_constant_eta_schedule():
    """A constant budget ignores σ."""
    eta = EtaSchedule.constant(0.05)
    assert eta(3.0, 80.0) == 0.05
    assert eta(80.0, 80.0) == 0.05


def test_flat_exponent_keeps_eta_min_at_zero():
    """With p = 0 the budget is η_max for σ > 0 and still η_min at σ = 0."""
    eta = EtaSchedule(0.02, 0.2, 0.0)
    assert eta(0.0, 80.0) == 0.02
    assert eta(1.0, 80.0) == 0.2
    assert eta(80.0, 80.0) == 0.2
    values = eta(np.array([0.0, 0.5, 80.0]), 80.0)
    assert values.tolist() == [0.02, 0.2, 0.2]


@pytest.mark.parametrize("kwargs", [{"eta_min": 0.0}, {"eta_min": 0.3, "eta_max": 0.2}, {"p": -1.0}])
def test_eta_schedule_validation(kwargs):
    """Non-positive or inverted budgets are rejected."""
    with pytest.raises(ConfigError):
        EtaSchedule(**kwargs)


def test_resample_weights():
    """w = g² with g(σ_max) = 1, growing as σ shrinks; q = 0 is uniform."""
    weights = ResampleWeights(0.25)
    assert weights.w(80.0, 80.0) == pytest.approx(1.0)
    assert weights.g(0.1, 80.0) > weights.g(1.0, 80.0) > 1.0
    assert weights.w(5.0, 80.0) == pytest.approx(weights.g(5.0, 80.0) ** 2)
    assert ResampleWeights(0.0).w(0.01, 80.0) == 1.0
    with pytest.raises(ConfigError):
        ResampleWeights(-0.1)
