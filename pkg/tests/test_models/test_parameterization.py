"""Tests for noise/scale parameterizations."""

import numpy as np
import pytest

from pfode_lab.errors import ConfigError, DomainError, SingularityError
from pfode_lab.models.parameterization import Parameterization, ParamKind, edm_reference_grid

KINDS = [ParamKind.EDM, ParamKind.VP, ParamKind.VE]


@pytest.mark.parametrize("kind", KINDS)
def test_sigma_inverse_round_trip(kind):
    """σ(σ⁻¹(σ)) reproduces the noise level across the whole range."""
    p = Parameterization(kind)
    levels = np.geomspace(p.sigma_min, p.sigma_max, 50)
    np.testing.assert_allclose(p.sigma(p.sigma_inv(levels)), levels, rtol=1e-10)


@pytest.mark.parametrize("kind", KINDS)
def test_t_max_reaches_sigma_max(kind):
    """T is the time where σ hits sigma_max."""
    p = Parameterization(kind)
    assert p.sigma(p.t_max) == pytest.approx(p.sigma_max, rel=1e-12)
    assert p.sigma(p.t_min) == pytest.approx(p.sigma_min, rel=1e-10)


def test_time_range_per_kind():
    """EDM uses σ = t and VE uses σ = √t."""
    assert Parameterization(ParamKind.EDM).t_max == pytest.approx(80.0)
    assert Parameterization(ParamKind.VE).t_max == pytest.approx(6400.0)
    assert Parameterization(ParamKind.VP).t_max < 1.0


def test_vp_derivatives_match_finite_differences(vp):
    """Closed-form σ̇, σ̈, ṡ, s̈ agree with central differences."""
    t, h = 0.5, 1e-4
    sigma_dot, sigma_ddot = vp.sigma_derivatives(t)
    assert sigma_dot == pytest.approx((vp.sigma(t + h) - vp.sigma(t - h)) / (2 * h), rel=1e-6)
    assert sigma_ddot == pytest.approx((vp.sigma(t + h) - 2 * vp.sigma(t) + vp.sigma(t - h)) / h**2, rel=1e-5)

    s, s_dot, s_ddot = vp.scale_derivatives(t)
    assert s == pytest.approx(vp.scale(t))
    assert s_dot == pytest.approx((vp.scale(t + h) - vp.scale(t - h)) / (2 * h), rel=1e-6)
    assert s_ddot == pytest.approx((vp.scale(t + h) - 2 * vp.scale(t) + vp.scale(t - h)) / h**2, rel=1e-5)


def test_ve_derivatives(ve):
    """VE: σ̇ = 1/(2σ), σ̈ = −1/(4σ³)."""
    sigma_dot, sigma_ddot = ve.sigma_derivatives(4.0)
    assert sigma_dot == pytest.approx(0.25)
    assert sigma_ddot == pytest.approx(-1.0 / 32.0)


def test_edm_is_unit_speed(edm):
    """EDM has σ̇ = 1, σ̈ = 0 and unit scale, even at t = 0."""
    assert edm.sigma_derivatives(0.0) == (1.0, 0.0)
    assert edm.scale_derivatives(3.0) == (1.0, 0.0, 0.0)


def test_vp_scale_of_sigma_matches_scale(vp):
    """s(t) = 1/√(1+σ(t)²) under VP."""
    times = np.linspace(0.01, vp.t_max, 7)
    np.testing.assert_allclose(vp.scale_of_sigma(vp.sigma(times)), vp.scale(times), rtol=1e-12)


def test_negative_time_rejected(edm):
    """Times below zero are outside the domain."""
    with pytest.raises(DomainError):
        edm.sigma(-1.0)


@pytest.mark.parametrize("kind", [ParamKind.VP, ParamKind.VE])
def test_derivatives_below_floor_are_singular(kind):
    """σ̇ is not defined where σ drops below the floor."""
    p = Parameterization(kind)
    with pytest.raises(SingularityError):
        p.sigma_derivatives(0.0)


def test_invalid_ranges_rejected():
    """sigma_min must be positive and below sigma_max."""
    with pytest.raises(ConfigError):
        Parameterization(ParamKind.EDM, sigma_min=1.0, sigma_max=0.5)
    with pytest.raises(ConfigError):
        Parameterization(ParamKind.VP, beta_d=0.0)


@pytest.mark.parametrize("kind", KINDS)
def test_dict_round_trip(kind):
    """to_dict/from_dict reproduce an equal parameterization."""
    p = Parameterization(kind, sigma_min=0.01, sigma_max=20.0)
    assert Parameterization.from_dict(p.to_dict()) == p


def test_from_dict_rejects_unknown_kind():
    """Unknown kinds are configuration errors."""
    with pytest.raises(ConfigError):
        Parameterization.from_dict({"kind": "subvp"})


@pytest.mark.parametrize("kind", KINDS)
def test_edm_reference_grid_shape(kind):
    """N steps, σ_0 = σ_max, σ_{N−1} = σ_min, σ_N = 0."""
    p = Parameterization(kind)
    grid = edm_reference_grid(p, 18)
    assert grid.num_steps == 18
    assert grid.sigmas[0] == p.sigma_max
    assert grid.sigmas[-2] == p.sigma_min
    assert grid.sigmas[-1] == 0.0
    assert grid.times[-1] == 0.0
    assert np.all(np.diff(grid.times) < 0.0)
    assert grid.source == "edm-rho7"


def test_edm_reference_grid_rejects_single_step(edm):
    """At least two steps are needed."""
    with pytest.raises(ConfigError):
        edm_reference_grid(edm, 1)
