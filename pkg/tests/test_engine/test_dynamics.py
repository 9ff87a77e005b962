"""Tests for the PF-ODE velocity and curvature closed forms."""

import numpy as np
import pytest

from pfode_lab.engine.dynamics import (
    curvature,
    curvature_edm,
    curvature_general,
    curvature_ve,
    curvature_vp,
    denoiser_terms,
    velocity,
    velocity_jacobian,
)
from pfode_lab.engine.reference import reference_flow
from pfode_lab.errors import DomainError, SingularityError
from pfode_lab.models.parameterization import Parameterization, ParamKind
from tests.conftest import gaussian_xddot


def test_affine_field_velocity_and_curvature(linear_field, edm):
    """v = aσ + b and ẍ = a for the affine stub under EDM."""
    x = np.array([[0.3, 0.1], [-2.0, 4.0]])
    ev = velocity(linear_field, edm, x, 2.0)
    np.testing.assert_allclose(ev.v, np.broadcast_to([0.3 * 2.0 + 0.5, 0.3 * 2.0 - 1.0], x.shape))
    np.testing.assert_allclose(curvature(linear_field, edm, x, 2.0).xddot, 0.3)


def test_standard_normal_closed_forms(standard_normal, edm):
    """N(0, 1) under EDM: v = x·t/(1+t²), ẍ = x/(1+t²)²."""
    x, t = np.array([1.7]), 0.8
    np.testing.assert_allclose(velocity(standard_normal, edm, x, t).v, x * t / (1 + t * t), rtol=1e-9)
    np.testing.assert_allclose(curvature(standard_normal, edm, x, t).xddot, gaussian_xddot(x, t), rtol=1e-8)


@pytest.mark.parametrize("kind,fn", [(ParamKind.EDM, curvature_edm), (ParamKind.VE, curvature_ve), (ParamKind.VP, curvature_vp)])
def test_specialized_matches_general(anisotropic, kind, fn):
    """Each specialised formula reproduces the general expression."""
    p = Parameterization(kind)
    gen = np.random.default_rng(0)
    for sigma in (0.05, 0.7, 4.0, 30.0):
        t = float(p.sigma_inv(sigma))
        x = float(p.scale(t)) * (gen.normal(size=(3, 2)) * (1.0 + sigma))
        special, general = fn(anisotropic, p, x, t), curvature_general(anisotropic, p, x, t)
        np.testing.assert_allclose(special.xddot, general.xddot, rtol=1e-9, atol=1e-12 * np.max(np.abs(general.xddot)))
        np.testing.assert_allclose(special.eps_dot, general.eps_dot, rtol=1e-9, atol=1e-12 * np.max(np.abs(general.eps_dot)))


def test_specialized_requires_matching_kind(anisotropic, vp):
    """The EDM form refuses a VP parameterization."""
    with pytest.raises(DomainError):
        curvature_edm(anisotropic, vp, np.zeros(2), 0.5)


@pytest.mark.parametrize("kind", [ParamKind.EDM, ParamKind.VP, ParamKind.VE])
def test_curvature_matches_trajectory_differences(bimodal, kind):
    """ẍ agrees with a second difference of the reference flow."""
    p = Parameterization(kind)
    t = float(p.sigma_inv(1.3))
    h = 1e-3 * t
    y = np.array([0.9 * float(p.scale(t + h))])
    x = reference_flow(bimodal, p, y, t + h, t, 64)
    x_lo = reference_flow(bimodal, p, y, t + h, t - h, 64)
    fd = (y - 2.0 * x + x_lo) / h**2
    np.testing.assert_allclose(curvature(bimodal, p, x, t).xddot, fd, rtol=1e-4, atol=1e-8)


@pytest.mark.parametrize("kind", [ParamKind.EDM, ParamKind.VP, ParamKind.VE])
def test_eps_dot_matches_trajectory_differences(anisotropic, kind):
    """ε̇ agrees with a central difference of ε along the flow."""
    p = Parameterization(kind)
    t = float(p.sigma_inv(0.8))
    h = 1e-3 * t
    y = np.array([0.5, -0.4]) * float(p.scale(t + h))
    x = reference_flow(anisotropic, p, y, t + h, t, 64)
    x_lo = reference_flow(anisotropic, p, y, t + h, t - h, 64)
    fd = (velocity(anisotropic, p, y, t + h).eps - velocity(anisotropic, p, x_lo, t - h).eps) / (2.0 * h)
    np.testing.assert_allclose(curvature(anisotropic, p, x, t).eps_dot, fd, rtol=1e-4, atol=1e-8)


def test_velocity_below_floor_raises(bimodal, edm):
    """The drift is undefined at σ = 0."""
    with pytest.raises(SingularityError):
        velocity(bimodal, edm, np.array([0.1]), 0.0)


def test_curvature_below_floor_is_singular(bimodal, edm):
    """Curvature at σ = 0 returns an infinite sentinel instead of raising."""
    ev = curvature_general(bimodal, edm, np.array([[0.1], [0.2]]), 0.0)
    assert ev.singular
    assert np.all(np.isinf(ev.xddot))


def test_velocity_jacobian_matches_finite_differences(anisotropic, vp):
    """∂v/∂x agrees with central differences of the drift."""
    t, h = float(vp.sigma_inv(0.6)), 1e-6
    x = np.array([0.3, 0.2]) * float(vp.scale(t))
    jac = velocity_jacobian(anisotropic, vp, x, t)
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd = (velocity(anisotropic, vp, x + e, t).v - velocity(anisotropic, vp, x - e, t).v) / (2 * h)
        np.testing.assert_allclose(jac[:, j], fd, rtol=1e-6, atol=1e-6)


def test_scaled_frame_sigma_derivative(anisotropic, vp):
    """Under VP, ∂D/∂σ includes the change of the scale s(σ)."""
    x, sigma, h = np.array([0.2, -0.1]), 1.5, 1e-6
    exact = denoiser_terms(anisotropic, vp, x, sigma, want_sigma_deriv=True).sigma_deriv
    hi = denoiser_terms(anisotropic, vp, x, sigma + h).denoised
    lo = denoiser_terms(anisotropic, vp, x, sigma - h).denoised
    np.testing.assert_allclose(exact, (hi - lo) / (2 * h), atol=1e-7)


def test_batch_matches_single_states(anisotropic, ve):
    """Batch velocity/curvature rows equal the single-state results."""
    t = 2.0
    batch = np.array([[0.0, 1.0], [2.0, -1.0]])
    v_batch = velocity(anisotropic, ve, batch, t)
    k_batch = curvature(anisotropic, ve, batch, t)
    for i, row in enumerate(batch):
        np.testing.assert_allclose(velocity(anisotropic, ve, row, t).v, v_batch.v[i])
        np.testing.assert_allclose(curvature(anisotropic, ve, row, t).xddot, k_batch.xddot[i])
    assert k_batch.norm.shape == (2,)
