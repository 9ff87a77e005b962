"""Tests for the Gaussian-mixture oracle."""

import math

import numpy as np
import pytest
from scipy import integrate

from pfode_lab.engine.rng import stream
from pfode_lab.errors import ConfigError, DomainError
from pfode_lab.models.mixture import GaussianMixture


def _quadrature_denoiser(gm: GaussianMixture, x: float, sigma: float) -> float:
    """E[x0 | x] in 1-D by direct integration against the mixture density."""

    def density(x0):
        return sum(
            w * math.exp(-0.5 * (x0 - mu[0]) ** 2 / c[0][0]) / math.sqrt(2 * math.pi * c[0][0])
            for w, mu, c in zip(gm.weights, gm.means, gm.covs)
        )

    def likelihood(x0):
        return math.exp(-0.5 * (x - x0) ** 2 / sigma**2)

    points = [float(mu[0]) for mu in gm.means]
    num, _ = integrate.quad(lambda x0: x0 * density(x0) * likelihood(x0), -15, 15, points=points, limit=200)
    den, _ = integrate.quad(lambda x0: density(x0) * likelihood(x0), -15, 15, points=points, limit=200)
    return num / den


@pytest.mark.parametrize("x,sigma", [(0.3, 0.5), (-2.5, 1.0), (1.4, 0.2), (4.0, 3.0)])
def test_denoiser_matches_quadrature(bimodal, x, sigma):
    """The closed-form posterior mean agrees with numerical integration."""
    expected = _quadrature_denoiser(bimodal, x, sigma)
    assert bimodal.denoise(np.array([x]), sigma).denoised[0] == pytest.approx(expected, rel=1e-7, abs=1e-9)


def test_standard_normal_denoiser(standard_normal):
    """N(0, 1) data: D(x; σ) = x/(1+σ²)."""
    x = np.array([[0.7], [-2.0]])
    ev = standard_normal.denoise(x, 2.0, want_jacobian=True, want_sigma_deriv=True)
    np.testing.assert_allclose(ev.denoised, x / 5.0)
    np.testing.assert_allclose(ev.jacobian[:, 0, 0], [0.2, 0.2])
    np.testing.assert_allclose(ev.sigma_deriv, -2.0 * 2.0 * x / 25.0)


def test_jacobian_matches_finite_differences(anisotropic):
    """∂D/∂x agrees with central differences in every direction."""
    x, sigma, h = np.array([0.4, -0.3]), 0.7, 1e-6
    jac = anisotropic.denoise(x, sigma, want_jacobian=True).jacobian
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd = (anisotropic.denoise(x + e, sigma).denoised - anisotropic.denoise(x - e, sigma).denoised) / (2 * h)
        np.testing.assert_allclose(jac[:, j], fd, atol=1e-7)


def test_sigma_derivative_matches_finite_differences(anisotropic):
    """∂D/∂σ agrees with a central difference in σ."""
    x, sigma, h = np.array([1.1, 0.2]), 0.9, 1e-6
    exact = anisotropic.denoise(x, sigma, want_sigma_deriv=True).sigma_deriv
    fd = (anisotropic.denoise(x, sigma + h).denoised - anisotropic.denoise(x, sigma - h).denoised) / (2 * h)
    np.testing.assert_allclose(exact, fd, atol=1e-7)


def test_batch_matches_single_queries(anisotropic):
    """A batch query returns the rows of the single queries."""
    batch = np.array([[0.0, 0.0], [1.0, -1.0], [-2.0, 0.5]])
    ev = anisotropic.denoise(batch, 0.3, want_jacobian=True)
    for row, denoised, jac in zip(batch, ev.denoised, ev.jacobian):
        single = anisotropic.denoise(row, 0.3, want_jacobian=True)
        np.testing.assert_allclose(single.denoised, denoised)
        np.testing.assert_allclose(single.jacobian, jac)


def test_responsibilities_sum_to_one(anisotropic):
    """Posterior component weights form a distribution."""
    resp = anisotropic.responsibilities(np.array([[0.0, 0.0], [5.0, 5.0]]), 0.1)
    np.testing.assert_allclose(resp.sum(axis=1), 1.0)
    assert np.all(resp >= 0.0)


def test_sample_moments(bimodal):
    """Sample mean matches Σ w_k μ_k."""
    draws = bimodal.sample(20000, stream(3, "test"))
    assert draws.shape == (20000, 1)
    assert draws.mean() == pytest.approx(0.4 * -2.0 + 0.6 * 1.5, abs=0.05)


def test_invalid_mixtures_rejected():
    """Weights must sum to one and covariances must be PSD."""
    with pytest.raises(ConfigError):
        GaussianMixture([0.5, 0.4], [[0.0], [1.0]], [[[1.0]], [[1.0]]])
    with pytest.raises(ConfigError):
        GaussianMixture([1.0], [[0.0, 0.0]], [[[1.0, 2.0], [2.0, 1.0]]])
    with pytest.raises(ConfigError):
        GaussianMixture([1.0], [[0.0, 0.0]], [[[1.0]]])


def test_denoiser_domain_checks(bimodal):
    """σ must be positive and points must match the dimension."""
    with pytest.raises(DomainError):
        bimodal.denoise(np.array([0.0]), 0.0)
    with pytest.raises(DomainError):
        bimodal.denoise(np.array([0.0, 1.0]), 1.0)


def test_mixture_is_read_only(bimodal):
    """Parameters cannot be modified after construction."""
    with pytest.raises(ValueError):
        bimodal.means[0, 0] = 5.0


def test_dict_round_trip(anisotropic):
    """to_dict/from_dict preserve every parameter."""
    copy = GaussianMixture.from_dict(anisotropic.to_dict())
    np.testing.assert_array_equal(copy.weights, anisotropic.weights)
    np.testing.assert_array_equal(copy.means, anisotropic.means)
    np.testing.assert_array_equal(copy.covs, anisotropic.covs)


def test_from_dict_rejects_dimension_mismatch(bimodal):
    """A declared dim must match the components."""
    data = bimodal.to_dict()
    data["dim"] = 2
    with pytest.raises(ConfigError):
        GaussianMixture.from_dict(data)
