"""Shared fixtures: parameterizations, mixture presets and analytic stub denoisers."""

import numpy as np
import pytest

from pfode_lab.models.mixture import Denoiser, OracleEval
from pfode_lab.models.parameterization import Parameterization, ParamKind
from pfode_lab.presets import anisotropic_2d, bimodal_1d, single_gaussian_1d
from pfode_lab.verify import CountingDenoiser


class AffineField(Denoiser):
    """D(x; σ) = x − σ(aσ + b), so the EDM velocity is v = aσ + b everywhere."""

    def __init__(self, a: float = 0.0, b=(1.0,)):
        self.a = float(a)
        self.b = np.asarray(b, dtype=float)

    @property
    def dim(self) -> int:
        return len(self.b)

    def denoise(self, x, sigma, want_jacobian=False, want_sigma_deriv=False) -> OracleEval:
        x = np.asarray(x, dtype=float)
        denoised = x - sigma * (self.a * sigma + self.b)
        jacobian = None
        if want_jacobian:
            jacobian = np.broadcast_to(np.eye(self.dim), x.shape + (self.dim,)).copy()
        sigma_deriv = None
        if want_sigma_deriv:
            sigma_deriv = np.broadcast_to(-(2.0 * self.a * sigma + self.b), x.shape).copy()
        return OracleEval(denoised, (denoised - x) / sigma**2, jacobian, sigma_deriv)

    def sample(self, n, gen):
        return np.zeros((n, self.dim))


def gaussian_flow(x0, t0: float, t: float):
    """Exact EDM flow of N(0, 1) data from (x0, t0) to time t."""
    return np.asarray(x0) * np.sqrt((1.0 + t * t) / (1.0 + t0 * t0))


def gaussian_xddot(x, t: float):
    """Closed-form ẍ of the N(0, 1) EDM flow through (x, t)."""
    return np.asarray(x) / (1.0 + t * t) ** 2


@pytest.fixture
def edm():
    return Parameterization(ParamKind.EDM)


@pytest.fixture
def vp():
    return Parameterization(ParamKind.VP)


@pytest.fixture
def ve():
    return Parameterization(ParamKind.VE)


@pytest.fixture
def bimodal():
    return bimodal_1d()


@pytest.fixture
def anisotropic():
    return anisotropic_2d()


@pytest.fixture
def standard_normal():
    return single_gaussian_1d()


@pytest.fixture
def constant_field():
    return AffineField(0.0, (0.5, -1.0))


@pytest.fixture
def linear_field():
    return AffineField(0.3, (0.5, -1.0))


@pytest.fixture
def counting(bimodal):
    return CountingDenoiser(bimodal)
