"""Named Gaussian-mixture presets used by docs, tests and the `presets` command."""

import math
from typing import Callable

from pfode_lab.errors import ConfigError
from pfode_lab.models.mixture import GaussianMixture

PRESET_PREFIX = "preset:"


def two_moons_gmm_8() -> GaussianMixture:
    """Eight isotropic blobs along two interleaved half-moons."""
    angles = [0.0, math.pi / 3.0, 2.0 * math.pi / 3.0, math.pi]
    upper = [[math.cos(a), math.sin(a)] for a in angles]
    lower = [[1.0 - math.cos(a), 0.5 - math.sin(a)] for a in angles]
    cov = [[0.015, 0.0], [0.0, 0.015]]
    return GaussianMixture(weights=[0.125] * 8, means=upper + lower, covs=[cov] * 8)


def anisotropic_2d() -> GaussianMixture:
    return GaussianMixture(
        weights=[0.5, 0.3, 0.2],
        means=[[-1.5, 0.0], [1.5, 0.5], [0.0, -1.8]],
        covs=[
            [[0.30, 0.18], [0.18, 0.15]],
            [[0.05, 0.0], [0.0, 0.60]],
            [[0.40, -0.10], [-0.10, 0.08]],
        ],
    )


def bimodal_1d() -> GaussianMixture:
    return GaussianMixture(weights=[0.4, 0.6], means=[[-2.0], [1.5]], covs=[[[0.25]], [[0.09]]])


def trimodal_1d() -> GaussianMixture:
    return GaussianMixture(
        weights=[0.3, 0.45, 0.25],
        means=[[-3.0], [0.5], [3.5]],
        covs=[[[0.16]], [[0.04]], [[0.36]]],
    )


def single_gaussian_1d() -> GaussianMixture:
    """Standard normal; its flow is known in closed form."""
    return GaussianMixture(weights=[1.0], means=[[0.0]], covs=[[[1.0]]])


PRESETS: dict[str, Callable[[], GaussianMixture]] = {
    "two-moons-gmm-8": two_moons_gmm_8,
    "anisotropic-2d": anisotropic_2d,
    "bimodal-1d": bimodal_1d,
    "trimodal-1d": trimodal_1d,
    "single-gaussian-1d": single_gaussian_1d,
}


def preset_names() -> list[str]:
    return list(PRESETS)


def get_preset(name: str) -> GaussianMixture:
    if name.startswith(PRESET_PREFIX):
        name = name[len(PRESET_PREFIX):]
    try:
        return PRESETS[name]()
    except KeyError as exc:
        raise ConfigError(f"unknown mixture preset {name!r}; choose from {', '.join(PRESETS)}") from exc
