"""Noise/scale schedules σ(t), s(t) and their time derivatives for EDM, VP and VE."""

from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np

from pfode_lab.errors import ConfigError, DomainError, SingularityError
from pfode_lab.models.schedule import TimestepSchedule

ArrayLike = Union[float, np.ndarray]


class ParamKind(Enum):
    EDM = "edm"
    VP = "vp"
    VE = "ve"


def _out(value: np.ndarray) -> ArrayLike:
    """Return a python float for 0-d results, the array otherwise."""
    value = np.asarray(value, dtype=float)
    return float(value) if value.ndim == 0 else value


@dataclass(frozen=True)
class Parameterization:
    """The (σ(t), s(t)) pair of a diffusion parameterization.

    The valid time range is [0, T] with σ(T) = sigma_max; `t_max` exposes T.
    """

    kind: ParamKind = ParamKind.EDM
    sigma_min: float = 0.002
    sigma_max: float = 80.0
    beta_d: float = 19.9
    beta_min: float = 0.1
    sigma_floor: float = 1e-8

    def __post_init__(self):
        if not isinstance(self.kind, ParamKind):
            raise ConfigError(f"unknown parameterization kind: {self.kind!r}")
        if not (np.isfinite(self.sigma_min) and np.isfinite(self.sigma_max)):
            raise ConfigError("sigma_min and sigma_max must be finite")
        if not 0.0 < self.sigma_min < self.sigma_max:
            raise ConfigError(f"need 0 < sigma_min < sigma_max, got {self.sigma_min}, {self.sigma_max}")
        if self.kind is ParamKind.VP and (self.beta_d <= 0.0 or self.beta_min < 0.0):
            raise ConfigError(f"VP needs beta_d > 0 and beta_min >= 0, got {self.beta_d}, {self.beta_min}")

    # -- time range -----------------------------------------------------------

    @property
    def t_max(self) -> float:
        """Time at which σ reaches sigma_max."""
        return float(self.sigma_inv(self.sigma_max))

    @property
    def t_min(self) -> float:
        """Time at which σ reaches sigma_min."""
        return float(self.sigma_inv(self.sigma_min))

    def _check_time(self, t: ArrayLike) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(t < 0.0) or not np.all(np.isfinite(t)):
            raise DomainError(f"time must be finite and non-negative, got {t}")
        return t

    # -- VP helpers -----------------------------------------------------------

    def vp_exponent(self, t: ArrayLike) -> ArrayLike:
        """u(t) = ½β_d t² + β_min t, so that 1 + σ(t)² = e^{u(t)} under VP."""
        t = self._check_time(t)
        return _out(0.5 * self.beta_d * t * t + self.beta_min * t)

    def _vp_rate(self, t: np.ndarray) -> np.ndarray:
        return self.beta_min + self.beta_d * t

    # -- schedules ------------------------------------------------------------

    def sigma(self, t: ArrayLike) -> ArrayLike:
        """Noise level σ(t)."""
        t = self._check_time(t)
        if self.kind is ParamKind.EDM:
            return _out(t)
        if self.kind is ParamKind.VE:
            return _out(np.sqrt(t))
        return _out(np.sqrt(np.expm1(np.asarray(self.vp_exponent(t)))))

    def sigma_inv(self, sigma: ArrayLike) -> ArrayLike:
        """Time at which the schedule reaches the given noise level."""
        sigma = np.asarray(sigma, dtype=float)
        if np.any(sigma < 0.0) or not np.all(np.isfinite(sigma)):
            raise DomainError(f"noise level must be finite and non-negative, got {sigma}")
        if self.kind is ParamKind.EDM:
            return _out(sigma)
        if self.kind is ParamKind.VE:
            return _out(sigma * sigma)
        # positive root of ½β_d t² + β_min t − u = 0, written without cancellation
        u = np.log1p(sigma * sigma)
        return _out(2.0 * u / (self.beta_min + np.sqrt(self.beta_min**2 + 2.0 * self.beta_d * u)))

    def scale(self, t: ArrayLike) -> ArrayLike:
        """Scale s(t)."""
        t = self._check_time(t)
        if self.kind is ParamKind.VP:
            return _out(np.exp(-0.5 * np.asarray(self.vp_exponent(t))))
        return _out(np.ones_like(t))

    def scale_of_sigma(self, sigma: ArrayLike) -> ArrayLike:
        """Scale written as a function of the noise level (1/√(1+σ²) for VP)."""
        sigma = np.asarray(sigma, dtype=float)
        if self.kind is ParamKind.VP:
            return _out(1.0 / np.sqrt(1.0 + sigma * sigma))
        return _out(np.ones_like(sigma))

    def sigma_derivatives(self, t: ArrayLike) -> tuple[ArrayLike, ArrayLike]:
        """Closed-form (σ̇, σ̈)."""
        t = self._check_time(t)
        if self.kind is ParamKind.EDM:
            return _out(np.ones_like(t)), _out(np.zeros_like(t))

        sig = np.asarray(self.sigma(t))
        if np.any(sig < self.sigma_floor):
            raise SingularityError(f"sigma below floor {self.sigma_floor:g} at t={t}")

        if self.kind is ParamKind.VE:
            return _out(0.5 / sig), _out(-0.25 / sig**3)

        rate = self._vp_rate(t)
        inv = 1.0 / sig
        sigma_dot = 0.5 * rate * (sig + inv)
        sigma_ddot = 0.5 * self.beta_d * (sig + inv) + 0.25 * rate * rate * (sig - inv**3)
        return _out(sigma_dot), _out(sigma_ddot)

    def scale_derivatives(self, t: ArrayLike) -> tuple[ArrayLike, ArrayLike, ArrayLike]:
        """Closed-form (s, ṡ, s̈)."""
        t = self._check_time(t)
        if self.kind is not ParamKind.VP:
            return _out(np.ones_like(t)), _out(np.zeros_like(t)), _out(np.zeros_like(t))
        s = np.asarray(self.scale(t))
        rate = self._vp_rate(t)
        return _out(s), _out(-0.5 * rate * s), _out((0.25 * rate * rate - 0.5 * self.beta_d) * s)

    def to_dict(self) -> dict:
        data = {"kind": self.kind.value, "sigma_min": self.sigma_min, "sigma_max": self.sigma_max}
        if self.kind is ParamKind.VP:
            data.update(beta_d=self.beta_d, beta_min=self.beta_min)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "Parameterization":
        try:
            kind = ParamKind(str(data["kind"]).lower())
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"invalid parameterization kind in {data!r}") from exc
        extra = {key: float(data[key]) for key in ("sigma_min", "sigma_max", "beta_d", "beta_min") if data.get(key) is not None}
        return cls(kind=kind, **extra)


def edm_reference_grid(p: Parameterization, n_steps: int, rho: float = 7.0) -> TimestepSchedule:
    """EDM ρ-schedule with `n_steps` steps: σ_0 = σ_max, …, σ_{N-1} = σ_min, σ_N = 0."""
    if n_steps < 2:
        raise ConfigError(f"EDM grid needs at least 2 steps, got {n_steps}")
    if not rho > 0.0:
        raise ConfigError(f"rho must be positive, got {rho}")

    i = np.arange(n_steps, dtype=float)
    lo, hi = p.sigma_min ** (1.0 / rho), p.sigma_max ** (1.0 / rho)
    levels = (hi + i / (n_steps - 1) * (lo - hi)) ** rho
    levels[0], levels[-1] = p.sigma_max, p.sigma_min
    sigmas = np.append(levels, 0.0)
    times = np.asarray(p.sigma_inv(sigmas), dtype=float)
    times[-1] = 0.0
    return TimestepSchedule(times=times, sigmas=sigmas, source=f"edm-rho{rho:g}")
