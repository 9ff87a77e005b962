"""Timestep schedules and the error-budget/weight schedules used to build them."""

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from pfode_lab.errors import ConfigError, DomainError

LIMITS = ("bound", "cap", "terminal")


@dataclass
class StepMeta:
    """What the scheduler knew when it committed one step."""

    eta_used: float
    s_hat: float
    linesearch_iters: int = 0
    dt_trial: Optional[float] = None
    dt: Optional[float] = None
    limited_by: str = "bound"
    s_hat_realized: Optional[float] = None

    def __post_init__(self):
        if self.limited_by not in LIMITS:
            raise ConfigError(f"limited_by must be one of {LIMITS}, got {self.limited_by!r}")

    def to_dict(self) -> dict:
        data = {"eta_used": self.eta_used, "s_hat": self.s_hat, "linesearch_iters": self.linesearch_iters}
        for key in ("dt_trial", "dt", "s_hat_realized"):
            value = getattr(self, key)
            if value is not None:
                data[key] = value
        data["limited_by"] = self.limited_by
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "StepMeta":
        try:
            return cls(
                eta_used=float(data["eta_used"]),
                s_hat=float(data["s_hat"]),
                linesearch_iters=int(data.get("linesearch_iters", 0)),
                dt_trial=None if data.get("dt_trial") is None else float(data["dt_trial"]),
                dt=None if data.get("dt") is None else float(data["dt"]),
                limited_by=str(data.get("limited_by", "bound")),
                s_hat_realized=None if data.get("s_hat_realized") is None else float(data["s_hat_realized"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed per-step entry {data!r}: {exc}") from exc


@dataclass(eq=False)
class TimestepSchedule:
    """Strictly decreasing time grid ending at exactly 0.

    `per_step` is either empty (fixed grids) or holds one StepMeta per step.
    """

    times: np.ndarray
    sigmas: np.ndarray
    per_step: list[StepMeta] = field(default_factory=list)
    total_nfe: int = 0
    source: str = "custom"

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.sigmas = np.asarray(self.sigmas, dtype=float)
        if self.times.ndim != 1 or self.times.shape != self.sigmas.shape:
            raise DomainError(f"times and sigmas must be 1-D of equal length, got {self.times.shape}, {self.sigmas.shape}")
        if len(self.times) < 2:
            raise DomainError("a schedule needs at least two time points")
        if not (np.all(np.isfinite(self.times)) and np.all(np.isfinite(self.sigmas))):
            raise DomainError("schedule contains non-finite values")
        if np.any(np.diff(self.times) >= 0.0):
            raise DomainError("schedule times must be strictly decreasing")
        if self.times[-1] != 0.0 or self.sigmas[-1] != 0.0:
            raise DomainError("schedule must end at t = 0 and sigma = 0")
        if self.per_step and len(self.per_step) != self.num_steps:
            raise DomainError(f"expected {self.num_steps} per-step entries, got {len(self.per_step)}")

    @property
    def num_steps(self) -> int:
        return len(self.times) - 1

    @property
    def dts(self) -> np.ndarray:
        """Positive step lengths t_i - t_{i+1}."""
        return -np.diff(self.times)

    @property
    def t0(self) -> float:
        return float(self.times[0])

    def steps(self):
        """Yield (index, t_from, t_to) for every step."""
        for i in range(self.num_steps):
            yield i, float(self.times[i]), float(self.times[i + 1])

    def eta_proxies(self, proxy: str = "budget") -> np.ndarray:
        """Per-step η values for resampling: committed budgets or realised Δt²Ŝ/2."""
        if not self.per_step:
            raise DomainError("schedule carries no per-step metadata to resample from")
        if proxy == "budget":
            return np.array([m.eta_used for m in self.per_step])
        if proxy == "realized":
            dts = self.dts
            out = []
            for dt, meta in zip(dts, self.per_step):
                s = meta.s_hat if meta.s_hat_realized is None else meta.s_hat_realized
                out.append(0.5 * dt * dt * s)
            return np.array(out)
        raise ConfigError(f"unknown eta proxy {proxy!r}; use 'budget' or 'realized'")


@dataclass(frozen=True)
class EtaSchedule:
    """Error budget η(σ) = (η_max − η_min)(σ/σ_max)^p + η_min."""

    eta_min: float = 0.02
    eta_max: float = 0.20
    p: float = 1.0

    def __post_init__(self):
        if not self.eta_min > 0.0:
            raise ConfigError(f"eta_min must be positive, got {self.eta_min}")
        if self.eta_max < self.eta_min:
            raise ConfigError(f"eta_max must be >= eta_min, got {self.eta_max} < {self.eta_min}")
        if self.p < 0.0:
            raise ConfigError(f"p must be non-negative, got {self.p}")

    @classmethod
    def constant(cls, eta: float) -> "EtaSchedule":
        return cls(eta_min=eta, eta_max=eta, p=1.0)

    def __call__(self, sigma: Union[float, np.ndarray], sigma_max: float):
        sigma = np.asarray(sigma, dtype=float)
        ratio = np.power(sigma / sigma_max, self.p)
        eta = self.eta_min + (self.eta_max - self.eta_min) * ratio
        eta = np.where(ratio == 1.0, self.eta_max, eta)
        # 0**0 is 1 when p = 0
        eta = np.where(sigma == 0.0, self.eta_min, eta)
        return float(eta) if eta.ndim == 0 else eta


@dataclass(frozen=True)
class ResampleWeights:
    """Late-step emphasis g(σ) = (σ/σ_max)^{-q}, w = g²."""

    q: float = 0.25

    def __post_init__(self):
        if self.q < 0.0:
            raise ConfigError(f"q must be non-negative, got {self.q}")

    def g(self, sigma, sigma_max: float):
        value = np.power(np.asarray(sigma, dtype=float) / sigma_max, -self.q)
        return float(value) if value.ndim == 0 else value

    def w(self, sigma, sigma_max: float):
        value = np.asarray(self.g(sigma, sigma_max)) ** 2
        return float(value) if value.ndim == 0 else value
