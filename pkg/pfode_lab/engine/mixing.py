"""Λ(t) strategies mixing Euler (Λ = 1) and Heun (Λ = 0) outputs."""

import math
from abc import ABC, abstractmethod
from typing import Optional

from pfode_lab.errors import ConfigError
from pfode_lab.models.policy import LambdaKind, SolverPolicy


class MixingStrategy(ABC):
    """Abstract base class for Λ(t) schedules."""

    #: compute both solver outputs every step and blend them
    blends: bool = False

    @abstractmethod
    def weight(self, step: int, progress: float, kappa_hat: Optional[float]) -> float:
        """
        Euler weight Λ for one step.

        Args:
            step: Step index, 0 for the first step
            progress: Fraction of the log σ_max → log σ_min range already traversed
            kappa_hat: Cached relative curvature, None when unavailable

        Returns:
            Λ in [0, 1]
        """
        pass


class StepMix(MixingStrategy):
    """Euler below the curvature threshold, Heun otherwise; Heun when curvature is unknown."""

    def __init__(self, tau_k: float):
        self.tau_k = tau_k

    def weight(self, step: int, progress: float, kappa_hat: Optional[float]) -> float:
        if step == 0 or kappa_hat is None:
            return 0.0
        return 1.0 if kappa_hat < self.tau_k else 0.0


class LinearMix(MixingStrategy):
    blends = True

    def weight(self, step: int, progress: float, kappa_hat: Optional[float]) -> float:
        return 1.0 - progress


class CosineMix(MixingStrategy):
    blends = True

    def weight(self, step: int, progress: float, kappa_hat: Optional[float]) -> float:
        return 0.5 * (1.0 + math.cos(math.pi * progress))


class ConstantMix(MixingStrategy):
    """Fixed Λ; 1 and 0 reproduce pure Euler and pure Heun through the blend path."""

    blends = True

    def __init__(self, value: float):
        if not 0.0 <= value <= 1.0:
            raise ConfigError(f"constant mixing weight must lie in [0, 1], got {value}")
        self.value = value

    def weight(self, step: int, progress: float, kappa_hat: Optional[float]) -> float:
        return self.value


class PureEuler(MixingStrategy):
    def weight(self, step: int, progress: float, kappa_hat: Optional[float]) -> float:
        return 1.0


class PureHeun(MixingStrategy):
    def weight(self, step: int, progress: float, kappa_hat: Optional[float]) -> float:
        return 0.0


def strategy_for(policy: SolverPolicy) -> MixingStrategy:
    """Build the Λ(t) strategy a policy describes."""
    if policy.lambda_kind is LambdaKind.STEP:
        return StepMix(policy.tau_k)
    if policy.lambda_kind is LambdaKind.LINEAR:
        return LinearMix()
    if policy.lambda_kind is LambdaKind.COSINE:
        return CosineMix()
    if policy.lambda_kind is LambdaKind.PURE_EULER:
        return PureEuler()
    return PureHeun()


def log_sigma_progress(sigma: float, sigma_hi: float, sigma_lo: float) -> float:
    """Normalized log-σ progress in [0, 1]."""
    if sigma <= 0.0:
        return 1.0
    span = math.log(sigma_hi) - math.log(sigma_lo)
    if span <= 0.0:
        return 1.0
    return min(1.0, max(0.0, (math.log(sigma_hi) - math.log(sigma)) / span))
