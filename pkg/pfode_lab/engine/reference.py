"""Ground truth for the oracle: exact marginal samples and a fine RK4 flow."""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from pfode_lab.engine import rng
from pfode_lab.engine.dynamics import velocity
from pfode_lab.errors import ConfigError, ConvergenceError, DomainError
from pfode_lab.models.mixture import Denoiser
from pfode_lab.models.parameterization import Parameterization

logger = logging.getLogger(__name__)

MIN_SUBSTEPS = 16


def sample_marginal(gm: Denoiser, p: Parameterization, t: float, n: int, seed: int, *keys) -> np.ndarray:
    """n draws of x = s(t)·(x0 + σ(t)·ε) with x0 from the mixture, shape (n, dim)."""
    if n < 0:
        raise DomainError(f"sample count must be non-negative, got {n}")
    gen = rng.stream(seed, "marginal", *keys)
    x0 = gm.sample(n, gen)
    noise = gen.standard_normal((n, gm.dim))
    return float(p.scale(t)) * (x0 + float(p.sigma(t)) * noise)


def prior_sample(p: Parameterization, dim: int, n: int, seed: int, *keys, t0: Optional[float] = None) -> np.ndarray:
    """Draws from the Gaussian prior s(t0)·σ(t0)·N(0, I); t0 defaults to T."""
    if t0 is None:
        t0 = p.t_max
    return float(p.scale(t0)) * float(p.sigma(t0)) * rng.gaussian(seed, (n, dim), "prior", *keys)


def _rk4(gm, p, x, t, dt):
    k1 = velocity(gm, p, x, t).v
    k2 = velocity(gm, p, x - 0.5 * dt * k1, t - 0.5 * dt).v
    k3 = velocity(gm, p, x - 0.5 * dt * k2, t - 0.5 * dt).v
    k4 = velocity(gm, p, x - dt * k3, t - dt).v
    return x - dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


def reference_flow(
    gm: Denoiser,
    p: Parameterization,
    x0: np.ndarray,
    t_from: float,
    t_to: float,
    substeps: int = 128,
    tail_sigma: float = 1e-5,
    check: bool = False,
) -> np.ndarray:
    """Integrate the PF-ODE from t_from down to t_to.

    Classical RK4 on `substeps` intervals uniform in log σ. Targets below
    `tail_sigma` are reached by integrating to tail_sigma and finishing with one
    Euler jump, where the denoiser limit takes over.
    """
    if substeps < MIN_SUBSTEPS:
        raise ConfigError(f"reference flow needs at least {MIN_SUBSTEPS} substeps, got {substeps}")
    if t_to > t_from:
        raise DomainError(f"reference flow runs backwards in time only, got {t_from} -> {t_to}")
    x = np.array(x0, dtype=float, copy=True)
    if t_to == t_from:
        return x
    if check:
        return richardson_check(gm, p, x, t_from, t_to, substeps, tail_sigma, raise_on_failure=True).state

    sigma_a = float(p.sigma(t_from))
    sigma_b = float(p.sigma(t_to))
    if sigma_a <= tail_sigma:
        return x - (t_from - t_to) * velocity(gm, p, x, t_from).v

    # RK4 nodes uniform in log σ, pinned to the exact endpoints
    sigma_end = max(sigma_b, tail_sigma)
    nodes = np.exp(np.linspace(np.log(sigma_a), np.log(sigma_end), substeps + 1))
    times = np.asarray(p.sigma_inv(nodes), dtype=float)
    times[0] = t_from
    if sigma_b >= tail_sigma:
        times[-1] = t_to

    for t_hi, t_lo in zip(times[:-1], times[1:]):
        x = _rk4(gm, p, x, float(t_hi), float(t_hi - t_lo))

    t_end = float(times[-1])
    # tail jump below tail_sigma
    if t_end > t_to:
        x = x - (t_end - t_to) * velocity(gm, p, x, t_end).v
    if not np.all(np.isfinite(x)):
        raise ConvergenceError(f"reference flow produced non-finite state on [{t_to}, {t_from}]")
    return x


@dataclass(frozen=True)
class RichardsonResult:
    state: np.ndarray
    difference: float
    converged: bool
    substeps: int


def richardson_check(
    gm: Denoiser,
    p: Parameterization,
    x0: np.ndarray,
    t_from: float,
    t_to: float,
    substeps: int = 128,
    tail_sigma: float = 1e-5,
    rtol: float = 1e-8,
    raise_on_failure: bool = False,
) -> RichardsonResult:
    """Compare the flow at `substeps` and twice that; return the finer state."""
    coarse = reference_flow(gm, p, x0, t_from, t_to, substeps, tail_sigma)
    fine = reference_flow(gm, p, x0, t_from, t_to, 2 * substeps, tail_sigma)
    scale = 1.0 + float(np.max(np.linalg.norm(np.atleast_2d(fine), axis=-1)))
    diff = float(np.max(np.linalg.norm(np.atleast_2d(fine - coarse), axis=-1))) / scale
    converged = diff <= rtol
    logger.debug("richardson %d vs %d substeps: relative difference %.3e", substeps, 2 * substeps, diff)
    if not converged and raise_on_failure:
        raise ConvergenceError(f"reference flow not converged: relative difference {diff:.3e} > {rtol:.1e}")
    return RichardsonResult(state=fine, difference=diff, converged=converged, substeps=2 * substeps)
