"""Plot-ready statistics: curvature against noise level, η profiles and τ_k sweeps."""

import logging
import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from pfode_lab.engine.dynamics import velocity
from pfode_lab.engine.reference import reference_flow, sample_marginal
from pfode_lab.engine.solvers import sample_trajectories
from pfode_lab.errors import DomainError
from pfode_lab.metrics.transport import ASSIGNMENT_CAP, w2
from pfode_lab.models.mixture import Denoiser
from pfode_lab.models.parameterization import Parameterization
from pfode_lab.models.policy import LambdaKind, SolverPolicy
from pfode_lab.models.schedule import TimestepSchedule

logger = logging.getLogger(__name__)

DEFAULT_TAUS = (2e-5, 5e-5, 1e-4, 2e-4, 5e-4, 1e-3)


@dataclass(frozen=True)
class CurvatureRow:
    sigma: float
    kappa_mean: float
    kappa_std: float


@dataclass(frozen=True)
class EtaRow:
    step: int
    t: float
    sigma: float
    eta_t: float


@dataclass(frozen=True)
class TauRow:
    tau_k: float
    nfe_per_step: float
    endpoint_w2: float


def rows_as_dicts(rows) -> list[dict]:
    return [asdict(row) for row in rows]


def curvature_sweep(
    gm: Denoiser,
    p: Parameterization,
    sigma_grid: Sequence[float],
    n_samples: int = 256,
    seed: int = 0,
) -> list[CurvatureRow]:
    """κ̂_rel along Euler trajectories on `sigma_grid`, binned by interval.

    Each row reports the noise level at the time midpoint of one grid interval
    and the mean/std over trajectories of the delayed relative curvature there.
    """
    sigmas = np.asarray(sigma_grid, dtype=float)
    if sigmas.ndim != 1 or len(sigmas) < 3:
        raise DomainError("curvature sweep needs at least 3 noise levels")
    if np.any(sigmas <= 0.0) or np.any(np.diff(sigmas) >= 0.0):
        raise DomainError("sigma grid must be positive and strictly decreasing")
    times = np.asarray(p.sigma_inv(sigmas), dtype=float)

    x = sample_marginal(gm, p, float(times[0]), n_samples, seed, "curvature-sweep")
    v_prev = velocity(gm, p, x, float(times[0]))
    rows = []
    for i in range(1, len(times)):
        dt_prev = float(times[i - 1] - times[i])
        x = x - dt_prev * v_prev.v
        v = velocity(gm, p, x, float(times[i]))
        num = np.linalg.norm(v.v - v_prev.v, axis=-1)
        den = dt_prev * np.linalg.norm(v_prev.v, axis=-1)
        kappa = np.divide(num, den, out=np.zeros_like(num), where=den > 0.0)
        sigma_mid = float(p.sigma(0.5 * (times[i - 1] + times[i])))
        rows.append(CurvatureRow(sigma=sigma_mid, kappa_mean=float(np.mean(kappa)), kappa_std=float(np.std(kappa))))
        v_prev = v
    return rows


def log_sigma_grid(p: Parameterization, points: int = 40) -> np.ndarray:
    """Log-uniform noise levels from σ_max down to σ_min."""
    return np.exp(np.linspace(math.log(p.sigma_max), math.log(p.sigma_min), points))


def curvature_trend(rows: Sequence[CurvatureRow]) -> float:
    """Spearman correlation of (log σ, log mean κ̂); nan when a mean vanishes."""
    sig = np.array([r.sigma for r in rows])
    kap = np.array([r.kappa_mean for r in rows])
    if np.any(kap <= 0.0):
        return math.nan
    rho, _ = stats.spearmanr(np.log(sig), np.log(kap))
    return float(rho)


def eta_rows(schedule: TimestepSchedule, eta_t: Sequence[float]) -> list[EtaRow]:
    return [
        EtaRow(step=i, t=float(schedule.times[i]), sigma=float(schedule.sigmas[i]), eta_t=float(e))
        for i, e in enumerate(eta_t)
    ]


def first_bound_step(schedule: TimestepSchedule) -> int:
    """Index of the first step whose length the budget set; 0 without metadata."""
    for i, meta in enumerate(schedule.per_step):
        if meta.limited_by == "bound":
            return i
    return 0


def profile_rises(eta_t: Sequence[float], slack: float = 0.1, start: int = 0) -> list[int]:
    """Steps i ≥ start where η_t grows by more than `slack` relative to step i.

    Values below `slack` times the peak from `start` on are too small to count.
    """
    values = np.asarray(eta_t, dtype=float)
    if start >= len(values) - 1:
        return []
    floor = slack * float(np.max(values[start:]))
    return [
        i for i in range(start, len(values) - 1)
        if values[i + 1] > (1.0 + slack) * values[i] and values[i + 1] > floor
    ]


def has_interior_peak(eta_t: Sequence[float]) -> bool:
    """True when the largest η_t is neither the first nor the last step."""
    values = np.asarray(eta_t, dtype=float)
    peak = int(np.argmax(values))
    return 0 < peak < len(values) - 1


def tau_sweep(
    gm: Denoiser,
    p: Parameterization,
    schedule: TimestepSchedule,
    taus: Sequence[float] = DEFAULT_TAUS,
    n_samples: int = 64,
    seed: int = 0,
    substeps: int = 128,
    tail_sigma: float = 1e-5,
    threads: int = 1,
    cap: int = ASSIGNMENT_CAP,
) -> list[TauRow]:
    """Step policy over a τ_k grid: mean NFE per step and endpoint W₂ to the reference flow."""
    x0 = sample_marginal(gm, p, schedule.t0, n_samples, seed, "tau-sweep")
    reference = reference_flow(gm, p, x0, schedule.t0, 0.0, substeps, tail_sigma)
    rows = []
    for tau in sorted(taus):
        policy = SolverPolicy(LambdaKind.STEP, tau)
        runs = sample_trajectories(gm, p, schedule, policy, x0, threads)
        endpoints = np.stack([run.endpoint for run in runs])
        nfe = sum(run.total_nfe for run in runs) / (n_samples * schedule.num_steps)
        rows.append(TauRow(tau_k=float(tau), nfe_per_step=float(nfe), endpoint_w2=w2(reference, endpoints, cap).w2))
        logger.info("tau_k=%g: %.3f evaluations per step", tau, nfe)
    return rows
