"""Euler and Heun steps, curvature measures and the Λ(t)-mixed sampler."""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from pfode_lab.engine.dynamics import VelocityEval, velocity
from pfode_lab.engine.mixing import MixingStrategy, log_sigma_progress, strategy_for
from pfode_lab.engine.pool import ordered_map
from pfode_lab.engine.reference import prior_sample
from pfode_lab.errors import ConvergenceError, DomainError
from pfode_lab.models.mixture import Denoiser
from pfode_lab.models.parameterization import Parameterization
from pfode_lab.models.policy import CurvatureSource, LambdaKind, RunReport, SolverKind, SolverPolicy, StepRecord
from pfode_lab.models.schedule import TimestepSchedule

logger = logging.getLogger(__name__)


def _check_times(t_from: float, t_to: float):
    if not t_from > t_to >= 0.0:
        raise DomainError(f"steps run from t_from > t_to >= 0, got {t_from} -> {t_to}")


def _start_velocity(gm, p, x, t_from, v_cached: Optional[VelocityEval]) -> VelocityEval:
    if v_cached is not None:
        return v_cached
    return velocity(gm, p, x, t_from)


def _reaches_zero(p: Parameterization, t_to: float) -> bool:
    return float(p.sigma(t_to)) < p.sigma_floor


def euler_step(
    gm: Denoiser,
    p: Parameterization,
    x: np.ndarray,
    t_from: float,
    t_to: float,
    v_cached: Optional[VelocityEval] = None,
) -> StepRecord:
    """x_out = x − (t_from − t_to)·v(x, t_from).

    The start evaluation is charged to this step whether or not it was cached.
    """
    _check_times(t_from, t_to)
    v0 = _start_velocity(gm, p, x, t_from, v_cached)
    x_out = np.asarray(x, dtype=float) - (t_from - t_to) * v0.v
    return StepRecord(t_from=t_from, t_to=t_to, solver_used=SolverKind.EULER, nfe=1, x_out=x_out)


def heun_step(
    gm: Denoiser,
    p: Parameterization,
    x: np.ndarray,
    t_from: float,
    t_to: float,
    v_cached: Optional[VelocityEval] = None,
    v_predicted: Optional[VelocityEval] = None,
) -> StepRecord:
    """Predictor-corrector step; falls back to Euler when σ(t_to) = 0."""
    _check_times(t_from, t_to)
    if _reaches_zero(p, t_to):
        return euler_step(gm, p, x, t_from, t_to, v_cached)
    v0 = _start_velocity(gm, p, x, t_from, v_cached)
    dt = t_from - t_to
    x = np.asarray(x, dtype=float)
    if v_predicted is None:
        v_predicted = velocity(gm, p, x - dt * v0.v, t_to)
    x_out = x - dt * 0.5 * (v0.v + v_predicted.v)
    return StepRecord(t_from=t_from, t_to=t_to, solver_used=SolverKind.HEUN, nfe=2, x_out=x_out)


@dataclass(frozen=True)
class CurvatureMeasures:
    """κ_abs, κ_rel and κ̂_rel from one pair of consecutive velocities.

    kappa_rel and kappa_hat are None when the earlier velocity vanishes.
    """

    kappa_abs: float
    kappa_rel: Optional[float]
    kappa_hat: Optional[float]


def _rms_norm(v: np.ndarray) -> float:
    v = np.atleast_2d(v)
    return float(np.sqrt(np.mean(np.sum(v * v, axis=-1))))


def curvature_measures(v_prev: VelocityEval, v_curr: VelocityEval, dt_prev: float) -> CurvatureMeasures:
    """Finite-difference curvature of the pair (v_prev at t_prev, v_curr at t_prev − dt_prev).

    For a batch the norms are root-mean-square over rows. κ̂_rel at step i is
    this ratio evaluated on the pair (v_{i−1}, v_i), i.e. κ_rel of step i − 1.
    """
    if not dt_prev > 0.0:
        raise DomainError(f"curvature needs dt_prev > 0, got {dt_prev}")
    kappa_abs = _rms_norm(v_curr.v - v_prev.v) / dt_prev
    denom = _rms_norm(v_prev.v)
    if denom == 0.0:
        return CurvatureMeasures(kappa_abs, None, None)
    kappa_rel = kappa_abs / denom
    return CurvatureMeasures(kappa_abs, kappa_rel, kappa_rel)


def _blend(gm, p, x, t_from, t_to, v0: VelocityEval, weight: float) -> StepRecord:
    euler = euler_step(gm, p, x, t_from, t_to, v0)
    heun = heun_step(gm, p, x, t_from, t_to, v0)
    x_out = weight * euler.x_out + (1.0 - weight) * heun.x_out
    return StepRecord(t_from, t_to, SolverKind.BLEND, heun.nfe, x_out, blend=weight)


def _lookahead_step(gm, p, x, t_from, t_to, v0: VelocityEval, tau_k: float) -> StepRecord:
    if _reaches_zero(p, t_to):
        return euler_step(gm, p, x, t_from, t_to, v0)
    dt = t_from - t_to
    v_pred = velocity(gm, p, np.asarray(x, dtype=float) - dt * v0.v, t_to)
    kappa = curvature_measures(v0, v_pred, dt).kappa_rel
    if kappa is not None and kappa < tau_k:
        record = euler_step(gm, p, x, t_from, t_to, v0)
        record.nfe = 2
    else:
        record = heun_step(gm, p, x, t_from, t_to, v0, v_predicted=v_pred)
    record.kappa_hat = kappa
    return record


def mixed_sample(
    gm: Denoiser,
    p: Parameterization,
    schedule: TimestepSchedule,
    policy: SolverPolicy,
    x0: Optional[np.ndarray] = None,
    seed: int = 0,
    strategy: Optional[MixingStrategy] = None,
) -> RunReport:
    """Integrate x0 along `schedule`, choosing Euler/Heun/blend per step.

    x0 may be one state or a batch; a batch shares one solver decision per step.
    When x0 is None a single prior draw at the schedule's first time is used.
    """
    if x0 is None:
        x0 = prior_sample(p, gm.dim, 1, seed, "trajectory", 0, t0=schedule.t0)[0]
    strategy = strategy or strategy_for(policy)
    lookahead = policy.lambda_kind is LambdaKind.STEP and policy.curvature_source is CurvatureSource.LOOKAHEAD

    # Λ(t) progress runs from the first σ to the last positive one
    sigmas = schedule.sigmas
    sigma_hi = float(sigmas[0])
    sigma_lo = float(sigmas[sigmas > 0.0][-1])

    x = np.array(x0, dtype=float, copy=True)
    states = [x]
    records: list[StepRecord] = []
    v_prev: Optional[VelocityEval] = None
    dt_prev = 0.0

    for i, t_from, t_to in schedule.steps():
        v_i = velocity(gm, p, x, t_from)
        kappa_hat = None
        # delayed proxy: no curvature before the second step
        if v_prev is not None:
            kappa_hat = curvature_measures(v_prev, v_i, dt_prev).kappa_hat

        if lookahead:
            record = _lookahead_step(gm, p, x, t_from, t_to, v_i, policy.tau_k)
        else:
            progress = log_sigma_progress(float(sigmas[i]), sigma_hi, sigma_lo)
            weight = strategy.weight(i, progress, kappa_hat)
            if strategy.blends:
                record = _blend(gm, p, x, t_from, t_to, v_i, weight)
            elif weight == 1.0:
                record = euler_step(gm, p, x, t_from, t_to, v_i)
            else:
                record = heun_step(gm, p, x, t_from, t_to, v_i)
            record.kappa_hat = kappa_hat

        if not np.all(np.isfinite(record.x_out)):
            raise ConvergenceError(f"non-finite state after step {i} ({t_from:g} -> {t_to:g})")
        logger.debug("step %d: %.4g -> %.4g %s nfe=%d kappa_hat=%s", i, t_from, t_to, record.label, record.nfe, kappa_hat)

        records.append(record)
        x = record.x_out
        states.append(x)
        v_prev, dt_prev = v_i, t_from - t_to

    total = sum(r.nfe for r in records)
    logger.debug("sampled %d steps with %s: %d evaluations", len(records), policy.describe(), total)
    return RunReport(times=schedule.times.copy(), states=states, records=records, policy=policy, total_nfe=total)


def sample_trajectories(
    gm: Denoiser,
    p: Parameterization,
    schedule: TimestepSchedule,
    policy: SolverPolicy,
    x0: np.ndarray,
    threads: int = 1,
) -> list[RunReport]:
    """One independent mixed_sample run per row of x0, in row order."""
    rows = np.atleast_2d(np.asarray(x0, dtype=float))
    return ordered_map(lambda row: mixed_sample(gm, p, schedule, policy, row), rows, threads)
