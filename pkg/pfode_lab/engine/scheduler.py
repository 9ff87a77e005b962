"""Wasserstein-bounded adaptive timestep scheduling and geodesic resampling."""

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import integrate

from pfode_lab.engine.dynamics import VelocityEval, velocity
from pfode_lab.engine.reference import prior_sample, reference_flow, sample_marginal
from pfode_lab.errors import ConfigError, ConvergenceError, DomainError
from pfode_lab.models.mixture import Denoiser
from pfode_lab.models.parameterization import Parameterization, edm_reference_grid
from pfode_lab.models.schedule import EtaSchedule, ResampleWeights, StepMeta, TimestepSchedule

logger = logging.getLogger(__name__)

# committed-interval budget: relative slack of the check, and the convergence band of the refit
REFIT_TOL = 1e-9
REFIT_STEP = 1e-2


@dataclass(frozen=True)
class SchedulerOptions:
    """Knobs of the line search and the step caps."""

    reference_points: int = 64
    rho: float = 7.0
    dt_max_fraction: float = 0.25
    delta_fraction: float = 1e-4
    expand_factor: float = 2.0
    contract_factor: float = 0.5
    slack_band: float = 4.0
    max_steps: int = 10000
    batch: int = 64

    def __post_init__(self):
        if self.reference_points < 2:
            raise ConfigError(f"reference_points must be >= 2, got {self.reference_points}")
        if not 0.0 < self.contract_factor < 1.0:
            raise ConfigError(f"contract_factor must lie in (0, 1), got {self.contract_factor}")
        if not self.expand_factor > 1.0:
            raise ConfigError(f"expand_factor must exceed 1, got {self.expand_factor}")
        if not self.slack_band > 1.0:
            raise ConfigError(f"slack_band must exceed 1, got {self.slack_band}")
        if not 0.0 < self.dt_max_fraction <= 1.0:
            raise ConfigError(f"dt_max_fraction must lie in (0, 1], got {self.dt_max_fraction}")
        if not self.delta_fraction > 0.0:
            raise ConfigError(f"delta_fraction must be positive, got {self.delta_fraction}")
        if self.max_steps < 1 or self.batch < 1:
            raise ConfigError("max_steps and batch must be positive")


def s_hat(v_t: VelocityEval, v_trial: VelocityEval, dt_trial: float) -> float:
    """Chord estimate ‖ṽ − v‖/Δt of the velocity's time derivative.

    For a batch this is the root-mean-square of the per-row chords.
    """
    if not dt_trial > 0.0:
        raise DomainError(f"dt_trial must be positive, got {dt_trial}")
    diff = np.atleast_2d(v_trial.v - v_t.v)
    return float(np.sqrt(np.mean(np.sum(diff * diff, axis=-1)))) / dt_trial


def max_step(eta: float, s_hat: float, dt_max: float = math.inf) -> float:
    """Largest Δt with Δt²·Ŝ ≤ 2η; the cap when Ŝ = 0."""
    if not eta > 0.0:
        raise DomainError(f"eta must be positive, got {eta}")
    if s_hat < 0.0 or math.isnan(s_hat):
        raise DomainError(f"s_hat must be non-negative, got {s_hat}")
    if s_hat == 0.0:
        return dt_max
    return math.sqrt(2.0 * eta / s_hat)


def linesearch_guard(dt_init: float, delta: float, contract: float = 0.5) -> int:
    """Iteration cap ⌈log_{1/c}(Δt_init/δ)⌉ + 2."""
    if dt_init <= delta:
        return 2
    return math.ceil(math.log(dt_init / delta) / math.log(1.0 / contract)) + 2


@dataclass
class _Trial:
    dt: float
    x: np.ndarray
    v: VelocityEval
    s_hat: float


@dataclass
class _Commit:
    dt: float
    t_next: float
    x: np.ndarray
    v: VelocityEval
    realized: float
    limited_by: str = "bound"


class _Builder:
    """State of one schedule-building run."""

    def __init__(self, gm, p, eta, opts):
        self.gm, self.p, self.eta, self.opts = gm, p, eta, opts
        self.t0 = p.t_max
        self.t_floor = p.t_min
        self.dt_max = opts.dt_max_fraction * self.t0
        self.delta = opts.delta_fraction * self.t0
        grid = edm_reference_grid(p, opts.reference_points, opts.rho).times
        self.reference = grid[grid > 0.0]
        self.nfe = 0

    def eval(self, x, t) -> VelocityEval:
        self.nfe += 1
        return velocity(self.gm, self.p, x, t)

    def next_timestep(self, t: float) -> float:
        """Warm-start gap: distance to the next reference point below t."""
        below = self.reference[self.reference < t - self.delta]
        t_next = float(below[0]) if len(below) else self.t_floor
        return min(t - max(t_next, self.t_floor), self.dt_max)

    def trial(self, x, v: VelocityEval, t: float, dt: float) -> _Trial:
        x_trial = x - dt * v.v
        v_trial = self.eval(x_trial, t - dt)
        s = s_hat(v, v_trial, dt)
        if not math.isfinite(s):
            raise ConvergenceError(f"non-finite curvature estimate at t={t:g}, dt={dt:g}")
        return _Trial(dt, x_trial, v_trial, s)

    def line_search(self, x, v: VelocityEval, t: float, eta_i: float) -> tuple[_Trial, int]:
        """Exponential backoff on the trial gap; no expansion after a contraction."""
        opts = self.opts
        dt_init = self.next_timestep(t)
        guard = linesearch_guard(dt_init, self.delta, opts.contract_factor)
        room = min(self.dt_max, t - self.t_floor)
        dt, contracted, iters = dt_init, False, 0
        while True:
            current = self.trial(x, v, t, dt)
            iters += 1
            cost = dt * dt * current.s_hat
            if iters >= guard:
                break
            if cost > 2.0 * eta_i:
                if dt * opts.contract_factor < self.delta:
                    break
                dt *= opts.contract_factor
                contracted = True
                continue
            slack = math.inf if cost == 0.0 else 2.0 * eta_i / cost
            if slack > opts.slack_band and not contracted and dt * opts.expand_factor <= room:
                dt *= opts.expand_factor
                continue
            break
        return current, iters

    def commit(self, x, v: VelocityEval, t: float, eta_i: float, trial: _Trial) -> _Commit:
        """Largest Δt up to √(2η/Ŝ) whose chord over the committed interval also meets the budget."""
        room = t - self.t_floor
        dt_hi = min(max_step(eta_i, trial.s_hat, self.dt_max), self.dt_max, room)
        guard = linesearch_guard(dt_hi, self.delta, self.opts.contract_factor)
        dt, best, last = dt_hi, None, None
        for _ in range(guard + 1):
            t_next = self.t_floor if dt >= room else t - dt
            if dt == trial.dt:
                x_next, v_next = trial.x, trial.v
            else:
                x_next = x - dt * v.v
                v_next = self.eval(x_next, t_next)
            realized = s_hat(v, v_next, dt)
            if not math.isfinite(realized):
                raise ConvergenceError(f"non-finite curvature estimate at t={t:g}, dt={dt:g}")
            last = _Commit(dt, t_next, x_next, v_next, realized)
            ok = dt * dt * realized <= 2.0 * eta_i * (1.0 + REFIT_TOL)
            if ok and (best is None or dt > best.dt):
                best = last
            # fixed point of dt = √(2η/Ŝ(dt)), approached from both sides
            target = min(max_step(eta_i, realized, self.dt_max), dt_hi)
            if ok and target <= dt * (1.0 + REFIT_STEP):
                break
            if not ok and target < self.delta:
                break
            dt = target
        commit = best or last
        if commit.t_next == self.t_floor:
            commit.limited_by = "terminal"
        elif commit.dt >= self.dt_max:
            commit.limited_by = "cap"
        if commit.dt < dt_hi:
            logger.debug("t=%.5g: committed interval shortened from %.4g to %.4g", t, dt_hi, commit.dt)
        return commit

    def run(self, x: np.ndarray) -> TimestepSchedule:
        p, opts = self.p, self.opts
        t = self.t0
        v = self.eval(x, t)
        times, metas = [t], []

        while t > self.t_floor:
            if len(metas) >= opts.max_steps:
                raise ConvergenceError(f"schedule builder exceeded {opts.max_steps} steps at t={t:g}")
            eta_i = float(self.eta(float(p.sigma(t)), p.sigma_max))
            trial, iters = self.line_search(x, v, t, eta_i)
            step = self.commit(x, v, t, eta_i, trial)
            dt, limited_by = step.dt, step.limited_by

            metas.append(
                StepMeta(
                    eta_used=eta_i,
                    s_hat=trial.s_hat,
                    linesearch_iters=iters,
                    dt_trial=trial.dt,
                    dt=dt,
                    limited_by=limited_by,
                    s_hat_realized=step.realized,
                )
            )
            logger.debug(
                "t=%.5g sigma=%.4g eta=%.4g s_hat=%.4g iters=%d dt_trial=%.4g dt=%.4g (%s)",
                t, float(p.sigma(t)), eta_i, trial.s_hat, iters, trial.dt, dt, limited_by,
            )
            x, v, t = step.x, step.v, step.t_next
            times.append(t)

        # the denoiser limit carries the last step from sigma_min to 0
        metas.append(StepMeta(eta_used=float(self.eta(p.sigma_min, p.sigma_max)), s_hat=0.0, dt=t, limited_by="terminal"))
        times.append(0.0)

        times = np.asarray(times, dtype=float)
        sigmas = np.asarray(p.sigma(times), dtype=float)
        sigmas[0], sigmas[-2], sigmas[-1] = p.sigma_max, p.sigma_min, 0.0
        return TimestepSchedule(times=times, sigmas=sigmas, per_step=metas, total_nfe=self.nfe, source="sdm")


def build_schedule(
    gm: Denoiser,
    p: Parameterization,
    eta: EtaSchedule,
    x0: Optional[np.ndarray] = None,
    seed: int = 0,
    opts: Optional[SchedulerOptions] = None,
) -> TimestepSchedule:
    """Adaptive schedule from T down to 0 with per-step W₂ budget η(σ).

    Each step warm-starts from the EDM reference grid, line-searches a trial
    gap, and commits Δt = √(2η/Ŝ) capped at Δt_max. The state advances with
    Euler; x0 may be a batch, in which case Ŝ is the batch RMS.
    """
    opts = opts or SchedulerOptions()
    if x0 is None:
        x0 = prior_sample(p, gm.dim, opts.batch, seed, "schedule")
    builder = _Builder(gm, p, eta, opts)
    schedule = builder.run(np.array(x0, dtype=float, copy=True))
    logger.info("built schedule with %d steps using %d evaluations", schedule.num_steps, schedule.total_nfe)
    return schedule


def refine_schedule(schedule: TimestepSchedule, p: Parameterization, factor: int, split_terminal: bool = False) -> TimestepSchedule:
    """Split steps into `factor` equal-time sub-steps; η proxies scale by 1/factor².

    The final jump to t = 0 stays whole unless `split_terminal` is set.
    """
    if factor < 1:
        raise ConfigError(f"refinement factor must be >= 1, got {factor}")
    times, metas = [], []
    for i, t_from, t_to in schedule.steps():
        parts = factor if (t_to > 0.0 or split_terminal) else 1
        sub = np.linspace(t_from, t_to, parts + 1)[:-1]
        times.extend(sub.tolist())
        if schedule.per_step:
            meta = schedule.per_step[i]
            for _ in range(parts):
                metas.append(
                    replace(
                        meta,
                        eta_used=meta.eta_used / parts**2,
                        dt=None if meta.dt is None else meta.dt / parts,
                        dt_trial=None if meta.dt_trial is None else meta.dt_trial / parts,
                    )
                )
    times.append(0.0)
    times = np.asarray(times, dtype=float)
    sigmas = np.asarray(p.sigma(times), dtype=float)
    keep = np.isin(times, schedule.times)
    sigmas[keep] = schedule.sigmas[np.searchsorted(-schedule.times, -times[keep])]
    return TimestepSchedule(times, sigmas, metas, schedule.total_nfe, f"{schedule.source}-x{factor}")


def geodesic_cost(base: TimestepSchedule, weights: ResampleWeights, sigma_max: float, proxy: str = "budget") -> np.ndarray:
    """Cumulative Γ̃ over every base step: Σ_j √w(σ_j)·√η_j, with σ_j the step's start."""
    eta = base.eta_proxies(proxy)
    incr = np.sqrt(np.asarray(weights.w(base.sigmas[:-1], sigma_max))) * np.sqrt(eta)
    return np.concatenate(([0.0], np.cumsum(incr)))


def resample_n_steps(
    base: TimestepSchedule,
    weights: ResampleWeights,
    n_steps: int,
    p: Optional[Parameterization] = None,
    proxy: str = "budget",
) -> TimestepSchedule:
    """N-step schedule at constant weighted geodesic speed along the base grid.

    The final jump to t = 0 is part of the path like any other step. Noise
    levels of the new times come from `p`; without it they are interpolated
    linearly in t, which is exact for EDM only.
    """
    if n_steps == base.num_steps:
        return TimestepSchedule(base.times.copy(), base.sigmas.copy(), list(base.per_step), base.total_nfe, base.source)
    if n_steps > base.num_steps:
        raise ConfigError(f"cannot resample {base.num_steps} base steps into {n_steps}")
    if n_steps < 2:
        raise ConfigError(f"resampling needs at least 2 steps, got {n_steps}")

    sigma_max = float(base.sigmas[0]) if p is None else p.sigma_max
    gamma = geodesic_cost(base, weights, sigma_max, proxy)
    if not gamma[-1] > 0.0:
        raise DomainError("base schedule has zero geodesic length")

    targets = np.linspace(0.0, gamma[-1], n_steps + 1)
    # Γ̃ increases as t decreases, so it serves directly as the abscissa
    new_t = np.interp(targets, gamma, base.times)
    new_t[0], new_t[-1] = base.times[0], 0.0
    new_s = np.interp(targets, gamma, base.sigmas) if p is None else np.asarray(p.sigma(new_t), dtype=float)
    new_s[0], new_s[-1] = base.sigmas[0], 0.0
    if np.any(np.diff(new_t) >= 0.0):
        raise DomainError("resampled times are not strictly decreasing; base grid too coarse")

    metas = []
    if base.per_step:
        step_of = np.clip(np.searchsorted(-base.times, -new_t[:-1], side="right") - 1, 0, base.num_steps - 1)
        w_new = np.asarray(weights.w(new_s[:-1], sigma_max))
        d_gamma = np.diff(targets)
        for k in range(n_steps):
            metas.append(
                StepMeta(
                    eta_used=float(d_gamma[k] ** 2 / w_new[k]),
                    s_hat=base.per_step[step_of[k]].s_hat,
                    dt=float(new_t[k] - new_t[k + 1]),
                    limited_by="terminal" if k == n_steps - 1 else "bound",
                )
            )

    logger.info("resampled %d base steps into %d (q=%g, %s proxy)", base.num_steps, n_steps, weights.q, proxy)
    return TimestepSchedule(new_t, new_s, metas, base.total_nfe, f"{base.source}-resampled-N{n_steps}")


def geodesic_increments(
    resampled: TimestepSchedule,
    base: TimestepSchedule,
    weights: ResampleWeights,
    p: Parameterization,
    proxy: str = "budget",
) -> np.ndarray:
    """√L̃ of each resampled step, integrating the base cost density with continuous w(σ(t)).

    On the base step that ends at t = 0 the weight stays at its start value,
    since w diverges at σ = 0 for q > 0.
    """
    eta = base.eta_proxies(proxy)
    density = np.sqrt(eta) / base.dts

    def sqrt_w(t: float) -> float:
        return math.sqrt(weights.w(float(p.sigma(t)), p.sigma_max))

    out = []
    for _, hi, lo in resampled.steps():
        total = 0.0
        for j, t_from, t_to in base.steps():
            a, b = max(lo, t_to), min(hi, t_from)
            if not b > a:
                continue
            if t_to > 0.0:
                value, _ = integrate.quad(sqrt_w, a, b, limit=100)
            else:
                value = sqrt_w(t_from) * (b - a)
            total += density[j] * value
        out.append(total)
    return np.asarray(out)


def coefficient_of_variation(values) -> float:
    values = np.asarray(values, dtype=float)
    mean = float(np.mean(values))
    if mean == 0.0:
        return 0.0
    return float(np.std(values)) / mean


def eta_profile(
    schedule: TimestepSchedule,
    gm: Denoiser,
    p: Parameterization,
    n_samples: int = 256,
    seed: int = 0,
    substeps: int = 128,
    tail_sigma: float = 1e-5,
) -> np.ndarray:
    """Per-step Euler local error proxy Δt²/2·Ŝ along reference trajectories.

    Samples start from the exact marginal at t0 and follow the reference flow;
    a step ending at σ = 0 takes its chord at tail_sigma instead.
    """
    x = sample_marginal(gm, p, schedule.t0, n_samples, seed, "eta-profile")
    t_tail = float(p.sigma_inv(tail_sigma))
    out = []
    for i, t_from, t_to in schedule.steps():
        dt = t_from - t_to
        t_eval = t_to if float(p.sigma(t_to)) >= tail_sigma else max(t_tail, 0.0)
        chord = t_from - t_eval
        v = velocity(gm, p, x, t_from)
        v_trial = velocity(gm, p, x - chord * v.v, t_eval)
        out.append(0.5 * dt * dt * s_hat(v, v_trial, chord))
        if i < schedule.num_steps - 1:
            x = reference_flow(gm, p, x, t_from, t_to, substeps, tail_sigma)
    return np.asarray(out)
