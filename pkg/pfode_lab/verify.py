"""Invariant batteries behind `pfode verify`."""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from pfode_lab.engine import rng
from pfode_lab.engine.bounds import total_bound_check
from pfode_lab.engine.dynamics import curvature, curvature_general, velocity
from pfode_lab.engine.pool import ordered_map
from pfode_lab.engine.reference import prior_sample, reference_flow, sample_marginal
from pfode_lab.engine.scheduler import (
    SchedulerOptions,
    build_schedule,
    coefficient_of_variation,
    geodesic_increments,
    refine_schedule,
    resample_n_steps,
)
from pfode_lab.engine.solvers import curvature_measures, mixed_sample
from pfode_lab.errors import ConfigError
from pfode_lab.metrics.transport import w2
from pfode_lab.models.mixture import Denoiser, OracleEval
from pfode_lab.models.parameterization import Parameterization, ParamKind, edm_reference_grid
from pfode_lab.models.policy import SolverPolicy
from pfode_lab.models.schedule import EtaSchedule, ResampleWeights, TimestepSchedule

logger = logging.getLogger(__name__)


class Suite(str, Enum):
    CURVATURE = "curvature"
    STEPBOUND = "stepbound"
    TOTALBOUND = "totalbound"
    PROXY = "proxy"
    RESAMPLE = "resample"


@dataclass
class Check:
    name: str
    observed: float
    bound: float
    passed: bool
    relation: str = "<="

    def to_dict(self) -> dict:
        return {"name": self.name, "observed": self.observed, "bound": self.bound, "pass": self.passed, "relation": self.relation}


def check_le(name: str, observed: float, bound: float) -> Check:
    return Check(name, float(observed), float(bound), bool(observed <= bound), "<=")


def check_ge(name: str, observed: float, bound: float) -> Check:
    return Check(name, float(observed), float(bound), bool(observed >= bound), ">=")


def check_eq(name: str, observed: float, expected: float) -> Check:
    return Check(name, float(observed), float(expected), bool(observed == expected), "==")


@dataclass
class VerifyReport:
    suite: str
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {"suite": self.suite, "passed": self.passed, "checks": [c.to_dict() for c in self.checks]}


@dataclass(frozen=True)
class VerifySettings:
    points: int = 100
    samples: int = 4096
    assignment_cap: int = 4096
    substeps: int = 128
    tail_sigma: float = 1e-5
    seed: int = 0
    threads: int = 1
    grid_steps: int = 18
    grid_rho: float = 7.0
    eta: EtaSchedule = EtaSchedule()
    q: float = 0.25
    scheduler: SchedulerOptions = SchedulerOptions()


class CountingDenoiser(Denoiser):
    """Delegating denoiser that counts evaluations."""

    def __init__(self, inner: Denoiser):
        self.inner = inner
        self.calls = 0

    @property
    def dim(self) -> int:
        return self.inner.dim

    def denoise(self, x, sigma, want_jacobian=False, want_sigma_deriv=False) -> OracleEval:
        self.calls += 1
        return self.inner.denoise(x, sigma, want_jacobian, want_sigma_deriv)

    def sample(self, n, gen):
        return self.inner.sample(n, gen)


def _rel_err(approx: np.ndarray, exact: np.ndarray, atol: float = 1e-12) -> float:
    return float(np.linalg.norm(approx - exact) / (np.linalg.norm(exact) + atol))


# -- curvature ----------------------------------------------------------------

KINDS = (ParamKind.EDM, ParamKind.VP, ParamKind.VE)


def _eps_slope(gm: Denoiser, p: Parameterization, a, t_a: float, b, t_b: float) -> np.ndarray:
    return (velocity(gm, p, a, t_a).eps - velocity(gm, p, b, t_b).eps) / (t_a - t_b)


def _curvature_kind(gm: Denoiser, base: Parameterization, kind: ParamKind, s: VerifySettings) -> list[Check]:
    p = Parameterization(kind, base.sigma_min, base.sigma_max, base.beta_d, base.beta_min)
    gen = rng.stream(s.seed, "verify-curvature", kind.value)
    log_lo, log_hi = math.log(max(20.0 * p.sigma_min, 0.05)), math.log(min(0.25 * p.sigma_max, 20.0))
    fd_err, spec_err, eps_err = 0.0, 0.0, 0.0
    for i in range(s.points):
        t = float(p.sigma_inv(math.exp(gen.uniform(log_lo, log_hi))))
        h = 1e-3 * t
        y = sample_marginal(gm, p, t + h, 1, s.seed, "verify-curvature", kind.value, i)[0]
        x = reference_flow(gm, p, y, t + h, t, s.substeps, s.tail_sigma)
        x_lo = reference_flow(gm, p, y, t + h, t - h, s.substeps, s.tail_sigma)

        exact = curvature(gm, p, x, t)
        general = curvature_general(gm, p, x, t)
        fd = (y - 2.0 * x + x_lo) / (h * h)
        fd_err = max(fd_err, _rel_err(fd, exact.xddot, 1e-9))
        spec_err = max(spec_err, _rel_err(exact.xddot, general.xddot, 1e-300))

        # Richardson on the central difference: h and h/2
        x_hi_half = reference_flow(gm, p, y, t + h, t + 0.5 * h, s.substeps, s.tail_sigma)
        x_lo_half = reference_flow(gm, p, y, t + h, t - 0.5 * h, s.substeps, s.tail_sigma)
        coarse = _eps_slope(gm, p, y, t + h, x_lo, t - h)
        fine = _eps_slope(gm, p, x_hi_half, t + 0.5 * h, x_lo_half, t - 0.5 * h)
        eps_fd = (4.0 * fine - coarse) / 3.0
        eps_err = max(eps_err, _rel_err(eps_fd, exact.eps_dot, 1e-9))
    return [
        check_le(f"curvature_fd_{kind.value}", fd_err, 1e-3),
        check_le(f"curvature_specialized_{kind.value}", spec_err, 1e-10),
        check_le(f"eps_dot_fd_{kind.value}", eps_err, 1e-4),
    ]


def run_curvature(gm: Denoiser, p: Parameterization, s: VerifySettings) -> VerifyReport:
    parts = ordered_map(lambda kind: _curvature_kind(gm, p, kind, s), KINDS, s.threads)
    return VerifyReport(Suite.CURVATURE.value, [c for part in parts for c in part])


# -- step bound ---------------------------------------------------------------

STEP_ETAS = (0.01, 0.05, 0.2)


def step_errors(gm: Denoiser, p: Parameterization, schedule: TimestepSchedule, s: VerifySettings, key) -> np.ndarray:
    """Per-step W₂ between the reference flow and one Euler step of exact marginal samples."""
    n = min(s.samples, s.assignment_cap) if gm.dim > 1 else s.samples
    out = []
    for i, t_from, t_to in schedule.steps():
        x = sample_marginal(gm, p, t_from, n, s.seed, "verify-stepbound", key, i)
        exact = reference_flow(gm, p, x, t_from, t_to, s.substeps, s.tail_sigma)
        euler = x - (t_from - t_to) * velocity(gm, p, x, t_from).v
        out.append(w2(exact, euler, s.assignment_cap).w2)
    return np.asarray(out)


def _stepbound_eta(gm, p, eta_value: float, s: VerifySettings) -> list[Check]:
    schedule = build_schedule(gm, p, EtaSchedule.constant(eta_value), seed=s.seed, opts=s.scheduler)
    dts = schedule.dts
    budget = np.array([dt * dt * m.s_hat - 2.0 * m.eta_used for dt, m in zip(dts, schedule.per_step)])
    errors = step_errors(gm, p, schedule, s, f"eta={eta_value:g}")
    within = float(np.mean(errors <= 1.5 * eta_value))
    return [
        check_le(f"step_budget_eta={eta_value:g}", float(np.max(budget)), 1e-12),
        check_ge(f"step_w2_within_1.5eta_eta={eta_value:g}", within, 0.95),
    ]


def run_stepbound(gm: Denoiser, p: Parameterization, s: VerifySettings) -> VerifyReport:
    parts = ordered_map(lambda eta: _stepbound_eta(gm, p, eta, s), STEP_ETAS, s.threads)
    return VerifyReport(Suite.STEPBOUND.value, [c for part in parts for c in part])


# -- total bound --------------------------------------------------------------


def run_totalbound(gm: Denoiser, p: Parameterization, s: VerifySettings, schedule: Optional[TimestepSchedule] = None) -> VerifyReport:
    schedule = schedule or edm_reference_grid(p, s.grid_steps, s.grid_rho)
    n = min(s.samples, s.assignment_cap) if gm.dim > 1 else s.samples
    report = total_bound_check(schedule, gm, p, n, s.seed, s.substeps, s.tail_sigma, cap=s.assignment_cap)
    return VerifyReport(
        Suite.TOTALBOUND.value,
        [
            check_le("total_w2_vs_exponential_bound", report.lhs, report.rhs),
            check_le("total_w2_vs_unrolled_bound", report.lhs, report.rhs_unrolled),
        ],
    )


# -- proxy identity -----------------------------------------------------------


def run_proxy(gm: Denoiser, p: Parameterization, s: VerifySettings) -> VerifyReport:
    grid = edm_reference_grid(p, s.grid_steps, s.grid_rho)
    x0 = prior_sample(p, gm.dim, s.points, s.seed, "verify-proxy", t0=grid.t0)

    mismatches, compared = 0, 0
    for row in x0:
        run = mixed_sample(gm, p, grid, SolverPolicy.pure_euler(), row)
        for i in range(1, run.num_steps):
            v_prev = velocity(gm, p, run.states[i - 1], float(grid.times[i - 1]))
            v_curr = velocity(gm, p, run.states[i], float(grid.times[i]))
            delayed = curvature_measures(v_prev, v_curr, float(grid.times[i - 1] - grid.times[i])).kappa_rel
            compared += 1
            if run.records[i].kappa_hat != delayed:
                mismatches += 1

    counting = CountingDenoiser(gm)
    heun = mixed_sample(counting, p, grid, SolverPolicy.pure_heun(), x0[0])
    euler = mixed_sample(counting, p, grid, SolverPolicy.pure_euler(), x0[0])
    n = grid.num_steps
    return VerifyReport(
        Suite.PROXY.value,
        [
            check_eq("delayed_curvature_mismatches", mismatches, 0),
            check_ge("delayed_curvature_pairs_compared", compared, 1),
            check_eq("nfe_ledger_vs_calls", heun.total_nfe + euler.total_nfe, counting.calls),
            check_eq("nfe_pure_heun", heun.total_nfe, 2 * n - 1),
            check_eq("nfe_pure_euler", euler.total_nfe, n),
        ],
    )


# -- resampling ---------------------------------------------------------------

RESAMPLE_NS = (10, 18, 40)
REFINE_FACTOR = 4


def run_resample(gm: Denoiser, p: Parameterization, s: VerifySettings, base: Optional[TimestepSchedule] = None) -> VerifyReport:
    base = base or build_schedule(gm, p, s.eta, seed=s.seed, opts=s.scheduler)
    refined = refine_schedule(base, p, REFINE_FACTOR)
    checks = []
    for q in sorted({0.0, s.q}):
        weights = ResampleWeights(q)
        for n in RESAMPLE_NS:
            if n > refined.num_steps:
                raise ConfigError(f"base schedule too coarse to resample into {n} steps")
            out = resample_n_steps(refined, weights, n, p)
            speeds = geodesic_increments(out, refined, weights, p)
            ends_kept = out.times[0] == refined.times[0] and out.times[-1] == 0.0 and out.sigmas[-1] == 0.0
            checks.append(check_eq(f"length_N={n}_q={q:g}", len(out.times), n + 1))
            checks.append(check_eq(f"endpoints_N={n}_q={q:g}", float(ends_kept), 1.0))
            checks.append(check_le(f"geodesic_speed_cv_N={n}_q={q:g}", coefficient_of_variation(speeds), 0.05))
    return VerifyReport(Suite.RESAMPLE.value, checks)


RUNNERS: dict[Suite, Callable[..., VerifyReport]] = {
    Suite.CURVATURE: run_curvature,
    Suite.STEPBOUND: run_stepbound,
    Suite.TOTALBOUND: run_totalbound,
    Suite.PROXY: run_proxy,
    Suite.RESAMPLE: run_resample,
}


def run_suite(suite: Suite, gm: Denoiser, p: Parameterization, settings: VerifySettings, schedule: Optional[TimestepSchedule] = None) -> VerifyReport:
    """Run one battery; `schedule` feeds totalbound and resample when given."""
    logger.info("running %s suite", suite.value)
    if suite in (Suite.TOTALBOUND, Suite.RESAMPLE):
        report = RUNNERS[suite](gm, p, settings, schedule)
    else:
        report = RUNNERS[suite](gm, p, settings)
    logger.info("%s: %d/%d checks passed", suite.value, len(report.checks) - len(report.failures), len(report.checks))
    return report
