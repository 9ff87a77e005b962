"""Numerical engine: PF-ODE dynamics, solvers and the adaptive scheduler."""

from pfode_lab.engine.bounds import BoundReport, total_bound_check
from pfode_lab.engine.dynamics import curvature, eps_dot, velocity
from pfode_lab.engine.reference import prior_sample, reference_flow, richardson_check, sample_marginal
from pfode_lab.engine.scheduler import (
    SchedulerOptions,
    build_schedule,
    eta_profile,
    geodesic_increments,
    refine_schedule,
    resample_n_steps,
)
from pfode_lab.engine.solvers import euler_step, heun_step, mixed_sample, sample_trajectories

__all__ = [
    "BoundReport",
    "total_bound_check",
    "curvature",
    "eps_dot",
    "velocity",
    "prior_sample",
    "reference_flow",
    "richardson_check",
    "sample_marginal",
    "SchedulerOptions",
    "build_schedule",
    "eta_profile",
    "geodesic_increments",
    "refine_schedule",
    "resample_n_steps",
    "euler_step",
    "heun_step",
    "mixed_sample",
    "sample_trajectories",
]
