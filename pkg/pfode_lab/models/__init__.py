"""Domain models: parameterizations, schedules, mixtures and solver policies."""

from pfode_lab.models.mixture import Denoiser, GaussianMixture, OracleEval
from pfode_lab.models.parameterization import Parameterization, ParamKind, edm_reference_grid
from pfode_lab.models.policy import CurvatureSource, LambdaKind, RunReport, SolverKind, SolverPolicy, StepRecord
from pfode_lab.models.schedule import EtaSchedule, ResampleWeights, StepMeta, TimestepSchedule

__all__ = [
    "Denoiser",
    "GaussianMixture",
    "OracleEval",
    "Parameterization",
    "ParamKind",
    "edm_reference_grid",
    "CurvatureSource",
    "LambdaKind",
    "RunReport",
    "SolverKind",
    "SolverPolicy",
    "StepRecord",
    "EtaSchedule",
    "ResampleWeights",
    "StepMeta",
    "TimestepSchedule",
]
