"""Schedule/mixture JSON files and CSV tables.

All JSON carries `schema_version` and is written with sorted keys and a fixed
indent so reruns produce byte-identical files.
"""

import csv
import json
import math
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Optional, Union

import numpy as np

from pfode_lab.errors import ConfigError
from pfode_lab.models.mixture import GaussianMixture
from pfode_lab.models.parameterization import Parameterization
from pfode_lab.models.schedule import EtaSchedule, StepMeta, TimestepSchedule
from pfode_lab.presets import PRESET_PREFIX, get_preset

SCHEMA_VERSION = 1

PathLike = Union[str, Path]


def _plain(value):
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def dumps(data: dict) -> str:
    payload = {"schema_version": SCHEMA_VERSION, **_plain(data)}
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path: PathLike, data: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(data), encoding="utf-8")
    return path


def read_json(path: PathLike) -> dict:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"{path} has schema_version {version!r}; expected {SCHEMA_VERSION}")
    return data


# -- schedules ----------------------------------------------------------------


def schedule_to_dict(
    schedule: TimestepSchedule,
    p: Parameterization,
    eta: Optional[EtaSchedule] = None,
    resample: Optional[dict] = None,
) -> dict:
    data = {
        "parameterization": p.to_dict(),
        "times": schedule.times,
        "sigmas": schedule.sigmas,
        "per_step": [meta.to_dict() for meta in schedule.per_step],
        "total_nfe": schedule.total_nfe,
        "source": schedule.source,
    }
    if eta is not None:
        data["eta"] = {"min": eta.eta_min, "max": eta.eta_max, "p": eta.p}
    if resample is not None:
        data["resample"] = resample
    return data


def schedule_from_dict(data: dict) -> tuple[TimestepSchedule, Optional[Parameterization]]:
    try:
        times = [float(t) for t in data["times"]]
        sigmas = [float(s) for s in data["sigmas"]]
        per_step = [StepMeta.from_dict(m) for m in data.get("per_step", [])]
        schedule = TimestepSchedule(
            times=np.asarray(times),
            sigmas=np.asarray(sigmas),
            per_step=per_step,
            total_nfe=int(data.get("total_nfe", 0)),
            source=str(data.get("source", "file")),
        )
        p = Parameterization.from_dict(data["parameterization"]) if "parameterization" in data else None
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        # DomainError from the schedule invariants lands here too
        raise ConfigError(f"invalid schedule: {exc}") from exc
    return schedule, p


def write_schedule(path: PathLike, schedule: TimestepSchedule, p: Parameterization, **extra) -> Path:
    return write_json(path, schedule_to_dict(schedule, p, **extra))


def read_schedule(path: PathLike) -> tuple[TimestepSchedule, Optional[Parameterization]]:
    return schedule_from_dict(read_json(path))


# -- mixtures -----------------------------------------------------------------


def write_mixture(path: PathLike, gm: GaussianMixture) -> Path:
    return write_json(path, gm.to_dict())


def read_mixture(path: PathLike) -> GaussianMixture:
    return GaussianMixture.from_dict(read_json(path))


def load_mixture(spec: str, base_dir: Optional[PathLike] = None) -> GaussianMixture:
    """Mixture from "preset:<name>" or a JSON file path (relative to base_dir)."""
    if spec.startswith(PRESET_PREFIX):
        return get_preset(spec)
    path = Path(spec)
    if not path.is_absolute() and base_dir is not None:
        path = Path(base_dir) / path
    return read_mixture(path)


# -- CSV ----------------------------------------------------------------------


def write_csv(path: PathLike, rows: Iterable[dict], fieldnames: Sequence[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(fieldnames), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if v is None else v) for k, v in row.items()})
    return path


def trajectory_rows(index: int, report, sigmas: Sequence[float]) -> list[dict]:
    """Rows (trajectory, step, t, sigma, solver, kappa_hat, nfe, x0..) for one run."""
    rows = []
    for step, record in enumerate(report.records):
        row = {
            "trajectory": index,
            "step": step,
            "t": record.t_from,
            "sigma": float(sigmas[step]),
            "solver": record.label,
            "kappa_hat": record.kappa_hat,
            "nfe": record.nfe,
        }
        for d, value in enumerate(np.ravel(record.x_out)):
            row[f"x{d}"] = float(value)
        rows.append(row)
    return rows


def trajectory_fields(dim: int) -> list[str]:
    return ["trajectory", "step", "t", "sigma", "solver", "kappa_hat", "nfe"] + [f"x{d}" for d in range(dim)]
