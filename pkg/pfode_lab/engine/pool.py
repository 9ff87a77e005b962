"""Order-preserving fan-out over independent trajectories."""

import os
from collections.abc import Iterable, Mapping
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional, TypeVar

from pfode_lab.errors import ConfigError

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "PFODE_THREADS"


def worker_count(env: Optional[Mapping[str, str]] = None) -> int:
    """Pool size from PFODE_THREADS, else min(4, cpu count)."""
    env = os.environ if env is None else env
    raw = env.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return min(4, os.cpu_count() or 1)
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from exc
    if value < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return value


def ordered_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> list[R]:
    """map() that may run on a thread pool; results keep input order."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
