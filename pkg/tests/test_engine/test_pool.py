"""Tests for the thread fan-out."""

import os
import time

import pytest

from pfode_lab.engine.pool import ordered_map, worker_count
from pfode_lab.errors import ConfigError


def test_worker_count_from_env():
    assert worker_count({"PFODE_THREADS": "3"}) == 3
    assert worker_count({}) == min(4, os.cpu_count() or 1)
    assert worker_count({"PFODE_THREADS": " "}) == min(4, os.cpu_count() or 1)


@pytest.mark.parametrize("raw", ["0", "-2", "zero"])
def test_worker_count_rejects_bad_values(raw):
    with pytest.raises(ConfigError, match="PFODE_THREADS"):
        worker_count({"PFODE_THREADS": raw})


def test_ordered_map_keeps_order():
    """Results come back in input order however the workers finish."""

    def slow_square(i):
        time.sleep(0.001 * (5 - i))
        return i * i

    assert ordered_map(slow_square, range(5), threads=4) == [0, 1, 4, 9, 16]
    assert ordered_map(slow_square, range(5), threads=1) == [0, 1, 4, 9, 16]
    assert ordered_map(slow_square, [], threads=4) == []
