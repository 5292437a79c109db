import datetime as dt
import re
from typing import Callable

from apscheduler.job import Job
from apscheduler.schedulers.base import BaseScheduler
from apscheduler.triggers.base import BaseTrigger


DURATION_PATTERN = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(us|ms|s|m|h)?\s*$")
DURATION_UNITS = {
    "us": dt.timedelta(microseconds=1),
    "ms": dt.timedelta(milliseconds=1),
    "s": dt.timedelta(seconds=1),
    "m": dt.timedelta(minutes=1),
    "h": dt.timedelta(hours=1),
}


def parse_duration(value: str | float | int | dt.timedelta) -> dt.timedelta:
    """Parses CLI durations such as `500ms`, `2s`, `1.5m` or `1h`. Bare numbers are seconds."""

    if isinstance(value, dt.timedelta):
        return value
    if isinstance(value, (int, float)):
        return dt.timedelta(seconds=value)

    match = DURATION_PATTERN.match(value)
    if match is None:
        raise ValueError(f"invalid duration '{value}', expected e.g. 500ms, 2s, 1m")

    amount, unit = match.groups()
    return float(amount) * DURATION_UNITS[unit or "s"]


def setup_job(
    scheduler: BaseScheduler,
    function: Callable | str,
    job_id: str | None = None,
    trigger: BaseTrigger | None = None,
    misfire_grace_time: int | None = 60,
    max_instances: int = 1,
    *args,
    **kwargs,
) -> Job:
    """Creates a background job with the given parameters and registers it with the scheduler."""

    job = scheduler.add_job(
        function, trigger, args, kwargs, job_id, misfire_grace_time=misfire_grace_time, max_instances=max_instances
    )

    return job
