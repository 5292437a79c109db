import datetime as dt
import time
from typing import Callable, Protocol


NANOS_PER_SECOND = 1_000_000_000


def to_nanos(duration: dt.timedelta) -> int:
    """Converts a timedelta into integer nanoseconds."""

    return (duration.days * 86_400 + duration.seconds) * NANOS_PER_SECOND + duration.microseconds * 1_000


def datetime_to_nanos(instant: dt.datetime) -> int:
    """Converts an aware datetime into integer nanoseconds since the epoch. Naive datetimes are taken as UTC."""

    if instant.tzinfo is None:
        instant = instant.replace(tzinfo=dt.timezone.utc)

    return to_nanos(instant - dt.datetime(1970, 1, 1, tzinfo=dt.timezone.utc))


def nanos_to_datetime(nanos: int) -> dt.datetime:
    """Converts nanoseconds since the epoch into a UTC datetime, truncating to microseconds."""

    return dt.datetime(1970, 1, 1, tzinfo=dt.timezone.utc) + dt.timedelta(microseconds=nanos // 1_000)


class Clock(Protocol):
    """Source of instants (integer nanoseconds since the epoch) and of waiting."""

    def now_ns(self) -> int: ...

    def sleep(self, seconds: float) -> None: ...


class SystemClock:
    """Wall clock backed by `time.time_ns` and `time.sleep`."""

    def now_ns(self) -> int:
        return time.time_ns()

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)


class FakeClock:
    """Deterministic clock for tests. `sleep` advances the current instant and then runs every registered hook with
    the new instant, letting a test append to a tailed file "while" the ingest loop waits."""

    def __init__(self, start_ns: int = 0) -> None:
        self._now = start_ns
        self.hooks: list[Callable[[int], None]] = []

    def now_ns(self) -> int:
        return self._now

    def sleep(self, seconds: float) -> None:
        self.advance(int(seconds * NANOS_PER_SECOND))

    def advance(self, nanos: int) -> None:
        self._now += max(nanos, 0)
        for hook in list(self.hooks):
            hook(self._now)
