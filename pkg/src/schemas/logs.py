import datetime as dt
from enum import Enum

from pydantic import BaseModel, ConfigDict, Field

from src.config.constants.app import DEFAULT_SOURCE_POOL
from src.utils.clock import nanos_to_datetime


class LogLevel(str, Enum):
    info = "INFO"
    debug = "DEBUG"
    warn = "WARN"
    error = "ERROR"
    other = "OTHER"

    def __str__(self) -> str:
        return self.value


class LogEntry(BaseModel):
    """LogEntry is one parsed log line: timestamp (nanoseconds since the epoch), level, source machine/service and
    message, alongside the verbatim bytes it was parsed from.\n
    `level_name` holds the level token as written, which differs from `level` only for `OTHER`."""

    model_config = ConfigDict(frozen=True)

    raw: bytes
    timestamp_ns: int
    level: LogLevel
    level_name: str
    source: str
    message: str

    @property
    def timestamp(self) -> dt.datetime:
        return nanos_to_datetime(self.timestamp_ns)


class GenSpec(BaseModel):
    """GenSpec parameterizes the synthetic log generator. Identical specs produce byte-identical streams."""

    model_config = ConfigDict(frozen=True)

    count: int = Field(ge=0)
    seed: int = Field(ge=-(2**63), lt=2**64)
    mean_interarrival: dt.timedelta = dt.timedelta(milliseconds=5)
    start_time: dt.datetime = dt.datetime(2024, 1, 12, 10, 0, tzinfo=dt.timezone.utc)
    source_pool: list[str] = Field(default_factory=lambda: list(DEFAULT_SOURCE_POOL), min_length=1)
