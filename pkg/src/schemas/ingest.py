import datetime as dt
from enum import Enum
import pathlib
from typing_extensions import Self

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.config.constants.app import DEFAULT_MAX_PENDING_GROUPS, DEFAULT_POLL_INTERVAL, DEFAULT_SEAL_INTERVAL
from src.schemas.grouping import Digest256, GroupBoundary, GroupPolicy


class StopKind(str, Enum):
    explicit = "EXPLICIT"
    idle_after = "IDLE_AFTER"
    line_count = "LINE_COUNT"


class StopCondition(BaseModel):
    """StopCondition tells an ingest run when to terminate: on an external stop signal, after a quiet period, or
    after a number of lines."""

    model_config = ConfigDict(frozen=True)

    kind: StopKind = StopKind.explicit
    idle_after: dt.timedelta | None = None
    line_count: int | None = Field(None, ge=0)

    @model_validator(mode="after")
    def check_parameters(self) -> Self:
        if self.kind is StopKind.idle_after and (self.idle_after is None or self.idle_after <= dt.timedelta(0)):
            raise ValueError("IDLE_AFTER needs a positive idle_after duration")
        if self.kind is StopKind.line_count and self.line_count is None:
            raise ValueError("LINE_COUNT needs line_count")

        return self

    @classmethod
    def explicit(cls) -> Self:
        return cls(kind=StopKind.explicit)

    @classmethod
    def idle(cls, duration: dt.timedelta) -> Self:
        return cls(kind=StopKind.idle_after, idle_after=duration)

    @classmethod
    def lines(cls, count: int) -> Self:
        return cls(kind=StopKind.line_count, line_count=count)


class IngestConfig(BaseModel):
    """IngestConfig bundles the inputs of one ingest run.\n
    `seal_interval` of `None` seals a single block when the run ends."""

    model_config = ConfigDict(frozen=True)

    policy: GroupPolicy
    poll_interval: dt.timedelta = DEFAULT_POLL_INTERVAL
    manifest_path: pathlib.Path | None = None
    stop_condition: StopCondition = Field(default_factory=StopCondition.explicit)
    seal_interval: dt.timedelta | None = DEFAULT_SEAL_INTERVAL
    max_pending_groups: int = Field(DEFAULT_MAX_PENDING_GROUPS, ge=1)
    strict_bytes: bool = False

    @model_validator(mode="after")
    def check_poll_interval(self) -> Self:
        if self.poll_interval <= dt.timedelta(0) or self.poll_interval >= self.policy.max_wait:
            raise ValueError("poll_interval must be positive and shorter than policy.max_wait")

        return self


class IngestReceipt(BaseModel):
    """IngestReceipt proves a finalized group was anchored: `ledger.get_log_hash(ledger_index) == digest`."""

    model_config = ConfigDict(frozen=True)

    group: GroupBoundary
    digest: Digest256
    ledger_index: int = Field(ge=0)
    submitted_at: int
    first_arrival: int

    def to_line(self) -> dict:
        """Flat rendering used for the receipt stream on standard output."""

        return {
            "generation": self.group.generation,
            "first_line_index": self.group.first_line_index,
            "line_count": self.group.line_count,
            "reason": self.group.reason.value,
            "digest": self.digest.hex,
            "ledger_index": self.ledger_index,
            "submitted_at": self.submitted_at,
        }
