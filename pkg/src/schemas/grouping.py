import datetime as dt
from enum import Enum
import hashlib
from typing import Any

from typing_extensions import Self

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_serializer, model_validator

from src.config.constants.app import DIGEST_SIZE


class ClockMode(str, Enum):
    wall = "WALL"
    logtime = "LOGTIME"


class FinalizeReason(str, Enum):
    size = "SIZE"
    timeout = "TIMEOUT"
    end_of_stream = "END_OF_STREAM"

    def __str__(self) -> str:
        return self.value


class Digest256(BaseModel):
    """Digest256 wraps a 32-byte SHA-256 value. Hashable, compares by value."""

    model_config = ConfigDict(frozen=True)

    value: bytes

    @model_validator(mode="before")
    @classmethod
    def parse_hex(cls, data: Any) -> Any:
        """Accepts the hex rendering produced by JSON serialization."""

        if isinstance(data, str):
            return {"value": bytes.fromhex(data)}

        return data

    @field_validator("value")
    def check_length(cls, value: bytes) -> bytes:
        if len(value) != DIGEST_SIZE:
            raise ValueError(f"digest must be {DIGEST_SIZE} bytes, got {len(value)}")

        return value

    @property
    def hex(self) -> str:
        return self.value.hex()

    @classmethod
    def from_hex(cls, hex_value: str) -> Self:
        return cls(value=bytes.fromhex(hex_value))

    @classmethod
    def of(cls, data: bytes) -> Self:
        """SHA-256 of the given bytes."""

        return cls(value=hashlib.sha256(data).digest())

    @model_serializer(when_used="json")
    def serialize_hex(self) -> str:
        return self.hex

    def __str__(self) -> str:
        return self.hex


class GroupPolicy(BaseModel):
    """GroupPolicy holds the hybrid grouping thresholds: a group closes at `group_size` lines or once it spans
    `max_wait`, whichever comes first."""

    model_config = ConfigDict(frozen=True)

    group_size: int = Field(ge=1)
    max_wait: dt.timedelta

    @field_validator("max_wait")
    def check_max_wait(cls, value: dt.timedelta) -> dt.timedelta:
        if value <= dt.timedelta(0):
            raise ValueError("max_wait must be positive")

        return value


class GroupBoundary(BaseModel):
    """GroupBoundary locates a group inside its source file."""

    model_config = ConfigDict(frozen=True)

    first_line_index: int = Field(ge=0)
    line_count: int = Field(ge=1)
    reason: FinalizeReason
    generation: int = Field(0, ge=0)

    @property
    def last_line_index(self) -> int:
        return self.first_line_index + self.line_count - 1


class FinalizedGroup(BaseModel):
    """FinalizedGroup is a closed batch of raw lines (no terminators) covering the contiguous line range
    `[first_line_index, first_line_index + len(lines) - 1]`.\n
    Timestamps are the clock values the lines were pushed with; they are `None` only for groups rebuilt from a
    manifest whose boundary lines carry no parseable timestamp."""

    model_config = ConfigDict(frozen=True)

    lines: list[bytes] = Field(min_length=1)
    first_line_index: int = Field(ge=0)
    first_timestamp: int | None = None
    last_timestamp: int | None = None
    reason: FinalizeReason
    generation: int = Field(0, ge=0)

    @property
    def line_count(self) -> int:
        return len(self.lines)

    @property
    def boundary(self) -> GroupBoundary:
        return GroupBoundary(
            first_line_index=self.first_line_index,
            line_count=self.line_count,
            reason=self.reason,
            generation=self.generation,
        )


class ManifestEntry(GroupBoundary):
    """ManifestEntry is one line of a grouping manifest: a group boundary and its digest."""

    digest: str = Field(pattern=r"^[0-9a-f]{64}$")
