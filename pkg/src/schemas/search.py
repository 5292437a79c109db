import base64
from typing import Any

from typing_extensions import Self

from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator

from src.schemas.grouping import Digest256
from src.schemas.logs import LogLevel


class ChunkMetadata(BaseModel):
    """ChunkMetadata locates an indexed chunk: its file, line offset, time span and ledger position."""

    model_config = ConfigDict(frozen=True)

    file: str
    first_line_index: int = Field(ge=0)
    first_timestamp: int | None = None
    last_timestamp: int | None = None
    ledger_index: int = Field(ge=0)
    archive_address: str | None = None


class ChunkRecord(BaseModel):
    """ChunkRecord is one verified chunk as stored in the search index: calculated hash, raw lines and metadata."""

    model_config = ConfigDict(frozen=True)

    digest: Digest256
    lines: list[bytes]
    metadata: ChunkMetadata

    @field_validator("lines", mode="before")
    def decode_lines(cls, value: Any) -> Any:
        """Accepts the base64 text produced by JSON serialization as well as raw bytes."""

        if isinstance(value, list):
            return [base64.b64decode(line) if isinstance(line, str) else line for line in value]

        return value

    @field_serializer("lines", when_used="json")
    def serialize_lines(self, lines: list[bytes]) -> list[str]:
        return [base64.b64encode(line).decode("ascii") for line in lines]


class Query(BaseModel):
    """Query is a conjunctive term search, optionally restricted to a time range and a log level."""

    model_config = ConfigDict(frozen=True)

    terms: list[str] = Field(default_factory=list)
    time_from: int | None = None
    time_to: int | None = None
    level: LogLevel | None = None
    limit: int = Field(10, gt=0)

    @model_validator(mode="after")
    def check_constraints(self) -> Self:
        if not self.terms and self.time_from is None and self.time_to is None and self.level is None:
            raise ValueError("a query needs at least one of terms, time range or level")

        return self


class SearchHit(BaseModel):
    """SearchHit is a matching chunk and the 0-based positions of its matching lines within the chunk."""

    record: ChunkRecord
    matching_lines: list[int]
