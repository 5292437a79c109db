from enum import Enum
import pathlib
from typing_extensions import Self

from pydantic import BaseModel, Field, model_validator

from src.schemas.archive import ContentAddress
from src.schemas.grouping import Digest256, GroupPolicy


class VerificationMode(str, Enum):
    logtime = "LOGTIME"
    manifest = "MANIFEST"


class VerdictStatus(str, Enum):
    intact = "INTACT"
    tampered = "TAMPERED"

    def __str__(self) -> str:
        return self.value


class GroupVerdict(BaseModel):
    """GroupVerdict is the ledger check of one replayed group. `ledger_index` is set iff the group is intact."""

    first_line_index: int = Field(ge=0)
    line_count: int = Field(ge=1)
    digest: Digest256
    status: VerdictStatus
    ledger_index: int | None = None

    @model_validator(mode="after")
    def check_index(self) -> Self:
        if (self.status is VerdictStatus.intact) != (self.ledger_index is not None):
            raise ValueError("ledger_index must be set exactly for intact verdicts")

        return self


class VerificationReport(BaseModel):
    """VerificationReport collects the verdicts for one file. `all_valid` holds iff no verdict is tampered, and only
    a valid file is archived or indexed."""

    file: pathlib.Path
    policy: GroupPolicy
    mode: VerificationMode
    verdicts: list[GroupVerdict]
    archived_as: ContentAddress | None = None
    anchor_index: int | None = None
    indexed: bool = False

    @property
    def all_valid(self) -> bool:
        return all(verdict.status is VerdictStatus.intact for verdict in self.verdicts)

    @property
    def line_count(self) -> int:
        return sum(verdict.line_count for verdict in self.verdicts)

    @model_validator(mode="after")
    def check_gating(self) -> Self:
        if not self.all_valid and (self.archived_as is not None or self.indexed):
            raise ValueError("a tampered file is never archived or indexed")

        return self


class LineRange(BaseModel):
    """LineRange is a half-open run `[start, end)` of lines sharing one verdict status."""

    start: int = Field(ge=0)
    end: int = Field(ge=0)
    status: VerdictStatus


class ChangeKind(str, Enum):
    modified = "MODIFIED"
    inserted = "INSERTED"
    deleted = "DELETED"


class LineChange(BaseModel):
    """LineChange pinpoints a difference between a current log file and its archived original.\n
    `current_line` / `archived_line` are 0-based and `None` when the line exists on one side only."""

    kind: ChangeKind
    current_line: int | None = None
    archived_line: int | None = None
    current: bytes | None = None
    archived: bytes | None = None
