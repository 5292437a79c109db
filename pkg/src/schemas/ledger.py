from enum import Enum
from typing_extensions import Self

from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator

from src.schemas.grouping import Digest256


class RecordKind(int, Enum):
    """Whether a ledger record holds a 32-byte digest or a raw group payload (raw baseline)."""

    hash = 0
    raw = 1


class LedgerRecord(BaseModel):
    """LedgerRecord is one entry of the log storage contract: the payload stored at position `index`.\n
    `block_height` is -1 while the record is pending and fixed once a block seals it."""

    model_config = ConfigDict(frozen=True)

    index: int = Field(ge=0)
    kind: RecordKind = RecordKind.hash
    payload: bytes
    submitted_at: int
    block_height: int = Field(-1, ge=-1)

    @property
    def key(self) -> Digest256:
        """The digest the record is looked up by: the payload itself for hash records, its SHA-256 for raw ones."""

        if self.kind is RecordKind.hash:
            return Digest256(value=self.payload)
        return Digest256.of(self.payload)


class Block(BaseModel):
    """Block is a PoA-sealed batch of record indices chained to its predecessor through `prev_hash`."""

    model_config = ConfigDict(frozen=True)

    height: int = Field(ge=0)
    prev_hash: bytes
    records: tuple[int, ...]
    sealer_id: str
    sealed_at: int
    block_hash: bytes


class ChainStatus(BaseModel):
    """ChainStatus is the outcome of a chain check: `broken_at` is the first height whose hash or link is wrong."""

    broken_at: int | None = None

    @computed_field
    @property
    def ok(self) -> bool:
        return self.broken_at is None

    def __str__(self) -> str:
        return "ok" if self.ok else f"broken_at {self.broken_at}"


class StorageReport(BaseModel):
    """StorageReport accounts for the ledger's footprint: S bytes on one replica, N replicas, S x N in total."""

    record_count: int = Field(ge=0)
    block_count: int = Field(ge=0)
    ledger_bytes_one_replica: int = Field(ge=0)
    replica_count: int = Field(ge=1)
    total_bytes: int = Field(ge=0)

    @model_validator(mode="after")
    def check_total(self) -> Self:
        if self.total_bytes != self.ledger_bytes_one_replica * self.replica_count:
            raise ValueError("total_bytes must equal ledger_bytes_one_replica x replica_count")

        return self
