import datetime as dt
from enum import Enum

from pydantic import BaseModel, Field, field_validator

from src.config.constants.app import BENCH_CHUNK_SIZES, BENCH_LINE_COUNT, DEFAULT_REPLICA_COUNT


class ReportFormat(str, Enum):
    csv = "CSV"
    text = "TEXT"


class BenchSpec(BaseModel):
    """BenchSpec parameterizes a chunk-size sweep over one synthetic corpus."""

    line_count: int = Field(BENCH_LINE_COUNT, ge=0)
    chunk_sizes: list[int] = Field(default_factory=lambda: list(BENCH_CHUNK_SIZES), min_length=1)
    timeout: dt.timedelta = dt.timedelta(minutes=5)
    replica_count: int = Field(DEFAULT_REPLICA_COUNT, ge=1)
    seed: int = 7
    include_raw_baseline: bool = True
    mean_interarrival: dt.timedelta = dt.timedelta(milliseconds=5)
    ledger_latency: dt.timedelta = dt.timedelta(microseconds=50)

    @field_validator("chunk_sizes")
    def check_chunk_sizes(cls, value: list[int]) -> list[int]:
        if any(size < 1 for size in value):
            raise ValueError("chunk sizes must be at least 1")

        return value


class BenchRow(BaseModel):
    """BenchRow holds the measurements for one chunk size."""

    chunk_size: int = Field(ge=1)
    record_count: int
    ledger_bytes: int
    total_bytes: int
    ingest_wall_time: dt.timedelta
    verify_wall_time: dt.timedelta

    @property
    def ingest_ms(self) -> int:
        return round(self.ingest_wall_time / dt.timedelta(milliseconds=1))

    @property
    def verify_ms(self) -> int:
        return round(self.verify_wall_time / dt.timedelta(milliseconds=1))


class BenchReport(BaseModel):
    """BenchReport holds one row per chunk size and, optionally, the raw-baseline ledger size at chunk size 1."""

    line_count: int = 0
    replica_count: int = DEFAULT_REPLICA_COUNT
    rows: list[BenchRow] = Field(default_factory=list)
    raw_baseline_bytes: int | None = None
