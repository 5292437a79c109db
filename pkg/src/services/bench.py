import datetime as dt
import io
import pathlib
import tempfile
import time

from loguru import logger
import pandas as pd
from rich.console import Console
from rich.table import Table

from src.config.constants.app import BENCH_CSV_COLUMNS, DEFAULT_POLL_INTERVAL
from src.config.exceptions import BenchAborted, LogstampError
from src.schemas.bench import BenchReport, BenchRow, BenchSpec, ReportFormat
from src.schemas.grouping import GroupPolicy
from src.schemas.ingest import IngestConfig, StopCondition
from src.schemas.logs import GenSpec
from src.schemas.verification import VerificationMode
from src.services.ingest import run_ingest
from src.services.ledger import Ledger
from src.services.logs import generate_logs, split_lines
from src.services.verification import verify_file


def generate_corpus(spec: BenchSpec, path: pathlib.Path) -> int:
    gen_spec = GenSpec(count=spec.line_count, seed=spec.seed, mean_interarrival=spec.mean_interarrival)
    with path.open("wb") as file_:
        return generate_logs(gen_spec, file_)


def measure_chunk_size(spec: BenchSpec, corpus: pathlib.Path, chunk_size: int, journal: pathlib.Path) -> BenchRow:
    """Ingests the corpus into a fresh ledger, then verifies it by timestamp replay. Only the ingest and verify calls
    are timed."""

    policy = GroupPolicy(group_size=chunk_size, max_wait=spec.timeout)
    config = IngestConfig(
        policy=policy,
        poll_interval=min(DEFAULT_POLL_INTERVAL, spec.timeout / 4),
        stop_condition=StopCondition.lines(spec.line_count),
        seal_interval=None,
    )

    with Ledger(journal, latency=spec.ledger_latency) as ledger:
        start = time.perf_counter()
        receipts = run_ingest(corpus, config, ledger)
        ingest_wall_time = dt.timedelta(seconds=time.perf_counter() - start)

        storage = ledger.storage_report(spec.replica_count)

        start = time.perf_counter()
        report = verify_file(corpus, policy, ledger, VerificationMode.logtime)
        verify_wall_time = dt.timedelta(seconds=time.perf_counter() - start)

    if not report.all_valid:
        raise BenchAborted(f"chunk size {chunk_size}: replay of the untouched corpus did not verify", None)

    logger.info(
        f"chunk size {chunk_size}: {len(receipts)} records, {storage.ledger_bytes_one_replica} bytes per replica, "
        f"ingest {ingest_wall_time / dt.timedelta(milliseconds=1):.0f} ms, "
        f"verify {verify_wall_time / dt.timedelta(milliseconds=1):.0f} ms"
    )

    return BenchRow(
        chunk_size=chunk_size,
        record_count=storage.record_count,
        ledger_bytes=storage.ledger_bytes_one_replica,
        total_bytes=storage.total_bytes,
        ingest_wall_time=ingest_wall_time,
        verify_wall_time=verify_wall_time,
    )


def measure_raw_baseline(corpus: pathlib.Path, journal: pathlib.Path) -> int:
    """Ledger bytes of one replica when every line is stored whole instead of hashed."""

    with Ledger(journal) as ledger:
        for line in split_lines(corpus.read_bytes()):
            ledger.store_raw(line)
        ledger.seal_block()

        return ledger.storage_report(1).ledger_bytes_one_replica


def _run_rows(spec: BenchSpec, workdir: pathlib.Path, report: BenchReport) -> None:
    corpus = workdir / "corpus.log"
    generate_corpus(spec, corpus)

    for chunk_size in sorted(set(spec.chunk_sizes)):
        report.rows.append(measure_chunk_size(spec, corpus, chunk_size, workdir / f"ledger-n{chunk_size}.lsj"))

    if spec.include_raw_baseline:
        report.raw_baseline_bytes = measure_raw_baseline(corpus, workdir / "ledger-raw.lsj")
        logger.info(f"raw baseline: {report.raw_baseline_bytes} bytes per replica")


def run_bench(spec: BenchSpec, workdir: pathlib.Path | None = None) -> BenchReport:
    """Generates one corpus and sweeps the chunk sizes over it, one fresh ledger per size. Rows run sequentially. A
    failing row raises `BenchAborted` carrying the rows measured so far."""

    report = BenchReport(line_count=spec.line_count, replica_count=spec.replica_count)
    logger.info(f"benchmarking {spec.line_count} lines over chunk sizes {sorted(set(spec.chunk_sizes))}")

    try:
        if workdir is not None:
            workdir.mkdir(parents=True, exist_ok=True)
            _run_rows(spec, workdir, report)
        else:
            with tempfile.TemporaryDirectory(prefix="logstamp-bench-") as directory:
                _run_rows(spec, pathlib.Path(directory), report)
    except BenchAborted as exc:
        exc.report = report
        logger.error(f"error running benchmark: {exc}")
        raise
    except (LogstampError, OSError) as exc:
        logger.error(f"error running benchmark: {exc}")
        raise BenchAborted(str(exc), report)

    return report


def report_frame(report: BenchReport) -> pd.DataFrame:
    rows = [
        [row.chunk_size, row.record_count, row.ledger_bytes, row.total_bytes, row.ingest_ms, row.verify_ms]
        for row in sorted(report.rows, key=lambda row: row.chunk_size)
    ]
    return pd.DataFrame(rows, columns=BENCH_CSV_COLUMNS)


def emit_report(report: BenchReport, format: ReportFormat = ReportFormat.csv) -> bytes:
    """Renders the report ordered by chunk size: CSV with a fixed header, or an aligned text table."""

    frame = report_frame(report)

    if format is ReportFormat.csv:
        return frame.to_csv(index=False, lineterminator="\n").encode("utf-8")

    table = Table(title=f"{report.line_count} lines, {report.replica_count} replicas")
    for column in BENCH_CSV_COLUMNS:
        table.add_column(column, justify="right")
    for values in frame.itertuples(index=False):
        table.add_row(*(str(value) for value in values))
    if report.raw_baseline_bytes is not None:
        table.caption = f"raw baseline at chunk size 1: {report.raw_baseline_bytes} bytes per replica"

    buffer = io.StringIO()
    Console(file=buffer, width=120, color_system=None).print(table)
    return buffer.getvalue().encode("utf-8")
