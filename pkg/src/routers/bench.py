import datetime as dt
import pathlib
import sys
from typing import Annotated, Optional

import typer

from src.config.exceptions import BenchAborted, handle_errors
from src.schemas.bench import BenchSpec, ReportFormat
from src.services.bench import emit_report, run_bench
from src.utils.config import parse_duration


@handle_errors
def bench(
    lines: Annotated[int, typer.Option(min=0, help="Corpus size in lines.")] = 100_000,
    chunk_size: Annotated[
        Optional[list[int]], typer.Option("--chunk-size", min=1, help="Chunk size to measure; repeatable.")
    ] = None,
    timeout: Annotated[dt.timedelta, typer.Option(parser=parse_duration, help="Group time window.")] = dt.timedelta(
        minutes=5
    ),
    replicas: Annotated[int, typer.Option(min=1, help="Ledger replica count.")] = 3,
    seed: Annotated[int, typer.Option(help="Corpus seed.")] = 7,
    raw_baseline: Annotated[bool, typer.Option(help="Also measure storing raw lines.")] = True,
    ledger_latency: Annotated[
        dt.timedelta, typer.Option(parser=parse_duration, help="Simulated ledger round trip per call.")
    ] = dt.timedelta(microseconds=50),
    format: Annotated[ReportFormat, typer.Option(case_sensitive=False, help="Report format.")] = ReportFormat.csv,
    output: Annotated[Optional[pathlib.Path], typer.Option(help="Write the report here instead of stdout.")] = None,
    workdir: Annotated[Optional[pathlib.Path], typer.Option(help="Keep corpus and journals in this directory.")] = None,
):
    """Sweeps chunk sizes over one synthetic corpus, measuring ledger records, storage and ingest/verify times."""

    values = {
        "line_count": lines,
        "timeout": timeout,
        "replica_count": replicas,
        "seed": seed,
        "include_raw_baseline": raw_baseline,
        "ledger_latency": ledger_latency,
    }
    if chunk_size:
        values["chunk_sizes"] = chunk_size

    try:
        report = run_bench(BenchSpec(**values), workdir)
    except BenchAborted as exc:
        if exc.report is not None:
            sys.stdout.buffer.write(emit_report(exc.report, format))
        raise

    rendered = emit_report(report, format)
    if output is None:
        sys.stdout.buffer.write(rendered)
        sys.stdout.flush()
    else:
        output.write_bytes(rendered)
