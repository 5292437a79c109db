import datetime as dt
import pathlib
import sys
from typing import Annotated, Optional

from loguru import logger
import typer

from src.config.constants.app import DEFAULT_SOURCE_POOL
from src.config.exceptions import handle_errors
from src.schemas.logs import GenSpec
from src.services.logs import generate_logs
from src.utils.clock import SystemClock, nanos_to_datetime
from src.utils.config import parse_duration
from src.utils.routers import timestamp_option


@handle_errors
def generate(
    output: Annotated[pathlib.Path, typer.Argument(help="File to write, '-' for standard output.")] = pathlib.Path("-"),
    count: Annotated[int, typer.Option(min=0, help="Number of lines.")] = 1000,
    seed: Annotated[int, typer.Option(help="Generator seed.")] = 7,
    mean_interarrival: Annotated[
        dt.timedelta, typer.Option(parser=parse_duration, help="Mean gap between lines, e.g. 5ms.")
    ] = dt.timedelta(milliseconds=5),
    start: Annotated[Optional[str], typer.Option(help="RFC-3339 timestamp of the first line.")] = None,
    sources: Annotated[Optional[list[str]], typer.Option("--source", help="Source names to draw from.")] = None,
    realtime: Annotated[bool, typer.Option(help="Pace lines by their gaps, simulating a live writer.")] = False,
    speed: Annotated[float, typer.Option(min=0.001, help="Speed-up factor for --realtime.")] = 1.0,
):
    """Writes deterministic synthetic log lines in the canonical layout."""

    values = {"count": count, "seed": seed, "mean_interarrival": mean_interarrival}
    start_ns = timestamp_option(start)
    if start_ns is not None:
        values["start_time"] = nanos_to_datetime(start_ns)
    values["source_pool"] = sources or list(DEFAULT_SOURCE_POOL)

    spec = GenSpec(**values)
    pace = SystemClock() if realtime else None

    if str(output) == "-":
        generate_logs(spec, sys.stdout.buffer, pace, speed)
        sys.stdout.flush()
        return

    with output.open("ab" if realtime else "wb") as file_:
        emitted = generate_logs(spec, file_, pace, speed)

    logger.info(f"wrote {emitted} lines to {output}")
