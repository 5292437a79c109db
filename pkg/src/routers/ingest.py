import datetime as dt
import pathlib
import signal
import threading
from typing import Annotated, Optional

from loguru import logger
import typer

from src import dependencies as deps
from src.config.exceptions import handle_errors
from src.schemas.grouping import GroupPolicy
from src.schemas.ingest import IngestConfig, IngestReceipt, StopCondition
from src.services.ingest import run_ingest
from src.utils.config import parse_duration
from src.utils.routers import LedgerOption, echo_line


def _stop_condition(idle_stop: dt.timedelta | None, lines: int | None) -> StopCondition:
    if idle_stop is not None and lines is not None:
        raise typer.BadParameter("use either --idle-stop or --lines, not both")
    if idle_stop is not None:
        return StopCondition.idle(idle_stop)
    if lines is not None:
        return StopCondition.lines(lines)

    return StopCondition.explicit()


@handle_errors
def ingest(
    ctx: typer.Context,
    file: Annotated[pathlib.Path, typer.Argument(help="Log file to tail.")],
    chunk_size: Annotated[Optional[int], typer.Option(min=1, help="Lines per group.")] = None,
    timeout: Annotated[
        Optional[dt.timedelta], typer.Option(parser=parse_duration, help="Longest time a group stays open.")
    ] = None,
    manifest: Annotated[Optional[pathlib.Path], typer.Option(help="Append group boundaries to this file.")] = None,
    idle_stop: Annotated[
        Optional[dt.timedelta], typer.Option(parser=parse_duration, help="Stop after this long without new lines.")
    ] = None,
    lines: Annotated[Optional[int], typer.Option(min=0, help="Stop after this many lines.")] = None,
    poll_interval: Annotated[
        Optional[dt.timedelta], typer.Option(parser=parse_duration, help="Delay between polls of the file.")
    ] = None,
    ledger_path: LedgerOption = None,
):
    """Tails a log file and anchors the digest of every finalized group in the ledger. Receipts stream to standard
    output; without --idle-stop or --lines the run ends on Ctrl-C."""

    settings = deps.override_settings(ctx, ledger_path=ledger_path)
    policy = GroupPolicy(group_size=chunk_size or settings.chunk_size, max_wait=timeout or settings.max_wait)
    config = IngestConfig(
        policy=policy,
        poll_interval=min(poll_interval or settings.poll_interval, policy.max_wait / 4),
        manifest_path=manifest,
        stop_condition=_stop_condition(idle_stop, lines),
        seal_interval=settings.seal_interval,
        max_pending_groups=settings.max_pending_groups,
        strict_bytes=settings.strict_bytes,
    )

    stop_event = threading.Event()

    def request_stop(signum, frame) -> None:
        logger.info(f"received signal {signum}, finishing the open group")
        stop_event.set()

    previous = {signum: signal.signal(signum, request_stop) for signum in (signal.SIGINT, signal.SIGTERM)}

    def emit(receipt: IngestReceipt) -> None:
        echo_line(receipt.to_line())

    try:
        with deps.open_ledger(settings) as ledger:
            receipts = run_ingest(file, config, ledger, stop_event=stop_event, on_receipt=emit)
    finally:
        for signum, handler in previous.items():
            signal.signal(signum, handler)

    logger.info(f"ingest of {file} finished with {len(receipts)} receipts")
