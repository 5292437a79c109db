import datetime as dt
import pathlib
import threading
from typing import Annotated, Optional

from apscheduler.schedulers.background import BackgroundScheduler
from loguru import logger
import typer

from src import dependencies as deps
from src.config.constants.app import INTACT_MESSAGE, MODIFIED_MESSAGE
from src.config.exceptions import handle_errors
from src.schemas.grouping import GroupPolicy
from src.schemas.verification import VerificationMode, VerificationReport
from src.utils.config import parse_duration
from src.utils.jobs import schedule_verification_job
from src.utils.routers import LedgerOption


@handle_errors
def watch(
    ctx: typer.Context,
    file: Annotated[pathlib.Path, typer.Argument(help="Finished log file to keep checking.")],
    every: Annotated[dt.timedelta, typer.Option(parser=parse_duration, help="Interval between checks.")] = dt.timedelta(
        hours=1
    ),
    chunk_size: Annotated[Optional[int], typer.Option(min=1, help="Lines per group, as at ingest.")] = None,
    max_wait: Annotated[
        Optional[dt.timedelta], typer.Option(parser=parse_duration, help="Group time window, as at ingest.")
    ] = None,
    manifest: Annotated[Optional[pathlib.Path], typer.Option(help="Replay ingest boundaries from this file.")] = None,
    runs: Annotated[Optional[int], typer.Option(min=1, help="Stop after this many checks.")] = None,
    ledger_path: LedgerOption = None,
):
    """Re-verifies a finished log file at a fixed interval until interrupted, printing one status line per check."""

    settings = deps.override_settings(ctx, ledger_path=ledger_path)
    policy = GroupPolicy(group_size=chunk_size or settings.chunk_size, max_wait=max_wait or settings.max_wait)
    mode = VerificationMode.manifest if manifest is not None else VerificationMode.logtime

    done = threading.Event()
    completed = 0

    def on_report(report: VerificationReport) -> None:
        nonlocal completed
        typer.echo(INTACT_MESSAGE if report.all_valid else MODIFIED_MESSAGE)
        completed += 1
        if runs is not None and completed >= runs:
            done.set()

    scheduler = BackgroundScheduler()
    with deps.open_ledger(settings, read_only=True) as ledger:
        schedule_verification_job(file, policy, ledger, scheduler, every, mode, manifest, on_report)
        scheduler.start()
        logger.info(f"watching {file} every {every}")

        try:
            while not done.wait(1.0):
                pass
        except KeyboardInterrupt:
            logger.info("watch interrupted")
        finally:
            scheduler.shutdown(wait=True)
