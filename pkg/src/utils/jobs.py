import datetime as dt
import pathlib
from typing import Callable

from apscheduler.job import Job
from apscheduler.schedulers.base import BaseScheduler
from apscheduler.triggers.interval import IntervalTrigger
from loguru import logger

from src.config.constants.app import INTACT_MESSAGE, MODIFIED_MESSAGE
from src.config.exceptions import LogstampError
from src.schemas.grouping import GroupPolicy
from src.schemas.verification import VerificationMode, VerificationReport
from src.services.ledger import Ledger
from src.services.verification import verify_file
from src.utils import config


def _run_verification(
    file: pathlib.Path,
    policy: GroupPolicy,
    ledger: Ledger,
    mode: VerificationMode,
    manifest_path: pathlib.Path | None,
    on_report: Callable[[VerificationReport], None] | None,
) -> None:
    """Verifies the file once, logging instead of raising so the scheduler keeps the job alive."""

    try:
        report = verify_file(file, policy, ledger, mode, manifest_path)
    except LogstampError as exc:
        logger.error(f"error re-verifying {file}: {exc}")
        return

    logger.info(f"scheduled check of {file}: {INTACT_MESSAGE if report.all_valid else MODIFIED_MESSAGE}")
    if on_report is not None:
        on_report(report)


def schedule_verification_job(
    file: pathlib.Path,
    policy: GroupPolicy,
    ledger: Ledger,
    scheduler: BaseScheduler,
    every: dt.timedelta,
    mode: VerificationMode = VerificationMode.logtime,
    manifest_path: pathlib.Path | None = None,
    on_report: Callable[[VerificationReport], None] | None = None,
) -> Job:
    """Schedules periodic re-verification of a finished log file."""

    job_id = f"verify:{file}"
    trigger = IntervalTrigger(seconds=every.total_seconds())

    job = config.setup_job(
        scheduler,
        _run_verification,
        job_id,
        trigger,
        file=file,
        policy=policy,
        ledger=ledger,
        mode=mode,
        manifest_path=manifest_path,
        on_report=on_report,
    )
    logger.info(f"scheduled '{job_id}' job to run every {every}")

    return job
