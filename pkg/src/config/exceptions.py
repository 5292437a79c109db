import functools
from typing import Any, Callable, TypeVar

from loguru import logger
import typer

from src.config.constants.exceptions import ERROR_MAPPING, EXIT_IO


F = TypeVar("F", bound=Callable[..., Any])


class LogstampError(Exception):
    """Base class of all domain errors. `type_` selects the entry in `ERROR_MAPPING`."""

    type_ = "unknown_error"

    def __init__(self, message: str | None = None) -> None:
        self.message = message if message else ERROR_MAPPING[self.type_].message
        super().__init__(self.message)

    @property
    def exit_code(self) -> int:
        return ERROR_MAPPING[self.type_].exit_code


class ParseError(LogstampError):
    """Raised when a log line has no parseable timestamp or an unknown field layout."""

    type_ = "parse_error"

    def __init__(self, reason: str, offset: int) -> None:
        self.reason = reason
        self.offset = offset
        super().__init__(f"{reason} at byte offset {offset}")


class SinkError(LogstampError):
    """Raised when the generator's sink fails. `emitted` is the number of lines written before the failure."""

    type_ = "sink_error"

    def __init__(self, emitted: int, reason: str) -> None:
        self.emitted = emitted
        super().__init__(f"sink failed after {emitted} lines: {reason}")


class EmptyGroup(LogstampError):
    type_ = "empty_group"


class LedgerClosed(LogstampError):
    type_ = "ledger_closed"


class LedgerUnavailable(LogstampError):
    """Transient ledger failure; callers may retry."""

    type_ = "ledger_unavailable"


class IndexOutOfRange(LogstampError):
    type_ = "index_out_of_range"

    def __init__(self, index: int, log_count: int) -> None:
        self.index = index
        super().__init__(f"index {index} outside [0, {log_count})")


class InvalidReplicaCount(LogstampError):
    type_ = "invalid_replica_count"


class JournalCorrupted(LogstampError):
    """Raised on structural corruption of a ledger journal. `height` is the block height whose region holds the
    damage: the height of the block being parsed, or of the block that would have sealed a damaged record."""

    type_ = "journal_corrupted"

    def __init__(self, reason: str, offset: int, height: int) -> None:
        self.offset = offset
        self.height = height
        super().__init__(f"{reason} at byte offset {offset} (block height {height})")


class JournalTornTail(JournalCorrupted):
    """The last journal entry stops short of the end of file, as an interrupted append leaves it. `offset` is where
    that entry starts."""


class FileVanished(LogstampError):
    """Raised when the tailed file disappears. Carries the receipts produced before the file vanished."""

    type_ = "file_vanished"

    def __init__(self, path: str, receipts: list | None = None) -> None:
        self.path = path
        self.receipts = receipts if receipts is not None else []
        super().__init__(f"log file '{path}' vanished; its raw data cannot be recovered from the ledger")


class TruncationDetected(LogstampError):
    type_ = "truncation_detected"

    def __init__(self, path: str, offset: int, size: int) -> None:
        super().__init__(f"log file '{path}' shrank to {size} bytes while tailing at offset {offset}")


class ManifestMismatch(LogstampError):
    type_ = "manifest_mismatch"


class LogFileNotFound(LogstampError):
    type_ = "log_file_not_found"

    def __init__(self, path: str) -> None:
        super().__init__(f"log file '{path}' not found")


class ArchiveNotFound(LogstampError):
    type_ = "archive_not_found"


class AuthenticationFailure(LogstampError):
    type_ = "authentication_failure"


class ArchiveIOError(LogstampError):
    type_ = "archive_io_error"


class DigestMismatch(LogstampError):
    type_ = "digest_mismatch"


class NotAnchored(LogstampError):
    type_ = "not_anchored"


class InvalidKey(LogstampError):
    type_ = "invalid_key"


class BenchAborted(LogstampError):
    """Raised when a bench row fails. `report` holds the rows completed before the failure."""

    type_ = "bench_aborted"

    def __init__(self, reason: str, report: Any) -> None:
        self.report = report
        super().__init__(reason)


def handle_errors(function: F) -> F:
    """Wraps a CLI command, converting domain and I/O errors into a one-line message on stderr and the mapped exit
    code."""

    @functools.wraps(function)
    def wrapper(*args, **kwargs):
        try:
            return function(*args, **kwargs)
        except LogstampError as exc:
            logger.error(f"{exc.type_}: {exc.message}")
            typer.echo(f"error: {exc.message}", err=True)
            raise typer.Exit(exc.exit_code)
        except OSError as exc:
            logger.error(f"i/o error: {exc}")
            typer.echo(f"error: {exc}", err=True)
            raise typer.Exit(EXIT_IO)

    return wrapper  # type: ignore
