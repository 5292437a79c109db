import difflib
import pathlib
from typing import Protocol

from loguru import logger

from src.config.constants.app import INTACT_MESSAGE, MODIFIED_MESSAGE
from src.config.exceptions import LogFileNotFound, ManifestMismatch, ParseError
from src.schemas.archive import ArchiveKey, ContentAddress
from src.schemas.grouping import ClockMode, FinalizedGroup, FinalizeReason, GroupPolicy
from src.schemas.search import ChunkMetadata, ChunkRecord
from src.schemas.verification import (
    ChangeKind,
    GroupVerdict,
    LineChange,
    LineRange,
    VerdictStatus,
    VerificationMode,
    VerificationReport,
)
from src.services.archive import ArchiveStore
from src.services.grouping import group_digest, group_lines, read_manifest
from src.services.ledger import Ledger
from src.services.logs import extract_timestamp, split_lines


class ArchiveHandle(Protocol):
    def put(self, plaintext: bytes, key: ArchiveKey) -> ContentAddress: ...


class IndexHandle(Protocol):
    def index_chunks(self, records: list[ChunkRecord], ledger: Ledger | None = None) -> int: ...


def read_log_file(file: pathlib.Path) -> bytes:
    try:
        return file.read_bytes()
    except FileNotFoundError:
        raise LogFileNotFound(str(file))
    except OSError as exc:
        logger.error(f"error reading log file {file}: {exc}")
        raise


def _timestamp_or_none(line: bytes) -> int | None:
    try:
        return extract_timestamp(line)
    except ParseError:
        return None


def replay_logtime(lines: list[bytes], policy: GroupPolicy) -> list[FinalizedGroup]:
    """Regroups a finished file by its own timestamps. Every line must carry one."""

    pairs = []
    for number, line in enumerate(lines):
        try:
            pairs.append((line, extract_timestamp(line)))
        except ParseError as exc:
            logger.error(f"error parsing line {number} during verification: {exc}")
            raise ParseError(f"line {number}: {exc.reason}", exc.offset)

    return group_lines(pairs, policy, ClockMode.logtime)


def replay_manifest(lines: list[bytes], manifest_path: pathlib.Path, generation: int = 0) -> list[FinalizedGroup]:
    """Regroups a finished file along the boundaries recorded at ingest. Lines past the last recorded boundary form
    one extra group."""

    entries = read_manifest(manifest_path, generation)
    claimed = sum(entry.line_count for entry in entries)
    if claimed > len(lines):
        raise ManifestMismatch(f"manifest covers {claimed} lines but the file holds {len(lines)}")

    spans = [(entry.first_line_index, entry.line_count, entry.reason) for entry in entries]
    if claimed < len(lines):
        logger.warning(f"{len(lines) - claimed} lines past the manifest are verified as one extra group")
        spans.append((claimed, len(lines) - claimed, FinalizeReason.end_of_stream))

    groups = []
    for first, count, reason in spans:
        group_lines_ = lines[first : first + count]
        timestamps = [timestamp for timestamp in map(_timestamp_or_none, group_lines_) if timestamp is not None]
        groups.append(
            FinalizedGroup(
                lines=group_lines_,
                first_line_index=first,
                first_timestamp=timestamps[0] if timestamps else None,
                last_timestamp=max(timestamps) if timestamps else None,
                reason=reason,
                generation=generation,
            )
        )

    return groups


def verify_file(
    file: pathlib.Path,
    policy: GroupPolicy,
    ledger: Ledger,
    mode: VerificationMode = VerificationMode.logtime,
    manifest_path: pathlib.Path | None = None,
    manifest_generation: int = 0,
    archive: ArchiveHandle | None = None,
    archive_key: ArchiveKey | None = None,
    index: IndexHandle | None = None,
    strict_bytes: bool = False,
) -> VerificationReport:
    """Replays `file` into groups, checks every group digest against the ledger, and reports per-group verdicts.\n
    Only a fully intact file is archived (its content address is then anchored as one more ledger record) and has
    its chunks indexed."""

    data = read_log_file(file)
    lines = split_lines(data, strict_bytes)

    if mode is VerificationMode.manifest:
        if manifest_path is None:
            raise ManifestMismatch("MANIFEST verification needs a manifest")
        groups = replay_manifest(lines, manifest_path, manifest_generation)
    else:
        groups = replay_logtime(lines, policy)

    verdicts = []
    digests = []
    for group in groups:
        digest = group_digest(group)
        ledger_index = ledger.contains(digest)
        status = VerdictStatus.intact if ledger_index is not None else VerdictStatus.tampered
        if status is VerdictStatus.tampered:
            logger.warning(
                f"tampered group detected: lines {group.first_line_index}..{group.boundary.last_line_index}"
            )

        digests.append(digest)
        verdicts.append(
            GroupVerdict(
                first_line_index=group.first_line_index,
                line_count=group.line_count,
                digest=digest,
                status=status,
                ledger_index=ledger_index,
            )
        )

    report = VerificationReport(file=file, policy=policy, mode=mode, verdicts=verdicts)
    if not report.all_valid:
        logger.info(f"{MODIFIED_MESSAGE}: {file}")
        return report

    logger.info(f"{INTACT_MESSAGE}: {file}")

    if archive is not None and archive_key is not None:
        report.archived_as = archive.put(data, archive_key)
        report.anchor_index = ledger.store_log_hash(report.archived_as.digest)
        ledger.seal_block()
        logger.info(f"archived {file} as {report.archived_as}, anchored as record {report.anchor_index}")

    if index is not None:
        address = report.archived_as.digest.hex if report.archived_as is not None else None
        records = [
            ChunkRecord(
                digest=digest,
                lines=group.lines,
                metadata=ChunkMetadata(
                    file=str(file),
                    first_line_index=group.first_line_index,
                    first_timestamp=group.first_timestamp,
                    last_timestamp=group.last_timestamp,
                    ledger_index=verdict.ledger_index,  # type: ignore[arg-type]
                    archive_address=address,
                ),
            )
            for group, digest, verdict in zip(groups, digests, verdicts)
        ]
        index.index_chunks(records, ledger)
        report.indexed = True

    return report


def localize(report: VerificationReport) -> list[LineRange]:
    """Collapses the verdicts into maximal runs of lines sharing one status, covering the whole file."""

    ranges: list[LineRange] = []
    for verdict in report.verdicts:
        end = verdict.first_line_index + verdict.line_count
        if ranges and ranges[-1].status is verdict.status and ranges[-1].end == verdict.first_line_index:
            ranges[-1] = LineRange(start=ranges[-1].start, end=end, status=verdict.status)
        else:
            ranges.append(LineRange(start=verdict.first_line_index, end=end, status=verdict.status))

    return ranges


def pinpoint_changes(current: list[bytes], archived: list[bytes]) -> list[LineChange]:
    """Line-level differences between a current file and its archived original. Replaced blocks pair lines up as
    modifications; the unpaired rest are insertions or deletions."""

    changes = []
    matcher = difflib.SequenceMatcher(a=archived, b=current, autojunk=False)

    for tag, a_start, a_end, b_start, b_end in matcher.get_opcodes():
        if tag == "equal":
            continue

        paired = min(a_end - a_start, b_end - b_start) if tag == "replace" else 0
        for offset in range(paired):
            changes.append(
                LineChange(
                    kind=ChangeKind.modified,
                    current_line=b_start + offset,
                    archived_line=a_start + offset,
                    current=current[b_start + offset],
                    archived=archived[a_start + offset],
                )
            )
        for position in range(a_start + paired, a_end):
            changes.append(LineChange(kind=ChangeKind.deleted, archived_line=position, archived=archived[position]))
        for position in range(b_start + paired, b_end):
            changes.append(LineChange(kind=ChangeKind.inserted, current_line=position, current=current[position]))

    return changes


def diff_against_archive(
    file: pathlib.Path, address: ContentAddress, archive: ArchiveStore, key: ArchiveKey, strict_bytes: bool = False
) -> list[LineChange]:
    """Decrypts the archived copy at `address` and pinpoints how `file` differs from it."""

    archived = split_lines(archive.get(address, key), strict_bytes)
    current = split_lines(read_log_file(file), strict_bytes)

    changes = pinpoint_changes(current, archived)
    logger.info(f"{file} differs from archive {address} in {len(changes)} lines")
    return changes
