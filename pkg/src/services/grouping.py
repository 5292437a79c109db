import hashlib
import pathlib
from typing import IO, Iterable

from loguru import logger
import orjson
from pydantic import ValidationError

from src.config.exceptions import EmptyGroup, ManifestMismatch
from src.schemas.grouping import ClockMode, Digest256, FinalizedGroup, FinalizeReason, GroupPolicy, ManifestEntry
from src.utils.clock import to_nanos


class LogChunker:
    """LogChunker implements the hybrid grouping policy: lines accumulate in an open group that is finalized as soon
    as it holds `group_size` lines or spans `max_wait`, whichever comes first.\n
    In WALL mode the clock passed to `push` is the line's arrival instant and `tick` closes groups whose window has
    elapsed during silence. In LOGTIME mode it is the line's own timestamp; the window is the largest timestamp seen
    minus the group's first timestamp, clamped at zero, so regressions never close a group early.\n
    A chunker is single-owner: callers serialize `push`, `tick` and `flush`."""

    def __init__(self, policy: GroupPolicy, mode: ClockMode = ClockMode.logtime, generation: int = 0) -> None:
        self.policy = policy
        self.mode = mode
        self.generation = generation
        self._max_wait_ns = to_nanos(policy.max_wait)
        self._next_line_index = 0
        self._reset()

    def _reset(self) -> None:
        self._lines: list[bytes] = []
        self._first_line_index = self._next_line_index
        self._start: int | None = None
        self._latest: int | None = None

    @property
    def open_line_count(self) -> int:
        return len(self._lines)

    @property
    def group_start(self) -> int | None:
        """Clock value of the open group's first line, if any."""

        return self._start

    def _finalize(self, reason: FinalizeReason) -> FinalizedGroup:
        group = FinalizedGroup(
            lines=self._lines,
            first_line_index=self._first_line_index,
            first_timestamp=self._start,
            last_timestamp=self._latest,
            reason=reason,
            generation=self.generation,
        )
        self._reset()
        return group

    def push(self, line: bytes, clock: int) -> FinalizedGroup | None:
        """Appends the line to the open group, then returns the finalized group if the size threshold or the time
        window is met."""

        if self._start is None:
            self._start = clock
            self._latest = clock
        elif self.mode is ClockMode.logtime:
            if clock < self._latest:  # type: ignore[operator]
                logger.warning(f"timestamp regression at line {self._next_line_index}, window uses the latest seen")
            self._latest = max(self._latest, clock)  # type: ignore[type-var]
        else:
            self._latest = clock

        self._lines.append(line)
        self._next_line_index += 1

        if len(self._lines) >= self.policy.group_size:
            return self._finalize(FinalizeReason.size)
        if max(self._latest - self._start, 0) >= self._max_wait_ns:  # type: ignore[operator]
            return self._finalize(FinalizeReason.timeout)

        return None

    def tick(self, now: int) -> FinalizedGroup | None:
        """Closes the open group with reason TIMEOUT if its window has elapsed by `now` (WALL mode timer)."""

        if self._start is None or now - self._start < self._max_wait_ns:
            return None

        return self._finalize(FinalizeReason.timeout)

    def flush(self, reason: FinalizeReason = FinalizeReason.end_of_stream) -> FinalizedGroup | None:
        """Returns the open partial group, if any, and resets the chunker."""

        if not self._lines:
            return None

        return self._finalize(reason)

    def restart(self, generation: int) -> None:
        """Starts numbering lines from 0 again for a new file generation. The open group must be flushed first."""

        if self._lines:
            raise RuntimeError("flush the open group before restarting the chunker")

        self.generation = generation
        self._next_line_index = 0
        self._reset()


def group_digest(group: FinalizedGroup | Iterable[bytes]) -> Digest256:
    """SHA-256 over the group's lines joined by a single LF, without a trailing LF."""

    lines = group.lines if isinstance(group, FinalizedGroup) else list(group)
    if not lines:
        raise EmptyGroup()

    return Digest256(value=hashlib.sha256(b"\n".join(lines)).digest())


def group_lines(
    lines: Iterable[tuple[bytes, int]], policy: GroupPolicy, mode: ClockMode = ClockMode.logtime
) -> list[FinalizedGroup]:
    """Runs a whole sequence of `(line, clock)` pairs through a chunker, flushing the remainder."""

    chunker = LogChunker(policy, mode)
    groups = []

    for line, clock in lines:
        group = chunker.push(line, clock)
        if group is not None:
            groups.append(group)

    remainder = chunker.flush()
    if remainder is not None:
        groups.append(remainder)

    return groups


def manifest_entry(group: FinalizedGroup, digest: Digest256) -> ManifestEntry:
    return ManifestEntry(
        first_line_index=group.first_line_index,
        line_count=group.line_count,
        reason=group.reason,
        generation=group.generation,
        digest=digest.hex,
    )


def write_manifest_entry(sink: IO[bytes], entry: ManifestEntry) -> None:
    """Appends one manifest record as a JSON line."""

    sink.write(orjson.dumps(entry.model_dump(mode="json")) + b"\n")


def read_manifest(path: pathlib.Path, generation: int | None = None) -> list[ManifestEntry]:
    """Reads a manifest, optionally keeping a single file generation. Entries must be contiguous from line 0 within
    each generation."""

    entries: list[ManifestEntry] = []

    try:
        with path.open("rb") as file_:
            for number, line in enumerate(file_, start=1):
                if not line.strip():
                    continue
                try:
                    entry = ManifestEntry.model_validate(orjson.loads(line))
                except (orjson.JSONDecodeError, ValidationError) as exc:
                    raise ManifestMismatch(f"manifest line {number} is invalid: {exc}")

                if generation is None or entry.generation == generation:
                    entries.append(entry)
    except OSError as exc:
        logger.error(f"error reading manifest {path}: {exc}")
        raise

    expected: dict[int, int] = {}
    for entry in entries:
        if entry.first_line_index != expected.get(entry.generation, 0):
            raise ManifestMismatch(
                f"manifest entry at line {entry.first_line_index} is not contiguous in generation {entry.generation}"
            )
        expected[entry.generation] = entry.first_line_index + entry.line_count

    return entries
