from collections import deque
import os
import pathlib
import threading
from typing import IO, Callable, Iterator
import uuid

from loguru import logger

from src.config.constants.app import TAIL_READ_SIZE
from src.config.exceptions import FileVanished, LedgerUnavailable, LogFileNotFound, TruncationDetected
from src.schemas.grouping import ClockMode, Digest256, FinalizedGroup, FinalizeReason
from src.schemas.ingest import IngestConfig, IngestReceipt, StopKind
from src.services.grouping import LogChunker, group_digest, manifest_entry, write_manifest_entry
from src.services.ledger import Ledger
from src.services.logs import normalize_line
from src.utils.clock import Clock, SystemClock, to_nanos


class LogTailer:
    """LogTailer follows a growing file by byte offset, returning each complete LF-terminated line exactly once.\n
    An unterminated trailing fragment is held until its LF arrives. When the path starts pointing at a different
    file (rotation), the old handle is drained, its fragment becomes its last line, and tailing restarts at offset 0
    of the new file under the next generation number."""

    def __init__(self, path: pathlib.Path, strict_bytes: bool = False) -> None:
        self.path = path
        self.strict_bytes = strict_bytes
        self.generation = 0
        self._file: IO[bytes] | None = None
        self._identity: tuple[int, int] | None = None
        self._offset = 0
        self._fragment = b""
        self._open()

    def _open(self) -> None:
        try:
            self._file = self.path.open("rb")
        except FileNotFoundError:
            raise LogFileNotFound(str(self.path))

        stat = os.fstat(self._file.fileno())
        self._identity = (stat.st_dev, stat.st_ino)
        self._offset = 0
        self._fragment = b""

    @property
    def fragment(self) -> bytes:
        return self._fragment

    @property
    def offset(self) -> int:
        return self._offset

    def take_fragment(self) -> bytes | None:
        """Returns the held fragment as a line and clears it."""

        if not self._fragment:
            return None

        fragment, self._fragment = self._fragment, b""
        return normalize_line(fragment, self.strict_bytes)

    def _read_available(self) -> list[bytes]:
        assert self._file is not None

        lines = []
        while True:
            data = self._file.read(TAIL_READ_SIZE)
            if not data:
                break
            self._offset += len(data)

            pieces = (self._fragment + data).split(b"\n")
            self._fragment = pieces.pop()
            lines.extend(normalize_line(piece, self.strict_bytes) for piece in pieces)

        return lines

    def poll(self) -> list[tuple[bytes, int]]:
        """Reads everything appended since the previous poll, as `(line, generation)` pairs."""

        try:
            stat = self.path.stat()
        except FileNotFoundError:
            raise FileVanished(str(self.path))

        if (stat.st_dev, stat.st_ino) == self._identity:
            if stat.st_size < self._offset:
                raise TruncationDetected(str(self.path), self._offset, stat.st_size)

            return [(line, self.generation) for line in self._read_available()]

        lines = [(line, self.generation) for line in self._read_available()]
        fragment = self.take_fragment()
        if fragment is not None:
            lines.append((fragment, self.generation))

        self.close()
        self.generation += 1
        self._open()
        logger.warning(f"log file {self.path} was rotated, tailing generation {self.generation} from offset 0")

        lines.extend((line, self.generation) for line in self._read_available())
        return lines

    def close(self) -> None:
        if self._file is not None:
            self._file.close()
            self._file = None


def tail_lines(
    file: pathlib.Path, poll_interval: float, clock: Clock | None = None, strict_bytes: bool = False
) -> Iterator[tuple[bytes, int]]:
    """Yields `(line, arrival)` for every complete line of a growing file, sleeping `poll_interval` seconds between
    empty polls. Runs until the consumer stops iterating."""

    clock = clock if clock is not None else SystemClock()
    tailer = LogTailer(file, strict_bytes)

    try:
        while True:
            batch = tailer.poll()
            if not batch:
                clock.sleep(poll_interval)
                continue

            arrival = clock.now_ns()
            for line, _ in batch:
                yield line, arrival
    finally:
        tailer.close()


class IngestRun:
    """IngestRun owns one ingest of one file: the tailer, the WALL-mode chunker, the queue of finalized groups not
    yet accepted by the ledger, and the manifest sink. `run_ingest` is its public entry point."""

    def __init__(
        self,
        file: pathlib.Path,
        config: IngestConfig,
        ledger: Ledger,
        clock: Clock,
        stop_event: threading.Event | None,
        on_receipt: Callable[[IngestReceipt], None] | None,
    ) -> None:
        self.file = file
        self.config = config
        self.ledger = ledger
        self.clock = clock
        self.stop_event = stop_event
        self.on_receipt = on_receipt

        self.receipts: list[IngestReceipt] = []
        self.lines_seen = 0
        self._pending: deque[tuple[FinalizedGroup, Digest256]] = deque()
        self._chunker = LogChunker(config.policy, ClockMode.wall)
        self._manifest: IO[bytes] | None = None
        self._poll_seconds = min(config.poll_interval, config.policy.max_wait / 4).total_seconds()
        self._seal_ns = to_nanos(config.seal_interval) if config.seal_interval is not None else None
        self._last_seal = clock.now_ns()
        self._last_data = clock.now_ns()

    def _enqueue(self, group: FinalizedGroup | None) -> None:
        if group is None:
            return

        self._pending.append((group, group_digest(group)))

    def _submit(self, block: bool) -> None:
        """Hands queued digests to the ledger in file order. A transient ledger failure leaves the queue intact;
        once the queue reaches its cap, or when `block` is set, the run waits and retries."""

        while self._pending:
            group, digest = self._pending[0]
            try:
                index = self.ledger.store_log_hash(digest)
            except LedgerUnavailable as exc:
                if not block and len(self._pending) < self.config.max_pending_groups:
                    logger.warning(f"ledger unavailable, {len(self._pending)} groups queued: {exc}")
                    return
                logger.warning(f"ledger unavailable with {len(self._pending)} groups queued, retrying: {exc}")
                self.clock.sleep(self._poll_seconds)
                continue

            self._pending.popleft()
            receipt = IngestReceipt(
                group=group.boundary,
                digest=digest,
                ledger_index=index,
                submitted_at=self.clock.now_ns(),
                first_arrival=group.first_timestamp if group.first_timestamp is not None else 0,
            )
            self.receipts.append(receipt)
            logger.debug(
                f"anchored lines {group.first_line_index}..{group.boundary.last_line_index} "
                f"({group.reason.value}) as record {index}"
            )

            if self._manifest is not None:
                write_manifest_entry(self._manifest, manifest_entry(group, digest))
                self._manifest.flush()
            if self.on_receipt is not None:
                self.on_receipt(receipt)

    def _seal_if_due(self, now: int) -> None:
        if self._seal_ns is None or now - self._last_seal < self._seal_ns:
            return

        self.ledger.seal_block(now)
        self._last_seal = now

    def _remaining(self) -> int | None:
        stop = self.config.stop_condition
        if stop.kind is not StopKind.line_count:
            return None

        return stop.line_count - self.lines_seen  # type: ignore[operator]

    def _push(self, line: bytes, generation: int, now: int) -> None:
        if generation != self._chunker.generation:
            self._enqueue(self._chunker.flush())
            self._chunker.restart(generation)

        self._enqueue(self._chunker.push(line, now))
        self.lines_seen += 1

    def _should_stop(self, now: int) -> bool:
        stop = self.config.stop_condition
        if self.stop_event is not None and self.stop_event.is_set():
            return True
        if stop.kind is StopKind.line_count:
            return self._remaining() <= 0  # type: ignore[operator]
        if stop.kind is StopKind.idle_after:
            return now - self._last_data >= to_nanos(stop.idle_after)  # type: ignore[arg-type]

        return False

    def _finish(self, tailer: LogTailer) -> None:
        """Handles the held fragment, flushes the open group and anchors everything still queued."""

        stop = self.config.stop_condition
        if tailer.fragment:
            remaining = self._remaining()
            if stop.kind is StopKind.explicit or (stop.kind is StopKind.line_count and remaining == 1):
                fragment = tailer.take_fragment()
                self._push(fragment, tailer.generation, self.clock.now_ns())  # type: ignore[arg-type]
            else:
                logger.warning(f"holding unterminated fragment of {len(tailer.fragment)} bytes at stop")

        self._enqueue(self._chunker.flush(FinalizeReason.end_of_stream))
        self._submit(block=True)
        self.ledger.seal_block(self.clock.now_ns())

    def run(self) -> list[IngestReceipt]:
        tailer = LogTailer(self.file, self.config.strict_bytes)
        if self.config.manifest_path is not None:
            self._manifest = self.config.manifest_path.open("ab")

        try:
            while True:
                now = self.clock.now_ns()
                batch = tailer.poll()
                remaining = self._remaining()
                if remaining is not None:
                    batch = batch[:remaining]

                if batch:
                    self._last_data = now
                for line, generation in batch:
                    self._push(line, generation, now)

                self._enqueue(self._chunker.tick(now))
                self._submit(block=len(self._pending) >= self.config.max_pending_groups)
                self._seal_if_due(now)

                if self._should_stop(now):
                    break
                # line-count stop waiting only on an unterminated last line
                if remaining == 1 and not batch and tailer.fragment:
                    break
                if not batch:
                    self.clock.sleep(self._poll_seconds)

            self._finish(tailer)
        except FileVanished as exc:
            self._enqueue(self._chunker.flush(FinalizeReason.end_of_stream))
            self._submit(block=True)
            self.ledger.seal_block(self.clock.now_ns())
            exc.receipts = list(self.receipts)
            logger.error(f"error tailing {self.file}: {exc}")
            raise
        finally:
            tailer.close()
            if self._manifest is not None:
                self._manifest.close()

        return self.receipts


def run_ingest(
    file: pathlib.Path,
    config: IngestConfig,
    ledger: Ledger,
    clock: Clock | None = None,
    stop_event: threading.Event | None = None,
    on_receipt: Callable[[IngestReceipt], None] | None = None,
) -> list[IngestReceipt]:
    """Tails `file`, groups arriving lines under `config.policy` by arrival time, and anchors every group digest in
    the ledger until the stop condition holds. Returns the receipts in file order.\n
    `stop_event` ends any run early and is the only way an EXPLICIT run ends. A file that disappears raises
    `FileVanished` after anchoring the lines already read, carrying every receipt produced."""

    clock = clock if clock is not None else SystemClock()
    run_id = uuid.uuid4().hex[:12]

    with logger.contextualize(run_id=run_id):
        logger.info(
            f"ingesting {file} with group size {config.policy.group_size}, max wait {config.policy.max_wait}, "
            f"stop {config.stop_condition.kind.value}"
        )
        start = clock.now_ns()

        receipts = IngestRun(file, config, ledger, clock, stop_event, on_receipt).run()

        elapsed_ms = (clock.now_ns() - start) / 1_000_000
        logger.info(f"ingested {file}: {len(receipts)} groups anchored in {elapsed_ms:.1f} ms")

    return receipts
