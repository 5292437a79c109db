import calendar
import re
import time
from typing import BinaryIO, Protocol

from loguru import logger
import numpy

from src.config.exceptions import ParseError, SinkError
from src.schemas.logs import GenSpec, LogEntry, LogLevel
from src.utils.clock import NANOS_PER_SECOND, Clock, datetime_to_nanos, to_nanos


TIMESTAMP_PATTERN = re.compile(
    rb"(\d{4})-(\d{2})-(\d{2})T(\d{2}):(\d{2}):(\d{2})(?:\.(\d{1,9}))?(Z|[+-]\d{2}:\d{2})"
)
KNOWN_LEVELS = {level.value: level for level in LogLevel if level is not LogLevel.other}

# * generator vocabulary; the weights favour INFO the way production traffic does
GENERATOR_LEVELS = ["INFO", "DEBUG", "WARN", "ERROR"]
GENERATOR_LEVEL_THRESHOLDS = [0.7, 0.85, 0.95, 1.0]
HTTP_METHODS = ["GET", "POST", "PUT", "DELETE"]
HTTP_PATHS = ["/api/v1/orders", "/api/v1/users", "/api/v1/invoices", "/api/v1/sessions", "/healthz"]
HTTP_STATUSES = [200, 201, 204, 301, 400, 401, 403, 404, 409, 500, 503]
EVENT_TEMPLATES = [
    "login {outcome} user=u-{user} client=10.{a}.{b}.{c} method=password mfa={mfa} session=s-{session} trace={trace}",
    "method={method} path={path}/{item} status={status} bytes={size} latency_ms={latency} client=10.{a}.{b}.{c} "
    "user=u-{user} trace={trace}",
    "query table={table} rows={rows} duration_ms={latency} pool=primary conn={conn} cache={cache} trace={trace}",
    "job {job} {outcome} attempt={attempt} queue={table} duration_ms={latency} worker=w-{conn} trace={trace}",
]
OUTCOMES = ["ok", "failed", "retry", "timeout"]
TABLES = ["orders", "users", "invoices", "sessions", "audit"]
JOBS = ["rotate-keys", "compact-ledger", "send-digest", "refresh-cache"]


class LineSink(Protocol):
    def write(self, data: bytes, /) -> int | None: ...


def extract_timestamp(raw: bytes) -> int:
    """Parses the leading RFC-3339 timestamp of a log line into nanoseconds since the epoch. Fractions of up to nine
    digits and numeric UTC offsets are accepted."""

    match = TIMESTAMP_PATTERN.match(raw)
    if match is None or (match.end() < len(raw) and raw[match.end()] not in b" \r"):
        raise ParseError("missing or malformed timestamp", 0)

    year, month, day, hour, minute, second, fraction, offset = match.groups()
    try:
        if not (1 <= int(month) <= 12 and 1 <= int(day) <= calendar.monthrange(int(year), int(month))[1]):
            raise ValueError("date out of range")
        if int(hour) > 23 or int(minute) > 59 or int(second) > 59:
            raise ValueError("time out of range")
        seconds = calendar.timegm((int(year), int(month), int(day), int(hour), int(minute), int(second), 0, 0, 0))
    except ValueError:
        raise ParseError("timestamp out of range", 0)

    if offset != b"Z":
        sign = 1 if offset[:1] == b"+" else -1
        seconds -= sign * (int(offset[1:3]) * 3600 + int(offset[4:6]) * 60)

    nanos = int(fraction.ljust(9, b"0")) if fraction else 0
    return seconds * NANOS_PER_SECOND + nanos


def format_timestamp(timestamp_ns: int) -> str:
    """Renders nanoseconds since the epoch in the canonical RFC-3339 UTC form with nine fractional digits."""

    seconds, nanos = divmod(timestamp_ns, NANOS_PER_SECOND)
    return time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime(seconds)) + f".{nanos:09d}Z"


def format_line(timestamp_ns: int, level: str, source: str, message: str) -> bytes:
    """Renders the canonical line layout `<RFC3339-nano> <LEVEL> <source> <message>`."""

    return f"{format_timestamp(timestamp_ns)} {level} {source} {message}".encode("utf-8")


def parse_line(raw: bytes) -> LogEntry:
    """Parses one line (without terminator) into a `LogEntry`. A trailing carriage return is ignored for parsing but
    kept in `entry.raw`, which is always the input unmodified. Unknown levels map to `OTHER`."""

    text = raw[:-1] if raw.endswith(b"\r") else raw
    timestamp_ns = extract_timestamp(text)

    fields = text.split(b" ", 3)
    if len(fields) < 3 or not fields[1] or not fields[2]:
        raise ParseError("unknown field layout, expected '<timestamp> <level> <source> <message>'", len(fields[0]))

    level_offset = len(fields[0]) + 1
    source_offset = level_offset + len(fields[1]) + 1
    try:
        level_name = fields[1].decode("utf-8")
    except UnicodeDecodeError:
        raise ParseError("level is not valid UTF-8", level_offset)
    try:
        source = fields[2].decode("utf-8")
    except UnicodeDecodeError:
        raise ParseError("source is not valid UTF-8", source_offset)

    message = fields[3].decode("utf-8", errors="replace") if len(fields) == 4 else ""
    level = KNOWN_LEVELS.get(level_name, LogLevel.other)

    return LogEntry(
        raw=raw, timestamp_ns=timestamp_ns, level=level, level_name=level_name, source=source, message=message
    )


def to_canonical(entry: LogEntry) -> bytes:
    """Re-serializes a parsed entry in canonical form; equals `entry.raw` for lines the generator emitted."""

    return format_line(entry.timestamp_ns, entry.level_name, entry.source, entry.message)


def normalize_line(line: bytes, strict_bytes: bool = False) -> bytes:
    """Strips one trailing carriage return unless `strict_bytes` is set, so digests cover LF-normalized lines."""

    if not strict_bytes and line.endswith(b"\r"):
        return line[:-1]

    return line


def split_lines(data: bytes, strict_bytes: bool = False) -> list[bytes]:
    """Splits a complete file's bytes into lines without terminators. A final unterminated fragment is a line."""

    if not data:
        return []

    lines = data.split(b"\n")
    if lines[-1] == b"":
        lines.pop()

    if strict_bytes:
        return lines
    return [normalize_line(line) for line in lines]


def _render_message(rng: numpy.random.Generator) -> str:
    """Builds one randomized, human-readable event message."""

    template = EVENT_TEMPLATES[int(rng.integers(len(EVENT_TEMPLATES)))]
    a, b, c = (int(value) for value in rng.integers(0, 256, size=3))

    return template.format(
        outcome=OUTCOMES[int(rng.integers(len(OUTCOMES)))],
        user=int(rng.integers(10_000, 99_999)),
        a=a,
        b=b,
        c=c,
        mfa="yes" if rng.random() < 0.5 else "no",
        session=int(rng.integers(100_000, 999_999)),
        trace=rng.bytes(16).hex(),
        method=HTTP_METHODS[int(rng.integers(len(HTTP_METHODS)))],
        path=HTTP_PATHS[int(rng.integers(len(HTTP_PATHS)))],
        item=int(rng.integers(1, 100_000)),
        status=HTTP_STATUSES[int(rng.integers(len(HTTP_STATUSES)))],
        size=int(rng.integers(0, 65_536)),
        latency=int(rng.integers(1, 2_000)),
        table=TABLES[int(rng.integers(len(TABLES)))],
        rows=int(rng.integers(0, 10_000)),
        conn=int(rng.integers(1, 64)),
        cache="hit" if rng.random() < 0.8 else "miss",
        job=JOBS[int(rng.integers(len(JOBS)))],
        attempt=int(rng.integers(1, 5)),
    )


def generate_logs(spec: GenSpec, sink: LineSink | BinaryIO, pace: Clock | None = None, speed: float = 1.0) -> int:
    """Writes `spec.count` canonical, LF-terminated lines with non-decreasing timestamps to `sink` and returns the
    number emitted. Output depends only on `spec`.\n
    With `pace` set, each line is written after sleeping its inter-arrival gap (divided by `speed`) and the sink is
    flushed, simulating a live writer."""

    rng = numpy.random.default_rng(spec.seed % 2**64)
    mean_ns = to_nanos(spec.mean_interarrival)
    timestamp_ns = datetime_to_nanos(spec.start_time)
    emitted = 0

    logger.info(f"generating {spec.count} log lines with seed {spec.seed}")

    for _ in range(spec.count):
        gap_ns = int(rng.exponential(mean_ns)) if mean_ns > 0 else 0
        timestamp_ns += gap_ns

        draw = rng.random()
        level = next(name for name, bound in zip(GENERATOR_LEVELS, GENERATOR_LEVEL_THRESHOLDS) if draw < bound)
        source = spec.source_pool[int(rng.integers(len(spec.source_pool)))]
        line = format_line(timestamp_ns, level, source, _render_message(rng))

        if pace is not None and emitted > 0:
            pace.sleep(gap_ns / NANOS_PER_SECOND / speed)

        try:
            sink.write(line + b"\n")
            if pace is not None and hasattr(sink, "flush"):
                sink.flush()  # type: ignore[union-attr]
        except OSError as exc:
            logger.error(f"error writing generated log line {emitted}: {exc}")
            raise SinkError(emitted, str(exc))

        emitted += 1

    logger.info(f"generated {emitted} log lines")
    return emitted
