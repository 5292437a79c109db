import datetime as dt
import pathlib
from typing import Callable

from loguru import logger
import pytest
from _pytest.logging import LogCaptureFixture

from src.schemas.logs import GenSpec
from src.services.ledger import Ledger
from src.services.logs import generate_logs
from src.utils.clock import FakeClock, datetime_to_nanos


# integrates loguru with caplog
@pytest.fixture
def caplog(caplog: LogCaptureFixture):
    handler_id = logger.add(
        caplog.handler,
        format="{message}",
        level=0,
        filter=lambda record: record["level"].no >= caplog.handler.level,
        enqueue=False,  # Set to 'True' if your test is spawning child processes.
    )
    yield caplog
    logger.remove(handler_id)


# propagates logger statements to pytest terminal output
@pytest.fixture
def reportlog(pytestconfig):
    logging_plugin = pytestconfig.pluginmanager.getplugin("logging-plugin")
    handler_id = logger.add(logging_plugin.report_handler, format="{message}")
    yield
    logger.remove(handler_id)


@pytest.fixture
def fake_clock() -> FakeClock:
    """A deterministic clock starting at 2024-01-12T10:00:00Z."""

    return FakeClock(datetime_to_nanos(dt.datetime(2024, 1, 12, 10, tzinfo=dt.timezone.utc)))


@pytest.fixture
def ledger(fake_clock: FakeClock):
    """An in-memory ledger driven by the fake clock."""

    ledger = Ledger(clock=fake_clock)
    yield ledger
    ledger.close()


@pytest.fixture
def write_corpus(tmp_path: pathlib.Path) -> Callable[..., pathlib.Path]:
    """Returns a function writing a generated log file into `tmp_path` and returning its path."""

    def write(count: int, seed: int = 7, name: str = "app.log", **spec_values) -> pathlib.Path:
        path = tmp_path / name
        with path.open("wb") as file_:
            generate_logs(GenSpec(count=count, seed=seed, **spec_values), file_)

        return path

    return write
