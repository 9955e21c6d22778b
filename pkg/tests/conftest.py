from __future__ import annotations

from pathlib import Path

import pytest

from lakekit.catalog import Repository
from lakekit.ingest import import_csv
from lakekit.schema import TableSnapshot, schema_of

FIXTURES = Path(__file__).parent / "fixtures"
PIPELINE = FIXTURES / "pipeline.lk"
FAMILY = FIXTURES / "family.lk"
RAW_CSV = FIXTURES / "raw_table.csv"


class Tick:
    """Deterministic clock: advances one second per call."""

    def __init__(self, start: int = 1_700_000_000):
        self.now = start

    def __call__(self) -> int:
        self.now += 1
        return self.now


@pytest.fixture
def repo(tmp_path):
    r = Repository.init(tmp_path / "repo", clock=Tick(), author="test")
    yield r
    r.close()


@pytest.fixture
def raw_repo(repo):
    """Repository whose main holds ``raw_table`` from the fixture CSV."""
    import_csv(repo, "raw_table", RAW_CSV)
    return repo


def snap(value: int, name: str = "T") -> TableSnapshot:
    """A one-row, one-column snapshot; distinct values give distinct ids."""
    return TableSnapshot.from_rows(schema_of(name, v="int64"), [(value,)])


@pytest.fixture
def mksnap():
    return snap


# -- acceptance report ----------------------------------------------------------------

_CRITERIA: dict[int, list[str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion checked by this test")


def pytest_runtest_logreport(report):
    marks = getattr(report, "criterion", None)
    if marks is None:
        return
    if report.when == "call" or report.outcome != "passed":
        _CRITERIA.setdefault(marks, []).append(report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        outcome.get_result().criterion = mark.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        verdict = "PASS" if all(o == "passed" for o in _CRITERIA[n]) else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {verdict}")
