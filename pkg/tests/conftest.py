import sys
from pathlib import Path

import pytest

from stereogen.config import bundled
from stereogen.ingest import load_catalog, load_ratings

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def mini_catalog():
    return load_catalog(bundled("mini_catalog.csv"), ["genre", "keywords"])


@pytest.fixture(scope="session")
def mini_ratings():
    return load_ratings(bundled("mini_ratings.csv"))


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion; printed in the summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(name: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
