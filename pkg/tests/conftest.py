import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from preslack.corners import EARLY, LATE  # noqa: E402
from preslack.liberty import LibrarySet, read_liberty  # noqa: E402
from preslack.physical import read_def  # noqa: E402
from preslack.sdc import read_sdc  # noqa: E402

DATA = Path(__file__).parent / "data"

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[str, str]] = {}


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def mini_libs():
    return LibrarySet(dict(read_liberty(DATA / "mini_early.lib", EARLY)), dict(read_liberty(DATA / "mini_late.lib", LATE)))


@pytest.fixture(scope="session")
def mini_design():
    return read_def(DATA / "mini.def")


@pytest.fixture(scope="session")
def mini_sdc():
    return read_sdc(DATA / "mini.sdc")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num}: {status} {detail}")
