import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from exotest.dataset import Dataset  # noqa: E402

# (y, delta, x, w, z): two w levels, two z levels, ties-free times
HAND_ROWS = [
    (1, 1, 0, 0, 0), (4, 0, 0, 0, 0), (6, 1, 0, 0, 0), (2, 1, 0, 0, 1), (5, 1, 0, 0, 1),
    (3, 1, 0, 1, 0), (7, 1, 0, 1, 0), (8, 0, 0, 1, 1), (9, 1, 0, 1, 1), (10, 1, 0, 1, 1),
]

# Two x levels on top of the above; still <= 10 rows
HAND_ROWS_2X = [
    (1, 1, 0, 0, 0), (3, 0, 0, 0, 1), (4, 1, 0, 0, 1), (2, 1, 0, 1, 0), (6, 1, 0, 1, 1),
    (5, 1, 1, 0, 0), (7, 0, 1, 0, 0), (8, 1, 1, 1, 0), (9, 1, 1, 1, 1), (10, 0, 1, 1, 1),
]


def rows_to_dataset(rows):
    cols = list(zip(*rows))
    return Dataset(np.array(cols[0], float), *(np.array(c) for c in cols[1:]))


@pytest.fixture
def hand_rows():
    return list(HAND_ROWS)


@pytest.fixture
def hand_data():
    return rows_to_dataset(HAND_ROWS)


_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def record_criterion():
    def record(name: str, passed: bool, detail: str = "") -> bool:
        _ACCEPTANCE.append((name, bool(passed), detail))
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")
