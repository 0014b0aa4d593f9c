import json
from collections import defaultdict
from pathlib import Path

import pytest

ORACLES = Path(__file__).parent / "oracles" / "oracles.json"

# criterion number -> list of (label, passed, detail); filled by tests/test_acceptance.py
_ACCEPTANCE = defaultdict(list)
_TITLES = {}


class AcceptanceLog:
    def title(self, crit: int, text: str) -> None:
        _TITLES[crit] = text

    def record(self, crit: int, label: str, passed: bool, detail: str = "") -> bool:
        _ACCEPTANCE[crit].append((label, bool(passed), detail))
        return bool(passed)


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceLog()


@pytest.fixture(scope="session")
def oracles():
    return json.loads(ORACLES.read_text())


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(_ACCEPTANCE):
        parts = _ACCEPTANCE[crit]
        ok = all(p for _, p, _ in parts)
        tr.write_line(f"criterion {crit:2d}: {'PASS' if ok else 'FAIL'}  {_TITLES.get(crit, '')}")
        for label, passed, detail in parts:
            tr.write_line(f"    [{'pass' if passed else 'FAIL'}] {label}: {detail}")
