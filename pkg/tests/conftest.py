from __future__ import annotations

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import shared

    if not shared.ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in shared.ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
