import random
import re

import pytest

from ssgrp import coloring as cl
from ssgrp import selfsim as ss
from ssgrp import treecore as tc


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion, outside capture."""
    rows = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, ()):
            nodeid = getattr(report, "nodeid", "")
            match = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", nodeid)
            if match and getattr(report, "when", "call") == "call":
                rows.append((int(match.group(1)), match.group(2), outcome))
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, outcome in sorted(rows):
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE {number:02d} {status}: {name}")


@pytest.fixture(scope="session")
def grig():
    return ss.builtin("grigorchuk")


@pytest.fixture(scope="session")
def gs3():
    return ss.builtin("gupta_sidki", p=3)


@pytest.fixture(scope="session")
def basilica():
    return ss.builtin("basilica")


@pytest.fixture(scope="session")
def spine_set(grig):
    """K = {the rightmost ray} on the binary tree."""
    return cl.ClosedSetSpec.make(
        grig.valency, [], [tc.BoundaryRay((), (1,))]
    )


@pytest.fixture
def rng():
    return random.Random(0xDECAF)
