import numpy as np
import pytest

from sparsefmt.matrix_core import fixture_m8, random_matrix

M8_ONES = [3.0, 3.0, 4.0, 5.0, 6.0, 15.0, 30.0, 25.0]


def seeded_matrix(seed, max_rows=64, max_density=0.3, integer=True):
    """Random matrix used across the property and acceptance suites: up to
    ``max_rows`` rows and columns, density at most ``max_density``."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, max_rows + 1))
    k = int(rng.integers(1, max_rows + 1))
    density = float(rng.uniform(0.0, max_density))
    return random_matrix(rng, n, k, density, integer=integer)


@pytest.fixture
def m8():
    return fixture_m8()


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed", "skipped"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion_" not in nodeid:
                continue
            if rep.when != "call" and outcome != "skipped":
                continue
            num, _, label = nodeid.split("::")[-1][len("test_criterion_"):].partition("_")
            name = f"criterion {num} ({label.replace('_', ' ')})"
            lines.append((name, outcome.upper().replace("PASSED", "PASS")
                          .replace("FAILED", "FAIL").replace("SKIPPED", "SKIP")))
    if lines:
        terminalreporter.section("acceptance")
        for name, status in sorted(lines, key=lambda t: int(t[0].split()[1])):
            terminalreporter.write_line(f"{status:<5} {name}")
