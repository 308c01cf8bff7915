from __future__ import annotations

import numpy as np
import pytest

import focalsphere as fs

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_report():
    """Collects one PASS/FAIL line per acceptance criterion for the summary."""

    def record(criterion: str, passed: bool, detail: str = "") -> None:
        status = "PASS" if passed else "FAIL"
        _ACCEPTANCE_LINES.append(f"[{status}] {criterion}" + (f" — {detail}" if detail else ""))

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def warm_kernels():
    """Compile the numba kernels once so individual tests stay fast."""
    g = fs.generate_grid(3, 3)
    fs.run_layout(g, fs.LayoutConfig(steps=2, seed=0))
    return True


@pytest.fixture(scope="session")
def grid10():
    return fs.generate_grid(10, 10)


def random_graph(n: int, p: float, seed: int) -> fs.Graph:
    """Erdos-Renyi helper for oracle comparisons."""
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n, k=1)
    mask = rng.random(len(iu[0])) < p
    edges = np.stack([iu[0][mask], iu[1][mask]], axis=1)
    return fs.from_edges(n, edges)
