import numpy as np
import pytest

# Master seed for every Monte Carlo test; fixed before any run.
MASTER_SEED = 2023

_acceptance_lines: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(MASTER_SEED)


@pytest.fixture
def report_criterion():
    """Record one PASS/FAIL line for the acceptance summary."""

    def _report(label: str, ok: bool, detail: str) -> bool:
        _acceptance_lines.append(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
