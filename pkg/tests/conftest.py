import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tsnids.synth import generate, separable_two_class, to_dataset  # noqa: E402


@pytest.fixture(scope="session")
def small_dataset():
    """600 clean rows, 80 features, two separable classes."""
    return to_dataset(generate(separable_two_class(n_rows=600, seed=11)))


@pytest.fixture(scope="session")
def defect_result():
    return generate(separable_two_class(n_rows=2000, seed=0, defects=True))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
