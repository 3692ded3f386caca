import numpy as np
import pytest

from cascade_collision.io import model_from_document
from cascade_collision.presets import preset


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def load_preset(name, **kwargs):
    return model_from_document(preset(name, **kwargs))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
