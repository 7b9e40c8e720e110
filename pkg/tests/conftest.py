import pytest

from hgsyntax.core import InputPattern, constraint_index, weights_from_mapping

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: list[str] = []

RUN1 = {
    "C-Topic Left": 15.60, "Topic Left": 11.26, "Focus Right": 10.39, "Topic Right": 9.36,
    "Object Right": 8.63, "Focus Left": 8.36, "C-Topic Right": 7.21, "Subject Right": 7.18,
    "Object Left": 6.99, "Subject Left": 5.96, "Verb Left": 5.68, "Verb Right": 3.40,
}
GLA_RANKING_NAMES = ["C-L", "F-R", "O-R", "C-R", "S-R", "T-L", "S-L", "V-L", "O-L", "V-R", "T-R", "F-L"]


@pytest.fixture
def run1_weights():
    return weights_from_mapping(RUN1)


@pytest.fixture
def gla_ranking():
    return [constraint_index(n) for n in GLA_RANKING_NAMES]


@pytest.fixture
def tft():
    return InputPattern.parse("t f t")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
