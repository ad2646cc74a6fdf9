import pytest

from tpop.core import StaticOracle, TPoPParams

# Acceptance-criterion verdict lines, printed after the run summary so
# they survive pytest's output capture (one line per criterion).
CRITERION_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERION_LINES):
            terminalreporter.write_line(line)

# The two benchmark parameter sets used throughout: a flat tree with six
# witnesses, and a depth-2 tree naming two witnesses per node.
D1_W6 = TPoPParams(threshold=1, depth=1, witnesses_per_level=(6,))
D2_W22 = TPoPParams(threshold=1, depth=2, witnesses_per_level=(2, 2))


@pytest.fixture
def worked_example_oracle():
    """The depth-2 scenario: a1's witnesses confirm it, a2's witnesses
    reject it, and a1 confirms the prover."""
    return StaticOracle(
        candidates={
            "g": ["a1", "a2"],
            "a1": ["a3", "a4"],
            "a2": ["a5", "a6"],
        },
        confirmations=frozenset(
            [("a3", "a1"), ("a4", "a1"), ("a1", "g"), ("a2", "g")]
        ),
    )
