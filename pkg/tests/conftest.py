import pytest

from macc_lab.caching import Library, man_place, suggest_file_bits
from macc_lab.topology import CombProfile, build_combinatorial


@pytest.fixture
def example_one():
    """Four caches, one user on every pair, t = 2, six 48-bit files."""
    profile = CombProfile(4, (0, 0, 1, 0, 0))
    conn = build_combinatorial(profile)
    placed = man_place(Library.synthetic(6, 48, 7), 4, 2)
    return profile, conn, placed


def placed_for(caches, t, files, seed=0, at_least=0):
    bits = suggest_file_bits(caches, t, at_least)
    return man_place(Library.synthetic(files, bits, seed), caches, t)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
