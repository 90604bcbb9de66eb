from __future__ import annotations

import numpy as np
import pytest

from diffchem.molecule import build_molecule

H3_GEOMETRY = [[0.028, 0.054, 0.0], [0.986, 1.610, 0.0], [1.855, 0.002, 0.0]]


@pytest.fixture(scope="session")
def h2():
    return build_molecule(["H", "H"], [[0, 0, 0], [0, 0, 1.4]])


@pytest.fixture(scope="session")
def heh():
    return build_molecule(["He", "H"], [[0, 0, 0], [0, 0, 1.4632]], charge=1)


@pytest.fixture(scope="session")
def he():
    return build_molecule(["He"], [[0, 0, 0]])


@pytest.fixture(scope="session")
def h3():
    # slightly off the equilateral shape so virtual orbitals are non-degenerate
    return build_molecule(["H", "H", "H"], H3_GEOMETRY, charge=1)


@pytest.fixture(scope="session")
def water():
    return build_molecule(
        ["O", "H", "H"],
        [[0.0, -0.143225816552, 0.0], [1.638036840407, 1.136548822547, 0.0],
         [-1.638036840407, 1.136548822547, 0.0]],
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
