import os

import numpy as np
import pytest

from urnflow import spectral
from urnflow.model import ReplacementLaw, load_law, mean_matrix

LAW_DIR = os.path.join(os.path.dirname(__file__), "..", "src", "urnflow", "laws")
CORPUS = ["golden", "case_i", "case_ii", "case_iii"]

# 25 mean matrices: the corpus, structured families, one defective matrix, random positive ones
DEFECTIVE = [[3, 2, 0], [1, 2, 3], [1, 1, 2]]


def law_path(name):
    return os.path.abspath(os.path.join(LAW_DIR, f"{name}.json"))


def corpus_law(name):
    return load_law(law_path(name))


def spectral_corpus():
    mats = [mean_matrix(corpus_law(n)) for n in CORPUS]
    mats += [
        [[2]],
        [[3, 1], [1, 3]],
        [[3, 2], [2, 3]],
        [[2, 1], [1, 2]],
        [[1, 2], [3, 1]],
        [[0, 2], [2, 1]],
        [[1, 1, 0], [0, 1, 1], [1, 0, 1]],
        [[2, 1, 1], [1, 2, 1], [1, 1, 2]],
        [[0, 1, 0], [0, 0, 1], [3, 1, 1]],
        [[1, 0, 2], [0, 2, 1], [1, 1, 1]],
        DEFECTIVE,
    ]
    g = np.random.default_rng(20241017)
    for J in (2, 2, 3, 3, 3, 4, 4, 4, 5, 5):
        mats.append(g.integers(1, 6, (J, J)))
    return [np.asarray(m, dtype=float) for m in mats]


@pytest.fixture(scope="session")
def laws():
    return {n: corpus_law(n) for n in CORPUS}


@pytest.fixture(scope="session")
def sds(laws):
    return {n: spectral.decompose(mean_matrix(law)) for n, law in laws.items()}


@pytest.fixture
def two_point_law():
    """Mean [[3,1],[1,3]] with mean-zero two-point noise on each column."""
    return ReplacementLaw.from_columns(
        [[([4, 1], "1/2"), ([2, 1], "1/2")], [([1, 4], "1/2"), ([1, 2], "1/2")]]
    )


# ------------------------------------------------------- acceptance summary lines

ACCEPTANCE_LINES = []


def record_acceptance(number, title, ok, detail):
    line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
