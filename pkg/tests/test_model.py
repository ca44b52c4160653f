from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from urnflow.errors import BudgetExceeded, InvalidLaw
from urnflow.model import (
    ReplacementLaw,
    check_assumptions,
    covariance,
    exact_distribution,
    load_law,
    mean_matrix,
    sample_offspring,
    save_law,
    total_offspring,
)


def test_golden_mean_and_gw3(laws):
    law = laws["golden"]
    np.testing.assert_array_equal(mean_matrix(law), [[1, 0, 2], [0, 2, 1], [1, 1, 1]])
    rep = check_assumptions(law)
    assert rep.gw1 and rep.gw2 and not rep.gw3
    assert rep.gw4 and rep.moment_2_plus_delta


def test_two_point_law_passes_every_assumption(two_point_law):
    rep = check_assumptions(two_point_law)
    assert (rep.gw1, rep.gw2, rep.gw3, rep.gw4) == (True, True, True, True)
    np.testing.assert_allclose(mean_matrix(two_point_law), [[3, 1], [1, 3]])


def test_covariance_of_two_point_column(two_point_law):
    C = covariance(two_point_law, 0)
    np.testing.assert_allclose(C, [[1, 0], [0, 0]])


@pytest.mark.parametrize(
    "cols",
    [
        [[([1, 0], 0.5), ([0, 1], 0.4)], [([1, 1], 1)]],
        [[([1, -1], 1)], [([1, 1], 1)]],
        [[([1], 1)], [([1, 1], 1)]],
        [[], [([1, 1], 1)]],
        [[([1, 0], 0)], [([1, 1], 1)]],
    ],
)
def test_invalid_laws_rejected(cols):
    with pytest.raises(InvalidLaw):
        ReplacementLaw.from_columns(cols)


def test_roundtrip_json(tmp_path, laws):
    p = tmp_path / "law.json"
    save_law(laws["case_i"], p)
    again = load_law(p)
    assert again.to_dict()["columns"] == laws["case_i"].to_dict()["columns"]
    assert again.exact_probs is not None


def test_golden_exact_values(laws):
    law = laws["golden"]
    assert exact_distribution(law, 0, 1) == [((2, 0, 1), Fraction(1))]
    assert exact_distribution(law, 0, 2) == [((3, 0, 2), Fraction(1, 2)), ((4, 1, 2), Fraction(1, 2))]
    assert exact_distribution(law, 0, 3) == [((5, 1, 3), Fraction(1))]
    assert dict(exact_distribution(law, 0, 4))[(5, 3, 4)] == Fraction(1, 6)


@pytest.mark.parametrize("name", ["golden", "case_i", "case_ii", "case_iii"])
@pytest.mark.parametrize("n", [0, 1, 2, 3])
def test_exact_distribution_sums_to_one(laws, name, n):
    dist = exact_distribution(laws[name], 0, n)
    assert sum(p for _, p in dist) == 1


def test_exact_mean_matches_first_step(laws):
    law = laws["case_iii"]
    dist = exact_distribution(law, 1, 1)
    mean = sum(np.array(B) * float(p) for B, p in dist)
    np.testing.assert_allclose(mean, mean_matrix(law)[:, 1] + np.array([0, 1]))


def test_budget(laws):
    with pytest.raises(BudgetExceeded):
        exact_distribution(laws["case_i"], 0, 4, budget=10)


def test_extinct_law_freezes():
    law = ReplacementLaw.from_columns([[([0], "1/2"), ([2], "1/2")]])
    dist = dict(exact_distribution(law, 0, 3))
    # dies at the first draw with probability 1/2 and then stays at B = (1,)
    assert dist[(1,)] == Fraction(1, 2)


def test_sample_offspring_frequencies(laws):
    law = laws["case_i"]
    g = np.random.default_rng(3)
    off = sample_offspring(law, np.zeros(40000, dtype=int), g)
    np.testing.assert_allclose(off.mean(axis=0), mean_matrix(law)[:, 0], atol=0.05)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 2**31))
def test_total_offspring_is_sum_of_parents(a, b, seed):
    """Totals for deterministic columns are exact; random ones stay in the convex hull."""
    law = ReplacementLaw.from_columns([[([2, 1], 1)], [([0, 3], 1)]])
    out = total_offspring(law, np.array([a, b]), np.random.default_rng(seed))
    np.testing.assert_array_equal(out, [2 * a, a + 3 * b])
    noisy = load_law_case_i()
    t = total_offspring(noisy, np.array([a, b]), np.random.default_rng(seed))
    lo = a * noisy.offspring[0].min(axis=0) + b * noisy.offspring[1].min(axis=0)
    hi = a * noisy.offspring[0].max(axis=0) + b * noisy.offspring[1].max(axis=0)
    assert (lo <= t).all() and (t <= hi).all()


def load_law_case_i():
    from conftest import corpus_law

    return corpus_law("case_i")
