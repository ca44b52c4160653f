import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from urnflow import embedding, limits, spectral
from urnflow.embedding import CharacteristicSpec
from urnflow.errors import BudgetExceeded, InsufficientDepth, NotReached
from urnflow.harness import chi_square_gof
from urnflow.model import ReplacementLaw, exact_distribution, mean_matrix


def test_spec_validation():
    with pytest.raises(ValueError):
        CharacteristicSpec(0, 0)
    with pytest.raises(ValueError):
        CharacteristicSpec(1, 0, 0, -0.5)
    c = CharacteristicSpec.centered(1, 2.5, 0.3)
    assert (c.a, c.b, c.j, c.x) == (-2.5, 1.0, 1, 0.3)


def test_golden_tree_generation_one(laws):
    tree = embedding.simulate_tree(laws["golden"], 0, 3, seed=0)
    assert tree.generations[1].Z.tolist() == [1, 0, 1]
    assert embedding.B_via_embedding(tree, 1).tolist() == [2, 0, 1]
    assert embedding.B_via_embedding(tree, 3).tolist() == [5, 1, 3]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(["case_i", "case_ii", "case_iii", "golden"]))
def test_total_count_identity(seed, name):
    """Zt(n + 1) - 1 equals the number of children of the first n counted individuals."""
    from conftest import corpus_law

    law = corpus_law(name)
    tree = embedding.grow_tree(law, 0, 4, np.random.default_rng(seed))
    for n in range(0, 4):
        zt = embedding.cmj_count(tree, CharacteristicSpec.total(n + 1))
        zj = sum(embedding.cmj_count(tree, CharacteristicSpec.type_count(j, n)) for j in range(law.J))
        assert zt - 1 == zj


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31))
def test_tau_is_generalized_inverse(seed):
    from conftest import corpus_law

    tree = embedding.grow_tree(corpus_law("case_iii"), 1, 3, np.random.default_rng(seed))
    total = int(tree.cumulative()[-1])
    for k in range(1, min(total, 40) + 1):
        t = embedding.tau(tree, k)
        assert embedding.cmj_count(tree, CharacteristicSpec.total(t)) == k
        assert embedding.cmj_count(tree, CharacteristicSpec.total(max(t - 1e-12, 0))) < k


def test_counts_are_nondecreasing(laws):
    tree = embedding.simulate_tree(laws["case_ii"], 0, 4, seed=2)
    xs = np.linspace(0, 4.99, 200)
    vals = [embedding.cmj_count(tree, CharacteristicSpec.type_count(1, x)) for x in xs]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_errors(laws):
    tree = embedding.simulate_tree(laws["case_i"], 0, 2, seed=0)
    with pytest.raises(InsufficientDepth):
        embedding.cmj_count(tree, CharacteristicSpec.total(3.5))
    with pytest.raises(NotReached):
        embedding.tau(tree, 10**9)
    with pytest.raises(BudgetExceeded):
        embedding.simulate_tree(laws["case_i"], 0, 12, seed=0, budget=1000)


def test_summary_json(laws, tmp_path):
    tree = embedding.simulate_tree(laws["case_iii"], 1, 3, seed=4)
    data = json.loads(tree.to_json(tmp_path / "t.json"))
    assert data["j0"] == 2 and len(data["Z"]) == 5 and data["survived"]
    assert data["W_hat"] == pytest.approx(tree.W_hat())


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_embedding_batch_matches_exact_law(laws, k):
    law = laws["case_ii"]
    B, ext = embedding.embedding_batch(law, 0, k, 5000, np.random.default_rng(100 + k))
    assert not ext.any()
    _, p, _ = chi_square_gof(B, exact_distribution(law, 0, k))
    assert p > 1e-4


def test_single_tree_and_batch_agree(laws):
    law = laws["case_i"]
    g = np.random.default_rng(9)
    one = np.array([embedding.B_via_embedding(embedding.grow_tree(law, 0, 1, g), 3) for _ in range(3000)])
    _, p, _ = chi_square_gof(one, exact_distribution(law, 0, 3))
    assert p > 1e-4


def test_extinct_trees_flagged():
    law = ReplacementLaw.from_columns([[([0], "1/2"), ([2], "1/2")]])
    B, ext = embedding.embedding_batch(law, 0, 5, 2000, np.random.default_rng(1))
    assert 0.4 < ext.mean() < 0.75
    assert (B[ext, 0] < 1 + 2 * 5).all()


def test_deep_sample_distribution_small_n(laws):
    law = laws["case_iii"]
    ds = embedding.deep_sample(law, 0, 3, 5000, np.random.default_rng(5), depth=3)
    _, p, _ = chi_square_gof(ds.B, exact_distribution(law, 0, 3))
    assert p > 1e-4
    assert ((ds.tau > 0) & (ds.tau < 3)).all()


def test_deep_sample_martingale_mean(laws, sds):
    """E[W] = v_j0 (the martingale starts at v . e_j0)."""
    law = laws["case_ii"]
    sd = sds["case_ii"]
    ds = embedding.deep_sample(law, 0, 50, 4000, np.random.default_rng(6), depth=8)
    W = ds.W_hat
    assert abs(W.mean() - sd.v[0]) < 4 * W.std() / math.sqrt(W.size)


def test_lln_for_characteristic_ratio(laws, sds):
    """Ratio of a characteristic count to rho^floor(x)(1+(rho-1){x}) stabilizes near (a+b rho u_j) W/(rho-1)."""
    law = laws["case_iii"]
    sd = sds["case_iii"]
    tree = embedding.simulate_tree(law, 0, 8, seed=1)
    W = tree.W_hat()
    x = 7.5
    norm = sd.rho ** math.floor(x) * (1 + (sd.rho - 1) * 0.5)
    val = embedding.cmj_count(tree, CharacteristicSpec.type_count(1, x)) / norm
    want = sd.rho * sd.u[1] * W / (sd.rho - 1)
    assert val == pytest.approx(want, rel=0.02)


def test_default_depth_caps_population():
    d = embedding.default_depth(9.0, 10**4)
    assert d <= int(math.log(1e12) / math.log(9.0))
    assert d >= math.ceil(math.log(10**4) / math.log(9.0)) + 1


@pytest.mark.parametrize("name", ["golden", "case_i", "case_ii", "case_iii"])
def test_characteristic_ratio_stabilizes_deep(laws, sds, name):
    """Z^Phi(n + 1/2) / (rho^n (1 + (rho-1)/2)) changes by less than 5 rho^(-n/4) from n to n+1, n >= 12.

    Generations are simulated by counts only; at x = n + 1/2 each individual
    of generation n is counted independently with probability 1/2.
    """
    from urnflow.model import total_offspring

    law, sd = laws[name], sds[name]
    g = np.random.default_rng(12)
    Z = [np.eye(law.J, dtype=np.int64)[0]]
    kids = []
    for _ in range(15):
        kids.append(total_offspring(law, Z[-1], g))
        Z.append(kids[-1])
    spec = CharacteristicSpec.type_count(1)
    ratios = {}
    for n in (12, 13, 14):
        half = g.binomial(Z[n], 0.5)
        zj = sum(int(k[1]) for k in kids[:n]) + int(total_offspring(law, half, g)[1])
        ratios[n] = spec.b * zj / (sd.rho**n * (1 + (sd.rho - 1) * 0.5))
    for n in (12, 13):
        rel = abs(ratios[n + 1] - ratios[n]) / abs(ratios[n])
        assert rel < 5 * sd.rho ** (-n / 4)
