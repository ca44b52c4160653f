import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from urnflow import spectral
from urnflow.errors import Degenerate

from conftest import DEFECTIVE, spectral_corpus


def test_corpus_has_25_matrices_and_a_jordan_block():
    mats = spectral_corpus()
    assert len(mats) == 25
    sd = spectral.decompose(np.array(DEFECTIVE, dtype=float))
    assert any(e.d >= 1 for e in sd.eigs)


@pytest.mark.parametrize("k", range(25))
def test_identities_on_corpus(k):
    sd = spectral.decompose(spectral_corpus()[k])
    res = spectral.check_identities(sd)
    assert max(res.values()) <= spectral.EPS_SPEC, res


def test_perron_normalization():
    A = np.array([[3.0, 1.0], [1.0, 3.0]])
    p = spectral.perron(A)
    assert p.rho == pytest.approx(4.0)
    assert p.u.sum() == pytest.approx(1.0)
    assert p.v @ p.u == pytest.approx(1.0)
    np.testing.assert_allclose(A @ p.u, 4 * p.u, atol=1e-12)
    np.testing.assert_allclose(p.v @ A, 4 * p.v, atol=1e-12)


def test_regimes_of_corpus(sds):
    assert sds["case_i"].regime == "case_i_above"
    assert sds["case_ii"].regime == "case_ii_boundary"
    assert sds["case_iii"].regime == "case_iii_below"
    assert sds["golden"].regime == "case_iii_below"
    assert sds["case_ii"].to_json()["regime"] == "boundary"


def test_classify_partitions_spectrum(sds):
    c = spectral.classify(sds["case_i"])
    assert len(c.sigma1) == 2  # rho and the second eigenvalue both exceed sqrt(rho)
    assert c.gamma == pytest.approx(5.0)
    assert c.all_Gamma_simple


def test_jordan_block_nilpotent_part():
    sd = spectral.decompose(np.array(DEFECTIVE, dtype=float))
    e = next(e for e in sd.eigs if e.d == 1)
    assert e.lam == pytest.approx(1.0)
    assert np.abs(e.N).max() > 1e-6
    assert np.abs(e.N @ e.N).max() < 1e-9
    assert not e.simple


def test_complex_pair_is_conjugate_symmetric():
    sd = spectral.decompose(np.array([[1, 1, 0], [0, 1, 1], [1, 0, 1]], dtype=float))
    lams = sorted((complex(e.lam) for e in sd.eigs), key=lambda z: z.imag)
    assert lams[0] == pytest.approx(lams[2].conjugate())


def test_zero_matrix_is_degenerate():
    with pytest.raises(Degenerate):
        spectral.decompose(np.zeros((2, 2)))


def test_boundary_flag_forces_class_two():
    eps = 1e-8
    A = np.array([[3.0, 1.0 + eps], [1.0, 3.0]])
    sd = spectral.decompose(A, assert_on_boundary=True)
    assert sd.regime == "case_ii_boundary"


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 9), min_size=9, max_size=9))
def test_identities_hold_for_random_positive_3x3(entries):
    A = np.array(entries, dtype=float).reshape(3, 3)
    sd = spectral.decompose(A)
    assert max(spectral.check_identities(sd).values()) <= spectral.EPS_SPEC
    # the Perron root dominates every other modulus
    assert all(abs(e.lam) < sd.rho for i, e in enumerate(sd.eigs) if i != sd.perron_index)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(1, 9), min_size=4, max_size=4))
def test_classes_stable_under_tiny_perturbation(entries):
    A = np.array(entries, dtype=float).reshape(2, 2)
    sd = spectral.decompose(A)
    eps = spectral.CLASS_REL * np.sqrt(sd.rho) / 100
    sd2 = spectral.decompose(A + eps)
    assert sorted(e.sigma for e in sd.eigs) == sorted(e.sigma for e in sd2.eigs)
