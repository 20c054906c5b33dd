import numpy as np
import pytest

from opfree.algebra import CPMap, adjoint
from opfree.compression import eta_power_cumulant
from opfree.laws import random_realization_law, scalar_moments, semicircle
from opfree.nfold import build_K, build_phi, moments_agree, nfold_sum_moments, verify_intertwine
from opfree.suite import relative_gap


def test_K_for_one_copy():
    ks = build_K(1, 2)
    assert np.allclose(ks.V, np.eye(2))
    assert np.allclose(ks.epsilon, np.eye(2))


def test_K_two_copies_scalar():
    ks = build_K(2, 1)
    assert np.allclose(ks.V, np.sqrt(2) * np.full((2, 2), 0.5))
    assert ks.report["max"] < 1e-13
    for j in range(2):
        e = np.zeros((2, 1))
        e[j] = 1
        assert np.allclose(ks.V @ e, ks.epsilon)
    b = np.array([[0.7 - 0.2j]])
    assert np.allclose(ks.K.expectation(ks.V @ np.kron(np.eye(2), b) @ adjoint(ks.V)), b)


def test_nfold_semicircle():
    nf = nfold_sum_moments(semicircle(1.0, 4), 2, 4)
    m = scalar_moments(nf)[:, 0, 0]
    assert np.allclose(m[[2, 4]], [2, 8])


@pytest.mark.parametrize("n", [2, 3])
def test_nfold_matches_cumulant_route(rng, n):
    mu = random_realization_law(2, 2, 6, rng)
    a = nfold_sum_moments(mu, n, 6)
    b = eta_power_cumulant(mu, CPMap.scalar(2, n), 6)
    assert relative_gap(b, a, 6) < 1e-9


def _real(d, rng):
    mu = random_realization_law(d, 2, 2, rng)
    return mu.realization


@pytest.mark.parametrize("n,d", [(1, 1), (2, 1), (3, 2)])
def test_phi_unitary_and_intertwining(rng, n, d):
    real = _real(d, rng)
    phi = build_phi(real, n, 3 if d == 2 else 4)
    rep = verify_intertwine(phi, real, n, 3 if d == 2 else 4)
    assert rep["max_unitarity_violation"] <= 1e-10
    assert rep["max_intertwine_violation"] <= 1e-10
    assert rep["phi_xi_violation"] <= 1e-12
    assert rep["max_bimodularity_violation"] <= 1e-10
    assert all(v <= 1e-10 for v in rep["k0_cases"].values())


def test_offsets_skip_e1(rng):
    real = _real(1, rng)
    phi = build_phi(real, 3, 3)
    # words ending in the first letter carry the H_1 tail, which takes no offset
    for word in [(0, 1, 2), (2, 0, 1), (1, 2, 1)]:
        assert all(o != 0 for o in phi.offsets(word))


def test_moments_agree(rng):
    assert moments_agree(_real(2, rng), 2, 6) < 1e-10


def test_both_conventions_reported(rng):
    real = _real(1, rng)
    phi = build_phi(real, 3, 3)
    assert set(phi.all_reports) == {"j_i - j_{i+1} + 1", "j_{i+1} - j_i + 1"}
    assert phi.convention == "j_i - j_{i+1} + 1"
