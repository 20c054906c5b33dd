import numpy as np
import pytest
from hypothesis import given, strategies as st

from opfree.algebra import CPMap, opnorm
from opfree.cumulants import (
    CumulantSeq, catalan, convolve_add, convolve_eta, cumulants_to_moments, moments_to_cumulants,
    nc_partitions, nilpotent_extract, r_series,
)
from opfree.errors import ConvergenceError
from opfree.laws import (
    amplified_eval, point_mass, r_transform, random_realization_law, scalar_moments, semicircle, discrete_law,
)
from conftest import rand_c


@pytest.mark.parametrize("k,count", [(1, 1), (2, 2), (3, 5), (4, 14), (5, 42), (8, 1430)])
def test_partition_counts(k, count):
    parts = nc_partitions(k)
    assert len(parts) == count == catalan(k)
    assert all(p.is_noncrossing() for p in parts)


def test_point_mass_cumulants():
    kap = moments_to_cumulants(point_mass(0.7, 1, 5))
    assert np.isclose(kap.tensor(1)[0, 0], 0.7)
    for k in range(2, 6):
        assert np.allclose(kap.tensor(k), 0, atol=1e-12)


def test_semicircle_cumulants():
    kap = moments_to_cumulants(semicircle(1.0, 8))
    for k in range(1, 9):
        assert np.allclose(kap.tensor(k), 1.0 if k == 2 else 0.0, atol=1e-11)
    m = scalar_moments(cumulants_to_moments(kap))[:, 0, 0]
    assert np.allclose(m[[2, 4, 6, 8]], [1, 2, 5, 14])


@given(st.integers(0, 10_000))
def test_round_trip(seed):
    rng = np.random.default_rng(seed)
    mu = random_realization_law(2, 2, 6, rng)
    back = cumulants_to_moments(moments_to_cumulants(mu))
    for k in range(1, 7):
        assert np.max(np.abs(back.tensor(k) - mu.tensor(k))) < 1e-10


def test_convolve_eta_identity_and_scalar():
    kap = moments_to_cumulants(semicircle(1.0, 6))
    same = convolve_eta(kap, CPMap.identity(1))
    assert all(np.array_equal(a, b) for a, b in zip(same.tensors, kap.tensors))
    t = convolve_eta(kap, CPMap.scalar(1, 2.5))
    assert np.isclose(t.tensor(2)[0, 0], 2.5)


def test_free_poisson_scaling():
    lam = 0.5
    # free Poisson(lam) has all cumulants lam; build it from the cumulants
    kap = CumulantSeq(1, tuple(lam * np.ones((1,) * (k - 1) + (1, 1)) for k in range(1, 7)))
    pw = convolve_eta(kap, CPMap.scalar(1, 3.0))
    assert all(np.allclose(T, 3 * lam) for T in pw.tensors)


def test_convolve_add_semicircles():
    k1 = moments_to_cumulants(semicircle(1.0, 6))
    both = convolve_add(k1, k1)
    assert np.isclose(both.tensor(2)[0, 0], 2.0)
    assert np.allclose(convolve_add(k1, CumulantSeq.zeros(1, 6)).tensor(4), k1.tensor(4))


def test_nfold_add_is_eta_power(rng):
    kap = moments_to_cumulants(random_realization_law(2, 2, 5, rng))
    three = convolve_add(convolve_add(kap, kap), kap)
    eta = convolve_eta(kap, CPMap.scalar(2, 3.0))
    for k in range(1, 6):
        assert np.allclose(three.tensor(k), eta.tensor(k))


def test_convolve_add_commutative_associative(rng):
    a, b, c = (moments_to_cumulants(random_realization_law(2, 2, 4, rng)) for _ in range(3))
    for k in range(1, 5):
        assert np.array_equal(convolve_add(a, b).tensor(k), convolve_add(b, a).tensor(k))
        assert np.allclose(convolve_add(convolve_add(a, b), c).tensor(k), convolve_add(a, convolve_add(b, c)).tensor(k))


def test_r_series_constant_term_and_semicircle():
    kap = moments_to_cumulants(point_mass(0.3, 1, 4))
    assert np.allclose(r_series(kap, np.zeros((1, 1)), 0.3), 0.3)
    z = np.array([[1e-5 + 2e-5j]])
    assert np.allclose(r_series(moments_to_cumulants(semicircle(1.0, 8)), z, 2.0), z, atol=1e-14)


def test_r_series_tail_error():
    kap = moments_to_cumulants(semicircle(1.0, 4))
    with pytest.raises(ConvergenceError):
        r_series(kap, np.array([[0.1]]), 2.0)


def test_r_series_matches_r_transform(rng):
    mu = random_realization_law(2, 2, 6, rng, scale=0.5)
    kap = moments_to_cumulants(mu)
    for n in (1, 2):
        for _ in range(25):
            z = rand_c(rng, 2 * n, 2 * n)
            z = rng.uniform(2e-4, 1e-3) * z / opnorm(z)
            val = r_series(kap, z, mu.R, tail_tol=1e-8)
            assert opnorm(val - r_transform(mu, z)) <= 1e-8


def test_nilpotent_extraction_matches_cumulants(rng):
    mu = random_realization_law(2, 2, 4, rng)
    kap = moments_to_cumulants(mu)
    for k in (1, 2, 3):
        bs = [rand_c(rng, 2, 2) for _ in range(k - 1)]
        got = nilpotent_extract(lambda z: r_transform(mu, z), bs, 2)
        expect = amplified_eval(kap.tensor(k), bs, 2, 1) if bs else kap.tensor(1)
        assert np.max(np.abs(got - expect)) < 1e-9


def test_bernoulli_cumulants():
    kap = moments_to_cumulants(discrete_law([-1, 1], [0.5, 0.5], 6))
    vals = [kap.tensor(k)[(0,) * (k - 1)][0, 0] for k in range(1, 7)]
    assert np.allclose(vals, [0, 1, 0, -1, 0, 2], atol=1e-12)
