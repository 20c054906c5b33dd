import numpy as np
import pytest
from hypothesis import given, strategies as st

from opfree.algebra import from_blocks, imag_part, min_eig, opnorm, scalar_amplify
from opfree.errors import ConvergenceError, DegreeError, DomainError
from opfree.laws import (
    NEWTON_C, BLaw, bernoulli, cauchy, certified_radius, discrete_law, growth_check, gtilde, gtilde_inverse,
    matricial_checks, moment, point_mass, positivity_check, r_transform, random_realization_law,
    recover_moment_nilpotent, scalar_moments, semicircle, semicircle_cauchy,
)
from opfree.subordination import realization_only
from conftest import rand_c


def test_degree_zero_moment():
    mu = semicircle(1.0, 6)
    b = np.array([[2.0 + 1j]])
    assert np.allclose(moment(mu, [b]), b)


def test_semicircle_catalan_moments():
    m = scalar_moments(semicircle(1.0, 8))[:, 0, 0]
    assert np.allclose(m[[2, 4, 6, 8]], [1, 2, 5, 14], atol=1e-12)
    assert np.allclose(m[[1, 3, 5, 7]], 0, atol=1e-12)


def test_moment_degree_error():
    with pytest.raises(DegreeError):
        moment(semicircle(1.0, 4), [np.eye(1)] * 7)


def test_realization_agrees_with_moment_maps(rng):
    mu = random_realization_law(2, 2, 4, rng)
    P, X = mu.realization
    bs = [rand_c(rng, 2, 2) for _ in range(5)]
    L = lambda b: np.kron(np.eye(P.s), b)
    op = L(bs[0])
    for b in bs[1:]:
        op = op @ X @ L(b)
    assert np.allclose(P.expectation(op), moment(mu, bs), atol=1e-12)


def test_cauchy_point_mass_zero():
    z = np.array([[1j, 0.5], [0.0, 2j]])
    assert np.allclose(cauchy(point_mass(0.0, 2), z), np.linalg.inv(z))


def test_semicircle_cauchy_branch():
    z = np.array([[2j]])
    g = (2j - np.sqrt(-8 + 0j)) / 2
    # the branch decaying like 1/z has imaginary part in (-1, 0)
    g = g if abs(g) < 1 else (2j + np.sqrt(-8 + 0j)) / 2
    assert np.allclose(semicircle_cauchy(z, 1.0), g)
    assert np.allclose(cauchy(realization_only(semicircle(1.0, 40)), z), g, atol=1e-6)


def test_closed_form_matches_realization_far_out():
    z = np.array([[0.3 + 6j]])
    a = cauchy(semicircle(1.0, 8), z)
    b = cauchy(realization_only(semicircle(1.0, 8)), z)
    assert np.allclose(a, b, atol=1e-8)


@given(st.integers(0, 10_000), st.floats(0.2, 2.0))
def test_cauchy_imaginary_part_bound(seed, eps):
    rng = np.random.default_rng(seed)
    mu = random_realization_law(2, 2, 2, rng)
    h = rand_c(rng, 2, 2)
    z = (h + h.conj().T) / 2 + 1j * eps * np.eye(2)
    G = cauchy(mu, z)
    P, X = mu.realization
    Z = np.kron(np.eye(P.s), z)
    bound = -eps / opnorm(Z - X) ** 2
    assert np.linalg.eigvalsh(imag_part(G))[-1] <= bound + 1e-10


def test_cauchy_rejects_real_point():
    with pytest.raises(DomainError):
        cauchy(bernoulli(), np.array([[1.0 + 0j]]))


def test_series_route_without_realization():
    mu0 = random_realization_law(1, 3, 40, np.random.default_rng(3))
    mu = BLaw.from_moments(1, mu0.R, mu0.moments)
    z = np.array([[4j]])
    t = cauchy(mu, z, full_output=True)
    assert t.route == "series" and t.tail < 1e-12
    assert np.allclose(t.value, cauchy(mu0, z), atol=1e-12)
    with pytest.raises(ConvergenceError):
        cauchy(mu, np.array([[0.5j]]))


def test_gtilde_zero_and_first_order(rng):
    mu = random_realization_law(2, 2, 4, rng)
    assert np.allclose(gtilde(mu, np.zeros((2, 2))), 0)
    z = 1e-4 * rand_c(rng, 2, 2)
    approx = z + z @ moment(mu, [np.eye(2), np.eye(2)]) @ z
    assert opnorm(gtilde(mu, z) - approx) < 1e-10


def test_gtilde_agrees_with_cauchy(rng):
    mu = random_realization_law(2, 2, 4, rng)
    z = np.array([[3j, 0.2], [0.2, 2j]])
    assert np.allclose(gtilde(mu, np.linalg.inv(z)), cauchy(mu, z))


@given(st.integers(0, 10_000), st.integers(0, 4))
def test_nilpotent_recovery(seed, n):
    rng = np.random.default_rng(seed)
    mu = random_realization_law(2, 2, 6, rng)
    bs = [rand_c(rng, 2, 2) for _ in range(n + 1)]
    assert np.allclose(recover_moment_nilpotent(mu, bs), moment(mu, bs), atol=1e-12)
    stored = BLaw.from_moments(2, mu.R, mu.moments)
    assert np.allclose(recover_moment_nilpotent(stored, bs), moment(mu, bs), atol=1e-12)


def test_nilpotent_first_moment_and_zero():
    mu = bernoulli(4)
    assert np.allclose(recover_moment_nilpotent(mu, [np.eye(1)] * 2), moment(mu, [np.eye(1)] * 2))
    assert np.allclose(recover_moment_nilpotent(mu, [np.zeros((1, 1))] * 4), 0)


def test_gtilde_inverse_point_mass():
    m = 0.7
    mu = point_mass(m, 1)
    w = np.array([[0.05 + 0.02j]])
    assert np.allclose(gtilde_inverse(mu, w), w / (1 + m * w))
    assert np.allclose(gtilde_inverse(mu, np.zeros((1, 1))), 0)


def test_gtilde_inverse_round_trip(rng):
    mu = random_realization_law(2, 2, 4, rng)
    rad = certified_radius(mu)
    for _ in range(50):
        w = rand_c(rng, 4, 4)
        w = rng.uniform(0.05, 0.99) * rad * w / opnorm(w)
        z = gtilde_inverse(mu, w)
        assert opnorm(gtilde(mu, z) - w) <= 1e-12


def test_r_transform_classics():
    z = np.array([[0.05 + 0.03j]])
    assert np.allclose(r_transform(semicircle(1.0, 8), z), z, atol=1e-10)
    assert np.allclose(r_transform(point_mass(0.4, 1), z), 0.4)


def test_r_transform_functional_identity(rng):
    mu = random_realization_law(2, 2, 4, rng)
    z = 0.2 * NEWTON_C / mu.R * (lambda a: a / opnorm(a))(rand_c(rng, 2, 2))
    R = r_transform(mu, z)
    assert np.allclose(gtilde(mu, np.linalg.inv(np.linalg.inv(z) + R)), z, atol=1e-11)


def test_matricial_checks(rng):
    mu = random_realization_law(2, 2, 4, rng)
    pts = [1j * 2 * np.eye(2), from_blocks(np.array([[[[0, 0], [0, 0]]] * 2] * 2)) + 3j * np.eye(4)]
    rep = matricial_checks(lambda z: cauchy(mu, z), pts, 2, rng)
    assert rep["ok"], rep


def test_matricial_identity_similarity(rng):
    mu = bernoulli(4)
    z = np.array([[0.3 + 1j]])
    S = scalar_amplify(np.eye(1), 1)
    assert np.allclose(cauchy(mu, S @ z @ S), cauchy(mu, z))


def test_positivity_and_growth(rng):
    mu = random_realization_law(2, 2, 6, rng)
    assert positivity_check(mu)["ok"]
    assert growth_check(mu, rng)["ok"]
    bad = BLaw.from_moments(1, 1.0, [np.zeros((1, 1)), -np.ones((1, 1, 1))])
    assert not positivity_check(bad)["ok"]


def test_discrete_law_validation():
    with pytest.raises(DomainError):
        discrete_law([0, 1], [0.3, 0.3], 4)


def test_resolvent_sign(rng):
    mu = bernoulli(4)
    G = cauchy(mu, np.array([[0.2 + 0.5j]]))
    assert min_eig(-imag_part(G)) > 0


def test_nilpotent_recovery_at_stored_degree(rng):
    mu = random_realization_law(2, 2, 5, rng)
    stored = BLaw.from_moments(2, mu.R, mu.moments)
    bs = [rand_c(rng, 2, 2) for _ in range(6)]
    assert np.allclose(recover_moment_nilpotent(stored, bs), moment(mu, bs), atol=1e-12)
    with pytest.raises(DegreeError):
        recover_moment_nilpotent(stored, bs + [np.eye(2)])
