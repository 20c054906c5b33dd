"""Acceptance suite: each test checks one criterion at its stated tolerance."""

import time
from math import comb

import numpy as np

from opfree.algebra import CPMap, apply_cp, from_blocks, is_eta_minus_id_cp, opnorm, to_blocks, transpose_map
from opfree.compression import (
    build_V_space, eta_power_compression, eta_power_cumulant, scalar_projection_model, verify_V_identities,
)
from opfree.cumulants import convolve_add, moments_to_cumulants
from opfree.free_product import Embedded, FreeProductSpace, Linear
from opfree.laws import (
    BLaw, PointedModel, bernoulli, cauchy, certified_radius, discrete_law, gtilde, gtilde_inverse,
    matricial_checks, moment, point_mass, r_transform, random_realization_law, recover_moment_nilpotent,
    scalar_moments, semicircle,
)
from opfree.nfold import build_phi, nfold_sum_moments, verify_intertwine
from opfree.subordination import (
    F_via_eta_identity, phi_X_check, realization_only, subordination_F, verify_cond_exp,
)
from opfree.suite import random_small_point, random_upper_point, relative_gap
from conftest import rand_c


def random_admissible_eta(d: int, extra: int, rng, size: float = 0.5) -> CPMap:
    """``id + sum K_s^* . K_s`` with ``extra`` random Kraus operators of norm ``<= size``."""
    ks = [np.eye(d)]
    for _ in range(extra):
        k = rand_c(rng, d, d)
        ks.append(rng.uniform(0.2, 1.0) * size * k / opnorm(k))
    return CPMap(d, tuple(ks))


def test_criterion_1_v_identities(record):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(20):
        d = 1 + i % 3
        eta = random_admissible_eta(d, int(rng.integers(0, 3)), rng, size=1.0)
        vs = build_V_space(eta)
        rep = verify_V_identities(vs.V, eta, vs.H, rng, samples=10)
        worst = max(worst, rep["max"])
    dt = time.perf_counter() - t0
    ok = worst <= 1e-11 and dt < 10
    assert record(1, "V-identities on matrix units", ok, f"max violation {worst:.2e}, {dt:.1f} s")


def test_criterion_2_three_routes(record):
    rng = np.random.default_rng(202)
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(10):
        d = 1 + i % 2
        mu = random_realization_law(d, 2, 6, rng)
        eta = random_admissible_eta(d, 1 + i % 2, rng)
        cum = eta_power_cumulant(mu, eta, 6)
        comp = eta_power_compression(mu, eta, 6)
        worst = max(worst, relative_gap(cum, comp, 6))
    worst_n = 0.0
    for n in (2, 3):
        for d in (1, 2):
            mu = random_realization_law(d, 2, 6, rng)
            eta = CPMap.scalar(d, n)
            cum = eta_power_cumulant(mu, eta, 6)
            comp = eta_power_compression(mu, eta, 6)
            nf = nfold_sum_moments(mu, n, 6)
            worst_n = max(worst_n, relative_gap(cum, comp, 6), relative_gap(cum, nf, 6), relative_gap(comp, nf, 6))
    dt = time.perf_counter() - t0
    ok = max(worst, worst_n) <= 1e-8 and dt < 300
    assert record(2, "cumulant, compression and n-fold routes agree", ok,
                  f"random pairs {worst:.2e}, n-fold {worst_n:.2e}, {dt:.1f} s")


def test_criterion_3_scalar_classics(record):
    mu = semicircle(1.0, 16)
    worst = 0.0
    for t in (1.0, 2.0, 3.0):
        target = np.array([comb(2 * k, k) // (k + 1) * t ** k for k in range(1, 9)])
        eta = CPMap.scalar(1, t)
        for law in (eta_power_cumulant(mu, eta, 16), eta_power_compression(mu, eta, 16),
                    scalar_projection_model(mu, t, 16)):
            m = scalar_moments(law)[:, 0, 0]
            worst = max(worst, float(np.max(np.abs(m[2::2] - target) / target)))
    ok = worst <= 1e-9
    assert record(3, "semicircle powers give C_k t^k, k <= 8, three routes", ok, f"max relative error {worst:.2e}")


def _phi_laws(rng):
    laws = [realization_only(semicircle(1.0, 8)), bernoulli(8), point_mass(0.4, 2, 4),
            discrete_law([-1.0, 0.5, 2.0], [0.2, 0.5, 0.3], 6)]
    laws += [random_realization_law(1 + i % 2, 2 + i % 2, 4, rng) for i in range(6)]
    return laws


def test_criterion_4_phi_x(record):
    rng = np.random.default_rng(404)
    worst = 0.0
    count = 0
    for mu in _phi_laws(rng):
        for i in range(20):
            n = 1 + i % 2
            z = random_small_point(mu.d, rng.uniform(0.05, 0.9) * certified_radius(mu), rng, n)
            worst = max(worst, phi_X_check(mu, z)["error"])
            count += 1
    ok = worst <= 1e-8
    assert record(4, "E[Phi_X(z)] = 0 on small z", ok, f"{count} points on 10 laws, max {worst:.2e}")


def test_criterion_5_cond_exp(record):
    rng = np.random.default_rng(505)
    t0 = time.perf_counter()
    worst_margin = -np.inf
    lines = []
    ok = True
    for i in range(5):
        d = 1 + i % 2
        mu = random_realization_law(d, 2, 4, rng)
        eta = random_admissible_eta(d, 1, rng)
        nu = eta_power_compression(mu, eta, 2)
        for y in (8.0, 10.0):
            rep = verify_cond_exp(mu, eta, 1j * y * np.eye(d), K=12, L=38, nu=nu)
            good = rep["discrepancy"] <= rep["series_tail"] + 1e-9
            ok &= good
            worst_margin = max(worst_margin, rep["discrepancy"] - rep["series_tail"])
            lines.append(f"{rep['discrepancy']:.1e}/{rep['series_tail']:.1e}")
    dt = time.perf_counter() - t0
    ok = ok and dt < 600
    assert record(5, "conditional expectation of the compressed resolvent", ok,
                  f"discrepancy/tail {', '.join(lines)}; {dt:.1f} s")


def test_criterion_6_subordination(record):
    rng = np.random.default_rng(606)
    worst_gap = worst_res = 0.0
    pts = 0
    for i in range(3):
        d = 1 + i % 2
        mu = random_realization_law(d, 2, 4, rng)
        eta = random_admissible_eta(d, 1, rng)
        nu = eta_power_compression(mu, eta, 2)
        Rn = opnorm(apply_cp(eta, np.eye(d))) * mu.R
        for _ in range(20):
            z = random_upper_point(d, max(8.0, 2.5 * Rn) * rng.uniform(1.0, 2.0), rng)
            sub = subordination_F(mu, nu, z)
            other = F_via_eta_identity(eta, nu, z, g_nu=sub.G_nu)
            worst_gap = max(worst_gap, opnorm(sub.F_z - other))
            worst_res = max(worst_res, sub.residual)
            pts += 1
    ok = worst_gap <= 1e-9 and worst_res <= 1e-12
    assert record(6, "subordination routes agree", ok,
                  f"{pts} points, max gap {worst_gap:.2e}, max residual {worst_res:.2e}")


def test_criterion_7_phi_intertwines(record):
    rng = np.random.default_rng(707)
    worst_u = worst_i = worst_k0 = 0.0
    for n in (2, 3):
        for d in (1, 2):
            real = random_realization_law(d, 2, 2, rng).realization
            phi = build_phi(real, n, 4)
            rep = verify_intertwine(phi, real, n, 4)
            worst_u = max(worst_u, rep["max_unitarity_violation"])
            worst_i = max(worst_i, rep["max_intertwine_violation"])
            worst_k0 = max([worst_k0] + list(rep["k0_cases"].values()))
    ok = max(worst_u, worst_i, worst_k0) <= 1e-10
    assert record(7, "Phi is unitary and intertwines", ok,
                  f"Gram {worst_u:.2e}, intertwining {worst_i:.2e}, k = 0 cases {worst_k0:.2e}")


def _nilpotent_gap(rng):
    worst = 0.0
    for d in (1, 2):
        mu = random_realization_law(d, 2, 6, rng)
        stored = BLaw.from_moments(d, mu.R, mu.moments)
        for k in range(0, 7):
            bs = [rand_c(rng, d, d) for _ in range(k + 1)]
            direct = moment(mu, bs)
            for law in (mu, stored):
                worst = max(worst, float(np.max(np.abs(recover_moment_nilpotent(law, bs) - direct))))
    return worst


def _round_trip_gap(rng):
    worst = 0.0
    for d, n in ((1, 1), (2, 1), (2, 2)):
        mu = random_realization_law(d, 2, 4, rng)
        rad = certified_radius(mu)
        for _ in range(20):
            w = rand_c(rng, n * d, n * d)
            w = rng.uniform(0.01, 0.999) * rad * w / opnorm(w)
            worst = max(worst, opnorm(gtilde(mu, gtilde_inverse(mu, w)) - w))
    return worst


def _additivity_gap(rng):
    worst = 0.0
    for d in (1, 2):
        mu1 = random_realization_law(d, 2, 6, rng)
        mu2 = random_realization_law(d, 2, 6, rng)
        (P1, X1), (P2, X2) = mu1.realization, mu2.realization
        F = FreeProductSpace([P1, P2], 6)
        S = Linear([(1.0, Embedded(F, 0, X1)), (1.0, Embedded(F, 1, X2))])
        total = BLaw.from_model(PointedModel(F, S, mu1.R + mu2.R), 6)
        k_sum = moments_to_cumulants(total)
        k_add = convolve_add(moments_to_cumulants(mu1), moments_to_cumulants(mu2))
        for k in range(1, 7):
            worst = max(worst, float(np.max(np.abs(k_sum.tensor(k) - k_add.tensor(k)))))
    return worst


def _matricial_gap(rng):
    worst = 0.0
    for d in (1, 2):
        mu = random_realization_law(d, 2, 6, rng)
        upper = [random_upper_point(d, 2.0, rng, n) for n in (1, 2, 1)]
        small = [random_small_point(d, 0.3 * certified_radius(mu), rng, n) for n in (1, 2, 1)]
        for fun, pts in ((lambda z: cauchy(mu, z), upper), (lambda z: gtilde(mu, z), small),
                         (lambda z: r_transform(mu, z), small)):
            rep = matricial_checks(fun, pts, d, rng)
            worst = max(worst, rep["direct_sum"], rep["similarity"])
        # the same checks with the identity similarity and doubling
        z = upper[0]
        G = cauchy(mu, z)
        blocks = np.zeros((2, 2, d, d), dtype=complex)
        blocks[0, 0] = blocks[1, 1] = z
        Gb = to_blocks(cauchy(mu, from_blocks(blocks)), d)
        worst = max(worst, opnorm(Gb[0, 0] - G), opnorm(Gb[1, 1] - G), float(np.max(np.abs(Gb[0, 1]))))
    return worst


def _cp_certification():
    accepts = all(is_eta_minus_id_cp(CPMap.scalar(d, t)) for d in (1, 2, 3) for t in (1.0, 1.5, 3.0))
    rejects = not any(is_eta_minus_id_cp(CPMap.scalar(d, t)) for d in (1, 2, 3) for t in (0.0, 0.5, 0.99))
    rejects &= not is_eta_minus_id_cp(transpose_map, 2) and not is_eta_minus_id_cp(transpose_map, 3)
    return accepts and rejects


def test_criterion_8_transform_infrastructure(record):
    rng = np.random.default_rng(808)
    nil = _nilpotent_gap(rng)
    trip = _round_trip_gap(rng)
    add = _additivity_gap(rng)
    mat = _matricial_gap(rng)
    cp = _cp_certification()
    ok = nil <= 1e-12 and trip <= 1e-12 and add <= 1e-9 and mat <= 1e-10 and cp
    assert record(8, "transform infrastructure", ok,
                  f"nilpotent {nil:.2e}, round trip {trip:.2e}, additivity {add:.2e}, "
                  f"matricial {mat:.2e}, CP certification {'ok' if cp else 'wrong'}")
