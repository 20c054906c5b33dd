"""The all-identities verification report behind ``opfree verify``."""

from __future__ import annotations

import numpy as np

from .algebra import CPMap, adjoint, apply_cp, opnorm
from .compression import build_V_space, eta_power_compression, eta_power_cumulant, verify_vspace
from .errors import OpfreeError, SingularMapError
from .free_product import FreeProductSpace, freeness_selftest
from .io import ProblemSpec
from .laws import NEWTON_C, BLaw, cauchy, matricial_checks
from .nfold import nfold_sum_moments
from .subordination import F_via_eta_identity, phi_X_check, realization_only, subordination_F, verify_cond_exp

ROUTE_RTOL = 1e-8
PHI_TOL = 1e-8
ROUTE_F_TOL = 1e-9
V_TOL = 1e-11


def relative_gap(a: BLaw, b: BLaw, m: int) -> float:
    """Worst degree-wise relative difference of the moment tensors through degree ``m``."""
    worst = 0.0
    for k in range(1, m + 1):
        x, y = a.tensor(k), b.tensor(k)
        worst = max(worst, float(np.max(np.abs(x - y))) / max(1.0, float(np.max(np.abs(x)))))
    return worst


def integer_multiple(eta: CPMap, tol: float = 1e-12) -> int | None:
    """``n`` when ``eta = n id`` for an integer ``n >= 2``, else None."""
    d = eta.d
    S = eta.superoperator
    t = S[0, 0].real
    n = int(round(t))
    if n >= 2 and abs(t - n) < tol and np.max(np.abs(S - n * np.eye(d * d))) < tol:
        return n
    return None


def random_small_point(d: int, radius: float, rng: np.random.Generator, n: int = 1) -> np.ndarray:
    """A random invertible point of M_n(B) with operator norm ``radius``."""
    D = n * d
    z = rng.standard_normal((D, D)) + 1j * rng.standard_normal((D, D))
    return radius * z / opnorm(z)


def random_upper_point(d: int, y: float, rng: np.random.Generator, n: int = 1) -> np.ndarray:
    """``y i 1 + h`` with a random Hermitian ``h`` of norm ``y/4``, so ``im z = y 1``."""
    D = n * d
    h = rng.standard_normal((D, D)) + 1j * rng.standard_normal((D, D))
    h = (h + adjoint(h)) / 2
    return 1j * y * np.eye(D) + 0.25 * y * h / opnorm(h)


def _guard(fn):
    try:
        return fn()
    except OpfreeError as exc:
        return {"ok": False, "error": f"{type(exc).__name__}: {exc}"}


def _skip(reason: str) -> dict:
    return {"ok": True, "skipped": reason}


def verify(spec: ProblemSpec) -> dict:
    """Run every applicable identity check for the problem; ``report["ok"]`` summarizes."""
    mu, eta, tol = spec.mu, spec.eta, spec.tol
    rng = spec.rng
    d = spec.d
    m = min(spec.max_degree, mu.N, 6)
    rep: dict = {}
    real = mu.realization is not None
    adm = bool(spec.eta_admissible)

    def v_identities():
        vs = build_V_space(eta, tol)
        r = verify_vspace(vs, rng, samples=20)
        r["ok"] = r["max"] <= V_TOL
        return r

    def routes():
        cum = eta_power_cumulant(mu, eta, m, tol)
        out = {"degree": m}
        if real and adm:
            comp = eta_power_compression(mu, eta, m, tol=tol)
            out["cumulant_vs_compression"] = relative_gap(cum, comp, m)
            n = integer_multiple(eta)
            if n is not None:
                out["n"] = n
                out["nfold_vs_compression"] = relative_gap(nfold_sum_moments(mu, n, m), comp, m)
        gaps = [v for k, v in out.items() if k.endswith("compression")]
        out["ok"] = all(g <= ROUTE_RTOL for g in gaps)
        if not gaps:
            out["note"] = "only the cumulant route applies"
        return out

    def phi_x():
        radius = 0.3 * NEWTON_C / max(mu.R, 1e-12)
        worst = 0.0
        for _ in range(5):
            worst = max(worst, phi_X_check(mu, random_small_point(d, radius, rng), tol)["error"])
        return {"ok": worst <= PHI_TOL, "worst": worst, "points": 5}

    def cond_exp():
        Rn = opnorm(apply_cp(eta, np.eye(d))) * mu.R
        y = max(8.0, 2.5 * Rn)
        r = verify_cond_exp(mu, eta, 1j * y * np.eye(d), K=12, L=38, tol=tol)
        r.pop("F")
        r["z_imag"] = y
        r["ok"] = bool(r["ok"] and r["imag_ok"])
        return r

    def subordination():
        Rn = opnorm(apply_cp(eta, np.eye(d))) * mu.R
        y = max(8.0, 2.5 * Rn)
        mu_r = realization_only(mu)
        nu = eta_power_compression(mu_r, eta, 2, tol=tol)
        worst_res, worst_gap, pts = 0.0, 0.0, 5
        eta_ok = True
        for _ in range(pts):
            z = random_upper_point(d, y, rng)
            sub = subordination_F(mu_r, nu, z, tol)
            worst_res = max(worst_res, sub.residual)
            try:
                worst_gap = max(worst_gap, opnorm(sub.F_z - F_via_eta_identity(eta, nu, z, tol, g_nu=sub.G_nu)))
            except SingularMapError:
                eta_ok = False
        out = {"max_residual": worst_res, "points": pts}
        if eta_ok:
            out["route_gap"] = worst_gap
        out["ok"] = worst_res <= tol.newton_tol and (not eta_ok or worst_gap <= ROUTE_F_TOL)
        return out

    def matricial():
        y = max(2.0, 2 * mu.R)
        pts = [random_upper_point(d, y, rng, n) for n in (1, 2, 1)]
        return matricial_checks(lambda z: cauchy(mu, z, tol=tol), pts, d, rng, tol)

    def freeness():
        P = mu.realization[0]
        Hv = build_V_space(eta, tol).H if (eta is not None and adm) else P
        F = FreeProductSpace([P, Hv], 4, tol)
        return freeness_selftest(F, 4, rng, samples=1)

    if eta is None:
        for key in ("v_identities", "convolution_routes", "cond_exp", "subordination"):
            rep[key] = _skip("no eta in the problem")
    else:
        rep["v_identities"] = _guard(v_identities) if adm else _skip("eta - id is not completely positive")
        rep["convolution_routes"] = _guard(routes)
        if real and adm:
            rep["cond_exp"] = _guard(cond_exp)
            rep["subordination"] = _guard(subordination)
        else:
            reason = "needs a realization of mu and admissible eta"
            rep["cond_exp"] = _skip(reason)
            rep["subordination"] = _skip(reason)
    rep["phi_x"] = _guard(phi_x) if real else _skip("needs a realization of mu")
    rep["matricial"] = _guard(matricial)
    rep["freeness"] = _guard(freeness) if real else _skip("needs a realization of mu")
    rep["ok"] = all(v.get("ok", False) for v in rep.values())
    return rep
