"""Subordination for convolution powers, and the checks built around it.

For ``nu = mu^{boxplus eta}`` there is an analytic ``F`` on the upper half-plane
with ``G_nu = G_mu o F``.  This module computes ``F`` by two routes (Newton
inversion of ``G_mu`` and the closed identity through ``eta^-1``), checks the
conditional-expectation formula for the resolvent of ``V* X V`` on the free
product, the zero-expectation identity behind the R-transform, and scalar
densities by Stieltjes inversion.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .algebra import TOL, CPMap, Tolerances, adjoint, apply_cp, from_blocks, imag_part, inverse_map, min_eig, opnorm, to_blocks
from .compression import build_V_space, compression_model
from .errors import ConvergenceError, DomainError, TruncationError
from .laws import BLaw, _amp_X, _amp_xi, _left_action, cauchy, certified_radius, newton_solve, r_transform


@dataclass(frozen=True)
class SubordinationResult:
    z: np.ndarray
    F_z: np.ndarray
    route: str
    residual: float
    nu_tail: float
    iterations: int
    continued: bool = False
    G_nu: np.ndarray | None = None


def _resolvent_law(mu: BLaw):
    """``z -> E^(n)[(z - X^(n))^-1]`` without the half-plane check (for Jacobians)."""
    if mu.exact is not None:
        return mu.exact
    if mu.realization is None:
        raise ValueError("Newton inversion of G_mu needs a realization of mu")
    P, X = mu.realization
    d = mu.d

    def G(z):
        n = z.shape[0] // d
        Z = _left_action(z, P.s, d)
        xi = _amp_xi(P, n)
        return adjoint(xi) @ np.linalg.solve(Z - _amp_X(X, n), xi)

    return G


def _in_upper(z: np.ndarray) -> bool:
    return min_eig(imag_part(z)) > 0


def subordination_F(mu: BLaw, nu: BLaw, z: np.ndarray, tol: Tolerances = TOL,
                    continuation_steps: int = 8) -> SubordinationResult:
    """``F = G_mu^-1 o G_nu`` at ``z`` by Newton seeded at ``F = z``.

    If the direct solve fails, Newton is continued along the segment from
    ``i s 1`` (with ``s`` large enough that ``G_nu`` lands in the inversion
    ball of ``G~_mu``) to ``z``; a result is returned only with residual
    ``<= newton_tol`` and ``im F > 0``.

    Raises
    ------
    ConvergenceError
        If no certified solution is found.
    """
    z = np.asarray(z, dtype=complex)
    if not _in_upper(z):
        raise DomainError("z is not in the upper half-plane")
    G = _resolvent_law(mu)
    g = cauchy(nu, z, tol=tol, full_output=True)
    w = g.value
    try:
        F, res, it = newton_solve(G, w, z, mu.d, tol, domain=_in_upper)
        continued = False
    except ConvergenceError:
        F, res, it = _continued(G, nu, z, mu, tol, continuation_steps)
        continued = True
    if not _in_upper(F):
        raise ConvergenceError("solution left the upper half-plane")
    return SubordinationResult(z, F, "inverse-composition", res, g.tail, it, continued, w)


def _continued(G, nu, z, mu, tol, steps):
    d = mu.d
    D = z.shape[0]
    s = max(8.0, 4 * max(mu.R, nu.R) / max(certified_radius(mu) * mu.R, 1e-12))
    z0 = 1j * s * np.eye(D)
    F = z0
    it_total = 0
    for t in np.linspace(0, 1, steps + 1):
        zt = (1 - t) * z0 + t * z
        w = cauchy(nu, zt, tol=tol)
        F, res, it = newton_solve(G, w, F, d, tol, domain=_in_upper)
        it_total += it
    return F, res, it_total


def amplify_linear(f, z: np.ndarray, d: int) -> np.ndarray:
    """Apply a linear map on B blockwise to ``z`` in M_n(B)."""
    return from_blocks(f(to_blocks(np.asarray(z, dtype=complex), d)))


def F_via_eta_identity(eta: CPMap, nu: BLaw, z: np.ndarray, tol: Tolerances = TOL,
                       g_nu: np.ndarray | None = None) -> np.ndarray:
    """``F(z) = eta^-1(z) + (id - eta^-1)(G_nu(z)^-1)`` (blockwise ``eta^-1``).

    ``g_nu`` may pass a precomputed ``G_nu(z)``.

    Raises
    ------
    SingularMapError
        If ``eta`` is not invertible as a linear map on B.
    """
    inv = inverse_map(eta, eta.d)
    z = np.asarray(z, dtype=complex)
    w_inv = np.linalg.inv(cauchy(nu, z, tol=tol) if g_nu is None else g_nu)
    return amplify_linear(inv, z, eta.d) + w_inv - amplify_linear(inv, w_inv, eta.d)


def power_cauchy(mu: BLaw, eta: CPMap, z: np.ndarray, tol: Tolerances = TOL,
                 steps: int = 40, start_imag: float | None = None) -> tuple[np.ndarray, np.ndarray, float]:
    """``G_nu(z)`` for ``nu = mu^{boxplus eta}`` through the subordination fixed point.

    Solves ``F = eta^-1(z) + (id - eta^-1)(G_mu(F)^-1)`` by Newton, continued
    along ``Re z + i y 1`` with ``y`` decreasing geometrically from a large
    value to ``Im z``.  Unlike the moment series this stays valid close to
    the real axis, which is what densities need.  Requires a scalar-imaginary
    path endpoint, i.e. ``Im z = y 1``.

    Returns ``(G_nu(z), F(z), residual)``.
    """
    z = np.asarray(z, dtype=complex)
    D = z.shape[0]
    y = min_eig(imag_part(z))
    if y <= 0:
        raise DomainError("z is not in the upper half-plane")
    x = z - 1j * y * np.eye(D)
    if opnorm(imag_part(x)) > tol.eq_tol * max(1.0, y):
        raise ValueError("power_cauchy needs Im z to be a multiple of the identity")
    d = eta.d
    inv = inverse_map(eta, d)
    G = _resolvent_law(mu)
    scale = opnorm(apply_cp(eta, np.eye(d))) * mu.R
    top = max(start_imag or 0.0, 8.0 * max(scale, 1.0), y)

    def f(Fz):
        return Fz - amplify_linear(lambda b: b - inv(b), np.linalg.inv(G(Fz)), d)

    F = x + 1j * top * np.eye(D)
    res = np.inf
    for yk in np.geomspace(top, y, steps):
        zk = x + 1j * yk * np.eye(D)
        F, res, _ = newton_solve(f, amplify_linear(inv, zk, d), F, d, tol, domain=_in_upper)
    return G(F), F, res


COMPONENT_BUDGET = 4_000_000


def _largest_component(t: list, length: int) -> int:
    """Entries per column of the largest alternating word of a two-factor product."""
    a, b = (length + 1) // 2, length // 2
    return max(t[0] ** a * t[1] ** b, t[1] ** a * t[0] ** b)


def realization_only(mu: BLaw) -> BLaw:
    """``mu`` without its closed form, so every route sees the realized law."""
    return replace(mu, exact=None) if mu.exact is not None else mu


def verify_cond_exp(mu: BLaw, eta: CPMap, z: np.ndarray, K: int | None = 12, L: int = 38,
                    nu: BLaw | None = None, tol: Tolerances = TOL, target: float = 1e-9) -> dict:
    """Compare ``E_1[V (z - V*XV)^-1 V*]`` with ``(F(z) - X)^-1`` on mu's space.

    The left side is the resolvent series truncated after ``K`` terms and
    compressed exactly on the free product (depth ``L``); its tail is bounded by
    ``||eta(1)|| ||z^-1|| r^{K+1} / (1 - r)`` with ``r = ||eta(1)|| ||X|| ||z^-1||``.
    With ``K=None`` the smallest ``K`` whose tail is below ``target`` is used
    and ``L`` is raised to ``3K + 2`` if needed.  A closed-form transform on
    ``mu`` is ignored: both sides are computed for the realized law.
    """
    from .compression import eta_power_compression

    if mu.realization is None:
        raise ValueError("needs a realization of mu")
    mu = realization_only(mu)
    z = np.asarray(z, dtype=complex)
    if z.shape != (mu.d, mu.d):
        raise ValueError("z must lie in B")
    P, X = mu.realization
    vs = build_V_space(eta, tol)
    v2 = opnorm(apply_cp(eta, np.eye(eta.d)))
    Rn = v2 * opnorm(X)
    nw = opnorm(np.linalg.inv(z))
    r = Rn * nw
    if r >= 1:
        raise ConvergenceError(f"resolvent series diverges: r = {r:.3f}")
    if K is None:
        K = 0
        while v2 * nw * r ** (K + 1) / (1 - r) >= target and K < 200:
            K += 1
        L = max(L, 3 * K + 2)
    tail = v2 * nw * r ** (K + 1) / (1 - r)
    model = compression_model(P, X, vs.V, vs.H, Rn, L)
    reach = 3 * ((K + 1) // 2 + 1) + 1
    size = _largest_component(model.space.t, reach) * P.s * mu.d
    if size > COMPONENT_BUDGET:
        raise TruncationError(f"free-product components of ~{size} entries exceed the budget; "
                              "use a smaller realization or fewer terms")
    lhs = model.cauchy_series(z, K, start=model.space.basis_block(0))
    if nu is None:
        nu = eta_power_compression(mu, eta, 2)
    sub = subordination_F(mu, nu, z, tol)
    rhs = np.linalg.inv(np.kron(np.eye(P.s), sub.F_z) - X)
    disc = opnorm(lhs - rhs)
    eps_F = min_eig(imag_part(sub.F_z))
    bound = -eps_F / opnorm(np.kron(np.eye(P.s), sub.F_z) - X) ** 2
    lhs_top = float(np.linalg.eigvalsh(imag_part(lhs))[-1])
    rhs_top = float(np.linalg.eigvalsh(imag_part(rhs))[-1])
    return {
        "discrepancy": disc,
        "series_tail": tail,
        "certificate": tail + tol.newton_tol,
        "ok": disc <= tail + 1e-9,
        "K": K,
        "L": L,
        "F": sub.F_z,
        "residual": sub.residual,
        "lhs_imag_max_eig": lhs_top,
        "rhs_imag_max_eig": rhs_top,
        "imag_bound": bound,
        "imag_ok": rhs_top <= bound + tol.eq_tol and lhs_top <= bound + tail + tol.eq_tol,
    }


def phi_X_check(mu: BLaw, z: np.ndarray, tol: Tolerances = TOL) -> dict:
    """``E[(1 - z(X - R(z)))^-1 - 1]``, which vanishes for small invertible ``z``."""
    if mu.realization is None:
        raise ValueError("needs a realization of mu")
    P, X = mu.realization
    z = np.asarray(z, dtype=complex)
    d = mu.d
    n = z.shape[0] // d
    R = r_transform(mu, z, tol)
    Z = _left_action(z, P.s, d)
    RR = _left_action(R, P.s, d)
    D = Z.shape[0]
    phi = np.linalg.inv(np.eye(D) - Z @ (_amp_X(X, n) - RR)) - np.eye(D)
    xi = _amp_xi(P, n)
    val = adjoint(xi) @ phi @ xi
    err = float(np.max(np.abs(val)))
    return {"value": val, "error": err, "ok": err <= 1e-8, "R": R}


def density_scalar(law: BLaw, grid, eps_imag: float, tol: Tolerances = TOL,
                   eta: CPMap | None = None) -> np.ndarray:
    """``-Im G(x + i eps) / pi`` on the grid, an ``eps``-smoothed density (d = 1).

    With ``eta`` given, the density is that of ``law^{boxplus eta}``, evaluated
    through :func:`power_cauchy`.  Columns: ``x``, density, certificate (the
    series tail or the subordination residual).
    """
    if law.d != 1:
        raise ValueError("density_scalar is for d = 1")
    if not eps_imag > 0:
        raise DomainError("eps_imag must be positive")
    xs = np.asarray(grid, dtype=float)
    out = np.empty((xs.size, 3))
    for i, x in enumerate(xs):
        z = np.array([[x + 1j * eps_imag]])
        if eta is None:
            g = cauchy(law, z, tol=tol, full_output=True)
            val, cert = g.value, g.tail
        else:
            val, _, cert = power_cauchy(law, eta, z, tol)
        out[i] = (x, -val[0, 0].imag / np.pi, cert)
    return out
