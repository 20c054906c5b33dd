"""Convolution powers as compressions ``V* X V`` by an operator free from ``X``.

For a CP map ``eta`` with ``eta - id`` CP, the space ``H = B (+) (B (x)_psi B)``
with ``psi = eta - id`` carries ``V(b (+) h) = b (+) zeta b``, which satisfies

    V b1 V* b2 V = V b1 eta(b2)      and      <xi, V b V* xi> = b.

The law of ``V* X V`` under ``T -> <xi, V T V* xi>`` on the free product of
``X``'s correspondence with ``H`` is then the eta-convolution power.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import TOL, CPMap, Tolerances, adjoint, apply_cp, is_eta_minus_id_cp, matrix_units, minus_identity, opnorm
from .correspondence import PointedCorrespondence, cp_module
from .cumulants import convolve_eta, cumulants_to_moments, moments_to_cumulants
from .errors import DomainError
from .free_product import Embedded, FreeProductSpace, Product
from .laws import BLaw, PointedModel, _is_selfadjoint

CAUCHY_DEPTH = 80


@dataclass(frozen=True)
class VSpace:
    """The pointed space ``B (+) (B (x)_psi B)`` with its compression operator ``V``."""

    eta: CPMap
    psi: CPMap
    H: PointedCorrespondence
    zeta: np.ndarray
    V: np.ndarray

    @property
    def rank(self) -> int:
        return self.H.s - 1


def build_V_space(eta: CPMap, tol: Tolerances = TOL) -> VSpace:
    """Construct ``V`` for ``eta`` with ``eta - id`` completely positive.

    ``V`` is the ``(1+r)d`` square matrix whose first block column stacks
    ``I, K_1, ..., K_r`` (Kraus operators of ``psi = eta - id``) and whose
    other columns vanish.

    Raises
    ------
    DomainError
        If ``eta - id`` is not completely positive.
    """
    psi = minus_identity(eta, tol)
    Hpsi, zeta = cp_module(psi, tol)
    d, r = eta.d, Hpsi.s
    c = np.zeros(1 + r)
    c[0] = 1.0
    H = PointedCorrespondence.from_unit(d, c)
    V = np.zeros(((1 + r) * d, (1 + r) * d), dtype=complex)
    V[:d, :d] = np.eye(d)
    if r:
        V[d:, :d] = zeta
    return VSpace(eta, psi, H, zeta, V)


def verify_V_identities(V: np.ndarray, eta: CPMap, P: PointedCorrespondence,
                        rng: np.random.Generator | None = None, samples: int = 100) -> dict:
    """Max violations of ``V b1 V* b2 V = V b1 eta(b2)`` and ``<xi, V b V* xi> = b``.

    Checked on all pairs of matrix units plus ``samples`` random Hermitian pairs.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    d, s = P.d, P.s
    units = list(matrix_units(d))
    Vs = adjoint(V)

    def L(b):
        return np.kron(np.eye(s), b)

    def herm():
        a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        return a + adjoint(a)

    pairs = [(a, b) for a in units for b in units] + [(herm(), herm()) for _ in range(samples)]
    e_bim = 0.0
    for b1, b2 in pairs:
        lhs = V @ L(b1) @ Vs @ L(b2) @ V
        rhs = V @ L(b1 @ apply_cp(eta, b2))
        e_bim = max(e_bim, float(np.max(np.abs(lhs - rhs))))
    e_exp = 0.0
    for b in units + [herm() for _ in range(samples)]:
        e_exp = max(e_exp, float(np.max(np.abs(P.expectation(V @ L(b) @ Vs) - b))))
    return {"bimodule_identity": e_bim, "expectation_identity": e_exp, "max": max(e_bim, e_exp)}


def verify_vspace(vs: VSpace, rng: np.random.Generator | None = None, samples: int = 100) -> dict:
    """:func:`verify_V_identities` plus the explicit formulas for ``V`` and ``V*``."""
    rep = verify_V_identities(vs.V, vs.eta, vs.H, rng, samples)
    d, r = vs.eta.d, vs.rank
    rng = np.random.default_rng(1) if rng is None else rng
    worst = 0.0
    for _ in range(10):
        b = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        h = rng.standard_normal((r * d, d)) + 1j * rng.standard_normal((r * d, d))
        vec = np.vstack([b, h])
        img = vs.V @ vec
        expect = np.vstack([b, vs.zeta @ b]) if r else b
        worst = max(worst, float(np.max(np.abs(img - expect))))
        img = adjoint(vs.V) @ vec
        top = b + (adjoint(vs.zeta) @ h if r else 0)
        expect = np.vstack([top, np.zeros((r * d, d))])
        worst = max(worst, float(np.max(np.abs(img - expect))))
    rep["formulas"] = worst
    rep["max"] = max(rep["max"], worst)
    return rep


def _admissible(eta: CPMap, tol: Tolerances) -> None:
    if not is_eta_minus_id_cp(eta, tol=tol):
        raise DomainError("eta - id is not completely positive; the compression model does not exist")


def compression_model(P: PointedCorrespondence, X: np.ndarray, V: np.ndarray, Hv: PointedCorrespondence,
                      norm_bound: float, L: int) -> PointedModel:
    """Model of ``V* X V`` under ``T -> <xi, V T V* xi>`` on ``(P, X) * (Hv, V)``."""
    F = FreeProductSpace([P, Hv], L)
    Xh = Embedded(F, 0, X)
    Vh = Embedded(F, 1, V)
    x = Product([Vh.adjoint(), Xh, Vh])
    return PointedModel(F, x, norm_bound, pre=Vh, post=Vh.adjoint(), symmetric=_is_selfadjoint(X))


def eta_power_compression(mu: BLaw, eta: CPMap, m: int, L: int | None = None,
                          tol: Tolerances = TOL) -> BLaw:
    """Moments of the eta-convolution power through degree ``m`` via ``V* X V``.

    The free product is truncated at ``L = 3m + 2`` by default, enough for
    every moment of degree ``<= m`` to be exact.  The returned law carries a
    deeper model of the same space for Cauchy-transform evaluation.
    """
    if mu.realization is None:
        raise ValueError("the compression route needs a realization of mu")
    _admissible(eta, tol)
    vs = build_V_space(eta, tol)
    P, X = mu.realization
    L = 3 * m + 2 if L is None else L
    R = opnorm(apply_cp(eta, np.eye(eta.d))) * opnorm(X)
    moms = compression_model(P, X, vs.V, vs.H, R, L)
    deep = compression_model(P, X, vs.V, vs.H, R, max(L, CAUCHY_DEPTH))
    law = BLaw.from_model(moms, m, R)
    return BLaw(law.d, R, law.moments, None, deep, False)


def eta_power_cumulant(mu: BLaw, eta: CPMap, m: int | None = None, tol: Tolerances = TOL) -> BLaw:
    """Moments of the eta-convolution power via ``kappa -> eta o kappa``.

    The result is flagged ``formal`` when ``eta - id`` is not completely positive.
    """
    m = mu.N if m is None else m
    kap = convolve_eta(moments_to_cumulants(mu, m), eta)
    formal = not is_eta_minus_id_cp(eta, tol=tol)
    R = opnorm(apply_cp(eta, np.eye(eta.d))) * mu.R
    return cumulants_to_moments(kap, R_hint=R, formal=formal)


def projection_space(t: float) -> tuple[PointedCorrespondence, np.ndarray]:
    """Two-point space with a projection ``P`` of trace ``1/t`` and ``V = sqrt(t) P``."""
    if t < 1:
        raise DomainError("t * id - id is completely positive only for t >= 1")
    H = PointedCorrespondence.from_unit(1, [np.sqrt(1 - 1 / t), np.sqrt(1 / t)])
    V = np.sqrt(t) * np.diag([0.0, 1.0]).astype(complex)
    return H, V


def scalar_projection_model(mu: BLaw, t: float, m: int, L: int | None = None) -> BLaw:
    """Scalar convolution power via compression by ``V = P / phi(P)^(1/2)`` with ``phi(P) = 1/t``."""
    if mu.d != 1:
        raise ValueError("the projection model is scalar (d = 1)")
    if mu.realization is None:
        raise ValueError("the compression route needs a realization of mu")
    Hv, V = projection_space(t)
    P, X = mu.realization
    L = 3 * m + 2 if L is None else L
    R = t * opnorm(X)
    model = compression_model(P, X, V, Hv, R, L)
    return BLaw.from_model(model, m, R)
