"""Sums of n free copies versus the compression model with ``eta = n id``.

Here ``K = B^n`` is pointed at ``e_1``, ``eps = (e_1 + ... + e_n)/sqrt(n)`` and
``V = sqrt(n) P`` with ``P`` the projection onto ``B eps``.  The map ``Phi``
sends the free product of n copies of ``(H, xi)`` onto the range of ``V`` in
``(H, xi) * (K, e_1)`` and intertwines ``X_1 + ... + X_n`` with ``V X V``.

Factor indices are 0-based in code: copy ``j`` of H is factor ``j`` of the
domain; in the target, factor 0 is H and factor 1 is K.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import TOL, CPMap, Tolerances, adjoint, matrix_units, opnorm
from .compression import verify_V_identities
from .correspondence import PointedCorrespondence
from .errors import ConstructionError
from .free_product import Embedded, FreeProductSpace, LeftMul, Linear, Product, WordVector
from .laws import BLaw, PointedModel, _is_selfadjoint

CONVENTIONS = {
    # offset attached to the i-th letter, from the letters j_i, j_{i+1} (0-based)
    "j_i - j_{i+1} + 1": lambda a, b, n: (a - b) % n,
    "j_{i+1} - j_i + 1": lambda a, b, n: (b - a) % n,
}


@dataclass(frozen=True)
class KSpace:
    n: int
    d: int
    K: PointedCorrespondence
    epsilon: np.ndarray
    P: np.ndarray
    V: np.ndarray
    report: dict


def build_K(n: int, d: int) -> KSpace:
    """``K = B^n`` with ``eps``, ``P`` and ``V = sqrt(n) P``; the V-identities are checked for ``eta = n id``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    c = np.zeros(n)
    c[0] = 1.0
    K = PointedCorrespondence.from_unit(d, c)
    eps = np.kron(np.ones((n, 1)) / np.sqrt(n), np.eye(d))
    P = eps @ adjoint(eps)
    V = np.sqrt(n) * P
    rep = verify_V_identities(V, CPMap.scalar(d, n), K, samples=10)
    return KSpace(n, d, K, eps, P, V, rep)


def nfold_sum_moments(mu: BLaw, n: int, m: int, L: int | None = None) -> BLaw:
    """Law of ``X_1 + ... + X_n`` for free copies of ``mu``'s realization, through degree ``m``."""
    if mu.realization is None:
        raise ValueError("the n-fold sum needs a realization of mu")
    P, X = mu.realization
    F = FreeProductSpace([P] * n, m if L is None else L)
    S = Linear([(1.0, Embedded(F, j, X)) for j in range(n)])
    model = PointedModel(F, S, n * opnorm(X), symmetric=_is_selfadjoint(X))
    return BLaw.from_model(model, m, n * opnorm(X))


@dataclass
class PhiMap:
    """Word-wise isometry from the n-fold free product onto the range of ``V``."""

    domain: FreeProductSpace
    target: FreeProductSpace
    kspace: KSpace
    convention: str
    _k_coords: np.ndarray
    report: dict = field(default_factory=dict)
    all_reports: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.kspace.n

    def offsets(self, letters: tuple) -> list[int]:
        """0-based indices into ``e_1..e_n`` attached to the letters of a domain word.

        The alternation of the word guarantees none of them equals 0 (that is,
        ``e_1``), which is asserted.
        """
        n = self.n
        off = CONVENTIONS[self.convention]
        out = [off(a, b, n) for a, b in zip(letters, letters[1:])]
        if letters:
            out.append(letters[-1])
        if any(o == 0 for o in out):
            raise ConstructionError(f"offset hit e_1 for word {letters}")
        return out

    def apply(self, vec: WordVector) -> WordVector:
        T = self.target
        kc = self._k_coords  # (n, n-1): K-vector e_j in complement coordinates
        n = self.n
        out: dict = {}

        def add(w, arr):
            out[w] = out[w] + arr if w in out else arr

        for w, comp in vec.comps.items():
            if w and w[-1] == 0:
                letters, tail = w[:-1], True
            else:
                letters, tail = w, False
            offs = self.offsets(letters)
            k = len(letters)
            # interleave a K° axis after each H° axis
            arr = comp
            for i, o in enumerate(offs):
                axis = 2 * i + 1
                arr = np.moveaxis(np.tensordot(arr, kc[o], axes=0), -1, axis)
            yword = (0, 1) * k + ((0,) if tail else ())
            add(yword, arr / np.sqrt(n))
            if T.max_length >= len(yword) + 1:
                for j in range(1, n):
                    lead = np.tensordot(kc[j], arr, axes=0)
                    add((1,) + yword, lead / np.sqrt(n))
            elif np.any(arr):
                raise ConstructionError("target truncation too small for Phi")
        return WordVector(T, vec.n, vec.rows, out)


def _spanning(F: FreeProductSpace, max_len: int) -> WordVector:
    """All basis vectors ``e_idx (x) 1`` on words of length ``<= max_len``, one column block each."""
    d = F.d
    words = F.words(max_len)
    sizes = [int(np.prod(F.dims(w), dtype=int)) * d for w in words]
    total = sum(sizes)
    comps, pos = {}, 0
    for w, size in zip(words, sizes):
        arr = np.zeros((size, total), dtype=complex)
        arr[:, pos:pos + size] = np.eye(size)
        comps[w] = arr.reshape(F.dims(w) + (d, total))
        pos += size
    return WordVector(F, 1, d, comps)


def _max_diff(a: WordVector, b: WordVector) -> float:
    words = set(a.comps) | set(b.comps)
    worst = 0.0
    for w in words:
        x = a.comps.get(w, 0)
        y = b.comps.get(w, 0)
        worst = max(worst, float(np.max(np.abs(np.asarray(x) - np.asarray(y)), initial=0.0)))
    return worst


def _phi_for(mu_realization, n: int, L_small: int, convention: str) -> PhiMap:
    P, X = mu_realization
    ks = build_K(n, P.d)
    domain = FreeProductSpace([P] * n, L_small + 1)
    target = FreeProductSpace([P, ks.K], 2 * L_small + 6)
    # adapted coordinates of e_j in K (the unitary is U (x) I_d), without the e_1 direction
    ua = target.unitaries[1][:: P.d, :: P.d]
    coords = adjoint(ua).T
    return PhiMap(domain, target, ks, convention, coords[:, 1:])


def validate_phi(phi: PhiMap, X: np.ndarray, L_small: int) -> dict:
    """Unitarity, bimodularity, ``Phi(xi_1) = eps (x) xi`` and the intertwining relation."""
    D, T = phi.domain, phi.target
    d = D.d
    U = _spanning(D, L_small - 1)
    PU = phi.apply(U)
    gram = float(np.max(np.abs(PU.inner(PU) - U.inner(U))))
    bimod = 0.0
    for e in matrix_units(d):
        bimod = max(bimod, _max_diff(phi.apply(LeftMul(e).apply(U)), LeftMul(e).apply(PU)))
        bimod = max(bimod, _max_diff(phi.apply(U.right(np.kron(np.eye(U.cols // d), e))),
                                     PU.right(np.kron(np.eye(U.cols // d), e))))
    eps_xi = T.embed_vector(1, phi.kspace.epsilon)
    unit = _max_diff(phi.apply(D.xi()), eps_xi)
    S = Linear([(1.0, Embedded(D, j, X)) for j in range(phi.n)])
    Vh = Embedded(T, 1, phi.kspace.V)
    VXV = Product([Vh, Embedded(T, 0, X), Vh])
    inter = _max_diff(phi.apply(S.apply(U)), VXV.apply(PU))
    k0 = {
        "xi": _max_diff(phi.apply(S.apply(D.xi())), VXV.apply(phi.apply(D.xi()))),
    }
    if D.t[0]:
        h = _spanning(D, 1)
        h.comps = {(0,): h.comps[(0,)]}
        k0["H_complement"] = _max_diff(phi.apply(S.apply(h)), VXV.apply(phi.apply(h)))
    return {
        "convention": phi.convention,
        "max_unitarity_violation": gram,
        "max_bimodularity_violation": bimod,
        "phi_xi_violation": unit,
        "max_intertwine_violation": inter,
        "k0_cases": k0,
        "spanning_vectors": U.cols,
    }


def build_phi(mu_realization, n: int, L_small: int = 4, tol: Tolerances = TOL) -> PhiMap:
    """Construct ``Phi`` and select the offset convention that passes validation.

    Raises
    ------
    ConstructionError
        If no convention gives an inner-product preserving, intertwining map.
    """
    if L_small > 4:
        raise ValueError("spanning-set verification is limited to L_small <= 4")
    reports, passing = {}, []
    for conv in CONVENTIONS:
        phi = _phi_for(mu_realization, n, L_small, conv)
        rep = validate_phi(phi, mu_realization[1], L_small)
        reports[conv] = rep
        if max(rep["max_unitarity_violation"], rep["max_intertwine_violation"],
               rep["max_bimodularity_violation"], rep["phi_xi_violation"]) <= tol.eq_tol:
            passing.append(phi)
    if not passing:
        raise ConstructionError(f"no offset convention validates: {reports}")
    # every convention is checked; the first listed one that passes is kept
    phi = passing[0]
    phi.report = reports[phi.convention]
    phi.all_reports = reports
    return phi


def verify_intertwine(phi: PhiMap, mu_realization, n: int | None = None, L_small: int = 4) -> dict:
    """Report for the relation ``Phi (X_1 + ... + X_n) = V X V Phi`` on spanning vectors."""
    rep = validate_phi(phi, mu_realization[1], L_small)
    rep["all_conventions"] = {
        c: {k: r[k] for k in ("max_unitarity_violation", "max_intertwine_violation")}
        for c, r in phi.all_reports.items()
    }
    return rep


def moments_agree(mu_realization, n: int, kmax: int) -> float:
    """Max difference of ``<xi_1, S^k xi_1>`` and ``<eps xi, (VXV)^k eps xi>`` for ``k <= kmax``."""
    P, X = mu_realization
    ks = build_K(n, P.d)
    D = FreeProductSpace([P] * n, kmax)
    T = FreeProductSpace([P, ks.K], 3 * kmax + 2)
    S = Linear([(1.0, Embedded(D, j, X)) for j in range(n)])
    Vh = Embedded(T, 1, ks.V)
    VXV = Product([Vh, Embedded(T, 0, X), Vh])
    a, b = D.xi(), T.embed_vector(1, ks.epsilon)
    start_b = b
    worst = 0.0
    for _ in range(kmax):
        a = S.apply(a)
        b = VXV.apply(b)
        worst = max(worst, float(np.max(np.abs(D.xi().inner(a) - start_b.inner(b)))))
    return worst
