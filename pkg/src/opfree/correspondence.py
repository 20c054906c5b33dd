"""Finite right Hilbert B-modules and pointed B-B-correspondences.

Every module is kept in canonical form: a vector of a module of
multiplicity ``s`` is an ``(s*d, d)`` complex matrix, the right action of B
is right multiplication, the inner product is ``<x, y> = x^* y`` and the left
action of ``b`` is ``I_s (x) b``.  Any finite Hilbert M_d-module with a
unital left M_d-action is unitarily equivalent to one of these, so the
canonical form loses no generality; :func:`separation_completion` performs
that reduction for modules given abstractly by Gram data.

Operators on a module are ``(s*d, s*d)`` matrices acting by left
multiplication, which are exactly the adjointable right-modular maps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .algebra import TOL, CPMap, Tolerances, adjoint, kraus_from_choi, matrix_units, opnorm, real_part
from .errors import ConstructionError, DomainError


@dataclass(frozen=True)
class HilbertBModule:
    """Canonical module ``C^s (x) M_d`` over B = M_d."""

    d: int
    s: int

    @property
    def shape(self):
        return (self.s * self.d, self.d)

    def zero(self) -> np.ndarray:
        return np.zeros(self.shape, dtype=complex)

    def basis(self) -> list[np.ndarray]:
        """Right-module generators ``e_i (x) 1``."""
        return [np.kron(np.eye(self.s)[:, [i]], np.eye(self.d)) for i in range(self.s)]

    def spanning_vectors(self) -> list[np.ndarray]:
        """Complex-linear spanning set ``e_i (x) E_ab``."""
        units = matrix_units(self.d)
        return [np.kron(np.eye(self.s)[:, [i]], e) for i in range(self.s) for e in units]

    def left(self, b: np.ndarray) -> np.ndarray:
        """Matrix of the left action ``I_s (x) b``."""
        return np.kron(np.eye(self.s), np.asarray(b, dtype=complex))

    def inner(self, x, y) -> np.ndarray:
        return inner(self, x, y)

    def norm(self, x) -> float:
        return float(np.sqrt(opnorm(inner(self, x, x))))


def inner(H: HilbertBModule, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """B-valued inner product ``x^* y``."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if x.shape[-2:] != H.shape or y.shape[-2:] != H.shape:
        raise ValueError(f"vectors of shapes {x.shape}, {y.shape} not in module of shape {H.shape}")
    return adjoint(x) @ y


def adapted_unitary(c: np.ndarray) -> np.ndarray:
    """Unitary ``s x s`` matrix whose first column is the unit vector ``c``."""
    c = np.asarray(c, dtype=complex).ravel()
    s = c.size
    q, _ = np.linalg.qr(np.column_stack([c, np.eye(s, dtype=complex)]))
    q = q[:, :s]
    # qr fixes the first column only up to a phase
    phase = np.vdot(q[:, 0], c)
    q[:, 0] *= phase / abs(phase)
    return q


@dataclass(frozen=True)
class PointedCorrespondence:
    """A canonical module with a distinguished vector ``xi``.

    Use :meth:`from_unit` for the B-central form ``xi = c (x) I_d``.
    """

    module: HilbertBModule
    xi: np.ndarray

    @classmethod
    def from_unit(cls, d: int, c) -> "PointedCorrespondence":
        c = np.atleast_1d(np.asarray(c, dtype=complex)).ravel()
        return cls(HilbertBModule(d, c.size), np.kron(c[:, None], np.eye(d)))

    @classmethod
    def trivial(cls, d: int) -> "PointedCorrespondence":
        """B itself, pointed at 1."""
        return cls.from_unit(d, [1.0])

    @property
    def d(self) -> int:
        return self.module.d

    @property
    def s(self) -> int:
        return self.module.s

    @property
    def unit_coefficients(self) -> np.ndarray:
        """The vector ``c`` with ``xi = c (x) I_d`` (meaningful when central)."""
        d = self.d
        return np.array([self.xi[i * d, 0] for i in range(self.s)])

    def expectation(self, a: np.ndarray) -> np.ndarray:
        """``<xi, a xi>`` for an operator (or batch of operators) ``a``."""
        return adjoint(self.xi) @ a @ self.xi


@dataclass(frozen=True)
class Check:
    """Outcome of a numerical identity check."""

    ok: bool
    worst: float

    def __bool__(self):
        return self.ok


def validate_pointed(P: PointedCorrespondence, tol: Tolerances = TOL) -> Check:
    """Check ``<xi, xi> = 1`` and ``b xi = xi b`` on the matrix units of B."""
    H, xi = P.module, P.xi
    worst = float(np.max(np.abs(inner(H, xi, xi) - np.eye(H.d))))
    for e in matrix_units(H.d):
        worst = max(worst, float(np.max(np.abs(H.left(e) @ xi - xi @ e))))
    return Check(worst <= tol.eq_tol, worst)


@dataclass(frozen=True)
class Complement:
    """Decomposition ``H = B xi (+) H°``.

    ``unitary`` maps the adapted coordinates (first block = the ``xi``
    direction, remaining blocks = H°) to the original coordinates of H;
    ``embed`` is its restriction to H°.
    """

    module: HilbertBModule
    unitary: np.ndarray
    embed: np.ndarray


def complement_of_unit(P: PointedCorrespondence, tol: Tolerances = TOL) -> Complement:
    """The orthogonal complement H° of ``B xi`` together with the adapting unitary."""
    if not validate_pointed(P, tol):
        raise DomainError("xi is not a B-central unit vector")
    d = P.d
    u = np.kron(adapted_unitary(P.unit_coefficients), np.eye(d))
    return Complement(HilbertBModule(d, P.s - 1), u, u[:, d:])


def direct_sum(H1: HilbertBModule, H2: HilbertBModule):
    """``H1 (+) H2`` with the two isometric embeddings."""
    if H1.d != H2.d:
        raise ValueError("modules over different algebras")
    H = HilbertBModule(H1.d, H1.s + H2.s)
    n1 = H1.s * H1.d
    j1 = np.eye(H.s * H.d, dtype=complex)[:, :n1]
    j2 = np.eye(H.s * H.d, dtype=complex)[:, n1:]
    return H, j1, j2


def direct_sum_pointed(P: PointedCorrespondence, H2: HilbertBModule) -> PointedCorrespondence:
    """``P (+) H2`` pointed at ``xi (+) 0``."""
    H, j1, _ = direct_sum(P.module, H2)
    return PointedCorrespondence(H, j1 @ P.xi)


# ---------------------------------------------------------------------------
# separation-completion and tensor products
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Completion:
    """Canonical module built from Gram data.

    ``quotient`` is a ``(s*d, g*d)`` matrix; generator ``a`` is sent to the
    vector ``quotient[:, a*d:(a+1)*d]`` and a right B-combination
    ``sum_a g_a b_a`` to ``quotient @ vstack(b_a)``.
    """

    module: HilbertBModule
    quotient: np.ndarray

    def vector(self, coeffs: np.ndarray) -> np.ndarray:
        return self.quotient @ coeffs

    def generator(self, a: int) -> np.ndarray:
        d = self.module.d
        return self.quotient[:, a * d:(a + 1) * d]


def _flatten_gram(gram: np.ndarray) -> np.ndarray:
    gram = np.asarray(gram, dtype=complex)
    if gram.ndim == 4:
        g, _, d, _ = gram.shape
        return gram.transpose(0, 2, 1, 3).reshape(g * d, g * d)
    return gram


def _canonicalize_rep(pi: Callable[[np.ndarray], np.ndarray], rho: int, d: int, tol: Tolerances) -> np.ndarray:
    """Unitary W with ``W pi(b) W^* = I_s (x) b`` for a unital *-rep ``pi`` of M_d."""
    if rho % d:
        raise ConstructionError(f"representation of dimension {rho} is not a multiple of d = {d}")
    units = matrix_units(d)
    p11 = real_part(pi(units[0]))
    w, v = np.linalg.eigh(p11)
    f = v[:, w > 0.5]
    s = rho // d
    if f.shape[1] != s:
        raise ConstructionError("left action is not a unital *-representation")
    cols = np.empty((rho, s, d), dtype=complex)
    for alpha in range(d):
        cols[:, :, alpha] = pi(units[alpha * d]) @ f
    W = adjoint(cols.reshape(rho, s * d))
    if np.max(np.abs(W @ adjoint(W) - np.eye(rho)), initial=0.0) > 1e3 * tol.eq_tol:
        raise ConstructionError("left action is not a *-representation")
    return W


def separation_completion(gram, left_action=None, tol: Tolerances = TOL) -> Completion:
    """Separation-completion of a right B-module given by Gram data.

    Parameters
    ----------
    gram : array
        ``(g, g, d, d)`` B-valued Gram matrix ``<g_a, g_b>`` of ``g``
        generators (or its ``(g*d, g*d)`` flattening).
    left_action : callable, optional
        ``b -> Lambda(b)``, a ``(g*d, g*d)`` matrix describing the left
        action on generators, ``b g_a = sum_c g_c Lambda(b)_{ca}``.  When
        given, the result is rotated so the left action is ``I_s (x) b``.

    Raises
    ------
    DomainError
        If the flattened Gram matrix is not Hermitian PSD.
    """
    G = _flatten_gram(gram)
    if G.ndim == 2 and np.asarray(gram).ndim == 2 and left_action is None and G.shape[0] == 0:
        raise ValueError("empty Gram data")
    d = np.asarray(gram).shape[-1] if np.asarray(gram).ndim == 4 else None
    if d is None:
        raise ValueError("Gram data must be given as a (g, g, d, d) array")
    if np.max(np.abs(G - adjoint(G)), initial=0.0) > tol.eq_tol * max(1.0, opnorm(G)):
        raise DomainError("Gram data is not Hermitian")
    w, u = np.linalg.eigh(real_part(G))
    top = max(float(w[-1]), 0.0) if w.size else 0.0
    if w.size and w[0] < -tol.psd_tol * max(1.0, top):
        raise DomainError(f"Gram data is not PSD (min eigenvalue {w[0]:.3e}); not a semi-inner product")
    keep = w > tol.psd_tol * top if top > 0 else np.zeros(w.shape, dtype=bool)
    X = np.sqrt(w[keep])[:, None] * adjoint(u[:, keep])
    rho = X.shape[0]
    if left_action is not None and rho:
        X_pinv = u[:, keep] / np.sqrt(w[keep])[None, :]

        def pi(b):
            return X @ left_action(b) @ X_pinv

        X = _canonicalize_rep(pi, rho, d, tol) @ X
    elif rho % d:
        raise ConstructionError(f"rank {rho} of Gram data is not a multiple of d = {d}")
    return Completion(HilbertBModule(d, rho // d), X)


@dataclass(frozen=True)
class TensorProduct:
    """Interior tensor product ``H1 (x)_B H2`` in canonical form."""

    left_factor: HilbertBModule
    right_factor: HilbertBModule
    completion: Completion

    @property
    def module(self) -> HilbertBModule:
        return self.completion.module

    def embed(self, h1: np.ndarray, h2: np.ndarray) -> np.ndarray:
        """Concrete vector of the elementary tensor ``h1 (x) h2``."""
        H1, H2 = self.left_factor, self.right_factor
        d, q = H1.d, H1.d * H1.d
        c1 = np.asarray(h1, dtype=complex).reshape(H1.s, d * d)  # coefficients of e_i (x) E_ab
        blocks2 = np.asarray(h2, dtype=complex).reshape(H2.s, d, d)
        coeffs = np.zeros((H1.s, q, H2.s, d, d), dtype=complex)
        coeffs[:] = blocks2[None, None, :, :, :]
        coeffs *= c1[:, :, None, None, None]
        return self.completion.quotient @ coeffs.reshape(-1, d)


def tensor_over_B(H1: HilbertBModule, H2: HilbertBModule, tol: Tolerances = TOL) -> TensorProduct:
    """Interior tensor product of two canonical correspondences.

    Generators are the elementary tensors ``(e_i (x) E_ab) (x) (e_j (x) 1)``;
    their Gram matrix is evaluated by the nested rule
    ``<h1 (x) h2, h1' (x) h2'> = <h2, <h1, h1'> h2'>`` and then separated and
    completed.  The left action of B acts on the first factor.
    """
    if H1.d != H2.d:
        raise ValueError("modules over different algebras")
    d = H1.d
    gens1 = np.array(H1.spanning_vectors())  # (s1*q, s1*d, d)
    gens2 = np.array(H2.basis())  # (s2, s2*d, d)
    inner1 = adjoint(gens1)[:, None] @ gens1[None, :]  # (g1, g1, d, d)
    g1, g2 = len(gens1), len(gens2)
    gram = np.zeros((g1, g2, g1, g2, d, d), dtype=complex)
    for a in range(g1):
        for c in range(g1):
            mid = H2.left(inner1[a, c])
            gram[a, :, c, :] = adjoint(gens2)[:, None] @ mid[None, None] @ gens2[None, :]
    gram = gram.reshape(g1 * g2, g1 * g2, d, d)

    # b (e_i (x) E_ab) = sum_a' b_{a'a} e_i (x) E_a'b: a scalar recombination of generators
    def left_action(b):
        b = np.asarray(b, dtype=complex)
        lam1 = np.zeros((g1, g1), dtype=complex)
        for col, h in enumerate(gens1):
            img = H1.left(b) @ h
            lam1[:, col] = np.einsum("gxy,xy->g", np.conj(gens1), img)
        return np.kron(np.kron(lam1, np.eye(g2)), np.eye(d))

    comp = separation_completion(gram, left_action, tol)
    return TensorProduct(H1, H2, comp)


def cp_module(psi: CPMap, tol: Tolerances = TOL):
    """The correspondence ``B (x)_psi B`` and its vector ``zeta = 1 (x) 1``.

    With a minimal Kraus family ``K_1..K_r`` of ``psi`` the elementary tensor
    ``a (x) b`` is the vertical stack of ``a K_s b``, so the inner product is
    ``b^* psi(a^* a') b'`` and the left action is ``I_r (x) a``.

    Returns
    -------
    (HilbertBModule, ndarray)
    """
    if not np.min(np.linalg.eigvalsh(real_part(psi.choi)), initial=0.0) >= -tol.psd_tol:
        raise DomainError("psi is not completely positive")
    minimal = kraus_from_choi(psi.choi, tol)
    H = HilbertBModule(psi.d, minimal.rank)
    if minimal.rank == 0:
        return H, H.zero()
    zeta = np.vstack(minimal.kraus)
    return H, zeta


def cp_elementary(psi_kraus: CPMap, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """The vector of ``a (x) b`` in ``B (x)_psi B`` for the given Kraus family."""
    return np.vstack([a @ k @ b for k in psi_kraus.kraus])
