"""Matrix arithmetic over B = M_d(C), its amplifications M_n(B), and CP maps.

Elements of B are ``(d, d)`` complex arrays.  Elements of M_n(B) are
``(n*d, n*d)`` arrays read as an ``n x n`` block matrix of ``d x d`` blocks.
Completely positive maps are stored by their Kraus operators with the
convention ``m(b) = sum_s K_s^* b K_s``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import DomainError, SingularMapError


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances used throughout the package."""

    eq_tol: float = 1e-10
    psd_tol: float = 1e-10
    newton_tol: float = 1e-12

    def __post_init__(self):
        for name in ("eq_tol", "psd_tol", "newton_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    @classmethod
    def from_env(cls) -> "Tolerances":
        """Defaults, with ``eq_tol`` overridden by ``OPFREE_TOL`` if set."""
        raw = os.environ.get("OPFREE_TOL")
        if raw is None:
            return cls()
        return cls(eq_tol=float(raw))


TOL = Tolerances()


# ---------------------------------------------------------------------------
# elementary helpers
# ---------------------------------------------------------------------------

def matrix_units(d: int) -> np.ndarray:
    """Matrix units E_ij of M_d stacked as ``(d*d, d, d)``; index ``i*d + j``."""
    return np.eye(d * d, dtype=complex).reshape(d * d, d, d)


def adjoint(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def opnorm(a: np.ndarray) -> float:
    """Operator (spectral) norm."""
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def imag_part(a: np.ndarray) -> np.ndarray:
    """(a - a*)/2i, a Hermitian matrix."""
    a = np.asarray(a, dtype=complex)
    return (a - adjoint(a)) / 2j


def real_part(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    return (a + adjoint(a)) / 2


def min_eig(h: np.ndarray) -> float:
    """Smallest eigenvalue of the Hermitian part of ``h``."""
    h = np.asarray(h, dtype=complex)
    if h.size == 0:
        return np.inf
    return float(np.linalg.eigvalsh(real_part(h))[0])


def is_hermitian(a: np.ndarray, tol: Tolerances = TOL) -> bool:
    return float(np.max(np.abs(a - adjoint(a)), initial=0.0)) <= tol.eq_tol


def is_psd(a: np.ndarray, tol: Tolerances = TOL) -> bool:
    return is_hermitian(a, tol) and min_eig(a) >= -tol.psd_tol


def to_blocks(a: np.ndarray, d: int) -> np.ndarray:
    """View an ``(n*d, n*d)`` matrix as an ``(n, n, d, d)`` block array."""
    n = a.shape[0] // d
    if a.shape != (n * d, n * d):
        raise ValueError(f"shape {a.shape} is not a square block matrix over M_{d}")
    return a.reshape(n, d, n, d).transpose(0, 2, 1, 3)


def from_blocks(blocks: np.ndarray) -> np.ndarray:
    n, _, d, _ = blocks.shape
    return blocks.transpose(0, 2, 1, 3).reshape(n * d, n * d)


def direct_sum(*mats: np.ndarray) -> np.ndarray:
    """Block-diagonal direct sum of square matrices."""
    size = sum(m.shape[0] for m in mats)
    out = np.zeros((size, size), dtype=complex)
    pos = 0
    for m in mats:
        k = m.shape[0]
        out[pos:pos + k, pos:pos + k] = m
        pos += k
    return out


def scalar_amplify(s: np.ndarray, d: int) -> np.ndarray:
    """Embed a scalar matrix S in M_n(C) into M_n(B) as S (x) 1_d."""
    return np.kron(np.asarray(s, dtype=complex), np.eye(d))


def resolvent_inverse(z: np.ndarray, eps: float, tol: Tolerances = TOL) -> np.ndarray:
    """Invert ``z`` after certifying ``im(z) >= eps``, so that ``||z^-1|| <= 1/eps``.

    Raises
    ------
    DomainError
        If the imaginary part of ``z`` is not bounded below by ``eps``.
    """
    z = np.asarray(z, dtype=complex)
    if eps <= 0:
        raise DomainError("eps must be positive")
    lam = min_eig(imag_part(z))
    if lam < eps - tol.psd_tol:
        raise DomainError(
            f"im(z) has minimum eigenvalue {lam:.3e} < eps = {eps:.3e}; z is not in the upper half-plane domain"
        )
    return np.linalg.inv(z)


# ---------------------------------------------------------------------------
# completely positive maps
# ---------------------------------------------------------------------------

LinearMap = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CPMap:
    """A completely positive map on M_d in Kraus form ``b -> sum K_s^* b K_s``."""

    d: int
    kraus: tuple = field(default_factory=tuple)

    def __post_init__(self):
        ks = tuple(np.asarray(k, dtype=complex) for k in self.kraus)
        for k in ks:
            if k.shape != (self.d, self.d):
                raise ValueError(f"Kraus operator of shape {k.shape}, expected {(self.d, self.d)}")
        object.__setattr__(self, "kraus", ks)

    @classmethod
    def identity(cls, d: int) -> "CPMap":
        return cls(d, (np.eye(d),))

    @classmethod
    def scalar(cls, d: int, t: float) -> "CPMap":
        """The map ``b -> t b`` for ``t >= 0``."""
        if t < 0:
            raise DomainError("t * id is completely positive only for t >= 0")
        return cls(d, (np.sqrt(t) * np.eye(d),))

    @property
    def rank(self) -> int:
        return len(self.kraus)

    def __call__(self, b: np.ndarray) -> np.ndarray:
        return apply_cp(self, b)

    @cached_property
    def choi(self) -> np.ndarray:
        return choi_of(self)

    @cached_property
    def superoperator(self) -> np.ndarray:
        """Matrix S with ``vec(m(b)) = S vec(b)`` (row-major vec)."""
        return superoperator_of(self, self.d)


def apply_cp(m: CPMap, b: np.ndarray) -> np.ndarray:
    """``sum_s K_s^* b K_s``; ``b`` may carry leading batch axes."""
    b = np.asarray(b, dtype=complex)
    if b.shape[-2:] != (m.d, m.d):
        raise ValueError(f"argument of shape {b.shape} does not match d = {m.d}")
    out = np.zeros_like(b)
    for k in m.kraus:
        out = out + adjoint(k) @ b @ k
    return out


def amplify(f: LinearMap, d: int, n: int) -> LinearMap:
    """Blockwise amplification f^(n) of a linear map on M_d to M_n(M_d)."""

    def f_n(z):
        z = np.asarray(z, dtype=complex)
        if z.shape != (n * d, n * d):
            raise ValueError(f"expected an element of M_{n}(M_{d}), got shape {z.shape}")
        return from_blocks(f(to_blocks(z, d)))

    return f_n


def amplify_cp(m: CPMap, n: int) -> LinearMap:
    """The amplification m^(n), acting on each ``d x d`` block of M_n(B)."""
    return amplify(m, m.d, n)


def _images_of_units(m, d):
    return np.asarray(m(matrix_units(d)), dtype=complex)


def choi_of(m, d: int | None = None) -> np.ndarray:
    """Choi matrix ``sum_ij E_ij (x) m(E_ij)`` of a linear map on M_d.

    ``m`` is a :class:`CPMap` or any callable that accepts batched matrices.
    """
    if d is None:
        d = m.d
    imgs = _images_of_units(m, d).reshape(d, d, d, d)
    return imgs.transpose(0, 2, 1, 3).reshape(d * d, d * d)


def superoperator_of(m, d: int) -> np.ndarray:
    imgs = _images_of_units(m, d)
    return imgs.reshape(d * d, d * d).T


def is_cp(m, d: int | None = None, tol: Tolerances = TOL) -> bool:
    """Complete positivity via the Choi matrix being PSD."""
    c = m.choi if isinstance(m, CPMap) else choi_of(m, d)
    return is_psd(c, tol)


def _id_choi(d):
    return choi_of(lambda b: b, d)


def is_eta_minus_id_cp(eta, d: int | None = None, tol: Tolerances = TOL) -> bool:
    """Whether ``eta - id`` is completely positive."""
    c = eta.choi if isinstance(eta, CPMap) else choi_of(eta, d)
    d = int(round(np.sqrt(c.shape[0])))
    return is_psd(c - _id_choi(d), tol)


def kraus_from_choi(choi: np.ndarray, tol: Tolerances = TOL) -> CPMap:
    """Minimal Kraus family of the CP map whose Choi matrix is ``choi``.

    Eigenvalues below ``psd_tol * max eigenvalue`` are discarded, so the
    returned Kraus operators are Hilbert-Schmidt orthogonal and linearly
    independent.
    """
    choi = np.asarray(choi, dtype=complex)
    q = choi.shape[0]
    d = int(round(np.sqrt(q)))
    if d * d != q or choi.shape != (q, q):
        raise ValueError(f"Choi matrix of shape {choi.shape} is not d^2 x d^2")
    if not is_psd(choi, tol):
        raise DomainError(f"Choi matrix is not PSD (min eigenvalue {min_eig(choi):.3e})")
    w, u = np.linalg.eigh(real_part(choi))
    top = max(float(w[-1]), 0.0)
    keep = w > tol.psd_tol * top if top > 0 else np.zeros_like(w, dtype=bool)
    kraus = [np.conj(np.sqrt(lam) * u[:, i]).reshape(d, d) for i, lam in zip(np.flatnonzero(keep), w[keep])]
    return CPMap(d, tuple(kraus[::-1]))


def minus_identity(eta: CPMap, tol: Tolerances = TOL) -> CPMap:
    """``psi = eta - id`` as a CP map, via the Choi difference.

    Raises
    ------
    DomainError
        If ``eta - id`` is not completely positive.
    """
    diff = eta.choi - _id_choi(eta.d)
    if not is_psd(diff, tol):
        raise DomainError(
            f"eta - id is not completely positive (Choi min eigenvalue {min_eig(diff):.3e})"
        )
    return kraus_from_choi(diff, tol)


def inverse_map(eta, d: int, cond_max: float = 1e12) -> LinearMap:
    """Inverse of ``eta`` as a linear map on M_d (batch-capable)."""
    s = eta.superoperator if isinstance(eta, CPMap) else superoperator_of(eta, d)
    if np.linalg.cond(s) > cond_max:
        raise SingularMapError("eta is not invertible as a linear map on B")
    s_inv = np.linalg.inv(s)

    def eta_inv(b):
        b = np.asarray(b, dtype=complex)
        flat = b.reshape(b.shape[:-2] + (d * d,))
        return (flat @ s_inv.T).reshape(b.shape)

    return eta_inv


def transpose_map(b: np.ndarray) -> np.ndarray:
    return np.swapaxes(np.asarray(b), -1, -2)


def sum_kraus(*maps: CPMap) -> CPMap:
    """Kraus concatenation, i.e. the sum of the maps."""
    d = maps[0].d
    return CPMap(d, tuple(k for m in maps for k in m.kraus))


def kraus_rank(m: CPMap, tol: Tolerances = TOL) -> int:
    """Choi rank, the minimal number of Kraus operators."""
    return kraus_from_choi(m.choi, tol).rank

