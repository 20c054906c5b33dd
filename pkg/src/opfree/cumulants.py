"""Operator-valued free cumulants over non-crossing partitions.

Cumulants are stored exactly like moment maps: ``kappa[k-1]`` has shape
``(q,)*(k-1) + (d, d)`` and represents ``(b_1..b_{k-1}) -> kappa_k(b_1, ..., b_{k-1})``.

Both directions of the moment-cumulant relation use the first-block
recursion: in a non-crossing partition of ``{1..k}`` the block ``V`` that
contains 1 splits the rest into the gaps between its legs and a trailing
segment, each of which ranges over all non-crossing partitions and hence
contributes a full moment.  Everything is evaluated on all matrix-unit
tuples at once.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

from .algebra import CPMap, apply_cp, matrix_units, opnorm
from .errors import ConvergenceError, DegreeError
from .laws import BLaw, amplified_eval


# ---------------------------------------------------------------------------
# non-crossing partitions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NCPartition:
    """A non-crossing partition of ``{0, ..., k-1}`` with its nesting forest."""

    k: int
    blocks: tuple

    @property
    def parent(self) -> tuple:
        """``parent[i]`` is the index of the block directly enclosing block ``i`` (or -1)."""
        out = []
        for b in self.blocks:
            best, span = -1, None
            for j, c in enumerate(self.blocks):
                if c is b:
                    continue
                if c[0] < b[0] and b[-1] < c[-1] and any(c[i] < b[0] < c[i + 1] for i in range(len(c) - 1)):
                    if span is None or c[-1] - c[0] < span:
                        best, span = j, c[-1] - c[0]
            out.append(best)
        return tuple(out)

    def is_noncrossing(self) -> bool:
        owner = {e: i for i, b in enumerate(self.blocks) for e in b}
        for a, b, c, e in itertools.combinations(range(self.k), 4):
            if owner[a] == owner[c] and owner[b] == owner[e] and owner[a] != owner[b]:
                return False
        return True


def catalan(k: int) -> int:
    return comb(2 * k, k) // (k + 1)


@lru_cache(maxsize=None)
def _nc_blocks(lo: int, hi: int) -> tuple:
    """All NC partitions of ``range(lo, hi)`` as tuples of blocks."""
    if lo >= hi:
        return ((),)
    out = []
    rest = list(range(lo + 1, hi))
    for r in range(len(rest) + 1):
        for legs in itertools.combinations(rest, r):
            block = (lo,) + legs
            bounds = list(block) + [hi]
            pieces = [_nc_blocks(bounds[i] + 1, bounds[i + 1]) for i in range(len(block))]
            for combo in itertools.product(*pieces):
                out.append((block,) + tuple(b for part in combo for b in part))
    return tuple(out)


def nc_partitions(k: int) -> list[NCPartition]:
    """All non-crossing partitions of a ``k``-element set; there are Catalan(k) of them."""
    if not 1 <= k <= 12:
        raise ValueError("k must lie in 1..12")
    parts = [NCPartition(k, tuple(sorted(p))) for p in _nc_blocks(0, k)]
    assert len(parts) == catalan(k)
    return parts


# ---------------------------------------------------------------------------
# cumulant sequences
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CumulantSeq:
    """Multilinear cumulant maps ``kappa_1, ..., kappa_N`` over B = M_d."""

    d: int
    tensors: tuple

    @property
    def N(self) -> int:
        return len(self.tensors)

    def tensor(self, k: int) -> np.ndarray:
        if k < 1 or k > self.N:
            raise DegreeError(f"cumulant of degree {k} not available (max {self.N})")
        return self.tensors[k - 1]

    @classmethod
    def zeros(cls, d: int, N: int) -> "CumulantSeq":
        q = d * d
        return cls(d, tuple(np.zeros((q,) * (k - 1) + (d, d), dtype=complex) for k in range(1, N + 1)))

    @classmethod
    def semicircular(cls, eta: CPMap, N: int) -> "CumulantSeq":
        """Centered semicircular law with variance ``eta``: only ``kappa_2 = eta``."""
        d = eta.d
        out = list(cls.zeros(d, N).tensors)
        if N >= 2:
            out[1] = apply_cp(eta, matrix_units(d))
        return cls(d, tuple(out))


def _unit_args(d: int, nargs: int):
    """Index arrays and matrices for all unit tuples of length ``nargs``."""
    q = d * d
    units = matrix_units(d)
    if nargs == 0:
        return np.zeros((1, 0), dtype=int), units
    idx = np.indices((q,) * nargs).reshape(nargs, -1).T
    return idx, units


EVAL_BUDGET = 1 << 24  # complex entries per chunk of the first contraction


def _eval_batched(T: np.ndarray, args: list, batch: int, d: int) -> np.ndarray:
    """``T(c_1, ..., c_{m-1})`` for batched arguments ``c_i`` of shape ``(batch, d, d)``."""
    q = d * d
    if not args:
        return np.broadcast_to(T, (batch, d, d))
    # the first contraction has batch * T.size / q entries; chunk it to bound memory
    step = max(1, EVAL_BUDGET // max(1, T.size // q))
    out = np.empty((batch, d, d), dtype=complex)
    Tm = T.reshape(q, -1)
    for lo in range(0, batch, step):
        hi = min(batch, lo + step)
        Y = args[0][lo:hi].reshape(hi - lo, q) @ Tm
        for c in args[1:]:
            Y = np.einsum("bq,bqr->br", c[lo:hi].reshape(hi - lo, q), Y.reshape(hi - lo, q, -1))
        out[lo:hi] = Y.reshape(hi - lo, d, d)
    return out


def _first_block_sum(k: int, d: int, moment_of, cumulant_of, include_full: bool) -> np.ndarray:
    """Sum over first blocks V of the nested evaluation, as a degree-``k`` tensor.

    ``moment_of(j)`` and ``cumulant_of(m)`` return stored tensors; only
    ``j <= k-1`` moments are requested, and ``kappa_k`` only if
    ``include_full``.
    """
    q = d * d
    idx, units = _unit_args(d, k - 1)
    batch = idx.shape[0]
    b = [units[idx[:, i]] for i in range(k - 1)]  # b[i] is b_{i+1}
    total = np.zeros((batch, d, d), dtype=complex)

    def seg_moment(first: int, length: int):
        # moment of `length` x's at positions first..first+length-1 (1-based), with the
        # b's strictly between them
        T = moment_of(length)
        if length == 1:
            return np.broadcast_to(T, (batch, d, d))
        return T[tuple(idx[:, p - 1] for p in range(first, first + length - 1))]

    for r in range(k):
        for legs in itertools.combinations(range(2, k + 1), r):
            V = (1,) + legs
            m = len(V)
            if m == k and not include_full:
                continue
            args = []
            for i in range(m - 1):
                lo, hi = V[i], V[i + 1]
                if hi == lo + 1:
                    args.append(b[lo - 1])
                else:
                    inner = seg_moment(lo + 1, hi - lo - 1)
                    args.append(b[lo - 1] @ inner @ b[hi - 2])
            val = _eval_batched(cumulant_of(m), args, batch, d)
            last = V[-1]
            if last < k:
                val = val @ b[last - 1] @ seg_moment(last + 1, k - last)
            total += val
    return total.reshape((q,) * (k - 1) + (d, d))


def moments_to_cumulants(mu: BLaw, N: int | None = None) -> CumulantSeq:
    """Free cumulants of ``mu`` through degree ``N`` (default: all stored degrees)."""
    N = mu.N if N is None else N
    if N > mu.N:
        raise DegreeError(f"degree {N} exceeds the law's degree {mu.N}")
    kap: list = []
    for k in range(1, N + 1):
        rest = _first_block_sum(k, mu.d, mu.tensor, lambda m: kap[m - 1], include_full=False)
        kap.append(mu.tensor(k) - rest)
    return CumulantSeq(mu.d, tuple(kap))


def cumulants_to_moments(kappa: CumulantSeq, R_hint: float | None = None, N: int | None = None,
                         formal: bool = False) -> BLaw:
    """The law whose free cumulants are ``kappa``.

    ``R_hint`` is recorded as the norm bound; when omitted a bound is
    derived from the cumulants (``4 * max_k ||kappa_k||^(1/k)`` over unit
    arguments), which is only a heuristic radius.
    """
    N = kappa.N if N is None else N
    if N > kappa.N:
        raise DegreeError(f"degree {N} exceeds the cumulant degree {kappa.N}")
    moms: list = []
    for k in range(1, N + 1):
        moms.append(_first_block_sum(k, kappa.d, lambda j: moms[j - 1], kappa.tensor, include_full=True))
    if R_hint is None:
        R_hint = 4 * max((float(np.max(np.abs(kappa.tensor(k)))) ** (1 / k) for k in range(1, N + 1)), default=0.0)
    return BLaw.from_moments(kappa.d, R_hint, moms, formal=formal)


def convolve_eta(kappa: CumulantSeq, eta: CPMap) -> CumulantSeq:
    """Cumulants of the eta-convolution power: ``kappa'_k = eta o kappa_k``."""
    if eta.d != kappa.d:
        raise ValueError("dimension mismatch")
    return CumulantSeq(kappa.d, tuple(apply_cp(eta, T) for T in kappa.tensors))


def convolve_add(k1: CumulantSeq, k2: CumulantSeq) -> CumulantSeq:
    """Cumulants of the free additive convolution (degree-wise sum)."""
    if k1.d != k2.d:
        raise ValueError("dimension mismatch")
    N = min(k1.N, k2.N)
    return CumulantSeq(k1.d, tuple(k1.tensor(k) + k2.tensor(k) for k in range(1, N + 1)))


CUMULANT_GROWTH = 16.0


def r_series(kappa: CumulantSeq, z: np.ndarray, R: float, tail_tol: float | None = None,
             full_output: bool = False):
    """``sum_{k<=N} kappa_k^(n)(z, ..., z)``, the R-transform as a cumulant series.

    The tail is bounded with ``||kappa_k|| <= (16 R)^k`` (the number of
    non-crossing partitions times the Moebius bound), so it is
    ``16 R r^N / (1 - r)`` with ``r = 16 R ||z||``.

    Raises
    ------
    ConvergenceError
        If the tail bound exceeds ``tail_tol`` (``newton_tol`` by default).
    """
    from .algebra import TOL

    z = np.asarray(z, dtype=complex)
    d = kappa.d
    n = z.shape[0] // d
    tail_tol = TOL.newton_tol if tail_tol is None else tail_tol
    r = CUMULANT_GROWTH * R * opnorm(z)
    tail = np.inf if r >= 1 else CUMULANT_GROWTH * R * r ** kappa.N / (1 - r)
    if tail > tail_tol:
        raise ConvergenceError(f"cumulant series tail bound {tail:.2e} exceeds {tail_tol:.2e}")
    val = np.zeros_like(z)
    for k in range(1, kappa.N + 1):
        val = val + amplified_eval(kappa.tensor(k), [z] * (k - 1), d, n)
    return (val, tail) if full_output else val


def nilpotent_extract(Rfun, bs, d: int, rho: float = 0.02, points: int = 12) -> np.ndarray:
    """Read ``kappa_k(b_1, ..., b_{k-1})`` off an analytic R-transform.

    With ``N`` the block upper shift carrying ``b_1..b_{k-1}``, the corner of
    ``R^(k)(N)`` is ``kappa_k(b_1, ..., b_{k-1})``.  ``N`` is not invertible,
    so ``R(N)`` is obtained as the mean of ``R(lambda 1 + N)`` over the circle
    ``|lambda| = rho``.
    """
    from .algebra import from_blocks, to_blocks

    k = len(bs) + 1
    blocks = np.zeros((k, k, d, d), dtype=complex)
    for i, b in enumerate(bs):
        blocks[i, i + 1] = b
    Nz = from_blocks(blocks)
    acc = np.zeros_like(Nz)
    for th in 2 * np.pi * (np.arange(points) + 0.5) / points:
        acc += Rfun(rho * np.exp(1j * th) * np.eye(k * d) + Nz)
    return to_blocks(acc / points, d)[0, k - 1]
