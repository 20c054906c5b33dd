"""Reduced free product of pointed B-B-correspondences, evaluated lazily.

The free product ``H = B xi (+) sum_k sum_{j_1 != ... != j_k} H_{j_1}° (x) ... (x) H_{j_k}°``
is stored word by word.  Since every complement ``H_j°`` is canonical,
``C^{t_j} (x) B``, the interior tensor product over B of a word collapses to
``C^{t_{j_1}} (x) ... (x) C^{t_{j_k}} (x) B``.  A vector is therefore a dict from
words to arrays of shape ``(t_{j_1}, ..., t_{j_k}, R, C)`` where ``R = n*d``
carries the (possibly amplified) left B-action and ``C`` counts independent
columns.  Operators are right B-linear, so columns never mix; this is used to
batch many vectors (e.g. all matrix-unit insertions) into one pass.

The action of ``rho_j(a)`` follows the identification ``H = H_j (x)_B M_j``:
a word ``w`` not starting with ``j`` pairs with ``xi_j``, the word ``(j,)+w``
with ``H_j°``, and ``a`` acts on that ``H_j`` coordinate.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .algebra import TOL, Tolerances, adjoint
from .correspondence import PointedCorrespondence, complement_of_unit
from .errors import TruncationError

Word = tuple


class FreeProductSpace:
    """Truncated free product ``*_j (H_j, xi_j)`` of canonical pointed correspondences.

    Parameters
    ----------
    factors : sequence of PointedCorrespondence
        All over the same B = M_d.
    L : int
        Truncation depth; components on words longer than ``L`` are dropped.
    """

    def __init__(self, factors: Sequence[PointedCorrespondence], L: int, tol: Tolerances = TOL):
        if not factors:
            raise ValueError("need at least one factor")
        if L < 1:
            raise ValueError("truncation depth must be >= 1")
        ds = {P.d for P in factors}
        if len(ds) != 1:
            raise ValueError("factors over different algebras")
        self.factors = tuple(factors)
        self.L = int(L)
        self.d = ds.pop()
        self.tol = tol
        comps = [complement_of_unit(P, tol) for P in self.factors]
        self.unitaries = tuple(c.unitary for c in comps)
        self.t = tuple(c.module.s for c in comps)
        self.dropped = 0.0

    @property
    def nfactors(self) -> int:
        return len(self.factors)

    @property
    def max_length(self) -> int:
        """Longest word that can carry a nonzero component."""
        if self.nfactors == 1:
            return min(self.L, 1 if self.t[0] else 0)
        return self.L

    def words(self, max_len: int | None = None) -> list[Word]:
        """All alternating words with nonzero complements, up to ``max_len``."""
        max_len = self.max_length if max_len is None else min(max_len, self.max_length)
        live = [j for j in range(self.nfactors) if self.t[j] > 0]
        out: list[Word] = [()]
        frontier: list[Word] = [()]
        for _ in range(max_len):
            frontier = [w + (j,) for w in frontier for j in live if not w or w[-1] != j]
            out.extend(frontier)
        return out

    def dims(self, w: Word) -> tuple:
        return tuple(self.t[j] for j in w)

    def dimension(self) -> int:
        """Multiplicity of the truncated space as a canonical module."""
        return int(sum(np.prod(self.dims(w), dtype=int) for w in self.words()))

    # -- vectors ---------------------------------------------------------

    def xi(self, n: int = 1) -> "WordVector":
        """The unit vector ``xi`` (amplified: ``xi (x) I_n``), with ``n*d`` columns."""
        R = n * self.d
        return WordVector(self, n, R, {(): np.eye(R, dtype=complex)})

    def embed_vector(self, j: int, h: np.ndarray, n: int = 1) -> "WordVector":
        """The vector ``h (x) xi_rest`` of H for ``h`` in H_j (columns of ``h`` kept)."""
        d = self.d
        s = self.factors[j].s
        h = np.asarray(h, dtype=complex)
        C = h.shape[-1]
        coords = adjoint(self.unitaries[j]) @ h  # adapted coordinates
        blocks = coords.reshape(s, d, C)
        if n != 1:
            blocks = np.einsum("sxc,nm->snxmc", blocks, np.eye(n)).reshape(s, n * d, n * C)
        comps = {(): blocks[0]}
        if self.t[j]:
            comps[(j,)] = blocks[1:]
        return WordVector(self, n, n * d, comps)

    def basis_block(self, j: int, n: int = 1) -> "WordVector":
        """All generators ``e_alpha (x) 1`` of H_j embedded, batched along columns."""
        d, s = self.d, self.factors[j].s
        return self.embed_vector(j, np.eye(s * d, dtype=complex), n)


@dataclass
class WordVector:
    """Vector (or column batch of vectors) of a truncated free product."""

    space: FreeProductSpace
    n: int
    rows: int
    comps: dict = field(default_factory=dict)

    @property
    def cols(self) -> int:
        for v in self.comps.values():
            return v.shape[-1]
        return 0

    def copy(self) -> "WordVector":
        return WordVector(self.space, self.n, self.rows, {w: v.copy() for w, v in self.comps.items()})

    def max_len(self) -> int:
        return max((len(w) for w in self.comps), default=0)

    def __add__(self, other: "WordVector") -> "WordVector":
        out = {w: v.copy() for w, v in self.comps.items()}
        for w, v in other.comps.items():
            out[w] = out[w] + v if w in out else v.copy()
        return WordVector(self.space, self.n, self.rows, out)

    def scale(self, c) -> "WordVector":
        return WordVector(self.space, self.n, self.rows, {w: c * v for w, v in self.comps.items()})

    def right(self, b: np.ndarray) -> "WordVector":
        """Right multiplication by a ``(C, C')`` matrix (e.g. b in B)."""
        return WordVector(self.space, self.n, self.rows, {w: v @ b for w, v in self.comps.items()})

    def hstack(self, others: Sequence["WordVector"]) -> "WordVector":
        vs = [self, *others]
        words = set().union(*(v.comps for v in vs))
        out = {}
        for w in words:
            shape = self.space.dims(w) + (self.rows,)
            out[w] = np.concatenate(
                [v.comps.get(w, np.zeros(shape + (v.cols,), dtype=complex)) for v in vs], axis=-1
            )
        return WordVector(self.space, self.n, self.rows, out)

    def inner(self, other: "WordVector") -> np.ndarray:
        """B-valued (column-block) inner product ``<self, other>``."""
        out = np.zeros((self.cols, other.cols), dtype=complex)
        for w, v in self.comps.items():
            u = other.comps.get(w)
            if u is not None:
                out += adjoint(v.reshape(-1, v.shape[-1])) @ u.reshape(-1, u.shape[-1])
        return out

    def norm2(self) -> float:
        return float(sum(np.vdot(v, v).real for v in self.comps.values()))


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------

class Operator:
    """Base class for lazily applied operators on a free product."""

    depth = 0

    def apply(self, vec: WordVector) -> WordVector:  # pragma: no cover - interface
        raise NotImplementedError

    def adjoint(self) -> "Operator":  # pragma: no cover - interface
        raise NotImplementedError

    def __matmul__(self, other: "Operator") -> "Product":
        return Product([self, other])

    def __add__(self, other: "Operator") -> "Linear":
        return Linear([(1.0, self), (1.0, other)])


class Embedded(Operator):
    """``rho_j(a)`` for an operator ``a`` on the j-th factor (amplified as ``a (x) I_n``)."""

    depth = 1

    def __init__(self, space: FreeProductSpace, j: int, a: np.ndarray):
        d, s = space.d, space.factors[j].s
        a = np.asarray(a, dtype=complex)
        if a.shape != (s * d, s * d):
            raise ValueError(f"operator of shape {a.shape} does not act on factor {j}")
        self.space, self.j, self.a = space, j, a
        u = space.unitaries[j]
        self.blocks = (adjoint(u) @ a @ u).reshape(s, d, s, d).transpose(0, 2, 1, 3)

    def adjoint(self) -> "Embedded":
        return Embedded(self.space, self.j, adjoint(self.a))

    def apply(self, vec: WordVector) -> WordVector:
        sp, j, n = self.space, self.j, vec.n
        d, t = sp.d, sp.t[j]
        R, C = vec.rows, vec.cols
        tails = {w for w in vec.comps if not w or w[0] != j}
        tails |= {w[1:] for w in vec.comps if w and w[0] == j}
        out: dict = {}
        blk = self.blocks
        for w in tails:
            dims = sp.dims(w)
            zero = None
            head = vec.comps.get(w)
            if head is None:
                zero = np.zeros(dims + (R, C), dtype=complex)
                head = zero
            stacked = [head[None]]
            if t:
                rest = vec.comps.get((j,) + w)
                if rest is None:
                    rest = np.zeros((t,) + dims + (R, C), dtype=complex)
                stacked.append(rest)
            stack = np.concatenate(stacked, axis=0) if t else stacked[0]
            m = int(np.prod(dims, dtype=int))
            arr = stack.reshape(stack.shape[0], m, n, d, C)
            if t:
                new = np.einsum("abxy,bmnyc->amnxc", blk, arr)
            else:
                new = np.einsum("xy,bmnyc->bmnxc", blk[0, 0], arr)
            new = new.reshape((new.shape[0],) + dims + (R, C))
            out[w] = out.get(w, 0) + new[0]
            if t:
                if len(w) + 1 <= sp.L:
                    out[(j,) + w] = new[1:]
                else:
                    sp.dropped = max(sp.dropped, float(np.max(np.abs(new[1:]), initial=0.0)))
        return WordVector(sp, n, R, out)


class LeftMul(Operator):
    """Left action of ``b`` in B, or of ``b`` in M_n(B) on an amplified vector."""

    def __init__(self, b: np.ndarray):
        self.b = np.asarray(b, dtype=complex)

    def adjoint(self) -> "LeftMul":
        return LeftMul(adjoint(self.b))

    def apply(self, vec: WordVector) -> WordVector:
        b = self.b
        if b.shape[0] != vec.rows:
            n = vec.rows // b.shape[0]
            b = np.kron(np.eye(n), b)
        return WordVector(vec.space, vec.n, vec.rows, {w: b @ v for w, v in vec.comps.items()})


class Linear(Operator):
    """Linear combination ``sum c_i T_i``."""

    def __init__(self, terms):
        self.terms = [(c, op) for c, op in terms]
        self.depth = max((op.depth for _, op in self.terms), default=0)

    def adjoint(self) -> "Linear":
        return Linear([(np.conj(c), op.adjoint()) for c, op in self.terms])

    def apply(self, vec: WordVector) -> WordVector:
        acc = None
        for c, op in self.terms:
            v = op.apply(vec).scale(c)
            acc = v if acc is None else acc + v
        return acc if acc is not None else WordVector(vec.space, vec.n, vec.rows, {})


class Product(Operator):
    """Operator product ``ops[0] ops[1] ... ops[-1]`` (the last factor acts first)."""

    def __init__(self, ops):
        flat = []
        for op in ops:
            flat.extend(op.ops if isinstance(op, Product) else [op])
        self.ops = flat
        self.depth = sum(op.depth for op in flat)

    def adjoint(self) -> "Product":
        return Product([op.adjoint() for op in reversed(self.ops)])

    def apply(self, vec: WordVector) -> WordVector:
        for op in reversed(self.ops):
            vec = op.apply(vec)
        return vec

    def split(self):
        """Split into ``(left, right)`` with depths as equal as possible."""
        total, acc = self.depth, 0
        for i, op in enumerate(reversed(self.ops)):
            if 2 * (acc + op.depth) > total + 1:
                cut = len(self.ops) - i
                return Product(self.ops[:cut]), Product(self.ops[cut:])
            acc += op.depth
        return Product([]), Product(self.ops)


def embed(F: FreeProductSpace, j: int, a: np.ndarray) -> Embedded:
    """The operator ``rho_j(a)`` on the free product."""
    return Embedded(F, j, a)


def _check_depth(F: FreeProductSpace, T: Operator, start_len: int):
    m = T.depth
    if F.nfactors > 1 and m > F.L:
        raise TruncationError(f"operator count {m} exceeds truncation depth L = {F.L}")
    if F.nfactors > 1 and start_len + (m + 1) // 2 > F.L:
        raise TruncationError(f"depth L = {F.L} too small for start length {start_len} and {m} operators")


def sandwich(F: FreeProductSpace, T: Operator, left: WordVector, right: WordVector) -> np.ndarray:
    """``<left, T right>`` computed by applying half of ``T`` to each side."""
    T = T if isinstance(T, Product) else Product([T])
    lo, hi = T.split()
    return lo.adjoint().apply(left).inner(hi.apply(right))


def expectation(F: FreeProductSpace, T: Operator, n: int = 1) -> np.ndarray:
    """``<xi, T xi>`` (amplified when ``n > 1``).

    Raises
    ------
    TruncationError
        If ``T`` contains more embedded factors than the truncation depth.
    """
    _check_depth(F, T, 0)
    xi = F.xi(n)
    return sandwich(F, T, xi, xi)


def cond_expectation(F: FreeProductSpace, j: int, T: Operator) -> np.ndarray:
    """The conditional expectation onto the operators of factor ``j``, i.e. ``W^* T W``.

    ``W`` is the isometry ``h -> h (x) xi`` from H_j into H.  The result is an
    ``(s_j d, s_j d)`` matrix in the original coordinates of H_j.
    """
    _check_depth(F, T, 1)
    basis = F.basis_block(j)
    blocks = sandwich(F, T, basis, basis)
    return blocks


def freeness_selftest(F: FreeProductSpace, m: int, rng: np.random.Generator | None = None,
                      samples: int = 2) -> dict:
    """Check that alternating products of centered elements have expectation zero.

    Returns a report with the worst absolute violation over all alternating
    index patterns of length ``<= m``.
    """
    if m > F.L and F.nfactors > 1:
        raise TruncationError(f"pattern length {m} exceeds truncation depth {F.L}")
    rng = np.random.default_rng(0) if rng is None else rng
    d = F.d
    worst, patterns = 0.0, 0
    for k in range(1, m + 1):
        for pat in itertools.product(range(F.nfactors), repeat=k):
            if any(a == b for a, b in zip(pat, pat[1:])):
                continue
            for _ in range(samples):
                ops = [Embedded(F, j, centered_random(F.factors[j], rng)) for j in pat]
                val = expectation(F, Product(ops))
                worst = max(worst, float(np.max(np.abs(val))))
                patterns += 1
    return {"ok": worst <= F.tol.eq_tol, "worst": worst, "patterns": patterns, "d": d}


def centered_random(P: PointedCorrespondence, rng: np.random.Generator) -> np.ndarray:
    """A random operator ``a`` on P with ``<xi, a xi> = 0``."""
    D = P.s * P.d
    a = rng.standard_normal((D, D)) + 1j * rng.standard_normal((D, D))
    return a - np.kron(np.eye(P.s), P.expectation(a))
