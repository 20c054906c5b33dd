"""B-valued laws, their moments and their matricial transforms.

A law of degree ``N`` stores, for each ``1 <= k <= N``, the multilinear map
``(b_1, ..., b_{k-1}) -> mu[x b_1 x ... b_{k-1} x]`` as a dense array of shape
``(q,)*(k-1) + (d, d)`` over the matrix units of B (``q = d*d``).  Laws may
also carry a finite realization ``(P, X)`` (exact resolvents) or a
:class:`PointedModel` on a truncated free product (exact moments of any
degree, Cauchy transforms by series with certified tails).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import partial
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import sqrtm

from .algebra import TOL, Tolerances, adjoint, from_blocks, imag_part, matrix_units, min_eig, opnorm, to_blocks
from .correspondence import PointedCorrespondence
from .errors import ConvergenceError, DegreeError, DomainError
from .free_product import Embedded, FreeProductSpace, LeftMul, Operator, Product, WordVector

NEWTON_C = 3.0 - 2.0 * np.sqrt(2.0)


# ---------------------------------------------------------------------------
# pointed models: <xi, pre f(x) post xi> on a truncated free product
# ---------------------------------------------------------------------------

@dataclass
class PointedModel:
    """A state ``T -> <xi, pre T post xi>`` and a distinguished operator ``x``.

    ``x_norm`` bounds ``||x||`` and ``depth`` is the number of embedded factors
    in ``x``; together they size the truncation for exact evaluation.
    ``symmetric`` declares ``x`` self-adjoint and ``pre = post^*``, which lets
    scalar moments reuse one half of the split instead of building both.
    """

    space: FreeProductSpace
    x: Operator
    x_norm: float
    pre: Operator | None = None
    post: Operator | None = None
    symmetric: bool = False

    @property
    def d(self) -> int:
        return self.space.d

    def _left_start(self, n: int) -> WordVector:
        v = self.space.xi(n)
        return self.pre.adjoint().apply(v) if self.pre is not None else v

    def _right_start(self, n: int) -> WordVector:
        v = self.space.xi(n)
        return self.post.apply(v) if self.post is not None else v

    def _outer_depth(self) -> int:
        return max(getattr(self.pre, "depth", 0), getattr(self.post, "depth", 0))

    def _need(self, steps: int) -> int:
        return self._outer_depth() + steps * self.x.depth

    def _check(self, steps: int):
        from .errors import TruncationError

        if self.space.nfactors > 1 and self._need(steps) > self.space.L:
            raise TruncationError(
                f"truncation depth {self.space.L} too small: need {self._need(steps)}"
            )

    def moment_tensor(self, k: int) -> np.ndarray:
        """The degree-``k`` multilinear moment map as a ``(q,)*(k-1)+(d,d)`` array."""
        d = self.d
        q = d * d
        units = matrix_units(d)
        h = (k + 1) // 2
        self._check(max(h, k - h))
        x, xa = self.x, self.x.adjoint()
        if self.symmetric and q == 1:
            # left half = x^h s = x^(h - (k - h)) (right half)
            right = self._right_start(1)
            for _ in range(k - h):
                right = x.apply(right)
            left = right if 2 * h == k else x.apply(right)
            return left.inner(right).reshape((1,) * (k - 1) + (d, d))

        def expand(v, adj):
            return _hstack([LeftMul(adjoint(e) if adj else e).apply(v) for e in units])

        left = xa.apply(self._left_start(1))
        for _ in range(h - 1):
            left = xa.apply(expand(left, True))
        right = self._right_start(1)
        if k - h:
            right = x.apply(right)
            for _ in range(k - h - 1):
                right = x.apply(expand(right, False))
        if h < k:
            right = expand(right, False)
        m = left.inner(right)
        m = m.reshape((q,) * (h - 1) + (d,) + (q,) * (k - h) + (d,))
        axes = list(range(h - 2, -1, -1)) + list(range(h, h + k - h)) + [h - 1, k]
        return np.ascontiguousarray(m.transpose(axes))

    def cauchy_series(self, z: np.ndarray, K: int, start: WordVector | None = None) -> np.ndarray:
        """``sum_{k<=K} <s, pre w (x w)^k post s>`` with ``w = z^-1``, computed exactly.

        With the default start ``s = xi`` this is the truncated amplified
        Cauchy series; other start vectors give compressions of the resolvent.
        """
        d = self.d
        n = z.shape[0] // d
        steps = (K + 1) // 2 + 1
        self._check(steps + (start.max_len() if start is not None else 0))
        w = LeftMul(np.linalg.inv(z))
        xw = Product([self.x, w])
        if start is None:
            lstart, rstart = self._left_start(n), self._right_start(n)
        else:
            lstart = self.pre.adjoint().apply(start) if self.pre is not None else start
            rstart = self.post.apply(start) if self.post is not None else start
        left = w.adjoint().apply(lstart)
        lefts = [left]
        for _ in range(K // 2):
            lefts.append(xw.adjoint().apply(lefts[-1]))
        right = rstart
        rights = [right]
        for _ in range((K + 1) // 2):
            rights.append(xw.apply(rights[-1]))
        total = np.zeros((lefts[0].cols, rights[0].cols), dtype=complex)
        for k in range(K + 1):
            i = k // 2
            total += lefts[i].inner(rights[k - i])
        return total


def _hstack(vs: Sequence[WordVector]) -> WordVector:
    return vs[0].hstack(vs[1:])


def _is_selfadjoint(X: np.ndarray) -> bool:
    return bool(np.max(np.abs(X - adjoint(X)), initial=0.0) <= TOL.eq_tol)


def realization_model(P: PointedCorrespondence, X: np.ndarray) -> PointedModel:
    F = FreeProductSpace([P], L=1)
    return PointedModel(F, Embedded(F, 0, X), opnorm(X), symmetric=_is_selfadjoint(X))


# ---------------------------------------------------------------------------
# laws
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BLaw:
    """A B-valued law truncated at degree ``N``.

    Attributes
    ----------
    d : int
    R : float
        Norm bound ``||X|| <= R`` governing all series radii.
    moments : tuple of arrays
        ``moments[k-1]`` is the degree-``k`` moment map.
    realization : (PointedCorrespondence, ndarray) or None
    model : PointedModel or None
        Exact evaluator for the Cauchy series at arbitrary degree.
    formal : bool
        Set when positivity of the law is not guaranteed.
    exact : callable or None
        Closed-form matricial Cauchy transform, preferred over the other routes.
    """

    d: int
    R: float
    moments: tuple
    realization: tuple | None = None
    model: PointedModel | None = field(default=None, compare=False)
    formal: bool = False
    exact: Callable | None = field(default=None, compare=False)

    @property
    def N(self) -> int:
        return len(self.moments)

    @property
    def q(self) -> int:
        return self.d * self.d

    def tensor(self, k: int) -> np.ndarray:
        if k < 1 or k > self.N:
            raise DegreeError(f"degree {k} not available (max degree {self.N})")
        return self.moments[k - 1]

    @classmethod
    def from_realization(cls, P: PointedCorrespondence, X: np.ndarray, N: int, tol: Tolerances = TOL) -> "BLaw":
        X = np.asarray(X, dtype=complex)
        if np.max(np.abs(X - adjoint(X))) > tol.eq_tol:
            raise DomainError("X must be self-adjoint")
        model = realization_model(P, X)
        moms = tuple(model.moment_tensor(k) for k in range(1, N + 1))
        return cls(P.d, opnorm(X), moms, (P, X), model)

    @classmethod
    def from_model(cls, model: PointedModel, N: int, R: float | None = None, formal: bool = False) -> "BLaw":
        moms = tuple(model.moment_tensor(k) for k in range(1, N + 1))
        return cls(model.d, model.x_norm if R is None else R, moms, None, model, formal)

    @classmethod
    def from_moments(cls, d: int, R: float, moments: Sequence[np.ndarray], formal: bool = False) -> "BLaw":
        q = d * d
        moms = []
        for k, m in enumerate(moments, start=1):
            m = np.asarray(m, dtype=complex)
            if m.shape != (q,) * (k - 1) + (d, d):
                raise ValueError(f"moment map of degree {k} has shape {m.shape}")
            moms.append(m)
        return cls(d, float(R), tuple(moms), None, None, formal)

    def truncate(self, N: int) -> "BLaw":
        return BLaw(self.d, self.R, self.moments[:N], self.realization, self.model, self.formal, self.exact)


def scalar_moments(mu: BLaw) -> np.ndarray:
    """``mu[x^k]`` for ``k = 0..N`` (all inner ``b_i = 1``)."""
    out = [np.eye(mu.d, dtype=complex)]
    one = np.eye(mu.d)
    for k in range(1, mu.N + 1):
        out.append(moment(mu, [one] * (k + 1)))
    return np.array(out)


# ---------------------------------------------------------------------------
# multilinear evaluation
# ---------------------------------------------------------------------------

def amplified_eval(T: np.ndarray, zs: Sequence[np.ndarray], d: int, n: int | None = None) -> np.ndarray:
    """Amplification of a multilinear map evaluated at ``z_1, ..., z_{k-1}`` in M_n(B).

    Entry ``(i, j)`` is ``sum T((z_1)_{i i_1}, (z_2)_{i_1 i_2}, ..., (z_{k-1})_{i_{k-2} j})``;
    for ``k = 1`` the result is ``I_n (x) T``.
    """
    q = d * d
    if not zs:
        if n is None:
            n = 1
        return np.kron(np.eye(n), T)
    n = zs[0].shape[0] // d
    coeffs = [to_blocks(np.asarray(z, dtype=complex), d).reshape(n, n, q) for z in zs]
    S = np.einsum("iju,u...->ij...", coeffs[0], T)
    for c in coeffs[1:]:
        S = np.einsum("iju...,jlu->il...", S, c)
    return from_blocks(S)


def moment(mu: BLaw, bs: Sequence[np.ndarray]) -> np.ndarray:
    """``mu[b_0 x b_1 ... x b_k]`` (blockwise amplified if the b's lie in M_n(B))."""
    k = len(bs) - 1
    if k < 0:
        raise ValueError("need at least b_0")
    bs = [np.asarray(b, dtype=complex) for b in bs]
    if k == 0:
        return bs[0]
    n = bs[0].shape[0] // mu.d
    inner = amplified_eval(mu.tensor(k), bs[1:-1], mu.d, n)
    return bs[0] @ inner @ bs[-1]


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

def _left_action(z: np.ndarray, s: int, d: int) -> np.ndarray:
    """Matrix of ``z`` in M_n(B) on ``C^n (x) C^s (x) C^d``."""
    n = z.shape[0] // d
    zb = to_blocks(z, d)
    return np.einsum("ijab,st->isajtb", zb, np.eye(s)).reshape(n * s * d, n * s * d)


def _amp_xi(P: PointedCorrespondence, n: int) -> np.ndarray:
    return np.kron(np.eye(n), P.xi)


def _amp_X(X: np.ndarray, n: int) -> np.ndarray:
    return np.kron(np.eye(n), X)


def _point_dims(mu: BLaw, z: np.ndarray) -> int:
    z = np.asarray(z)
    if z.ndim != 2 or z.shape[0] != z.shape[1] or z.shape[0] % mu.d:
        raise ValueError(f"point of shape {z.shape} is not in M_n(M_{mu.d})")
    return z.shape[0] // mu.d


@dataclass(frozen=True)
class Transform:
    """A transform value with its certified truncation error."""

    value: np.ndarray
    tail: float
    route: str


def _series_terms(r: float, scale: float, tol: float, kmax: int):
    """Smallest K <= kmax with geometric tail ``r^{K+1}/(1-r)*scale < tol``."""
    if r >= 1:
        return None, np.inf
    for K in range(kmax + 1):
        tail = r ** (K + 1) / (1 - r) * scale
        if tail < tol:
            return K, tail
    return kmax, r ** (kmax + 1) / (1 - r) * scale


def cauchy(mu: BLaw, z: np.ndarray, eps: float | None = None, tol: Tolerances = TOL,
           full_output: bool = False, allow_tail: bool = False, max_terms: int = 200):
    """Matricial Cauchy transform ``E^(n)[(z - X^(n))^-1]``.

    Closed-form route when the law carries one; realization route: exact
    resolvent.  Otherwise the series
    ``sum_k E[w (X w)^k]`` with ``w = z^-1``, truncated once the geometric tail
    drops below ``newton_tol`` (or at the available degree when
    ``allow_tail`` is set, in which case the tail is reported).

    Raises
    ------
    DomainError
        If ``im z`` is not positive definite (or below ``eps``).
    ConvergenceError
        On the series route when ``R ||z^-1|| >= 1`` or the degree is
        insufficient for the requested tolerance.
    """
    z = np.asarray(z, dtype=complex)
    n = _point_dims(mu, z)
    lam = min_eig(imag_part(z))
    if eps is None:
        eps = lam
    if not eps > 0 or lam < eps - tol.psd_tol:
        raise DomainError(f"z is not in the upper half-plane (min eig of im z = {lam:.3e})")
    if mu.exact is not None:
        out = Transform(mu.exact(z), 0.0, "closed-form")
    elif mu.realization is not None:
        P, X = mu.realization
        Z = _left_action(z, P.s, mu.d)
        xi = _amp_xi(P, n)
        val = adjoint(xi) @ np.linalg.solve(Z - _amp_X(X, n), xi)
        out = Transform(val, 0.0, "realization")
    else:
        w = np.linalg.inv(z)
        nw = opnorm(w)
        r = mu.R * nw
        if r >= 1:
            raise ConvergenceError(f"series diverges: R ||z^-1|| = {r:.3f} >= 1")
        if mu.model is not None:
            K, tail = _series_terms(r, nw, tol.newton_tol, max_terms)
            val = mu.model.cauchy_series(z, K)
            out = Transform(val, tail, "model")
        else:
            K, tail = _series_terms(r, nw, tol.newton_tol, mu.N)
            if tail >= tol.newton_tol and not allow_tail:
                raise ConvergenceError(
                    f"degree {mu.N} insufficient: tail bound {tail:.2e} at ||z^-1|| = {nw:.3e}"
                )
            val = w.copy()
            for k in range(1, K + 1):
                val = val + w @ amplified_eval(mu.tensor(k), [w] * (k - 1), mu.d, n) @ w
            out = Transform(val, tail, "series")
    return out if full_output else out.value


def _is_strict_upper(z: np.ndarray, d: int) -> bool:
    blocks = to_blocks(z, d)
    n = blocks.shape[0]
    lower = np.tril(np.ones((n, n), dtype=bool))
    return not np.any(np.abs(blocks[lower]) > 0)


def gtilde(mu: BLaw, z: np.ndarray, tol: Tolerances = TOL, full_output: bool = False):
    """``E^(n)[z (1 - X^(n) z)^-1]``, the Cauchy transform at ``z^-1`` continued to ``z = 0``.

    Exact for realizations and for block-nilpotent ``z`` (the series
    terminates); otherwise the moment series with certified tail.
    """
    z = np.asarray(z, dtype=complex)
    n = _point_dims(mu, z)
    d = mu.d
    if mu.realization is not None:
        P, X = mu.realization
        Z = _left_action(z, P.s, d)
        xi = _amp_xi(P, n)
        D = Z.shape[0]
        val = adjoint(xi) @ Z @ np.linalg.solve(np.eye(D) - _amp_X(X, n) @ Z, xi)
        out = Transform(val, 0.0, "realization")
    elif _is_strict_upper(z, d):
        # z^n = 0, so only moments of degree <= n - 2 enter
        if n - 2 > mu.N:
            raise DegreeError(f"nilpotent evaluation needs degree {n - 2} > {mu.N}")
        val = z.copy()
        for k in range(1, n - 1):
            val = val + z @ amplified_eval(mu.tensor(k), [z] * (k - 1), d, n) @ z
        out = Transform(val, 0.0, "nilpotent")
    else:
        nz = opnorm(z)
        r = mu.R * nz
        if r >= 1:
            raise ConvergenceError(f"series diverges: R ||z|| = {r:.3f} >= 1")
        K, tail = _series_terms(r, nz, tol.newton_tol, mu.N)
        if tail >= tol.newton_tol:
            raise ConvergenceError(f"degree {mu.N} insufficient: tail bound {tail:.2e}")
        val = z.copy()
        for k in range(1, K + 1):
            val = val + z @ amplified_eval(mu.tensor(k), [z] * (k - 1), d, n) @ z
        out = Transform(val, tail, "series")
    return out if full_output else out.value


def recover_moment_nilpotent(mu: BLaw, bs: Sequence[np.ndarray]) -> np.ndarray:
    """``mu[b_0 x b_1 ... x b_n]`` read off the corner of ``G~^(n+2)`` at a nilpotent point."""
    bs = [np.asarray(b, dtype=complex) for b in bs]
    n = len(bs) - 1
    if n > mu.N:
        raise DegreeError(f"degree {n} exceeds {mu.N}")
    d = mu.d
    m = n + 2
    blocks = np.zeros((m, m, d, d), dtype=complex)
    for i, b in enumerate(bs):
        blocks[i, i + 1] = b
    g = gtilde(mu, from_blocks(blocks))
    return to_blocks(g, d)[0, m - 1]


def derivative(f: Callable[[np.ndarray], np.ndarray], z: np.ndarray, h: np.ndarray, d: int) -> np.ndarray:
    """Directional derivative of a matricial function via ``f([[z, h], [0, z]])``."""
    n = z.shape[0] // d
    zb = to_blocks(z, d)
    hb = to_blocks(h, d)
    big = np.zeros((2 * n, 2 * n, d, d), dtype=complex)
    big[:n, :n] = zb
    big[n:, n:] = zb
    big[:n, n:] = hb
    out = to_blocks(f(from_blocks(big)), d)
    return from_blocks(out[:n, n:])


def jacobian(f: Callable[[np.ndarray], np.ndarray], z: np.ndarray, d: int) -> np.ndarray:
    """Complex Jacobian of ``vec f`` at ``z`` (row-major vec)."""
    D = z.shape[0]
    J = np.empty((D * D, D * D), dtype=complex)
    for col in range(D * D):
        h = np.zeros(D * D, dtype=complex)
        h[col] = 1.0
        J[:, col] = derivative(f, z, h.reshape(D, D), d).ravel()
    return J


def newton_solve(f, target: np.ndarray, z0: np.ndarray, d: int, tol: Tolerances = TOL,
                 max_iter: int = 100, domain: Callable[[np.ndarray], bool] | None = None):
    """Solve ``f(z) = target`` by Newton's method with Jacobians from :func:`jacobian`.

    Returns ``(z, residual, iterations)``.
    """
    z = np.asarray(z0, dtype=complex).copy()
    for it in range(max_iter + 1):
        try:
            val = f(z)
        except (DomainError, ConvergenceError, np.linalg.LinAlgError) as exc:
            raise ConvergenceError(f"Newton left the domain at iteration {it}: {exc}") from exc
        res = val - target
        rn = opnorm(res)
        if rn <= tol.newton_tol:
            return z, rn, it
        if it == max_iter:
            break
        J = jacobian(f, z, d)
        step = np.linalg.solve(J, res.ravel()).reshape(z.shape)
        z = z - step
        if not np.all(np.isfinite(z)) or (domain is not None and not domain(z)):
            raise ConvergenceError(f"Newton iterate left the domain at iteration {it + 1}")
    raise ConvergenceError(f"Newton did not converge in {max_iter} iterations (residual {rn:.2e})")


def certified_radius(mu: BLaw) -> float:
    """Radius ``(3 - 2 sqrt 2)/R`` of the ball on which G~ is invertible."""
    return NEWTON_C / mu.R if mu.R > 0 else np.inf


def gtilde_inverse(mu: BLaw, w: np.ndarray, tol: Tolerances = TOL, full_output: bool = False):
    """The unique small ``z`` with ``G~(z) = w``, by Newton seeded at ``w``.

    Raises
    ------
    ConvergenceError
        If Newton fails, which signals ``w`` outside the inversion ball.
    """
    w = np.asarray(w, dtype=complex)
    _point_dims(mu, w)
    if not np.any(w):
        return (w.copy(), 0.0, 0) if full_output else w.copy()
    z, res, it = newton_solve(lambda z: gtilde(mu, z, tol), w, w, mu.d, tol)
    return (z, res, it) if full_output else z


def r_transform(mu: BLaw, z: np.ndarray, tol: Tolerances = TOL) -> np.ndarray:
    """``R(z) = (G~^-1(z))^-1 - z^-1`` for invertible small ``z``."""
    z = np.asarray(z, dtype=complex)
    zi = gtilde_inverse(mu, z, tol)
    return np.linalg.inv(zi) - np.linalg.inv(z)


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------

def matricial_checks(F: Callable[[np.ndarray], np.ndarray], points: Sequence[np.ndarray], d: int,
                     rng: np.random.Generator | None = None, tol: Tolerances = TOL) -> dict:
    """Direct-sum and similarity equivariance of a matricial map on test points.

    Similarities use scalar ``S`` in M_n(C) near the identity, and the
    violation is relative to the size of the values involved.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    worst_sum = worst_sim = 0.0
    pts = list(points)
    for i, z in enumerate(pts):
        w = pts[(i + 1) % len(pts)]
        n = z.shape[0] // d
        zw = np.zeros((z.shape[0] + w.shape[0],) * 2, dtype=complex)
        zw[: z.shape[0], : z.shape[0]] = z
        zw[z.shape[0]:, z.shape[0]:] = w
        fz, fw = F(z), F(w)
        big = F(zw)
        expect = np.zeros_like(big)
        expect[: z.shape[0], : z.shape[0]] = fz
        expect[z.shape[0]:, z.shape[0]:] = fw
        scale = max(1.0, opnorm(expect))
        worst_sum = max(worst_sum, opnorm(big - expect) / scale)
        S = np.eye(n) + 0.2 * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(n)
        Sd = np.kron(S, np.eye(d))
        Sinv = np.linalg.inv(Sd)
        try:
            lhs = F(Sd @ z @ Sinv)
        except DomainError:
            continue
        rhs = Sd @ fz @ Sinv
        worst_sim = max(worst_sim, opnorm(lhs - rhs) / max(1.0, opnorm(rhs)))
    worst = max(worst_sum, worst_sim)
    return {"ok": worst <= tol.eq_tol, "direct_sum": worst_sum, "similarity": worst_sim}


def hankel_matrix(mu: BLaw, p: int | None = None) -> np.ndarray:
    """Gram matrix of monomials ``x E_u1 x ... x`` of degree ``<= p`` (flattened over B)."""
    d, q = mu.d, mu.q
    p = mu.N // 2 if p is None else p
    swap = np.arange(q).reshape(d, d).T.ravel()
    eye_c = np.eye(d).ravel()
    # a monomial of degree j >= 1 is ("x", u_1, ..., u_{j-1}); () is the unit
    monos =[()] + [("x",) + tuple(u) for j in range(1, p + 1) for u in np.ndindex(*(q,) * (j - 1))]
    M = len(monos)
    G = np.zeros((M, M, d, d), dtype=complex)
    for a, ma in enumerate(monos):
        for b, mb in enumerate(monos):
            ja, jb = len(ma), len(mb)
            if ja == 0 and jb == 0:
                G[a, b] = np.eye(d)
                continue
            if ja == 0 or jb == 0:
                units = (mb if ja == 0 else ma)[1:]
                if ja == 0:
                    val = mu.tensor(jb)[tuple(units)]
                else:
                    val = adjoint(mu.tensor(ja)[tuple(units)])
                G[a, b] = val
                continue
            T = mu.tensor(ja + jb)
            left = tuple(swap[u] for u in reversed(ma[1:]))
            sub = T[left]
            sub = np.tensordot(eye_c, sub, axes=(0, 0))
            G[a, b] = sub[tuple(mb[1:])]
    return G.transpose(0, 2, 1, 3).reshape(M * d, M * d)


def positivity_check(mu: BLaw, tol: Tolerances = TOL) -> dict:
    """PSD test of the moment Hankel matrix (complete positivity at the moment level)."""
    H = hankel_matrix(mu)
    lam = min_eig(H)
    scale = max(1.0, opnorm(H))
    herm = float(np.max(np.abs(H - adjoint(H))))
    return {"ok": lam >= -tol.psd_tol * scale and herm <= tol.eq_tol * scale, "min_eig": lam, "hermitian_defect": herm}


def growth_check(mu: BLaw, rng: np.random.Generator | None = None, samples: int = 5) -> dict:
    """Check ``||mu[b_0 x ... x b_k]|| <= R^k prod ||b_i||`` on random unit-norm b's."""
    rng = np.random.default_rng(0) if rng is None else rng
    worst = 0.0
    for k in range(1, mu.N + 1):
        for _ in range(samples):
            bs = []
            for _ in range(k + 1):
                b = rng.standard_normal((mu.d, mu.d)) + 1j * rng.standard_normal((mu.d, mu.d))
                bs.append(b / opnorm(b))
            worst = max(worst, opnorm(moment(mu, bs)) / max(mu.R, 1e-300) ** k)
    return {"ok": worst <= 1 + 1e-9, "worst_ratio": worst}


# ---------------------------------------------------------------------------
# standard laws
# ---------------------------------------------------------------------------

def discrete_law(points: Sequence[float], weights: Sequence[float], N: int) -> BLaw:
    """Scalar law ``sum w_i delta_{x_i}`` realized on ``C^m`` with ``xi = (sqrt w_i)``."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or not np.isclose(w.sum(), 1.0):
        raise DomainError("weights must be a probability vector")
    P = PointedCorrespondence.from_unit(1, np.sqrt(w))
    return BLaw.from_realization(P, np.diag(np.asarray(points, dtype=complex)), N)


def point_mass(m: float, d: int = 1, N: int = 6) -> BLaw:
    P = PointedCorrespondence.trivial(d)
    return BLaw.from_realization(P, m * np.eye(d), N)


def bernoulli(N: int = 8) -> BLaw:
    """Symmetric Bernoulli law ``(delta_-1 + delta_1)/2``."""
    return discrete_law([-1.0, 1.0], [0.5, 0.5], N)


def semicircle(variance: float = 1.0, N: int = 8) -> BLaw:
    """Scalar semicircle law, realized by Gauss quadrature exact through degree ``N``.

    The nodes and weights of the m-point Gauss rule for the semicircle
    reproduce all moments of degree ``<= 2m - 1``, so the returned law agrees
    with the semicircle through degree ``N`` exactly (up to rounding).
    """
    m = N // 2 + 1
    k = np.arange(1, m + 1)
    theta = k * np.pi / (m + 1)
    nodes = 2.0 * np.cos(theta) * np.sqrt(variance)
    weights = 2.0 / (m + 1) * np.sin(theta) ** 2
    law = discrete_law(nodes, weights / weights.sum(), N)
    return replace(law, exact=partial(semicircle_cauchy, variance=variance))


def semicircle_cauchy(z: np.ndarray, variance: float = 1.0) -> np.ndarray:
    """``(z - sqrt(z - 2s) sqrt(z + 2s)) / (2 s^2)`` by functional calculus, ``s^2 = variance``.

    For ``im z > 0`` the spectrum of ``z`` lies in the open upper half-plane,
    so both principal square roots exist and the product has the branch
    that behaves like ``z`` at infinity.
    """
    z = np.asarray(z, dtype=complex)
    s = np.sqrt(variance)
    one = np.eye(z.shape[0])
    root = sqrtm(z - 2 * s * one) @ sqrtm(z + 2 * s * one)
    return (z - root) / (2 * variance)


def random_realization_law(d: int, s: int, N: int, rng: np.random.Generator, scale: float = 1.0,
                           centered: bool = False) -> BLaw:
    """Law of a random self-adjoint ``X`` on ``C^s (x) C^d`` with ``||X|| = scale``."""
    c = rng.standard_normal(s) + 1j * rng.standard_normal(s)
    P = PointedCorrespondence.from_unit(d, c / np.linalg.norm(c))
    D = s * d
    A = rng.standard_normal((D, D)) + 1j * rng.standard_normal((D, D))
    X = (A + adjoint(A)) / 2
    if centered:
        X = X - np.kron(np.eye(s), P.expectation(X))
    X = scale * X / opnorm(X)
    return BLaw.from_realization(P, X, N)
