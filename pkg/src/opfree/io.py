"""JSON problem files and CSV output.

A problem file looks like::

    {
      "version": "1",
      "B": {"d": 1},
      "eta": {"kraus": [[[1.4142, 0]]]},
      "mu": {"semicircle": {"variance": 1.0}},
      "options": {"max_degree": 6, "L": null, "seed": 0, "n": 2,
                  "tolerances": {"eq_tol": 1e-10}}
    }

Complex matrices are nested lists of rows whose entries are real numbers or
``[re, im]`` pairs.  ``eta`` is given by ``kraus`` (a list of matrices, or a
single complex matrix), by ``choi`` (a ``d^2 x d^2`` matrix) or by
``scalar`` (``t * id``).  ``mu`` is one of ``semicircle``, ``discrete``,
``bernoulli``, ``point_mass``, ``realization``, ``random`` or ``moments``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .algebra import TOL, CPMap, Tolerances, adjoint, is_cp, is_eta_minus_id_cp, is_psd, kraus_from_choi
from .correspondence import PointedCorrespondence
from .errors import DomainError, SchemaError
from .laws import BLaw, bernoulli, discrete_law, point_mass, random_realization_law, semicircle

SCHEMA_VERSION = "1"
DEFAULT_DEGREE = 6


@dataclass
class ProblemSpec:
    version: str
    d: int
    eta: CPMap | None
    mu: BLaw
    max_degree: int = DEFAULT_DEGREE
    L: int | None = None
    tol: Tolerances = TOL
    seed: int = 0
    options: dict = field(default_factory=dict)
    eta_admissible: bool | None = None
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def _require(obj: dict, key: str, path: str):
    if not isinstance(obj, dict):
        raise SchemaError(path, "expected an object")
    if key not in obj:
        raise SchemaError(f"{path}.{key}" if path else key, "missing field")
    return obj[key]


def _number(x, path: str) -> complex:
    if isinstance(x, bool):
        raise SchemaError(path, "expected a number")
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, list) and len(x) == 2 and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in x):
        return complex(x[0], x[1])
    raise SchemaError(path, "expected a number or an [re, im] pair")


def parse_matrix(value, path: str, shape: tuple | None = None) -> np.ndarray:
    """A complex matrix from rows of reals or ``[re, im]`` pairs."""
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        raise SchemaError(path, "expected a non-empty list of rows")
    ncol = len(value[0])
    rows = []
    for i, row in enumerate(value):
        if len(row) != ncol:
            raise SchemaError(f"{path}[{i}]", "ragged matrix")
        rows.append([_number(x, f"{path}[{i}][{j}]") for j, x in enumerate(row)])
    m = np.array(rows, dtype=complex)
    if shape is not None and m.shape != shape:
        raise SchemaError(path, f"expected shape {shape}, got {m.shape}")
    return m


def _depth(x) -> int:
    k = 0
    while isinstance(x, list) and x:
        x, k = x[0], k + 1
    return k


def parse_kraus(value, d: int, path: str) -> list[np.ndarray]:
    """A list of ``d x d`` Kraus matrices; a single complex matrix is also accepted.

    A depth-3 array is read as a list of real matrices when its shape is
    ``(r, d, d)`` and as one complex matrix otherwise.
    """
    if not isinstance(value, list) or not value:
        raise SchemaError(path, "expected a non-empty list of matrices")
    depth = _depth(value)
    if depth == 2:
        return [parse_matrix(value, path, (d, d))]
    if depth == 3:
        arr_shape = (len(value), len(value[0]), len(value[0][0]))
        if arr_shape[1:] != (d, d):
            return [parse_matrix(value, path, (d, d))]
    return [parse_matrix(k, f"{path}[{i}]", (d, d)) for i, k in enumerate(value)]


def parse_eta(value, d: int, path: str = "eta", tol: Tolerances = TOL) -> CPMap:
    if not isinstance(value, dict):
        raise SchemaError(path, "expected an object")
    if "kraus" in value:
        eta = CPMap(d, parse_kraus(value["kraus"], d, f"{path}.kraus"))
    elif "choi" in value:
        C = parse_matrix(value["choi"], f"{path}.choi", (d * d, d * d))
        if np.max(np.abs(C - adjoint(C))) > tol.eq_tol or not is_psd(C, tol):
            raise DomainError(f"{path}.choi is not a positive semidefinite Choi matrix")
        eta = kraus_from_choi(C, tol)
    elif "scalar" in value:
        t = value["scalar"]
        if not isinstance(t, (int, float)) or isinstance(t, bool) or t < 0:
            raise SchemaError(f"{path}.scalar", "expected a non-negative number")
        eta = CPMap.scalar(d, float(t))
    else:
        raise SchemaError(path, "expected one of kraus, choi, scalar")
    if not is_cp(eta, tol=tol):
        raise DomainError(f"{path} is not completely positive")
    return eta


def _vector(value, path: str) -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise SchemaError(path, "expected a non-empty list")
    return np.array([_number(x, f"{path}[{i}]") for i, x in enumerate(value)])


def parse_mu(value, d: int, N: int, seed: int, path: str = "mu", tol: Tolerances = TOL) -> BLaw:
    if not isinstance(value, dict) or len(value) != 1:
        raise SchemaError(path, "expected an object with exactly one law kind")
    kind, body = next(iter(value.items()))
    p = f"{path}.{kind}"
    body = {} if body is None else body
    if kind in ("semicircle", "discrete", "bernoulli") and d != 1:
        raise SchemaError(p, f"{kind} laws are scalar; set B.d = 1")
    if kind == "semicircle":
        var = body.get("variance", 1.0) if isinstance(body, dict) else body
        if not isinstance(var, (int, float)) or var <= 0:
            raise SchemaError(f"{p}.variance", "expected a positive number")
        return semicircle(float(var), N)
    if kind == "discrete":
        pts = _require(body, "points", p)
        wts = _require(body, "weights", p)
        if not isinstance(pts, list) or not isinstance(wts, list) or len(pts) != len(wts) or not pts:
            raise SchemaError(p, "points and weights must be equal-length non-empty lists")
        return discrete_law([float(x) for x in pts], [float(w) for w in wts], N)
    if kind == "bernoulli":
        return bernoulli(N)
    if kind == "point_mass":
        m = body.get("value", 0.0) if isinstance(body, dict) else body
        if not isinstance(m, (int, float)):
            raise SchemaError(f"{p}.value", "expected a real number")
        return point_mass(float(m), d, N)
    if kind == "realization":
        c = _vector(_require(body, "unit", p), f"{p}.unit")
        norm = np.linalg.norm(c)
        if abs(norm - 1) > 1e-8:
            raise SchemaError(f"{p}.unit", f"unit vector has norm {norm}")
        P = PointedCorrespondence.from_unit(d, c / norm)
        X = parse_matrix(_require(body, "X", p), f"{p}.X", (c.size * d, c.size * d))
        return BLaw.from_realization(P, X, N, tol)
    if kind == "random":
        s = body.get("s", 2)
        scale = body.get("scale", 1.0)
        if not isinstance(s, int) or s < 1:
            raise SchemaError(f"{p}.s", "expected a positive integer")
        return random_realization_law(d, s, N, np.random.default_rng(seed), float(scale))
    if kind == "moments":
        R = _require(body, "R", p)
        tensors = _require(body, "tensors", p)
        if not isinstance(tensors, list) or not tensors:
            raise SchemaError(f"{p}.tensors", "expected a non-empty list")
        q = d * d
        moms = []
        for k, t in enumerate(tensors, start=1):
            arr = np.asarray(t, dtype=float)
            want = (q,) * (k - 1) + (d, d)
            if arr.shape == want + (2,):
                arr = arr[..., 0] + 1j * arr[..., 1]
            elif arr.shape != want:
                raise SchemaError(f"{p}.tensors[{k - 1}]", f"expected shape {want} (optionally with a trailing re/im axis)")
            moms.append(arr.astype(complex))
        return BLaw.from_moments(d, float(R), moms)
    raise SchemaError(path, f"unknown law kind {kind!r}")


def parse_problem(source, tol: Tolerances | None = None) -> ProblemSpec:
    """Parse and validate a problem from a path, a JSON string or a dict.

    Raises
    ------
    SchemaError
        With the dotted path of the offending field.
    DomainError
        If ``eta`` is not completely positive.
    """
    if isinstance(source, dict):
        raw = source
    else:
        text = str(source)
        path = Path(text)
        if not text.lstrip().startswith("{") and path.exists():
            text = path.read_text()
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError("$", f"invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise SchemaError("$", "expected a JSON object")
    version = str(raw.get("version", SCHEMA_VERSION))
    if version != SCHEMA_VERSION:
        raise SchemaError("version", f"unsupported schema version {version}")
    d = _require(_require(raw, "B", ""), "d", "B")
    if not isinstance(d, int) or isinstance(d, bool) or d < 1:
        raise SchemaError("B.d", "expected a positive integer")
    opts = raw.get("options", {}) or {}
    if not isinstance(opts, dict):
        raise SchemaError("options", "expected an object")
    tol = tol or Tolerances.from_env()
    if "tolerances" in opts:
        t = opts["tolerances"]
        if not isinstance(t, dict) or any(k not in ("eq_tol", "psd_tol", "newton_tol") for k in t):
            raise SchemaError("options.tolerances", "expected keys among eq_tol, psd_tol, newton_tol")
        try:
            tol = Tolerances(**{**tol.__dict__, **{k: float(v) for k, v in t.items()}})
        except ValueError as exc:
            raise SchemaError("options.tolerances", str(exc)) from exc
    N = opts.get("max_degree", DEFAULT_DEGREE)
    if not isinstance(N, int) or N < 1:
        raise SchemaError("options.max_degree", "expected a positive integer")
    L = opts.get("L")
    if L is not None and (not isinstance(L, int) or L < 1):
        raise SchemaError("options.L", "expected a positive integer or null")
    seed = opts.get("seed", 0)
    if not isinstance(seed, int):
        raise SchemaError("options.seed", "expected an integer")
    eta = parse_eta(raw["eta"], d, "eta", tol) if raw.get("eta") is not None else None
    mu = parse_mu(_require(raw, "mu", ""), d, N, seed, "mu", tol)
    adm = None if eta is None else is_eta_minus_id_cp(eta, tol=tol)
    return ProblemSpec(version, d, eta, mu, N, L, tol, seed, opts, adm, raw)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def fmt(x) -> str:
    """Full-precision scientific notation (17 significant digits)."""
    if isinstance(x, (int, np.integer)) or isinstance(x, str):
        return str(x)
    return f"{float(x):.16e}"


def write_csv(path, header: list[str], rows) -> None:
    """Write rows to ``path`` (``-`` or None for stdout)."""
    lines = [",".join(header)] + [",".join(fmt(v) for v in r) for r in rows]
    text = "\n".join(lines) + "\n"
    if path in (None, "-"):
        print(text, end="")
    else:
        Path(path).write_text(text)


def to_jsonable(obj):
    """Convert reports (numpy scalars, complex arrays) into JSON values."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return to_jsonable(np.stack([obj.real, obj.imag], axis=-1).tolist())
        return obj.tolist()
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(path, report: dict) -> None:
    text = json.dumps(to_jsonable(report), indent=2, sort_keys=True)
    if path in (None, "-"):
        print(text)
    else:
        Path(path).write_text(text + "\n")
