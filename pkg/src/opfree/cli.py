"""Command line entry point ``opfree``.

Data commands write CSV (17 significant digits, complex values as re/im
column pairs); the verify commands write JSON reports.  Exit codes: 0
success, 1 a verification failed, 2 schema or usage error, 3 domain error,
4 convergence or truncation failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .algebra import apply_cp, opnorm
from .compression import eta_power_compression, eta_power_cumulant
from .cumulants import moments_to_cumulants
from .errors import OpfreeError, SchemaError, SingularMapError
from .io import ProblemSpec, parse_matrix, parse_problem, write_csv, write_json
from .laws import BLaw, amplified_eval, scalar_moments
from .nfold import build_phi, nfold_sum_moments, verify_intertwine
from .subordination import F_via_eta_identity, _resolvent_law, density_scalar, realization_only, subordination_F
from .suite import verify

COMMANDS = ("moments", "cumulants", "convolve-power", "nfold-sum", "subordinate", "density", "verify",
            "verify-section5")
PHI_MAP_TOL = 1e-10


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="opfree", description="Operator-valued free convolution powers over M_d.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--spec", help="problem JSON file (verify without --spec runs the shipped problems)")
    p.add_argument("--out", default="-", help="output path (default stdout)")
    p.add_argument("--degree", type=int, help="maximal moment degree")
    p.add_argument("--depth", type=int, help="free-product truncation depth (L_small for verify-section5)")
    p.add_argument("--z", help="point of M_n(B) as a JSON matrix, or a number y meaning i y 1")
    p.add_argument("--grid", help="a,b,steps for density")
    p.add_argument("--eps", type=float, help="imaginary offset for density")
    p.add_argument("--seed", type=int, help="override options.seed")
    p.add_argument("--n", type=int, help="number of free copies (nfold-sum, verify-section5)")
    p.add_argument("--full", action="store_true", help="emit full multilinear tensors over matrix units")
    p.add_argument("--figure", help="also save a matplotlib figure to this path")
    return p


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _load(args) -> ProblemSpec:
    if not args.spec:
        raise SchemaError("--spec", f"command {args.command!r} needs a problem file")
    raw_text = Path(args.spec).read_text() if Path(args.spec).exists() else args.spec
    try:
        raw = json.loads(raw_text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}") from exc
    if isinstance(raw, dict):
        opts = dict(raw.get("options") or {})
        if args.degree is not None:
            opts["max_degree"] = args.degree
        if args.seed is not None:
            opts["seed"] = args.seed
        if args.depth is not None:
            opts["L"] = args.depth
        raw = {**raw, "options": opts}
    return parse_problem(raw)


def _law_rows(law: BLaw, full: bool, tensors=None):
    """Rows ``k, i, j, re, im`` of ``law[x^k]`` (or of given tensors evaluated at 1)."""
    d = law.d if tensors is None else tensors[0].shape[-1]
    rows = []
    if full:
        for k in range(1, (law.N if tensors is None else len(tensors)) + 1):
            T = law.tensor(k) if tensors is None else tensors[k - 1]
            for idx in np.ndindex(*T.shape[:-2]):
                args = "-".join(str(i) for i in idx) or "none"
                for i in range(d):
                    for j in range(d):
                        v = T[idx][i, j]
                        rows.append((k, args, i, j, v.real, v.imag))
        return ["k", "units", "i", "j", "re", "im"], rows
    if tensors is None:
        vals = scalar_moments(law)[1:]
    else:
        one = np.eye(d)
        vals = [amplified_eval(T, [one] * (k - 1), d, 1) for k, T in enumerate(tensors, start=1)]
    for k, m in enumerate(vals, start=1):
        for i in range(d):
            for j in range(d):
                rows.append((k, i, j, m[i, j].real, m[i, j].imag))
    return ["k", "i", "j", "re", "im"], rows


def _maybe_moment_figure(args, rows, d, title, ylabel="Re tr m_k / d"):
    if args.figure and not args.full:
        from .plotting import moments_figure, trace_series

        ks, vals = trace_series(rows, d)
        moments_figure(args.figure, ks, vals, title, ylabel)


def _power_law(spec: ProblemSpec, m: int) -> tuple[BLaw, str]:
    if spec.eta is None:
        raise SchemaError("eta", "this command needs eta")
    if spec.eta_admissible and spec.mu.realization is not None:
        return eta_power_compression(spec.mu, spec.eta, m, spec.L, spec.tol), "compression"
    return eta_power_cumulant(spec.mu, spec.eta, m, spec.tol), "cumulant"


def parse_z(text: str | None, d: int, default: float) -> np.ndarray:
    if text is None:
        return 1j * default * np.eye(d)
    try:
        val = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("--z", f"invalid JSON: {exc}") from exc
    if isinstance(val, (int, float)) and not isinstance(val, bool):
        return 1j * float(val) * np.eye(d)
    z = parse_matrix(val, "--z")
    if z.shape[0] != z.shape[1] or z.shape[0] % d:
        raise SchemaError("--z", f"shape {z.shape} is not a point of M_n(M_{d})")
    return z


def parse_grid(text: str | None, default=(-4.0, 4.0, 161)) -> np.ndarray:
    if text is None:
        a, b, steps = default
    else:
        parts = text.split(",")
        if len(parts) != 3:
            raise SchemaError("--grid", "expected a,b,steps")
        try:
            a, b, steps = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError as exc:
            raise SchemaError("--grid", str(exc)) from exc
    if steps < 2 or not b > a:
        raise SchemaError("--grid", "need a < b and at least 2 steps")
    return np.linspace(a, b, steps)


def _is_identity(eta) -> bool:
    return eta is None or np.max(np.abs(eta.superoperator - np.eye(eta.d ** 2))) < 1e-14


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_moments(args) -> int:
    spec = _load(args)
    header, rows = _law_rows(spec.mu, args.full)
    write_csv(args.out, header, rows)
    _maybe_moment_figure(args, rows, spec.d, "moments")
    return 0


def cmd_cumulants(args) -> int:
    spec = _load(args)
    kap = moments_to_cumulants(spec.mu, spec.max_degree)
    header, rows = _law_rows(spec.mu, args.full, list(kap.tensors))
    write_csv(args.out, header, rows)
    _maybe_moment_figure(args, rows, spec.d, "cumulants", "Re tr kappa_k / d")
    return 0


def cmd_convolve_power(args) -> int:
    spec = _load(args)
    nu, route = _power_law(spec, spec.max_degree)
    header, rows = _law_rows(nu, args.full)
    write_csv(args.out, header + ["route"], [r + (route,) for r in rows])
    _maybe_moment_figure(args, rows, spec.d, f"eta-convolution power ({route} route)")
    return 0


def _copies(args, spec) -> int:
    n = args.n if args.n is not None else spec.options.get("n", 2)
    if not isinstance(n, int) or n < 1:
        raise SchemaError("options.n", "expected a positive integer")
    return n


def cmd_nfold_sum(args) -> int:
    spec = _load(args)
    n = _copies(args, spec)
    if spec.mu.realization is None:
        raise SchemaError("mu", "nfold-sum needs a law with a realization")
    law = nfold_sum_moments(realization_only(spec.mu), n, spec.max_degree, spec.L)
    header, rows = _law_rows(law, args.full)
    write_csv(args.out, header, rows)
    _maybe_moment_figure(args, rows, spec.d, f"sum of {n} free copies")
    return 0


def cmd_subordinate(args) -> int:
    spec = _load(args)
    if spec.eta is None:
        raise SchemaError("eta", "subordinate needs eta")
    mu = spec.mu
    Rn = opnorm(apply_cp(spec.eta, np.eye(spec.d))) * mu.R
    z = parse_z(args.z, spec.d, max(8.0, 2.5 * Rn))
    if mu.realization is not None and spec.eta_admissible:
        mu = realization_only(mu)
        nu = eta_power_compression(mu, spec.eta, 2, tol=spec.tol)
    else:
        nu, _ = _power_law(spec, spec.max_degree)
    sub = subordination_F(mu, nu, z, spec.tol)
    results = [("inverse-composition", sub.F_z, sub.residual)]
    try:
        F2 = F_via_eta_identity(spec.eta, nu, z, spec.tol, g_nu=sub.G_nu)
        res2 = opnorm(_resolvent_law(mu)(F2) - sub.G_nu)
        results.append(("eta-identity", F2, res2))
    except SingularMapError:
        pass
    rows = []
    for route, F, res in results:
        for i in range(F.shape[0]):
            for j in range(F.shape[1]):
                rows.append((route, i, j, z[i, j].real, z[i, j].imag, F[i, j].real, F[i, j].imag, res,
                             sub.nu_tail))
    write_csv(args.out, ["route", "i", "j", "z_re", "z_im", "F_re", "F_im", "residual", "G_nu_tail"], rows)
    return 0


def cmd_density(args) -> int:
    spec = _load(args)
    if spec.d != 1:
        raise SchemaError("B.d", "density is defined for d = 1")
    grid = parse_grid(args.grid, tuple(spec.options.get("grid", (-4.0, 4.0, 161))))
    eps = args.eps if args.eps is not None else float(spec.options.get("eps", 0.01))
    eta = None if _is_identity(spec.eta) else spec.eta
    out = density_scalar(spec.mu, grid, eps, spec.tol, eta=eta)
    write_csv(args.out, ["x", "density", "certificate"], [tuple(r) for r in out])
    if args.figure:
        from .plotting import density_figure

        density_figure(args.figure, out[:, 0], out[:, 1], eps)
    return 0


def shipped_problems() -> list[Path]:
    root = resources.files("opfree") / "problems"
    return sorted(Path(str(p)) for p in root.iterdir() if p.name.endswith(".json"))


def cmd_verify(args) -> int:
    if args.spec:
        report = verify(_load(args))
    else:
        report = {"problems": {}}
        for path in shipped_problems():
            report["problems"][path.stem] = verify(parse_problem(path))
        report["ok"] = all(r["ok"] for r in report["problems"].values())
    write_json(args.out, report)
    return 0 if report["ok"] else 1


def cmd_verify_section5(args) -> int:
    spec = _load(args)
    if spec.mu.realization is None:
        raise SchemaError("mu", "verify-section5 needs a law with a realization")
    n = _copies(args, spec)
    L_small = args.depth if args.depth is not None else 4
    real = realization_only(spec.mu).realization
    try:
        phi = build_phi(real, n, L_small, spec.tol)
        rep = verify_intertwine(phi, real, n, L_small)
    except OpfreeError as exc:
        write_json(args.out, {"ok": False, "error": f"{type(exc).__name__}: {exc}"})
        return 1
    worst = max([rep["max_unitarity_violation"], rep["max_intertwine_violation"]] + list(rep["k0_cases"].values()))
    rep["ok"] = worst <= PHI_MAP_TOL
    rep["n"] = n
    write_json(args.out, rep)
    return 0 if rep["ok"] else 1


HANDLERS = {
    "moments": cmd_moments,
    "cumulants": cmd_cumulants,
    "convolve-power": cmd_convolve_power,
    "nfold-sum": cmd_nfold_sum,
    "subordinate": cmd_subordinate,
    "density": cmd_density,
    "verify": cmd_verify,
    "verify-section5": cmd_verify_section5,
}


def run(command: str, spec_path=None, out_path="-", **flags) -> int:
    """Programmatic equivalent of ``opfree COMMAND --spec ... --out ...``."""
    argv = [command]
    if spec_path is not None:
        argv += ["--spec", str(spec_path)]
    argv += ["--out", str(out_path)]
    for key, val in flags.items():
        if val is None or val is False:
            continue
        flag = "--" + key.replace("_", "-")
        # the = form keeps values such as "-3,3,61" from reading as flags
        argv.append(flag if val is True else f"{flag}={val}")
    return main(argv)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return HANDLERS[args.command](args)
    except OpfreeError as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, SchemaError):
            err["path"] = exc.path
        print(json.dumps(err), file=sys.stderr)
        return exc.exit_code
    except (ValueError, FileNotFoundError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
