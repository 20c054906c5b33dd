import csv
import json

import numpy as np
import pytest

from opfree.cli import main, run
from opfree.errors import DomainError, SchemaError
from opfree.io import parse_problem

SEMI = {
    "version": "1",
    "B": {"d": 1},
    "eta": {"kraus": [[[1.4142135623730951, 0]]]},
    "mu": {"semicircle": {"variance": 1.0}},
    "options": {"max_degree": 6},
}
MATRIX = {
    "version": "1",
    "B": {"d": 2},
    "eta": {"kraus": [[[1, 0], [0, 1]], [[0.3, [0, 0.2]], [0.1, -0.25]]]},
    "mu": {"random": {"s": 2, "scale": 1.0}},
    "options": {"max_degree": 4, "seed": 7},
}


def _write(tmp_path, obj, name="p.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return path


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_parse_semicircle_problem():
    spec = parse_problem(SEMI)
    assert spec.d == 1 and spec.eta_admissible
    assert np.isclose(spec.eta(np.eye(1))[0, 0], 2.0)


def test_kraus_depth_three_list_of_real_matrices():
    spec = parse_problem({**MATRIX, "eta": {"kraus": [[[1, 0], [0, 1]]]}})
    assert spec.eta.rank == 1
    assert np.allclose(spec.eta(np.diag([1.0, 2.0])), np.diag([1.0, 2.0]))


@pytest.mark.parametrize(
    "mutate,path",
    [
        (lambda p: p.pop("B"), "B"),
        (lambda p: p["B"].pop("d"), "B.d"),
        (lambda p: p.update(version="2"), "version"),
        (lambda p: p.update(mu={"semicircle": {"variance": -1.0}}), "mu"),
    ],
)
def test_schema_errors(mutate, path):
    raw = json.loads(json.dumps(SEMI))
    mutate(raw)
    with pytest.raises(SchemaError) as info:
        parse_problem(raw)
    assert info.value.path.startswith(path)


def test_non_cp_choi_rejected():
    # Choi matrix of the transpose map
    raw = {**MATRIX, "eta": {"choi": [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]]}}
    with pytest.raises(DomainError):
        parse_problem(raw)


def test_missing_d_exit_code(tmp_path, capsys):
    raw = json.loads(json.dumps(SEMI))
    raw["B"].pop("d")
    assert main(["moments", "--spec", str(_write(tmp_path, raw))]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["path"] == "B.d"


def test_convolve_power_csv(tmp_path):
    out = tmp_path / "out.csv"
    assert run("convolve-power", _write(tmp_path, SEMI), out) == 0
    vals = {int(r["k"]): float(r["re"]) for r in _rows(out)}
    assert np.allclose([vals[2], vals[4], vals[6]], [2, 8, 40], atol=1e-10)


def test_moments_full_and_figure(tmp_path):
    out, fig = tmp_path / "m.csv", tmp_path / "m.png"
    assert run("moments", _write(tmp_path, MATRIX), out, figure=fig) == 0
    assert fig.stat().st_size > 0
    assert run("moments", _write(tmp_path, MATRIX), tmp_path / "f.csv", full=True) == 0
    assert "units" in _rows(tmp_path / "f.csv")[0]


def test_determinism(tmp_path):
    spec = _write(tmp_path, MATRIX)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run("cumulants", spec, a)
    run("cumulants", spec, b)
    assert a.read_text() == b.read_text()
    c = tmp_path / "c.csv"
    run("cumulants", spec, c, seed=8)
    assert a.read_text() != c.read_text()


def test_nfold_sum(tmp_path):
    out = tmp_path / "n.csv"
    assert run("nfold-sum", _write(tmp_path, SEMI), out, n=2, degree=4) == 0
    vals = {int(r["k"]): float(r["re"]) for r in _rows(out)}
    assert np.isclose(vals[4], 8.0)


def test_subordinate_routes(tmp_path):
    out = tmp_path / "s.csv"
    assert run("subordinate", _write(tmp_path, MATRIX), out, z=8) == 0
    rows = _rows(out)
    assert {r["route"] for r in rows} == {"inverse-composition", "eta-identity"}
    assert max(float(r["residual"]) for r in rows if r["route"] == "inverse-composition") <= 1e-12


def test_density_semicircle_power(tmp_path):
    out, fig = tmp_path / "d.csv", tmp_path / "d.png"
    assert run("density", _write(tmp_path, SEMI), out, grid="-3,3,61", eps=0.01, figure=fig) == 0
    dens = np.array([float(r["density"]) for r in _rows(out)])
    # semicircle of variance 2: peak 1/(pi sqrt 2)
    assert abs(dens.max() - 1 / (np.pi * np.sqrt(2))) < 5e-3
    assert fig.exists()


def test_bad_grid_exit_code(tmp_path):
    assert run("density", _write(tmp_path, SEMI), tmp_path / "x.csv", grid="1,0,5") == 2


def test_verify_problem(tmp_path):
    out = tmp_path / "v.json"
    assert run("verify", _write(tmp_path, MATRIX), out) == 0
    rep = json.loads(out.read_text())
    assert rep["ok"] and rep["v_identities"]["ok"] and rep["cond_exp"]["ok"]


def test_verify_section5(tmp_path):
    out = tmp_path / "s5.json"
    assert run("verify-section5", _write(tmp_path, MATRIX), out, n=3, depth=3) == 0
    rep = json.loads(out.read_text())
    assert rep["ok"] and rep["max_intertwine_violation"] <= 1e-10


def test_missing_spec_file_exit_code(tmp_path):
    assert run("moments", tmp_path / "nope.json", tmp_path / "o.csv") == 2


def test_env_tolerance(monkeypatch):
    monkeypatch.setenv("OPFREE_TOL", "1e-7")
    assert parse_problem(SEMI).tol.eq_tol == 1e-7
    spec = parse_problem({**SEMI, "options": {"tolerances": {"newton_tol": 1e-11}}})
    assert spec.tol.eq_tol == 1e-7 and spec.tol.newton_tol == 1e-11


def test_bad_tolerance_key():
    with pytest.raises(SchemaError) as info:
        parse_problem({**SEMI, "options": {"tolerances": {"foo": 1}}})
    assert info.value.path == "options.tolerances"


def test_verify_shipped_suite(tmp_path):
    out = tmp_path / "all.json"
    assert run("verify", None, out) == 0
    rep = json.loads(out.read_text())
    assert rep["ok"] and len(rep["problems"]) >= 4
