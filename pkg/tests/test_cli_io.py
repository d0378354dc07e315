import json

import numpy as np
import pytest

from artifact import spectral_core as sc
from artifact.cli_io import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_RESOLUTION,
    RunConfig,
    export_field,
    import_field,
    import_spacetime,
    main,
    parse_config,
    write_vtk,
)
from artifact.convex_step import ConfigError
from artifact.verification import run_verify_suite

INI = """
[exponents]
p = 2
q = 1
s = 2
s_tilde = 1
[grid]
n_x = 32
n_t = 8
[scheduler]
mode = assum
mollify = false
[run]
eps = 0.2
"""


def test_parse_ini_and_overrides(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(INI)
    cfg = parse_config(path, {"n_x": 64, "eps": None, "p": 2.0})
    assert cfg.n_x == 64 and cfg.eps == 0.2 and cfg.mollify is False
    assert cfg.overrides == {"n_x": {"file": 32, "flag": 64}}


def test_ini_roundtrip(tmp_path):
    cfg = RunConfig(p=3.0, q=1.0, s=1.5, n_x=64, K=3, kappa=8.0, mollify=True)
    path = tmp_path / "back.ini"
    path.write_text(cfg.to_ini())
    back = parse_config(path)
    assert back.to_dict() == cfg.to_dict()


def test_json_config(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"exponents": {"p": 2, "s": 2}, "grid": {"n_x": 128}, "K": 3}))
    cfg = parse_config(path)
    assert cfg.n_x == 128 and cfg.K == 3


@pytest.mark.parametrize("text, match", [
    ("[exponents]\np = 1\n", "p > 1"),
    ("[exponents]\nbogus = 1\n", "unknown"),
    ("[grid]\nn_x = 48\n", "power of two"),
    ("[exponents]\np = abc\n", "bad value"),
    ("[scheduler]\nmode = other\n", "mode"),
])
def test_rejected_configs_carry_a_reason(tmp_path, text, match):
    path = tmp_path / "bad.ini"
    path.write_text(text)
    with pytest.raises(ConfigError, match=match):
        parse_config(path)


def test_missing_file():
    with pytest.raises(ConfigError):
        parse_config("/nonexistent/run.ini")


def test_export_roundtrip(tmp_path):
    g = sc.Grid(3, 8, 4)
    rng = np.random.default_rng(0)
    v = sc.VectorField(g, rng.normal(size=(3,) + g.shape))
    export_field(v, "v", tmp_path, vtk=True)
    assert np.array_equal(import_field(tmp_path / "v").values, v.values)
    head = (tmp_path / "v.vtk").read_bytes()[:200]
    assert b"STRUCTURED_POINTS" in head and b"VECTORS v double" in head
    st = sc.SeparableField(g, [(sc.Harmonic(1), rng.normal(size=g.shape))])
    files = export_field(st, "rho", tmp_path / "st")
    assert (tmp_path / "st" / "rho_index.json") in files
    back = import_spacetime(tmp_path / "st" / "rho_index.json")
    for m in range(g.n_t):
        assert np.array_equal(back.slice(m), st.slice(m))


def test_vtk_layout(tmp_path):
    g = sc.Grid(3, 4, 4)
    vals = np.arange(64, dtype=float).reshape(g.shape)
    path = write_vtk(tmp_path / "f.vtk", vals, g, "f")
    raw = path.read_bytes()
    data = np.frombuffer(raw[raw.index(b"LOOKUP_TABLE default\n") + 21:], dtype=">f8")
    # x varies fastest in VTK point order
    assert data[1] == vals[1, 0, 0] and data[4] == vals[0, 1, 0]
    with pytest.raises(ValueError):
        write_vtk(tmp_path / "g.vtk", np.zeros((4, 4)), sc.Grid(2, 4, 4), "g")


def test_cli_validate_and_reject(tmp_path, capsys):
    assert main(["validate-params", "--p", "2", "--s", "2", "--out", str(tmp_path)]) == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert data["N"] > 0 and data["schedule"]["sigma"] == 1
    assert main(["validate-params", "--p", "0.9"]) == EXIT_CONFIG
    err = json.loads(capsys.readouterr().err)
    assert "p > 1" in err["reason"]


def test_cli_resolution_guard(tmp_path):
    out = tmp_path / "m"
    assert main(["mikado", "--n-x", "64", "--out", str(out)]) == EXIT_RESOLUTION
    prov = json.loads((out / "provenance.json").read_text())
    assert prov["exit_code"] == EXIT_RESOLUTION and "resolution_guard" in prov["realised"]
    assert main(["step", "--n-x", "64", "--n-t", "8", "--out", str(tmp_path / "s")]) == EXIT_RESOLUTION


def test_cli_mikado_layout(tmp_path):
    out = tmp_path / "m"
    assert main(["mikado", "--n-x", "128", "--dump", "--out", str(out)]) == EXIT_OK
    assert (out / "reports" / "mikado.csv").exists()
    assert (out / "fields" / "Phi_0.bin").exists()
    prov = json.loads((out / "provenance.json").read_text())
    assert set(prov) >= {"config", "version", "wall_clock_s", "realised", "overrides"}
    assert prov["overrides"]["n_x"]["flag"] == 128


def test_cli_verify_subset(tmp_path):
    out = tmp_path / "v"
    code = main(["verify", "--only", "spectral", "temporal", "schedule", "--out", str(out)])
    assert code == EXIT_OK
    rows = (out / "reports" / "verify.csv").read_text().splitlines()
    assert rows[0] == "group,check,value,tol,passed,hard,note"
    assert {r.split(",")[0] for r in rows[1:]} == {"spectral", "temporal", "schedule"}


def test_verify_suite_groups():
    res = run_verify_suite(n_x=128, only=["antidiv", "coeffs", "mikado"])
    assert not res.hard_failures, res.hard_failures
    assert res.exit_code() == 0
    with pytest.raises(ValueError):
        run_verify_suite(only=["nope"])
    res = run_verify_suite(n_x=64, only=["mikado"])
    assert res.exit_code() == 3
