import copy
import json

import numpy as np
import pytest

from critdamp import assemble, builtin_model
from critdamp.cli import run
from critdamp.model import ModelError
from critdamp.modelfile import load_model, model_from_dict, model_to_dict, save_model

SDOF1K_FILE = {
    "M": [[1.0]],
    "K": [[1.0]],
    "params": ["nu", "zeta"],
    "kernels": [{"relax": "nu", "C": [{"i": 0, "j": 0, "value": {"param": "zeta", "multiplier": 2.0}}]}],
    "design_plane": {"p": "nu", "q": "zeta", "fixed": {}, "ranges": {"p": [0.0, 0.25], "q": [0.0, 4.0]}},
}


@pytest.mark.parametrize("preset", ["sdof1k", "sdof2k", "chain4dof"])
def test_round_trip_coefficients(preset, tmp_path):
    model, plane = builtin_model(preset)
    path = tmp_path / "m.json"
    save_model(model, plane, path)
    model2, plane2 = load_model(path)
    assert plane2 == plane
    a, b = assemble(model, plane), assemble(model2, plane2)
    r = np.random.default_rng(5)
    for _ in range(20):
        p, q = r.uniform(*plane.p_range), r.uniform(*plane.q_range)
        ca, cb = a.coeffs(p, q), b.coeffs(p, q)
        assert np.allclose(ca, cb, rtol=1e-14, atol=1e-14 * np.abs(ca).max())


def test_sdof2k_preset_aliases_damping():
    model, _ = builtin_model("sdof2k")
    assert (model.n, model.N) == (1, 2)
    data = model_to_dict(*builtin_model("sdof2k"))
    values = [k["C"][0]["value"] for k in data["kernels"]]
    assert values[0] == values[1] and values[0]["param"] == "zeta"


def test_asymmetric_stiffness_is_named():
    bad = copy.deepcopy(SDOF1K_FILE)
    bad["M"] = [[1.0, 0.0], [0.0, 1.0]]
    bad["K"] = [[2.0, -1.0], [-0.5, 1.0]]
    with pytest.raises(ModelError) as err:
        model_from_dict(bad)
    assert any("K[0][1]" in p and "K[1][0]" in p for p in err.value.problems)


def test_unknown_parameter_is_named():
    bad = copy.deepcopy(SDOF1K_FILE)
    bad["kernels"][0]["C"][0]["value"] = {"param": "zetta", "multiplier": 2.0}
    with pytest.raises(ModelError) as err:
        model_from_dict(bad)
    assert any("kernels[0].C[0].value" in p and "zetta" in p for p in err.value.problems)


def test_problems_are_listed_exhaustively():
    bad = copy.deepcopy(SDOF1K_FILE)
    bad["kernels"][0]["relax"] = "mu"
    bad["kernels"][0]["form"] = "gamma"
    del bad["design_plane"]["ranges"]
    bad["extra"] = 1
    with pytest.raises(ModelError) as err:
        model_from_dict(bad)
    text = "\n".join(err.value.problems)
    for fragment in ("extra", "kernels[0].relax", "kernels[0].form", "design_plane.ranges"):
        assert fragment in text


def test_file_model_matches_preset(tmp_path):
    path = tmp_path / "sdof.json"
    path.write_text(json.dumps(SDOF1K_FILE))
    a = assemble(*load_model(path))
    b = assemble(*builtin_model("sdof1k"))
    assert np.allclose(a.coeffs(0.1, 0.7), b.coeffs(0.1, 0.7), rtol=1e-14)


def test_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ModelError, match="invalid JSON"):
        load_model(path)


def _json(capsys):
    return json.loads(capsys.readouterr().out)


def test_cli_init_points(capsys):
    assert run(["init-points", "--preset", "sdof1k", "--prescribe", "zeta=1"]) == 0
    pts = _json(capsys)
    assert len(pts) == 2
    assert pts[1]["nu"] == pytest.approx(0.134884, abs=1e-4)
    assert pts[1]["lam"] == pytest.approx(-3.38298, abs=1e-4)


def test_cli_init_points_chain(capsys, tmp_path):
    assert run(["init-points", "--preset", "chain4dof", "--prescribe", "nu=0.06", "--out", str(tmp_path)]) == 0
    pts = _json(capsys)
    assert [round(p["zeta"], 4) for p in pts] == [0.5326, 0.7295, 1.2522, 2.1449]
    assert json.loads((tmp_path / "init_points.json").read_text()) == pts


def test_cli_classify(capsys):
    assert run(["classify", "--preset", "sdof1k", "--at", "zeta=1.0,nu=0.1"]) == 0
    out = _json(capsys)
    assert (out["complex_pairs"], out["real_roots"]) == (0, 3)


def test_cli_coeffs_and_plane_override(capsys):
    args = ["coeffs", "--preset", "sdof2k", "--plane", "p=nu1,q=nu2", "--fix", "zeta=5", "--at", "nu1=0.3,nu2=1.1"]
    assert run(args) == 0
    c = _json(capsys)["coeffs"]
    n1, n2, z = 0.3, 1.1, 5.0
    assert c == pytest.approx([1, n1 + n2 + 2 * z, 1 + n1 * n2 + z * (n1 + n2), n1 + n2, n1 * n2])


def test_cli_singular(capsys):
    assert run(["singular", "--preset", "sdof1k", "--kind", "S2"]) == 0
    pts = _json(capsys)
    assert len(pts) == 1 and pts[0]["x"] == pytest.approx(-(3**0.5), abs=1e-6)


def test_cli_reference(capsys):
    assert run(["reference", "--count", "3", "--nu-max", "0.1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "nu,zeta_L,zeta_U,zeta_L_approx,zeta_U_approx,x_L_approx,x_U_approx"
    assert len(lines) == 4
    assert float(lines[1].split(",")[1]) == 1.0


def test_cli_trace_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    assert run(["trace", "--preset", "sdof1k", "--seed", "zeta=1", "--out", str(out)]) == 0
    files = sorted(p.name for p in out.glob("curve_*.csv"))
    assert files == ["curve_000.csv", "curve_001.csv"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert [c["termination"] for c in manifest["curves"]] == ["SingularDxx", "SingularDxx"]
    header, *rows = (out / "curve_000.csv").read_text().splitlines()
    assert header == "p,q,lam,res_D,res_Dx"
    assert len(rows) > 10
    summary = capsys.readouterr().out.splitlines()
    assert len(summary) == 2 and all("SingularDxx" in s for s in summary)


def test_cli_trace_is_deterministic(tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / f"r{k}"
        assert run(["trace", "--preset", "chain4dof", "--seed", "nu=0.06", "--out", str(d)]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(d.glob("curve_*.csv"))})
    assert outs[0] == outs[1] and len(outs[0]) == 4


def test_cli_exit_codes(tmp_path, capsys):
    assert run(["classify", "--preset", "sdof1k", "--at", "zeta=abc"]) == 2
    assert run(["classify", "--preset", "sdof1k", "--at", "omega=1,nu=0"]) == 2
    assert run(["trace", "--preset", "sdof1k"]) == 2
    assert run(["trace", "--preset", "sdof1k", "--seed", "zeta=1", "--h0", "-1", "--out", str(tmp_path)]) == 2
    assert run(["init-points", "--model", str(tmp_path / "missing.json"), "--prescribe", "nu=0"]) == 2
    assert run(["init-points", "--preset", "sdof1k", "--preset", "sdof2k", "--prescribe", "nu=0"]) == 2
    assert run(["coeffs", "--preset", "sdof1k", "--plane", "p=nu,q=omega", "--at", "nu=0,omega=1"]) == 2
    # zeta = 0.5 never meets a critical curve
    assert run(["trace", "--preset", "sdof1k", "--seed", "zeta=0.5", "--out", str(tmp_path / "e")]) == 3
    err = capsys.readouterr().err
    assert "omega" in err


def test_cli_model_file_errors_listed(tmp_path, capsys):
    bad = copy.deepcopy(SDOF1K_FILE)
    bad["K"] = [[-1.0]]
    bad["kernels"][0]["C"][0]["value"] = "ghost"
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    assert run(["init-points", "--model", str(path), "--prescribe", "zeta=1"]) == 2
    err = capsys.readouterr().err
    assert "ghost" in err
