import json
import warnings

import numpy as np
import pytest

from extrusim import scenario as scn
from extrusim.cli import main, read_history, run
from extrusim.errors import ScenarioError
from extrusim.scenario import (bundled_path, equilibrium_scenario, load_scenario, loads_scenario,
                               perturbed_scenario, regularity_scenario, validate_dict)


def codes(d):
    issues, _ = validate_dict(d)
    return sorted(i.code for i in issues)


def test_bundled_equilibrium_loads_cleanly():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        sc = load_scenario(bundled_path("equilibrium.scn"))
    assert sc.name == "equilibrium"
    assert validate_dict(sc.to_dict())[0] == []


@pytest.mark.parametrize("name", ["equilibrium.scn", "perturbed.scn"])
def test_round_trip_is_byte_identical(name):
    text = bundled_path(name).read_text()
    sc = loads_scenario(text)
    assert sc.dumps() == text
    assert loads_scenario(sc.dumps()).dumps() == text


def test_bundled_files_match_builders():
    assert bundled_path("perturbed.scn").read_text() == perturbed_scenario().dumps()
    assert bundled_path("equilibrium.scn").read_text() == equilibrium_scenario().dumps()


def test_inflow_regime_names_offending_time():
    d = equilibrium_scenario().to_dict()
    d["signals"]["F_in"] = {"kind": "pwl", "t": [0.0, 1.0, 10.0], "v": [1 / 3, 1.2, 1.2]}
    with pytest.raises(ScenarioError) as err:
        loads_scenario(json.dumps(d))
    msg = str(err.value)
    assert "[E031] signals.F_in" in msg and "at t=" in msg
    t = float(msg.split("at t=")[1].split()[0])
    # the ratio reaches 1 at t = (2/3) / (1.2 - 1/3); samples are 0.005 apart
    assert 0.0 <= t - (2 / 3) / (1.2 - 1 / 3) <= 0.005


def test_all_violations_are_reported():
    d = equilibrium_scenario().to_dict()
    d["params"]["K_d"] = -1.0
    d["initial"]["l0"] = 3.0
    d["horizon"] = -1.0
    d["solver"] = {"bogus": 1}
    d["initial"]["f_p"][0] = 0.5
    found = codes(d)
    # bad parameters suppress the checks that depend on them
    assert found == ["E010", "E050", "E070"]
    d = equilibrium_scenario().to_dict()
    d["initial"]["l0"] = 3.0
    d["initial"]["f_p"] = [0.5] * len(d["initial"]["x"])
    d["output_times"] = [0.0, 20.0]
    assert codes(d) == ["E020", "E041", "E051"]


def test_error_codes_are_distinct():
    names = [n for n in dir(scn) if n.startswith("E_")]
    vals = [getattr(scn, n) for n in names]
    assert len(set(vals)) == len(vals) >= 15


@pytest.mark.parametrize("mutate, code", [
    (lambda d: d["params"].pop("eta"), "E001"),
    (lambda d: d["params"].__setitem__("S_eff", 2.0), "E011"),
    (lambda d: d["equilibrium"].__setitem__("l_e", 1.5), "E021"),
    (lambda d: d["equilibrium"].__setitem__("N_e", 0.0), "E022"),
    (lambda d: d["signals"].__setitem__("N", {"kind": "pwl", "t": [0, 5], "v": [1, -1]}), "E030"),
    (lambda d: d["initial"].__setitem__("f_p", [1.5] * 5), "E040"),
    (lambda d: d["initial"].__setitem__("x", [0, 0.5, 0.4, 0.8, 1]), "E060"),
])
def test_single_invariant_codes(mutate, code):
    d = equilibrium_scenario().to_dict()
    mutate(d)
    assert code in codes(d)


def test_second_order_compatibility():
    assert codes(regularity_scenario().to_dict()) == []
    d = perturbed_scenario().to_dict()
    d["check_compat2"] = True
    assert codes(d) == ["E042"]


def test_equilibrium_both_modes_agree(tmp_path):
    sc = equilibrium_scenario(horizon=1.0)
    rep = run(sc, "both", tmp_path)
    assert rep.ok
    assert max(rep.comparison.values()) <= 1e-8


def test_perturbed_report_ratios(perturbed, tmp_path):
    rep = run(perturbed, "characteristic", tmp_path)
    assert rep.ok and rep.windows
    assert rep.max_ratio <= 0.5 * (1 + perturbed.solver_config().slack)
    assert rep.estimates["fp_dev_w1inf"] > 0
    saved = json.loads((tmp_path / "report.json").read_text())
    assert saved["windows"][0]["iterations"] == rep.windows[0]["iterations"]


def test_fv_cfl_failure_is_clean(perturbed, tmp_path, capsys):
    rep = run(perturbed, "fv", None, dt=0.05, cells=100)
    assert not rep.ok and "CFLError" in rep.failures[0]
    status = main(["simulate", str(bundled_path("perturbed.scn")), "--mode", "fv", "--dt", "0.05",
                   "--cells", "100", "--out", str(tmp_path)])
    assert status == 1
    assert "CFL" in capsys.readouterr().err


def test_runs_are_deterministic(tmp_path):
    sc = equilibrium_scenario(horizon=0.3)
    sc.output_times = [0.0, 0.15, 0.3]
    a, b = tmp_path / "a", tmp_path / "b"
    run(sc, "both", a, grid=65)
    run(sc, "both", b, grid=65)
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    assert files and files == sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_cli_simulate_validate_compare(tmp_path, monkeypatch, capsys):
    sc = equilibrium_scenario(horizon=0.2)
    sc.output_times = [0.0, 0.2]
    path = tmp_path / "eq.scn"
    sc.save(path)
    assert main(["validate", str(path)]) == 0
    monkeypatch.setenv("EXTRUSIM_OUT", str(tmp_path / "envout"))
    assert main(["simulate", str(path), "--mode", "both", "--grid", "33", "--micro-step", "0.002"]) == 0
    out = tmp_path / "envout"
    assert (out / "characteristic" / "interface.csv").read_text().startswith("t,l,fp1,Fd,dP\n")
    assert (out / "fv" / "snapshot_001.csv").read_text().startswith("x,f_p,M_p,T_p,M_f,T_f\n")
    hist = read_history(out / "characteristic")
    assert hist.snapshots[-1].x.size == 33
    np.testing.assert_allclose(hist.snapshots[-1].f_p, 1 / 3)
    capsys.readouterr()
    assert main(["compare", str(out / "characteristic"), str(out / "fv")]) == 0
    res = json.loads(capsys.readouterr().out)
    assert set(res) == {"f_p", "M_p", "T_p", "M_f", "T_f", "l"}


def test_cli_rejects_invalid_scenario(tmp_path, capsys):
    d = equilibrium_scenario().to_dict()
    d["initial"]["l0"] = -1
    p = tmp_path / "bad.scn"
    p.write_text(json.dumps(d))
    assert main(["validate", str(p)]) == 2
    assert "E020" in capsys.readouterr().err
    assert main(["validate", str(tmp_path / "missing.scn")]) == 2
