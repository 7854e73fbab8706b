import csv
import json
import subprocess
import sys

import pytest

from streamdec.cli import SCHEMA_VERSION, main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, json.loads(out.out), out.err


@pytest.fixture(scope="module")
def nelson_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("nelson")
    assert main(["gen", "nelson", "--n", "256", "--out", str(d)]) == 0
    return d


def test_gen_writes_field(tmp_path, capsys):
    code, doc, _ = run(capsys, "gen", "radial_bump", "--n", "64", "--out", tmp_path)
    assert code == 0 and doc["schema_version"] == SCHEMA_VERSION and doc["command"] == "gen"
    f = json.loads((tmp_path / "f.json").read_text())
    assert f["nx"] == f["ny"] == 64 and len(f["data"]) == 64 * 64


def test_gen_svg(tmp_path, capsys):
    code, _, _ = run(capsys, "gen", "volcano", "--n", "48", "--out", tmp_path, "--svg")
    assert code == 0
    svgs = list(tmp_path.glob("*.svg"))
    assert svgs and svgs[0].read_text().lstrip().startswith("<?xml")


def test_gen_nelson_files(nelson_dir):
    for name in ("f.json", "rho.json", "rho2.json", "v.json"):
        assert (nelson_dir / name).exists()


def test_chain_rule_verdicts(nelson_dir, capsys):
    code, doc, _ = run(capsys, "chain-rule", "--field", nelson_dir / "f.json", "--rho", nelson_dir / "rho.json")
    assert code == 0 and doc["verdict"] == "violated"
    assert doc["defect_rho"] <= doc["threshold"] < doc["defect_beta_rho"]
    # rho_{0,1} itself carries the dipole, so it fails the hypothesis of the property
    code, doc, _ = run(capsys, "chain-rule", "--field", nelson_dir / "f.json", "--rho", nelson_dir / "rho2.json")
    assert code == 0 and doc["verdict"] == "hypothesis-failed"


def test_decompose_two_bumps(tmp_path, capsys):
    run(capsys, "gen", "two_bumps", "--n", "96", "--out", tmp_path)
    out = tmp_path / "dec"
    code, doc, _ = run(capsys, "decompose", "--field", tmp_path / "f.json", "--out", out)
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["components"]) == 2
    assert (out / "component_0.json").exists() and (out / "component_1.json").exists()


def test_trace_csv(tmp_path, capsys):
    run(capsys, "gen", "radial_bump", "--n", "64", "--out", tmp_path)
    code, doc, _ = run(capsys, "trace", "--field", tmp_path / "f.json", "--levels", 4, "--out", tmp_path)
    assert code == 0
    with open(tmp_path / "trace.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert set(rows[0]) == {"level", "curve_id", "vertex_index", "x", "y"}
    assert len({r["level"] for r in rows}) == 4


def test_coarea_and_constancy(tmp_path, capsys):
    run(capsys, "gen", "radial_bump", "--n", "128", "--out", tmp_path)
    code, doc, _ = run(capsys, "coarea", "--field", tmp_path / "f.json", "--levels", 16)
    assert code == 0 and doc["coarea"]["relative_discrepancy"] <= 0.05
    code, doc, _ = run(capsys, "constancy", "--field", tmp_path / "f.json", "--rho", tmp_path / "f.json",
                       "--levels", 8, "--out", tmp_path)
    assert code == 0


def test_sard_report(tmp_path, capsys):
    run(capsys, "gen", "two_bumps", "--n", "96", "--out", tmp_path)
    code, doc, _ = run(capsys, "sard", "--field", tmp_path / "f.json", "--bins", 256, "--out", tmp_path)
    assert code == 0 and doc["wsp"]["verdict"] == "singular-like"
    assert (tmp_path / "histograms.csv").exists()


def test_transport(tmp_path, capsys):
    run(capsys, "gen", "radial_bump", "--n", "64", "--out", tmp_path)
    code, doc, _ = run(capsys, "transport", "--field", tmp_path / "f.json", "--rho", tmp_path / "f.json",
                       "--time", 0.2, "--levels", 8, "--out", tmp_path)
    assert code == 0 and (tmp_path / "rho_t.json").exists()


def test_nonuniq(tmp_path, capsys):
    code, doc, _ = run(capsys, "nonuniq", "--n", 512, "--out", tmp_path)
    assert code == 0
    assert doc["report"]["residual_A"] <= 1e-12 and doc["report"]["residual_B"] <= 1e-6
    assert (tmp_path / "trajectory_A.csv").exists() and (tmp_path / "trajectory_B.csv").exists()


def test_contract_errors_exit_2(tmp_path, capsys):
    code, doc, _ = run(capsys, "decompose", "--field", tmp_path / "missing.json")
    assert code == 2 and "no such file" in doc["error"]["message"]
    bad = tmp_path / "bad.json"
    bad.write_text('{"nx": 3, "ny": 2, "h": 1, "origin": [0, 0], "data": [0, 0]}')
    code, doc, _ = run(capsys, "decompose", "--field", bad)
    assert code == 2 and "length mismatch" in doc["error"]["message"]
    code, doc, _ = run(capsys, "nonuniq", "--time", 2.0, "--out", tmp_path)
    assert code == 2 and doc["error"]["type"]
    code, doc, _ = run(capsys, "gen", "nosuch", "--out", tmp_path)
    assert code == 2


def test_constancy_on_non_monotone_is_contract_error(tmp_path, capsys):
    run(capsys, "gen", "two_bumps", "--n", "64", "--out", tmp_path)
    code, doc, _ = run(capsys, "constancy", "--field", tmp_path / "f.json", "--rho", tmp_path / "f.json")
    assert code == 2 and "expected monotone" in doc["error"]["message"]


def test_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["trace", "--no-such-flag"])
    assert e.value.code == 2


def test_reports_are_deterministic(tmp_path, capsys):
    run(capsys, "gen", "two_bumps_overlap", "--n", "64", "--out", tmp_path)
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        main(["decompose", "--field", str(tmp_path / "f.json"), "--out", str(d)])
        outs.append(capsys.readouterr().out.replace(str(d), "D"))
        outs.append((d / "manifest.json").read_text().replace(str(d), "D"))
    assert outs[0] == outs[2] and outs[1] == outs[3]


def test_console_script_runs():
    r = subprocess.run([sys.executable, "-m", "streamdec.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "streamdec" in r.stdout
