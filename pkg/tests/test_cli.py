import json

import pytest

from noisymh.cli import main
from noisymh.experiments import ConfigError, resolve_config


def test_list_presets(capsys):
    assert main(["list-presets"]) == 0
    out = capsys.readouterr().out
    assert "fig7-left" in out and "prop7" in out and "smc-unbiased" in out


def test_classify_preset_and_csv(tmp_path, capsys):
    assert main(["classify", "--preset", "prop7", "--N", "3"]) == 0
    assert capsys.readouterr().out.strip() == "transient"
    path = tmp_path / "walk.csv"
    path.write_text("m,p,q\n1,0.2,0\n2,0.2,0.6\n")
    assert main(["classify", "--csv", str(path), "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["verdict"] == "geometrically-ergodic"


def test_classify_errors(capsys):
    assert main(["classify", "--preset", "nope"]) == 2
    assert main(["classify", "--preset", "prop3", "--M", "10"]) == 2
    assert main(["classify"]) == 2


def test_verify(capsys):
    assert main(["verify", "prop6"]) == 0
    assert capsys.readouterr().out.startswith("PASS prop6")
    assert main(["verify", "bogus"]) == 2


def test_run_and_manifest_round_trip(tmp_path, capsys):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--preset", "fig7-left", "--iterations", "500", "--out", str(out1), "--gnuplot"]) == 0
    manifest = json.loads((out1 / "manifest.json").read_text())
    assert manifest["config"]["iterations"] == 500
    assert (out1 / "plots.gp").exists()
    assert main(["run", "--config", str(out1 / "manifest.json"), "--out", str(out2)]) == 0
    for name in manifest["outputs"]:
        if name.endswith(".csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


def test_run_needs_input(capsys):
    assert main(["run"]) == 2


def test_config_errors(tmp_path, capsys):
    with pytest.raises(ConfigError, match="kernels"):
        resolve_config({"experiment": "chains"})
    with pytest.raises(ConfigError, match="preset"):
        resolve_config(preset="fig99")
    with pytest.raises(ConfigError, match="iterations"):
        resolve_config({"iterations": -1}, preset="fig1")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"preset": "fig1", "kernels": ["exact"]}))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "kernels" in capsys.readouterr().err


def test_pmmh_run_small(tmp_path, capsys):
    assert main(["run", "--preset", "pmmh", "--iterations", "200", "--seed", "1", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "observations.csv").exists()
    assert (tmp_path / "summary.csv").read_text().count("\n") == 4
