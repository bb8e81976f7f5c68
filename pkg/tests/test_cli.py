import json

import pytest

from romres.cli import main
from romres.errors import RomresError
from romres.scenarios import ExperimentConfig, run_scenario


def test_grids_verb(tmp_path, capsys):
    assert main(["grids", "--outdir", str(tmp_path)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert any("grid_zolotarev_m5.csv" in line for line in out)
    assert (tmp_path / "fig-grids" / "manifest.json").exists()


def test_invert1d_verb_quick(tmp_path):
    rc = main(["invert1d", "--outdir", str(tmp_path), "--n-fine", "149",
               "--n-coarse", "99", "--m0", "3", "--n-gn", "1",
               "--h-T", "1e-4", "--T", "50"])
    assert rc == 0
    assert (tmp_path / "invert1d" / "reconstruction.csv").exists()
    assert (tmp_path / "invert1d" / "history.csv").exists()


def test_config_file_overrides_flags(tmp_path):
    conf = {"n_fine": 149, "n_coarse": 99, "m0": 3, "n_gn": 1,
            "h_T": 1e-4, "T": 50.0, "phantom": "rL"}
    cpath = tmp_path / "conf.json"
    cpath.write_text(json.dumps(conf))
    rc = main(["invert1d", "--outdir", str(tmp_path), "--phantom", "rQ",
               "--config", str(cpath)])
    assert rc == 0
    manifest = json.loads((tmp_path / "invert1d" / "manifest.json").read_text())
    assert manifest["config"]["phantom"] == "rL"  # file wins over the flag


def test_unknown_config_key(tmp_path):
    cpath = tmp_path / "conf.json"
    cpath.write_text(json.dumps({"bogus": 1}))
    rc = main(["invert1d", "--outdir", str(tmp_path), "--config", str(cpath)])
    assert rc == 2


def test_inverse_crime_guard():
    with pytest.raises(RomresError):
        ExperimentConfig(scenario="invert1d", n_fine=199, n_coarse=199)


def test_unknown_scenario():
    with pytest.raises(RomresError):
        run_scenario(ExperimentConfig(scenario="nope"))


def test_synthesize_scenario(tmp_path):
    cfg = ExperimentConfig(scenario="synthesize", n_fine=99, n_coarse=79,
                           T=10.0, h_T=1e-3, epsilon=1e-3, seed=4,
                           outdir=str(tmp_path))
    outputs = run_scenario(cfg)
    names = {p.name for p in outputs}
    assert {"timeseries.csv", "timeseries.json", "manifest.json"} <= names
    meta = json.loads((tmp_path / "synthesize" / "timeseries.json").read_text())
    assert meta["epsilon"] == 1e-3 and meta["seed"] == 4


def test_rerun_bitwise_identical(tmp_path):
    cfg = ExperimentConfig(scenario="synthesize", n_fine=99, n_coarse=79,
                           T=10.0, h_T=1e-3, epsilon=1e-3, seed=4,
                           outdir=str(tmp_path))
    run_scenario(cfg)
    first = (tmp_path / "synthesize" / "timeseries.csv").read_bytes()
    run_scenario(cfg)
    assert (tmp_path / "synthesize" / "timeseries.csv").read_bytes() == first
