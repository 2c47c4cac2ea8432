import json

import numpy as np
import pytest

from conewave.cli import main, parse_kv, parse_range
from conewave.errors import ConfigError, InfeasibleSpec
from conewave.families import FamilySpec, make_rng, random_wave_family
from conewave.runner import ExperimentConfig, config_from_dict, load_config, run, write_csv
from conewave.waves import TorusDomain, energy, margin, wave_packet


def test_family_declared_class():
    spec = FamilySpec(period=64.0, grid_points=128, count=6, atoms=40, min_margin=0.2)
    fam = random_wave_family(spec, 7, "t")
    assert len(fam) == 6
    for w in fam:
        assert margin(w) >= 0.2 - 1e-3
        assert energy(w) == pytest.approx(1.0, abs=1e-12)
        assert w.n_atoms == 40


def test_family_dispersion_cap():
    spec = FamilySpec(period=64.0, grid_points=128, count=3, atoms=10, dispersion=0.25)
    for w in random_wave_family(spec, 1, "t"):
        u = w.xi / np.linalg.norm(w.xi, axis=1, keepdims=True)
        ang = np.arctan2(u[:, 1], u[:, 0])
        assert ang.max() - ang.min() <= 0.25 + 1e-12


def test_family_determinism():
    spec = FamilySpec(count=3, atoms=20)
    a = random_wave_family(spec, 11, "x")
    b = random_wave_family(spec, 11, "x")
    c = random_wave_family(spec, 11, "y")
    assert [w.to_json() for w in a] == [w.to_json() for w in b]
    assert a[0].to_json() != c[0].to_json()
    assert make_rng(3, "e", 2).random() == make_rng(3, "e", 2).random()


def test_family_infeasible():
    with pytest.raises(InfeasibleSpec):
        random_wave_family(FamilySpec(period=16.0, grid_points=64, atoms=5, dispersion=1e-3), 0)
    with pytest.raises(InfeasibleSpec):
        random_wave_family(FamilySpec(period=8.0, grid_points=32, atoms=10_000), 0)


def test_parse_helpers():
    assert parse_kv("x=32,32,t=0,r=16") == {"x": [32.0, 32.0], "t": [0.0], "r": [16.0]}
    assert parse_kv("x=(1.5, 2) side=8") == {"x": [1.5, 2.0], "side": [8.0]}
    assert parse_range("0..2") == [0, 1, 2]
    assert parse_range("0,3") == [0, 3]
    with pytest.raises(ConfigError):
        parse_kv("32,32")
    with pytest.raises(ConfigError):
        parse_kv("x=a")
    with pytest.raises(ConfigError):
        parse_range("a..b")


def test_config_validation(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text('[run]\nexperiment = "bluecone"\n[domain]\nperiodd = 64\n')
    with pytest.raises(ConfigError, match=r"domain\.periodd \(line 4\)"):
        load_config(p)
    with pytest.raises(ConfigError, match="empty sweep"):
        config_from_dict({"sweep": {"R": []}})
    with pytest.raises(ConfigError, match="unknown experiment"):
        config_from_dict({"run": {"experiment": "nope"}})
    with pytest.raises(ConfigError):
        config_from_dict({"sweep": {"R": [1000.0]}})
    assert main(["--config", str(p), "bilinear"]) == 2
    p.write_text("[sweep]\nR = []\n")
    assert main(["--config", str(p), "bilinear"]) == 2
    p.write_text("not toml [")
    assert main(["--config", str(p), "bilinear"]) == 2


def _doublecone_cfg(threads):
    return ExperimentConfig(experiment="doublecone", count=2, atoms=20, threads=threads,
                            sweep={"r": [2.0, 4.0], "R": [16.0]})


def test_csv_determinism_across_threads():
    a = write_csv(run(_doublecone_cfg(1)))
    b = write_csv(run(_doublecone_cfg(4)))
    assert a == b
    assert a.splitlines()[0] == "experiment,pair,r,R,value,err_est,seed,config_hash"
    assert len(a.splitlines()) == 1 + 4


def test_cli_exit_codes(tmp_path):
    ok = tmp_path / "ok.toml"
    ok.write_text('[run]\nexperiment = "bluecone"\n[family]\ncount = 1\natoms = 20\n'
                  "[sweep]\nR = [4, 8, 16]\n[tolerance]\nslope_max = 0.8\n")
    out = tmp_path / "out.csv"
    assert main(["--config", str(ok), "--csv", str(out), "bilinear"]) == 0
    assert out.read_text().startswith("experiment,wave,R,value")
    strict = tmp_path / "strict.toml"
    strict.write_text(ok.read_text().replace("slope_max = 0.8", "slope_max = -1.0"))
    assert main(["--config", str(strict), "--csv", str(out), "bilinear"]) == 1


def test_cli_nullform_exponents(tmp_path, capsys):
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"p": 2, "beta0": 0, "beta_plus": 0, "beta_minus": "1/2",
                                "alpha1": "1/2", "alpha2": "1/2"}))
    code = main(["nullform", "--check-exponents", str(good)])
    rep = json.loads(capsys.readouterr().out)
    assert code == 0 and rep["admissible"]
    good.write_text(json.dumps({"p": "3/2", "beta0": 0, "beta_plus": 0, "beta_minus": "1/2",
                                "alpha1": "1/2", "alpha2": "1/2"}))
    assert main(["nullform", "--check-exponents", str(good)]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"p": 2, "bogus": 1}))
    assert main(["nullform", "--check-exponents", str(bad)]) == 2
    assert main(["nullform"]) == 2


def test_cli_localize_and_packets(tmp_path, capsys):
    dom = TorusDomain(2, 64.0, 128)
    w = wave_packet(dom, "red", 0, (1.5, 0.0), 0.06, x0=(32.0, 32.0), min_margin=0.3)
    wf = tmp_path / "w.json"
    wf.write_text(w.to_json())
    out = tmp_path / "loc.json"
    rep = tmp_path / "rep.json"
    assert main(["localize", "--wave", str(wf), "--disk", "x=32,32,t=0,r=16",
                 "--out", str(out), "--report", str(rep)]) == 0
    assert json.loads(rep.read_text())
    assert main(["localize", "--wave", str(wf), "--disk", "x=32,32,r=16"]) == 2
    pk = tmp_path / "pk"
    assert main(["packets", "--wave", str(wf), "--cube", "x=32,32,t=0,side=16",
                 "--out", str(pk)]) == 0
    index = json.loads((pk / "index.json").read_text())
    assert index["reconstruction_residual"] <= 1e-10
    assert len(index["files"]) == index["significant"] > 0
    assert main(["localize", "--wave", str(tmp_path / "missing.json"), "--disk", "x=1,1,t=0,r=1"]) == 2
