import json
import subprocess
import sys

import pytest

from oamthermal import __version__
from oamthermal.analysis import thermal_pdf
from oamthermal.cli import EXIT_CONFIG, EXIT_NUMERIC, main
from oamthermal.experiments import config_hash
from oamthermal.tables import read_spectrum, read_table, write_spectrum

SPECTRUM = {"experiment": "spectrum", "seed": 7, "window": 10, "counts": 20000,
            "source": {"kind": "thermal", "alpha": 0.3, "l_max": 12}}
TURB = {"experiment": "turbulence", "seed": 3, "counts": None,
        "input": {"kind": "thermal", "alpha": 0.34, "l_max": 8},
        "turbulence": {"strength": 0.5, "waist": 0.001, "grid_samples": 128},
        "n_screens": 2}


def write(tmp_path, config, name="c.json"):
    path = tmp_path / name
    path.write_text(json.dumps(config))
    return path


def run(*argv):
    return main([str(a) for a in argv])


def test_spectrum_run_and_manifest(tmp_path, capsys):
    out = tmp_path / "out"
    assert run("spectrum", write(tmp_path, SPECTRUM), "--out", out) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["package_version"] == __version__
    assert manifest["config_hash"] == config_hash(SPECTRUM)
    assert set(manifest["files"]) == {"ideal.csv", "measured.csv", "measured_fit.csv"}
    meta, cols = read_table(out / "measured.csv")
    assert meta["seed"] == "7" and meta["config_hash"] == config_hash(SPECTRUM)
    assert list(cols) == ["ell", "p", "error", "count"]
    assert json.loads(capsys.readouterr().out)["experiment"] == "spectrum"


def test_rerun_byte_identical(tmp_path):
    cfg = write(tmp_path, SPECTRUM)
    run("spectrum", cfg, "--out", tmp_path / "a")
    run("spectrum", cfg, "--out", tmp_path / "b")
    for f in ("ideal.csv", "measured.csv", "measured_fit.csv", "manifest.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_seed_changes_output(tmp_path):
    run("spectrum", write(tmp_path, SPECTRUM), "--out", tmp_path / "a")
    run("spectrum", write(tmp_path, dict(SPECTRUM, seed=8), "d.json"), "--out", tmp_path / "b")
    assert (tmp_path / "a" / "measured.csv").read_bytes() != (tmp_path / "b" / "measured.csv").read_bytes()


def test_pump_and_aperture_sweeps(tmp_path):
    pump = {"experiment": "pump-sweep", "seed": 1, "counts": None, "collection_waist": 0.001,
            "pump_waists": [0.002, 0.001], "l_max": 8, "grid_samples": 128}
    assert run("pump-sweep", write(tmp_path, pump), "--out", tmp_path / "p") == 0
    _, cols = read_table(tmp_path / "p" / "sweep.csv")
    assert float(cols["alpha"][1]) > float(cols["alpha"][0])
    ap = {"experiment": "aperture-sweep", "seed": 1, "counts": None,
          "source": {"kind": "thermal", "alpha": 0.35, "l_max": 8},
          "diameters": [None, 0.0005], "grid_samples": 256}
    assert run("aperture-sweep", write(tmp_path, ap, "a.json"), "--out", tmp_path / "a") == 0
    _, cols = read_table(tmp_path / "a" / "sweep.csv")
    assert cols["diameter"][0] == "open"
    assert float(cols["alpha"][1]) > float(cols["alpha"][0])


@pytest.mark.parametrize("kind", ["turbulence", "coherent-turbulence", "ensemble"])
def test_turbulence_kinds(tmp_path, kind):
    cfg = dict(TURB, experiment=kind, n_masks=2)
    assert run("turbulence", write(tmp_path, cfg), "--out", tmp_path / "t") == 0
    manifest = json.loads((tmp_path / "t" / "manifest.json").read_text())
    if kind == "ensemble":
        assert "after.csv" in manifest["files"]
    else:
        assert {"after_00.csv", "after_01.csv", "screens.csv"} <= set(manifest["files"])


def test_config_errors_exit_2(tmp_path):
    assert run("spectrum", tmp_path / "missing.json", "--out", tmp_path) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("spectrum", bad, "--out", tmp_path) == EXIT_CONFIG
    no_seed = {k: v for k, v in SPECTRUM.items() if k != "seed"}
    assert run("spectrum", write(tmp_path, no_seed), "--out", tmp_path) == EXIT_CONFIG
    assert run("turbulence", write(tmp_path, SPECTRUM, "s.json"), "--out", tmp_path) == EXIT_CONFIG
    assert run("spectrum", write(tmp_path, dict(SPECTRUM, source={"kind": "laser"}), "k.json"),
               "--out", tmp_path) == EXIT_CONFIG


def test_numeric_errors_exit_3(tmp_path):
    cfg = dict(SPECTRUM, source={"kind": "thermal", "alpha": -1.0})
    assert run("spectrum", write(tmp_path, cfg), "--out", tmp_path / "o") == EXIT_NUMERIC
    flat = tmp_path / "flat.csv"
    flat.write_text("ell,count\n-1,0\n0,10\n1,0\n")
    assert run("fit", flat) == EXIT_NUMERIC


def test_fit_and_kl_commands(tmp_path, capsys):
    a = write_spectrum(tmp_path / "a.csv", thermal_pdf(0.49, 12))
    b = write_spectrum(tmp_path / "b.csv", thermal_pdf(0.6, 12))
    assert run("fit", a, "--out", tmp_path / "fit.csv") == 0
    record = json.loads(capsys.readouterr().out)
    assert record["alpha"] == pytest.approx(0.49, abs=1e-6)
    _, cols = read_table(tmp_path / "fit.csv")
    assert float(cols["alpha"][0]) == pytest.approx(0.49, abs=1e-6)
    assert run("kl", a, a) == 0
    assert float(capsys.readouterr().out) == 0.0
    assert run("kl", a, b, "--window", "none") == 0
    nats = float(capsys.readouterr().out)
    assert run("kl", a, b, "--window", "none", "--bits") == 0
    bits = float(capsys.readouterr().out)
    assert nats > 0 and bits == pytest.approx(nats / 0.6931471805599453)


def test_spectrum_table_round_trip(tmp_path):
    p = thermal_pdf(0.3, 5)
    s = read_spectrum(write_spectrum(tmp_path / "s.csv", p, {"note": "x"}))
    assert s.p.tolist() == p.p.tolist() and s.ells.tolist() == p.ells.tolist()


def test_module_entry_point(tmp_path):
    a = write_spectrum(tmp_path / "a.csv", thermal_pdf(0.49, 12))
    res = subprocess.run([sys.executable, "-m", "oamthermal", "fit", str(a)],
                         capture_output=True, text=True, check=True)
    assert json.loads(res.stdout)["method"] == "min-kl"
