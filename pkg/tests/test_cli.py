import json
from pathlib import Path

import numpy as np
import pytest

from sgm import cli
from sgm import config as C
from sgm import fields as F
from sgm import sgmf


def _tree(root):
    root = Path(root)
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file() and p.name != "timing.json"
    }


def _small_fluid(tmp_path, **extra):
    cfg = {
        "preset": "euler2d_kelvin",
        "grid": {"nx": 16, "ny": 16},
        "dt": 2e-3,
        "T": 2e-2,
        "save_every": 5,
        "loop": {"center": [1.5, 1.5], "radius": 0.6, "n": 32},
    }
    cfg.update(extra)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


# -- config -------------------------------------------------------------------------


@pytest.mark.parametrize("preset", sorted(C.PRESETS))
def test_config_roundtrip_is_a_fixed_point(preset):
    cfg = C.normalize({"preset": preset})
    assert C.parse(C.emit(cfg)) == cfg
    assert C.emit(C.parse(C.emit(cfg))) == C.emit(cfg)


def test_config_errors(tmp_path):
    with pytest.raises(C.ConfigError):
        C.normalize({"preset": "nope"})
    with pytest.raises(C.ConfigError):
        C.normalize({"realization": "rigid_body", "dt": 0.1})
    with pytest.raises(C.ConfigError):
        C.normalize({"realization": "rigid_body", "dt": 0.3, "T": 1.0})
    with pytest.raises(C.ConfigError):
        C.normalize({"preset": "rigid_body", "model": {"inertia": [1, 0, 1]}})
    with pytest.raises(C.ConfigError):
        C.normalize({"preset": "rigid_body", "bogus": 1})
    with pytest.raises(C.ConfigError) as info:
        C.normalize({"preset": "euler2d_kelvin", "noise": {"xis": ["missing.sgmf"]}}, base_dir=tmp_path)
    assert "missing.sgmf" in str(info.value)
    with pytest.raises(C.ConfigError):
        C.parse("{not json")


def test_modes_to_array_matches_formula():
    g = F.Grid2D(16, 16, Lx=2.0, Ly=3.0)
    X, Y = g.coords
    arr = C.modes_to_array([{"kx": 1, "ky": 2, "amp": 0.5, "phase": 0.1}], g)
    assert np.allclose(arr, 0.5 * np.cos(2 * np.pi * (X / 2.0 + 2 * Y / 3.0) + 0.1))


# -- commands --------------------------------------------------------------------


def test_run_rigid_body_writes_artifacts(tmp_path):
    cfgp = tmp_path / "rb.json"
    cfgp.write_text(json.dumps({"preset": "rigid_body", "T": 1.0}))
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(cfgp), "--out", str(out), "--quiet"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "ok" and summary["n_steps"] == 1000
    header = (out / "states.csv").read_text().splitlines()[0]
    assert header.startswith("t,m1,m2,m3")
    stored = C.load(out / "config.json")
    assert stored["T"] == 1.0 and stored["output"] == "."


def test_run_fluid_writes_snapshots_and_circulation(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(_small_fluid(tmp_path)), "--out", str(out), "--quiet"]) == 0
    snaps = sorted((out / "states").glob("omega_*.sgmf"))
    assert len(snaps) == 3
    assert sgmf.load_field(snaps[-1]).grid == F.Grid2D(16, 16)
    rows = (out / "circulation.csv").read_text().splitlines()
    assert rows[0] == "t,I,cumulative_source" and len(rows) == 12


def test_run_is_reproducible(tmp_path):
    cfgp = _small_fluid(tmp_path)
    for name in ("a", "b"):
        assert cli.main(["run", "--config", str(cfgp), "--out", str(tmp_path / name), "--quiet"]) == 0
    assert _tree(tmp_path / "a") == _tree(tmp_path / "b")


def test_exit_codes(tmp_path, capsys):
    assert cli.main(["verify", "nosuchsuite", "--quiet"]) == 2
    assert cli.main(["run", "--quiet"]) == 2
    assert cli.main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    assert cli.main(["bogus"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"preset": "euler2d_kelvin", "noise": {"xis": ["gone.sgmf"]}}))
    assert cli.main(["run", "--config", str(bad)]) == 2
    assert "gone.sgmf" in capsys.readouterr().err


def test_nonzero_mean_vorticity_is_a_usage_error(tmp_path):
    cfgp = _small_fluid(tmp_path, initial={"vorticity": [{"kx": 0, "ky": 0, "amp": 1.0}]})
    assert cli.main(["run", "--config", str(cfgp), "--out", str(tmp_path / "o"), "--quiet"]) == 2


def test_cfl_violation_is_a_numeric_failure(tmp_path):
    cfgp = _small_fluid(tmp_path, dt=0.5, T=1.0, noise={"amplitude": 40.0})
    assert cli.main(["run", "--config", str(cfgp), "--out", str(tmp_path / "o"), "--quiet"]) == 3


def test_verify_duality_and_inconclusive_kiw(tmp_path):
    assert cli.main(["verify", "duality", "--n-samples", "50", "--out", str(tmp_path), "--quiet"]) == 0
    rep = json.loads((tmp_path / "verify_duality.json").read_text())
    assert rep["status"] == "pass"
    assert cli.main(["verify", "kiw", "--dt", "4e-2,2e-2", "--T", "0.08", "--paths", "2", "--quiet"]) == 1


def test_schema_command(capsys):
    assert cli.main(["schema"]) == 0
    assert json.loads(capsys.readouterr().out)["type"] == "object"


def test_eof_command(tmp_path):
    g = F.Grid2D(16, 16)
    X, Y = g.coords
    snaps = tmp_path / "snaps"
    snaps.mkdir()
    rng = np.random.default_rng(0)
    for i in range(6):
        psi = rng.normal() * np.sin(X) * np.sin(Y) + rng.normal() * np.cos(2 * X + Y)
        sgmf.save_field(F.velocity_from_stream(psi, g), snaps / f"u_{i:03d}.sgmf")
    out = tmp_path / "modes"
    assert cli.main(["eof", str(snaps), "2", str(out), "--quiet"]) == 0
    assert sorted(p.name for p in out.glob("*.sgmf")) == ["mean.sgmf", "mode_000.sgmf", "mode_001.sgmf"]
    rows = (out / "singular_values.csv").read_text().splitlines()
    assert rows[0] == "mode,singular_value,variance_fraction" and len(rows) == 3
    # rank is 2, so asking for 3 modes is refused
    assert cli.main(["eof", str(snaps), "3", str(tmp_path / "m3"), "--quiet"]) == 2
    assert cli.main(["eof", str(snaps), "9", str(tmp_path / "m9"), "--quiet"]) == 2
    assert cli.main(["eof", str(snaps), "two", str(tmp_path / "mx"), "--quiet"]) == 2


def test_eof_modes_feed_back_as_noise(tmp_path):
    g = F.Grid2D(16, 16)
    X, Y = g.coords
    mode = tmp_path / "xi.sgmf"
    sgmf.save_field(F.velocity_from_stream(0.1 * np.sin(X + Y), g), mode)
    cfgp = _small_fluid(tmp_path, noise={"xis": ["xi.sgmf"]})
    assert cli.main(["run", "--config", str(cfgp), "--out", str(tmp_path / "o"), "--quiet"]) == 0
    assert json.loads((tmp_path / "o" / "summary.json").read_text())["noise_channels"] == 1


# -- ensembles -------------------------------------------------------------------


def test_single_member_ensemble_matches_run(tmp_path):
    cfgp = _small_fluid(tmp_path, ensemble=1, seed=4)
    assert cli.main(["run", "--config", str(cfgp), "--out", str(tmp_path / "run"), "--quiet"]) == 0
    assert cli.main(["ensemble", "--config", str(cfgp), "--out", str(tmp_path / "ens"), "--quiet"]) == 0
    assert _tree(tmp_path / "run") == _tree(tmp_path / "ens" / "member_000")


def test_parallel_and_sequential_ensembles_are_identical(tmp_path):
    cfg = C.load(_small_fluid(tmp_path, ensemble=8))
    cli.run_ensemble(cfg, tmp_path / "seq", workers=1)
    cli.run_ensemble(cfg, tmp_path / "par", workers=4)
    seq, par = _tree(tmp_path / "seq"), _tree(tmp_path / "par")
    assert seq == par
    assert sum(k.endswith("summary.json") for k in seq) == 9
