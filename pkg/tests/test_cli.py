import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from periodic_lsm import cli, greens
from periodic_lsm.config import load_config, parse_config
from periodic_lsm.errors import ConfigError

SMALL = {
    "wave": {"k": 1.5, "alpha": 0.0},
    "profile": {"kind": "sinusoidal", "height": 1.0, "amplitude": 0.3},
    "dissection": {"impedance_intervals": [[0.0, 3.141592653589793]], "lambda": 1.0},
    "solver": {"n_nodes": 128},
    "data": {"noise": 0.01, "seed": 0},
    "inversion": {"resolution": [8, 6]},
}


def _write(tmp_path, cfg, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return str(path)


def _with(base, **sections):
    cfg = json.loads(json.dumps(base))
    for key, val in sections.items():
        cfg[key] = {**cfg.get(key, {}), **val} if isinstance(val, dict) else val
    return cfg


# -- config ----------------------------------------------------------------

def test_defaults_filled_in():
    cfg = parse_config(SMALL)
    prof = cfg.build_profile()
    assert cfg.b_value(prof) == pytest.approx(1.8)
    assert cfg.M_value() == 61
    assert cfg.wave.trunc_value == 30
    r = cfg.region(1.8)
    assert (r.z1_lo, r.z1_hi, r.z2_lo, r.z2_hi) == pytest.approx((0.0, 2 * np.pi, 0.1, 1.75))


def test_theta_sets_alpha():
    cfg = parse_config(_with(SMALL, wave={"alpha": None, "theta": 1.0}))
    assert cfg.wave.alpha_value == pytest.approx(1.5 * np.cos(1.0))


@pytest.mark.parametrize("bad, needle", [
    ({"wave": {"k": -1.0}}, "wave.k"),
    ({"data": {"b": 1.2}}, "data.b"),
    ({"data": {"M": 40}}, "data.M"),
    ({"dissection": {"lambda": 0.0}}, "lambda"),
    ({"solver": {"n_nodes": 129}}, "n_nodes"),
    ({"profile": {"kind": "sinusoidal", "height": 1.0, "amplitude": 0.3, "wiggle": 2}}, "wiggle"),
    ({"inversion": {"region": {"z2_hi": 1.79}}}, "z2_hi"),
    ({"surprise": 1}, "surprise"),
])
def test_invalid_configs_name_the_constraint(bad, needle):
    cfg = _with(SMALL, **bad)
    if "profile" in bad:
        cfg["profile"] = bad["profile"]
    with pytest.raises(ConfigError) as exc:
        parse_config(cfg)
    assert needle in str(exc.value)


def test_digest_stable_and_sensitive():
    a = parse_config(SMALL).digest()
    assert a == parse_config(json.loads(json.dumps(SMALL))).digest()
    assert a != parse_config(_with(SMALL, data={"seed": 1})).digest()


def test_load_rejects_non_mapping(tmp_path):
    p = tmp_path / "x.yaml"
    p.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config(p)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")


def test_shipped_configs_load():
    for path in sorted(Path(__file__).resolve().parents[1].glob("configs/*.yaml")):
        load_config(path)


# -- subcommands -----------------------------------------------------------

def test_forward_flat_dirichlet(tmp_path):
    cfg = {"wave": {"k": 1.5, "theta": 1.1}, "profile": {"kind": "flat", "height": 1.0},
           "solver": {"n_nodes": 128}}
    assert cli.main(["forward", "--config", _write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 0
    lines = (tmp_path / "o" / "efficiencies.csv").read_text().splitlines()
    total = float(lines[-1].split(",")[1])
    assert abs(total - 1) < 1e-3
    res = dict(line.split(",") for line in (tmp_path / "o" / "residuals.csv").read_text().splitlines()[1:])
    assert float(res["dirichlet_residual"]) < 1e-10
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert set(manifest["outputs"]) == {"rayleigh.csv", "efficiencies.csv", "residuals.csv"}


def test_forward_needs_theta(tmp_path, capsys):
    assert cli.main(["forward", "--config", _write(tmp_path, SMALL), "--out", str(tmp_path)]) == 2
    assert "theta" in capsys.readouterr().err


def test_b_below_profile_exits_2(tmp_path, capsys):
    path = _write(tmp_path, _with(SMALL, data={"b": 1.0}))
    assert cli.main(["synth", "--config", path, "--out", str(tmp_path)]) == 2
    assert "data.b" in capsys.readouterr().err


def test_wood_anomaly_exits_3(tmp_path, capsys):
    path = _write(tmp_path, _with(SMALL, wave={"k": 1.0, "alpha": 0.0}))
    assert cli.main(["synth", "--config", path, "--out", str(tmp_path)]) == 3
    assert "WoodAnomaly" in capsys.readouterr().err


def test_undersampled_exits_2(tmp_path):
    path = _write(tmp_path, _with(SMALL, data={"M": 60}))
    assert cli.main(["synth", "--config", path, "--out", str(tmp_path)]) == 2


@pytest.fixture(scope="module")
def synth_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("synth")
    path = _write(tmp, SMALL)
    assert cli.main(["synth", "--config", path, "--out", str(tmp / "a")]) == 0
    assert cli.main(["synth", "--config", path, "--out", str(tmp / "b")]) == 0
    return tmp, path


def test_synth_is_byte_identical(synth_run):
    tmp, _ = synth_run
    for name in ("matrix.csv", "manifest.json"):
        assert (tmp / "a" / name).read_bytes() == (tmp / "b" / name).read_bytes()
    manifest = json.loads((tmp / "a" / "manifest.json").read_text())
    assert abs(manifest["noise_frobenius_ratio"] - 0.01) < 1e-12
    assert len(manifest["config_sha256"]) == 64


def test_manifest_hash_is_git_blob_sha1(synth_run):
    import hashlib
    tmp, _ = synth_run
    data = (tmp / "a" / "matrix.csv").read_bytes()
    manifest = json.loads((tmp / "a" / "manifest.json").read_text())
    want = hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()
    assert manifest["outputs"]["matrix.csv"]["git_sha1"] == want


def test_invert_runs_and_is_deterministic(synth_run, capsys):
    tmp, path = synth_run
    matrix = str(tmp / "a" / "matrix.csv")
    for out, threads in (("i1", "1"), ("i2", "0")):
        assert cli.main(["invert", "--config", path, "--matrix", matrix, "--out", str(tmp / out),
                         "--threads", threads]) == 0
    assert "contrast" in capsys.readouterr().out
    for name in ("indicator.csv", "surface.csv", "manifest.json"):
        assert (tmp / "i1" / name).read_bytes() == (tmp / "i2" / name).read_bytes()
    rows = (tmp / "i1" / "indicator.csv").read_text().splitlines()
    assert rows[0] == "z1,z2,indicator,alpha_used,discrepancy,flag" and len(rows) == 1 + 8 * 6


def test_invert_single_point_grid(synth_run, tmp_path):
    tmp, _ = synth_run
    path = _write(tmp_path, _with(SMALL, inversion={"resolution": [1, 1]}))
    assert cli.main(["invert", "--config", path, "--matrix", str(tmp / "a" / "matrix.csv"),
                     "--out", str(tmp_path / "o")]) == 0
    assert len((tmp_path / "o" / "indicator.csv").read_text().splitlines()) == 2


def test_invert_corrupt_matrix_exits_2(synth_run, tmp_path, capsys):
    _, path = synth_run
    bad = tmp_path / "bad.csv"
    bad.write_text("#k=1.5\nre,im\n1.0,abc\n")
    assert cli.main(["invert", "--config", path, "--matrix", str(bad), "--out", str(tmp_path)]) == 2
    assert "line 3" in capsys.readouterr().err
    assert cli.main(["invert", "--config", path, "--matrix", str(tmp_path / "none.csv"),
                     "--out", str(tmp_path)]) == 2


def test_invert_rejects_mismatched_matrix(synth_run, tmp_path, capsys):
    tmp, _ = synth_run
    path = _write(tmp_path, _with(SMALL, wave={"k": 1.6}))
    assert cli.main(["invert", "--config", path, "--matrix", str(tmp / "a" / "matrix.csv"),
                     "--out", str(tmp_path)]) == 2
    assert "does not match" in capsys.readouterr().err


def test_selftest_passes_and_reports(capsys):
    assert cli.main(["selftest", "--samples", "5"]) == 0
    out = capsys.readouterr().out
    for name in ("quasi_periodicity", "reciprocity", "mode_split_identity", "helmholtz_fd"):
        assert name in out
    assert "residual=" in out


def test_selftest_catches_branch_sign_mutation(monkeypatch, capsys):
    def wrong_branch(d):
        d = np.asarray(d, dtype=float)
        return np.where(d > 0, np.sqrt(np.abs(d)) + 0j, -1j * np.sqrt(np.abs(d)))

    monkeypatch.setattr(greens, "_beta_branch", wrong_branch)
    assert cli.main(["selftest", "--samples", "5"]) == 1
    assert "FAIL" in capsys.readouterr().out
