import json
from pathlib import Path

import numpy as np
import pytest

from rmmfit import cli
from rmmfit.io import (DEFAULT_GEOMETRY, config_from_dict, load_config, provenance_hash, read_json,
                       read_sweep_csv, write_sweep_csv)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_unknown_config_key_raises():
    with pytest.raises(ValueError, match="unknown"):
        config_from_dict(dict(DEFAULT_GEOMETRY, shear_modulus=1.0))


def test_missing_geometry_file_raises(tmp_path):
    with pytest.raises(FileNotFoundError):
        config_from_dict({"geometry_file": "absent.json"}, tmp_path)


def test_shipped_config_loads():
    rc = load_config(CONFIGS / "default.json")
    assert rc.geometry.matrix.mu == 26.32
    assert rc.geometry.inclusion.mu == pytest.approx(26.32e-4)
    assert (rc.macro.mu, rc.macro.mu_star, rc.macro.lam) == (5.9, 0.627, 1.748)
    assert (rc.seed, rc.modes, rc.sizes, rc.model) == (2024, 12, (1, 2, 3), "rmm")


def test_provenance_hash_is_order_independent():
    assert provenance_hash({"a": 1, "b": [1.0, 2.0]}) == provenance_hash({"b": [1.0, 2.0], "a": 1})
    assert provenance_hash({"a": 1}) != provenance_hash({"a": 2})


def test_sweep_csv_roundtrip(tmp_path):
    rows = [{"model": "rmm", "mode": "0", "n": 1.25, "energy": 1 / 3},
            {"model": "het", "mode": "1", "n": 2.0, "energy": 2.5e-7}]
    path = write_sweep_csv(tmp_path / "s.csv", rows, "abc")
    assert read_sweep_csv(path) == rows
    assert path.read_text().startswith("#")


def test_missing_config_is_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["homogenize", "--config", str(tmp_path / "nope.json")])
    assert exc.value.code == 2
    assert "not found" in capsys.readouterr().err


def test_bad_sizes_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main(["reference", "--sizes", "1,-2"])
    assert exc.value.code == 2


def test_non_integer_heterogeneous_size_fails(tmp_path, capsys):
    code = cli.main(["reference", "--sizes", "1.5", "--modes", "canonical", "--out", str(tmp_path)])
    assert code == 1
    assert "integer" in capsys.readouterr().err


def test_cli_homogenize_affine(tmp_path):
    assert cli.main(["homogenize", "--bc", "affine", "--out", str(tmp_path)]) == 0
    d = read_json(tmp_path / "homogenize-affine.json")
    assert len(d["provenance"]) == 64
    c = d["final_params"]["c"]
    assert all(26.32e-4 < c[k] < 51.08 for k in ("mu", "mu_star", "lam"))
    assert d["rows"][-1]["r2"] <= 1e-18 * d["rows"][0]["r2"]


def test_cli_fit_linear_elastic(tmp_path, capsys):
    args = ["fit", "--model", "le", "--modes", "canonical", "--sizes", "1", "--out", str(tmp_path)]
    assert cli.main(args) == 0
    out = capsys.readouterr().out
    files = list(tmp_path.glob("fit-le-*.json"))
    assert len(files) == 1 and str(files[0]) in out
    d = json.loads(files[0].read_text())
    r2 = [row["r2"] for row in d["rows"]]
    assert np.all(np.diff(r2) <= 0)
