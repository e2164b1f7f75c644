import csv
import json

import numpy as np
import pytest
import yaml

from gpclt.cli import EXIT_CONFIG, EXIT_OK, main
from gpclt.config import ConfigError, load


def _write(tmp_path, cfg, name="c.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg))
    return str(p)


def _density(out, N="10000"):
    lines = [ln for ln in (out / f"density_N{N}.csv").read_text().splitlines() if not ln.startswith("#")]
    rows = list(csv.DictReader(lines))
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


def test_missing_config_file(tmp_path, capsys):
    assert main(["scattering", "--config", str(tmp_path / "nope.yaml")]) == EXIT_CONFIG
    assert "--config" in capsys.readouterr().err


def test_observable_without_name(tmp_path, capsys):
    cfg = {"observables": [{"preset": "cos", "n0": [1, 0, 0]}]}
    assert main(["limit", "--config", _write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "observables[0].name" in capsys.readouterr().err


def test_fock_n_max_message(tmp_path):
    with pytest.raises(ConfigError, match="exceeds N"):
        load(_write(tmp_path, {"fock": {"n_max": 50, "N": 40}}))


def test_sweep_needs_three_points(tmp_path):
    with pytest.raises(ConfigError, match="at least three points"):
        load(_write(tmp_path, {"sweep": {"N": [100, 1000]}}))


def test_unknown_key(tmp_path):
    with pytest.raises(ConfigError, match="unknown key"):
        load(_write(tmp_path, {"bogus": 1}))


def test_bad_seed():
    assert main(["verify", "--seed", "-1"]) == EXIT_CONFIG


def test_scattering_deterministic(tmp_path):
    cfg = _write(tmp_path, {"N": [1000]})
    for d in ("a", "b"):
        assert main(["scattering", "--config", cfg, "--out", str(tmp_path / d)]) == EXIT_OK
    for name in ("scattering.csv", "scattering_summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_zero_potential_limit(tmp_path):
    cfg = {"potential": {"kind": "zero", "R": 0.5}, "N": [10000]}
    out = tmp_path / "o"
    assert main(["limit", "--config", _write(tmp_path, cfg), "--out", str(out)]) == EXIT_OK
    doc = json.loads((out / "limit.json").read_text())
    res = doc["results"]["N=10000"]
    assert res["Sigma"]["re"][0][0] == pytest.approx(2.0, abs=1e-12)  # ||fhat||^2 for cos
    assert res["a0"] == 0


def test_cos_limit_variance(tmp_path):
    out = tmp_path / "o"
    assert main(["limit", "--config", _write(tmp_path, {"N": [10000]}), "--out", str(out)]) == EXIT_OK
    res = json.loads((out / "limit.json").read_text())["results"]["N=10000"]
    from gpclt.coefficients import compute_coefficients
    from gpclt.lattice import Momentum, build_mode_set
    from gpclt.scattering import RadialPotential, solve_neumann

    modes = build_mode_set(4, 10000)
    co = compute_coefficients(solve_neumann(RadialPotential.soft_sphere(2.0, 0.5), 10000, 0.49), modes)
    mu = co.mu[modes.index(Momentum((1, 0, 0)))]
    assert res["Sigma"]["re"][0][0] == pytest.approx(2 * np.exp(2 * mu), rel=1e-12)
    assert res["p_1.96_sigma"] == pytest.approx(0.9500042, abs=1e-6)
    d = _density(out)
    assert np.max(np.abs(d["density"] - d["gaussian"])) < 1e-6


def test_report_collates(tmp_path):
    out = tmp_path / "o"
    cfg = _write(tmp_path, {"N": [1000]})
    assert main(["scattering", "--config", cfg, "--out", str(out)]) == EXIT_OK
    assert main(["report", "--config", cfg, "--out", str(out)]) == EXIT_OK
    text = (out / "report.csv").read_text()
    assert "scattering" in text and "config_sha256" in text


def test_report_without_summaries(tmp_path):
    assert main(["report", "--out", str(tmp_path / "empty")]) == EXIT_CONFIG


def test_json_format(tmp_path):
    out = tmp_path / "o"
    assert main(["scattering", "--config", _write(tmp_path, {"N": [1000]}), "--out", str(out),
                 "--format", "json"]) == EXIT_OK
    doc = json.loads((out / "scattering.json").read_text())
    assert doc["columns"][0] == "N" and len(doc["rows"]) == 1
