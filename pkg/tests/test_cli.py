import json
from pathlib import Path

import pytest
import yaml

from sphindex.cli.configs import ConfigError, build_dist, build_link, load_config, validate_config
from sphindex.cli.main import main


def write_yaml(path, tree):
    path.write_text(yaml.safe_dump(tree))
    return str(path)


@pytest.fixture
def runs_config(tmp_path):
    return write_yaml(
        tmp_path / "runs.yaml",
        {
            "kind": "sgd_runs",
            "seed": 3,
            "d": 24,
            "link": {"kind": "hermite", "coeffs": [0, 0, 1.0]},
            "dist": {"kind": "gaussian"},
            "schedule": {"name": "s2", "eps": 0.5},
            "steps": 1500,
            "trials": 4,
            "record_points": 60,
            "groups": [{"init": "half_sphere", "label": "random"}],
        },
    )


def test_unknown_keys_rejected(tmp_path):
    cfg = write_yaml(tmp_path / "bad.yaml", {"kind": "sgd_runs", "bogus": 1})
    assert main(["runs", "--config", cfg]) == 2


def test_unknown_kind_rejected():
    with pytest.raises(ConfigError):
        validate_config({"kind": "mystery"})


def test_kind_command_mismatch(tmp_path, runs_config):
    assert main(["sweep", "--config", runs_config, "--out", str(tmp_path / "o")]) == 2


def test_missing_config_file(tmp_path):
    assert main(["audit", "--config", str(tmp_path / "nope.yaml")]) == 2


def test_build_link_and_dist_errors():
    with pytest.raises(ConfigError):
        build_link({"kind": "wavelet"})
    with pytest.raises(ConfigError):
        build_dist({"kind": "gaussian"})  # missing dimension


def test_runs_outputs_and_reproducibility(tmp_path, runs_config):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["runs", "--config", runs_config, "--out", str(out1)]) == 0
    assert main(["runs", "--config", runs_config, "--out", str(out2)]) == 0
    for name in ("trajectories.csv", "runs_summary.csv"):
        b1 = (out1 / name).read_bytes()
        assert b1 == (out2 / name).read_bytes()
        assert b1.splitlines()[0].decode().count(",") >= 3
        meta = json.loads((out1 / (name + ".meta.json")).read_text())
        assert meta["seed"] == 3 and "config_sha256" in meta
    header = (out1 / "trajectories.csv").read_text().splitlines()[0]
    assert header == "init,trial,t,m,r,grad_norm,l4sq"
    header = (out1 / "runs_summary.csv").read_text().splitlines()[0]
    assert header == "init,trial,tau_half,tau_strong,m_final,status"
    assert (out1 / "runs.svg").exists()


def test_runs_seed_override_changes_output(tmp_path, runs_config):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    main(["runs", "--config", runs_config, "--out", str(out1)])
    main(["runs", "--config", runs_config, "--out", str(out2), "--seed", "99"])
    assert (out1 / "runs_summary.csv").read_bytes() != (out2 / "runs_summary.csv").read_bytes()


def test_no_plots_flag(tmp_path, runs_config):
    out = tmp_path / "noplot"
    main(["runs", "--config", runs_config, "--out", str(out), "--no-plots"])
    assert not (out / "runs.svg").exists()


def test_landscape_outputs(tmp_path):
    cfg = write_yaml(
        tmp_path / "land.yaml",
        {"kind": "landscape_curve", "degree": 4, "d_list": [50, 75, 100], "m_points": 81},
    )
    out = tmp_path / "land"
    assert main(["landscape", "--config", cfg, "--out", str(out)]) == 0
    zeros = dict(
        (int(row.split(",")[0]), float(row.split(",")[1]))
        for row in (out / "largest_zeros.csv").read_text().splitlines()[1:]
    )
    assert zeros[50] == pytest.approx(0.31, abs=0.01)
    # largest zeros shrink like sqrt(1/d)
    assert zeros[100] / zeros[50] == pytest.approx((50 / 100) ** 0.5, rel=0.15)
    assert zeros[75] / zeros[50] == pytest.approx((50 / 75) ** 0.5, rel=0.15)
    curve = (out / "landscape_curve.csv").read_text().splitlines()
    last_cols = curve[-1].split(",")
    assert float(last_cols[1]) == 1.0 and float(last_cols[2]) == pytest.approx(1.0, abs=1e-12)
    assert (out / "landscape.svg").read_text().startswith("<svg")


def test_sweep_empty_dlist_is_config_error(tmp_path):
    cfg = write_yaml(
        tmp_path / "sweep.yaml",
        {
            "kind": "scaling_sweep", "link": {"kind": "identity"},
            "dist": {"kind": "gaussian"}, "schedule": {"name": "s1", "eps": 0.25},
            "d_list": [], "trials": 4,
        },
    )
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_sweep_single_dimension_reports_nan_slope(tmp_path, capsys):
    cfg = write_yaml(
        tmp_path / "sweep.yaml",
        {
            "kind": "scaling_sweep", "seed": 4, "link": {"kind": "identity"},
            "dist": {"kind": "gaussian"}, "schedule": {"name": "s1", "eps": 0.25},
            "d_list": [24], "trials": 6, "horizon_factor": 20.0,
        },
    )
    out = tmp_path / "o"
    assert main(["sweep", "--config", cfg, "--out", str(out)]) == 0
    captured = capsys.readouterr()
    assert "underdetermined" in captured.err
    fit = (out / "scaling_fit.csv").read_text().splitlines()[1]
    assert fit.split(",")[0] == "nan"


def test_sweep_two_dimensions_fit(tmp_path):
    cfg = write_yaml(
        tmp_path / "sweep.yaml",
        {
            "kind": "scaling_sweep", "seed": 4, "link": {"kind": "identity"},
            "dist": {"kind": "gaussian"}, "schedule": {"name": "s1", "eps": 0.25},
            "d_list": [16, 64], "trials": 10, "horizon_factor": 20.0,
        },
    )
    out = tmp_path / "o"
    assert main(["sweep", "--config", cfg, "--out", str(out)]) == 0
    rows = (out / "ensemble.csv").read_text().splitlines()
    assert rows[0] == "d,trial,tau_half,tau_strong,m_final,status"
    assert len(rows) == 1 + 2 * 10


def test_audit_outputs_pass_matrix(tmp_path):
    cfg = write_yaml(
        tmp_path / "audit.yaml",
        {"kind": "polynomial_audit", "j_max": 8, "d_list": [10, 40]},
    )
    out = tmp_path / "audit"
    assert main(["audit", "--config", cfg, "--out", str(out)]) == 0
    rows = (out / "audit.csv").read_text().splitlines()
    assert rows[0] == "check,j,d,value,bound,passed"
    assert all(row.endswith("True") for row in rows[1:])


def test_perturb_outputs(tmp_path):
    cfg = write_yaml(
        tmp_path / "pert.yaml",
        {
            "kind": "perturbation_report", "seed": 5, "d": 40,
            "link": {"kind": "hermite", "coeffs": [0, 0, 1.0]},
            "dist": {"kind": "product", "eta": "uniform"},
            "n_samples": 20000, "m_grid": [0.0, 0.4, 0.8],
            "stein_suite": True, "w1": {"n_subspaces": 2, "n_per_subspace": 128},
        },
    )
    out = tmp_path / "pert"
    assert main(["perturb", "--config", cfg, "--out", str(out)]) == 0
    rows = (out / "perturbation_report.csv").read_text().splitlines()
    assert rows[0] == "theta_id,m,delta_L,se,delta_gradL,se_grad,chi,stein_lhs,stein_rhs,w1_lb"
    assert len(rows) == 4


def test_entry_point_installed():
    import shutil

    assert shutil.which("sphindex") is not None


def test_environment_variable_out_dir(tmp_path, runs_config, monkeypatch):
    target = tmp_path / "envout"
    monkeypatch.setenv("SPHINDEX_OUT", str(target))
    cfg = load_config(runs_config)
    assert "out" not in cfg
    assert main(["runs", "--config", runs_config, "--no-plots"]) == 0
    assert (target / "runs_summary.csv").exists()
