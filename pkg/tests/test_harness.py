import hashlib
import json

import numpy as np
import pytest

from fourier_qae import cli
from fourier_qae.harness import (
    OUTPUT_ROOT_ENV,
    ConfigError,
    ExperimentConfig,
    resolve,
    run_experiment,
)


def test_aliases_and_defaults(monkeypatch, tmp_path):
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path))
    cfg = resolve(ExperimentConfig.from_dict({"experiment": "fig3"}))
    assert cfg.experiment == "fig3_amplitude_sweep"
    assert cfg.m_values == tuple(range(2, 13)) and cfg.T == 60
    assert cfg.a == pytest.approx(1 / (20 * np.sqrt(2)))
    assert cfg.output_dir == str(tmp_path / "fig3_amplitude_sweep")


def test_fig8_theta_follows_target():
    cfg = resolve(ExperimentConfig("fig8_circuit_noise", output_dir="unused"))
    assert 4 * 5 * cfg.theta == pytest.approx(26.575)


@pytest.mark.parametrize(
    "d",
    [
        {"experiment": "fig99"},
        {"experiment": "fig3", "a": 2.0},
        {"experiment": "fig3", "theta": 2.0},
        {"experiment": "fig3", "mode": "guess"},
        {"experiment": "fig6", "T_values": [5, 0]},
        {"experiment": "fig5", "pauli": "IIZ"},
    ],
)
def test_invalid_configs(d):
    with pytest.raises(ConfigError):
        resolve(ExperimentConfig.from_dict(d))


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"experiment": "fig3", "colour": "red"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"theta": 0.6})


@pytest.fixture(scope="module")
def fig3_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("fig3")
    man = run_experiment(ExperimentConfig("fig3", m_values=(2, 3), output_dir=str(out)))
    return out, man


def test_manifest_hashes_artifacts(fig3_run):
    out, man = fig3_run
    names = {a["path"] for a in man.artifacts}
    assert {"config.json", "summary.csv", "spectrum_m2.csv", "peaks_m3.json"} <= names
    for a in man.artifacts:
        assert hashlib.sha256((out / a["path"]).read_bytes()).hexdigest() == a["sha256"]
    saved = json.loads((out / "manifest.json").read_text())
    assert saved["config"]["m_values"] == [2, 3] and saved["version"]


def test_rerun_from_manifest_is_byte_identical(fig3_run, tmp_path):
    out, man = fig3_run
    cfg = dict(man.config, output_dir=str(tmp_path))
    again = run_experiment(ExperimentConfig.from_dict(cfg))
    first = {a["path"]: a["sha256"] for a in man.artifacts}
    second = {a["path"]: a["sha256"] for a in again.artifacts}
    first.pop("config.json")
    second.pop("config.json")
    assert first == second


def test_summary_peaks(fig3_run):
    out, man = fig3_run
    rows = (out / "summary.csv").read_text().splitlines()
    assert rows[0] == "m,x_peak,x_expected,abs_error,height"
    assert man.summary["max_abs_error"] < 2e-3


def test_fig6_study(tmp_path):
    man = run_experiment(ExperimentConfig("fig6", output_dir=str(tmp_path)))
    h = man.summary["heights"]
    assert all(a > b for a, b in zip(h, h[1:]))
    assert man.summary["x_spread"] < 2e-3


def test_sampled_custom_run_is_seeded(tmp_path):
    kw = dict(mode="hadamard_test", n_shot=400, seed=3, m_values=(1, 2), T=20)
    a = run_experiment(ExperimentConfig("custom", output_dir=str(tmp_path / "a"), **kw))
    b = run_experiment(ExperimentConfig("custom", output_dir=str(tmp_path / "b"), **kw))
    assert (tmp_path / "a" / "series_m2.csv").read_bytes() == (tmp_path / "b" / "series_m2.csv").read_bytes()
    assert a.summary == b.summary


# --- CLI -----------------------------------------------------------------------


def test_cli_estimate(tmp_path, capsys):
    code = cli.main(["estimate", "--theta", "0.6", "--m-schedule", "1,2,4,8", "--mode", "exact", "--out", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    theta = float(out.split("theta_hat = ")[1].split()[0])
    amp = float(out.split("amplitude_hat = ")[1].split()[0])
    assert abs(theta - 0.6) < 1e-3 and abs(amp - np.cos(0.6) ** 2) < 2e-3


def test_cli_bounds(capsys):
    assert cli.main(["bounds", "--a", "0.0353553", "--T", "60"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["cutoff_bound"] == pytest.approx(2 / 0.0353553 * np.exp(-((0.0353553 * 60) ** 2)))


def test_cli_config_file_with_flag_override(tmp_path, capsys):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"theta": 0.3, "m_values": [1, 2]}))
    assert cli.main(["estimate", "--config", str(conf), "--theta", "0.45", "--out", str(tmp_path / "o")]) == 0
    saved = json.loads((tmp_path / "o" / "config.json").read_text())
    assert saved["theta"] == 0.45 and saved["m_values"] == [1, 2]


def test_cli_observable(tmp_path, capsys):
    f = tmp_path / "obs.txt"
    f.write_text("0.5 ZIZ\n-1.25 IXI\n")
    assert cli.main(["observable", str(f), "--m", "4"]) == 0
    out = capsys.readouterr().out
    est = float(out.split("estimate = ")[1].split()[0])
    exact = float(out.split("exact = ")[1].split()[0])
    assert abs(est - exact) < 1e-3


def test_cli_exit_codes(tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        cli.main(["frobnicate"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        cli.main(["estimate", "--no-such-flag"])
    assert e.value.code == 2
    assert cli.main(["estimate", "--a", "3", "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("0.5 QQ\n")
    assert cli.main(["observable", str(bad)]) == 2


def test_cli_reproduce(tmp_path, capsys):
    assert cli.main(["reproduce", "fig3", "--m-values", "4", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "manifest.json").exists()
    assert (tmp_path / "spectrum_m4.csv").exists()


def test_cli_validate(capsys):
    assert cli.main(["validate"]) == 0
    assert capsys.readouterr().out.count("PASS") == 4
