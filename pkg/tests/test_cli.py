import dataclasses
from pathlib import Path

import numpy as np
import pytest

from stochhyst import constitutive
from stochhyst.cli import main
from stochhyst.config import PRESETS, ConfigError, ExperimentConfig, preset
from stochhyst.environment import ParameterTable, Seed, sample_environment
from stochhyst.solver import Loading, run_trajectory


def write_config(tmp_path, text):
    p = tmp_path / "exp.yaml"
    p.write_text(text)
    return str(p)


def body(path):
    return [l for l in Path(path).read_text().splitlines() if not l.startswith("#")]


def test_run_defaults_row_count(tmp_path):
    cfg = write_config(tmp_path, "steps_per_period: 200\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    rows = body(tmp_path / "o" / "trajectory.csv")
    assert rows[0] == "t,ell,sigma_bar,elastic_energy,dissipated_energy"
    assert len(rows) - 1 == 2 * 200


def test_run_is_byte_identical(tmp_path):
    cfg = write_config(tmp_path, "steps_per_period: 100\nepsilon: 0.02\n")
    for d in ("a", "b"):
        assert main(["run", "--config", cfg, "--out", str(tmp_path / d), "--seed", "4"]) == 0
    for name in ("trajectory.csv", "loops.csv", "environment.txt", "loop.dat"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_headers_are_self_describing(tmp_path):
    assert main(["run", "--preset", "figure2-fast", "--out", str(tmp_path)]) == 0
    head = (tmp_path / "trajectory.csv").read_text().splitlines()[:4]
    assert head[0].startswith("# stochhyst 0.1.0 backend ")
    assert head[2].startswith("# config_sha256 ")
    assert head[3] == "# base_seed 7"


def test_validation_error_is_line_precise(tmp_path, capsys):
    cfg = write_config(tmp_path, "epsilon: 0.01\nsteps_per_period: 0\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert f"{cfg}:2:" in err and "steps_per_period" in err


def test_unknown_key_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path, "delta: 0.1\nepsilonn: 0.01\n")
    assert main(["run", "--config", cfg]) == 1
    assert ":2: epsilonn: unknown key" in capsys.readouterr().err


@pytest.mark.parametrize("text,key", [
    ("periods: two\n", "periods"),
    ("mu_values: 0.4\n", "mu_values"),
    ("nu_values: [0.0]\n", "nu_values"),
    ("a_weights: [0.5]\n", "a_weights"),
    ("stride: 3\n", "stride"),
    ("tol: -1\n", "tol"),
    ("mode: bogus\n", "mode"),
])
def test_config_errors_name_key_and_line(text, key):
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_yaml("delta: 0.1\n" + text, source="c.yaml")
    assert info.value.key == key and info.value.line == 2


def test_malformed_yaml(tmp_path, capsys):
    cfg = write_config(tmp_path, "delta: [0.1\n")
    assert main(["run", "--config", cfg]) == 1
    assert "malformed" in capsys.readouterr().err


def test_missing_config_file(capsys):
    assert main(["run", "--config", "/nonexistent/x.yaml"]) == 1


def test_config_round_trip():
    for name in PRESETS:
        cfg = preset(name)
        again = ExperimentConfig.from_yaml(cfg.to_yaml())
        assert again == cfg
        assert again.content_hash() == cfg.content_hash()
    cfg = ExperimentConfig(a_weights=(0.25, 0.75), epsilon=1 / 3)
    assert ExperimentConfig.from_yaml(cfg.to_yaml()) == cfg


def test_hash_ignores_output_dir_only():
    cfg = ExperimentConfig()
    assert cfg.replace(output_dir="elsewhere").content_hash() == cfg.content_hash()
    assert cfg.replace(base_seed=1).content_hash() != cfg.content_hash()


def test_nonconvergence_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path, "steps_per_period: 50\nmax_iter: 1\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path)]) == 3
    assert "stalled" in capsys.readouterr().err


def test_check_exit_codes(tmp_path, monkeypatch):
    assert main(["check", "--fast", "--out", str(tmp_path / "ok")]) == 0
    good = constitutive.psi_star
    monkeypatch.setattr(constitutive, "psi_star", lambda p, s: good(p, s) + 0.01)
    assert main(["check", "--fast", "--out", str(tmp_path / "bad")]) == 2
    report = (tmp_path / "bad" / "check_report.txt").read_text()
    assert "FAIL fenchel_young" in report and "witness=" in report


def test_check_report_reproducible(tmp_path):
    for d in ("a", "b"):
        assert main(["check", "--fast", "--seed", "3", "--out", str(tmp_path / d)]) == 0
    assert (tmp_path / "a" / "check_report.txt").read_bytes() == \
        (tmp_path / "b" / "check_report.txt").read_bytes()


def test_single_delta_sweep_matches_run(tmp_path):
    cfg = write_config(tmp_path, "steps_per_period: 100\ndelta: 0.25\ndelta_list: [0.25]\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "r")]) == 0
    assert main(["sweep-rates", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
    assert body(tmp_path / "r" / "trajectory.csv") == body(tmp_path / "s" / "trajectory_delta_0.csv")


def test_sweep_loop_area_table(tmp_path):
    assert main(["sweep-rates", "--preset", "figure2-fast", "--out", str(tmp_path)]) == 0
    rows = body(tmp_path / "loop_areas.csv")
    assert rows[0].startswith("delta,area,dissipated")
    areas = [float(r.split(",")[1]) for r in rows[1:]]
    assert len(areas) == 3 and all(a > 0 for a in areas)
    assert all(a >= b for a, b in zip(areas, areas[1:]))


def test_ensemble_minimal_and_member_reproducible(tmp_path):
    cfg = write_config(tmp_path, "n_realizations: 2\neps_list: [0.05]\nsteps_per_period: 100\n"
                                 "base_seed: 9\n")
    assert main(["ensemble", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = body(tmp_path / "stats_eps_0.csv")
    assert rows[0] == "time,mean,variance" and len(rows) == 1 + 200
    # each member is reproducible in isolation from (base_seed, index)
    sig = [run_trajectory(sample_environment(ParameterTable.standard(), 0.05, Seed(9, r)),
                          Loading.sin2(0.1), 100).sigma_bar for r in range(2)]
    t, mean, var = (float(x) for x in rows[-1].split(","))
    assert mean == pytest.approx(np.mean([s[-1] for s in sig]), abs=1e-15)
    assert var == pytest.approx(np.var([s[-1] for s in sig], ddof=1), abs=1e-15)


def test_ensemble_needs_two_realizations(tmp_path):
    cfg = write_config(tmp_path, "n_realizations: 1\n")
    assert main(["ensemble", "--config", cfg]) == 1


def test_homogenize_viscous_oracle(tmp_path):
    cfg = write_config(tmp_path, "mu_values: [0.0]\nperiods: 1\nsteps_per_period: 500\n"
                                 "macro_points: 8\ninitial_amplitude: 0.1\n")
    assert main(["homogenize", "--config", cfg, "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "oracle.txt").read_text().split()
    err, dt = float(lines[1]), float(lines[3])
    assert err <= 5 * dt
    head = (tmp_path / "homogenized.csv").read_text()
    assert "# sampling_noise 0" in head
    assert body(tmp_path / "homogenized.csv")[0].endswith(",homogenized")
    assert body(tmp_path / "homogenized.csv")[1].endswith(",true")
    assert body(tmp_path / "corrector.csv")[0] == "point,member,A,mu,nu,prob,theta"


def test_homogenize_monte_carlo_members(tmp_path):
    cfg = write_config(tmp_path, "omega_members: 40\nsteps_per_period: 100\n")
    assert main(["homogenize", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert "# exhaustive false" in (tmp_path / "homogenized.csv").read_text()


def test_compare_table(tmp_path):
    cfg = write_config(tmp_path, "eps_list: [0.1, 0.02]\nn_realizations: 4\nperiods: 1\n"
                                 "steps_per_period: 200\n")
    assert main(["compare", "--config", cfg, "--out", str(tmp_path), "--jobs", "2"]) == 0
    rows = body(tmp_path / "compare.csv")
    assert rows[0] == "epsilon,sup_error,noise" and len(rows) == 3


def test_jobs_do_not_change_outputs(tmp_path):
    cfg = write_config(tmp_path, "n_realizations: 6\neps_list: [0.1, 0.05, 0.02]\n"
                                 "steps_per_period: 100\nperiods: 1\n")
    for jobs in ("1", "3"):
        assert main(["ensemble", "--config", cfg, "--out", str(tmp_path / jobs),
                     "--jobs", jobs]) == 0
    for f in (tmp_path / "1").iterdir():
        assert f.read_bytes() == (tmp_path / "3" / f.name).read_bytes()


def test_bad_jobs_flag():
    assert main(["run", "--jobs", "0"]) == 1


def test_preset_validation():
    with pytest.raises(ConfigError):
        preset("figure9")
    for name in PRESETS:
        assert preset(name).mode in ("sweep-rates", "ensemble")
    fields = {f.name for f in dataclasses.fields(ExperimentConfig)}
    assert all(set(v) <= fields for v in PRESETS.values())
