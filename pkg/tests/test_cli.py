"""Config parsing, orchestration, output emission and the CLI entry point."""

import os

import numpy as np
import pytest

from shrinktarget import cli
from shrinktarget.errors import ConfigError

MINIMAL = """\
[experiment]
map = doubling
n_max = 200
M = 20
seed = 3
"""


def test_minimal_config_defaults():
    cfg = cli.parse_config(MINIMAL)
    assert cfg.gamma == 1.0 and cfg.C == 1.0
    assert cfg.center == "generic-default"
    assert cfg.checkpoints == [200]
    assert cfg.modes == ["sbc"]


def test_gamma_out_of_range_names_line():
    text = MINIMAL + "gamma = 1.5\n"
    with pytest.raises(ConfigError) as ei:
        cli.parse_config(text)
    assert "line 6" in str(ei.value)
    assert "gamma" in str(ei.value)


def test_unknown_key_rejected():
    with pytest.raises(ConfigError) as ei:
        cli.parse_config(MINIMAL + "banana = 7\n")
    assert "banana" in str(ei.value) and "line 6" in str(ei.value)


def test_unknown_mode_and_bad_model():
    with pytest.raises(ConfigError):
        cli.parse_config(MINIMAL + "modes = sbc, wiggle\n")
    with pytest.raises(ConfigError):
        cli.parse_config(MINIMAL + "transfer_model = fft 9\n")


def test_key_outside_section():
    with pytest.raises(ConfigError) as ei:
        cli.parse_config("map = doubling\n")
    assert "line 1" in str(ei.value)


def test_tolerance_override_and_unknown():
    cfg = cli.parse_config(MINIMAL + "[tolerances]\nks_paper_max = 0.2\n")
    assert cfg.tolerances["ks_paper_max"] == 0.2
    with pytest.raises(ConfigError):
        cli.parse_config(MINIMAL + "[tolerances]\nnot_a_tol = 1\n")


def test_round_trip():
    cfg = cli.parse_config(MINIMAL + "modes = sbc, identities\n"
                           "transfer_model = exact-markov 8\n")
    echo = cfg.echo()
    assert cli.parse_config(echo).echo() == echo


def test_center_forms():
    assert cli.parse_config(MINIMAL).resolved_center() == pytest.approx(
        3.141592653589793 - 3.0
    )
    cfg = cli.parse_config(MINIMAL + "center = 0.25\n")
    assert cfg.resolved_center() == 0.25
    r1 = cli.parse_config(MINIMAL + "center = random(5)\n").resolved_center()
    r2 = cli.parse_config(MINIMAL + "center = random(5)\n").resolved_center()
    assert r1 == r2 and 0.0 <= r1 < 1.0
    with pytest.raises(ConfigError):
        cli.parse_config(MINIMAL + "center = 1.25\n")


def test_run_degenerate_sbc_exact():
    """mu = 1 schedule: ratio is exactly 1 and the verdict passes."""
    cfg = cli.parse_config(
        "[experiment]\nmap = doubling\nn_max = 50\nM = 10\nseed = 1\n"
        "C = 1000000000\nmodes = sbc\n"
        "[tolerances]\nsbc_std_low = 0\n"
    )
    rep, raw = cli.run_experiment(cfg)
    v = {x.name: x for b in rep.blocks for x in b.verdicts}
    assert v["sbc_mean_ratio"].value == 1.0 and v["sbc_mean_ratio"].passed
    assert np.all(raw.S[:, -1] == 50)


def test_run_identities_mode_passes():
    cfg = cli.parse_config(
        "[experiment]\nmap = doubling\nn_max = 100\nM = 5\nseed = 1\n"
        "center = 0.3333333333333333\nmodes = identities\n"
        "transfer_model = exact-markov 8\n"
    )
    rep, _ = cli.run_experiment(cfg)
    assert rep.all_pass


def test_mode_needs_model():
    cfg = cli.parse_config(MINIMAL + "modes = identities\n")
    with pytest.raises(Exception):
        cli.run_experiment(cfg)


def test_emit_outputs_deterministic(tmp_path):
    cfg = cli.parse_config(MINIMAL + "modes = sbc, clt-paper-norm\n")
    rep, raw = cli.run_experiment(cfg)
    d1, d2 = tmp_path / "a", tmp_path / "b"
    cli.emit_outputs(rep, raw, str(d1))
    cli.emit_outputs(rep, raw, str(d2))
    for name in ("report.txt", "raw_samples.csv", "cdf_paper_norm.csv"):
        assert (d1 / name).read_bytes() == (d2 / name).read_bytes(), name


def test_emit_empty_ensemble_header_only(tmp_path):
    cfg = cli.parse_config(MINIMAL + "modes = recurrence\n")
    rep, raw = cli.run_experiment(cfg)
    assert raw is None
    cli.emit_outputs(rep, raw, str(tmp_path))
    assert (tmp_path / "raw_samples.csv").read_text() == cli.RAW_HEADER + "\n"
    assert not (tmp_path / "cdf_paper_norm.csv").exists()


def test_cdf_files_nondecreasing(tmp_path):
    cfg = cli.parse_config(MINIMAL + "modes = clt-paper-norm, clt-self-norm\n")
    rep, raw = cli.run_experiment(cfg)
    cli.emit_outputs(rep, raw, str(tmp_path))
    for name in ("cdf_paper_norm.csv", "cdf_self_norm.csv"):
        rows = (tmp_path / name).read_text().splitlines()[1:]
        cols = np.array([[float(v) for v in r.split(",")] for r in rows])
        assert np.all(np.diff(cols[:, 0]) >= 0), name
        assert np.all(np.diff(cols[:, 1]) >= 0), name


def test_raw_csv_columns(tmp_path):
    cfg = cli.parse_config(MINIMAL + "modes = sbc\ncheckpoints = 100, 200\n")
    rep, raw = cli.run_experiment(cfg)
    cli.emit_outputs(rep, raw, str(tmp_path))
    lines = (tmp_path / "raw_samples.csv").read_text().splitlines()
    assert lines[0] == "trajectory_id,checkpoint_n,S_n,Z_n,normalized_statistic"
    assert len(lines) == 1 + 20 * 2
    first = lines[1].split(",")
    assert first[0] == "0" and first[1] == "100"
    assert int(first[2]) == raw.S[0, 0]


def test_main_version_and_validate(tmp_path, capsys):
    assert cli.main(["version"]) == 0
    out = capsys.readouterr().out.strip()
    from shrinktarget import __version__

    assert out == __version__
    cfgp = tmp_path / "c.ini"
    cfgp.write_text(MINIMAL)
    assert cli.main(["validate", str(cfgp)]) == 0
    assert "[experiment]" in capsys.readouterr().out
    cfgp.write_text(MINIMAL + "gamma = 2\n")
    assert cli.main(["validate", str(cfgp)]) == 2
    assert cli.main(["validate", str(tmp_path / "missing.ini")]) == 2


def test_main_run_exit_codes(tmp_path, capsys):
    good = tmp_path / "good.ini"
    good.write_text(
        "[experiment]\nmap = doubling\nn_max = 100\nM = 5\nseed = 1\n"
        "center = 0.3333333333333333\nmodes = identities, recurrence\n"
        "transfer_model = exact-markov 8\n"
        f"output_dir = {tmp_path / 'out'}\n"
    )
    assert cli.main(["run", str(good)]) == 0
    capsys.readouterr()
    assert (tmp_path / "out" / "report.txt").exists()
    assert (tmp_path / "out" / "run.log").exists()
    bad = tmp_path / "bad.ini"
    # impossible tolerance forces a failing verdict -> exit 1
    bad.write_text(
        "[experiment]\nmap = doubling\nn_max = 100\nM = 5\nseed = 1\n"
        "modes = recurrence\n"
        f"output_dir = {tmp_path / 'out2'}\n"
        "[tolerances]\nrecurrence_ratio_max = 0.5\n"
    )
    assert cli.main(["run", str(bad)]) == 1
    capsys.readouterr()
