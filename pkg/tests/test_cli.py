"""Command-line surface: subcommands, config validation, exit codes."""

import json
import math

import pytest

from losstopo.cli import main


def write_config(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def dw_config(tmp_path, out, extra=""):
    return write_config(tmp_path, f"""
field = double_well_1d
seed = 3
minima_count = 6
init_scale = 1.0
train_lr_min = 1e-2
momentum = 0.0
max_steps = 50000
path_epochs = 60
out = {out}
{extra}
""")


# -- config handling ----------------------------------------------------------------

def test_unknown_config_key_exit_2(tmp_path, capsys):
    cfg = write_config(tmp_path, "fiedl = double_well_1d\n")
    assert main(["minima", "--config", cfg]) == 2
    assert "fiedl" in capsys.readouterr().err


def test_malformed_config_line_exit_2(tmp_path):
    cfg = write_config(tmp_path, "just a line without equals\n")
    assert main(["minima", "--config", cfg]) == 2


def test_relative_paths_resolve_against_config(tmp_path, capsys):
    out = tmp_path / "results"
    cfg = write_config(tmp_path, f"""
field = double_well_1d
minima_count = 2
train_lr_min = 1e-2
max_steps = 20000
out = results
""")
    assert main(["minima", "--config", cfg]) == 0
    assert (out / "minima.json").exists()


# -- minima -----------------------------------------------------------------------------

def test_minima_reproducible_bytes(tmp_path):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    cfg = dw_config(tmp_path, "PLACEHOLDER")
    for out in (out_a, out_b):
        assert main(["minima", "--config", cfg, "--out", str(out)]) == 0
    assert (out_a / "minima.json").read_bytes() == (out_b / "minima.json").read_bytes()


def test_minima_count_zero_exit_2(tmp_path):
    cfg = write_config(tmp_path, "field = double_well_1d\nminima_count = 0\n")
    assert main(["minima", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_mlp_without_dataset_exit_2(tmp_path, capsys):
    cfg = write_config(tmp_path, "field = mlp\nmlp_widths = 2,4,2\n")
    assert main(["minima", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "dataset" in capsys.readouterr().err


# -- barcode ------------------------------------------------------------------------------

def test_barcode_end_to_end_double_well(tmp_path):
    out = tmp_path / "out"
    cfg = dw_config(tmp_path, out)
    assert main(["barcode", "--config", cfg]) == 0
    payload = json.loads((out / "barcode.json").read_text())
    assert abs(payload["essential"]["birth"] - (-0.25)) < 1e-3
    assert len(payload["segments"]) == 1
    seg = payload["segments"][0]
    assert abs(seg["birth"] - (-0.25)) < 1e-3
    assert abs(seg["death"] - 0.0) < 1e-3
    assert (out / "barcode.svg").exists()


def test_barcode_rerun_identical(tmp_path):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    cfg = dw_config(tmp_path, "unused")
    for out in (out_a, out_b):
        assert main(["barcode", "--config", cfg, "--out", str(out)]) == 0
    assert (out_a / "barcode.json").read_bytes() == (out_b / "barcode.json").read_bytes()


def test_barcode_single_minimum_svg_has_one_bar(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(tmp_path, f"""
field = quadratic_bowl
minima_count = 1
train_lr_min = 1e-1
path_epochs = 5
out = {out}
""")
    assert main(["barcode", "--config", cfg]) == 0
    svg = (out / "barcode.svg").read_text()
    assert svg.count("<rect") == 2  # background + the single essential bar
    assert "<polygon" in svg        # its arrowhead


# -- toscore -----------------------------------------------------------------------------------

def test_toscore_ideal_prints_zero(tmp_path, capsys):
    bar = tmp_path / "b.json"
    bar.write_text(json.dumps({"essential": {"birth": 0.0}, "segments": [],
                               "meta": {}}))
    assert main(["toscore", str(bar), "--out", str(tmp_path)]) == 0
    assert capsys.readouterr().out.strip() == "0.000000"
    assert json.loads((tmp_path / "toscore.json").read_text()) == {"to_score": 0.0}


def test_toscore_double_well_file(tmp_path, capsys):
    out = tmp_path / "out"
    cfg = dw_config(tmp_path, out)
    assert main(["barcode", "--config", cfg]) == 0
    assert main(["toscore", str(out / "barcode.json"), "--out", str(out)]) == 0
    val = float(capsys.readouterr().out.strip().splitlines()[-1])
    assert abs(val - 0.125) < 1e-3


def test_toscore_invalid_death_below_birth_exit_2(tmp_path, capsys):
    bar = tmp_path / "bad.json"
    bar.write_text(json.dumps({"essential": {"birth": 0.0},
                               "segments": [{"birth": 1.0, "death": 0.5,
                                             "minimum_id": 0}], "meta": {}}))
    assert main(["toscore", str(bar), "--out", str(tmp_path)]) == 2
    assert "invalid barcode" in capsys.readouterr().err


# -- compare --------------------------------------------------------------------------------------

def test_compare_double_well_passes(tmp_path, capsys):
    cfg = dw_config(tmp_path, tmp_path / "out", extra="oracle_resolution = 2048\n")
    assert main(["compare", "--config", cfg]) == 0
    assert "PASS" in capsys.readouterr().out


def test_compare_mlp_rejected(tmp_path):
    cfg = write_config(tmp_path, "field = mlp\nmlp_widths = 2,4,2\n")
    assert main(["compare", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_compare_diverging_learning_rate_exit_3(tmp_path, capsys):
    cfg = write_config(tmp_path, f"""
field = double_well_1d
minima_count = 4
train_lr_min = 1e-2
max_steps = 20000
path_epochs = 40
path_lr_max = 10
path_lr_min = 10
out = {tmp_path / "o"}
""")
    assert main(["compare", "--config", cfg]) == 3
    assert "divergence" in capsys.readouterr().err


# -- path / morse / plot ----------------------------------------------------------------------------

def test_path_command(tmp_path, capsys):
    out = tmp_path / "out"
    cfg = dw_config(tmp_path, out)
    assert main(["minima", "--config", cfg]) == 0
    assert main(["path", "--config", cfg, "--minima", str(out / "minima.json"),
                 "--pair", "0,1"]) == 0
    assert (out / "path.json").exists()
    assert (out / "trace.csv").exists()


def test_morse_command_schema(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(tmp_path, f"""
field = gaussian_mixture_2d
field_seed = 7
seed = 5
minima_count = 4
init_scale = 1.7
train_lr_min = 1e-2
max_steps = 4000
r_max = 2
morse_epochs = 8
morse_grid_depth = 3
out = {out}
""")
    assert main(["morse", "--config", cfg]) == 0
    payload = json.loads((out / "morse.json").read_text())
    dims = [d["dimension"] for d in payload["diagrams"]]
    assert dims == [0, 1, 2]
    for d in payload["diagrams"]:
        assert set(d) == {"dimension", "essential_births", "points", "to_score"}
        for pt in d["points"]:
            assert pt["death"] >= pt["birth"]


def test_plot_command(tmp_path):
    bar = tmp_path / "b.json"
    bar.write_text(json.dumps({"essential": {"birth": 0.0},
                               "segments": [{"birth": 0.0, "death": 1.0,
                                             "minimum_id": 1}], "meta": {}}))
    assert main(["plot", str(bar), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "barcode.svg").exists()


# -- depth study -------------------------------------------------------------------------------------

def test_depth_study_rows_and_determinism(tmp_path, capsys):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    cfg = write_config(tmp_path, """
seed = 11
depths = 2,3
width = 8
moons_n = 120
minima_per_spec = 3
minima_count = 3
train_lr_min = 5e-2
max_steps = 1500
tol = 1e-3
path_epochs = 30
path_lr_max = 5e-3
""")
    for out in (out_a, out_b):
        assert main(["depth-study", "--config", cfg, "--out", str(out)]) == 0
    csv_a = (out_a / "depth_study.csv").read_text()
    assert csv_a == (out_b / "depth_study.csv").read_text()
    lines = csv_a.strip().splitlines()
    assert lines[0] == "spec,minimum_id,birth,death"
    per_spec = {}
    for line in lines[1:]:
        spec = line.split(",")[0]
        per_spec[spec] = per_spec.get(spec, 0) + 1
    assert set(per_spec) == {"depth2", "depth3"}
    assert all(v <= 3 for v in per_spec.values())
    assert (out_a / "depth_study.svg").exists()
