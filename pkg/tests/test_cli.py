"""Command-line front end: subcommands, exit codes, and field dumps."""

import json
import os
import shlex
import subprocess
import sys

import numpy as np
import pytest

from stablab import cli
from stablab.charts import flat_torus
from stablab.grid import GridScalarField, StructuredGrid, save_field_csv

from test_experiment import base_config


def test_recipes_subcommand_lists_the_book(capsys):
    assert cli.main(["recipes"]) == 0
    out = capsys.readouterr().out.split()
    assert out == [
        "flat-plane-liouville",
        "identity-sweep",
        "sphere-bifurcation",
        "tanh-cylinder",
    ]


def test_validate_accepts_a_bundled_recipe(capsys):
    assert cli.main(["validate", "identity-sweep"]) == 0
    assert capsys.readouterr().out.strip() == "ok"


def test_validate_prints_diagnostics_and_exits_2(tmp_path, capsys):
    cfg = base_config(grid={"resolution": [4, 16]})
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(cfg))
    assert cli.main(["validate", str(path)]) == 2
    assert "resolution below minimum 8: 4" in capsys.readouterr().out


def test_missing_config_is_a_config_error(capsys):
    assert cli.main(["validate", "no-such-recipe.json"]) == 2
    assert "config error" in capsys.readouterr().err


def test_malformed_json_is_a_config_error(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    assert cli.main(["run", str(path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_run_prints_sections_and_writes_report(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(base_config()))
    out = tmp_path / "out"
    assert cli.main(["run", str(path), "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "stability: pass" in text
    assert "verdict: pass" in text
    assert (out / "report.json").exists()
    assert (out / "u.csv").exists()


def test_failed_check_exits_1(tmp_path, capsys):
    cfg = base_config()
    cfg["check_params"]["stability"]["expect"] = [{"field": "const[1]", "lambda": 99.0}]
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert cli.main(["run", str(path), "--out", str(tmp_path / "out")]) == 1
    assert "verdict: fail" in capsys.readouterr().out


def test_invalid_config_exits_2_without_running(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(base_config(seed=-1)))
    assert cli.main(["run", str(path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_threads_flag_pins_the_numeric_pools(capsys):
    saved = {v: os.environ.get(v) for v in cli._THREAD_VARS}
    try:
        assert cli.main(["--threads", "3", "recipes"]) == 0
        for var in cli._THREAD_VARS:
            assert os.environ[var] == "3"
    finally:
        for var, old in saved.items():
            if old is None:
                os.environ.pop(var, None)
            else:
                os.environ[var] = old


def test_nonpositive_threads_exit_2(capsys):
    assert cli.main(["--threads", "0", "recipes"]) == 2
    assert "--threads" in capsys.readouterr().err


def test_dump_field_expands_grid_coordinates(tmp_path, capsys):
    grid = StructuredGrid(flat_torus(), (8, 8))
    field = GridScalarField(grid, np.arange(64, dtype=float).reshape(8, 8))
    path = tmp_path / "u.csv"
    save_field_csv(field, str(path))
    assert cli.main(["dump-field", str(path)]) == 0
    lines = capsys.readouterr().out.strip().split("\n")
    assert lines[0] == "x0,x1,value"
    assert len(lines) == 1 + 64
    x0, x1, v = (float(tok) for tok in lines[1].split(","))
    assert (x0, x1) == (float(grid.axes[0][0]), float(grid.axes[1][0]))
    assert v == 0.0
    x0, x1, v = (float(tok) for tok in lines[2].split(","))
    assert x1 == pytest.approx(float(grid.axes[1][1]))
    assert v == 1.0


def test_dump_field_missing_file_exits_2(capsys):
    assert cli.main(["dump-field", "/nonexistent/u.csv"]) == 2
    assert "config error" in capsys.readouterr().err


def test_run_out_path_collision_exits_2(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(base_config()))
    blocker = tmp_path / "occupied"
    blocker.write_text("")
    assert cli.main(["run", str(path), "--out", str(blocker)]) == 2
    assert "config error" in capsys.readouterr().err


def test_dump_field_survives_a_closed_pipe(tmp_path):
    grid = StructuredGrid(flat_torus(), (128, 128))
    field = GridScalarField(grid, np.zeros((128, 128)))
    path = tmp_path / "u.csv"
    save_field_csv(field, str(path))
    # 16384 rows overflow the pipe buffer, so the writer is still going
    # when head exits; the dump must swallow the broken pipe quietly
    proc = subprocess.run(
        f"{shlex.quote(sys.executable)} -m stablab.cli dump-field"
        f" {shlex.quote(str(path))} | head -2",
        shell=True,
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0] == "x0,x1,value"
    assert proc.stderr == ""
