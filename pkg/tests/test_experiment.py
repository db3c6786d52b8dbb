"""Config validation, report structure, and the bundled recipe book."""

import copy
import json
import os

import pytest

from stablab.errors import ConfigError
from stablab.experiment import (
    CHECK_NAMES,
    SCHEMA_VERSION,
    canonical_json,
    config_hash,
    list_recipes,
    recipes,
    report_fingerprint,
    run,
    validate,
)
from stablab.grid import load_field_csv


def base_config(**over):
    """Cheap runnable config: 16x16 torus, Newton onto the u=1 well."""
    cfg = {
        "schema": SCHEMA_VERSION,
        "name": "unit-probe",
        "chart": {"name": "flat-torus"},
        "grid": {"resolution": [16, 16]},
        "nonlinearity": {"name": "allen-cahn"},
        "solve": {"kind": "newton", "initial": {"kind": "constant", "value": 0.9}},
        "checks": ["stability"],
        "check_params": {
            "stability": {
                "constants": [1.0],
                "expect": [
                    {"field": "u", "verdict": "stable"},
                    {"field": "const[1]", "lambda": 2.0, "tol": 1e-6},
                ],
            }
        },
        "seed": 5,
    }
    cfg.update(over)
    return cfg


# -- validation ----------------------------------------------------------------


def test_valid_config_has_no_diagnostics():
    assert validate(base_config()) == []


def test_config_must_be_an_object():
    assert validate([1, 2]) == ["config must be a JSON object"]


def test_schema_version_is_enforced():
    diags = validate(base_config(schema=99))
    assert any("unsupported schema" in d for d in diags)


def test_resolution_floor_is_diagnosed():
    diags = validate(base_config(grid={"resolution": [4, 16]}))
    assert any("resolution below minimum 8: 4" in d for d in diags)


def test_unknown_top_level_key_is_an_error():
    cfg = base_config()
    cfg["extra"] = 1
    assert any("unknown top-level keys" in d for d in validate(cfg))


def test_unknown_chart_is_diagnosed():
    diags = validate(base_config(chart={"name": "moebius"}))
    assert any("unknown chart" in d for d in diags)


def test_unknown_check_parameter_is_an_error():
    cfg = base_config()
    cfg["check_params"]["stability"]["bogus"] = 1
    assert any("unknown stability parameters" in d for d in validate(cfg))


def test_params_for_disabled_check_are_an_error():
    cfg = base_config()
    cfg["check_params"]["levelsets"] = {"levels": [0.0]}
    assert any("disabled check" in d for d in validate(cfg))


def test_repeated_checks_are_an_error():
    cfg = base_config(checks=["stability", "stability"])
    cfg.pop("check_params")
    assert any("must not repeat" in d for d in validate(cfg))


def test_seed_must_be_a_nonnegative_integer():
    assert any("seed" in d for d in validate(base_config(seed=-3)))
    cfg = base_config()
    del cfg["seed"]
    assert any("seed" in d for d in validate(cfg))


def test_continuation_needs_lambdas_and_the_scaled_family():
    cfg = base_config(
        solve={"kind": "continuation", "initial": {"kind": "constant", "value": 0.5}}
    )
    diags = validate(cfg)
    assert any("lambdas" in d for d in diags)
    assert any("scaled-allen-cahn" in d for d in diags)


def test_caps_rejected_on_the_axisymmetric_sphere():
    cfg = base_config(
        chart={"name": "sphere-axisym"},
        grid={"resolution": [32], "caps": ["fixed", None]},
    )
    diags = validate(cfg)
    assert any("caps do not apply" in d for d in diags)


def test_unknown_solver_option_is_diagnosed():
    cfg = base_config()
    cfg["solve"]["options"] = {"warp_factor": 9}
    assert any("unknown solver options" in d for d in validate(cfg))


# -- recipe book ---------------------------------------------------------------


def test_recipe_book_names():
    assert list_recipes() == [
        "flat-plane-liouville",
        "identity-sweep",
        "sphere-bifurcation",
        "tanh-cylinder",
    ]


def test_every_recipe_validates_clean():
    for name, cfg in recipes().items():
        assert validate(cfg) == [], f"recipe {name} has diagnostics"
        assert cfg["name"] == name


# -- hashing and fingerprints ----------------------------------------------------


def test_config_hash_ignores_key_order():
    cfg = base_config()
    reordered = json.loads(canonical_json(cfg))
    shuffled = dict(reversed(list(reordered.items())))
    assert config_hash(cfg) == config_hash(shuffled)


def test_fingerprint_strips_wall_times_at_every_depth():
    a = {"verdict": "pass", "wall_time": 1.25, "checks": {"x": {"wall_time": 0.5, "v": 1}}}
    b = {"verdict": "pass", "wall_time": 9.75, "checks": {"x": {"wall_time": 0.1, "v": 1}}}
    c = {"verdict": "pass", "wall_time": 1.25, "checks": {"x": {"wall_time": 0.5, "v": 2}}}
    assert report_fingerprint(a) == report_fingerprint(b)
    assert report_fingerprint(a) != report_fingerprint(c)


# -- running -------------------------------------------------------------------


@pytest.fixture(scope="module")
def probe_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("probe")
    cfg = base_config()
    report = run(cfg, out_dir=str(out))
    return cfg, report, out


def test_run_passes_and_reports_each_check_once(probe_run):
    cfg, report, _ = probe_run
    assert report["verdict"] == "pass"
    assert list(report["checks"]) == cfg["checks"]
    assert report["schema"] == SCHEMA_VERSION
    assert report["config_hash"] == config_hash(cfg)
    assert report["solve"]["converged"] is True


def test_run_writes_report_and_field(probe_run):
    cfg, report, out = probe_run
    with open(out / "report.json") as fh:
        on_disk = json.load(fh)
    assert report_fingerprint(on_disk) == report_fingerprint(report)
    vals, meta = load_field_csv(str(out / "u.csv"))
    assert meta["shape"] == (16, 16)
    assert abs(float(vals.max()) - 1.0) < 1e-8


def test_check_sections_carry_verdict_metrics_tolerances(probe_run):
    _, report, _ = probe_run
    sec = report["checks"]["stability"]
    assert sec["verdict"] in ("pass", "fail", "inconclusive")
    assert "metrics" in sec and "tolerances" in sec and "wall_time" in sec
    labels = {r["field"] for r in sec["metrics"]["rows"]}
    assert labels == {"u", "const[1]"}


def test_run_rejects_invalid_config(tmp_path):
    with pytest.raises(ConfigError):
        run(base_config(seed=-1), out_dir=str(tmp_path))


def test_reports_are_reproducible_for_a_fixed_seed(tmp_path):
    r1 = run(base_config(), out_dir=str(tmp_path / "a"))
    r2 = run(base_config(), out_dir=str(tmp_path / "b"))
    assert report_fingerprint(r1) == report_fingerprint(r2)


def test_unmet_expectation_fails_the_run(tmp_path):
    cfg = base_config()
    cfg["check_params"]["stability"]["expect"] = [
        {"field": "const[1]", "lambda": 3.0, "tol": 1e-6}
    ]
    report = run(cfg, out_dir=str(tmp_path))
    assert report["verdict"] == "fail"
    sec = report["checks"]["stability"]
    assert sec["verdict"] == "fail"
    assert any("lambda_min" in f["metric"] for f in sec["offending"])


def test_unconverged_solve_marks_every_check_inconclusive(tmp_path):
    cfg = base_config()
    cfg["solve"] = {
        "kind": "newton",
        "initial": {"kind": "constant", "value": 0.3},
        "options": {"max_newton": 0},
    }
    report = run(cfg, out_dir=str(tmp_path))
    assert report["solve"]["converged"] is False
    assert report["verdict"] == "inconclusive"
    sec = report["checks"]["stability"]
    assert sec["verdict"] == "inconclusive"
    assert "did not converge" in sec["reason"]


def test_check_error_is_recorded_as_inconclusive(tmp_path):
    # u = 1 everywhere has no 0.5-level curve: the check errors, the run keeps going
    cfg = base_config(checks=["levelsets"])
    cfg["check_params"] = {"levelsets": {"levels": [0.5]}}
    report = run(cfg, out_dir=str(tmp_path))
    sec = report["checks"]["levelsets"]
    assert sec["verdict"] == "inconclusive"
    assert sec["reason"].startswith("EmptyLevelSet")
    assert report["verdict"] == "inconclusive"
