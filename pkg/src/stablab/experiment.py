"""Config-driven experiment runner.

A single JSON config declares a chart, a grid, a nonlinearity, how to obtain
the field under study (sample a profile, Newton solve, or a continuation
sweep), and which check suites to run.  ``run`` executes the checks in the
declared order and emits one report section per check with a verdict in
{pass, fail, inconclusive}, the measured metrics, and the tolerances they
were held to.  Reports are plain JSON; with a fixed seed two runs produce
byte-identical reports up to the recorded wall times, which is what
``report_fingerprint`` strips.

The config schema is strict: unknown keys anywhere are rejected so a typo in
a tolerance name cannot silently disable a check.  Seeded randomness is
drawn from PCG64 exclusively.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import os
import time

import numpy as np

from . import __version__
from .charts import chart_names, make_chart
from .eikonal import geodesic_distance
from .errors import ConfigError, LabError
from .fields import random_trig_field
from .geodesy import extract_level_set, geodesic_defect
from .geometry import bochner_residual, grad_norm, kato_gap
from .grid import (
    GridScalarField,
    StructuredGrid,
    integration_by_parts_residual,
    save_field_csv,
)
from .liouville import (
    SMOOTHSTEP_LIPSCHITZ,
    caccioppoli_check,
    make_cutoff,
    parabolicity_probe,
    scan_csv,
    volume_growth_scan,
    zac_energy,
)
from .nonlinearity import make_nonlinearity, nonlinearity_names, shifted
from .poincare import gf_report, sz_derivation_residual, tol_gf
from .solver import SolveConfig, continuation, solve_semilinear
from .sphere import SphereAxisymmetric
from .stability import principal_eigenvalue

__all__ = [
    "SCHEMA_VERSION",
    "CHECK_NAMES",
    "validate",
    "run",
    "recipes",
    "list_recipes",
    "report_fingerprint",
    "canonical_json",
    "config_hash",
]

SCHEMA_VERSION = 1
CHECK_NAMES = ("identities", "stability", "gf", "levelsets", "liouville")

_TOP_KEYS = {
    "schema",
    "name",
    "chart",
    "grid",
    "nonlinearity",
    "solve",
    "checks",
    "check_params",
    "output",
    "seed",
}

_SOLVE_KINDS = ("none", "sample-interface", "newton", "continuation")
_INITIAL_KINDS = ("constant", "cos-theta")

_CHECK_DEFAULTS: dict[str, dict] = {
    "identities": {
        "charts": None,  # list of {"name", "params"}; None = the config chart
        "fields": 10,
        "step": 1.0 / 64,
        "samples": 7,
        "inset": 0.12,
        "ratio_window": [3.0, 5.0],
        "kato_floor": 1e-3,
        "kato_tol": 1e-6,
        "ibp_resolution": 64,
        "ibp_pairs": 5,
        "ibp_tol": 1e-10,
    },
    "stability": {
        "modes": [0],
        "constants": [],
        "battery_size": 5,
        "eig_tol": 1e-7,
        "maxiter": 400,
        "shift": None,
        "shift_field": None,
        "shift_tol": 1e-8,
        "expect": [],
    },
    "gf": {
        "cutoffs": [],
        "center": None,
        "whole_manifold": False,
        "grad_floor": None,
        "sz_tol_C": 20.0,
    },
    "levelsets": {
        "levels": [],
        "defect_in_h": 2.0,
        "grad_floor": None,
        "min_vertices": 12,
    },
    "liouville": {
        "center": None,
        "volume_radii": [],
        "cutoff_radii": [],
        "caccioppoli_radii": [],
        "parabolicity_outer": [],
        "parabolicity_inner": 1.0,
        "parabolicity_rel": 0.10,
        "volume_window": None,  # {"target", "rel", "min_R"}
        "expect_quartic_decay": True,
    },
}


# -- config validation -------------------------------------------------------


def _dictlike(obj) -> bool:
    return isinstance(obj, dict)


def validate(config) -> list[str]:
    """Diagnostics for a config; empty list means runnable."""
    diags: list[str] = []
    if not _dictlike(config):
        return ["config must be a JSON object"]
    if config.get("schema") != SCHEMA_VERSION:
        diags.append(f"unsupported schema {config.get('schema')!r}; expected {SCHEMA_VERSION}")
    unknown = set(config) - _TOP_KEYS
    if unknown:
        diags.append(f"unknown top-level keys: {sorted(unknown)}")
    if not isinstance(config.get("name"), str) or not config.get("name"):
        diags.append("name must be a nonempty string")

    chart_spec = config.get("chart")
    axisym = False
    if not _dictlike(chart_spec) or "name" not in chart_spec:
        diags.append("chart must be an object with a 'name'")
    else:
        extra = set(chart_spec) - {"name", "params"}
        if extra:
            diags.append(f"unknown chart keys: {sorted(extra)}")
        cname = chart_spec["name"]
        axisym = cname == "sphere-axisym"
        if cname not in chart_names() and not axisym:
            diags.append(f"unknown chart {cname!r}; known: {chart_names() + ['sphere-axisym']}")
        params = chart_spec.get("params", {})
        if not _dictlike(params):
            diags.append("chart params must be an object")

    grid_spec = config.get("grid")
    if not _dictlike(grid_spec) or "resolution" not in grid_spec:
        diags.append("grid must be an object with a 'resolution'")
    else:
        extra = set(grid_spec) - {"resolution", "caps"}
        if extra:
            diags.append(f"unknown grid keys: {sorted(extra)}")
        res = grid_spec["resolution"]
        if not isinstance(res, list) or not res or not all(isinstance(r, int) for r in res):
            diags.append("grid resolution must be a list of integers")
        else:
            for r in res:
                if r < 8:
                    diags.append(f"resolution below minimum 8: {r}")
            want = 1 if axisym else 2
            if len(res) != want:
                diags.append(f"resolution needs {want} entries for this chart, got {len(res)}")
        caps = grid_spec.get("caps")
        if caps is not None:
            if axisym:
                diags.append("caps do not apply to the axisymmetric sphere")
            elif not isinstance(caps, list) or len(caps) != 2 or any(
                c not in (None, "fixed") for c in caps
            ):
                diags.append("caps must be a 2-list of null or 'fixed'")

    nl_spec = config.get("nonlinearity")
    if not _dictlike(nl_spec) or "name" not in nl_spec:
        diags.append("nonlinearity must be an object with a 'name'")
    else:
        extra = set(nl_spec) - {"name", "params"}
        if extra:
            diags.append(f"unknown nonlinearity keys: {sorted(extra)}")
        if nl_spec["name"] not in nonlinearity_names():
            diags.append(
                f"unknown nonlinearity {nl_spec['name']!r}; known: {nonlinearity_names()}"
            )
        elif _dictlike(nl_spec.get("params", {})):
            try:
                make_nonlinearity(nl_spec["name"], **nl_spec.get("params", {}))
            except (ConfigError, TypeError) as e:
                diags.append(f"nonlinearity params rejected: {e}")

    solve_spec = config.get("solve")
    if not _dictlike(solve_spec) or solve_spec.get("kind") not in _SOLVE_KINDS:
        diags.append(f"solve.kind must be one of {list(_SOLVE_KINDS)}")
    else:
        kind = solve_spec["kind"]
        allowed = {"kind"}
        if kind == "sample-interface":
            allowed |= {"direction"}
            if solve_spec.get("direction", 0) not in (0, 1):
                diags.append("sample-interface direction must be 0 or 1")
            if axisym:
                diags.append("sample-interface needs a chart grid")
        elif kind == "newton":
            allowed |= {"initial", "options"}
        elif kind == "continuation":
            allowed |= {"initial", "options", "lambdas"}
            lams = solve_spec.get("lambdas")
            if not isinstance(lams, list) or not lams:
                diags.append("continuation needs a nonempty 'lambdas' list")
            if _dictlike(nl_spec) and nl_spec.get("name") != "scaled-allen-cahn":
                diags.append("continuation requires the scaled-allen-cahn nonlinearity")
        extra = set(solve_spec) - allowed
        if extra:
            diags.append(f"unknown solve keys: {sorted(extra)}")
        init = solve_spec.get("initial")
        if kind in ("newton", "continuation"):
            if not _dictlike(init) or init.get("kind") not in _INITIAL_KINDS:
                diags.append(f"solve.initial.kind must be one of {list(_INITIAL_KINDS)}")
            elif init["kind"] == "cos-theta" and not axisym:
                diags.append("cos-theta initial data needs the axisymmetric sphere")
        opts = solve_spec.get("options", {})
        if not _dictlike(opts):
            diags.append("solve options must be an object")
        else:
            import dataclasses

            known = {f.name for f in dataclasses.fields(SolveConfig)}
            extra = set(opts) - known
            if extra:
                diags.append(f"unknown solver options: {sorted(extra)}")

    checks = config.get("checks")
    if not isinstance(checks, list) or any(c not in CHECK_NAMES for c in checks):
        diags.append(f"checks must be a list drawn from {list(CHECK_NAMES)}")
    else:
        if len(set(checks)) != len(checks):
            diags.append("checks must not repeat")
        if axisym and ("levelsets" in checks or "liouville" in checks):
            diags.append("levelsets/liouville checks need a chart grid")

    cp = config.get("check_params", {})
    if not _dictlike(cp):
        diags.append("check_params must be an object")
    else:
        for name, params in cp.items():
            if name not in CHECK_NAMES:
                diags.append(f"check_params for unknown check {name!r}")
                continue
            if isinstance(checks, list) and name not in checks:
                diags.append(f"check_params given for disabled check {name!r}")
            if not _dictlike(params):
                diags.append(f"check_params.{name} must be an object")
                continue
            extra = set(params) - set(_CHECK_DEFAULTS[name])
            if extra:
                diags.append(f"unknown {name} parameters: {sorted(extra)}")

    if "output" in config and not isinstance(config["output"], str):
        diags.append("output must be a string path")
    seed = config.get("seed")
    if not isinstance(seed, int) or seed < 0:
        diags.append("seed must be a nonnegative integer")
    return diags


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(config) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def report_fingerprint(report) -> str:
    """Canonical JSON of a report with every wall-time removed."""

    def strip(obj):
        if isinstance(obj, dict):
            return {k: strip(v) for k, v in obj.items() if k != "wall_time"}
        if isinstance(obj, list):
            return [strip(v) for v in obj]
        return obj

    return canonical_json(strip(report))


# -- construction ------------------------------------------------------------


class _Context:
    def __init__(self, domain, chart, nl, seed, tol_scale, out_dir):
        self.domain = domain
        self.chart = chart  # None on the axisymmetric sphere
        self.nl = nl
        self.seed = seed
        self.tol_scale = tol_scale
        self.out_dir = out_dir
        self.u = None
        self._dists: dict[tuple, np.ndarray] = {}
        self.subject_row: dict | None = None

    @property
    def axisym(self) -> bool:
        return isinstance(self.domain, SphereAxisymmetric)

    def dist_from(self, center) -> np.ndarray:
        if center is None:
            center = [0.5 * (lo + hi) for lo, hi in self.chart.domain]
        key = (round(float(center[0]), 12), round(float(center[1]), 12))
        if key not in self._dists:
            self._dists[key] = geodesic_distance(self.domain, list(key)).values
        return self._dists[key]

    def subject_stability(self, params) -> dict:
        """Principal-eigenvalue row for the field under study, computed once."""
        if self.subject_row is None:
            if self.u is None:
                raise ConfigError("this check needs a field; solve.kind is 'none'")
            modes = tuple(params.get("modes", [0, 1, 2] if self.axisym else [0]))
            rep = principal_eigenvalue(
                self.domain,
                self.nl,
                self.u,
                modes=modes,
                seed=self.seed,
                tol_scale=self.tol_scale,
            )
            self.subject_row = _stability_row("u", self.nl.name, rep)
        return self.subject_row


def _stability_row(label: str, nl_name: str, rep) -> dict:
    return {
        "field": label,
        "nonlinearity": nl_name,
        "lambda_min": rep.lambda_min,
        "verdict": rep.verdict,
        "eigen_residual": rep.eigen_residual,
        "iterations": rep.iterations,
        "tol": rep.tol,
        "modes": rep.modes,
    }


def _build_domain(config):
    spec = config["chart"]
    res = config["grid"]["resolution"]
    if spec["name"] == "sphere-axisym":
        params = dict(spec.get("params", {}))
        return SphereAxisymmetric(n=res[0], **params), None
    chart = make_chart(spec["name"], **spec.get("params", {}))
    caps = config["grid"].get("caps")
    grid = StructuredGrid(chart, tuple(res), caps=tuple(caps) if caps else None)
    return grid, chart


def _build_initial(domain, spec) -> np.ndarray:
    kind = spec["kind"]
    if kind == "constant":
        return domain.constant(float(spec.get("value", 0.0))).values
    if kind == "cos-theta":
        amp = float(spec.get("amplitude", 0.5))
        return amp * np.cos(domain.theta)
    raise ConfigError(f"unknown initial field kind {kind!r}")


def _interior_residual_sup(domain, nl, u) -> float:
    from .solver import pde_residual

    res = pde_residual(domain, nl, u)
    free = domain.free_mask()
    return float(np.abs(res[free]).max())


def _run_solve(ctx: _Context, spec) -> tuple[np.ndarray | None, dict | None]:
    kind = spec["kind"]
    t0 = time.perf_counter()
    if kind == "none":
        return None, None
    if kind == "sample-interface":
        direction = int(spec.get("direction", 0))
        u = np.tanh(ctx.domain.nodes[..., direction] / math.sqrt(2.0))
        section = {
            "kind": kind,
            "residual_sup_interior": _interior_residual_sup(ctx.domain, ctx.nl, u),
            "wall_time": time.perf_counter() - t0,
        }
        return u, section

    opts = spec.get("options", {})
    cfg = SolveConfig(**opts)
    u0 = _build_initial(ctx.domain, spec["initial"])
    if kind == "newton":
        u, rep = solve_semilinear(ctx.domain, ctx.nl, u0, cfg)
        section = {"kind": kind, **rep.to_dict()}
    else:
        lambdas = [float(v) for v in spec["lambdas"]]
        legs = continuation(
            ctx.domain,
            lambda lam: make_nonlinearity("scaled-allen-cahn", lam=lam),
            lambdas,
            u0,
            cfg,
        )
        ctx.nl = make_nonlinearity("scaled-allen-cahn", lam=lambdas[-1])
        _, u, rep = legs[-1]
        section = {"kind": kind, **rep.to_dict()}
        section["converged"] = all(r.converged for _, _, r in legs)
        section["legs"] = [
            {
                "lambda": lam,
                "converged": bool(r.converged),
                "iterations": int(r.iterations),
                "residual_sup": float(r.residual_sup),
            }
            for lam, _, r in legs
        ]
    section["wall_time"] = time.perf_counter() - t0
    return u, section


# -- gates -------------------------------------------------------------------


class _Gate:
    """Collects failed bounds so the section can name metric and tolerance."""

    def __init__(self):
        self.failures: list[dict] = []

    def require(self, ok: bool, metric: str, value, tolerance) -> None:
        if not ok:
            self.failures.append({"metric": metric, "value": value, "tolerance": tolerance})


# -- checks ------------------------------------------------------------------


def _damped_node_samples(grid: StructuredGrid, field) -> np.ndarray:
    """Field values windowed to vanish near free edges (support discipline)."""
    vals = np.asarray(field(grid.nodes), dtype=float)
    for a in range(2):
        if grid.chart.periodic[a]:
            continue
        n = grid.shape[a]
        window = np.ones(n)
        window[:3] = 0.0
        window[n - 3 :] = 0.0
        shape = [1, 1]
        shape[a] = n
        vals = vals * window.reshape(shape)
    return vals


def _check_identities(ctx: _Context, p: dict, gate: _Gate):
    rng = np.random.Generator(np.random.PCG64(ctx.seed))
    chart_list = p["charts"]
    if chart_list is None:
        if ctx.chart is None:
            raise ConfigError("identities check needs chart grids; give 'charts' explicitly")
        entries = [(ctx.chart.name, ctx.chart)]
    else:
        entries = [
            (e["name"], make_chart(e["name"], **e.get("params", {}))) for e in chart_list
        ]

    per_chart = []
    lo_win, hi_win = p["ratio_window"]
    for label, chart in entries:
        axes = [
            np.linspace(lo + p["inset"] * (hi - lo), hi - p["inset"] * (hi - lo), p["samples"])
            for lo, hi in chart.domain
        ]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 2)
        fields = [random_trig_field(chart, rng) for _ in range(p["fields"])]

        h = p["step"]
        sup_h = max(float(np.abs(bochner_residual(chart, f, pts, h)).max()) for f in fields)
        sup_h2 = max(
            float(np.abs(bochner_residual(chart, f, pts, h / 2)).max()) for f in fields
        )
        ratio = sup_h / sup_h2 if sup_h2 > 0 else float("inf")

        kato_min = float("inf")
        for f in fields:
            gn = grad_norm(chart, f, pts)
            keep = pts[gn > p["kato_floor"]]
            if len(keep) == 0:
                continue
            gap = kato_gap(chart, f, keep, grad_floor=p["kato_floor"])
            kato_min = min(kato_min, float(gap.min()))

        n = p["ibp_resolution"]
        grid = StructuredGrid(chart, (n, n))
        sampled = [_damped_node_samples(grid, f) for f in fields]
        ibp_max = 0.0
        for k in range(min(p["ibp_pairs"], len(sampled) // 2)):
            phi, psi = sampled[2 * k], sampled[2 * k + 1]
            lhs = abs(float(np.sum(grid.weights * phi * grid.laplacian(psi))))
            res = integration_by_parts_residual(grid, phi, psi) / max(1.0, lhs)
            ibp_max = max(ibp_max, res)

        per_chart.append(
            {
                "chart": label,
                "bochner_sup_h": sup_h,
                "bochner_sup_h2": sup_h2,
                "bochner_ratio": ratio,
                "kato_min": kato_min,
                "ibp_max": ibp_max,
            }
        )
        gate.require(
            lo_win <= ratio <= hi_win, f"{label}.bochner_ratio", ratio, [lo_win, hi_win]
        )
        gate.require(kato_min >= -p["kato_tol"], f"{label}.kato_min", kato_min, -p["kato_tol"])
        gate.require(ibp_max <= p["ibp_tol"], f"{label}.ibp_max", ibp_max, p["ibp_tol"])

    metrics = {"per_chart": per_chart, "fields": p["fields"], "step": p["step"]}
    tolerances = {
        "ratio_window": [lo_win, hi_win],
        "kato_tol": p["kato_tol"],
        "ibp_tol": p["ibp_tol"],
    }
    return metrics, tolerances, []


def _check_stability(ctx: _Context, p: dict, gate: _Gate):
    domain = ctx.domain
    modes = tuple(p["modes"])
    fields: list[tuple[str, np.ndarray]] = []
    if ctx.u is not None:
        fields.append(("u", ctx.u))
    for c in p["constants"]:
        fields.append((f"const[{c:g}]", domain._values(domain.constant(float(c)))))
    if not fields:
        raise ConfigError("stability check has no fields: no solve and no constants")

    # evaluations: every field against the config nonlinearity, plus any
    # expectation that names a different one
    evals: dict[tuple[str, str], object] = {}
    for label, _ in fields:
        evals[(label, ctx.nl.name)] = ctx.nl
    for e in p["expect"]:
        if "nonlinearity" in e:
            nl = make_nonlinearity(e["nonlinearity"]["name"], **e["nonlinearity"].get("params", {}))
            evals[(e["field"], nl.name)] = nl

    field_map = dict(fields)
    rows = []
    by_key = {}
    for (label, _), nl in evals.items():
        rep = principal_eigenvalue(
            domain,
            nl,
            field_map[label],
            modes=modes,
            seed=ctx.seed,
            tol_scale=ctx.tol_scale,
            eig_tol=p["eig_tol"],
            maxiter=p["maxiter"],
            battery_size=p["battery_size"],
        )
        row = _stability_row(label, nl.name, rep)
        rows.append(row)
        by_key[(label, nl.name)] = row
        if label == "u" and nl.name == ctx.nl.name:
            ctx.subject_row = row

    for e in p["expect"]:
        nl_name = e["nonlinearity"]["name"] if "nonlinearity" in e else ctx.nl.name
        row = by_key.get((e["field"], nl_name))
        if row is None:
            raise ConfigError(f"expectation names unknown field {e['field']!r}")
        tag = f"{e['field']}({nl_name})"
        if "verdict" in e:
            gate.require(
                row["verdict"] == e["verdict"], f"{tag}.verdict", row["verdict"], e["verdict"]
            )
        if "lambda" in e:
            tol = float(e.get("tol", 1e-3))
            gate.require(
                abs(row["lambda_min"] - e["lambda"]) <= tol,
                f"{tag}.lambda_min",
                row["lambda_min"],
                {"target": e["lambda"], "tol": tol},
            )
        if "lambda_max" in e:
            gate.require(
                row["lambda_min"] <= e["lambda_max"],
                f"{tag}.lambda_min",
                row["lambda_min"],
                {"max": e["lambda_max"]},
            )

    metrics = {"rows": rows}
    tolerances = {"eig_tol": p["eig_tol"]}
    if p["shift"] is not None:
        shift_field = p["shift_field"] or fields[0][0]
        base = by_key.get((shift_field, ctx.nl.name))
        if base is None:
            raise ConfigError(f"shift_field {shift_field!r} was not evaluated")
        c = float(p["shift"])
        rep = principal_eigenvalue(
            domain,
            shifted(ctx.nl, c),
            field_map[shift_field],
            modes=modes,
            seed=ctx.seed,
            tol_scale=ctx.tol_scale,
            eig_tol=p["eig_tol"],
            maxiter=p["maxiter"],
            battery_size=p["battery_size"],
        )
        resid = abs(rep.lambda_min - (base["lambda_min"] - c))
        metrics["shift"] = {"c": c, "field": shift_field, "residual": resid}
        tolerances["shift_tol"] = p["shift_tol"]
        gate.require(resid <= p["shift_tol"], "shift.residual", resid, p["shift_tol"])
    return metrics, tolerances, []


def _check_gf(ctx: _Context, p: dict, gate: _Gate):
    domain = ctx.domain
    if ctx.u is None:
        raise ConfigError("gf check needs a field; solve.kind is 'none'")
    subject = ctx.subject_stability(p)
    verdict = subject["verdict"]

    if p["whole_manifold"]:
        if not domain.compact:
            raise ConfigError("whole-manifold test function needs a compact domain")
        phis = [("ones", np.ones(domain.shape if hasattr(domain, "shape") else domain.n))]
    else:
        if not p["cutoffs"]:
            raise ConfigError("gf check needs 'cutoffs' radii (or whole_manifold)")
        dist = ctx.dist_from(p["center"])
        phis = [(f"R={R:g}", make_cutoff(domain, dist, float(R)).values) for R in p["cutoffs"]]

    rows = []
    for label, pv in phis:
        rep = gf_report(domain, ctx.u, pv, p["grad_floor"])
        tol = tol_gf(domain, ctx.u, pv) * ctx.tol_scale
        rows.append(
            {
                "phi": label,
                "lhs": rep.lhs,
                "rhs": rep.rhs,
                "slack": rep.slack,
                "ric_part": rep.ric_part,
                "gap_part": rep.gap_part,
                "tol": tol,
            }
        )

    sz = sz_derivation_residual(domain, ctx.nl, ctx.u, phis[-1][1], p["grad_floor"])
    sz_tol = tol_gf(domain, ctx.u, phis[-1][1], C=p["sz_tol_C"]) * ctx.tol_scale
    metrics = {
        "rows": rows,
        "stability_verdict": verdict,
        "sz_residual": sz,
        "min_slack": min(r["slack"] for r in rows),
    }
    tolerances = {"sz_tol": sz_tol}

    gate.require(sz <= sz_tol, "sz_residual", sz, sz_tol)
    if verdict == "stable":
        for r in rows:
            gate.require(
                r["slack"] >= -r["tol"], f"slack[{r['phi']}]", r["slack"], -r["tol"]
            )
    elif verdict == "unstable":
        gate.require(
            metrics["min_slack"] < 0.0,
            "min_slack",
            metrics["min_slack"],
            "negative slack expected for an unstable solution",
        )
    else:
        raise ConfigError(f"stability verdict {verdict!r}; inequality status undefined")
    return metrics, tolerances, []


def _check_levelsets(ctx: _Context, p: dict, gate: _Gate):
    grid = ctx.domain
    if ctx.u is None:
        raise ConfigError("levelsets check needs a field; solve.kind is 'none'")
    if not p["levels"]:
        raise ConfigError("levelsets check needs 'levels'")
    tol = p["defect_in_h"] * grid.h_max * ctx.tol_scale
    per_level = []
    artifact_lines = ["level,curve,closed,x0,x1"]
    for c in p["levels"]:
        curves = extract_level_set(grid, ctx.u, float(c), p["grad_floor"])
        kept = [cu for cu in curves if len(cu.vertices) >= p["min_vertices"]]
        defects = [geodesic_defect(ctx.chart, cu) for cu in kept]
        per_level.append(
            {
                "level": float(c),
                "curves": len(curves),
                "evaluated": len(kept),
                "max_defect": max(defects) if defects else None,
                "vertices": int(sum(len(cu.vertices) for cu in kept)),
            }
        )
        gate.require(len(kept) >= 1, f"level[{c:g}].evaluated", len(kept), ">= 1")
        for k, (cu, d) in enumerate(zip(kept, defects)):
            gate.require(d <= tol, f"level[{c:g}].curve[{k}].defect", d, tol)
            for v in cu.vertices:
                artifact_lines.append(
                    f"{float(c)!r},{k},{int(cu.closed)},{float(v[0])!r},{float(v[1])!r}"
                )
    name = "level_curves.csv"
    with open(os.path.join(ctx.out_dir, name), "w") as fh:
        fh.write("\n".join(artifact_lines) + "\n")
    metrics = {"per_level": per_level}
    tolerances = {"defect": tol}
    return metrics, tolerances, [name]


def _check_liouville(ctx: _Context, p: dict, gate: _Gate):
    grid = ctx.domain
    if ctx.u is None:
        raise ConfigError("liouville check needs a field; solve.kind is 'none'")
    dist = ctx.dist_from(p["center"])

    metrics: dict = {}
    tolerances: dict = {}

    if p["volume_radii"]:
        radii = sorted(float(r) for r in p["volume_radii"])
        rows = volume_growth_scan(grid, dist, radii)
        metrics["volume"] = rows
        vols = [r["V"] for r in rows]
        gate.require(
            all(a <= b + 1e-12 for a, b in zip(vols, vols[1:])),
            "volume.monotone",
            vols,
            "nondecreasing in R",
        )
        if p["expect_quartic_decay"]:
            quartic = [r["V_over_R4"] for r in rows if r["V_over_R4"] is not None]
            gate.require(
                all(a > b for a, b in zip(quartic, quartic[1:])),
                "volume.quartic_ratio",
                quartic,
                "strictly decreasing",
            )
        win = p["volume_window"]
        if win:
            tolerances["volume_window"] = win
            for r in rows:
                if r["V_over_R2"] is None or r["R"] < win["min_R"]:
                    continue
                ok = abs(r["V_over_R2"] - win["target"]) <= win["rel"] * win["target"]
                gate.require(ok, f"volume.R2_ratio[R={r['R']:g}]", r["V_over_R2"], win)

    if p["cutoff_radii"]:
        bound = SMOOTHSTEP_LIPSCHITZ + 0.1
        deca = []
        for R in p["cutoff_radii"]:
            R = float(R)
            tau = make_cutoff(grid, dist, R)
            scaled = R * float(np.sqrt(grid.node_grad_norm_sq(tau.values)).max())
            deca.append({"R": R, "scaled_max_grad": scaled})
            gate.require(scaled <= bound, f"deca[R={R:g}]", scaled, bound)
        metrics["deca"] = deca
        tolerances["deca_bound"] = bound
        metrics["zac"] = zac_energy(grid, ctx.u, [float(R) for R in p["cutoff_radii"]], dist)
        for row in metrics["zac"]:
            ok = row["value"] <= row["midlink"] * (1 + 1e-9) + 1e-12
            gate.require(ok, f"zac.value[R={row['R']:g}]", row["value"], row["midlink"])
            ok = row["midlink"] <= row["majorant"] * (1 + 1e-9) + 1e-12
            gate.require(ok, f"zac.midlink[R={row['R']:g}]", row["midlink"], row["majorant"])

    if p["caccioppoli_radii"]:
        rows = []
        for R in p["caccioppoli_radii"]:
            rep = caccioppoli_check(grid, ctx.nl, ctx.u, float(R), dist=dist)
            rows.append(rep.to_dict())
            gate.require(rep.passed, f"caccioppoli[R={R:g}]", rep.lhs, rep.rhs)
        metrics["caccioppoli"] = rows

    if p["parabolicity_outer"]:
        Ri = float(p["parabolicity_inner"])
        energies = []
        for Ro in p["parabolicity_outer"]:
            Ro = float(Ro)
            e = parabolicity_probe(grid, dist, Ro, Ri)
            target = 2 * math.pi / math.log(Ro / Ri)
            energies.append({"R_outer": Ro, "energy": e, "target": target})
            gate.require(
                abs(e - target) <= p["parabolicity_rel"] * target,
                f"parabolicity[R={Ro:g}]",
                e,
                {"target": target, "rel": p["parabolicity_rel"]},
            )
        vals = [row["energy"] for row in energies]
        gate.require(
            all(a >= b for a, b in zip(vals, vals[1:])),
            "parabolicity.monotone",
            vals,
            "non-increasing in R_outer",
        )
        metrics["parabolicity"] = energies
        tolerances["parabolicity_rel"] = p["parabolicity_rel"]

    artifacts = []
    if p["cutoff_radii"]:
        name = "liouville_scan.csv"
        with open(os.path.join(ctx.out_dir, name), "w") as fh:
            fh.write(scan_csv(grid, dist, ctx.u, [float(R) for R in p["cutoff_radii"]]))
        artifacts.append(name)
    return metrics, tolerances, artifacts


_CHECKS = {
    "identities": _check_identities,
    "stability": _check_stability,
    "gf": _check_gf,
    "levelsets": _check_levelsets,
    "liouville": _check_liouville,
}


# -- runner ------------------------------------------------------------------


def _merged_params(name: str, config) -> dict:
    p = copy.deepcopy(_CHECK_DEFAULTS[name])
    p.update(config.get("check_params", {}).get(name, {}))
    return p


def _write_field(ctx: _Context, path: str) -> None:
    if ctx.axisym:
        d = ctx.domain
        lines = [
            "chart,sphere-axisym",
            f"shape,{d.n}",
            f"spacing,{d.h!r}",
            f"origin,{float(d.theta[0])!r}",
            "values",
        ]
        lines.extend(repr(float(v)) for v in ctx.u)
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    else:
        save_field_csv(GridScalarField(ctx.domain, ctx.u), path)


def run(config, out_dir: str | None = None, tol_scale: float = 1.0) -> dict:
    """Execute a config; write report.json and artifacts; return the report."""
    diags = validate(config)
    if diags:
        raise ConfigError("invalid config: " + "; ".join(diags))
    config = copy.deepcopy(config)
    out = out_dir or config.get("output") or os.path.join("out", config["name"])
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"cannot create output directory {out!r}: {e}") from None

    t_start = time.perf_counter()
    domain, chart = _build_domain(config)
    nl = make_nonlinearity(
        config["nonlinearity"]["name"], **config["nonlinearity"].get("params", {})
    )
    ctx = _Context(domain, chart, nl, config["seed"], float(tol_scale), out)
    u, solve_section = _run_solve(ctx, config["solve"])
    ctx.u = u
    solve_bad = solve_section is not None and solve_section.get("converged") is False

    checks = {}
    for name in config["checks"]:
        t0 = time.perf_counter()
        if solve_bad:
            checks[name] = {
                "verdict": "inconclusive",
                "reason": "solve did not converge; field under study is not trusted",
                "metrics": {},
                "tolerances": {},
                "wall_time": 0.0,
            }
            continue
        params = _merged_params(name, config)
        gate = _Gate()
        try:
            metrics, tolerances, artifacts = _CHECKS[name](ctx, params, gate)
            section = {
                "verdict": "fail" if gate.failures else "pass",
                "metrics": metrics,
                "tolerances": tolerances,
            }
            if artifacts:
                section["artifacts"] = artifacts
            if gate.failures:
                section["offending"] = gate.failures
        except LabError as e:
            section = {
                "verdict": "inconclusive",
                "reason": f"{type(e).__name__}: {e}",
                "metrics": {},
                "tolerances": {},
            }
        section["wall_time"] = time.perf_counter() - t0
        checks[name] = section

    verdicts = [s["verdict"] for s in checks.values()]
    overall = (
        "fail" if "fail" in verdicts else "inconclusive" if "inconclusive" in verdicts else "pass"
    )
    report = {
        "schema": SCHEMA_VERSION,
        "name": config["name"],
        "config_hash": config_hash(config),
        "code_version": __version__,
        "tol_scale": float(tol_scale),
        "solve": solve_section,
        "checks": checks,
        "verdict": overall,
        "wall_time": time.perf_counter() - t_start,
    }
    with open(os.path.join(out, "report.json"), "w") as fh:
        fh.write(json.dumps(report, indent=2, sort_keys=True) + "\n")
    if ctx.u is not None:
        _write_field(ctx, os.path.join(out, "u.csv"))
    return report


# -- bundled recipes ---------------------------------------------------------


def recipes() -> dict[str, dict]:
    e = math.e
    book = {
        "identity-sweep": {
            "schema": 1,
            "name": "identity-sweep",
            "chart": {"name": "flat-torus", "params": {}},
            "grid": {"resolution": [64, 64]},
            "nonlinearity": {"name": "allen-cahn", "params": {}},
            "solve": {"kind": "none"},
            "checks": ["identities"],
            "check_params": {
                "identities": {
                    "charts": [
                        {"name": "flat-torus", "params": {}},
                        {"name": "sphere", "params": {"band": 0.4}},
                        {"name": "polar-plane", "params": {}},
                    ],
                    "fields": 10,
                    "ratio_window": [3.5, 4.5],
                }
            },
            "output": os.path.join("out", "identity-sweep"),
            "seed": 101,
        },
        "tanh-cylinder": {
            "schema": 1,
            "name": "tanh-cylinder",
            "chart": {
                "name": "flat-cylinder",
                "params": {"length": 24.0, "circumference": 6.0},
            },
            "grid": {"resolution": [256, 64], "caps": ["fixed", None]},
            "nonlinearity": {"name": "allen-cahn", "params": {}},
            "solve": {"kind": "sample-interface", "direction": 0},
            "checks": ["identities", "stability", "gf", "levelsets"],
            "check_params": {
                "stability": {"expect": [{"field": "u", "verdict": "stable"}]},
                "gf": {"cutoffs": [1.0, 1.5, 2.0, 3.0, 4.0], "center": [0.0, 3.0]},
                "levelsets": {"levels": [-0.5, 0.0, 0.5]},
            },
            "output": os.path.join("out", "tanh-cylinder"),
            "seed": 2718,
        },
        "sphere-bifurcation": {
            "schema": 1,
            "name": "sphere-bifurcation",
            "chart": {"name": "sphere-axisym", "params": {"radius": 1.0}},
            "grid": {"resolution": [256]},
            "nonlinearity": {"name": "scaled-allen-cahn", "params": {"lam": 3.0}},
            "solve": {
                "kind": "continuation",
                "lambdas": [2.2, 2.4, 2.6, 2.8, 3.0],
                "initial": {"kind": "cos-theta", "amplitude": 0.5},
                "options": {"pre_flow_steps": 200},
            },
            "checks": ["stability", "gf"],
            "check_params": {
                "stability": {
                    "modes": [0, 1, 2],
                    "constants": [1.0, -1.0, 0.0],
                    "shift": 0.7,
                    "shift_field": "const[0]",
                    "expect": [
                        {"field": "u", "verdict": "unstable", "lambda_max": -0.1},
                        {"field": "const[1]", "verdict": "stable", "lambda": 6.0, "tol": 1e-3},
                        {"field": "const[-1]", "verdict": "stable", "lambda": 6.0, "tol": 1e-3},
                        {"field": "const[0]", "lambda": -3.0, "tol": 1e-4},
                        {
                            "field": "const[0]",
                            "nonlinearity": {"name": "allen-cahn", "params": {}},
                            "lambda": -1.0,
                            "tol": 1e-4,
                        },
                    ],
                },
                "gf": {"whole_manifold": True},
            },
            "output": os.path.join("out", "sphere-bifurcation"),
            "seed": 31,
        },
        "flat-plane-liouville": {
            "schema": 1,
            "name": "flat-plane-liouville",
            "chart": {"name": "flat-plane", "params": {"half_extent": [24.0, 24.0]}},
            "grid": {"resolution": [1024, 1024], "caps": ["fixed", "fixed"]},
            "nonlinearity": {"name": "tanh-step", "params": {}},
            "solve": {"kind": "newton", "initial": {"kind": "constant", "value": 0.0}},
            "checks": ["liouville"],
            "check_params": {
                "liouville": {
                    "center": [0.0, 0.0],
                    "volume_radii": [0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0],
                    "cutoff_radii": [1.0, 2.0, 4.0],
                    "caccioppoli_radii": [2.0, 4.0, 8.0],
                    "parabolicity_outer": [e, e**2, e**3],
                    "parabolicity_inner": 1.0,
                    "volume_window": {"target": math.pi, "rel": 0.05, "min_R": 4.0},
                }
            },
            "output": os.path.join("out", "flat-plane-liouville"),
            "seed": 7,
        },
    }
    return copy.deepcopy(book)


def list_recipes() -> list[str]:
    return sorted(recipes())
