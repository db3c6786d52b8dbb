"""Cutoff families, volume growth, energy bounds, parabolicity probe."""

import math

import numpy as np
import pytest

from stablab.charts import flat_plane, sphere
from stablab.eikonal import geodesic_distance
from stablab.errors import (
    ConfigError,
    RadiusTooSmall,
    SignConditionViolated,
    SupportViolation,
)
from stablab.grid import StructuredGrid
from stablab.liouville import (
    SMOOTHSTEP_LIPSCHITZ,
    CutoffFamily,
    caccioppoli_check,
    cutoff_profile,
    cutoff_profile_slope,
    make_cutoff,
    parabolicity_probe,
    scan_csv,
    volume_growth_scan,
    zac_energy,
)
from stablab.nonlinearity import make_nonlinearity
from stablab.solver import SolveConfig, solve_semilinear


@pytest.fixture(scope="module")
def plane():
    grid = StructuredGrid(flat_plane(half_extent=(16.0, 16.0)), (512, 512))
    dist = geodesic_distance(grid, (0.0, 0.0))
    return grid, dist.values


@pytest.fixture(scope="module")
def hump():
    """Positive hump solving -lap u = (1 - tanh u)/2 with pinned zero edges."""
    grid = StructuredGrid(flat_plane(half_extent=(12.0, 12.0)), (256, 256), caps=("fixed", "fixed"))
    nl = make_nonlinearity("tanh-step")
    u, rep = solve_semilinear(grid, nl, grid.constant(0.0), SolveConfig())
    assert rep.converged
    dist = geodesic_distance(grid, (0.0, 0.0))
    return grid, nl, u, dist.values


def test_profile_plateau_descent_tail():
    t = np.array([0.0, 0.3, 1.0, 1.5, 2.0, 2.7])
    tau = cutoff_profile(t)
    assert tau[0] == 1.0 and tau[1] == 1.0 and tau[2] == 1.0
    assert tau[3] == pytest.approx(0.5, abs=1e-15)
    assert tau[4] == 0.0 and tau[5] == 0.0
    assert np.all((tau >= 0) & (tau <= 1))
    # monotone descent on [1, 2]
    s = np.linspace(1, 2, 400)
    assert np.all(np.diff(cutoff_profile(s)) <= 0)


def test_profile_slope_peak_is_exact():
    assert cutoff_profile_slope(1.5) == -SMOOTHSTEP_LIPSCHITZ
    assert SMOOTHSTEP_LIPSCHITZ == 15.0 / 8.0
    t = np.linspace(0, 3, 2001)
    assert np.abs(cutoff_profile_slope(t)).max() <= SMOOTHSTEP_LIPSCHITZ


def test_profile_is_c2_at_joints():
    eps = 1e-7
    for joint in (1.0, 2.0):
        left = cutoff_profile_slope(joint - eps)
        right = cutoff_profile_slope(joint + eps)
        assert abs(float(left) - float(right)) < 1e-5
    # second derivative of the descent vanishes at both ends
    h = 1e-4
    for joint in (1.0, 2.0):
        second = (
            cutoff_profile(joint + h) - 2 * cutoff_profile(joint) + cutoff_profile(joint - h)
        ) / h**2
        assert abs(float(second)) < 1e-2


def test_cutoff_sandwich_is_exact(plane):
    grid, dist = plane
    R = 2.0
    tau = make_cutoff(grid, dist, R)
    assert np.all(tau.values[dist < R] == 1.0)
    assert np.all(tau.values[dist > 2 * R] == 0.0)
    assert np.all((tau.values >= 0.0) & (tau.values <= 1.0))
    assert tau.cutoff_id == "tau[R=2]"


def test_scaled_gradient_bound(plane):
    grid, dist = plane
    fam = CutoffFamily(grid, dist)
    assert fam.C_o == 15.0 / 8.0
    for R in (1.0, 2.0, 4.0):
        assert R * fam.max_gradient(R) <= SMOOTHSTEP_LIPSCHITZ + 0.1


def test_radius_guards(plane):
    grid, dist = plane
    with pytest.raises(RadiusTooSmall):
        make_cutoff(grid, dist, 4 * grid.h_max)
    with pytest.raises(SupportViolation):
        make_cutoff(grid, dist, 8.5)  # support {d < 17} leaves the chart
    with pytest.raises(ConfigError):
        CutoffFamily(grid, dist - 1.0)


def test_volume_growth_plane(plane):
    grid, dist = plane
    rows = volume_growth_scan(grid, dist, [0.0, 2.0, 4.0, 6.0, 8.0, 12.0])
    assert rows[0]["V"] == 0.0
    assert rows[0]["V_over_R2"] is None and rows[0]["V_over_R4"] is None
    vols = [r["V"] for r in rows]
    assert vols == sorted(vols)
    for r in rows[2:]:
        assert r["V_over_R2"] == pytest.approx(math.pi, rel=0.05)
    quartic = [r["V_over_R4"] for r in rows[1:]]
    assert all(a > b for a, b in zip(quartic, quartic[1:]))


def test_volume_growth_saturates_on_compact_band():
    grid = StructuredGrid(sphere(radius=1.0, band=0.4), (128, 256))
    dist = geodesic_distance(grid, (math.pi / 2, math.pi))
    rows = volume_growth_scan(grid, dist, [1.0, 2.0, 4.0, 6.0])
    vols = [r["V"] for r in rows]
    assert vols == sorted(vols)
    band_area = 4 * math.pi * math.cos(0.4)
    assert vols[-1] == pytest.approx(band_area, rel=0.02)
    assert vols[-1] == pytest.approx(vols[-2], rel=1e-12)
    assert rows[-1]["V_over_R2"] < rows[1]["V_over_R2"]


def test_caccioppoli_constant_field(plane):
    grid, dist = plane
    nl = make_nonlinearity("tanh-step")
    rep = caccioppoli_check(grid, nl, grid.constant(0.3), 4.0, dist=dist)
    assert rep.lhs == 0.0
    assert rep.passed
    assert rep.C_star == 0.0 and rep.C_bar == 0.0


def test_caccioppoli_sign_condition(plane):
    grid, dist = plane
    nl = make_nonlinearity("allen-cahn")
    u = grid.constant(0.0)
    with pytest.raises(SignConditionViolated):
        caccioppoli_check(grid, nl, u, 4.0, dist=dist)


def test_caccioppoli_holds_for_hump(hump):
    grid, nl, u, dist = hump
    for R in (2.0, 4.0):
        rep = caccioppoli_check(grid, nl, u, R, dist=dist)
        assert rep.passed, f"R={R}: lhs={rep.lhs}, rhs={rep.rhs}"
        assert rep.lhs > 0.0
        assert rep.C_bar == pytest.approx(
            4 * (rep.m_plus - rep.m_minus) ** 2 * (15 / 8) ** 2, rel=1e-12
        )
        assert rep.C_star == pytest.approx(2 * (rep.m_plus - rep.m_minus) ** 2, rel=1e-12)


def test_cutoff_energy_constants_for_linear_field(plane):
    """For u = x0 the energy equals the profile's own Dirichlet mass.

    On the plane int |grad tau_R|^2 = 2 pi integral_0^1 (30 s^2(1-s)^2)^2 (1+s) ds
    = 2 pi * 15/7 for every R: the scan must be flat in R at that value.
    """
    grid, dist = plane
    u = grid.nodes[..., 0]
    rows = zac_energy(grid, u, [2.0, 4.0], dist=dist)
    oracle = 2 * math.pi * 15.0 / 7.0
    for row in rows:
        assert row["value"] == pytest.approx(oracle, rel=0.05)
        assert row["value"] <= row["midlink"] * (1 + 1e-9) + 1e-12
        assert row["midlink"] <= row["majorant"] * (1 + 1e-9) + 1e-12
    assert rows[1]["value"] >= 0.9 * rows[0]["value"]


def test_cutoff_energy_decays_for_localized_gradient(plane):
    grid, dist = plane
    r2 = grid.nodes[..., 0] ** 2 + grid.nodes[..., 1] ** 2
    u = np.exp(-r2)
    rows = zac_energy(grid, u, [1.0, 2.0, 4.0], dist=dist)
    vals = [r["value"] for r in rows]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] <= 1e-6 * vals[0]


def test_parabolicity_probe_matches_log_energy(plane):
    grid, dist = plane
    for k in (1, 2):
        energy = parabolicity_probe(grid, dist, math.e**k, 1.0)
        assert energy == pytest.approx(2 * math.pi / k, rel=0.1)
    e1 = parabolicity_probe(grid, dist, math.e, 1.0)
    e2 = parabolicity_probe(grid, dist, math.e**2, 1.0)
    assert e2 <= e1


def test_parabolicity_validation(plane):
    grid, dist = plane
    with pytest.raises(ConfigError):
        parabolicity_probe(grid, dist, 1.0, 2.0)
    with pytest.raises(RadiusTooSmall):
        parabolicity_probe(grid, dist, 4.0, grid.h_max)


def test_scan_csv_shape(plane):
    grid, dist = plane
    u = grid.nodes[..., 0]
    text = scan_csv(grid, dist, u, [2.0, 4.0])
    lines = text.strip().split("\n")
    assert lines[0] == "R,V_R,V_over_R2,V_over_R4,zac_energy,majorant"
    assert len(lines) == 3
    first = [float(tok) for tok in lines[1].split(",")]
    assert first[0] == 2.0
    assert first[2] == pytest.approx(math.pi, rel=0.05)
