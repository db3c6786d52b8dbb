"""Weighted Poincare inequality: reports, derivation residual, flatness integrals."""

import numpy as np
import pytest

from stablab.charts import flat_cylinder, flat_plane, flat_torus, sphere
from stablab.errors import NotASolution, SupportViolation
from stablab.grid import StructuredGrid
from stablab.nonlinearity import make_nonlinearity
from stablab.poincare import (
    gf_report,
    sz_derivation_residual,
    tol_gf,
    vp_integral,
    vp_report,
)
from stablab.solver import SolveConfig, solve_semilinear
from stablab.sphere import SphereAxisymmetric
from stablab.stability import principal_eigenvalue


def _tanh_grid(n0=160, n1=8, length=20.0):
    chart = flat_cylinder(length=length, circumference=4.0)
    grid = StructuredGrid(chart, (n0, n1), caps=("fixed", None))
    u = np.tanh(grid.nodes[..., 0] / np.sqrt(2.0))
    return grid, u


def _bump(grid, halfwidth=7.0):
    t = grid.nodes[..., 0] / halfwidth
    return np.clip(1.0 - t**2, 0.0, None) ** 3


@pytest.fixture(scope="module")
def ac():
    return make_nonlinearity("allen-cahn")


def test_constant_solution_gives_zero_report(ac):
    torus = StructuredGrid(flat_torus((1.0, 1.0)), (16, 16))
    phi = np.cos(2 * np.pi * torus.nodes[..., 0]) ** 2
    rep = gf_report(torus, torus.constant(1.0), phi)
    assert rep.lhs == 0.0 and rep.rhs == 0.0 and rep.slack == 0.0
    assert sz_derivation_residual(torus, ac, torus.constant(1.0), phi) <= 1e-12


def test_report_scales_quadratically_in_phi():
    grid, u = _tanh_grid()
    phi = _bump(grid)
    r1 = gf_report(grid, u, phi)
    r3 = gf_report(grid, u, 3.0 * phi)
    assert r3.lhs == pytest.approx(9.0 * r1.lhs, rel=1e-12, abs=1e-18)
    assert r3.rhs == pytest.approx(9.0 * r1.rhs, rel=1e-12)


def test_interface_profile_satisfies_inequality():
    grid, u = _tanh_grid()
    phi = _bump(grid)
    rep = gf_report(grid, u, phi)
    # flat chart + 1d profile: Ricci term vanishes and the Kato gap cancels
    assert abs(rep.lhs) <= tol_gf(grid, u, phi)
    assert rep.rhs > 0
    assert rep.slack > 0


def test_lhs_decomposes_through_vp_integral():
    grid, u = _tanh_grid()
    phi = _bump(grid)
    rep = gf_report(grid, u, phi)
    direct = vp_integral(grid, u, weight=phi**2)
    assert rep.lhs == pytest.approx(direct, abs=1e-10 * max(1.0, abs(direct)))


def test_vp_whole_cylinder_is_small():
    grid, u = _tanh_grid(192, 8)
    val = vp_integral(grid, u)
    assert abs(val) <= 50 * grid.h_max**2


def test_vp_cos_theta_band_positive_curvature_term():
    chart = sphere(radius=1.0, band=0.4)
    grid = StructuredGrid(chart, (48, 32))
    u = np.cos(grid.nodes[..., 0])
    parts = vp_report(grid, u)
    lo, hi = 0.4, np.pi - 0.4
    ric_exact = 2 * np.pi * (
        (-np.cos(hi) + np.cos(hi) ** 3 / 3) - (-np.cos(lo) + np.cos(lo) ** 3 / 3)
    )
    area_exact = 2 * np.pi * (np.cos(lo) - np.cos(hi))
    assert parts.ric_part > 0
    assert parts.ric_part == pytest.approx(ric_exact, rel=0.05)
    # Kato gap of cos(theta) is cos^2, so the total is exactly the band area
    assert parts.value == pytest.approx(area_exact, rel=0.02)


def test_sz_residual_second_order():
    ac = make_nonlinearity("allen-cahn")
    res = {}
    for n0 in (96, 192):
        grid, u = _tanh_grid(n0, 8)
        phi = _bump(grid)
        res[n0] = sz_derivation_residual(grid, ac, u, phi)
        assert res[n0] <= 20 * grid.h_max**2
    assert 2.5 < res[96] / res[192] < 7.0


def test_sz_rejects_non_solutions(ac):
    grid, _ = _tanh_grid()
    x = grid.nodes
    wiggly = 2.0 * np.sin(8 * np.pi * x[..., 0] / 20.0) * np.cos(4 * np.pi * x[..., 1] / 4.0)
    with pytest.raises(NotASolution):
        sz_derivation_residual(grid, ac, wiggly, _bump(grid))


def test_gf_requires_compact_support():
    grid = StructuredGrid(flat_plane((2.0, 2.0)), (16, 16))
    with pytest.raises(SupportViolation):
        gf_report(grid, grid.constant(0.5), np.ones(grid.shape))


def test_unstable_branch_reports_negative_slack(ac):
    dom = SphereAxisymmetric(1.0, 128)
    nl = make_nonlinearity("scaled-allen-cahn", lam=3.0)
    u0 = 0.5 * np.cos(dom.theta)
    u, rep = solve_semilinear(dom, nl, u0, SolveConfig(pre_flow_steps=200))
    assert rep.converged
    gf = gf_report(dom, u, np.ones(dom.n), cutoff_id="phi=1")
    # with constant phi the rhs vanishes while Ric > 0 keeps lhs positive
    assert gf.rhs == pytest.approx(0.0, abs=1e-12)
    assert gf.lhs > 0
    assert gf.slack < 0
    stab = principal_eigenvalue(dom, nl, u, modes=(0, 1, 2))
    assert stab.verdict == "unstable"


def test_vp_axisymmetric_cos_theta_totals_area():
    dom = SphereAxisymmetric(1.0, 256)
    u = np.cos(dom.theta)
    parts = vp_report(dom, u)
    assert parts.value == pytest.approx(4 * np.pi, rel=0.02)
    assert parts.ric_part == pytest.approx(8 * np.pi / 3, rel=0.02)
