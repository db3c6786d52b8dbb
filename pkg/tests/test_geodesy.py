"""Geodesic integration, level-set extraction, and defect measurements."""

import numpy as np
import pytest

from stablab.charts import flat_cylinder, flat_plane, polar_plane, sphere
from stablab.errors import DomainExit, EmptyLevelSet, TooFewVertices
from stablab.geodesy import LevelCurve, extract_level_set, geodesic_defect, integrate_geodesic
from stablab.grid import StructuredGrid


def test_flat_chart_straight_line():
    chart = flat_plane((10.0, 10.0))
    x0, v0 = np.array([-3.0, 2.0]), np.array([0.7, -0.3])
    path = integrate_geodesic(chart, x0, v0, T=5.0, dt=1e-3)
    assert not path.exited
    exact = x0[None, :] + path.t[:, None] * v0[None, :]
    assert np.abs(path.x - exact).max() <= 1e-10
    assert np.abs(path.v - v0).max() <= 1e-12


def test_equatorial_great_circle_closes():
    chart = sphere(radius=1.0, band=0.4)
    path = integrate_geodesic(chart, [np.pi / 2, 0.1], [0.0, 1.0], T=2 * np.pi, dt=1e-3)
    assert not path.exited
    assert abs(path.x[-1, 0] - np.pi / 2) <= 1e-6
    assert abs(path.x[-1, 1] - (0.1 + 2 * np.pi)) <= 1e-6
    assert path.speed_drift_per_time <= 1e-6


def test_polar_chart_radial_ray_is_straight():
    chart = polar_plane(0.5, 3.0)
    path = integrate_geodesic(chart, [1.0, 1.2], [1.0, 0.0], T=1.5, dt=1e-3)
    assert not path.exited
    assert np.abs(path.x[:, 0] - (1.0 + path.t)).max() <= 1e-8
    assert np.abs(path.x[:, 1] - 1.2).max() <= 1e-10


def test_tilted_sphere_geodesic_reverses():
    chart = sphere(radius=1.0, band=0.4)
    fwd = integrate_geodesic(chart, [1.0, 0.5], [0.3, 0.8], T=1.0, dt=1e-3)
    assert not fwd.exited
    back = integrate_geodesic(chart, fwd.x[-1], -fwd.v[-1], T=1.0, dt=1e-3)
    assert np.abs(back.x[-1] - np.array([1.0, 0.5])).max() <= 1e-6
    assert np.abs(back.v[-1] + np.array([0.3, 0.8])).max() <= 1e-6
    assert fwd.speed_drift_per_time <= 1e-6


def test_domain_exit_clips_and_flags():
    chart = flat_plane((2.0, 2.0))
    path = integrate_geodesic(chart, [1.5, 0.0], [1.0, 0.0], T=2.0, dt=1e-3)
    assert path.exited
    assert path.t[-1] < 2.0
    assert path.x[:, 0].max() <= 2.0
    with pytest.raises(DomainExit) as err:
        integrate_geodesic(chart, [1.5, 0.0], [1.0, 0.0], T=2.0, dt=1e-3, strict=True)
    assert err.value.path is not None


def test_integrated_geodesic_has_small_defect():
    chart = sphere(radius=1.0, band=0.4)
    dt = 1e-3
    path = integrate_geodesic(chart, [1.0, 0.5], [0.3, 0.8], T=2.0, dt=dt)
    curve = LevelCurve(vertices=path.x, level=0.0, closed=False)
    assert geodesic_defect(chart, curve) <= 10 * dt**2


def test_level_set_of_interface_is_the_zero_line():
    chart = flat_cylinder(length=20.0, circumference=4.0)
    grid = StructuredGrid(chart, (96, 16), caps=("fixed", None))
    u = np.tanh(grid.nodes[..., 0] / np.sqrt(2.0))
    curves = extract_level_set(grid, u, 0.0)
    assert len(curves) == 1
    curve = curves[0]
    assert curve.closed  # wraps the periodic circumference
    h = grid.h_max
    assert np.abs(curve.vertices[:, 0]).max() <= 2 * h
    gn_sup = float(np.sqrt(grid.node_grad_norm_sq(u)).max())
    u_at = grid.interpolate(u, curve.vertices)
    assert np.abs(u_at - curve.level).max() <= h * gn_sup
    assert np.all(curve.grad_values > curve.meta["grad_floor"])
    assert geodesic_defect(chart, curve) <= 2 * h


def test_level_set_circle_curvature():
    chart = flat_plane((2.0, 2.0))
    grid = StructuredGrid(chart, (64, 64))
    x = grid.nodes
    u = x[..., 0] ** 2 + x[..., 1] ** 2
    curves = extract_level_set(grid, u, 1.0)
    assert len(curves) == 1
    curve = curves[0]
    assert curve.closed
    radii = np.linalg.norm(curve.vertices, axis=1)
    assert np.abs(radii - 1.0).max() <= 2 * grid.h_max
    # geodesic curvature of the unit circle is 1
    assert geodesic_defect(chart, curve) == pytest.approx(1.0, abs=0.05)


def test_level_outside_range():
    grid = StructuredGrid(flat_plane((2.0, 2.0)), (16, 16))
    u = grid.nodes[..., 0]
    with pytest.raises(EmptyLevelSet):
        extract_level_set(grid, u, 5.0)


def test_cylinder_cross_circle_is_geodesic():
    chart = flat_cylinder(length=20.0, circumference=4.0)
    grid = StructuredGrid(chart, (96, 16), caps=("fixed", None))
    u = grid.nodes[..., 0].copy()
    curves = extract_level_set(grid, u, 0.4)
    assert len(curves) == 1
    assert curves[0].closed
    assert geodesic_defect(chart, curves[0]) <= 1e-8


def test_too_few_vertices_guard():
    chart = flat_plane((2.0, 2.0))
    curve = LevelCurve(vertices=np.array([[0.0, 0.0], [0.1, 0.0], [0.2, 0.0]]), level=0.0)
    with pytest.raises(TooFewVertices):
        geodesic_defect(chart, curve)
