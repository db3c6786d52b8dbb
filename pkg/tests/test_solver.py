"""Solver tests: residual/energy duality, Newton basins, flow fallback,
translation equivariance, and the axisymmetric sphere branch."""

import numpy as np
import pytest

from stablab.charts import flat_torus
from stablab.grid import StructuredGrid
from stablab.nonlinearity import make_nonlinearity, nonlinearity_names, shifted
from stablab.solver import SolveConfig, energy, pde_residual, solve_semilinear, continuation
from stablab.sphere import SphereAxisymmetric


@pytest.fixture(scope="module")
def torus():
    return StructuredGrid(flat_torus((1.0, 1.0)), (32, 24))


def test_constant_roots_have_zero_residual(torus):
    nl = make_nonlinearity("allen-cahn")
    for c in (-1.0, 0.0, 1.0):
        r = pde_residual(torus, nl, torus.constant(c))
        assert np.all(r == 0.0)


def test_energy_oracles(torus):
    nl = make_nonlinearity("allen-cahn")
    # F(1) = 1/2 - 1/4 = 1/4 on the unit-area torus
    assert energy(torus, nl, torus.constant(1.0)) == pytest.approx(-0.25, abs=1e-14)
    assert energy(torus, nl, torus.constant(0.0)) == 0.0


def test_energy_gradient_is_residual(torus):
    """(E(u+t xi) - E(u-t xi)) / 2t matches sum w r xi: discrete duality."""
    nl = make_nonlinearity("allen-cahn")
    x = torus.nodes
    u = 0.3 * np.sin(2 * np.pi * x[..., 0]) * np.cos(2 * np.pi * x[..., 1])
    xi = 0.2 * np.cos(4 * np.pi * x[..., 1]) + 0.1 * np.sin(2 * np.pi * x[..., 0])
    t = 1e-5
    fd = (energy(torus, nl, u + t * xi) - energy(torus, nl, u - t * xi)) / (2 * t)
    pairing = float(np.sum(torus.weights * pde_residual(torus, nl, u) * xi))
    assert fd == pytest.approx(pairing, rel=1e-5, abs=1e-10)


def test_newton_basin_of_one(torus):
    nl = make_nonlinearity("allen-cahn")
    u, rep = solve_semilinear(torus, nl, torus.constant(0.9))
    assert rep.converged
    assert rep.method == "newton"
    assert rep.residual_sup <= 1e-10
    assert np.abs(u.values - 1.0).max() <= 1e-9
    assert rep.energy == pytest.approx(-0.25, abs=1e-12)


def test_exact_root_costs_zero_iterations(torus):
    nl = make_nonlinearity("allen-cahn")
    _, rep = solve_semilinear(torus, nl, torus.constant(1.0))
    assert rep.converged
    assert rep.iterations == 0
    assert rep.residual_sup == 0.0


def test_indefinite_jacobian_triggers_flow_fallback(torus):
    # at u = 0.3 the linearization -Lap - f'(0.3) has a negative constant mode
    nl = make_nonlinearity("allen-cahn")
    u, rep = solve_semilinear(torus, nl, torus.constant(0.3))
    assert rep.converged
    assert rep.method == "newton+flow"
    assert any("flow" in n for n in rep.notes)
    assert np.abs(u.values - 1.0).max() <= 1e-8


def test_solution_commutes_with_grid_translation(torus):
    nl = make_nonlinearity("allen-cahn")
    x = torus.nodes
    u0 = 0.5 + 0.3 * np.sin(2 * np.pi * x[..., 0]) * np.cos(2 * np.pi * x[..., 1])
    shift = (5, 7)
    u_a, rep_a = solve_semilinear(torus, nl, u0)
    u_b, rep_b = solve_semilinear(torus, nl, np.roll(u0, shift, axis=(0, 1)))
    assert rep_a.converged and rep_b.converged
    assert np.array_equal(np.roll(u_a, shift, axis=(0, 1)), u_b)
    assert rep_a.iterations == rep_b.iterations


def test_nonlinearity_tables_are_consistent():
    for name in nonlinearity_names():
        nl = make_nonlinearity(name)
        e_f, e_fp = nl.consistency_errors()
        assert e_f <= 1e-6 and e_fp <= 1e-6


def test_shifted_nonlinearity_adds_linear_term():
    nl = make_nonlinearity("allen-cahn")
    sh = shifted(nl, 0.7)
    t = np.linspace(-2, 2, 9)
    assert np.allclose(sh.f(t) - nl.f(t), 0.7 * t, atol=1e-15)
    assert np.allclose(sh.f_prime(t) - nl.f_prime(t), 0.7, atol=1e-15)


def test_continuation_keeps_branch_metadata(torus):
    lams = [0.5, 0.75, 1.0]
    results = continuation(
        torus,
        lambda lam: make_nonlinearity("scaled-allen-cahn", lam=lam),
        lams,
        torus.constant(0.8),
    )
    assert [lam for lam, _, _ in results] == lams
    for k, (lam, u, rep) in enumerate(results):
        assert rep.converged
        assert rep.branch == {"lambda": lam, "leg": k}
        assert np.abs(u - 1.0).max() <= 1e-8


def test_sphere_constant_root():
    dom = SphereAxisymmetric(1.0, 96)
    nl = make_nonlinearity("scaled-allen-cahn", lam=3.0)
    u, rep = solve_semilinear(dom, nl, dom.constant(0.9))
    assert rep.converged
    assert np.abs(u - 1.0).max() <= 1e-9


def test_sphere_nonconstant_branch():
    """Above the first symmetric bifurcation a cos(theta)-profile root exists."""
    dom = SphereAxisymmetric(1.0, 96)
    nl = make_nonlinearity("scaled-allen-cahn", lam=2.5)
    u0 = 0.5 * np.cos(dom.theta)
    cfg = SolveConfig(pre_flow_steps=200)
    u, rep = solve_semilinear(dom, nl, u0, cfg)
    assert rep.converged
    assert rep.residual_sup <= 1e-10
    amp = np.abs(u).max()
    assert 0.3 < amp < 0.9
    # aligned with the seeded azimuthal profile, not a constant
    overlap = dom.integrate(u * np.cos(dom.theta)) / dom.integrate(np.cos(dom.theta) ** 2)
    assert abs(overlap) > 0.3
    assert np.abs(u - u.mean()).max() > 0.2
