"""Weighted Poincare inequality machinery.

The central object is the nodewise stability integrand

    Ric(grad u, grad u) + |Hess u|^2 - |grad |grad u||^2

whose integral against phi^2 (the report's lhs) is controlled by
rhs = int |grad u|^2 |grad phi|^2 for stable solutions.  The Kato gap
|Hess u|^2 - |grad |grad u||^2 is nonnegative in the continuum; where
|grad u| falls at or below the gradient floor the gap is set to its floor 0,
which can only make the inequality easier to violate and therefore never
produces a false pass.

Two independent evaluation routes are kept deliberately separate: the
quadratic form Q(|grad u| phi) via summation-by-parts differences, and the
rearranged rhs - lhs via nodewise derivatives.  Their difference is the
derivation residual, an O(h^2) quantity for genuine solutions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotASolution
from .grid import StructuredGrid
from .nonlinearity import Nonlinearity
from .solver import pde_residual
from .sphere import SphereAxisymmetric
from .stability import _require_compact_support, stability_form

__all__ = [
    "GFReport",
    "VPParts",
    "gf_report",
    "vp_integral",
    "vp_report",
    "sz_derivation_residual",
    "tol_gf",
    "stability_integrand",
    "default_grad_floor",
]


def default_grad_floor(domain, u) -> float:
    uv = domain._values(u)
    return 1e-2 * float(np.sqrt(domain.node_grad_norm_sq(uv)).max())


def _node_partial(grid: StructuredGrid, arr: np.ndarray, axis: int) -> np.ndarray:
    if grid.chart.periodic[axis]:
        return (np.roll(arr, -1, axis=axis) - np.roll(arr, 1, axis=axis)) / (2 * grid.spacing[axis])
    return np.gradient(arr, grid.spacing[axis], axis=axis, edge_order=2)


def _grid_christoffel_nodes(grid: StructuredGrid) -> np.ndarray:
    """Gamma^k_ij at the nodes: analytic when the chart carries symbols,
    otherwise centered differences of the stored node metric."""
    if grid.chart.analytic_christoffel is not None:
        return np.asarray(grid.chart.analytic_christoffel(grid.nodes), dtype=float)
    g = grid.metric_nodes
    dg = np.stack([_node_partial(grid, g, a) for a in range(2)], axis=-3)  # (.., i, j, k)
    ginv = grid.inverse_metric_nodes
    # Gamma^k_ij = 1/2 g^{kh} (d_i g_hj + d_j g_ih - d_h g_ij)
    term = dg + np.einsum("...jhi->...ihj", dg) - np.einsum("...hij->...ihj", dg)
    return 0.5 * np.einsum("...kh,...ihj->...kij", ginv, term)


def _grid_ricci_nodes(grid: StructuredGrid) -> np.ndarray:
    if grid.chart.analytic_ricci is not None:
        return np.asarray(grid.chart.analytic_ricci(grid.nodes), dtype=float)
    gam = _grid_christoffel_nodes(grid)
    dgam = np.stack([_node_partial(grid, gam, a) for a in range(2)], axis=-4)  # (.., h, k, i, j)
    # R_ij = d_k Gamma^k_ij - d_j Gamma^k_ik + Gamma^k_kh Gamma^h_ij - Gamma^k_jh Gamma^h_ik
    ric = np.einsum("...kkij->...ij", dgam)
    ric -= np.einsum("...jkik->...ij", dgam)
    ric += np.einsum("...kkh,...hij->...ij", gam, gam)
    ric -= np.einsum("...kjh,...hik->...ij", gam, gam)
    return ric


def stability_integrand(domain, u, grad_floor: float | None = None) -> dict:
    """Nodewise pieces of the inequality: returns arrays ``ric_term``,
    ``gap`` (floored Kato gap), ``grad_sq``, plus the floor used."""
    uv = domain._values(u)
    if grad_floor is None:
        grad_floor = default_grad_floor(domain, uv)

    if isinstance(domain, SphereAxisymmetric):
        a = domain.radius
        th = domain.theta
        h = domain.h
        du = np.gradient(uv, h, edge_order=2)
        d2u = np.gradient(du, h, edge_order=2)
        cot = np.cos(th) / np.sin(th)
        grad_sq = du**2 / a**2
        hess_sq = (d2u**2 + (cot * du) ** 2) / a**4
        w = np.abs(du) / a
        dw = np.gradient(w, h, edge_order=2)
        grad_w_sq = dw**2 / a**2
        ric_term = grad_sq / a**2
    else:
        grid: StructuredGrid = domain
        ginv = grid.inverse_metric_nodes
        du = np.stack([_node_partial(grid, uv, a) for a in range(2)], axis=-1)
        gradu_up = np.einsum("...ij,...j->...i", ginv, du)
        grad_sq = np.einsum("...i,...i->...", gradu_up, du)
        d2u = np.empty(grid.shape + (2, 2))
        d2u[..., 0, 0] = _node_partial(grid, du[..., 0], 0)
        d2u[..., 1, 1] = _node_partial(grid, du[..., 1], 1)
        mixed = 0.5 * (_node_partial(grid, du[..., 0], 1) + _node_partial(grid, du[..., 1], 0))
        d2u[..., 0, 1] = mixed
        d2u[..., 1, 0] = mixed
        gam = _grid_christoffel_nodes(grid)
        hess = d2u - np.einsum("...kij,...k->...ij", gam, du)
        hess_sq = np.einsum("...ai,...bj,...ij,...ab->...", ginv, ginv, hess, hess)
        w = np.sqrt(np.maximum(grad_sq, 0.0))
        dwv = np.stack([_node_partial(grid, w, a) for a in range(2)], axis=-1)
        grad_w_sq = np.einsum("...ij,...i,...j->...", ginv, dwv, dwv)
        ric = _grid_ricci_nodes(grid)
        ric_term = np.einsum("...ij,...i,...j->...", ric, gradu_up, gradu_up)

    above = np.sqrt(np.maximum(grad_sq, 0.0)) > grad_floor
    gap = np.where(above, hess_sq - grad_w_sq, 0.0)
    return {
        "ric_term": ric_term,
        "gap": gap,
        "grad_sq": grad_sq,
        "grad_floor": float(grad_floor),
    }


@dataclass
class VPParts:
    value: float
    ric_part: float
    gap_part: float

    def to_dict(self) -> dict:
        return {"value": self.value, "ric_part": self.ric_part, "gap_part": self.gap_part}


def vp_report(domain, u, region_mask=None, grad_floor: float | None = None, weight=None) -> VPParts:
    """Flatness integral over a region, with the two summands split out so the
    pointwise vanishing statements can be checked individually."""
    parts = stability_integrand(domain, u, grad_floor)
    w = domain.weights.copy()
    if weight is not None:
        w = w * np.asarray(weight, dtype=float)
    if region_mask is not None:
        w = np.where(region_mask, w, 0.0)
    ric_part = float(np.sum(w * parts["ric_term"]))
    gap_part = float(np.sum(w * parts["gap"]))
    return VPParts(value=ric_part + gap_part, ric_part=ric_part, gap_part=gap_part)


def vp_integral(domain, u, region_mask=None, grad_floor: float | None = None, weight=None) -> float:
    return vp_report(domain, u, region_mask, grad_floor, weight).value


@dataclass
class GFReport:
    lhs: float
    rhs: float
    slack: float
    cutoff_id: str
    grad_floor: float
    ric_part: float = 0.0
    gap_part: float = 0.0

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
            "cutoff_id": self.cutoff_id,
            "grad_floor": self.grad_floor,
            "ric_part": self.ric_part,
            "gap_part": self.gap_part,
        }

    @staticmethod
    def csv_header() -> str:
        return "cutoff_id,lhs,rhs,slack,grad_floor"

    def csv_row(self) -> str:
        return (
            f"{self.cutoff_id},{self.lhs!r},{self.rhs!r},{self.slack!r},{self.grad_floor!r}"
        )


def gf_report(domain, u, phi, grad_floor: float | None = None, cutoff_id: str | None = None) -> GFReport:
    """Both sides of the inequality for one test cutoff phi."""
    uv = domain._values(u)
    pv = domain._values(phi)
    _require_compact_support(domain, pv)
    parts = stability_integrand(domain, uv, grad_floor)
    wq = domain.weights
    lhs_ric = float(np.sum(wq * parts["ric_term"] * pv**2))
    lhs_gap = float(np.sum(wq * parts["gap"] * pv**2))
    lhs = lhs_ric + lhs_gap
    if isinstance(domain, SphereAxisymmetric):
        dphi = np.gradient(pv, domain.h, edge_order=2)
        grad_phi_sq = dphi**2 / domain.radius**2
    else:
        dphi = np.stack([_node_partial(domain, pv, a) for a in range(2)], axis=-1)
        grad_phi_sq = np.einsum("...ij,...i,...j->...", domain.inverse_metric_nodes, dphi, dphi)
    rhs = float(np.sum(wq * parts["grad_sq"] * grad_phi_sq))
    if cutoff_id is None:
        cutoff_id = getattr(phi, "cutoff_id", "custom")
    return GFReport(
        lhs=lhs,
        rhs=rhs,
        slack=rhs - lhs,
        cutoff_id=str(cutoff_id),
        grad_floor=parts["grad_floor"],
        ric_part=lhs_ric,
        gap_part=lhs_gap,
    )


def tol_gf(domain, u, phi, C: float = 10.0) -> float:
    """Discretization allowance C h^2 |grad u|_inf^2 |phi|_{H^1}^2 for slack checks."""
    uv = domain._values(u)
    pv = domain._values(phi)
    gsup = float(domain.node_grad_norm_sq(uv).max())
    if isinstance(domain, SphereAxisymmetric):
        dphi = np.gradient(pv, domain.h, edge_order=2)
        gphi = dphi**2 / domain.radius**2
    else:
        dphi = np.stack([_node_partial(domain, pv, a) for a in range(2)], axis=-1)
        gphi = np.einsum("...ij,...i,...j->...", domain.inverse_metric_nodes, dphi, dphi)
    h1 = float(np.sum(domain.weights * (pv**2 + gphi)))
    return C * domain.h_max**2 * max(gsup, 1e-30) * h1


def solution_residual_tol(domain, nl: Nonlinearity, u) -> float:
    uv = domain._values(u)
    return 5.0 * domain.h_max**2 * (1.0 + float(np.abs(nl.f_prime(uv)).max()))


def sz_derivation_residual(
    domain,
    nl: Nonlinearity,
    u,
    phi,
    grad_floor: float | None = None,
    residual_tol: float | None = None,
) -> float:
    """|Q(|grad u| phi) - (rhs - lhs)|: the two analytically equal routes.

    Rejects fields that do not solve the equation, since the rearrangement
    differentiates the equation itself.
    """
    uv = domain._values(u)
    if residual_tol is None:
        residual_tol = solution_residual_tol(domain, nl, uv)
    r = pde_residual(domain, nl, uv)
    free = domain.free_mask()
    rsup = float(np.abs(r[free]).max()) if free.any() else 0.0
    if rsup > residual_tol:
        raise NotASolution(
            f"sup residual {rsup:.3e} exceeds {residual_tol:.3e}; "
            "the derivation identity presupposes a solution"
        )
    pv = domain._values(phi)
    xi = np.sqrt(np.maximum(domain.node_grad_norm_sq(uv), 0.0)) * pv
    q = stability_form(domain, nl, uv, xi)
    rep = gf_report(domain, uv, pv, grad_floor)
    return abs(q - (rep.rhs - rep.lhs))
