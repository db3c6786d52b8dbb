"""Cutoff functions, volume growth, Caccioppoli energy bound, parabolicity.

The cutoff profile is a C^2 quintic smoothstep: identically 1 up to distance
R, falling to 0 between R and 2R.  Its slope 30 s^2 (1-s)^2 peaks at s = 1/2
with the exact polynomial Lipschitz constant C_o = 15/8, which is what every
gradient bound below is measured against.

All checks here evaluate hypotheses of constancy criteria: they never
conclude "u is constant", they report whether the bounds that would force it
hold on the grid at hand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .eikonal import geodesic_distance
from .errors import ConfigError, RadiusTooSmall, SignConditionViolated, SupportViolation
from .grid import GridScalarField, StructuredGrid
from .nonlinearity import Nonlinearity

__all__ = [
    "SMOOTHSTEP_LIPSCHITZ",
    "cutoff_profile",
    "cutoff_profile_slope",
    "CutoffFamily",
    "make_cutoff",
    "volume_growth_scan",
    "CaccioppoliReport",
    "caccioppoli_check",
    "zac_energy",
    "parabolicity_probe",
    "scan_csv",
]

SMOOTHSTEP_LIPSCHITZ = 15.0 / 8.0  # exact max slope of the quintic profile


def cutoff_profile(t) -> np.ndarray:
    """tau(t): 1 on [0, 1], quintic smoothstep down to 0 on [1, 2]."""
    t = np.abs(np.asarray(t, dtype=float))
    s = np.clip(t - 1.0, 0.0, 1.0)
    step = s**3 * (6 * s**2 - 15 * s + 10)
    return 1.0 - step


def cutoff_profile_slope(t) -> np.ndarray:
    """d tau / dt; bounded by C_o = 15/8 in absolute value."""
    t = np.asarray(t, dtype=float)
    s = np.clip(np.abs(t) - 1.0, 0.0, 1.0)
    mag = 30.0 * s**2 * (1.0 - s) ** 2
    return -np.sign(t) * mag


def _check_radius(grid: StructuredGrid, dist: np.ndarray, reach: float, R: float) -> None:
    if R <= 4 * grid.h_max:
        raise RadiusTooSmall(f"R = {R:g} must exceed 4h = {4 * grid.h_max:g}")
    rim = np.zeros(grid.shape, dtype=bool)
    for a in range(2):
        if grid.chart.periodic[a]:
            continue
        idx = [slice(None)] * 2
        idx[a] = slice(0, 4)
        rim[tuple(idx)] = True
        idx[a] = slice(grid.shape[a] - 4, grid.shape[a])
        rim[tuple(idx)] = True
    if rim.any() and float(dist[rim].min()) <= reach:
        raise SupportViolation(
            f"support radius {reach:g} reaches within 4 node layers of a truncation edge"
        )


class CutoffFamily:
    """The scaled family tau_R(p) = tau(d(p)/R) over a fixed distance field."""

    def __init__(self, grid: StructuredGrid, dist):
        dv = grid._values(dist)
        if not np.all(np.isfinite(dv)) or dv.min() < 0:
            raise ConfigError("distance field must be finite and nonnegative")
        self.grid = grid
        self.dist = dv
        self.C_o = SMOOTHSTEP_LIPSCHITZ

    def field(self, R: float) -> GridScalarField:
        R = float(R)
        _check_radius(self.grid, self.dist, 2 * R, R)
        tau = GridScalarField(self.grid, cutoff_profile(self.dist / R))
        tau.cutoff_id = f"tau[R={R:g}]"
        return tau

    def max_gradient(self, R: float) -> float:
        tau = self.field(R)
        return float(np.sqrt(self.grid.node_grad_norm_sq(tau.values)).max())

    def gradient_energy(self, R: float) -> float:
        tau = self.field(R)
        return float(np.sum(self.grid.weights * self.grid.node_grad_norm_sq(tau.values)))


def make_cutoff(grid: StructuredGrid, dist, R: float) -> GridScalarField:
    """tau_R on the grid: 1 inside {d < R}, 0 outside {d > 2R}."""
    return CutoffFamily(grid, dist).field(R)


def volume_growth_scan(grid, dist, radii) -> list[dict]:
    """Rows (R, V_R, R^-2 V_R, R^-4 V_R) for the growth hypotheses."""
    dv = grid._values(dist)
    w = grid.weights
    rows = []
    for R in radii:
        R = float(R)
        if R < 0:
            raise ConfigError("radii must be nonnegative")
        V = float(np.sum(w[dv < R])) if R > 0 else 0.0
        rows.append(
            {
                "R": R,
                "V": V,
                "V_over_R2": V / R**2 if R > 0 else None,
                "V_over_R4": V / R**4 if R > 0 else None,
            }
        )
    return rows


@dataclass
class CaccioppoliReport:
    R: float
    lhs: float
    rhs: float
    passed: bool
    C_star: float
    C_bar: float
    m_minus: float
    m_plus: float
    V_2R: float

    def to_dict(self) -> dict:
        return {
            "R": self.R,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "passed": self.passed,
            "C_star": self.C_star,
            "C_bar": self.C_bar,
            "m_minus": self.m_minus,
            "m_plus": self.m_plus,
            "V_2R": self.V_2R,
        }


def caccioppoli_check(
    grid: StructuredGrid,
    nl: Nonlinearity,
    u,
    R: float,
    dist=None,
    slack: float = 1e-6,
) -> CaccioppoliReport:
    """int_{B_R} |grad u|^2 <= (C_bar / R^2) V_{2R} for f >= 0 and bounded u.

    The constants come from the chain of estimates behind the bound: testing
    the equation against (u - m_plus) tau^2 and absorbing by Cauchy-Schwarz
    gives C_star = 2 (m_plus - m_minus)^2 against int |grad tau|^2, and the
    cutoff slope bound turns that into C_bar = 4 (m_plus - m_minus)^2 C_o^2.
    """
    uv = grid._values(u)
    m_minus = float(uv.min())
    m_plus = float(uv.max())
    sample = np.linspace(m_minus - 2.0, m_plus + 2.0, 201)
    fvals = np.asarray(nl.f(sample), dtype=float)
    if fvals.min() < 0:
        t_bad = float(sample[int(fvals.argmin())])
        raise SignConditionViolated(
            f"{nl.name}: f({t_bad:.3g}) = {fvals.min():.3g} < 0; the estimate needs f >= 0"
        )
    if dist is None:
        dist = _center_distance(grid)
    dv = grid._values(dist)
    R = float(R)
    _check_radius(grid, dv, 2 * R, R)
    osc = m_plus - m_minus
    C_star = 2.0 * osc**2
    C_bar = 4.0 * osc**2 * SMOOTHSTEP_LIPSCHITZ**2
    gsq = grid.node_grad_norm_sq(uv)
    lhs = float(np.sum(grid.weights[dv < R] * gsq[dv < R]))
    V2R = float(np.sum(grid.weights[dv < 2 * R]))
    rhs = C_bar * V2R / R**2
    return CaccioppoliReport(
        R=R,
        lhs=lhs,
        rhs=rhs,
        passed=bool(lhs <= rhs * (1.0 + slack)),
        C_star=C_star,
        C_bar=C_bar,
        m_minus=m_minus,
        m_plus=m_plus,
        V_2R=V2R,
    )


def _center_distance(grid: StructuredGrid) -> np.ndarray:
    center = np.array([0.5 * (lo + hi) for lo, hi in grid.chart.domain])
    return geodesic_distance(grid, center)


def zac_energy(grid: StructuredGrid, u, cutoffs, dist=None) -> list[dict]:
    """Rows (R, value, midlink, majorant) for the cutoff-energy hypothesis.

    value    = int |grad u|^2 |grad tau_R|^2
    midlink  = sup_{B_2R} |grad u|^2 * int |grad tau_R|^2
    majorant = sup_{B_2R} |grad u|^2 * C_o^2 V_{2R} / R^2
    """
    uv = grid._values(u)
    if dist is None:
        dist = _center_distance(grid)
    dv = grid._values(dist)
    fam = CutoffFamily(grid, dv)
    gsq = grid.node_grad_norm_sq(uv)
    w = grid.weights
    rows = []
    for R in cutoffs:
        R = float(R)
        tau = fam.field(R)
        gt = grid.node_grad_norm_sq(tau.values)
        ball2 = dv < 2 * R
        # the stencil smears grad tau one cell past {d < 2R}; the sup must cover it
        seen = ball2 | (gt > 0)
        sup_g = float(gsq[seen].max()) if seen.any() else 0.0
        value = float(np.sum(w * gsq * gt))
        tau_energy = float(np.sum(w * gt))
        V2R = float(np.sum(w[ball2]))
        rows.append(
            {
                "R": R,
                "value": value,
                "tau_energy": tau_energy,
                "sup_grad_sq": sup_g,
                "midlink": sup_g * tau_energy,
                "majorant": sup_g * fam.C_o**2 * V2R / R**2,
            }
        )
    return rows


def parabolicity_probe(grid: StructuredGrid, dist, R_outer: float, R_inner: float = 1.0) -> float:
    """Dirichlet energy of the log cutoff between R_inner and R_outer.

    On the flat plane the energy is 2 pi / ln(R_outer / R_inner), which tends
    to 0: the canonical evidence of parabolicity.
    """
    R_outer = float(R_outer)
    R_inner = float(R_inner)
    if not 0 < R_inner < R_outer:
        raise ConfigError("need 0 < R_inner < R_outer")
    if R_inner <= 2 * grid.h_max:
        raise RadiusTooSmall(f"R_inner = {R_inner:g} must exceed 2h = {2 * grid.h_max:g}")
    dv = grid._values(dist)
    _check_radius(grid, dv, R_outer, R_inner)
    denom = math.log(R_outer / R_inner)
    with np.errstate(divide="ignore"):
        ratio = (math.log(R_outer) - np.log(np.maximum(dv, 1e-300))) / denom
    phi = np.clip(ratio, 0.0, 1.0)
    return float(grid.dirichlet_form(phi, phi))


def scan_csv(grid: StructuredGrid, dist, u, radii) -> str:
    """Combined growth/energy table, one row per radius."""
    vg = volume_growth_scan(grid, dist, radii)
    zc = zac_energy(grid, u, radii, dist)
    lines = ["R,V_R,V_over_R2,V_over_R4,zac_energy,majorant"]
    for row_v, row_z in zip(vg, zc):
        lines.append(
            ",".join(
                repr(float(x)) if x is not None else ""
                for x in (
                    row_v["R"],
                    row_v["V"],
                    row_v["V_over_R2"],
                    row_v["V_over_R4"],
                    row_z["value"],
                    row_z["majorant"],
                )
            )
        )
    return "\n".join(lines) + "\n"
