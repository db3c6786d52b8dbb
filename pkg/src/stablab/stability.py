"""Stability form Q and principal eigenvalue of L = -Lap_g - f'(u).

Q(xi) = B(xi, xi) - sum w f'(u) xi^2 uses the grid's exact
summation-by-parts Dirichlet form, so it equals <xi, L xi>_w to rounding
on periodic grids.  The eigenvalue is found by shifted inverse iteration:
the shift starts strictly below a Gershgorin-style lower bound
(min of the potential, since -Lap is positive semidefinite in the w inner
product), is tightened adaptively from Rayleigh quotients, and backs off
whenever conjugate gradients detects indefiniteness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EigenNonConvergence, SupportViolation
from .grid import StructuredGrid
from .nonlinearity import Nonlinearity
from .sphere import SphereAxisymmetric

__all__ = [
    "StabilityReport",
    "stability_form",
    "principal_eigenvalue",
    "translation_mode_residual",
    "stability_tolerance",
    "apply_linearized",
]


def _require_compact_support(domain, xi: np.ndarray) -> None:
    if getattr(domain, "compact", False):
        return
    if isinstance(domain, SphereAxisymmetric):
        return
    for a in range(2):
        if domain.chart.periodic[a]:
            continue
        idx = [slice(None)] * 2
        for sl in (slice(0, 2), slice(domain.shape[a] - 2, domain.shape[a])):
            idx[a] = sl
            if np.any(xi[tuple(idx)] != 0.0):
                raise SupportViolation(
                    f"test function is nonzero on the axis-{a} margin; "
                    "stability quantifies over compactly supported fields"
                )


def stability_form(domain, nl: Nonlinearity, u, xi) -> float:
    """Second-variation quadratic form Q(xi)."""
    uv = domain._values(u)
    xv = domain._values(xi)
    _require_compact_support(domain, xv)
    return domain.dirichlet_form(xv, xv) - float(
        np.sum(domain.weights * nl.f_prime(uv) * xv**2)
    )


def stability_tolerance(domain, nl: Nonlinearity, u, tol_scale: float = 1.0) -> float:
    """Verdict threshold max(1e-6, 10 h^2 scale): discretization can push a
    marginal (translation) mode slightly negative, and stability is a closed
    condition."""
    uv = domain._values(u)
    scale = max(1.0, float(np.abs(nl.f_prime(uv)).max()))
    return max(1e-6, 10.0 * domain.h_max**2 * scale) * tol_scale


def apply_linearized(domain, pot: np.ndarray, v: np.ndarray, free: np.ndarray) -> np.ndarray:
    vm = v * free
    return (-domain.laplacian(vm) + pot * vm) * free


def _wnorm(w, v) -> float:
    return math.sqrt(max(float(np.sum(w * v * v)), 0.0))


def _eigen_cg(domain, pot, sigma, b, free, diag, tol=1e-10, maxiter=3000):
    """CG for (L - sigma) x = b in the w inner product; None on indefiniteness."""
    w = domain.weights
    x = np.zeros_like(b)
    r = b * free
    z = r / diag
    p = z.copy()
    rz = float(np.sum(w * r * z))
    bnorm = _wnorm(w, r) or 1.0
    for _ in range(maxiter):
        Ap = apply_linearized(domain, pot, p, free) - sigma * (p * free)
        pAp = float(np.sum(w * p * Ap))
        if pAp <= 0.0:
            return None
        alpha = rz / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        if _wnorm(w, r) <= tol * bnorm:
            return x
        z = r / diag
        rz_new = float(np.sum(w * r * z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x


def _principal_pair(domain, pot, seed=0, eig_tol=1e-7, maxiter=400):
    """Smallest eigenpair of L = -Lap + pot by shifted inverse iteration."""
    free = domain.free_mask().astype(float)
    w = domain.weights
    if not free.any():
        raise ConfigError("no free nodes to iterate on")
    pot_min = float(pot[free > 0].min())
    offset = 1.0
    sigma = pot_min - offset
    diagL = domain.laplacian_diagonal() + pot
    rng = np.random.Generator(np.random.PCG64(seed))
    v = rng.standard_normal(domain.shape) * free
    v /= _wnorm(w, v)
    lam = float(np.sum(w * v * apply_linearized(domain, pot, v, free)))
    for it in range(maxiter):
        diag = np.maximum(diagL - sigma, 1e-12)
        y = _eigen_cg(domain, pot, sigma, v, free, diag)
        if y is None:
            # shift crept above the ground state; back off and retry
            offset *= 4.0
            sigma = min(pot_min, lam) - offset
            continue
        ny = _wnorm(w, y)
        if ny == 0.0:
            raise EigenNonConvergence("inverse iteration produced the zero vector")
        v = y / ny
        Lv = apply_linearized(domain, pot, v, free)
        lam = float(np.sum(w * v * Lv))
        res = _wnorm(w, Lv - lam * v)
        if res <= eig_tol:
            return lam, v, res, it + 1
        if it % 10 == 9:
            sigma = lam - max(1e-2, 5.0 * res)
    raise EigenNonConvergence(
        f"inverse iteration residual {res:.3e} above {eig_tol:g} after {maxiter} solves"
    )


def _bump_profile(t: np.ndarray) -> np.ndarray:
    """C^2 compactly supported bump on [-1, 1]."""
    s = np.clip(1.0 - t**2, 0.0, None)
    return s**3


def _battery(domain, nl, u, seed, count=5):
    """Named test functions: constants, coordinate bumps, |grad u| bump, random."""
    rng = np.random.Generator(np.random.PCG64(seed))
    xis = []
    if isinstance(domain, SphereAxisymmetric):
        th = domain.theta
        xis.append(("constant", np.ones(domain.n)))
        xis.append(("bump-north", _bump_profile((th - 0.8) / 0.7)))
        xis.append(("bump-equator", _bump_profile((th - np.pi / 2) / 0.8)))
        gn = np.sqrt(domain.node_grad_norm_sq(u))
        xis.append(("gradu-bump", gn * _bump_profile((th - np.pi / 2) / 1.2)))
        for k in range(count):
            c = rng.uniform(0.6, np.pi - 0.6)
            wdt = rng.uniform(0.4, 1.0)
            xis.append((f"random-{k}", rng.uniform(0.5, 1.5) * _bump_profile((th - c) / wdt)))
        return xis

    grid: StructuredGrid = domain
    x = grid.nodes
    spans = [hi - lo for lo, hi in grid.chart.domain]
    mids = [0.5 * (hi + lo) for lo, hi in grid.chart.domain]

    def bump(center, widths):
        out = np.ones(grid.shape)
        for a in range(2):
            t = x[..., a] - center[a]
            if grid.chart.periodic[a]:
                per = spans[a]
                t = (t + per / 2) % per - per / 2
            out = out * _bump_profile(t / widths[a])
        return out

    base_w = [0.35 * s for s in spans]
    if grid.compact:
        xis.append(("constant", np.ones(grid.shape)))
    xis.append(("bump-center", bump(mids, base_w)))
    for a in range(2):
        c = list(mids)
        c[a] += 0.18 * spans[a]
        xis.append((f"bump-axis{a}", bump(c, base_w)))
    gn = np.sqrt(grid.node_grad_norm_sq(u))
    xis.append(("gradu-bump", gn * bump(mids, base_w)))
    for k in range(count):
        c = [mids[a] + rng.uniform(-0.15, 0.15) * spans[a] for a in range(2)]
        wdt = [rng.uniform(0.2, 0.4) * spans[a] for a in range(2)]
        xis.append((f"random-{k}", rng.uniform(0.5, 1.5) * bump(c, wdt)))
    return xis


@dataclass
class StabilityReport:
    lambda_min: float
    eigen_residual: float
    method: str
    q_samples: list = field(default_factory=list)
    verdict: str = "inconclusive"
    tol: float = 1e-6
    modes: list = field(default_factory=list)
    iterations: int = 0

    def to_dict(self) -> dict:
        return {
            "lambda_min": float(self.lambda_min),
            "eigen_residual": float(self.eigen_residual),
            "method": self.method,
            "q_samples": [dict(q) for q in self.q_samples],
            "verdict": self.verdict,
            "tol": float(self.tol),
            "modes": [dict(m) for m in self.modes],
            "iterations": int(self.iterations),
        }


def principal_eigenvalue(
    domain,
    nl: Nonlinearity,
    u,
    modes=(0,),
    seed: int = 0,
    tol_scale: float = 1.0,
    eig_tol: float = 1e-7,
    maxiter: int = 400,
    battery_size: int = 5,
    extra_potential=None,
) -> StabilityReport:
    """StabilityReport with lambda_min, Rayleigh battery, and verdict.

    On the axisymmetric sphere the eigenvalue is minimized over the given
    azimuthal modes; elsewhere ``modes`` is ignored.
    """
    uv = domain._values(u)
    base_pot = -nl.f_prime(uv)
    if extra_potential is not None:
        base_pot = base_pot + extra_potential
    tol = stability_tolerance(domain, nl, uv, tol_scale)

    mode_rows = []
    lam_best = np.inf
    res_best = np.inf
    vec_best = None
    iters = 0
    failed = False
    if isinstance(domain, SphereAxisymmetric):
        method = f"axisym-inverse-iteration modes={list(modes)}"
        mode_list = list(modes)
    else:
        method = "inverse-iteration"
        mode_list = [None]
    for m in mode_list:
        pot = base_pot if m in (None, 0) else base_pot + domain.mode_potential(m)
        try:
            lam, vec, res, it = _principal_pair(domain, pot, seed, eig_tol, maxiter)
        except EigenNonConvergence:
            failed = True
            mode_rows.append({"mode": -1 if m is None else int(m), "lambda": None})
            continue
        iters += it
        mode_rows.append({"mode": -1 if m is None else int(m), "lambda": float(lam)})
        if lam < lam_best:
            lam_best, res_best, vec_best = lam, res, vec

    q_rows = []
    bad_q = False
    for name, xi in _battery(domain, nl, uv, seed + 1, battery_size):
        try:
            q = stability_form(domain, nl, uv, xi)
        except SupportViolation:
            continue
        nsq = float(np.sum(domain.weights * xi**2))
        q_rows.append({"id": name, "Q": float(q), "norm_sq": nsq})
        if q < -tol * nsq:
            bad_q = True

    if failed or not np.isfinite(lam_best) or res_best > 1e-6:
        verdict = "inconclusive"
    elif lam_best < -tol:
        verdict = "unstable"
    elif bad_q:
        verdict = "inconclusive"  # eigen and battery disagree
    else:
        verdict = "stable"

    return StabilityReport(
        lambda_min=float(lam_best) if np.isfinite(lam_best) else np.nan,
        eigen_residual=float(res_best) if np.isfinite(res_best) else np.nan,
        method=method,
        q_samples=q_rows,
        verdict=verdict,
        tol=tol,
        modes=mode_rows,
        iterations=iters,
    )


def translation_mode_residual(grid: StructuredGrid, nl: Nonlinearity, u, direction: int) -> float:
    """||L dU/dx_dir|| / ||dU/dx_dir)|| over the interior; 0 for degenerate u."""
    if not isinstance(grid, StructuredGrid):
        raise ConfigError("translation modes are defined on structured grids")
    uv = grid._values(u)
    a = int(direction)
    if grid.chart.periodic[a]:
        v = (np.roll(uv, -1, axis=a) - np.roll(uv, 1, axis=a)) / (2 * grid.spacing[a])
    else:
        v = np.gradient(uv, grid.spacing[a], axis=a, edge_order=2)
    free = grid.free_mask().astype(float)
    inner = grid.interior_mask(3)
    w = grid.weights
    nv = math.sqrt(float(np.sum((w * v * v)[inner])))
    scale = math.sqrt(float(np.sum(w[inner]))) * (1.0 + float(np.abs(uv).max()))
    if nv <= 1e-12 * scale:
        return 0.0
    r = apply_linearized(grid, -nl.f_prime(uv), v, free)
    nr = math.sqrt(float(np.sum((w * r * r)[inner])))
    return nr / nv
