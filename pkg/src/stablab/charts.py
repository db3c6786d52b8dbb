"""Coordinate charts with Riemannian metrics.

A :class:`MetricChart` is a rectangle in coordinates together with a smooth
metric-tensor field.  All shipped charts are two dimensional; the calculus
built on top (see :mod:`stablab.geometry`) is written dimension-generically.

Point arrays use the convention ``x.shape == (..., dim)`` with coordinates in
the last axis; metric evaluations return ``(..., dim, dim)``.  Charts may
carry closed-form Christoffel symbols and Ricci tensors, which downstream
code uses both as fast paths and as oracles for the finite-difference
formulas.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, NonSPDMetric

__all__ = [
    "MetricChart",
    "make_chart",
    "chart_names",
    "flat_plane",
    "flat_torus",
    "flat_cylinder",
    "sphere",
    "polar_plane",
    "constant_metric_chart",
]


@dataclass(frozen=True)
class MetricChart:
    """A coordinate rectangle equipped with a metric tensor field.

    Parameters
    ----------
    name : str
        Registry name (or a descriptive tag for ad-hoc charts).
    dim : int
        Coordinate dimension.
    domain : tuple of (float, float)
        Per-axis coordinate interval ``(lo, hi)``.
    periodic : tuple of bool
        Per-axis periodicity; a periodic axis identifies ``lo`` with ``hi``.
    metric : callable
        Maps points ``(..., dim)`` to metric tensors ``(..., dim, dim)``.
    analytic_christoffel : callable, optional
        Closed-form symbols, ``(..., dim)`` -> ``(..., k, i, j)``.
    analytic_ricci : callable, optional
        Closed-form Ricci tensor, ``(..., dim)`` -> ``(..., dim, dim)``.
    params : dict
        Constructor parameters, kept for serialization round-trips.
    """

    name: str
    dim: int
    domain: tuple[tuple[float, float], ...]
    periodic: tuple[bool, ...]
    metric: Callable[[np.ndarray], np.ndarray]
    analytic_christoffel: Callable[[np.ndarray], np.ndarray] | None = None
    analytic_ricci: Callable[[np.ndarray], np.ndarray] | None = None
    params: dict = field(default_factory=dict)

    def extents(self) -> np.ndarray:
        return np.array([hi - lo for lo, hi in self.domain])

    def max_extent(self) -> float:
        return float(self.extents().max())

    def contains(self, x: np.ndarray) -> np.ndarray:
        """Pointwise domain membership (periodic axes always pass)."""
        x = np.asarray(x, dtype=float)
        ok = np.ones(x.shape[:-1], dtype=bool)
        for i, (lo, hi) in enumerate(self.domain):
            if not self.periodic[i]:
                ok &= (x[..., i] >= lo) & (x[..., i] <= hi)
        return ok

    def self_check(self, n_samples: int = 7) -> None:
        """Spot-check metric symmetry and periodicity at sampled points."""
        rng = np.random.Generator(np.random.PCG64(0))
        lo = np.array([a for a, _ in self.domain])
        hi = np.array([b for _, b in self.domain])
        pts = lo + (hi - lo) * rng.random((n_samples, self.dim))
        g = np.asarray(self.metric(pts), dtype=float)
        if g.shape != (n_samples, self.dim, self.dim):
            raise ConfigError(
                f"metric of chart {self.name!r} returned shape {g.shape}, "
                f"expected {(n_samples, self.dim, self.dim)}"
            )
        asym = np.abs(g - np.swapaxes(g, -1, -2)).max()
        if asym > 1e-12:
            raise NonSPDMetric(f"metric of chart {self.name!r} asymmetric by {asym:.3e}")
        if np.linalg.eigvalsh(g).min() <= 0:
            raise NonSPDMetric(f"metric of chart {self.name!r} not positive definite at sample points")
        for i in range(self.dim):
            if self.periodic[i]:
                shifted = pts.copy()
                shifted[:, i] += self.domain[i][1] - self.domain[i][0]
                dg = np.abs(np.asarray(self.metric(shifted)) - g).max()
                if dg > 1e-12:
                    raise NonSPDMetric(
                        f"metric of chart {self.name!r} not periodic along axis {i} (drift {dg:.3e})"
                    )


def _diag_metric(f0: Callable, f1: Callable) -> Callable[[np.ndarray], np.ndarray]:
    def metric(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        g = np.zeros(x.shape[:-1] + (2, 2))
        g[..., 0, 0] = f0(x)
        g[..., 1, 1] = f1(x)
        return g

    return metric


def _zero_tensor(rank: int) -> Callable[[np.ndarray], np.ndarray]:
    def fn(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + (2,) * rank)

    return fn


def flat_plane(half_extent: tuple[float, float] = (10.0, 10.0)) -> MetricChart:
    """Euclidean box [-a, a] x [-b, b] with the identity metric."""
    a, b = float(half_extent[0]), float(half_extent[1])
    if a <= 0 or b <= 0:
        raise ConfigError("flat-plane half_extent must be positive")
    return MetricChart(
        name="flat-plane",
        dim=2,
        domain=((-a, a), (-b, b)),
        periodic=(False, False),
        metric=_diag_metric(lambda x: np.ones(x.shape[:-1]), lambda x: np.ones(x.shape[:-1])),
        analytic_christoffel=_zero_tensor(3),
        analytic_ricci=_zero_tensor(2),
        params={"half_extent": [a, b]},
    )


def flat_torus(periods: tuple[float, float] = (1.0, 1.0)) -> MetricChart:
    """Flat torus [0, Lx) x [0, Ly), both axes periodic."""
    lx, ly = float(periods[0]), float(periods[1])
    if lx <= 0 or ly <= 0:
        raise ConfigError("flat-torus periods must be positive")
    return MetricChart(
        name="flat-torus",
        dim=2,
        domain=((0.0, lx), (0.0, ly)),
        periodic=(True, True),
        metric=_diag_metric(lambda x: np.ones(x.shape[:-1]), lambda x: np.ones(x.shape[:-1])),
        analytic_christoffel=_zero_tensor(3),
        analytic_ricci=_zero_tensor(2),
        params={"periods": [lx, ly]},
    )


def flat_cylinder(length: float = 24.0, circumference: float = 6.0) -> MetricChart:
    """Flat cylinder: axis [-L/2, L/2] (free ends) x periodic circumference."""
    length = float(length)
    circ = float(circumference)
    if length <= 0 or circ <= 0:
        raise ConfigError("flat-cylinder length and circumference must be positive")
    return MetricChart(
        name="flat-cylinder",
        dim=2,
        domain=((-length / 2, length / 2), (0.0, circ)),
        periodic=(False, True),
        metric=_diag_metric(lambda x: np.ones(x.shape[:-1]), lambda x: np.ones(x.shape[:-1])),
        analytic_christoffel=_zero_tensor(3),
        analytic_ricci=_zero_tensor(2),
        params={"length": length, "circumference": circ},
    )


def sphere(radius: float = 1.0, band: float = 0.4) -> MetricChart:
    """Latitude-longitude band on the round sphere of the given radius.

    Coordinates are (theta, phi) with theta in [band, pi - band] to keep the
    metric positive definite (the full chart degenerates at the poles; whole-
    sphere work uses the axisymmetric reduction in :mod:`stablab.sphere`).
    """
    a = float(radius)
    band = float(band)
    if a <= 0:
        raise ConfigError("sphere radius must be positive")
    if not 0 < band < np.pi / 2:
        raise ConfigError("sphere band must lie in (0, pi/2)")

    def christoffel(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        th = x[..., 0]
        gam = np.zeros(x.shape[:-1] + (2, 2, 2))
        gam[..., 0, 1, 1] = -np.sin(th) * np.cos(th)
        cot = np.cos(th) / np.sin(th)
        gam[..., 1, 0, 1] = cot
        gam[..., 1, 1, 0] = cot
        return gam

    def ricci(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r = np.zeros(x.shape[:-1] + (2, 2))
        r[..., 0, 0] = 1.0
        r[..., 1, 1] = np.sin(x[..., 0]) ** 2
        return r

    return MetricChart(
        name="sphere",
        dim=2,
        domain=((band, np.pi - band), (0.0, 2 * np.pi)),
        periodic=(False, True),
        metric=_diag_metric(
            lambda x: np.full(x.shape[:-1], a * a),
            lambda x: (a * np.sin(x[..., 0])) ** 2,
        ),
        analytic_christoffel=christoffel,
        analytic_ricci=ricci,
        params={"radius": a, "band": band},
    )


def polar_plane(r_min: float = 0.5, r_max: float = 3.0) -> MetricChart:
    """Euclidean plane in polar coordinates on the annulus r in [r_min, r_max]."""
    r0, r1 = float(r_min), float(r_max)
    if not 0 < r0 < r1:
        raise ConfigError("polar-plane needs 0 < r_min < r_max")

    def christoffel(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r = x[..., 0]
        gam = np.zeros(x.shape[:-1] + (2, 2, 2))
        gam[..., 0, 1, 1] = -r
        gam[..., 1, 0, 1] = 1.0 / r
        gam[..., 1, 1, 0] = 1.0 / r
        return gam

    return MetricChart(
        name="polar-plane",
        dim=2,
        domain=((r0, r1), (0.0, 2 * np.pi)),
        periodic=(False, True),
        metric=_diag_metric(lambda x: np.ones(x.shape[:-1]), lambda x: x[..., 0] ** 2),
        analytic_christoffel=christoffel,
        analytic_ricci=_zero_tensor(2),
        params={"r_min": r0, "r_max": r1},
    )


def constant_metric_chart(
    g: np.ndarray,
    domain: tuple[tuple[float, float], ...] = ((0.0, 1.0), (0.0, 1.0)),
    periodic: tuple[bool, ...] = (True, True),
) -> MetricChart:
    """Chart with a constant (possibly non-diagonal) SPD metric; test helper."""
    g = np.asarray(g, dtype=float)
    dim = g.shape[0]
    if np.linalg.eigvalsh(g).min() <= 0:
        raise NonSPDMetric("constant metric must be positive definite")

    def metric(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(g, x.shape[:-1] + g.shape).copy()

    return MetricChart(
        name="constant-metric",
        dim=dim,
        domain=domain,
        periodic=periodic,
        metric=metric,
        analytic_christoffel=_zero_tensor(3) if dim == 2 else None,
        analytic_ricci=_zero_tensor(2) if dim == 2 else None,
        params={"g": g.tolist(), "domain": [list(d) for d in domain], "periodic": list(periodic)},
    )


_FACTORIES: dict[str, Callable[..., MetricChart]] = {
    "flat-plane": flat_plane,
    "flat-torus": flat_torus,
    "flat-cylinder": flat_cylinder,
    "sphere": sphere,
    "polar-plane": polar_plane,
}


def chart_names() -> list[str]:
    return sorted(_FACTORIES)


def make_chart(name: str, **params) -> MetricChart:
    """Build a registered chart by name; parameters are factory keywords."""
    try:
        factory = _FACTORIES[name]
    except KeyError:
        raise ConfigError(f"unknown chart {name!r}; known: {chart_names()}") from None
    try:
        chart = factory(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for chart {name!r}: {exc}") from None
    chart.self_check()
    return chart
