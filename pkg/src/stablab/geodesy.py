"""Geodesic integration, level-set extraction, and the geodesic defect.

The three pieces triangulate one geometric claim: a level curve of a solution
through noncritical points should be a geodesic on flat-enough charts.  The
integrator produces reference geodesics, marching squares produces level
polylines, and the defect measures how far any polyline is from satisfying
the geodesic equation after unit-speed reparametrization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .charts import MetricChart
from .errors import DomainExit, EmptyLevelSet, TooFewVertices
from .geometry import christoffel
from .grid import StructuredGrid

__all__ = [
    "GeodesicPath",
    "LevelCurve",
    "integrate_geodesic",
    "extract_level_set",
    "geodesic_defect",
]


def _symbols_fn(chart: MetricChart):
    if chart.analytic_christoffel is not None:
        return lambda x: np.asarray(chart.analytic_christoffel(x), dtype=float)
    return lambda x: christoffel(chart, x)


@dataclass
class GeodesicPath:
    chart: MetricChart
    t: np.ndarray  # (n,)
    x: np.ndarray  # (n, 2)
    v: np.ndarray  # (n, 2)
    dt: float
    exited: bool = False

    def speeds(self) -> np.ndarray:
        g = np.asarray(self.chart.metric(self.x), dtype=float)
        return np.sqrt(np.einsum("...ij,...i,...j->...", g, self.v, self.v))

    @property
    def speed_drift(self) -> float:
        s = self.speeds()
        return float(np.abs(s - s[0]).max())

    @property
    def speed_drift_per_time(self) -> float:
        span = float(self.t[-1] - self.t[0])
        return self.speed_drift / max(span, self.dt)


def integrate_geodesic(chart: MetricChart, x0, v0, T: float, dt: float = 1e-3,
                       strict: bool = False) -> GeodesicPath:
    """Classical 4th-order integration of the geodesic equation.

    The path is clipped where it would leave a non-periodic chart axis; the
    clipped flag is ``exited`` (or a DomainExit carrying the partial path
    when ``strict``).
    """
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    if x0.shape != (chart.dim,) or v0.shape != (chart.dim,):
        raise ValueError("x0 and v0 must be single chart points/vectors")
    if not np.any(v0 != 0.0):
        raise ValueError("initial velocity must be nonzero")
    if not bool(chart.contains(x0)):
        raise DomainExit(f"start point {x0} outside chart {chart.name!r}")
    gamma = _symbols_fn(chart)

    def acc(x, v):
        return -np.einsum("kij,i,j->k", gamma(x), v, v)

    n_steps = max(1, int(round(T / dt)))
    dt = T / n_steps  # land exactly on T with a uniform step
    ts = [0.0]
    xs = [x0.copy()]
    vs = [v0.copy()]
    x, v = x0.copy(), v0.copy()
    exited = False
    for k in range(n_steps):
        k1x, k1v = v, acc(x, v)
        k2x, k2v = v + 0.5 * dt * k1v, acc(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v)
        k3x, k3v = v + 0.5 * dt * k2v, acc(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v)
        k4x, k4v = v + dt * k3v, acc(x + dt * k3x, v + dt * k3v)
        x = x + (dt / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        v = v + (dt / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
        if not bool(chart.contains(x)):
            exited = True
            break
        ts.append((k + 1) * dt)
        xs.append(x.copy())
        vs.append(v.copy())
    path = GeodesicPath(
        chart=chart,
        t=np.array(ts),
        x=np.array(xs),
        v=np.array(vs),
        dt=float(dt),
        exited=exited,
    )
    if exited and strict:
        raise DomainExit(f"geodesic left chart {chart.name!r} at t={ts[-1]:.6g}", path)
    return path


@dataclass
class LevelCurve:
    vertices: np.ndarray  # (n, 2) chart coordinates, periodic axes unwrapped
    level: float
    grad_values: np.ndarray | None = None  # |grad u| at the vertices
    closed: bool = False
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.vertices)

    def length(self, chart: MetricChart) -> float:
        p = self.vertices
        d = np.diff(p, axis=0)
        mid = 0.5 * (p[:-1] + p[1:])
        g = np.asarray(chart.metric(mid), dtype=float)
        return float(np.sqrt(np.einsum("...ij,...i,...j->...", g, d, d)).sum())


# marching-squares case table: corner bits (c0=bl, c1=br, c2=tr, c3=tl),
# edges B=0 (c0-c1), R=1 (c1-c2), T=2 (c3-c2), L=3 (c0-c3)
_CASES = {
    1: [(3, 0)], 2: [(0, 1)], 3: [(3, 1)], 4: [(1, 2)],
    6: [(0, 2)], 7: [(3, 2)], 8: [(2, 3)], 9: [(2, 0)],
    11: [(2, 1)], 12: [(1, 3)], 13: [(1, 0)], 14: [(0, 3)],
}


def extract_level_set(grid: StructuredGrid, u, c: float, grad_floor: float | None = None):
    """Marching-squares contour of {u = c} restricted to noncritical cells.

    Returns a list of LevelCurve polylines (periodic coordinates unwrapped to
    be continuous along each curve).  Cells whose minimum |grad u| is at or
    below the floor are skipped, so curves end where the gradient dies.
    """
    uv = grid._values(u)
    c = float(c)
    if c < uv.min() or c > uv.max():
        raise EmptyLevelSet(f"level {c:g} outside field range [{uv.min():g}, {uv.max():g}]")
    gn = np.sqrt(grid.node_grad_norm_sq(uv))
    if grad_floor is None:
        grad_floor = 1e-2 * float(gn.max())
    s = uv - c
    n0, n1 = grid.shape
    per = grid.chart.periodic
    spans = [hi - lo for lo, hi in grid.chart.domain]
    ncell = (n0 if per[0] else n0 - 1, n1 if per[1] else n1 - 1)

    def coords(i, j):
        x0 = grid.axes[0][i % n0] + (spans[0] if i >= n0 else 0.0)
        x1 = grid.axes[1][j % n1] + (spans[1] if j >= n1 else 0.0)
        return x0, x1

    crossings: dict[tuple, np.ndarray] = {}

    def edge_point(axis, i, j):
        key = (axis, i % n0, j % n1)
        if key in crossings:
            return key
        if axis == 0:
            sa, sb = s[i % n0, j % n1], s[(i + 1) % n0, j % n1]
            pa, pb = coords(i, j), coords(i + 1, j)
        else:
            sa, sb = s[i % n0, j % n1], s[i % n0, (j + 1) % n1]
            pa, pb = coords(i, j), coords(i, j + 1)
        t = sa / (sa - sb)
        crossings[key] = np.array([pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])])
        return key

    segments = []
    for i in range(ncell[0]):
        for j in range(ncell[1]):
            ip, jp = i + 1, j + 1
            corners = (
                s[i, j], s[ip % n0, j], s[ip % n0, jp % n1], s[i, jp % n1],
            )
            case = sum(1 << k for k, val in enumerate(corners) if val > 0)
            if case in (0, 15):
                continue
            wmin = min(gn[i, j], gn[ip % n0, j], gn[ip % n0, jp % n1], gn[i, jp % n1])
            if wmin <= grad_floor:
                continue
            if case in (5, 10):
                center = 0.25 * sum(corners)
                if case == 5:
                    pairs = [(3, 2), (1, 0)] if center > 0 else [(3, 0), (1, 2)]
                else:
                    pairs = [(3, 0), (1, 2)] if center > 0 else [(0, 1), (2, 3)]
            else:
                pairs = _CASES[case]
            edge_args = {0: (0, i, j), 1: (1, ip, j), 2: (0, i, jp), 3: (1, i, j)}
            for ea, eb in pairs:
                ka = edge_point(*edge_args[ea])
                kb = edge_point(*edge_args[eb])
                if ka != kb:
                    segments.append((ka, kb))

    # chain segments into polylines via shared edge ids
    adjacency: dict[tuple, list[int]] = {}
    for idx, (ka, kb) in enumerate(segments):
        adjacency.setdefault(ka, []).append(idx)
        adjacency.setdefault(kb, []).append(idx)
    used = [False] * len(segments)

    def walk(start_key):
        keys = [start_key]
        cur = start_key
        while True:
            nxt = None
            for idx in adjacency[cur]:
                if not used[idx]:
                    used[idx] = True
                    ka, kb = segments[idx]
                    nxt = kb if ka == cur else ka
                    break
            if nxt is None:
                return keys
            keys.append(nxt)
            cur = nxt

    chains = []
    open_starts = [k for k, idxs in adjacency.items() if len(idxs) == 1]
    for k in open_starts:
        if all(used[i] for i in adjacency[k]):
            continue
        chains.append((walk(k), False))
    for k in adjacency:
        if any(not used[i] for i in adjacency[k]):
            chains.append((walk(k), True))

    curves = []
    hmax = grid.h_max
    for keys, was_cycle in chains:
        pts = np.array([crossings[k] for k in keys])
        if len(pts) < 2:
            continue
        # unwrap periodic jumps so each polyline is continuous in coordinates
        for a in range(2):
            if per[a]:
                jumps = np.diff(pts[:, a])
                pts[1:, a] -= spans[a] * np.cumsum(np.round(jumps / spans[a]))
        closed = was_cycle
        if not closed:
            gap = pts[-1] - pts[0]
            for a in range(2):
                if per[a]:
                    gap[a] -= spans[a] * np.round(gap[a] / spans[a])
            closed = bool(np.hypot(gap[0], gap[1]) <= hmax)
        gvals = grid.interpolate(gn, pts)
        curves.append(
            LevelCurve(vertices=pts, level=c, grad_values=gvals, closed=closed,
                       meta={"grad_floor": float(grad_floor)})
        )
    curves.sort(key=lambda cv: -len(cv.vertices))
    return curves


def geodesic_defect(chart: MetricChart, curve: LevelCurve) -> float:
    """Sup-norm of the geodesic equation along the unit-speed curve.

    The polyline is reparametrized by metric arclength, resampled by a cubic
    spline at a uniform step of 2.5x the median segment, and the equation is
    evaluated with centered second differences.  Closed curves that wind a
    periodic axis are handled by splitting off the linear winding drift.
    """
    pts = np.asarray(curve.vertices, dtype=float)
    keep = np.ones(len(pts), dtype=bool)
    if len(pts) > 1:
        keep[1:] = np.linalg.norm(np.diff(pts, axis=0), axis=1) > 1e-12
    pts = pts[keep]
    if len(pts) < 5:
        raise TooFewVertices(f"{len(pts)} distinct vertices; need at least 5")
    closed = curve.closed
    if closed:
        # close the loop: append the start point, shifted by whole periods so
        # it continues the polyline without a coordinate jump (cycles from the
        # extractor already repeat the start and need no append)
        spansv = np.array([hi - lo for lo, hi in chart.domain])
        gap = pts[0] - pts[-1]
        for a in range(2):
            if chart.periodic[a]:
                gap[a] -= spansv[a] * np.round(gap[a] / spansv[a])
        if np.hypot(gap[0], gap[1]) > 1e-12:
            pts = np.vstack([pts, pts[-1] + gap])

    d = np.diff(pts, axis=0)
    mid = 0.5 * (pts[:-1] + pts[1:])
    g = np.asarray(chart.metric(mid), dtype=float)
    ds = np.sqrt(np.einsum("...ij,...i,...j->...", g, d, d))
    s_nodes = np.concatenate([[0.0], np.cumsum(ds)])
    total = float(s_nodes[-1])
    step = 2.5 * float(np.median(ds))
    m = max(int(total / step), 8)
    step = total / m

    from scipy.interpolate import CubicSpline

    if closed:
        drift = (pts[-1] - pts[0]) / total
        resid = pts - np.outer(s_nodes, drift)
        resid[-1] = resid[0]
        spline = CubicSpline(s_nodes, resid, axis=0, bc_type="periodic")
        sj = step * np.arange(m)
        p = spline(sj % total) + np.outer(sj, drift)
        idx_prev = np.arange(-1, m - 1)
        idx_next = np.arange(1, m + 1) % m
        p_prev = p[idx_prev] - np.where(idx_prev[:, None] < 0, total * drift, 0.0)
        p_next = p[idx_next] + np.where(idx_next[:, None] == 0, total * drift, 0.0)
        centers = p
    else:
        spline = CubicSpline(s_nodes, pts, axis=0, bc_type="not-a-knot")
        sj = step * np.arange(m + 1)
        sj[-1] = total
        p = spline(sj)
        if len(p) < 9:
            raise TooFewVertices("resampled curve too short for second differences")
        # keep clear of the ends, where spline curvature is least trustworthy
        centers = p[3:-3]
        p_prev = p[2:-4]
        p_next = p[4:-2]

    accel = (p_next - 2 * centers + p_prev) / step**2
    vel = (p_next - p_prev) / (2 * step)
    gam = _symbols_fn(chart)(centers)
    force = np.einsum("...kij,...i,...j->...k", gam, vel, vel)
    return float(np.abs(accel + force).max())
