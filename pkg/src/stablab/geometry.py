"""Pointwise Riemannian calculus on coordinate charts.

All operations accept batched points ``x`` with shape ``(..., dim)`` and act
elementwise.  First derivatives of analytic fields use the field's exact
partials when available; every second derivative and every metric derivative
uses central differences with step ``h`` (default ``1e-4`` times the largest
chart extent).  Tensor norms raise lower indices with the inverse metric
before contracting, so they agree with the Frobenius norm in normal
coordinates.

Index conventions: Christoffel arrays are ``gamma[..., k, i, j]`` for the
symbol with upper index ``k``; metric partial arrays are
``dg[..., a, i, j]`` for the ``a``-derivative of ``g_ij``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .charts import MetricChart
from .errors import BelowGradientFloor, EdgeProximity, NonSPDMetric
from .fields import ScalarField, VectorField

__all__ = [
    "PointTensor",
    "default_step",
    "inverse_metric",
    "sqrt_det_metric",
    "christoffel",
    "grad",
    "grad_norm",
    "divergence",
    "laplace_beltrami",
    "hessian",
    "hessian_norm_sq",
    "ricci",
    "bochner_residual",
    "kato_gap",
    "parallelism_defect",
    "tensor_norm_sq",
]


@dataclass(frozen=True)
class PointTensor:
    """Tensor components at (batched) points with per-slot variance tags."""

    components: np.ndarray
    variance: tuple[str, ...]  # each slot "upper" or "lower"

    def __post_init__(self):
        for v in self.variance:
            if v not in ("upper", "lower"):
                raise ValueError(f"variance tag {v!r} must be 'upper' or 'lower'")


def default_step(chart: MetricChart) -> float:
    """Default finite-difference step: 1e-4 times the largest extent."""
    return 1e-4 * chart.max_extent()


def _require_margin(chart: MetricChart, x: np.ndarray, reach: float) -> None:
    """Raise EdgeProximity if a stencil of the given reach leaves the domain."""
    x = np.asarray(x, dtype=float)
    for i, (lo, hi) in enumerate(chart.domain):
        if chart.periodic[i]:
            continue
        xi = x[..., i]
        if np.any(xi - reach < lo) or np.any(xi + reach > hi):
            raise EdgeProximity(
                f"stencil of reach {reach:g} leaves axis-{i} domain [{lo:g}, {hi:g}]"
            )


def _scalar_partials(fn, x: np.ndarray, h: float, order: int = 2) -> np.ndarray:
    """Central-difference partials of a scalar-valued map; result (..., dim)."""
    x = np.asarray(x, dtype=float)
    dim = x.shape[-1]
    cols = []
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = h
        if order == 2:
            cols.append((fn(x + e) - fn(x - e)) / (2 * h))
        else:
            cols.append(
                (-fn(x + 2 * e) + 8 * fn(x + e) - 8 * fn(x - e) + fn(x - 2 * e)) / (12 * h)
            )
    return np.stack(cols, axis=-1)


def _tensor_partials(fn, x: np.ndarray, h: float, order: int = 2) -> np.ndarray:
    """Partials of a tensor-valued map; derivative axis placed after batch."""
    x = np.asarray(x, dtype=float)
    dim = x.shape[-1]
    batch_ndim = x.ndim - 1
    slabs = []
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = h
        if order == 2:
            slabs.append((fn(x + e) - fn(x - e)) / (2 * h))
        else:
            slabs.append(
                (-fn(x + 2 * e) + 8 * fn(x + e) - 8 * fn(x - e) + fn(x - 2 * e)) / (12 * h)
            )
    return np.stack(slabs, axis=batch_ndim)


def inverse_metric(chart: MetricChart, x: np.ndarray) -> np.ndarray:
    """Inverse metric g^{ij} at x; raises NonSPDMetric off the SPD cone.

    Examples
    --------
    On the unit sphere chart at theta = pi/2 the inverse is the identity.
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(chart.metric(x), dtype=float)
    if np.linalg.eigvalsh(g).min() <= 0:
        raise NonSPDMetric("metric has a non-positive eigenvalue at a queried point")
    return np.linalg.inv(g)


def sqrt_det_metric(chart: MetricChart, x: np.ndarray) -> np.ndarray:
    """sqrt(det g) at x, the Riemannian volume density."""
    g = np.asarray(chart.metric(np.asarray(x, dtype=float)), dtype=float)
    det = np.linalg.det(g)
    if np.any(det <= 0):
        raise NonSPDMetric("metric determinant non-positive at a queried point")
    return np.sqrt(det)


def christoffel(chart: MetricChart, x: np.ndarray, h: float | None = None, order: int = 2) -> np.ndarray:
    """Christoffel symbols from central differences of the metric.

    Gamma^k_ij = 1/2 g^{hk} (d_i g_hj + d_j g_ih - d_h g_ij); the result is
    symmetric in the lower pair exactly.  Agrees with a chart's closed-form
    symbols to O(h^2).
    """
    x = np.asarray(x, dtype=float)
    if h is None:
        h = default_step(chart)
    _require_margin(chart, x, (2 if order == 4 else 1) * h)
    ginv = inverse_metric(chart, x)
    dg = _tensor_partials(chart.metric, x, h, order)  # (..., a, i, j)
    # T[..., h, i, j] = d_i g_hj + d_j g_hi - d_h g_ij
    t1 = np.einsum("...ihj->...hij", dg)
    t2 = np.einsum("...jhi->...hij", dg)
    t3 = dg
    return 0.5 * np.einsum("...hk,...hij->...kij", ginv, t1 + t2 - t3)


def _connection(chart: MetricChart, x: np.ndarray, h: float, order: int = 2) -> np.ndarray:
    """Christoffel symbols, preferring the chart's closed form when present."""
    if chart.analytic_christoffel is not None:
        return np.asarray(chart.analytic_christoffel(np.asarray(x, dtype=float)), dtype=float)
    return christoffel(chart, x, h, order)


def _field_partials(field: ScalarField, x: np.ndarray, h: float, order: int = 2) -> np.ndarray:
    exact = field.partials(x)
    if exact is not None:
        return exact
    return _scalar_partials(field, x, h, order)


def grad(chart: MetricChart, field: ScalarField, x: np.ndarray, h: float | None = None) -> PointTensor:
    """Riemannian gradient (grad phi)^i = g^{ij} d_j phi (upper index).

    Examples
    --------
    On the unit sphere with phi = cos(theta) the components are
    (-sin(theta), 0) and the norm is sin(theta).
    """
    x = np.asarray(x, dtype=float)
    if h is None:
        h = default_step(chart)
    if field.grad_fn is None:
        _require_margin(chart, x, h)
    p = _field_partials(field, x, h)
    ginv = inverse_metric(chart, x)
    return PointTensor(np.einsum("...ij,...j->...i", ginv, p), ("upper",))


def grad_norm(chart: MetricChart, field: ScalarField, x: np.ndarray, h: float | None = None) -> np.ndarray:
    """|grad phi|_g = sqrt(g^{ij} d_i phi d_j phi)."""
    x = np.asarray(x, dtype=float)
    if h is None:
        h = default_step(chart)
    if field.grad_fn is None:
        _require_margin(chart, x, h)
    p = _field_partials(field, x, h)
    ginv = inverse_metric(chart, x)
    q = np.einsum("...ij,...i,...j->...", ginv, p, p)
    return np.sqrt(np.maximum(q, 0.0))


def divergence(chart: MetricChart, vec: VectorField, x: np.ndarray, h: float | None = None) -> np.ndarray:
    """div X = (1/sqrt|g|) d_i (sqrt|g| X^i) by central differences."""
    x = np.asarray(x, dtype=float)
    if h is None:
        h = default_step(chart)
    _require_margin(chart, x, h)

    def flux(y: np.ndarray) -> np.ndarray:
        return sqrt_det_metric(chart, y)[..., None] * vec(y)

    dflux = _tensor_partials(flux, x, h)  # (..., a, i)
    div = np.einsum("...ii->...", dflux)
    return div / sqrt_det_metric(chart, x)


def laplace_beltrami(chart: MetricChart, field: ScalarField, x: np.ndarray, h: float | None = None) -> np.ndarray:
    """Laplace-Beltrami of a scalar field: the divergence of its gradient.

    Implemented literally as ``divergence(grad(...))`` so the definitional
    identity holds to machine precision.
    """
    x = np.asarray(x, dtype=float)
    if h is None:
        h = default_step(chart)

    def gradvec(y: np.ndarray) -> np.ndarray:
        p = _field_partials(field, y, h)
        return np.einsum("...ij,...j->...i", inverse_metric(chart, y), p)

    return divergence(chart, VectorField(gradvec), x, h)


def hessian(chart: MetricChart, field: ScalarField, x: np.ndarray, h: float | None = None, order: int = 2) -> PointTensor:
    """Covariant Hessian (H_phi)_ij = d^2_ij phi - Gamma^k_ij d_k phi.

    The second-derivative block is symmetrized, so H_ij == H_ji exactly.
    """
    x = np.asarray(x, dtype=float)
    if h is None:
        h = default_step(chart)
    dim = x.shape[-1]
    reach = (2 if order == 4 else 1) * h * (1 if field.grad_fn is not None else 2)
    _require_margin(chart, x, reach)
    if field.grad_fn is not None:
        d2 = _tensor_partials(field.grad_fn, x, h, order)  # (..., i, j) = d_i (d_j phi)
    else:
        d2 = np.zeros(x.shape[:-1] + (dim, dim))
        for i in range(dim):
            ei = np.zeros(dim)
            ei[i] = h
            d2[..., i, i] = (field(x + ei) - 2 * field(x) + field(x - ei)) / (h * h)
            for j in range(i + 1, dim):
                ej = np.zeros(dim)
                ej[j] = h
                mixed = (
                    field(x + ei + ej) - field(x + ei - ej) - field(x - ei + ej) + field(x - ei - ej)
                ) / (4 * h * h)
                d2[..., i, j] = mixed
                d2[..., j, i] = mixed
    d2 = 0.5 * (d2 + np.swapaxes(d2, -1, -2))
    gam = _connection(chart, x, h, order)
    p = _field_partials(field, x, h, order)
    hess = d2 - np.einsum("...kij,...k->...ij", gam, p)
    return PointTensor(hess, ("lower", "lower"))


def tensor_norm_sq(chart: MetricChart, x: np.ndarray, tensor: PointTensor) -> np.ndarray:
    """Squared tensor norm |A|^2 = A...A... with lower slots raised by g^{ij}."""
    x = np.asarray(x, dtype=float)
    comps = np.asarray(tensor.components, dtype=float)
    rank = len(tensor.variance)
    if rank == 0:
        return comps**2
    ginv = inverse_metric(chart, x)
    g = np.asarray(chart.metric(x), dtype=float)
    ins = "ijklmn"[:rank]
    outs = "abcdef"[:rank]
    # raise/lower every slot in one contraction, then pair with the original
    subs = [f"...{outs[s]}{ins[s]}" for s in range(rank)]
    operands = [ginv if v == "lower" else g for v in tensor.variance]
    raised = np.einsum(
        ",".join(subs) + f",...{ins}->...{outs}", *operands, comps
    )
    return np.einsum(f"...{outs},...{outs}->...", raised, comps)


def hessian_norm_sq(chart: MetricChart, field: ScalarField, x: np.ndarray, h: float | None = None, order: int = 2) -> np.ndarray:
    """|H_phi|^2 with both indices raised by the inverse metric."""
    x = np.asarray(x, dtype=float)
    hess = hessian(chart, field, x, h, order)
    return tensor_norm_sq(chart, x, hess)


def ricci(chart: MetricChart, x: np.ndarray, h: float | None = None) -> np.ndarray:
    """Ricci tensor from the coordinate curvature formula.

    Ric_jk = d_i Gamma^i_jk - d_j Gamma^i_ik + Gamma^i_im Gamma^m_jk
             - Gamma^i_jm Gamma^m_ik, with the symbols differenced centrally.
    Requires x at least 2h from non-periodic edges.  The output is
    symmetrized, so it is symmetric exactly.
    """
    x = np.asarray(x, dtype=float)
    if h is None:
        h = default_step(chart)
    _require_margin(chart, x, 2 * h)
    if chart.analytic_christoffel is not None:
        gamfun = chart.analytic_christoffel
    else:
        def gamfun(y: np.ndarray) -> np.ndarray:
            return christoffel(chart, y, h)
    gam = np.asarray(gamfun(x), dtype=float)
    dgam = _tensor_partials(gamfun, x, h)  # (..., a, k, i, j) = d_a Gamma^k_ij
    term1 = np.einsum("...iijk->...jk", dgam)
    term2 = np.einsum("...jiik->...jk", dgam)
    term3 = np.einsum("...iim,...mjk->...jk", gam, gam)
    term4 = np.einsum("...ijm,...mik->...jk", gam, gam)
    ric = term1 - term2 + term3 - term4
    return 0.5 * (ric + np.swapaxes(ric, -1, -2))


def bochner_residual(chart: MetricChart, field: ScalarField, x: np.ndarray, h: float | None = None) -> np.ndarray:
    """Defect of the Bochner identity at x.

    Returns 1/2 Lap |grad phi|^2 - |H_phi|^2 - <grad Lap phi, grad phi>
    - Ric(grad phi, grad phi), which converges to zero at second order in h
    for smooth fields.
    """
    x = np.asarray(x, dtype=float)
    if h is None:
        h = default_step(chart)
    reach = 2 * h + (0.0 if field.grad_fn is not None else 2 * h)
    _require_margin(chart, x, reach)

    def grad_sq(y: np.ndarray) -> np.ndarray:
        p = _field_partials(field, y, h)
        return np.einsum("...ij,...i,...j->...", inverse_metric(chart, y), p, p)

    t_lap_gradsq = 0.5 * laplace_beltrami(chart, ScalarField(grad_sq), x, h)
    t_hess = hessian_norm_sq(chart, field, x, h)

    def lap(y: np.ndarray) -> np.ndarray:
        return laplace_beltrami(chart, field, y, h)

    dlap = _scalar_partials(lap, x, h)
    p = _field_partials(field, x, h)
    ginv = inverse_metric(chart, x)
    t_cross = np.einsum("...ij,...i,...j->...", ginv, dlap, p)

    gradvec = np.einsum("...ij,...j->...i", ginv, p)
    ric = ricci(chart, x, h)
    t_ric = np.einsum("...ij,...i,...j->...", ric, gradvec, gradvec)

    return t_lap_gradsq - t_hess - t_cross - t_ric


# Step and stencil order used by the Kato-gap probe.  Fourth-order stencils
# at this step keep the finite-difference error well below the 1e-6 floor the
# gap is checked against, without drifting into roundoff.
KATO_STEP_FRACTION = 3e-4
KATO_ORDER = 4


def kato_gap(
    chart: MetricChart,
    field: ScalarField,
    x: np.ndarray,
    grad_floor: float,
    h: float | None = None,
) -> np.ndarray:
    """Kato inequality gap |H_phi|^2 - |grad |grad phi||^2 at x.

    Nonnegative (up to discretization noise) wherever the gradient does not
    vanish.  Raises BelowGradientFloor if any queried point has
    |grad phi| <= grad_floor; callers sweep grids by filtering first.
    """
    x = np.asarray(x, dtype=float)
    if h is None:
        h = KATO_STEP_FRACTION * chart.max_extent()
    order = KATO_ORDER
    reach = 2 * h * (1 if field.grad_fn is not None else 2) + 2 * h
    _require_margin(chart, x, reach)
    gn = grad_norm(chart, field, x, h)
    if np.any(gn <= grad_floor):
        raise BelowGradientFloor(
            f"|grad phi| <= {grad_floor:g} at {int(np.sum(gn <= grad_floor))} queried point(s)"
        )
    t_hess = hessian_norm_sq(chart, field, x, h, order)

    def norm_fn(y: np.ndarray) -> np.ndarray:
        return grad_norm(chart, field, y, h)

    dnorm = _scalar_partials(norm_fn, x, h, order)
    ginv = inverse_metric(chart, x)
    t_gradnorm = np.einsum("...ij,...i,...j->...", ginv, dnorm, dnorm)
    return t_hess - t_gradnorm


def parallelism_defect(
    chart: MetricChart,
    field: ScalarField,
    x: np.ndarray,
    grad_floor: float,
    h: float | None = None,
) -> np.ndarray:
    """Deviation of grad of each gradient component from parallelism with grad phi.

    In two dimensions this is max_k |det(grad (grad phi)^k, grad phi)|
    normalized by |grad phi|^2; it vanishes exactly when every gradient of a
    gradient component is parallel to the gradient (the equality case of the
    Kato inequality away from the critical set).
    """
    x = np.asarray(x, dtype=float)
    if h is None:
        h = default_step(chart)
    _require_margin(chart, x, 2 * h)
    gn = grad_norm(chart, field, x, h)
    if np.any(gn <= grad_floor):
        raise BelowGradientFloor(
            f"|grad phi| <= {grad_floor:g} at {int(np.sum(gn <= grad_floor))} queried point(s)"
        )
    dim = x.shape[-1]
    if dim != 2:
        raise NotImplementedError("parallelism_defect is implemented for 2d charts")

    def gradvec(y: np.ndarray) -> np.ndarray:
        p = _field_partials(field, y, h)
        return np.einsum("...ij,...j->...i", inverse_metric(chart, y), p)

    v = gradvec(x)
    best = np.zeros(x.shape[:-1])
    for k in range(dim):
        def comp(y: np.ndarray, _k=k) -> np.ndarray:
            return gradvec(y)[..., _k]

        dcomp = _scalar_partials(comp, x, h)
        w = np.einsum("...ij,...j->...i", inverse_metric(chart, x), dcomp)
        det = w[..., 0] * v[..., 1] - w[..., 1] * v[..., 0]
        best = np.maximum(best, np.abs(det))
    return best / gn**2
