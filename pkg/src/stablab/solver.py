"""Damped Newton solver for -Lap_g u = f(u) with a gradient-flow fallback.

Works against any domain exposing the discrete contract: ``weights``,
``laplacian``, ``dirichlet_form``, ``integrate``, ``free_mask``,
``laplacian_diagonal``, ``flow_step_bound`` (structured grids and the
axisymmetric sphere reduction both qualify).

Scalar reductions inside the iteration use exactly-rounded summation
(math.fsum), which is permutation invariant; on periodic grids this makes
the whole solve equivariant under grid translations bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import LinearSolveFailure
from .grid import GridScalarField, StructuredGrid
from .nonlinearity import Nonlinearity

__all__ = [
    "SolveConfig",
    "SolveReport",
    "pde_residual",
    "energy",
    "solve_semilinear",
    "continuation",
]


def _fsum(arr: np.ndarray) -> float:
    return math.fsum(arr.ravel().tolist())


def _wdot(w: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    return _fsum(w * a * b)


def _values(domain, u) -> np.ndarray:
    return domain._values(u)


@dataclass(frozen=True)
class SolveConfig:
    tol: float = 1e-10  # sup-norm residual target
    max_newton: int = 40
    max_backtracks: int = 8
    cg_tol: float = 1e-10
    cg_maxiter: int = 4000
    flow_steps: int = 400  # fallback block length
    pre_flow_steps: int = 0  # optional flow phase before Newton
    amg_nodes: int = 200_000  # switch to algebraic multigrid above this size

    def __post_init__(self):
        if self.tol <= 0 or self.cg_tol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class SolveReport:
    iterations: int = 0
    residual_sup: float = np.inf
    energy: float = np.nan
    converged: bool = False
    method: str = "newton"
    branch: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "iterations": int(self.iterations),
            "residual_sup": float(self.residual_sup),
            "energy": float(self.energy),
            "converged": bool(self.converged),
            "method": self.method,
            "branch": dict(self.branch),
            "notes": list(self.notes),
        }


def pde_residual(domain, nl: Nonlinearity, u):
    """r = -Lap_h u - f(u); identically zero at discrete solutions."""
    vals = _values(domain, u)
    return -domain.laplacian(vals) - nl.f(vals)


def energy(domain, nl: Nonlinearity, u) -> float:
    """E(u) = 1/2 B(u, u) - sum w F(u); discrete dual of pde_residual."""
    vals = _values(domain, u)
    return 0.5 * domain.dirichlet_form(vals, vals) - _fsum(domain.weights * nl.primitive(vals))


class _NegativeCurvature(Exception):
    pass


def _cg(apply_A, b, w, diag, free, tol, maxiter):
    """Truncated preconditioned CG in the w-inner product.

    Near an indefinite operator the recurrence can diverge once rounding
    leaks a negative-curvature component into the search space, so the best
    iterate seen is tracked and, on any early exit, certified against the
    true residual before being returned.  A step that fails to reduce the
    true residual carries no descent information; the caller falls back to
    gradient flow.
    """
    x = np.zeros_like(b)
    r = b * free
    z = r / diag
    p = z.copy()
    rz = _wdot(w, r, z)
    bnorm = math.sqrt(max(_wdot(w, b * free, b * free), 1e-300))
    best = bnorm
    xbest = x
    for it in range(maxiter):
        Ap = apply_A(p)
        pAp = _wdot(w, p, Ap)
        if pAp <= 0.0:
            if it == 0:
                raise _NegativeCurvature
            break  # truncated along the Krylov path so far
        alpha = rz / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        rn = math.sqrt(max(_wdot(w, r, r), 0.0))
        if rn < best:
            best = rn
            xbest = x
        if rn <= tol * bnorm:
            return x
        z = r / diag
        rz_new = _wdot(w, r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    resid = (b - apply_A(xbest)) * free
    if math.sqrt(max(_wdot(w, resid, resid), 0.0)) >= 0.99 * bnorm:
        raise _NegativeCurvature  # recurrence collapsed without real progress
    return xbest


def _assemble_spd(grid: StructuredGrid, pot: np.ndarray, free: np.ndarray):
    """Sparse w-weighted operator w(-Lap + pot) on free nodes (diagonal metric)."""
    import scipy.sparse as sp

    n0, n1 = grid.shape
    idx = -np.ones(grid.shape, dtype=np.int64)
    idx[free] = np.arange(int(free.sum()))
    rows, cols, vals = [], [], []
    diag = grid.weights * pot + grid.laplacian_diagonal() * grid.weights
    rows.append(idx[free])
    cols.append(idx[free])
    vals.append(diag[free])
    for a in range(2):
        k = grid._face_coef[a] * grid.cell / grid.spacing[a] ** 2
        src = idx
        dst = np.roll(idx, -1, axis=a)
        if not grid.chart.periodic[a]:
            sl = [slice(None)] * 2
            sl[a] = -1
            dst = dst.copy()
            dst[tuple(sl)] = -1
        ok = (src >= 0) & (dst >= 0) & (k > 0)
        for r, c in ((src, dst), (dst, src)):
            rows.append(r[ok])
            cols.append(c[ok])
            vals.append(-k[ok])
    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(int(free.sum()),) * 2,
    )
    return A.tocsr()


def _linear_step(domain, pot, rhs, free, cfg: SolveConfig):
    """Solve (-Lap + pot) delta = rhs on free nodes."""
    n = int(np.prod(np.shape(rhs)))
    freef = free.astype(float)
    use_amg = (
        isinstance(domain, StructuredGrid)
        and not domain._has_offdiag
        and n >= cfg.amg_nodes
        and float(pot.min()) >= 0.0
    )
    if use_amg:
        import pyamg

        A = _assemble_spd(domain, pot, free)
        b = (domain.weights * rhs)[free]
        ml = pyamg.ruge_stuben_solver(A)
        x = ml.solve(b, tol=1e-12, accel="cg", maxiter=200)
        if not np.all(np.isfinite(x)):
            raise LinearSolveFailure("algebraic multigrid produced non-finite update")
        delta = np.zeros_like(rhs)
        delta[free] = x
        return delta

    bands = getattr(domain, "operator_bands", None)
    if bands is not None and free.all():
        from scipy.linalg import solve_banded

        try:
            delta = solve_banded((1, 1), bands(pot), np.asarray(rhs, dtype=float))
        except np.linalg.LinAlgError as exc:
            raise LinearSolveFailure(f"banded factorization failed: {exc}") from None
        if not np.all(np.isfinite(delta)):
            raise LinearSolveFailure("banded solve produced non-finite update")
        return delta

    diag = domain.laplacian_diagonal() + pot
    dmin = float(diag[free].min()) if free.any() else 1.0
    if dmin <= 0:
        diag = diag + (1e-12 - dmin)

    def apply_A(v):
        vm = v * freef
        return (-domain.laplacian(vm) + pot * vm) * freef

    try:
        return _cg(apply_A, rhs * freef, domain.weights, diag, freef, cfg.cg_tol, cfg.cg_maxiter)
    except _NegativeCurvature:
        raise LinearSolveFailure("linearized operator is indefinite at this iterate") from None


def _flow_block(domain, nl, u, free, steps, notes):
    """Semi-implicit gradient flow u <- u + dt (Lap u + f(u)); energy monitored."""
    freef = free.astype(float)
    dt0 = domain.flow_step_bound()
    e = energy(domain, nl, u)
    dt = dt0
    done = 0
    while done < steps:
        dt_eff = min(dt, dt0 / (1.0 + float(np.abs(nl.f_prime(u)).max()) * dt0))
        cand = u + dt_eff * (domain.laplacian(u) + nl.f(u)) * freef
        e_cand = energy(domain, nl, cand)
        if e_cand <= e + 1e-13 * (1 + abs(e)):
            u = cand
            e = e_cand
            done += 1
            dt = min(dt * 1.1, dt0)
        else:
            dt *= 0.5
            if dt < 1e-6 * dt0:
                notes.append("flow stalled: energy stopped decreasing")
                break
    return u, e


def solve_semilinear(domain, nl: Nonlinearity, u0, cfg: SolveConfig | None = None):
    """Returns (solution, SolveReport); never raises on non-convergence."""
    cfg = cfg or SolveConfig()
    wrap = isinstance(u0, GridScalarField)
    u = _values(domain, u0).copy()
    free = domain.free_mask()
    report = SolveReport()
    notes = report.notes

    if cfg.pre_flow_steps > 0:
        u, _ = _flow_block(domain, nl, u, free, cfg.pre_flow_steps, notes)
        report.method = "flow+newton"

    for it in range(cfg.max_newton + 1):
        r = pde_residual(domain, nl, u)
        rs = float(np.abs(r[free]).max()) if free.any() else 0.0
        report.iterations = it
        report.residual_sup = rs
        if rs <= cfg.tol:
            report.converged = True
            break
        if it == cfg.max_newton:
            notes.append(f"newton budget exhausted at residual {rs:.3e}")
            break

        pot = -nl.f_prime(u)
        try:
            delta = _linear_step(domain, pot, -r, free, cfg)
        except LinearSolveFailure as exc:
            notes.append(f"iteration {it}: {exc}; taking {cfg.flow_steps} flow steps")
            u, _ = _flow_block(domain, nl, u, free, cfg.flow_steps, notes)
            report.method = "newton+flow"
            continue

        alpha = 1.0
        accepted = False
        for _ in range(cfg.max_backtracks):
            cand = u + alpha * delta
            rc = pde_residual(domain, nl, cand)
            if float(np.abs(rc[free]).max()) < rs:
                u = cand
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            notes.append(f"iteration {it}: no damping step decreased the residual; flow fallback")
            u, _ = _flow_block(domain, nl, u, free, cfg.flow_steps, notes)
            report.method = "newton+flow"

    report.energy = energy(domain, nl, u)
    out = GridScalarField(domain, u) if wrap else u
    return out, report


def continuation(domain, nl_factory, lambdas, u0, cfg: SolveConfig | None = None):
    """Parameter sweep reusing each solution as the next initial guess.

    The first leg honours cfg.pre_flow_steps (useful to fall onto a branch
    from a small symmetry-adapted seed); later legs start Newton directly.
    """
    cfg = cfg or SolveConfig()
    results = []
    u = _values(domain, u0).copy()
    for k, lam in enumerate(lambdas):
        leg_cfg = cfg if k == 0 else replace(cfg, pre_flow_steps=0)
        u, rep = solve_semilinear(domain, nl_factory(lam), u, leg_cfg)
        rep.branch = {"lambda": float(lam), "leg": k}
        results.append((float(lam), u.copy(), rep))
    return results
