"""Following the unstable branch of lam (u - u^3) on the round sphere.

For f(u) = lam (u - u^3) on the unit sphere the constants +-1 are stable for
every lam > 0 (their principal eigenvalue is 2 lam), while u = 0 is unstable.
At lam = 2 a branch of axisymmetric states bifurcates from zero along the
first Legendre mode, and on a closed surface of positive curvature no
nonconstant state can be stable, so the branch keeps a negative direction
all along.  Gradient flow runs away from such a saddle; what reaches it is
warm-started Newton continuation, stepping lam from just above the
bifurcation to the target.

The script follows the branch from lam = 2.2 to lam = 3.0, prints per-leg
convergence, then assembles the stability spectrum of the branch and of the
constant states per azimuthal Fourier mode.  Two things are worth watching
in the output: the branch's m = 1 eigenvalue sits at zero (rotating the
axisymmetric state around any equatorial axis costs nothing), and shifting
the nonlinearity by a constant shifts the whole spectrum by exactly that
constant.

Run: python demos/sphere_branch.py
"""

import numpy as np

from stablab.nonlinearity import make_nonlinearity, shifted
from stablab.solver import SolveConfig, continuation
from stablab.sphere import SphereAxisymmetric
from stablab.stability import principal_eigenvalue

dom = SphereAxisymmetric(radius=1.0, n=192)
lambdas = [2.2, 2.4, 2.6, 2.8, 3.0]
legs = continuation(
    dom,
    lambda lam: make_nonlinearity("scaled-allen-cahn", lam=lam),
    lambdas,
    0.5 * np.cos(dom.theta),
    SolveConfig(pre_flow_steps=200),
)
print("continuation legs:")
for lam, u, rep in legs:
    print(
        f"  lam = {lam:.1f}: converged={rep.converged} in {rep.iterations} Newton"
        f" steps, residual {rep.residual_sup:.2e}, sup|u| = {float(np.abs(u).max()):.4f}"
    )

lam, u, _ = legs[-1]
nl = make_nonlinearity("scaled-allen-cahn", lam=lam)
print(f"stability spectra at lam = {lam:.1f} (azimuthal modes m = 0, 1, 2):")
for label, field in (("branch", u), ("u = +1", dom.constant(1.0)), ("u = 0", dom.constant(0.0))):
    rep = principal_eigenvalue(dom, nl, field, modes=(0, 1, 2), seed=3)
    per_mode = "  ".join(f"m={m['mode']}: {m['lambda']:+.4f}" for m in rep.modes)
    print(f"  {label:7s} lambda_min = {rep.lambda_min:+.4f} ({rep.verdict})   {per_mode}")

base = principal_eigenvalue(dom, nl, dom.constant(0.0), seed=3)
shift = principal_eigenvalue(dom, shifted(nl, 0.7), dom.constant(0.0), seed=3)
resid = abs(shift.lambda_min - (base.lambda_min - 0.7))
print(
    f"shift law at u = 0: lambda_min(f' + 0.7) = {shift.lambda_min:+.6f}"
    f" = {base.lambda_min:+.6f} - 0.7   (residual {resid:.2e})"
)
