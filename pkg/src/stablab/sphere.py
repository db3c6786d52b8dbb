"""Axisymmetric reduction of the round sphere.

Cell-centered colatitude grid theta_k = (k + 1/2) h, h = pi/n, so every
quadrature weight 2 pi a^2 sin(theta_k) h is strictly positive and the flux
coefficients sin(k h) vanish at the poles, which encodes the regularity
(no-flux) condition without ghost nodes.  The discrete operator satisfies
exact summation by parts against the weights, mirroring the structured-grid
contract on this compact surface.

Azimuthal Fourier mode m adds the potential m^2 / (a sin theta)^2; stability
of axisymmetric states is assessed per mode.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError

__all__ = ["SphereAxisymmetric"]


class SphereAxisymmetric:
    def __init__(self, radius: float = 1.0, n: int = 256):
        n = int(n)
        if n < 8:
            raise ConfigError(f"resolution below minimum 8: {n}")
        if radius <= 0:
            raise ConfigError("radius must be positive")
        self.radius = float(radius)
        self.n = n
        self.h = np.pi / n
        self.h_max = self.h * self.radius  # physical spacing
        self.theta = (np.arange(n) + 0.5) * self.h
        self.shape = (n,)
        self.weights = 2 * np.pi * self.radius**2 * np.sin(self.theta) * self.h
        faces = np.sin(np.arange(n + 1) * self.h)
        faces[0] = 0.0
        faces[-1] = 0.0  # poles carry no flux
        self._faces = faces
        self.compact = True
        self.caps = (None,)

    # -- solver/stability domain interface ---------------------------------

    def _values(self, field) -> np.ndarray:
        vals = np.asarray(getattr(field, "values", field), dtype=float)
        if vals.shape != self.shape:
            raise ConfigError(f"field shape {vals.shape} does not match reduction ({self.n},)")
        return vals

    def sample(self, fn):
        return np.asarray(fn(self.theta), dtype=float)

    def constant(self, value: float) -> np.ndarray:
        return np.full(self.n, float(value))

    def laplacian(self, field) -> np.ndarray:
        u = self._values(field)
        flux = np.zeros(self.n + 1)
        flux[1:-1] = self._faces[1:-1] * (u[1:] - u[:-1])
        return (flux[1:] - flux[:-1]) / (self.radius**2 * np.sin(self.theta) * self.h**2)

    def dirichlet_form(self, phi, psi) -> float:
        u = self._values(phi)
        v = self._values(psi)
        du = u[1:] - u[:-1]
        dv = v[1:] - v[:-1]
        return float(2 * np.pi / self.h * np.sum(self._faces[1:-1] * du * dv))

    def integrate(self, field) -> float:
        return float(np.sum(self.weights * self._values(field)))

    def node_grad_norm_sq(self, field) -> np.ndarray:
        u = self._values(field)
        du = np.gradient(u, self.h, edge_order=2)
        return (du / self.radius) ** 2

    def interior_mask(self, margin: int = 0) -> np.ndarray:
        return np.ones(self.n, dtype=bool)

    def free_mask(self) -> np.ndarray:
        return np.ones(self.n, dtype=bool)

    def laplacian_diagonal(self) -> np.ndarray:
        return (self._faces[1:] + self._faces[:-1]) / (
            self.radius**2 * np.sin(self.theta) * self.h**2
        )

    def flow_step_bound(self) -> float:
        # sharpest diagonal of the flux operator bounds the spectrum
        return 0.9 / (2.0 * float(self.laplacian_diagonal().max()))

    def mode_potential(self, m: int) -> np.ndarray:
        if m == 0:
            return np.zeros(self.n)
        return (m / (self.radius * np.sin(self.theta))) ** 2

    def operator_bands(self, pot) -> np.ndarray:
        """(-Lap + pot) as a banded (1, 1) matrix for direct linear solves.

        The reduction is one dimensional, so Newton steps can be taken with
        an exact tridiagonal factorization; unlike an iterative method this
        stays reliable when the linearization is indefinite, which is the
        generic situation on an unstable branch.
        """
        cap = self.radius**2 * np.sin(self.theta) * self.h**2
        upper = -self._faces[1:] / cap
        lower = -self._faces[:-1] / cap
        ab = np.zeros((3, self.n))
        ab[0, 1:] = upper[:-1]
        ab[1] = self.laplacian_diagonal() + self._values(pot)
        ab[2, :-1] = lower[1:]
        return ab
