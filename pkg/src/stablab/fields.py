"""Analytic scalar and vector fields on charts.

Fields carry exact first partial derivatives when available; everything of
second order and above is obtained downstream by central differences.  The
random trigonometric fields used by the identity sweeps are generated here
from a caller-supplied PCG64 generator so runs are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .charts import MetricChart

__all__ = ["ScalarField", "VectorField", "random_trig_field", "tanh_interface"]


@dataclass(frozen=True)
class ScalarField:
    """Scalar function of chart coordinates.

    ``fn`` maps ``(..., dim)`` points to values ``(...)``; ``grad_fn``, when
    present, returns the coordinate partials ``(..., dim)`` (lower index).
    """

    fn: Callable[[np.ndarray], np.ndarray]
    grad_fn: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = ""

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)

    def partials(self, x: np.ndarray) -> np.ndarray | None:
        if self.grad_fn is None:
            return None
        return np.asarray(self.grad_fn(np.asarray(x, dtype=float)), dtype=float)


@dataclass(frozen=True)
class VectorField:
    """Vector function of chart coordinates, contravariant components."""

    fn: Callable[[np.ndarray], np.ndarray]
    name: str = ""

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)


def tanh_interface(direction: int = 0) -> ScalarField:
    """The one-dimensional interface profile u = tanh(x_d / sqrt(2))."""
    s = np.sqrt(2.0)

    def fn(x: np.ndarray) -> np.ndarray:
        return np.tanh(x[..., direction] / s)

    def grad(x: np.ndarray) -> np.ndarray:
        out = np.zeros_like(x)
        out[..., direction] = 1.0 / (s * np.cosh(x[..., direction] / s) ** 2)
        return out

    return ScalarField(fn, grad, name=f"tanh-interface-axis{direction}")


def random_trig_field(
    chart: MetricChart,
    rng: np.random.Generator,
    n_terms: int = 3,
    max_wavenumber: int = 2,
) -> ScalarField:
    """Random low-order trigonometric field respecting chart periodicity.

    Each term is a product of per-axis cosines.  On periodic axes the
    frequency is an integer multiple of 2*pi / period so the field wraps
    exactly; on free axes the frequency uses the same scale but needs no
    integer constraint.  Higher wavenumbers get damped amplitudes to keep
    the derivative magnitudes moderate, which the identity sweeps rely on.
    """
    dim = chart.dim
    freqs = np.zeros((n_terms, dim))
    phases = rng.uniform(0.0, 2 * np.pi, size=(n_terms, dim))
    amps = rng.uniform(0.4, 1.0, size=n_terms) / n_terms
    for t in range(n_terms):
        for i in range(dim):
            lo, hi = chart.domain[i]
            base = 2 * np.pi / (hi - lo)
            k = int(rng.integers(1, max_wavenumber + 1))
            if not chart.periodic[i]:
                # free axes may use non-integer multiples
                freqs[t, i] = base * k * rng.uniform(0.6, 1.0)
            else:
                freqs[t, i] = base * k
            amps[t] /= k  # damp high-frequency content
    freqs.setflags(write=False)
    phases.setflags(write=False)
    amps.setflags(write=False)

    def fn(x: np.ndarray) -> np.ndarray:
        val = np.zeros(x.shape[:-1])
        for t in range(n_terms):
            term = amps[t] * np.ones(x.shape[:-1])
            for i in range(dim):
                term = term * np.cos(freqs[t, i] * x[..., i] + phases[t, i])
            val = val + term
        return val

    def grad(x: np.ndarray) -> np.ndarray:
        out = np.zeros_like(x)
        for t in range(n_terms):
            cosines = [np.cos(freqs[t, i] * x[..., i] + phases[t, i]) for i in range(dim)]
            for j in range(dim):
                dterm = amps[t] * (-freqs[t, j]) * np.sin(freqs[t, j] * x[..., j] + phases[t, j])
                for i in range(dim):
                    if i != j:
                        dterm = dterm * cosines[i]
                out[..., j] += dterm
        return out

    return ScalarField(fn, grad, name="random-trig")
