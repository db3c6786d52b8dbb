"""Reaction terms f, their derivatives, and energy primitives."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError

__all__ = ["Nonlinearity", "make_nonlinearity", "nonlinearity_names", "shifted"]


@dataclass(frozen=True)
class Nonlinearity:
    name: str
    f: Callable[[np.ndarray], np.ndarray]
    f_prime: Callable[[np.ndarray], np.ndarray]
    primitive: Callable[[np.ndarray], np.ndarray]  # F with F' = f
    params: dict = field(default_factory=dict)

    def consistency_errors(self, lo: float = -3.0, hi: float = 3.0, n: int = 100):
        """Max finite-difference defects of (F' - f, f' - df) over a sample."""
        t = np.linspace(lo, hi, n)
        d = 1e-6
        e_f = np.abs((self.primitive(t + d) - self.primitive(t - d)) / (2 * d) - self.f(t)).max()
        e_fp = np.abs((self.f(t + d) - self.f(t - d)) / (2 * d) - self.f_prime(t)).max()
        return float(e_f), float(e_fp)


def _allen_cahn() -> Nonlinearity:
    return Nonlinearity(
        name="allen-cahn",
        f=lambda u: u - u**3,
        f_prime=lambda u: 1.0 - 3.0 * u**2,
        primitive=lambda u: u**2 / 2 - u**4 / 4,
    )


def _scaled_allen_cahn(lam: float = 1.0) -> Nonlinearity:
    lam = float(lam)
    return Nonlinearity(
        name="scaled-allen-cahn",
        f=lambda u: lam * (u - u**3),
        f_prime=lambda u: lam * (1.0 - 3.0 * u**2),
        primitive=lambda u: lam * (u**2 / 2 - u**4 / 4),
        params={"lam": lam},
    )


def _tanh_step() -> Nonlinearity:
    # bounded, strictly positive, C^1; primitive (u - ln cosh u)/2
    return Nonlinearity(
        name="tanh-step",
        f=lambda u: 0.5 * (1.0 - np.tanh(u)),
        f_prime=lambda u: -0.5 / np.cosh(u) ** 2,
        primitive=lambda u: 0.5 * (u - _ln_cosh(u)),
    )


def _ln_cosh(u):
    # overflow-safe ln cosh
    a = np.abs(u)
    return a + np.log1p(np.exp(-2 * a)) - np.log(2.0)


_FACTORIES = {
    "allen-cahn": _allen_cahn,
    "scaled-allen-cahn": _scaled_allen_cahn,
    "tanh-step": _tanh_step,
}


def make_nonlinearity(name: str, **params) -> Nonlinearity:
    try:
        factory = _FACTORIES[name]
    except KeyError:
        raise ConfigError(
            f"unknown nonlinearity {name!r}; available: {sorted(_FACTORIES)}"
        ) from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for nonlinearity {name!r}: {exc}") from None


def nonlinearity_names():
    return sorted(_FACTORIES)


def shifted(nl: Nonlinearity, c: float) -> Nonlinearity:
    """f -> f + c u; shifts the linearized spectrum by exactly -c."""
    c = float(c)
    return Nonlinearity(
        name=f"{nl.name}+{c:g}u",
        f=lambda u: nl.f(u) + c * u,
        f_prime=lambda u: nl.f_prime(u) + c,
        primitive=lambda u: nl.primitive(u) + c * u**2 / 2,
        params={**nl.params, "shift": c},
    )
