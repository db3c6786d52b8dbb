"""stablab: numerical laboratory for semilinear elliptic equations on surfaces.

Submodules are imported lazily so the command-line front end can pin BLAS
thread counts in the environment before numpy is first loaded.
"""

import importlib

__version__ = "0.1.0"

_SUBMODULES = (
    "charts",
    "cli",
    "eikonal",
    "errors",
    "experiment",
    "fields",
    "geodesy",
    "geometry",
    "grid",
    "liouville",
    "nonlinearity",
    "poincare",
    "solver",
    "sphere",
    "stability",
)

__all__ = list(_SUBMODULES) + ["__version__"]


def __getattr__(name):
    if name in _SUBMODULES:
        module = importlib.import_module(f".{name}", __name__)
        globals()[name] = module
        return module
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(set(globals()) | set(_SUBMODULES))
