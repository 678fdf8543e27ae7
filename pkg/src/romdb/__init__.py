"""romdb: databases of parametric linear reduced-order models.

Offline: build ROMs per parameter sample, enforce a consistent set of
generalized coordinates across records (Procrustes on a common mesh,
fixed-point alignment for arbitrary meshes), partition and persist.
Online: interpolate reduced operators on matrix manifolds at unsampled
parameter values and run frequency/stability/inverse computations in real
time, from Python, the CLI, or the HTTP query service.
"""

from . import analyze, consistency, dbstore, errors, manifold, matcore, romtypes, synth

__version__ = "0.1.0"

__all__ = [
    "analyze",
    "consistency",
    "dbstore",
    "errors",
    "manifold",
    "matcore",
    "romtypes",
    "synth",
    "__version__",
]
