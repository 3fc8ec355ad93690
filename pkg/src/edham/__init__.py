"""edham: energy-dependent Hamiltonians as fixed-point problems.

The package solves H(E) phi = E phi two ways: directly, by tracking the
eigenvalue branches of the auxiliary family H(z) and intersecting them with
the line E = z, and indirectly, by rebuilding the spectrum inside an
energy-independent non-Hermitian operator equipped with a biorthogonal basis
and a pseudo-Hermitian metric.  Two quasi-exactly solvable radial models, a
model-space (projection) construction, and an energy-dependent-mass toy
model supply exactly solvable test beds, and independent finite-difference /
shooting / quadrature engines verify everything.

Submodules
----------
spectral   parametric operator families, branch tracking, fixed points
biortho    overlap matrix, dual basis, quasi-Hamiltonian K, metrics
hautot     shifted harmonic oscillator with a Coulomb term (QES charges)
sextic     sextic oscillator (QES couplings and energy multiplets)
reduced    generic-charge solver over a QES basis
feshbach   model-space projection producing H_eff(E)
toymass    oscillator with energy-dependent mass (closed-form spectrum)
radial     finite-difference, shooting, and quadrature verification engines
cli        the `edham` command-line runner
"""

import importlib

_SUBMODULES = (
    "spectral",
    "biortho",
    "hautot",
    "sextic",
    "reduced",
    "feshbach",
    "toymass",
    "radial",
    "errors",
    "cli",
)

__all__ = list(_SUBMODULES)
__version__ = "0.1.0"


def __getattr__(name):
    if name in _SUBMODULES:
        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))
