"""Quasi-exactly solvable multiplets of the radial sextic oscillator (the
Singh model),

    [-d^2/dr^2 + l(l+1)/r^2 + A r^2 + a r^4 + r^6] phi = eps phi .

The terminating ansatz phi = r^(l+1) exp(-r^4/4 - a r^2/4) Q(r^2), with Q a
degree-N polynomial in s = r^2, fixes the quartic-quadratic coupling at

    A_N = a^2/4 - (4N + 2l + 5)

while the N+1 admissible energies are eigenvalues of a tridiagonal matrix
from the s-space recurrence

    -(m+1)(4m+4l+6) q_{m+1} + [a(2m+l+3/2) - eps] q_m + 4(m-1-N) q_{m-1} = 0 .

Relative to the Coulombic family the roles of coupling and energy are
interchanged: one exceptional coupling per N carries a whole energy
multiplet.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

from .errors import InputError, NumericError
from . import radial

DEFAULT_N_CAP = 24
_RECURRENCE_RTOL = 1e-10


@dataclass(frozen=True)
class SinghModel:
    """Angular momentum l and quartic coupling a."""

    ell: int
    a: float

    def __post_init__(self):
        if self.ell < 0 or int(self.ell) != self.ell:
            raise InputError("ell must be a non-negative integer")
        if not np.isfinite(self.a):
            raise InputError("a must be finite")


@dataclass(frozen=True)
class SexticLevel:
    N: int
    j: int
    coupling: float
    energy: float
    coeffs: np.ndarray  # q_0..q_N, polynomial in s = r^2
    norm: float
    nodes: int
    residual: float


def qes_coupling(N, model):
    """A_N = a^2/4 - (4N + 2l + 5), the coupling at which the series
    terminates at degree N."""
    if N < 0:
        raise InputError("N must be non-negative")
    return model.a**2 / 4.0 - (4.0 * N + 2.0 * model.ell + 5.0)


def energy_matrix(N, model):
    """Tridiagonal matrix whose eigenvalues are the admissible energies."""
    if N < 0:
        raise InputError("N must be non-negative")
    ell, a = model.ell, model.a
    m = np.arange(N + 1)
    T = np.zeros((N + 1, N + 1))
    T[m, m] = a * (2.0 * m + ell + 1.5)
    if N >= 1:
        T[m[:-1], m[:-1] + 1] = -2.0 * (m[:-1] + 1.0) * (2.0 * m[:-1] + 2.0 * ell + 3.0)
        T[m[1:], m[1:] - 1] = -4.0 * (N + 1.0 - m[1:])
    return T


@functools.lru_cache(maxsize=512)
def _energies_cached(N, model):
    T = energy_matrix(N, model)
    if N == 0:
        eps = np.array([T[0, 0]])
    else:
        sup = np.diag(T, 1)
        sub = np.diag(T, -1)
        # both off-diagonals are negative, so sub*super > 0 and the matrix is
        # similar to a symmetric tridiagonal one: real spectrum guaranteed
        try:
            eps = eigvalsh_tridiagonal(np.diag(T).copy(), np.sqrt(sup * sub))
        except np.linalg.LinAlgError as exc:  # pragma: no cover
            raise NumericError(f"energy eigensolver failed for N={N}: {exc}") from exc
    eps.flags.writeable = False
    return eps


def _recurrence_rows(q, N, ell, a, eps):
    qq = np.concatenate([[0.0], q, [0.0]])
    m = np.arange(N + 1)
    return (
        -(m + 1.0) * (4.0 * m + 4.0 * ell + 6.0) * qq[m + 2]
        + (a * (2.0 * m + ell + 1.5) - eps) * qq[m + 1]
        + 4.0 * (m - 1.0 - N) * qq[m]
    )


def _level(N, j, model, eps):
    ell, a = model.ell, model.a
    q = np.zeros(N + 1)
    q[0] = 1.0
    for m in range(N):
        prev = q[m - 1] if m >= 1 else 0.0
        q[m + 1] = (
            (a * (2.0 * m + ell + 1.5) - eps) * q[m] + 4.0 * (m - 1.0 - N) * prev
        ) / ((m + 1.0) * (4.0 * m + 4.0 * ell + 6.0))
    rows = _recurrence_rows(q, N, ell, a, eps)
    residual = float(np.max(np.abs(rows)) / np.max(np.abs(q)))
    if residual > _RECURRENCE_RTOL:
        raise NumericError(
            f"recurrence residual {residual:.2e} for sextic (N={N}, j={j})"
        )

    def density(r):
        poly = np.polynomial.polynomial.polyval(r * r, q)
        w = r ** (ell + 1) * np.exp(-(r**4) / 4.0 - a * r * r / 4.0)
        return (w * poly) ** 2

    norm = float(np.sqrt(radial.quad(density, tol=1e-12)))
    qn = q / norm
    if qn[N] < 0:
        qn = -qn

    roots = np.polynomial.polynomial.polyroots(qn) if N >= 1 else np.array([])
    real_pos = roots[
        (np.abs(roots.imag) <= 1e-8 * (1.0 + np.abs(roots.real))) & (roots.real > 1e-12)
    ]
    return SexticLevel(
        N=N,
        j=j,
        coupling=qes_coupling(N, model),
        energy=float(eps),
        coeffs=qn,
        norm=norm,
        nodes=int(real_pos.size),
        residual=residual,
    )


def qes_energies(N, model, max_n=DEFAULT_N_CAP):
    """Ascending energies eps_{N,0..N} and their polynomial levels.

    The energy/degree correspondence degrades numerically at large N, so
    degrees above the default cap must be requested explicitly (raise max_n);
    every returned level carries its recurrence residual as a quality
    report.
    """
    if N > max_n:
        raise InputError(
            f"N={N} exceeds the default cap {max_n}; pass max_n explicitly to "
            "accept degraded large-N conditioning"
        )
    eps = _energies_cached(N, model)
    lv = [_level(N, j, model, eps[j]) for j in range(N + 1)]
    return np.array(eps), lv


def wavefunction_values(level, model, r):
    """phi(r) = r^(l+1) exp(-r^4/4 - a r^2/4) Q(r^2)."""
    r = np.asarray(r, dtype=float)
    poly = np.polynomial.polynomial.polyval(r * r, level.coeffs)
    return (
        r ** (model.ell + 1)
        * np.exp(-(r**4) / 4.0 - model.a * r * r / 4.0)
        * poly
    )


def potential(N, model):
    """The radial potential at the terminating coupling A_N (includes the
    centrifugal term), for the verification engines."""
    ell, a = model.ell, model.a
    A = qes_coupling(N, model)

    def v(r):
        r2 = r * r
        return ell * (ell + 1.0) / r2 + A * r2 + a * r2 * r2 + r2 * r2 * r2

    return v


def multiplet_dict(N, model):
    """JSON-ready description of one multiplet (CLI output shape)."""
    eps, lv = qes_energies(N, model)
    return {
        "N": N,
        "ell": model.ell,
        "a": model.a,
        "A": qes_coupling(N, model),
        "energies": [l.energy for l in lv],
        "levels": [{"j": l.j, "eps": l.energy, "c": list(l.coeffs)} for l in lv],
    }
