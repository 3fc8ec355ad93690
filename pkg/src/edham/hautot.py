"""Quasi-exactly solvable levels of the shifted radial oscillator with a
Coulomb term (the Hautot model),

    [-d^2/dr^2 + l(l+1)/r^2 + F/r + f r + r^2] psi = E psi .

Writing psi = r^(l+1) exp(-r^2/2 - f r/2) P(r) with P a degree-N polynomial
terminates the Taylor series exactly when

    E_N = 2N + 2l + 3 - f^2/4

and the charge F is an eigenvalue of an (N+1) x (N+1) tridiagonal matrix
built from the three-term recurrence

    -(k+1)(k+2l+2) c_{k+1} + [f(k+l+1) + F] c_k + 2(k-N-1) c_{k-1} = 0 .

Each energy therefore carries an (N+1)-plet of admissible charges F_{N,j}
(a Sturmian multiplet).  All overlaps and Coulomb matrix elements of the
polynomial states reduce to the exponential-Gaussian moments
I_m = int_0^inf r^m exp(-r^2 - f r) dr, which this module evaluates
analytically.
"""

from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass

import mpmath as mp
import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

from .errors import (
    DegenerateChargeError,
    InputError,
    ModelInconsistencyError,
    NumericError,
    PrecisionWarning,
)
from . import radial

MOMENT_FALLBACK_RTOL = 1e-8
_RECURRENCE_RTOL = 1e-10  # hard failure threshold; the contract is 1e-12


@dataclass(frozen=True)
class HautotModel:
    """Angular momentum l and linear-slope coupling f."""

    ell: int
    f: float

    def __post_init__(self):
        if self.ell < 0 or int(self.ell) != self.ell:
            raise InputError("ell must be a non-negative integer")
        if not np.isfinite(self.f):
            raise InputError("f must be finite")


@dataclass(frozen=True)
class QESLevel:
    """One polynomial bound state: degree N, charge index j, and the
    normalised polynomial coefficients c_0..c_N."""

    N: int
    j: int
    energy: float
    charge: float
    coeffs: np.ndarray
    norm: float       # L2 norm of the c_0 = 1 recurrence solution
    nodes: int
    residual: float   # max recurrence-row residual relative to max |c|


@dataclass(frozen=True)
class MomentTable:
    """I_m = int_0^inf r^m exp(-r^2 - f r) dr for m = 0..m_max."""

    f: float
    values: np.ndarray
    from_quadrature: bool = False

    def __getitem__(self, m):
        return self.values[m]

    @property
    def m_max(self):
        return len(self.values) - 1


def qes_energy(N, model):
    """The terminating energy E_N = 2N + 2l + 3 - f^2/4 (charge-independent)."""
    if N < 0:
        raise InputError("N must be non-negative")
    return 2.0 * N + 2.0 * model.ell + 3.0 - model.f**2 / 4.0


def charge_matrix(N, model):
    """Tridiagonal matrix whose eigenvalues are the admissible charges."""
    if N < 0:
        raise InputError("N must be non-negative")
    ell, f = model.ell, model.f
    k = np.arange(N + 1)
    M = np.zeros((N + 1, N + 1))
    M[k, k] = -f * (k + ell + 1.0)
    if N >= 1:
        M[k[:-1], k[:-1] + 1] = (k[:-1] + 1.0) * (k[:-1] + 2.0 * ell + 2.0)
        M[k[1:], k[1:] - 1] = 2.0 * (N + 1.0 - k[1:])
    return M


@functools.lru_cache(maxsize=512)
def qes_charges(N, model):
    """Ascending charges F_{N,0} <= ... <= F_{N,N}.

    The charge matrix has positive sub*super products, so it is similar to a
    real symmetric tridiagonal matrix; the eigenvalues are computed from the
    symmetrised form and are always real.
    """
    M = charge_matrix(N, model)
    if N == 0:
        return np.array([M[0, 0]])
    sup = np.diag(M, 1)
    sub = np.diag(M, -1)
    try:
        charges = eigvalsh_tridiagonal(np.diag(M).copy(), np.sqrt(sup * sub))
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise NumericError(f"charge eigensolver failed for N={N}: {exc}") from exc
    charges.flags.writeable = False  # cached array is shared between callers
    return charges


def _recurrence_rows(coeffs, N, ell, f, F):
    """Residuals of the three-term recurrence for all rows k = 0..N."""
    c = np.concatenate([[0.0], coeffs, [0.0]])  # c[-1] and c[N+1] are zero
    k = np.arange(N + 1)
    return (
        -(k + 1.0) * (k + 2.0 * ell + 2.0) * c[k + 2]
        + (f * (k + ell + 1.0) + F) * c[k + 1]
        + 2.0 * (k - N - 1.0) * c[k]
    )


def wavefunction_coeffs(N, j, model):
    """Polynomial coefficients of the (N, j) level, unit-normalised under the
    weight r^(2l+2) exp(-r^2 - f r) with a positive leading coefficient."""
    if not 0 <= j <= N:
        raise InputError(f"charge index j={j} out of range 0..{N}")
    charges = qes_charges(N, model)
    F = float(charges[j])
    if N >= 1:
        gaps = np.diff(charges)
        if np.any(gaps <= 1e-12 * (1.0 + np.abs(charges[:-1]))):
            raise DegenerateChargeError(
                f"charges of the N={N} multiplet are numerically degenerate"
            )

    ell, f = model.ell, model.f
    c = np.zeros(N + 1)
    c[0] = 1.0
    for k in range(N):
        prev = c[k - 1] if k >= 1 else 0.0
        c[k + 1] = ((f * (k + ell + 1.0) + F) * c[k] + 2.0 * (k - N - 1.0) * prev) / (
            (k + 1.0) * (k + 2.0 * ell + 2.0)
        )

    rows = _recurrence_rows(c, N, ell, f, F)
    residual = float(np.max(np.abs(rows)) / np.max(np.abs(c)))
    if residual > _RECURRENCE_RTOL:
        raise NumericError(
            f"recurrence residual {residual:.2e} for (N={N}, j={j}); "
            "charge eigenvalue is not accurate enough"
        )

    table = moments(model.f, 2 * ell + 2 + 2 * N)
    p = np.arange(N + 1)
    norm = float(np.sqrt(c @ table.values[2 * ell + 2 + np.add.outer(p, p)] @ c))
    c_norm = c / norm
    if c_norm[N] < 0:
        c_norm = -c_norm

    roots = np.polynomial.polynomial.polyroots(c_norm) if N >= 1 else np.array([])
    real_pos = roots[
        (np.abs(roots.imag) <= 1e-8 * (1.0 + np.abs(roots.real))) & (roots.real > 1e-12)
    ]
    return QESLevel(
        N=N,
        j=j,
        energy=qes_energy(N, model),
        charge=F,
        coeffs=c_norm,
        norm=norm,
        nodes=int(real_pos.size),
        residual=residual,
    )


def levels(N, model):
    """All N+1 members of the Sturmian multiplet at energy E_N."""
    return [wavefunction_coeffs(N, j, model) for j in range(N + 1)]


# ---------------------------------------------------------------------------
# exponential-Gaussian moments
# ---------------------------------------------------------------------------

def _moment_recurrence_mp(f, m_max):
    """I_0 = (sqrt(pi)/2) e^{f^2/4} erfc(f/2) and the two-term recurrences,
    evaluated in extended precision: the forward recurrence cancels for
    f > 0 and loses ~8 digits by m = 60 in doubles, which would break the
    1e-10 quadrature-agreement contract."""
    dps = 40 + int(0.25 * f * f) + m_max // 3
    with mp.workdps(dps):
        ff = mp.mpf(f)
        I = [mp.sqrt(mp.pi) / 2 * mp.exp(ff * ff / 4) * mp.erfc(ff / 2)]
        if m_max >= 1:
            I.append((1 - ff * I[0]) / 2)
        for m in range(1, m_max):
            I.append((m * I[m - 1] - ff * I[m]) / 2)
    return np.array([float(x) for x in I])


def _moment_quadrature(f, m_max, tol=1e-12):
    return np.array(
        [
            radial.quad(lambda r, m=m: r**m * np.exp(-r * r - f * r), tol=tol)
            for m in range(m_max + 1)
        ]
    )


@functools.lru_cache(maxsize=64)
def _moment_block(f, m_max):
    values = _moment_recurrence_mp(f, m_max)
    reference = _moment_quadrature(f, m_max)
    rel = np.abs(values - reference) / np.abs(reference)
    from_quadrature = False
    if np.any(rel > MOMENT_FALLBACK_RTOL) or np.any(values <= 0.0):
        warnings.warn(
            f"moment recurrence at f={f} deviates from quadrature by "
            f"{np.max(rel):.2e}; falling back to quadrature for all m",
            PrecisionWarning,
            stacklevel=3,
        )
        values = reference
        from_quadrature = True
    values.flags.writeable = False  # cached array is shared between callers
    return MomentTable(f=float(f), values=values, from_quadrature=from_quadrature)


def moments(f, m_max):
    """Moment table I_0..I_{m_max}, memoised per coupling.

    Values come from the analytic recurrence (verified entry by entry
    against adaptive quadrature; quadrature takes over with a warning if the
    recurrence ever drifts past 1e-8 relative).
    """
    if m_max < 1:
        raise InputError("m_max must be at least 1")
    block = 32 * ((int(m_max) + 31) // 32)
    table = _moment_block(float(f), block)
    return MomentTable(
        f=table.f, values=table.values[: m_max + 1], from_quadrature=table.from_quadrature
    )


# ---------------------------------------------------------------------------
# matrix elements
# ---------------------------------------------------------------------------

def _moment_bilinear(levelA, levelB, model, shift):
    table = moments(model.f, shift + levelA.N + levelB.N)
    pa = np.arange(levelA.N + 1)
    pb = np.arange(levelB.N + 1)
    return float(
        levelA.coeffs @ table.values[shift + np.add.outer(pa, pb)] @ levelB.coeffs
    )


def overlap(levelA, levelB, model):
    """<A|B> = sum_{p,q} c_p c'_q I_{2l+2+p+q}; equals 1 on the diagonal."""
    return _moment_bilinear(levelA, levelB, model, 2 * model.ell + 2)


def coulomb_diagonal(level, model):
    """w_{N,j} = <N,j| 1/r |N,j>, from the shifted moment sum."""
    return _moment_bilinear(level, level, model, 2 * model.ell + 1)


def coulomb_element(levelA, levelB, model):
    """Analytic <A| 1/r |B> via moments (same route as coulomb_diagonal)."""
    return _moment_bilinear(levelA, levelB, model, 2 * model.ell + 1)


def wavefunction_values(level, model, r):
    """psi(r) = r^(l+1) exp(-r^2/2 - f r/2) P(r) on an array of radii."""
    r = np.asarray(r, dtype=float)
    poly = np.polynomial.polynomial.polyval(r, level.coeffs)
    return r ** (model.ell + 1) * np.exp(-r * r / 2.0 - model.f * r / 2.0) * poly


def coulomb_element_quad(levelA, levelB, model, tol=1e-11):
    """<A| 1/r |B> by direct quadrature; the independent cross-check for the
    moment-based and overlap-reconstructed routes."""
    return radial.quad(
        lambda r: wavefunction_values(levelA, model, r)
        * wavefunction_values(levelB, model, r)
        / r,
        tol=tol,
    )


def overlap_quad(levelA, levelB, model, tol=1e-11):
    return radial.quad(
        lambda r: wavefunction_values(levelA, model, r)
        * wavefunction_values(levelB, model, r),
        tol=tol,
    )


def sturmian_check(N, model, tol=1e-9):
    """Quadrature matrix <N,j| 1/r |N,k| over one multiplet.

    States sharing the energy E_N but carrying different charges must be
    orthogonal under the Coulomb weight (the overlap-reconstruction identity
    has a vanishing right-hand side there), so any off-diagonal entry above
    tolerance signals an upstream bug.
    """
    lv = levels(N, model)
    W = np.zeros((N + 1, N + 1))
    for jj in range(N + 1):
        for kk in range(jj, N + 1):
            W[jj, kk] = coulomb_element_quad(lv[jj], lv[kk], model)
            W[kk, jj] = W[jj, kk]
    off = W - np.diag(np.diag(W))
    worst = float(np.max(np.abs(off))) if N >= 1 else 0.0
    if worst > tol:
        raise ModelInconsistencyError(
            f"Sturmian multiplet N={N} has off-diagonal Coulomb element "
            f"{worst:.2e} > {tol:.0e}"
        )
    return W


def potential(model, F):
    """The radial potential at charge F, ready for the verification engines
    (includes the centrifugal term)."""
    ell, f = model.ell, model.f

    def v(r):
        return ell * (ell + 1.0) / r**2 + F / r + f * r + r * r

    return v


def multiplet_dict(N, model):
    """JSON-ready description of one multiplet (CLI output shape)."""
    lv = levels(N, model)
    return {
        "N": N,
        "ell": model.ell,
        "f": model.f,
        "E": qes_energy(N, model),
        "charges": [l.charge for l in lv],
        "levels": [{"j": l.j, "F": l.charge, "c": list(l.coeffs)} for l in lv],
    }
