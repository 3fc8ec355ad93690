"""Generic-charge spectra from a quasi-exactly-solvable basis.

One polynomial state is picked per degree N (one charge per energy); in that
basis the bound-state problem at an arbitrary charge F becomes Z(E, F) h = 0
with

    Z_{A,b} = (F - F_A) <A| 1/r |b> - (E - E_A) <A|b> ,

where every off-diagonal Coulomb element is reconstructed from overlaps,

    <A| 1/r |b> = (E_b - E_A) / (F_b - F_A) * R_{A,b}     (A != b),

so only the overlap matrix and the diagonal elements w_A = <A| 1/r |A> are
ever integrated.  Z is affine in E, so the root problem collapses to one
generalized linear eigenproblem  [diag(F - F_A) W + diag(E_A) R] h = E R h.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import (
    DegenerateChargeError,
    IllConditionedBasisError,
    InputError,
    PrecisionWarning,
)
from . import hautot, radial

CHARGE_RTOL = 1e-9
_REAL_EIG_RTOL = 1e-9
_QES_PROXIMITY_RTOL = 1e-12


@dataclass(frozen=True)
class BasisSelection:
    """Truncation degree and the charge index picked for each N."""

    n_max: int
    pick: tuple

    def __post_init__(self):
        if self.n_max < 0:
            raise InputError("n_max must be non-negative")
        if len(self.pick) != self.n_max + 1:
            raise InputError("pick must supply one charge index per degree 0..n_max")
        for N, j in enumerate(self.pick):
            if not 0 <= j <= N:
                raise InputError(f"pick[{N}]={j} out of range 0..{N}")


def auto_pick(model, n_max, f_target):
    """Charge indices closest to the target charge, degree by degree.

    The nearest admissible charge alone can repeat across degrees (charge 0
    belongs to every even multiplet at f = 0), which the reconstruction
    formula cannot tolerate, so already-taken charges are skipped in favour
    of the next-nearest one.
    """
    taken = []
    pick = []
    for N in range(n_max + 1):
        charges = hautot.qes_charges(N, model)
        order = np.argsort(np.abs(charges - f_target), kind="stable")
        chosen = None
        for j in order:
            if all(
                abs(charges[j] - t) > CHARGE_RTOL * (1.0 + abs(charges[j]))
                for t in taken
            ):
                chosen = int(j)
                break
        if chosen is None:
            raise DegenerateChargeError(
                f"no charge of the N={N} multiplet is distinct from earlier picks"
            )
        pick.append(chosen)
        taken.append(float(charges[chosen]))
    return BasisSelection(n_max=n_max, pick=tuple(pick))


@dataclass(frozen=True)
class ReducedSystem:
    """Overlap matrix, reconstructed Coulomb matrix, and per-row data."""

    model: hautot.HautotModel
    selection: BasisSelection
    levels: tuple
    R: np.ndarray
    Wt: np.ndarray
    E_A: np.ndarray
    F_A: np.ndarray
    w: np.ndarray
    cond_R: float
    spd: bool  # whether R is numerically positive definite (Cholesky ran)

    @property
    def size(self):
        return self.E_A.size


@dataclass(frozen=True)
class GenericSpectrum:
    charge: float
    energies: np.ndarray        # real eigenvalues, ascending
    vectors: np.ndarray         # columns h, normalised h^T R h = 1
    complex_pairs: np.ndarray   # truncation artifacts, reported not dropped
    drift: dict                 # |E - E'| against the n_max-2 subsystem
    cond_R: float


def assemble(selection, model):
    """Build the reduced system for one basis selection.

    Overlaps and the Coulomb diagonal come from the analytic moment sums;
    every off-diagonal Coulomb element is reconstructed from the overlap
    matrix, so no matrix element of the charge-free part of the Hamiltonian
    is ever needed.
    """
    n = selection.n_max + 1
    levels = tuple(
        hautot.wavefunction_coeffs(N, selection.pick[N], model) for N in range(n)
    )
    F_A = np.array([lv.charge for lv in levels])
    E_A = np.array([lv.energy for lv in levels])
    w = np.array([hautot.coulomb_diagonal(lv, model) for lv in levels])

    for a in range(n):
        for b in range(a + 1, n):
            if abs(F_A[a] - F_A[b]) <= CHARGE_RTOL * (1.0 + abs(F_A[a])):
                raise DegenerateChargeError(
                    f"picked charges for N={a} and N={b} coincide "
                    f"({F_A[a]!r} vs {F_A[b]!r})"
                )

    R = np.eye(n)
    for a in range(n):
        for b in range(a + 1, n):
            R[a, b] = R[b, a] = hautot.overlap(levels[a], levels[b], model)

    Wt = np.diag(w).astype(float)
    for a in range(n):
        for b in range(n):
            if a != b:
                Wt[a, b] = (E_A[b] - E_A[a]) / (F_A[b] - F_A[a]) * R[a, b]

    cond_R = float(np.linalg.cond(R))
    spd = True
    try:
        sla.cholesky(R, lower=True)
    except np.linalg.LinAlgError:
        # The exact Gram matrix is positive definite; at large truncations
        # its numerical image can lose definiteness to rounding.  Genuine
        # indefiniteness (a bad basis) is still rejected.
        lam = sla.eigvalsh(R)
        if lam[0] < -1e-8 * lam[-1]:
            raise IllConditionedBasisError(cond_R) from None
        spd = False
        warnings.warn(
            f"overlap matrix is numerically semi-definite (cond ~ {cond_R:.2e}); "
            "generic-charge solves fall back to the QZ pencil path",
            PrecisionWarning,
            stacklevel=2,
        )
    return ReducedSystem(
        model=model,
        selection=selection,
        levels=levels,
        R=R,
        Wt=Wt,
        E_A=E_A,
        F_A=F_A,
        w=w,
        cond_R=cond_R,
        spd=spd,
    )


def z_matrix(sys, E, F):
    """Z(E, F) with Z_{A,b} = (F - F_A) Wt_{A,b} - (E - E_A) R_{A,b};
    affine in both arguments."""
    return (F - sys.F_A)[:, None] * sys.Wt - (E - sys.E_A)[:, None] * sys.R


def _pencil(sys, F):
    return np.diag(F - sys.F_A) @ sys.Wt + np.diag(sys.E_A) @ sys.R


def _solve_eig(sys, F):
    A = _pencil(sys, F)
    if sys.spd:
        L = sla.cholesky(sys.R, lower=True)
        B = sla.solve_triangular(L, A, lower=True)
        B = sla.solve_triangular(L, B.T, lower=True).T
        lam, Y = sla.eig(B)
        H = sla.solve_triangular(L.conj().T, Y)
    else:
        lam, H = sla.eig(A, sys.R)
    return lam, H


def solve_generic(sys, F):
    """Spectrum at a generic charge F not in the QES set.

    Real eigenvalues are returned ascending with R-normalised coefficient
    vectors; complex conjugate pairs (truncation artifacts of the
    non-symmetric reduced problem) are reported separately, never dropped
    silently.  Truncation quality is estimated by re-solving on the
    subsystem with the two highest degrees removed.
    """
    F = float(F)
    near = np.abs(F - sys.F_A) <= _QES_PROXIMITY_RTOL * (1.0 + np.abs(sys.F_A))
    if np.any(near):
        A = int(np.argmax(near))
        raise InputError(
            f"charge F={F!r} coincides with the QES charge F_A={sys.F_A[A]!r} "
            f"(row N={A}); the terminating solution applies there"
        )
    lam, H = _solve_eig(sys, F)

    finite = np.isfinite(lam)
    lam, H = lam[finite], H[:, finite]
    is_real = np.abs(lam.imag) <= _REAL_EIG_RTOL * (1.0 + np.abs(lam))
    energies = lam[is_real].real
    order = np.argsort(energies)
    energies = energies[order]
    vectors = H[:, is_real][:, order].real

    for k in range(vectors.shape[1]):
        h = vectors[:, k]
        scale = float(h @ sys.R @ h)
        if scale > 0:
            h = h / np.sqrt(scale)
        if h[np.argmax(np.abs(h))] < 0:
            h = -h
        vectors[:, k] = h

    pairs = lam[~is_real]
    pairs = pairs[np.argsort(pairs.real)]

    drift = {}
    if sys.size > 2:
        sub = _subsystem(sys, sys.size - 2)
        lam_s, _ = _solve_eig(sub, F)
        real_s = np.sort(
            lam_s[np.abs(lam_s.imag) <= _REAL_EIG_RTOL * (1.0 + np.abs(lam_s))].real
        )
        k = min(len(real_s), len(energies))
        drift = {
            "levels_compared": k,
            "per_level": np.abs(energies[:k] - real_s[:k]).tolist(),
        }
    return GenericSpectrum(
        charge=F,
        energies=energies,
        vectors=vectors,
        complex_pairs=pairs,
        drift=drift,
        cond_R=sys.cond_R,
    )


def _subsystem(sys, n):
    """Principal subsystem over degrees 0..n-1 (no re-assembly needed)."""
    sel = BasisSelection(n_max=n - 1, pick=sys.selection.pick[:n])
    spd = sys.spd
    if not spd:
        try:
            sla.cholesky(sys.R[:n, :n], lower=True)
            spd = True
        except np.linalg.LinAlgError:
            spd = False
    return ReducedSystem(
        model=sys.model,
        selection=sel,
        levels=sys.levels[:n],
        R=sys.R[:n, :n],
        Wt=sys.Wt[:n, :n],
        E_A=sys.E_A[:n],
        F_A=sys.F_A[:n],
        w=sys.w[:n],
        cond_R=float(np.linalg.cond(sys.R[:n, :n])),
        spd=spd,
    )


def reconstruct_wavefunction(sys, h, r):
    """Psi(r) = sum_a h_a psi_a(r) on an array of radii."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    for coeff, lv in zip(h, sys.levels):
        out += coeff * hautot.wavefunction_values(lv, sys.model, r)
    return out


def fd_reference(model, F, k_levels=4, r_max=9.0, n_grid=1600):
    """Finite-difference oracle spectrum for the same potential at charge F."""
    problem = radial.RadialProblem(
        potential=hautot.potential(model, F),
        r_max=r_max,
        n_grid=n_grid,
        ell=model.ell,
    )
    return radial.fd_spectrum(problem, k_levels)


def truncation_study(model, F, n_max_list, f_target=None, k_levels=3, picks=None):
    """Convergence table of the lowest levels against basis truncation.

    Reports per-truncation energies, Cauchy differences between consecutive
    truncations, deviation from the finite-difference oracle, the Gram
    conditioning, and whether the Cauchy tail is monotonically shrinking.
    """
    n_max_list = sorted(set(int(n) for n in n_max_list))
    if len(n_max_list) < 2:
        raise InputError("need at least two truncations to study convergence")
    if f_target is None:
        f_target = F
    rows = []
    for n_max in n_max_list:
        sel = picks(n_max) if picks is not None else auto_pick(model, n_max, f_target)
        sysm = assemble(sel, model)
        spec = solve_generic(sysm, F)
        rows.append(
            {
                "n_max": n_max,
                "energies": spec.energies[:k_levels].tolist(),
                "cond_R": sysm.cond_R,
            }
        )
    ref = fd_reference(model, F, k_levels=k_levels)
    for i, row in enumerate(rows):
        k = min(k_levels, len(row["energies"]))
        row["fd_deviation"] = [
            abs(row["energies"][j] - ref.energies[j]) for j in range(k)
        ]
        if i > 0:
            kk = min(len(row["energies"]), len(rows[i - 1]["energies"]))
            row["cauchy"] = [
                abs(row["energies"][j] - rows[i - 1]["energies"][j]) for j in range(kk)
            ]
    tail = [r["cauchy"][0] for r in rows[1:] if r.get("cauchy")]
    monotone = all(b <= a * 1.001 + 1e-14 for a, b in zip(tail, tail[1:]))
    return {
        "charge": float(F),
        "fd_reference": ref.energies[:k_levels].tolist(),
        "rows": rows,
        "monotone_tail": bool(monotone),
    }
