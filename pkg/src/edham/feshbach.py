"""Model-space reduction of a finite Hermitian problem.

Splitting the identity into complementary projectors P and Q and eliminating
the Q components of the eigenvector turns H Psi = E Psi into an eigenproblem
on the P subspace alone,

    H_eff(E) = H_PP + H_PQ (E I_Q - H_QQ)^{-1} H_QP ,

whose energy dependence is the price of the smaller space.  The original
eigenvalues reappear exactly as the fixed points E_n(z) = z of the effective
family, except for eigenvectors with no weight in the P subspace, which the
reduced problem cannot see at all.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import BranchRefinementError, InputError, NearPoleError
from .spectral import (
    ParametricOperator,
    FixedPointSolution,
    find_fixed_points,
    pole_split,
    spectral_decompose,
    _check_matrix,
)

DEFAULT_POLE_GUARD_RTOL = 1e-8
_DEFAULT_INTERVAL_POINTS = 17
_MAX_GRID_RETRIES = 4


@dataclass(frozen=True)
class Partition:
    """A Hermitian matrix split by a subset of coordinates."""

    H: np.ndarray
    p_indices: tuple
    q_indices: tuple
    H_PP: np.ndarray
    H_PQ: np.ndarray
    H_QP: np.ndarray
    H_QQ: np.ndarray


def make_partition(H, p_indices):
    H = _check_matrix(np.array(H, copy=True))
    n = H.shape[0]
    p = tuple(sorted(set(int(i) for i in p_indices)))
    if not p or any(i < 0 or i >= n for i in p):
        raise InputError(f"p_indices must be a non-empty subset of 0..{n - 1}")
    q = tuple(i for i in range(n) if i not in p)
    if not q:
        raise InputError("the complement subspace Q must be non-empty")
    ip = np.array(p)
    iq = np.array(q)
    return Partition(
        H=H,
        p_indices=p,
        q_indices=q,
        H_PP=H[np.ix_(ip, ip)],
        H_PQ=H[np.ix_(ip, iq)],
        H_QP=H[np.ix_(iq, ip)],
        H_QQ=H[np.ix_(iq, iq)],
    )


@dataclass(frozen=True)
class EffectiveFamily:
    """The energy-dependent operator z -> H_eff(z) with its pole data.

    Quacks like a ParametricOperator (dim / evaluate / domain), so the
    fixed-point machinery applies directly on any interval between poles.
    """

    partition: Partition
    dim: int
    poles: np.ndarray
    pole_guard: float
    bound: float  # spectral norm of the full H

    @property
    def domain(self):
        return (-self.bound - 1.0, self.bound + 1.0)

    def evaluate(self, z):
        z = float(z)
        if np.min(np.abs(z - self.poles)) < self.pole_guard:
            raise NearPoleError(
                f"z={z!r} is within {self.pole_guard:.3e} of a resolvent pole"
            )
        part = self.partition
        nq = part.H_QQ.shape[0]
        # symmetric-indefinite solve; the resolvent is never formed explicitly
        X = sla.solve(
            z * np.eye(nq) - part.H_QQ, part.H_QP, assume_a="sym", check_finite=False
        )
        Heff = part.H_PP + part.H_PQ @ X
        return 0.5 * (Heff + Heff.conj().T)  # symmetrise away solve roundoff


def make_effective(partition, pole_guard=None):
    poles = np.sort(sla.eigvalsh(partition.H_QQ))
    bound = float(np.linalg.norm(partition.H, 2))
    if pole_guard is None:
        pole_guard = DEFAULT_POLE_GUARD_RTOL * (1.0 + bound)
    return EffectiveFamily(
        partition=partition,
        dim=partition.H_PP.shape[0],
        poles=poles,
        pole_guard=float(pole_guard),
        bound=bound,
    )


@dataclass(frozen=True)
class SelfConsistentSpectrum:
    fixed_points: tuple
    intervals: tuple  # (lo, hi, roots found) per searched inter-pole interval


def selfconsistent_spectrum(
    family, fp_tol=1e-10, points_per_interval=_DEFAULT_INTERVAL_POINTS
):
    """All solutions of H_eff(E) psi = E psi.

    Each open interval between consecutive poles (and the two outer ones,
    bounded by the norm of the full matrix plus one) is scanned with the
    generic fixed-point search; a lost branch triggers grid doubling on that
    interval only.  Every eigenvalue branch of the effective family is
    strictly decreasing in z, so each branch crosses E = z at most once per
    interval and a modest grid cannot skip roots.
    """
    # split with a wider margin than the evaluation guard so interval
    # endpoints never round onto the guard boundary itself
    intervals = pole_split(family.domain, family.poles, 2.0 * family.pole_guard)
    all_roots = []
    summary = []
    for lo, hi in intervals:
        pts = points_per_interval
        local = ParametricOperator(
            dim=family.dim, evaluate=family.evaluate, domain=(lo, hi)
        )
        for retry in range(_MAX_GRID_RETRIES + 1):
            try:
                roots = find_fixed_points(
                    local, grid=np.linspace(lo, hi, pts), fp_tol=fp_tol
                )
                break
            except BranchRefinementError:
                if retry == _MAX_GRID_RETRIES:
                    raise
                pts = 2 * pts - 1  # halve the step
        all_roots.extend(roots)
        summary.append((lo, hi, len(roots)))
    all_roots.sort(key=lambda s: s.energy)
    relabelled = []
    counters = {}
    for s in all_roots:
        n = s.alpha[0]
        i = counters.get(n, 0)
        counters[n] = i + 1
        relabelled.append(
            FixedPointSolution(
                alpha=(n, i),
                energy=s.energy,
                eigenvector=s.eigenvector,
                residual=s.residual,
                at_boundary=s.at_boundary,
            )
        )
    return SelfConsistentSpectrum(
        fixed_points=tuple(relabelled), intervals=tuple(summary)
    )


def reconstruct_full(partition, E, psi_eff, pole_guard=None):
    """Rebuild the full eigenvector from a fixed point of the reduced problem
    via Q Psi = (E I_Q - H_QQ)^{-1} H_QP psi_eff."""
    psi_eff = np.asarray(psi_eff)
    if psi_eff.shape != (len(partition.p_indices),):
        raise InputError("psi_eff must live on the P subspace")
    poles = sla.eigvalsh(partition.H_QQ)
    bound = float(np.linalg.norm(partition.H, 2))
    guard = pole_guard if pole_guard is not None else DEFAULT_POLE_GUARD_RTOL * (1.0 + bound)
    if np.min(np.abs(E - poles)) < guard:
        raise NearPoleError(f"E={E!r} is within {guard:.3e} of a pole of the resolvent")
    nq = partition.H_QQ.shape[0]
    q_part = sla.solve(
        E * np.eye(nq) - partition.H_QQ, partition.H_QP @ psi_eff, assume_a="sym"
    )
    full = np.zeros(partition.H.shape[0], dtype=np.result_type(psi_eff, q_part))
    full[list(partition.p_indices)] = psi_eff
    full[list(partition.q_indices)] = q_part
    return full / np.linalg.norm(full)


def blind_spots(partition, tol=1e-6):
    """Eigenvalues of the full matrix whose eigenvectors carry less than tol
    of their weight in the P subspace; these are invisible to the reduced
    problem."""
    w, V = spectral_decompose(partition.H)
    p_weight = np.linalg.norm(V[list(partition.p_indices), :], axis=0)
    return w[p_weight < tol], p_weight
