"""Biorthogonal bases, the quasi-Hamiltonian K, and pseudo-Hermitian metrics.

Fixed points of an energy-dependent family are mutually non-orthogonal, so
the usual spectral calculus is rebuilt from the Gram matrix R of the kets:
dual (double-bra) vectors are the rows of R^{-1} times the conjugated kets,
K = sum_a |phi_a> E_a <<phi_a| reproduces every eigenpair while staying
energy-independent (and generally non-Hermitian), and the diagonal family of
metrics eta = sum_a |phi_a>> d_a <<phi_a| makes K pseudo-Hermitian,
K^dag eta = eta K.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateEnergyError,
    IllConditionedBasisError,
    InputError,
    NumericError,
)
from .spectral import canonical_phase

DEFAULT_COND_LIMIT = 1e12
DEGENERACY_RTOL = 1e-9


@dataclass(frozen=True)
class BiorthoSystem:
    """Kets (one per row), their energies, Gram data, and the dual basis."""

    kets: np.ndarray      # (m, dim), unit rows in canonical phase
    energies: np.ndarray  # (m,)
    R: np.ndarray         # overlap matrix <phi_a|phi_b>
    R_inv: np.ndarray
    duals: np.ndarray     # (m, dim); row a is the double-bra <<phi_a|
    cond_R: float

    @property
    def size(self):
        return self.kets.shape[0]

    @property
    def dim(self):
        return self.kets.shape[1]


@dataclass(frozen=True)
class QuasiHamiltonian:
    K: np.ndarray
    spanned_projector: np.ndarray


@dataclass(frozen=True)
class Metric:
    d: np.ndarray
    eta: np.ndarray
    eta_inv: np.ndarray


def _refine_inverse(R, X, max_steps=3, target=1e-13):
    """Newton-Schulz polish of an approximate inverse.

    A single factorisation leaves |XR - I| ~ eps * cond(R), which is too
    loose for the 1e-10 biorthogonality contract once cond(R) passes ~1e6;
    each refinement step squares the defect.
    """
    eye = np.eye(R.shape[0])
    for _ in range(max_steps):
        defect = X @ R - eye
        if np.linalg.norm(defect, np.inf) <= target:
            break
        X = X - defect @ X
    return X


def build_system(kets, energies, allow_degenerate=False, cond_limit=DEFAULT_COND_LIMIT):
    """Assemble the overlap matrix, its inverse, and the dual basis.

    Kets are re-normalised to unit length with a deterministic sign/phase so
    duals and K are reproducible.  Construction refuses bases whose Gram
    matrix conditioning exceeds cond_limit and, unless allow_degenerate is
    set, energy lists with coinciding entries (the diagonal-metric
    construction needs a non-degenerate spectrum).
    """
    kets = np.array([canonical_phase(v) for v in np.atleast_2d(np.asarray(kets))])
    energies = np.asarray(energies, dtype=float)
    if energies.ndim != 1 or energies.size != kets.shape[0]:
        raise InputError("need exactly one energy per ket")
    if not np.all(np.isfinite(kets)) or not np.all(np.isfinite(energies)):
        raise InputError("kets and energies must be finite")
    if not allow_degenerate:
        es = np.sort(energies)
        gaps = np.diff(es)
        close = gaps < DEGENERACY_RTOL * (1.0 + np.abs(es[:-1]))
        if np.any(close):
            k = int(np.argmax(close))
            raise DegenerateEnergyError(
                f"energies {es[k]!r} and {es[k + 1]!r} coincide; "
                "pass allow_degenerate=True to accept a degenerate basis"
            )

    R = kets.conj() @ kets.T
    cond_R = float(np.linalg.cond(R))
    if not np.isfinite(cond_R) or cond_R > cond_limit:
        raise IllConditionedBasisError(cond_R, cond_limit)

    try:
        L = np.linalg.cholesky(R)
        identity = np.eye(R.shape[0])
        Y = np.linalg.solve(L, identity)
        R_inv = np.linalg.solve(L.conj().T, Y)
    except np.linalg.LinAlgError:
        # Gram matrices of independent kets are positive definite; falling
        # through here means rounding-level indefiniteness, where pivoted LU
        # still applies.
        import scipy.linalg as sla

        lu, piv = sla.lu_factor(R)
        R_inv = sla.lu_solve((lu, piv), np.eye(R.shape[0]))
    R_inv = _refine_inverse(R, R_inv)
    R_inv = 0.5 * (R_inv + R_inv.conj().T)
    duals = R_inv @ kets.conj()
    return BiorthoSystem(
        kets=kets,
        energies=energies,
        R=R,
        R_inv=R_inv,
        duals=duals,
        cond_R=cond_R,
    )


def build_K(sys):
    """K = sum_{a,b} |phi_a> E_a (R^{-1})_{ab} <phi_b|, the energy-independent
    operator sharing every (E_a, phi_a) eigenpair."""
    phi = sys.kets.T  # columns are kets
    K = phi @ (sys.energies[:, None] * sys.R_inv) @ sys.kets.conj()
    projector = phi @ sys.duals
    return QuasiHamiltonian(K=K, spanned_projector=projector)


def diagonal_form_K(sys):
    """The same operator written as sum_a |phi_a> E_a <<phi_a|; algebraically
    identical to build_K and used as a consistency check."""
    return (sys.kets.T * sys.energies) @ sys.duals


def completeness_projector(sys):
    """P = sum_a |phi_a><<phi_a|; idempotent, acts as the identity on the
    span of the kets."""
    return sys.kets.T @ sys.duals


def build_metric(sys, d=None):
    """Diagonal-ansatz metric eta = sum_a |phi_a>> d_a <<phi_a| and its
    inverse on the span, eta_inv = sum_a |phi_a> d_a^{-1} <phi_a|."""
    if d is None:
        d = np.ones(sys.size)
    d = np.asarray(d, dtype=float)
    if d.shape != (sys.size,):
        raise InputError(f"need {sys.size} metric weights, got shape {d.shape}")
    if np.any(~np.isfinite(d)) or np.any(np.abs(d) < 1e-300):
        raise InputError("metric weights d must be finite and nonzero")
    eta = sys.duals.conj().T @ (d[:, None] * sys.duals)
    eta_inv = sys.kets.T @ ((1.0 / d)[:, None] * sys.kets.conj())
    return Metric(d=d, eta=eta, eta_inv=eta_inv)


def pseudo_hermiticity_residual(K, eta):
    """|K^dag eta - eta K|_F / max(1, |eta K|_F)."""
    K = np.asarray(K)
    eta = np.asarray(eta)
    if K.shape != eta.shape or K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise InputError("K and eta must be square matrices of equal shape")
    etaK = eta @ K
    return float(
        np.linalg.norm(K.conj().T @ eta - etaK) / max(1.0, np.linalg.norm(etaK))
    )


def metric_ansatz_constraint(sys, U):
    """Residual [E_a U_ab - U_ab E_b] of the general metric ansatz; for a
    non-degenerate spectrum it vanishes exactly when U is diagonal."""
    U = np.asarray(U)
    if U.shape != (sys.size, sys.size):
        raise InputError(f"U must be {sys.size} x {sys.size}")
    E = sys.energies
    return E[:, None] * U - U * E[None, :]


def weak_orthogonality_residual(family, sys):
    """M_ba = <phi_b|[H(E_b) - H(E_a)]|phi_a> - (E_b - E_a) R_ba.

    Replaces ordinary orthogonality for energy-dependent families: the
    entries vanish (to solver accuracy) whenever the kets are genuine fixed
    points of the family.
    """
    m = sys.size
    H_at = [np.asarray(family.evaluate(float(E))) for E in sys.energies]
    M = np.zeros((m, m), dtype=sys.kets.dtype)
    for b in range(m):
        for a in range(m):
            lhs = sys.kets[b].conj() @ (H_at[b] - H_at[a]) @ sys.kets[a]
            M[b, a] = lhs - (sys.energies[b] - sys.energies[a]) * sys.R[b, a]
    return M


def dual_vs_metric_proportionality(sys, metric):
    """Per-state constants relating <phi_a| eta to the double-bra <<phi_a|.

    The two row vectors must be parallel for any metric built from the same
    system; the constant equals the metric weight d_a.
    """
    consts = []
    for a in range(sys.size):
        v = sys.kets[a].conj() @ metric.eta
        u = sys.duals[a]
        uu = np.vdot(u, u).real
        if uu == 0.0:
            raise NumericError(f"dual vector {a} vanished")
        c = np.vdot(u, v) / uu
        if np.linalg.norm(v - c * u) > 1e-10 * np.linalg.norm(v):
            raise NumericError(
                f"<phi_{a}|eta is not parallel to the dual vector "
                f"(angle defect {np.linalg.norm(v - c * u) / np.linalg.norm(v):.2e})"
            )
        consts.append(complex(c).real if abs(complex(c).imag) < 1e-12 else complex(c))
    return consts


# ---------------------------------------------------------------------------
# serialization: {energies, kets, R, cond_R}, row-major, 17 significant digits
# ---------------------------------------------------------------------------

def _fmt(x):
    return f"{float(x):.17g}"


def _fmt_matrix(M):
    rows = (",".join(_fmt(x) for x in row) for row in np.atleast_2d(M))
    return "[" + ",".join("[" + r + "]" for r in rows) + "]"


def system_to_json(sys):
    parts = [
        '"energies":[' + ",".join(_fmt(e) for e in sys.energies) + "]",
        '"kets":' + _fmt_matrix(sys.kets.real),
        '"R":' + _fmt_matrix(sys.R.real),
        '"cond_R":' + _fmt(sys.cond_R),
    ]
    return "{" + ",".join(parts) + "}"


def save_system(sys, path):
    if np.iscomplexobj(sys.kets) and np.max(np.abs(sys.kets.imag)) > 0:
        raise InputError("the JSON system format stores real kets only")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(system_to_json(sys) + "\n")


def load_system(path, **kwargs):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"cannot parse system file {path}: {exc}") from exc
    try:
        kets = np.asarray(doc["kets"], dtype=float)
        energies = np.asarray(doc["energies"], dtype=float)
    except (KeyError, ValueError) as exc:
        raise InputError(f"system file {path} lacks kets/energies: {exc}") from exc
    return build_system(kets, energies, **kwargs)
