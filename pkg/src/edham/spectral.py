"""Parametric Hermitian operator families and their fixed-point spectra.

An energy-dependent eigenproblem H(E) phi = E phi is handled by disentangling
the parameter from the eigenvalue: the family H(z) is diagonalised along a
grid of z values, each eigenvalue branch E_n(z) is followed continuously by
matching eigenvectors between neighbouring grid points, and the physical
energies are the roots of E_n(z) - z = 0.  Each root is labelled by the
multi-index (branch, root-within-branch).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (
    BoundaryRootWarning,
    BranchRefinementError,
    InputError,
    NumericError,
)

HERMITICITY_RTOL = 1e-13
DEFAULT_GRID_POINTS = 400
DEFAULT_FP_TOL = 1e-10
DEFAULT_OVERLAP_THRESHOLD = 0.5
_MAX_BISECT = 30
_MAX_SECANT = 12


@dataclass(frozen=True)
class ParametricOperator:
    """A family z -> H(z) of dim x dim Hermitian matrices on a real interval."""

    dim: int
    evaluate: Callable[[float], np.ndarray]
    domain: tuple[float, float]

    def __post_init__(self):
        if self.dim < 1:
            raise InputError(f"operator dimension must be positive, got {self.dim}")
        lo, hi = self.domain
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise InputError(f"domain must be a finite interval, got {self.domain}")


@dataclass(frozen=True)
class EigenBranch:
    """Samples of one eigenvalue branch E_n(z) with its eigenvectors."""

    index: int
    zs: np.ndarray
    values: np.ndarray
    vectors: np.ndarray  # shape (dim, len(zs)), phase-aligned along the branch
    min_overlap: float   # continuity certificate over consecutive samples


@dataclass(frozen=True)
class FixedPointSolution:
    """One solution of H(E) phi = E phi with multi-index alpha = (n, i)."""

    alpha: tuple[int, int]
    energy: float
    eigenvector: np.ndarray
    residual: float
    at_boundary: bool = False


def canonical_phase(v):
    """Rescale v to unit norm with its first significant component real
    positive, so repeated runs produce identical vectors."""
    v = np.asarray(v)
    nrm = np.linalg.norm(v)
    if nrm == 0.0:
        raise NumericError("cannot normalise a zero vector")
    v = v / nrm
    idx = np.argmax(np.abs(v) > 1e-12)
    pivot = v[idx]
    if np.iscomplexobj(v):
        v = v * (np.conj(pivot) / abs(pivot))
        if np.max(np.abs(v.imag)) < 1e-14 * np.max(np.abs(v.real)):
            v = v.real.copy()
    elif pivot < 0:
        v = -v
    return v


def _check_matrix(H, dim=None):
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise InputError(f"expected a square matrix, got shape {H.shape}")
    if dim is not None and H.shape[0] != dim:
        raise InputError(f"expected dimension {dim}, got {H.shape[0]}")
    if not np.all(np.isfinite(H)):
        raise InputError("matrix has non-finite entries")
    scale = np.linalg.norm(H)
    asym = np.linalg.norm(H - H.conj().T)
    if asym > HERMITICITY_RTOL * max(scale, 1e-300):
        raise InputError(
            f"matrix is not Hermitian: |H - H^dag| / |H| = {asym / max(scale, 1e-300):.3e}"
        )
    return H


def spectral_decompose(H):
    """Eigen-decompose a Hermitian matrix; eigenvalues ascending, columns of
    the returned matrix orthonormal."""
    H = _check_matrix(H)
    try:
        w, V = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - hard to trigger
        raise NumericError(
            f"dense eigensolver failed (cond ~ {np.linalg.cond(H):.3e}): {exc}"
        ) from exc
    return w, V


def _greedy_match(overlap, w_prev, w_next, rows, cols):
    """Greedy maximum-overlap assignment restricted to the given rows and
    columns; ties broken by nearest eigenvalue."""
    work = overlap[np.ix_(rows, cols)].copy()
    dval = np.abs(w_prev[rows][:, None] - w_next[cols][None, :])
    perm = {}
    for _ in range(len(rows)):
        best = np.max(work)
        cands = np.argwhere(work >= best - 1e-12)
        i, j = min(cands, key=lambda ij: dval[ij[0], ij[1]])
        perm[rows[i]] = cols[j]
        work[i, :] = -1.0
        work[:, j] = -1.0
    return perm


def _cluster_overlap(overlap_row, w_next, j, rtol=1e-6):
    """Projection of a previous eigenvector onto the span of the cluster of
    near-degenerate eigenvalues around column j.  Within such a cluster the
    individual eigenvectors are an arbitrary rotation and single-vector
    overlaps are meaningless; the subspace projection is the honest
    continuity measure."""
    scale = 1.0 + abs(w_next[j])
    lo = j
    while lo > 0 and w_next[lo] - w_next[lo - 1] <= rtol * scale:
        lo -= 1
    hi = j
    while hi + 1 < w_next.size and w_next[hi + 1] - w_next[hi] <= rtol * scale:
        hi += 1
    return float(np.sqrt(np.sum(overlap_row[lo : hi + 1] ** 2)))


def _match_step(V_prev, w_prev, V_next, w_next, order_next):
    """Return (perm, overlaps) mapping branch order at the previous point
    onto eigenvector columns at the next point.

    order_next maps column index -> position in ascending-eigenvalue order,
    needed for the degenerate-cluster test.
    """
    overlap = np.abs(V_prev.conj().T @ V_next)
    m = overlap.shape[0]
    j_star = np.argmax(overlap, axis=1)
    best = overlap[np.arange(m), j_star]
    # Rows with a dominant match (> 1/sqrt(2)) are forced: two rows cannot
    # both overlap one unit column that strongly.  Only the remainder needs
    # the greedy assignment.
    strong = best > 0.7071067811865476
    if np.all(strong):
        return j_star, best
    perm = np.full(m, -1)
    perm[strong] = j_star[strong]
    rows = np.flatnonzero(~strong)
    cols = np.array(sorted(set(range(m)) - set(j_star[strong].tolist())))
    assignment = _greedy_match(overlap, w_prev, w_next, rows, cols)
    for i, j in assignment.items():
        perm[i] = j
    matched = overlap[np.arange(m), perm]
    low = matched <= 0.7071067811865476
    if np.any(low):
        # credit near-degenerate clusters with their subspace projection
        sorted_w = w_next[order_next]
        inv = np.empty(m, dtype=int)
        inv[order_next] = np.arange(m)
        for i in np.flatnonzero(low):
            row_sorted = overlap[i, order_next]
            matched[i] = max(
                matched[i], _cluster_overlap(row_sorted, sorted_w, inv[perm[i]])
            )
    return perm, matched


def _scan(op, grid, overlap_threshold, gate_band=None):
    """Generate (z, values, vectors, step_overlap) in branch order along the
    grid, raising BranchRefinementError when continuity is lost.

    With a gate_band = (lo, hi), continuity is only enforced for branches
    whose values touch that window during the step: branches far away from
    it (they cannot produce fixed points there) may move by many level
    spacings per step near a resolvent pole, where no finite refinement
    would ever satisfy the strict gate.
    """
    V_prev = None
    w_prev = None
    z_prev = None
    for z in grid:
        H = _check_matrix(op.evaluate(float(z)), op.dim)
        w, V = spectral_decompose(H)
        if V_prev is None:
            step_overlap = 1.0
        else:
            # eigh returns ascending eigenvalues, so columns are already in
            # value order at this z
            perm, overlaps = _match_step(V_prev, w_prev, V, w, np.arange(op.dim))
            w = w[perm]
            V = V[:, perm]
            if gate_band is None:
                step_overlap = float(np.min(overlaps))
            else:
                lo, hi = gate_band
                relevant = (np.minimum(w_prev, w) <= hi) & (
                    np.maximum(w_prev, w) >= lo
                )
                step_overlap = (
                    float(np.min(overlaps[relevant])) if np.any(relevant) else 1.0
                )
            if step_overlap < overlap_threshold:
                raise BranchRefinementError(z_prev, z, step_overlap)
            # phase-align so consecutive overlaps are real positive
            phases = np.sum(V_prev.conj() * V, axis=0)
            phases = np.where(np.abs(phases) < 1e-300, 1.0, phases)
            V = V * (np.conj(phases) / np.abs(phases))[None, :]
        yield float(z), w, V, step_overlap
        V_prev, w_prev, z_prev = V, w, z


def _validate_grid(op, grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise InputError("grid must contain at least two points")
    if np.any(np.diff(grid) <= 0):
        raise InputError("grid must be strictly increasing")
    lo, hi = op.domain
    tol = 1e-12 * (1.0 + abs(lo) + abs(hi))
    if grid[0] < lo - tol or grid[-1] > hi + tol:
        raise InputError(
            f"grid [{grid[0]}, {grid[-1]}] exceeds operator domain [{lo}, {hi}]"
        )
    return grid


def uniform_grid(op, n_points=DEFAULT_GRID_POINTS):
    return np.linspace(op.domain[0], op.domain[1], int(n_points))


def track_branches(op, grid, overlap_threshold=DEFAULT_OVERLAP_THRESHOLD):
    """Follow all dim eigenvalue branches of the family along the grid.

    Branch identity is fixed by ascending eigenvalue order at the first grid
    point and propagated by maximum eigenvector overlap, so branches stay
    labelled through (avoided) crossings where plain value sorting would swap
    them.
    """
    grid = _validate_grid(op, grid)
    zs, vals, vecs = [], [], []
    min_overlap = 1.0
    for z, w, V, step in _scan(op, grid, overlap_threshold):
        zs.append(z)
        vals.append(w)
        vecs.append(V)
        min_overlap = min(min_overlap, step)
    zs = np.array(zs)
    vals = np.array(vals)          # (npts, dim)
    vecs = np.array(vecs)          # (npts, dim, dim)
    return [
        EigenBranch(
            index=n,
            zs=zs,
            values=vals[:, n],
            vectors=vecs[:, :, n].T,
            min_overlap=min_overlap,
        )
        for n in range(op.dim)
    ]


def _branch_gap(op, z, v_ref):
    """g(z) = E_n(z) - z for the branch whose eigenvector tracks v_ref."""
    H = _check_matrix(op.evaluate(float(z)), op.dim)
    w, V = spectral_decompose(H)
    j = int(np.argmax(np.abs(V.conj().T @ v_ref)))
    return w[j] - z, V[:, j]


def _polish_root(op, a, b, ga, gb, va, fp_tol):
    """Bisection then secant on g(z) inside a sign-change bracket."""
    v_ref = va
    zm, gm, vm = a, ga, va
    for _ in range(_MAX_BISECT):
        zm = 0.5 * (a + b)
        gm, vm = _branch_gap(op, zm, v_ref)
        v_ref = vm
        if abs(gm) <= 0.2 * fp_tol * (1.0 + abs(zm)):
            return zm, gm, vm
        if np.sign(gm) == np.sign(ga):
            a, ga = zm, gm
        else:
            b, gb = zm, gm
        if b - a <= 4 * np.finfo(float).eps * (1.0 + abs(zm)):
            break
    # secant polish on the bracket endpoints
    x0, f0, x1, f1 = a, ga, b, gb
    best_z, best_g, best_v = zm, gm, vm
    for _ in range(_MAX_SECANT):
        if f1 == f0:
            break
        x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
        if not (a <= x2 <= b):
            x2 = 0.5 * (a + b)
        g2, v2 = _branch_gap(op, x2, v_ref)
        v_ref = v2
        if abs(g2) < abs(best_g):
            best_z, best_g, best_v = x2, g2, v2
        if abs(g2) <= 0.2 * fp_tol * (1.0 + abs(x2)):
            break
        if np.sign(g2) == np.sign(ga):
            a, ga = x2, g2
        else:
            b, gb = x2, g2
        x0, f0, x1, f1 = x1, f1, x2, g2
    return best_z, best_g, best_v


def find_fixed_points(
    op,
    grid=None,
    fp_tol=DEFAULT_FP_TOL,
    n_grid=DEFAULT_GRID_POINTS,
    overlap_threshold=DEFAULT_OVERLAP_THRESHOLD,
):
    """Locate all solutions of E_n(z) = z on the grid, branch by branch.

    Every sign change of g_n(z) = E_n(z) - z between consecutive grid points
    is bracketed and polished; roots are returned sorted by branch and then
    by position, labelled alpha = (n, i).  Branches without roots contribute
    nothing (an empty result is a valid outcome, not an error).
    """
    if grid is None:
        grid = uniform_grid(op, n_grid)
    grid = _validate_grid(op, grid)
    if fp_tol <= 0:
        raise InputError("fp_tol must be positive")

    brackets = {n: [] for n in range(op.dim)}
    grid_roots = {n: [] for n in range(op.dim)}
    prev = None
    first_z, last_z = grid[0], grid[-1]
    # continuity only matters for branches that can reach the line E = z
    span = last_z - first_z
    gate_band = (first_z - span, last_z + span)
    for z, w, V, _ in _scan(op, grid, overlap_threshold, gate_band=gate_band):
        g = w - z
        atol = 0.1 * fp_tol * (1.0 + abs(z))
        on_grid = np.abs(g) <= atol
        for n in np.flatnonzero(on_grid):
            grid_roots[n].append((z, g[n], V[:, n]))
        if prev is not None:
            z0, g0, V0, on_grid0 = prev
            for n in range(op.dim):
                if g0[n] * g[n] < 0 and not on_grid0[n] and not on_grid[n]:
                    brackets[n].append((z0, z, g0[n], g[n], V0[:, n]))
        prev = (z, g, V, on_grid)

    solutions = []
    for n in range(op.dim):
        roots = []
        for z, g, v in grid_roots[n]:
            roots.append((z, g, v))
        for a, b, ga, gb, va in brackets[n]:
            roots.append(_polish_root(op, a, b, ga, gb, va, fp_tol))
        roots.sort(key=lambda t: t[0])
        # collapse duplicates straddling a shared grid point
        deduped = []
        for z, g, v in roots:
            if deduped and abs(z - deduped[-1][0]) <= 1e-9 * (1.0 + abs(z)):
                continue
            deduped.append((z, g, v))
        for i, (z, g, v) in enumerate(deduped):
            boundary = (
                abs(z - first_z) <= 1e-9 * (1.0 + abs(z))
                or abs(z - last_z) <= 1e-9 * (1.0 + abs(z))
            )
            if boundary:
                warnings.warn(
                    f"fixed point {z:.12g} of branch {n} sits on the grid boundary",
                    BoundaryRootWarning,
                    stacklevel=2,
                )
            solutions.append(
                FixedPointSolution(
                    alpha=(n, i),
                    energy=float(z),
                    eigenvector=canonical_phase(v),
                    residual=float(abs(g)),
                    at_boundary=boundary,
                )
            )
    return solutions


def pole_split(window, poles, guard):
    """Split a window into open sub-intervals avoiding guard bands around the
    poles; used for families whose branches diverge at resolvent poles."""
    lo, hi = window
    cuts = sorted(p for p in poles if lo < p < hi)
    edges = [lo]
    for p in cuts:
        edges.extend([p - guard, p + guard])
    edges.append(hi)
    intervals = []
    for a, b in zip(edges[::2], edges[1::2]):
        if b - a > 4 * guard:
            intervals.append((a, b))
    return intervals


# ---------------------------------------------------------------------------
# operator constructors and file format
# ---------------------------------------------------------------------------

def affine_operator(H0, H1, domain=(-10.0, 10.0)):
    """H(z) = H0 + z * H1 for Hermitian H0, H1."""
    H0 = _check_matrix(np.array(H0, dtype=float, copy=True))
    H1 = _check_matrix(np.array(H1, dtype=float, copy=True), H0.shape[0])

    def evaluate(z):
        return H0 + z * H1

    return ParametricOperator(dim=H0.shape[0], evaluate=evaluate, domain=tuple(domain))


def tabulated_operator(zs, matrices):
    """Entrywise linear interpolation between Hermitian matrices tabulated on
    strictly increasing z values."""
    zs = np.asarray(zs, dtype=float)
    if zs.ndim != 1 or zs.size < 2 or np.any(np.diff(zs) <= 0):
        raise InputError("tabulated z values must be strictly increasing, >= 2 points")
    mats = np.array([_check_matrix(M) for M in matrices], dtype=float)
    if mats.shape[0] != zs.size:
        raise InputError("number of matrices must match number of z values")

    def evaluate(z):
        z = float(z)
        k = int(np.clip(np.searchsorted(zs, z) - 1, 0, zs.size - 2))
        t = (z - zs[k]) / (zs[k + 1] - zs[k])
        return (1.0 - t) * mats[k] + t * mats[k + 1]

    return ParametricOperator(
        dim=mats.shape[1], evaluate=evaluate, domain=(float(zs[0]), float(zs[-1]))
    )


def operator_from_dict(doc, domain=None):
    """Build an operator from the on-disk JSON document.

    Two kinds are understood: {"kind": "table", "z": [...], "matrices":
    [[...row-major...], ...]} interpolated entrywise, and {"kind": "affine",
    "H0": [...], "H1": [...]} meaning H(z) = H0 + z * H1.
    """
    if not isinstance(doc, dict) or "kind" not in doc:
        raise InputError("operator document must be an object with a 'kind' key")
    kind = doc["kind"]
    if kind == "affine":
        try:
            H0, H1 = np.asarray(doc["H0"], float), np.asarray(doc["H1"], float)
        except (KeyError, ValueError) as exc:
            raise InputError(f"bad affine operator document: {exc}") from exc
        return affine_operator(H0, H1, domain=domain or (-10.0, 10.0))
    if kind == "table":
        try:
            zs = np.asarray(doc["z"], float)
            mats = [np.asarray(M, float) for M in doc["matrices"]]
        except (KeyError, ValueError) as exc:
            raise InputError(f"bad tabulated operator document: {exc}") from exc
        op = tabulated_operator(zs, mats)
        if domain is not None:
            lo, hi = max(domain[0], op.domain[0]), min(domain[1], op.domain[1])
            op = ParametricOperator(dim=op.dim, evaluate=op.evaluate, domain=(lo, hi))
        return op
    raise InputError(f"unknown operator kind {kind!r}")


def load_operator(path, domain=None):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"cannot parse operator file {path}: {exc}") from exc
    return operator_from_dict(doc, domain=domain)
