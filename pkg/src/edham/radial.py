"""Brute-force verification engines for radial eigenproblems.

Everything here is deliberately independent of the analytic machinery it is
used to check: a three-point finite-difference eigensolver with Richardson
extrapolation, a Numerov shooting integrator, and adaptive quadrature on the
half line.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.linalg import eigh_tridiagonal, eigvalsh_tridiagonal

from .errors import InputError, NumericError, PrecisionWarning, QuadratureError

BOUNDARY_AMPLITUDE = 1e-12
_MAX_RMAX_DOUBLINGS = 3


@dataclass(frozen=True)
class RadialProblem:
    """-u'' + V(r) u = E u on (0, r_max) with Dirichlet ends.

    The potential callable must accept numpy arrays and already include the
    centrifugal term; `ell` is still carried separately because the shooting
    integrator needs the r -> 0 exponent for its series start.
    """

    potential: Callable[[np.ndarray], np.ndarray]
    r_max: float
    n_grid: int
    ell: int = 0

    def __post_init__(self):
        if self.r_max <= 0:
            raise InputError("r_max must be positive")
        if self.n_grid < 200:
            raise InputError("n_grid must be at least 200")
        if self.ell < 0:
            raise InputError("ell must be non-negative")


@dataclass(frozen=True)
class FDResult:
    energies: np.ndarray        # Richardson-extrapolated
    energies_coarse: np.ndarray
    energies_fine: np.ndarray
    error_estimate: np.ndarray  # |fine - coarse| / 3 per level
    vectors: np.ndarray         # fine-grid eigenvectors, one per column
    r: np.ndarray               # fine grid
    nodes: np.ndarray
    r_max_used: float
    warnings: tuple = field(default_factory=tuple)


def _fd_tridiag(potential, r_max, n):
    h = r_max / (n + 1)
    r = h * np.arange(1, n + 1)
    v = np.asarray(potential(r), dtype=float)
    if not np.all(np.isfinite(v)):
        raise InputError("potential is not finite on the interior grid")
    return 2.0 / h**2 + v, -np.ones(n - 1) / h**2, r


def count_nodes(u, floor=1e-6):
    """Interior sign changes of a sampled wavefunction, ignoring noise-level
    entries."""
    u = np.asarray(u)
    sig = u[np.abs(u) > floor * np.max(np.abs(u))]
    return int(np.sum(np.sign(sig[:-1]) != np.sign(sig[1:])))


def fd_spectrum(problem, k_levels, tol=None):
    """Lowest eigenvalues by paired (h, h/2) finite differences.

    The second-order three-point scheme is run on n and 2n+1 interior points
    (exactly halving the step) and combined by Richardson extrapolation; the
    returned error estimate is the extrapolation increment.  r_max doubles
    automatically while the top requested eigenvector still touches the
    outer boundary.
    """
    if k_levels < 1:
        raise InputError("k_levels must be positive")
    r_max = float(problem.r_max)
    n = int(problem.n_grid)
    notes = []
    for attempt in range(_MAX_RMAX_DOUBLINGS + 1):
        d, e, _ = _fd_tridiag(problem.potential, r_max, n)
        try:
            lam_c = eigvalsh_tridiagonal(d, e, select="i", select_range=(0, k_levels - 1))
            d, e, r = _fd_tridiag(problem.potential, r_max, 2 * n + 1)
            lam_f, vec = eigh_tridiagonal(d, e, select="i", select_range=(0, k_levels - 1))
        except np.linalg.LinAlgError as exc:  # pragma: no cover
            raise NumericError(f"tridiagonal eigensolver failed: {exc}") from exc
        amp = np.max(np.abs(vec[-1, :])) / np.max(np.abs(vec))
        if amp <= BOUNDARY_AMPLITUDE or attempt == _MAX_RMAX_DOUBLINGS:
            if amp > BOUNDARY_AMPLITUDE:
                notes.append(
                    f"boundary amplitude {amp:.2e} still above {BOUNDARY_AMPLITUDE:.0e} "
                    f"after {attempt} r_max doublings"
                )
            break
        r_max *= 2.0
        n *= 2
    energies = (4.0 * lam_f - lam_c) / 3.0
    err = np.abs(lam_f - lam_c) / 3.0
    if tol is not None and np.any(err > tol):
        notes.append(f"extrapolated error estimate {np.max(err):.2e} above requested {tol:.2e}")
    for msg in notes:
        warnings.warn(msg, PrecisionWarning, stacklevel=2)
    nodes = np.array([count_nodes(vec[:, k]) for k in range(k_levels)])
    return FDResult(
        energies=energies,
        energies_coarse=lam_c,
        energies_fine=lam_f,
        error_estimate=err,
        vectors=vec,
        r=r,
        nodes=nodes,
        r_max_used=r_max,
        warnings=tuple(notes),
    )


# ---------------------------------------------------------------------------
# Numerov shooting
# ---------------------------------------------------------------------------

def _numerov_sweep(u0, u1, g, h, idx_from, idx_to, step):
    """Advance u'' = g u with Numerov's O(h^4) scheme between grid indices,
    renormalising on overflow; returns the last three values ending at
    idx_to."""
    c = h * h / 12.0
    um, uc = u0, u1
    i = idx_from
    trail = uc
    while i != idx_to:
        j = i + step
        unew = (2.0 * uc * (1.0 + 5.0 * c * g[i]) - um * (1.0 - c * g[i - step])) / (
            1.0 - c * g[j]
        )
        um, uc = uc, unew
        if abs(uc) > 1e150:
            um *= 1e-150
            uc *= 1e-150
        i = j
    return um, uc


def shoot(problem, E):
    """Log-derivative mismatch between outward and inward Numerov solutions.

    Integrates out from the origin with the series start u ~ r^(ell+1) and in
    from r_max with a Dirichlet start; the returned normalised Wronskian at
    the potential minimum vanishes exactly when E is an eigenvalue, and
    changes sign across it.
    """
    if not np.isfinite(E):
        raise InputError("E must be finite")
    n = int(problem.n_grid)
    h = problem.r_max / (n + 1)
    r = h * np.arange(1, n + 2)  # interior points plus the boundary node
    v = np.empty(n + 1)
    v[:n] = problem.potential(r[:n])
    v[n] = v[n - 1]  # value at the Dirichlet node is never used by the sweeps
    g = v - float(E)

    i_match = int(np.argmin(v[:n]))
    i_match = min(max(i_match, max(2, n // 20)), n - 3)

    ell = problem.ell
    # first series correction from the effective Coulomb strength near 0
    f_hat = (v[0] - ell * (ell + 1) / r[0] ** 2) * r[0]
    a1 = f_hat / (2.0 * (ell + 1.0))
    u1 = r[0] ** (ell + 1) * (1.0 + a1 * r[0])
    u2 = r[1] ** (ell + 1) * (1.0 + a1 * r[1])
    scale = max(abs(u1), abs(u2))
    om, oc = _numerov_sweep(u1 / scale, u2 / scale, g, h, 1, i_match + 1, +1)

    # inward: u = 0 on the boundary node, unit value one step inside
    im, ic = _numerov_sweep(0.0, 1.0, g, h, n - 1, i_match - 1, -1)
    # sweeps end one point past the match so central derivatives line up
    u_out, du_out = om, (oc - _prev_out(om, oc, g, h, i_match)) / (2.0 * h)
    u_in, du_in = im, (_prev_in(im, ic, g, h, i_match) - ic) / (2.0 * h)

    w = du_out * u_in - du_in * u_out
    norm = np.sqrt(
        (u_out**2 + (h * du_out) ** 2) * (u_in**2 + (h * du_in) ** 2)
    )
    if norm == 0.0:
        raise NumericError("shooting solutions vanished at the matching point")
    return float(w / norm)


def _prev_out(um, uc, g, h, i):
    """One backward Numerov step to recover u at i-1 from (u_i, u_{i+1})."""
    c = h * h / 12.0
    return (2.0 * um * (1.0 + 5.0 * c * g[i]) - uc * (1.0 - c * g[i + 1])) / (
        1.0 - c * g[i - 1]
    )


def _prev_in(um, uc, g, h, i):
    """One forward Numerov step to recover u at i+1 from (u_i, u_{i-1})."""
    c = h * h / 12.0
    return (2.0 * um * (1.0 + 5.0 * c * g[i]) - uc * (1.0 - c * g[i - 1])) / (
        1.0 - c * g[i + 1]
    )


def shoot_eigenvalue(problem, e_lo, e_hi, xtol=1e-12):
    """Bracketed root of the shooting mismatch; raises if the bracket does
    not straddle an eigenvalue."""
    from scipy.optimize import brentq

    w_lo, w_hi = shoot(problem, e_lo), shoot(problem, e_hi)
    if w_lo * w_hi > 0:
        raise NumericError(
            f"shooting mismatch does not change sign on [{e_lo}, {e_hi}]"
        )
    return float(brentq(lambda E: shoot(problem, E), e_lo, e_hi, xtol=xtol))


# ---------------------------------------------------------------------------
# adaptive quadrature on [0, infinity)
# ---------------------------------------------------------------------------

def quad(integrand, tol=1e-10, r_cut=None):
    """Integrate a rapidly decaying function over (0, infinity).

    The integrand must decay at least like exp(-r^2/2) beyond r = 12; the
    truncation radius is detected from the sampled decay profile and the
    integral evaluated by adaptive Gauss-Kronrod panels with a tail
    self-check.
    """
    if tol <= 0:
        raise InputError("tol must be positive")
    probe = np.linspace(1e-6, 12.0, 481)
    vals = np.abs([integrand(x) for x in probe])
    fmax = float(np.max(vals))
    if not np.isfinite(fmax):
        raise InputError("integrand is not finite on (0, 12]")
    if fmax == 0.0:
        return 0.0
    if r_cut is None:
        r_cut = 12.0
        floor = fmax * 1e-20
        while abs(integrand(r_cut)) > floor:
            fmax = max(fmax, abs(integrand(r_cut)))
            floor = fmax * 1e-20
            r_cut += 2.0
            if r_cut > 60.0:
                raise QuadratureError(
                    "integrand has not decayed below 1e-20 of its peak by r = 60"
                )
    res = integrate.quad(
        integrand, 0.0, r_cut, epsabs=tol * fmax, epsrel=tol, limit=400, full_output=1
    )
    main, est_main, info = res[0], res[1], res[2]
    message = res[3] if len(res) > 3 else ""
    res_t = integrate.quad(
        integrand, r_cut, r_cut + 8.0, epsabs=tol * fmax, epsrel=tol,
        limit=100, full_output=1,
    )
    tail, est_tail = res_t[0], res_t[1]
    total = main + tail
    if est_main + est_tail > tol * (fmax + abs(total)):
        raise QuadratureError(
            f"quadrature error estimate {est_main + est_tail:.2e} exceeds tolerance "
            f"on [0, {r_cut}] ({info['last']} subintervals). {message}".strip()
        )
    return float(total)
