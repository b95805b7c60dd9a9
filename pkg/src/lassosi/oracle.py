"""Independent brute-force verifiers used by the test suite.

Deliberately naive: a dense-grid path scanner, a sign-enumeration polytope
slicer, and an adaptive-Simpson CDF. They share nothing with the modules
they audit beyond the base solver and linear-algebra primitives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonConvergentQuadrature, TooManySigns
from .lasso import GramLassoSolver
from .numerics import IntervalUnion, TruncatedNormal, spd_factor

SIGN_ENUM_CAP = 12


@dataclass(frozen=True)
class GridPoint:
    z: float
    active: frozenset
    signs: tuple


def grid_path(X, lam, delta, line, step):
    """Active set and signs from a direct solve at every grid point."""
    if not step > 0:
        raise ValueError("step must be positive")
    X = np.ascontiguousarray(X, dtype=float)
    solver = GramLassoSolver(X, lam, delta)
    out = []
    beta0 = None
    z = line.z_min
    while z < line.z_max:
        sol = solver.solve(line.y_at(z), beta0=beta0)
        out.append(
            GridPoint(
                z,
                frozenset(sol.active.tolist()),
                tuple(zip(sol.active.tolist(), sol.signs_active.astype(int).tolist())),
            )
        )
        beta0 = sol.beta  # warm start the neighbouring solve
        z += step
    return out


def refine_breakpoint(X, lam, delta, line, z_lo, z_hi, tol=1e-8):
    """Bisect between two grid points with different active sets."""
    solver = GramLassoSolver(np.ascontiguousarray(X, dtype=float), lam, delta)
    set_lo = frozenset(solver.solve(line.y_at(z_lo)).active.tolist())
    while z_hi - z_lo > tol:
        mid = 0.5 * (z_lo + z_hi)
        if frozenset(solver.solve(line.y_at(mid)).active.tolist()) == set_lo:
            z_lo = mid
        else:
            z_hi = mid
    return 0.5 * (z_lo + z_hi)


def _slice_halflines(consts, slopes, lowers, uppers):
    """Intersect {z : lowers < consts + slopes*z < uppers} into one interval."""
    lo, hi = -np.inf, np.inf
    for c, s, lb, ub in zip(consts, slopes, lowers, uppers):
        if s > 0:
            lo = max(lo, (lb - c) / s)
            hi = min(hi, (ub - c) / s)
        elif s < 0:
            lo = max(lo, (ub - c) / s)
            hi = min(hi, (lb - c) / s)
        elif not (lb < c < ub):
            return None
    if lo >= hi:
        return None
    return (lo, hi)


def sign_enum_region(X, lam, A_obs, line, mode, s_obs=None):
    """Truncation region on the line from explicit KKT polytopes.

    ``mode='exact-A'`` unions the slices of all 2^|A| sign polytopes;
    ``mode='exact-A-and-s'`` slices only the observed-sign polytope.
    Boundaries are closed: endpoints carry no Gaussian mass.
    """
    A = np.asarray(sorted(A_obs), dtype=int)
    k = A.size
    if mode not in ("exact-A", "exact-A-and-s"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "exact-A" and k > SIGN_ENUM_CAP:
        raise TooManySigns(f"|A| = {k} exceeds cap {SIGN_ENUM_CAP}")

    X = np.asarray(X, dtype=float)
    p = X.shape[1]
    if k == 0:
        piece = _slice_halflines(
            X.T @ line.a, X.T @ line.b, [-lam] * p, [lam] * p
        )
        return IntervalUnion([] if piece is None else [piece])
    Xa = X[:, A]
    fac = spd_factor(Xa.T @ Xa)
    mask = np.ones(p, dtype=bool)
    mask[A] = False
    Xc = X[:, mask]

    ua = fac.solve(Xa.T @ line.a)
    v = fac.solve(Xa.T @ line.b)
    # inactive correlations of the residual, affine in z per sign vector
    w_a = Xc.T @ (line.a - Xa @ ua)
    q = Xc.T @ (line.b - Xa @ v)
    corr = Xc.T @ Xa  # maps the lam*M^-1 s correction into inactive scores

    if mode == "exact-A-and-s":
        sign_vectors = [np.asarray(s_obs, dtype=float)]
    else:
        sign_vectors = [
            np.array([1.0 if (i >> j) & 1 else -1.0 for j in range(k)])
            for i in range(1 << k)
        ]

    pieces = []
    for s in sign_vectors:
        shift = fac.solve(lam * s) if k else np.zeros(0)
        u_s = ua - shift
        # active coordinates keep sign s: s_j * (u_s + v z)_j > 0
        consts = list(s * u_s)
        slopes = list(s * v)
        lowers = [0.0] * k
        uppers = [np.inf] * k
        # inactive subgradients stay interior: |w + corr@shift + q z| < lam
        w_s = w_a + corr @ shift
        consts += list(w_s)
        slopes += list(q)
        lowers += [-lam] * len(w_s)
        uppers += [lam] * len(w_s)
        piece = _slice_halflines(consts, slopes, lowers, uppers)
        if piece is not None:
            pieces.append(piece)
    return IntervalUnion(pieces)


def quadrature_cdf(dist: TruncatedNormal, x, rel_tol=1e-11, max_depth=60):
    """Truncated-normal CDF by adaptive Simpson on the Gaussian density."""
    sd = math.sqrt(dist.variance)
    mean = dist.mean
    clip = 40.0 * sd

    def density(t):
        u = (t - mean) / sd
        return math.exp(-0.5 * u * u) / (sd * math.sqrt(2.0 * math.pi))

    def simpson(a, b):
        return (b - a) / 6.0 * (density(a) + 4.0 * density(0.5 * (a + b)) + density(b))

    def adaptive(a, b, whole, tol, depth):
        m = 0.5 * (a + b)
        left = simpson(a, m)
        right = simpson(m, b)
        if abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        if depth >= max_depth:
            raise NonConvergentQuadrature(f"no convergence on [{a}, {b}]")
        return adaptive(a, m, left, 0.5 * tol, depth + 1) + adaptive(
            m, b, right, 0.5 * tol, depth + 1
        )

    def integrate(a, b):
        a = max(a, mean - clip)
        b = min(b, mean + clip)
        if not b > a:
            return 0.0
        coarse = simpson(a, b)
        tol = rel_tol * max(coarse, 1e-300)
        return adaptive(a, b, coarse, tol, 0)

    total = 0.0
    below = 0.0
    for lo, hi in dist.support:
        total += integrate(lo, hi)
        if x > lo:
            below += integrate(lo, min(hi, x))
    if total <= 0.0:
        raise NonConvergentQuadrature("support mass vanished under quadrature")
    return min(1.0, below / total)
