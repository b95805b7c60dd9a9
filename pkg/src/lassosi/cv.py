"""Characterization of validation/CV tuning-parameter selection events.

Along the response line, each candidate penalty's validation error is a
piecewise quadratic in z (the trained coefficients are piecewise affine and
the validation residual is affine on each training-path segment). The
selection event "lambda_obs wins" is where its curve is the running
minimum, found by root-solving quadratic differences piece by piece.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyRegion, SelectionMismatch
from .homotopy import ParamLine, compute_solution_path
from .lasso import GramLassoSolver
from .numerics import IntervalUnion

#: Degeneracy-ladder threshold on quadratic-difference coefficients,
#: relative to the magnitude of the curves being compared.
COEF_TOL = 1e-12


@dataclass
class PiecewiseQuadratic:
    """E(z) = q2*z^2 + q1*z + q0 per interval of ``breakpoints``."""

    breakpoints: np.ndarray  # length k+1, ascending
    coeffs: np.ndarray  # (k, 3) rows of (q2, q1, q0)

    def piece_index(self, z: float) -> int:
        k = int(np.searchsorted(self.breakpoints, z, side="right")) - 1
        return min(max(k, 0), self.coeffs.shape[0] - 1)

    def __call__(self, z: float) -> float:
        q2, q1, q0 = self.coeffs[self.piece_index(z)]
        return (q2 * z + q1) * z + q0

    def __add__(self, other: "PiecewiseQuadratic") -> "PiecewiseQuadratic":
        bps = _overlay(self.breakpoints, other.breakpoints)
        coeffs = np.empty((bps.size - 1, 3))
        for i in range(bps.size - 1):
            mid = 0.5 * (bps[i] + bps[i + 1])
            coeffs[i] = (
                self.coeffs[self.piece_index(mid)] + other.coeffs[other.piece_index(mid)]
            )
        return PiecewiseQuadratic(bps, coeffs)

    def max_relative_jump(self) -> float:
        """Largest discontinuity across interior breakpoints, relative."""
        worst = 0.0
        for i in range(1, self.breakpoints.size - 1):
            b = self.breakpoints[i]
            q2, q1, q0 = self.coeffs[i - 1]
            left = (q2 * b + q1) * b + q0
            q2, q1, q0 = self.coeffs[i]
            right = (q2 * b + q1) * b + q0
            worst = max(worst, abs(left - right) / (1.0 + abs(left)))
        return worst


def _overlay(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    merged = np.union1d(a, b)
    keep = np.concatenate(([True], np.diff(merged) > 1e-12))
    return merged[keep]


@dataclass
class CvConfig:
    """Penalty grid plus the data split used for validation scoring.

    ``folds`` is either an integer K (contiguous K-fold partition of the
    row indices) or an explicit sequence of (train_indices, val_indices)
    pairs; a plain train/validation split is a single pair.
    """

    lambda_grid: tuple
    folds: object = 2
    lambda_obs: float | None = None

    def __post_init__(self):
        self.lambda_grid = tuple(float(v) for v in self.lambda_grid)
        if not self.lambda_grid:
            raise ValueError("lambda_grid must be nonempty")
        if self.lambda_obs is not None and self.lambda_obs not in self.lambda_grid:
            raise ValueError("lambda_obs must be a member of lambda_grid")

    def fold_pairs(self, n: int):
        if isinstance(self.folds, int):
            idx = np.arange(n)
            bounds = np.linspace(0, n, self.folds + 1).astype(int)
            pairs = []
            for k in range(self.folds):
                val = idx[bounds[k] : bounds[k + 1]]
                train = np.concatenate([idx[: bounds[k]], idx[bounds[k + 1] :]])
                pairs.append((train, val))
            return pairs
        return [
            (np.asarray(tr, dtype=int), np.asarray(va, dtype=int))
            for tr, va in self.folds
        ]


def validation_error_curve(
    X, line: ParamLine, lam: float, train, val, delta: float = 0.0, gram_train=None
) -> PiecewiseQuadratic:
    """Half squared validation error of the penalty-lam fit, as a function
    of z, from the training path on the row-restricted line."""
    X = np.asarray(X, dtype=float)
    train = np.asarray(train, dtype=int)
    val = np.asarray(val, dtype=int)
    if np.intersect1d(train, val).size:
        raise ValueError("train and validation rows must be disjoint")
    X_tr, X_val = X[train], X[val]
    line_tr = ParamLine(line.a[train], line.b[train], line.z_min, line.z_max)
    a_val, b_val = line.a[val], line.b[val]

    path = compute_solution_path(X_tr, lam, delta, line_tr, gram=gram_train)
    coeffs = np.empty((len(path.segments), 3))
    for i, seg in enumerate(path.segments):
        Xv = X_val[:, seg.active]
        u = a_val - Xv @ (seg.beta_at_lo - seg.psi * seg.z_lo)
        v = b_val - Xv @ seg.psi
        coeffs[i] = (0.5 * float(v @ v), float(u @ v), 0.5 * float(u @ u))
    return PiecewiseQuadratic(path.transition_points, coeffs)


def _quad_nonpos(d2, d1, d0, lo, hi, tol, prefer_obs):
    """{z in [lo, hi] : d2 z^2 + d1 z + d0 <= 0} with a degeneracy ladder.

    An identically-zero difference is an exact tie; the smallest-lambda
    rule then keeps or drops the whole piece via ``prefer_obs``.
    """
    if abs(d2) <= tol:
        if abs(d1) <= tol:
            if abs(d0) <= tol:
                return [(lo, hi)] if prefer_obs else []
            return [(lo, hi)] if d0 < 0.0 else []
        r = -d0 / d1
        piece = (lo, min(hi, r)) if d1 > 0.0 else (max(lo, r), hi)
        return [piece] if piece[1] > piece[0] else []
    disc = d1 * d1 - 4.0 * d2 * d0
    if disc <= 0.0:
        return [] if d2 > 0.0 else [(lo, hi)]
    sq = math.sqrt(disc)
    qq = -0.5 * (d1 + math.copysign(sq, d1))
    r1 = qq / d2
    r2 = d0 / qq if qq != 0.0 else r1
    r_lo, r_hi = (r1, r2) if r1 <= r2 else (r2, r1)
    if d2 > 0.0:
        piece = (max(lo, r_lo), min(hi, r_hi))
        return [piece] if piece[1] > piece[0] else []
    out = []
    if r_lo > lo:
        out.append((lo, min(hi, r_lo)))
    if r_hi < hi:
        out.append((max(lo, r_hi), hi))
    return [p for p in out if p[1] > p[0]]


def _dominance_region(
    E_obs: PiecewiseQuadratic, E_cmp: PiecewiseQuadratic, prefer_obs: bool
) -> IntervalUnion:
    bps = _overlay(E_obs.breakpoints, E_cmp.breakpoints)
    pieces = []
    for i in range(bps.size - 1):
        lo, hi = float(bps[i]), float(bps[i + 1])
        mid = 0.5 * (lo + hi)
        co = E_obs.coeffs[E_obs.piece_index(mid)]
        cc = E_cmp.coeffs[E_cmp.piece_index(mid)]
        d2, d1, d0 = co - cc
        tol = COEF_TOL * max(1.0, float(np.max(np.abs(co))), float(np.max(np.abs(cc))))
        pieces.extend(_quad_nonpos(d2, d1, d0, lo, hi, tol, prefer_obs))
    return IntervalUnion(pieces)


def argmin_region(curves: dict, lambda_obs: float) -> IntervalUnion:
    """Sub-window where the lambda_obs curve is the minimum of the family.

    Ties go to the smallest lambda: against smaller competitors the
    observed curve must win strictly, against larger ones weakly. The
    distinction only matters on whole tied pieces; isolated crossing points
    carry no mass and are kept closed.
    """
    window = curves[lambda_obs].breakpoints
    region = IntervalUnion([(float(window[0]), float(window[-1]))])
    for lam, curve in sorted(curves.items()):
        if lam == lambda_obs:
            continue
        region = region.intersect(
            _dominance_region(curves[lambda_obs], curve, prefer_obs=lambda_obs < lam)
        )
        if region.is_empty:
            break
    if region.is_empty:
        raise EmptyRegion("no z keeps the observed lambda optimal")
    return region


def validation_errors_at(X, y, config: CvConfig):
    """Direct validation scores of every grid lambda at the observed data."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    pairs = config.fold_pairs(X.shape[0])
    errors = {}
    for lam in config.lambda_grid:
        total = 0.0
        for train, val in pairs:
            sol = GramLassoSolver(X[train], lam).solve(y[train])
            resid = y[val] - X[val] @ sol.beta
            total += 0.5 * float(resid @ resid)
        errors[lam] = total
    return errors


def select_lambda(X, y, config: CvConfig) -> float:
    """Run the selection rule at the observed data (smallest-lambda ties)."""
    errors = validation_errors_at(X, y, config)
    best = None
    for lam in sorted(config.lambda_grid):
        if best is None or errors[lam] < errors[best]:
            best = lam
    return best


def cv_truncation_region(
    X, line: ParamLine, config: CvConfig, lam_obs: float
) -> IntervalUnion:
    """The z-region where the validation rule still selects lam_obs.

    K-fold curves are summed fold-wise on the common breakpoint overlay
    before the argmin comparison.
    """
    X = np.asarray(X, dtype=float)
    pairs = config.fold_pairs(X.shape[0])
    grams = [X[train].T @ X[train] for train, _ in pairs]
    curves = {}
    for lam in config.lambda_grid:
        total = None
        for (train, val), gram in zip(pairs, grams):
            c = validation_error_curve(X, line, lam, train, val, gram_train=gram)
            total = c if total is None else total + c
        curves[lam] = total
    return argmin_region(curves, lam_obs)


def region_with_cv(data, target, config: CvConfig) -> IntervalUnion:
    """Intersect the active-set equality region at the selected lambda with
    the validation selection-event region."""
    from .inference import region_TN_A  # deferred: avoids an import cycle

    lam_obs = select_lambda(data.X, data.y, config)
    if config.lambda_obs is not None and lam_obs != config.lambda_obs:
        raise SelectionMismatch(
            f"configured lambda_obs={config.lambda_obs} but selection at y_obs "
            f"gives {lam_obs}"
        )
    sol = GramLassoSolver(data.X, lam_obs, data.delta).solve(data.y)
    path = compute_solution_path(data.X, lam_obs, data.delta, target.line)
    z1 = region_TN_A(path, sol.active)
    z2 = cv_truncation_region(data.X, target.line, config, lam_obs)
    region = z1.intersect(z2)
    if region.is_empty:
        raise EmptyRegion("CV event removed the active-set region")
    return region
