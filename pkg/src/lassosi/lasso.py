"""Lasso and elastic-net solves at a fixed response vector.

Two objective scalings coexist, selected by ``delta``:

* ``delta == 0``:  0.5*||y - X b||^2 + lam*||b||_1
* ``delta > 0``:   (1/2n)*||y - X b||^2 + lam*||b||_1 + (delta/2)*||b||^2

Note the 1/n factor in the second form: the same numeric ``lam`` acts on a
different scale in the two problems, and all downstream path formulas are
scaling-aware.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import NoConvergence, ZeroLambda
from .numerics import solve_spd, spd_factor

#: Coefficients at or below this magnitude are treated as exactly zero.
ACTIVE_TOL = 1e-9
#: Stationarity / subgradient slack accepted in optimality certificates.
KKT_TOL = 1e-8
#: Relative duality-gap target for the coordinate-descent solver.
GAP_RTOL = 1e-10

DEFAULT_MAX_SWEEPS = 100_000


@dataclass
class ProblemData:
    """Design, response, noise covariance, and penalty weights."""

    X: np.ndarray
    y: np.ndarray
    sigma: np.ndarray
    lam: float
    delta: float = 0.0

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=float)
        self.y = np.ascontiguousarray(self.y, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        n, p = self.X.shape
        if self.y.shape != (n,):
            raise ValueError(f"y has shape {self.y.shape}, expected ({n},)")
        if self.sigma.shape != (n, n):
            raise ValueError(f"sigma has shape {self.sigma.shape}, expected ({n}, {n})")
        if not np.allclose(self.sigma, self.sigma.T, atol=1e-10):
            raise ValueError("sigma must be symmetric")
        if self.lam < 0 or self.delta < 0:
            raise ValueError("lam and delta must be nonnegative")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass
class LassoSolution:
    """Primal solution with the pieces the homotopy needs.

    ``subgrad_inactive`` holds the dual coordinates s_j for j outside the
    active set, in ascending index order of the inactive coordinates.
    """

    beta: np.ndarray
    active: np.ndarray
    signs_active: np.ndarray
    subgrad_inactive: np.ndarray

    @property
    def inactive(self) -> np.ndarray:
        mask = np.ones(self.beta.shape[0], dtype=bool)
        mask[self.active] = False
        return np.nonzero(mask)[0]


class GramLassoSolver:
    """Cyclic coordinate descent bound to a fixed design and penalty.

    Solves for arbitrary linear terms, which makes warm-started re-solves
    along a response line cheap. The quadratic form actually minimized is
        0.5*b' (alpha*G + ridge*I) b - c' b + lam_eff*||b||_1,
    with (alpha, ridge, lam_eff) = (1, 0, lam) for the Lasso scaling and
    (1/n, delta, lam) for the elastic net.

    Two state representations, selected by shape: Gram mode maintains
    ``sv = G @ beta`` (O(1) gradient reads, length-p updates), residual
    mode maintains ``sv = X @ beta`` (length-n updates, the economical
    choice for wide designs).
    """

    def __init__(self, X, lam, delta=0.0, *, gram=None, kernel=None, mode="auto"):
        self.X = np.ascontiguousarray(X, dtype=float)
        self.n, self.p = self.X.shape
        self.lam = float(lam)
        self.delta = float(delta)
        self.alpha = 1.0 if self.delta == 0.0 else 1.0 / self.n
        self.ridge = self.delta
        if mode == "auto":
            mode = "gram" if self.p <= 2 * self.n else "resid"
        self.mode = mode
        backend = kernel or _kernels.default_backend
        if mode == "gram":
            if gram is None:
                gram = self.X.T @ self.X
            self.gram = np.ascontiguousarray(gram, dtype=float)
            self._sweep_gram = backend.cd_sweep
        else:
            self.gram = None
            self.XT = np.ascontiguousarray(self.X.T)
            self.diag = np.einsum("ij,ij->j", self.X, self.X)
            self._sweep_resid = backend.cd_sweep_resid
        # restricted-system factorizations, keyed by the support bytes;
        # shared between the exact polish and the path-segment slopes
        self.factor_cache: dict = {}

    def linear_term(self, y) -> np.ndarray:
        return self.alpha * (self.X.T @ y)

    def quadratic_scalar(self, y) -> float:
        return self.alpha * float(y @ y)

    # -- state-vector primitives (sv = G beta in gram mode, X beta in resid)

    def new_state(self) -> np.ndarray:
        return np.zeros(self.p if self.mode == "gram" else self.n)

    def state_from(self, beta) -> np.ndarray:
        if self.mode == "gram":
            return self.gram @ beta
        return self.X @ beta

    def _run_sweep(self, c, beta, sv) -> float:
        if self.mode == "gram":
            return self._sweep_gram(
                self.gram, c, beta, sv, self.alpha, self.ridge, self.lam
            )
        return self._sweep_resid(
            self.XT, self.diag, c, beta, sv, self.alpha, self.ridge, self.lam
        )

    def _q(self, beta, sv) -> np.ndarray:
        """Q beta = alpha * G beta + ridge * beta from the state vector."""
        g = sv if self.mode == "gram" else self.XT @ sv
        return self.alpha * g + self.ridge * beta

    def apply_fit_diff(self, sv, Xa, diff) -> None:
        """Propagate a coefficient change supported on columns Xa."""
        if self.mode == "gram":
            sv += self.X.T @ (Xa @ diff)
        else:
            sv += Xa @ diff

    def gap(self, c, y2, beta, sv):
        """Duality gap, primal objective, and KKT residual at the iterate."""
        q = self._q(beta, sv)
        bq = float(beta @ q)
        cb = float(c @ beta)
        primal = 0.5 * y2 - cb + 0.5 * bq + self.lam * float(np.abs(beta).sum())
        grad = q - c
        grad_inf = float(np.max(np.abs(grad))) if self.p else 0.0
        theta = 1.0 if grad_inf <= self.lam or grad_inf == 0.0 else self.lam / grad_inf
        rn2 = max(y2 - 2.0 * cb + bq, 0.0)
        dual = theta * (y2 - cb) - 0.5 * theta * theta * rn2
        active = beta != 0.0
        kkt = 0.0
        if active.any():
            kkt = float(np.max(np.abs(grad[active] + self.lam * np.sign(beta[active]))))
        if not active.all():
            kkt = max(kkt, float(np.max(np.abs(grad[~active]))) - self.lam)
        return primal - dual, primal, kkt

    def restricted_factor(self, A: np.ndarray, Xa: np.ndarray):
        """Cached factorization of the support-restricted system.

        delta = 0: X_A'X_A. delta > 0: X_A'X_A + n*delta*I when |A| <= n,
        else the push-through companion X_A X_A' + n*delta*I (size n).
        """
        key = A.tobytes()
        fac = self.factor_cache.get(key)
        if fac is None:
            cc = self.n * self.ridge
            if self.ridge > 0.0 and A.size > self.n:
                M = Xa @ Xa.T
                M[np.diag_indices_from(M)] += cc
            else:
                M = Xa.T @ Xa
                if self.ridge > 0.0:
                    M[np.diag_indices_from(M)] += cc
            fac = spd_factor(M)
            if len(self.factor_cache) > 8:
                self.factor_cache.clear()
            self.factor_cache[key] = fac
        return fac

    def _polish(self, c, beta, sv, active) -> bool:
        """Exact restricted KKT solve on the current support and signs.

        On a fixed support the stationarity conditions are linear, so one
        SPD solve replaces the slow tail of coordinate descent (the major
        cost on correlated designs). Applied only when it preserves the
        assumed signs; the caller re-verifies the full KKT system either
        way. Returns False when the solve is not applicable.
        """
        A = np.nonzero(active)[0]
        if A.size == 0:
            return False
        s = np.sign(beta[A])
        rhs = c[A] - self.lam * s
        Xa = self.X[:, A]
        try:
            fac = self.restricted_factor(A, Xa)
            if self.ridge > 0.0:
                cc = self.n * self.ridge  # (alpha*G_AA + ridge I) = (X'X + cc I)/n
                if A.size > self.n:
                    nrhs = self.n * rhs
                    new = (nrhs - Xa.T @ fac.solve(Xa @ nrhs)) / cc
                else:
                    new = fac.solve(self.n * rhs)
            else:
                new = fac.solve(rhs)
        except Exception:
            return False
        if np.any(np.sign(new) != s):
            return False
        diff = new - beta[A]
        beta[A] = new
        self.apply_fit_diff(sv, Xa, diff)
        return True

    def converge(self, c, y2, beta, sv, max_sweeps=DEFAULT_MAX_SWEEPS):
        """Run sweeps in place until near-stationarity.

        Exit requires both the relative duality gap and the KKT residual
        (an order of magnitude of headroom under KKT_TOL, since path
        segments are certified at that tolerance after extrapolation).
        Once a sweep leaves the support unchanged, the restricted system
        is solved exactly instead of iterating out the slow tail.
        """
        gap = primal = np.inf
        prev_support = None
        for _ in range(max_sweeps):
            delta = self._run_sweep(c, beta, sv)
            gap, primal, kkt = self.gap(c, y2, beta, sv)
            if gap <= GAP_RTOL * (1.0 + abs(primal)) and kkt <= 0.1 * KKT_TOL:
                return
            support = beta != 0.0
            stalled = delta == 0.0
            if stalled or (
                prev_support is not None and np.array_equal(support, prev_support)
            ):
                if self._polish(c, beta, sv, support):
                    gap, primal, kkt = self.gap(c, y2, beta, sv)
                    if gap <= GAP_RTOL * (1.0 + abs(primal)) and kkt <= 0.1 * KKT_TOL:
                        return
                elif stalled:
                    break  # fixed point and the exact solve refused
            prev_support = support
        raise NoConvergence(
            f"duality gap {gap:.3e} after {max_sweeps} sweeps "
            f"(target {GAP_RTOL * (1.0 + abs(primal)):.3e})"
        )

    def snapshot(self, c, beta, sv) -> LassoSolution:
        """Freeze the iterate into a solution.

        The active set is the exact nonzero support: the soft-threshold
        update writes literal zeros, so support membership is crisp, and a
        coordinate freshly activated just past a breakpoint (magnitude ~
        nudge * slope, well under ACTIVE_TOL) must not be dropped.
        Coordinates sitting at |s_j| = 1 with a zero coefficient are
        reported inactive.
        """
        active = np.nonzero(beta)[0]
        signs = np.sign(beta[active])
        mask = np.ones(self.p, dtype=bool)
        mask[active] = False
        if self.lam > 0.0:
            q = self._q(beta, sv)
            subgrad = (c[mask] - q[mask]) / self.lam
        else:
            subgrad = np.zeros(int(mask.sum()))
        return LassoSolution(beta.copy(), active, signs, subgrad)

    def solve(self, y, beta0=None, max_sweeps=DEFAULT_MAX_SWEEPS) -> LassoSolution:
        c = self.linear_term(y)
        y2 = self.quadratic_scalar(y)
        if beta0 is None:
            beta = np.zeros(self.p)
            sv = self.new_state()
        else:
            beta = np.array(beta0, dtype=float)
            sv = self.state_from(beta)
        self.converge(c, y2, beta, sv, max_sweeps)
        return self.snapshot(c, beta, sv)


def solve_lasso(data: ProblemData) -> LassoSolution:
    """Solve the Lasso (delta = 0 scaling) at the observed response."""
    if data.lam == 0.0 and data.delta == 0.0 and data.p > data.n:
        raise ZeroLambda("lam = 0 with p > n leaves the subgradient undefined")
    return GramLassoSolver(data.X, data.lam, 0.0).solve(data.y)


def solve_elastic_net(data: ProblemData) -> LassoSolution:
    """Solve the elastic net ((1/2n)-loss scaling); requires delta > 0."""
    if not data.delta > 0.0:
        raise ValueError("solve_elastic_net requires delta > 0")
    return GramLassoSolver(data.X, data.lam, data.delta).solve(data.y)


def least_squares_on(active, X, y) -> np.ndarray:
    """OLS coefficients on the column restriction ``X[:, active]``."""
    Xa = np.asarray(X, dtype=float)[:, np.asarray(active, dtype=int)]
    return solve_spd(Xa.T @ Xa, Xa.T @ np.asarray(y, dtype=float))


def kkt_violation(X, y, lam, delta, beta) -> float:
    """Max stationarity violation of ``beta`` for the scaled objective.

    Active coordinates must satisfy grad_j + lam*sign(beta_j) = 0; inactive
    ones |grad_j| <= lam. Used as the audit point for path segments.
    """
    X = np.asarray(X, dtype=float)
    beta = np.asarray(beta, dtype=float)
    alpha = 1.0 if delta == 0.0 else 1.0 / X.shape[0]
    grad = alpha * (X.T @ (X @ beta - y)) + delta * beta
    active = np.abs(beta) > ACTIVE_TOL
    viol = 0.0
    if active.any():
        viol = float(np.max(np.abs(grad[active] + lam * np.sign(beta[active]))))
    if (~active).any():
        viol = max(viol, float(np.max(np.abs(grad[~active])) - lam))
    return viol
