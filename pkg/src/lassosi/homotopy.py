"""Exact piecewise-linear solution path along a response line y(z) = a + b z.

Between transition points the active set and signs are constant and both
the active coefficients and the scaled inactive subgradients are affine in
z; tracing jumps from breakpoint to breakpoint instead of sampling z.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import StalledPath
from .lasso import GramLassoSolver, LassoSolution
from .numerics import solve_spd

#: Offset past a breakpoint at which the next segment's solve lands. At the
#: breakpoint itself a coordinate sits exactly at zero or at |s| = 1 and the
#: active set is ambiguous; the nudge puts the solve strictly inside the
#: next segment. Recorded breakpoints are the un-nudged values.
NUDGE = 1e-9

#: When an event's coordinate moves off its boundary very slowly, the base
#: nudge leaves it within solver resolution of the boundary and the re-solve
#: can miss the transition; the nudge then escalates by this factor, capped
#: at NUDGE_CAP (kept at the breakpoint-localization tolerance so a deeper
#: solve point never misplaces a recorded transition beyond it).
NUDGE_GROWTH = 10.0
NUDGE_CAP = 1e-6

#: Two consecutive steps shorter than this raise StalledPath: under the
#: general-position assumption ties are excluded, so persistent zero steps
#: mean numerically degenerate input.
MIN_STEP = 1e-8

#: Step candidates within this window of the minimum count as simultaneous.
EVENT_TIE_TOL = 1e-10

#: Gram products are refreshed from scratch this often to stop drift.
_G_REFRESH_PERIOD = 64


@dataclass
class ParamLine:
    """The response line y(z) = a + b z and the traced window."""

    a: np.ndarray
    b: np.ndarray
    z_min: float
    z_max: float

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.a.shape != self.b.shape or self.a.ndim != 1:
            raise ValueError("a and b must be 1-d vectors of equal length")
        if not self.z_min < self.z_max:
            raise ValueError(f"need z_min < z_max, got [{self.z_min}, {self.z_max}]")

    def y_at(self, z: float) -> np.ndarray:
        return self.a + self.b * z

    def reversed(self) -> "ParamLine":
        """The same line traced in the opposite direction over [0, width]."""
        return ParamLine(
            self.a + self.b * self.z_max, -self.b, 0.0, self.z_max - self.z_min
        )


@dataclass(frozen=True)
class PathEvent:
    kind: str  # "activation" | "deactivation" | "window-end"
    coordinate: int | None = None


@dataclass
class PathSegment:
    """One maximal interval [z_lo, z_hi) of constant active set and signs.

    On the segment, beta_active(z) = beta_at_lo + psi*(z - z_lo) and
    lam*s_inactive(z) = lam*subgrad_at_lo + gamma*(z - z_lo).
    """

    z_lo: float
    z_hi: float
    active: np.ndarray
    signs: np.ndarray
    beta_at_lo: np.ndarray
    psi: np.ndarray
    subgrad_at_lo: np.ndarray
    gamma: np.ndarray
    event: PathEvent
    active_set: frozenset = field(init=False, repr=False)

    def __post_init__(self):
        self.active_set = frozenset(int(j) for j in self.active)

    def beta_active_at(self, z: float) -> np.ndarray:
        return self.beta_at_lo + self.psi * (z - self.z_lo)

    def beta_full_at(self, z: float, p: int) -> np.ndarray:
        beta = np.zeros(p)
        beta[self.active] = self.beta_active_at(z)
        return beta

    def signs_key(self) -> tuple:
        return tuple(zip(self.active.tolist(), self.signs.tolist()))


@dataclass
class SolutionPath:
    """Ordered segments tiling [z_min, z_max) plus the transition points."""

    segments: list[PathSegment]
    transition_points: np.ndarray
    line: ParamLine
    lam: float
    delta: float

    def segment_containing(self, z: float) -> PathSegment:
        for seg in self.segments:
            if seg.z_lo <= z < seg.z_hi:
                return seg
        if z == self.segments[-1].z_hi:
            return self.segments[-1]
        raise ValueError(f"z={z} outside traced window")

    def __len__(self):
        return len(self.segments)


def segment_coefficients(
    active, X, line: ParamLine, delta: float, *, gram=None, xtb=None,
    with_design_product=False, factor_provider=None,
):
    """Per-segment slopes: psi for active coefficients, gamma for the
    scaled inactive subgradients.

    psi = (X_A' X_A + n*delta*I)^{-1} X_A' b ; gamma = kappa * X_Ac' (b - X_A psi)
    with kappa = 1 for the Lasso scaling and 1/n for the elastic net.
    For delta > 0 and |A| > n the inverse is applied through the identity
    (X_A' X_A + c I)^{-1} X_A' = X_A' (X_A X_A' + c I)^{-1}, keeping the
    factorization at size n.

    ``xtb`` optionally carries a precomputed X'b; with
    ``with_design_product`` the full vector X'X_A psi is returned as well
    (the tracer reuses it as its Gram-product update direction).
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    active = np.asarray(active, dtype=int)
    b = line.b
    kappa = 1.0 if delta == 0.0 else 1.0 / n
    if xtb is None:
        xtb = X.T @ b

    if active.size == 0:
        out = np.zeros(0), kappa * xtb.copy()
        return (*out, np.zeros(p), np.zeros(n)) if with_design_product else out

    Xa = X[:, active]
    if factor_provider is not None:
        fac = factor_provider(active, Xa)
        if delta > 0.0 and active.size > n:
            psi = Xa.T @ fac.solve(b)
        else:
            psi = fac.solve(xtb[active])
    elif delta > 0.0 and active.size > n:
        M = Xa @ Xa.T
        M[np.diag_indices_from(M)] += n * delta
        psi = Xa.T @ solve_spd(M, b)
    else:
        if gram is not None:
            G = gram[np.ix_(active, active)].copy()
        else:
            G = Xa.T @ Xa
        if delta > 0.0:
            G[np.diag_indices_from(G)] += n * delta
        psi = solve_spd(G, xtb[active])

    fit_dir = Xa @ psi
    design_product = X.T @ fit_dir
    mask = np.ones(p, dtype=bool)
    mask[active] = False
    gamma = kappa * (xtb - design_product)[mask]
    if with_design_product:
        return psi, gamma, design_product, fit_dir
    return psi, gamma


def _step_candidates(solution: LassoSolution, psi, gamma, lam):
    """Transition step from the current point: min over sign-preservation
    roots of active coordinates and boundary crossings of inactive
    subgradients, with the (m)_++ = inf convention for m <= 0."""
    inf = np.inf
    best_t = inf
    cands = []

    beta_a = solution.beta[solution.active]
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = np.where(psi != 0.0, -beta_a / psi, inf)
    r1 = np.where(r1 > 0.0, r1, inf)
    if r1.size and np.min(r1) < best_t:
        best_t = float(np.min(r1))

    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = lam * (np.sign(gamma) - solution.subgrad_inactive) / gamma
    r2 = np.where(np.isfinite(r2) & (r2 > 0.0), r2, inf)
    if r2.size and np.min(r2) < best_t:
        best_t = float(np.min(r2))

    if not np.isfinite(best_t):
        return inf, PathEvent("window-end")

    cutoff = best_t + EVENT_TIE_TOL
    for idx in np.nonzero(r1 <= cutoff)[0]:
        cands.append((int(solution.active[idx]), "deactivation", float(r1[idx])))
    inactive = solution.inactive
    for idx in np.nonzero(r2 <= cutoff)[0]:
        cands.append((int(inactive[idx]), "activation", float(r2[idx])))
    # Simultaneous events: the fresh re-solve defines the next segment; the
    # record keeps the lexicographically smallest coordinate.
    coord, kind, _ = min(cands)
    return best_t, PathEvent(kind, coord)


def _event_took(event: PathEvent, sol: LassoSolution) -> bool:
    """Did the re-solve past the breakpoint reflect the recorded event?"""
    if event.coordinate is None:
        return True
    in_support = bool(sol.beta[event.coordinate] != 0.0)
    return in_support if event.kind == "activation" else not in_support


def compute_step_size(X, y_at_z, lam, delta, line: ParamLine, z: float, *, gram=None):
    """Solve at y(z), then return (t_z, solution, event) for the next
    transition at z + t_z."""
    solver = GramLassoSolver(X, lam, delta, gram=gram)
    sol = solver.solve(np.asarray(y_at_z, dtype=float))
    psi, gamma = segment_coefficients(sol.active, X, line, delta, gram=gram)
    t, event = _step_candidates(sol, psi, gamma, lam)
    return t, sol, event


def compute_solution_path(
    X, lam, delta, line: ParamLine, *, gram=None, kernel=None
) -> SolutionPath:
    """Trace the full path over [z_min, z_max].

    Each segment's solution comes from a fresh warm-started solve just past
    the previous breakpoint; the final segment is truncated at z_max.
    """
    X = np.ascontiguousarray(X, dtype=float)
    n, p = X.shape
    solver = GramLassoSolver(X, lam, delta, gram=gram, kernel=kernel)
    gram = solver.gram

    a, b = line.a, line.b
    ca = solver.alpha * (X.T @ a)
    cb = solver.alpha * (X.T @ b)
    aa = solver.alpha * float(a @ a)
    ab = solver.alpha * float(a @ b)
    bb = solver.alpha * float(b @ b)

    def linear_term(z):
        return ca + cb * z

    def quad_scalar(z):
        return aa + (2.0 * ab + bb * z) * z

    xtb = X.T @ b
    beta = np.zeros(p)
    sv = solver.new_state()
    z_seg = line.z_min
    z_solve = line.z_min
    solver.converge(linear_term(z_solve), quad_scalar(z_solve), beta, sv)
    sol = solver.snapshot(linear_term(z_solve), beta, sv)

    segments: list[PathSegment] = []
    breakpoints = [line.z_min]
    stall = 0

    while True:
        psi, gamma, gdir, fit_dir = segment_coefficients(
            sol.active, X, line, delta, gram=gram, xtb=xtb,
            with_design_product=True, factor_provider=solver.restricted_factor,
        )
        t, event = _step_candidates(sol, psi, gamma, lam)
        z_event = z_solve + t
        back = z_seg - z_solve  # -NUDGE except on the first segment
        beta_lo = sol.beta[sol.active] + psi * back
        sub_lo = sol.subgrad_inactive + (gamma / lam) * back if lam > 0 else sol.subgrad_inactive.copy()

        if z_event >= line.z_max or not np.isfinite(z_event):
            segments.append(
                PathSegment(
                    z_seg, line.z_max, sol.active, sol.signs_active,
                    beta_lo, psi, sub_lo, gamma, PathEvent("window-end"),
                )
            )
            breakpoints.append(line.z_max)
            break

        segments.append(
            PathSegment(
                z_seg, z_event, sol.active, sol.signs_active,
                beta_lo, psi, sub_lo, gamma, event,
            )
        )
        breakpoints.append(z_event)

        if z_event - z_seg < MIN_STEP:
            stall += 1
            if stall >= 2:
                raise StalledPath(
                    f"two consecutive steps below {MIN_STEP} near z={z_event:.9g}"
                )
        else:
            stall = 0

        if len(segments) % _G_REFRESH_PERIOD == 0:
            sv = solver.state_from(beta)
        nudge = NUDGE
        prev_active = sol.active
        prev_psi = psi
        sv_dir = gdir if solver.mode == "gram" else fit_dir
        while True:
            z_next = z_event + nudge
            dz = z_next - z_solve
            if prev_active.size:
                beta[prev_active] += prev_psi * dz
                sv += sv_dir * dz
            solver.converge(linear_term(z_next), quad_scalar(z_next), beta, sv)
            sol = solver.snapshot(linear_term(z_next), beta, sv)
            z_solve = z_next
            if _event_took(event, sol) or nudge >= NUDGE_CAP:
                break
            nudge *= NUDGE_GROWTH
        z_seg = z_event

    return SolutionPath(segments, np.asarray(breakpoints), line, lam, delta)


def dump_path_jsonl(path: SolutionPath, fp) -> None:
    """One JSON record per segment, for debugging and oracle comparison."""
    for seg in path.segments:
        fp.write(
            json.dumps(
                {
                    "z_lo": seg.z_lo,
                    "z_hi": seg.z_hi,
                    "active": seg.active.tolist(),
                    "signs": seg.signs.astype(int).tolist(),
                    "event": {"kind": seg.event.kind, "coordinate": seg.event.coordinate},
                }
            )
            + "\n"
        )
