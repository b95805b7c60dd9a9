"""Test targets, truncation regions, and selective p-values / intervals.

A target fixes a direction eta; conditioning on the component of the data
orthogonal to eta restricts everything to the line y(z) = a + b z, and each
variant's selection event becomes a union of z-intervals read off the
solution path. The statistic's null law on that union is a truncated
normal, which yields the pivot, the p-value, and (by inversion over the
mean) the confidence interval.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import BracketFailure, EmptyRegion, RankDeficient
from .homotopy import ParamLine, SolutionPath, compute_solution_path
from .lasso import GramLassoSolver, ProblemData, least_squares_on
from .numerics import IntervalUnion, TruncatedNormal, solve_spd, truncnorm_cdf

VARIANTS = (
    "tn-a",
    "tn-as",
    "full",
    "marginal",
    "tn-l1",
    "tn-custom",
    "interaction",
)

CI_ENDPOINT_RTOL = 1e-6
_BRACKET_START_SIGMAS = 40.0
_BRACKET_CAP_SIGMAS = float(2**20)


@dataclass
class TestTarget:
    """Direction of interest plus its induced line parameterization."""

    __test__ = False  # not a pytest class, despite the name

    feature: int
    eta: np.ndarray
    variant: str
    line: ParamLine
    z_obs: float
    sigma2: float


@dataclass
class SelectiveResult:
    feature: int
    variant: str
    z_obs: float
    sigma2: float
    p_value: float
    ci: tuple[float, float] | None
    region: IntervalUnion
    segments_visited: int
    matched_segments: int
    wall_time: float = 0.0
    target: TestTarget | None = None  # carried for harnesses; not serialized
    n_hypotheses: int = 0  # selected-hypothesis count, for multiplicity


def _restricted_direction(X_cols: np.ndarray, pos: int, ridge: float = 0.0) -> np.ndarray:
    """eta = X (X'X + ridge*I)^{-1} e_pos.

    For ridge > 0 this is computed as (X X' + ridge*I)^{-1} x_pos (the
    push-through identity), which stays well-posed when the restriction is
    wider than it is tall -- the elastic-net case.
    """
    n, k = X_cols.shape
    if ridge > 0.0 and k > n:
        M = X_cols @ X_cols.T
        M[np.diag_indices_from(M)] += ridge
        return solve_spd(M, X_cols[:, pos])
    e = np.zeros(k)
    e[pos] = 1.0
    G = X_cols.T @ X_cols
    if ridge > 0.0:
        G[np.diag_indices_from(G)] += ridge
    return X_cols @ solve_spd(G, e)


def make_target(
    variant: str,
    j: int,
    *,
    X,
    y_obs,
    sigma,
    A_obs=None,
    H_obs=None,
    X_inter=None,
    delta: float = 0.0,
    zmin_sigmas: float = 20.0,
    window: tuple[float, float] | None = None,
) -> TestTarget:
    """Build eta for the requested variant and derive (a, b, z_obs, sigma2).

    Under the elastic net (delta > 0) the tn-a/tn-as direction uses the
    ridge-regularized restricted Gram, the coefficient functional of the
    restricted elastic-net refit; the plain inverse does not exist once
    the active set outgrows n.

    The default window is +-zmin_sigmas standard deviations, widened when
    necessary so that z_obs always sits at least zmin_sigmas deviations
    from both ends (strong signals otherwise push z_obs outside the traced
    range and clip its own selection event).
    """
    X = np.asarray(X, dtype=float)
    y_obs = np.asarray(y_obs, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    n, p = X.shape

    if variant in ("tn-a", "tn-as"):
        A = np.asarray(sorted(A_obs), dtype=int)
        pos = int(np.searchsorted(A, j))
        if pos >= A.size or A[pos] != j:
            raise ValueError(f"feature {j} not in the observed active set")
        eta = _restricted_direction(X[:, A], pos, ridge=n * delta)
    elif variant == "full":
        if p > n:
            raise RankDeficient("full target needs p <= n")
        eta = _restricted_direction(X, j)
    elif variant == "marginal":
        xj = X[:, j]
        eta = xj / float(xj @ xj)
    elif variant in ("tn-l1", "tn-custom"):
        members = sorted(set(H_obs) | {j})
        M = np.asarray(members, dtype=int)
        eta = _restricted_direction(X[:, M], members.index(j))
    elif variant == "interaction":
        Xi = np.asarray(X_inter, dtype=float)
        if Xi.shape[1] > n:
            raise RankDeficient("interaction target needs d <= n")
        eta = _restricted_direction(Xi, j)
    else:
        raise ValueError(f"unknown variant {variant!r}")

    sig_eta = sigma @ eta
    sigma2 = float(eta @ sig_eta)
    if not sigma2 > 0.0:
        raise ValueError("test direction has zero variance under sigma")
    z_obs = float(eta @ y_obs)
    b = sig_eta / sigma2
    a = y_obs - b * z_obs
    if window is None:
        half = zmin_sigmas * math.sqrt(sigma2)
        window = (min(-half, z_obs - half), max(half, z_obs + half))
    line = ParamLine(a, b, window[0], window[1])
    return TestTarget(int(j), eta, variant, line, z_obs, sigma2)


def build_interactions(X, A_obs):
    """Elementwise products X_i * X_j over i < j in the active set."""
    A = sorted(int(v) for v in A_obs)
    X = np.asarray(X, dtype=float)
    cols = []
    pairs = []
    for ii, i in enumerate(A):
        for jj in A[ii + 1 :]:
            cols.append(X[:, i] * X[:, jj])
            pairs.append((i, jj))
    if not cols:
        return np.zeros((X.shape[0], 0)), pairs
    return np.column_stack(cols), pairs


# ---------------------------------------------------------------------------
# Truncation regions


def matching_segments(path: SolutionPath, predicate):
    return [seg for seg in path.segments if predicate(seg)]


def _merge_or_raise(segs, what: str) -> IntervalUnion:
    if not segs:
        raise EmptyRegion(f"no path segment satisfies {what}")
    return IntervalUnion((s.z_lo, s.z_hi) for s in segs)


def region_TN_A(path: SolutionPath, A_obs) -> IntervalUnion:
    """Segments whose active set equals the observed one (signs ignored)."""
    target = frozenset(int(v) for v in A_obs)
    return _merge_or_raise(
        [s for s in path.segments if s.active_set == target], "active-set equality"
    )


def region_TN_As(path: SolutionPath, A_obs, s_obs) -> IntervalUnion:
    """Segments matching both the observed active set and signs."""
    A = np.asarray(sorted(A_obs), dtype=int)
    s = np.asarray(s_obs, dtype=float)
    segs = [
        seg
        for seg in path.segments
        if seg.active.size == A.size
        and np.array_equal(seg.active, A)
        and np.array_equal(seg.signs, s)
    ]
    return _merge_or_raise(segs, "active-set and sign equality")


def region_membership(path: SolutionPath, predicate) -> IntervalUnion:
    """Generic per-segment filter, merged into an interval union."""
    return _merge_or_raise(matching_segments(path, predicate), "the predicate")


def region_custom_cutoff(
    path: SolutionPath, X, A_obs, cutoff: float, z_obs: float
) -> IntervalUnion:
    """Active-set equality refined by the OLS-magnitude cutoff partition.

    The stable set is read off the restricted OLS fit at the observed point
    (identical to least_squares_on at y_obs, since beta_ls is affine on the
    line). Within each matching segment each cutoff condition
    |beta_ls_j(z)| >= c (stable members) or < c (the rest) is a pair of
    linear inequalities.
    """
    A = np.asarray(sorted(A_obs), dtype=int)
    target = frozenset(int(v) for v in A)
    X = np.asarray(X, dtype=float)
    Xa = X[:, A]
    M = Xa.T @ Xa
    u = solve_spd(M, Xa.T @ path.line.a)
    v = solve_spd(M, Xa.T @ path.line.b)
    beta_obs = u + v * z_obs
    stable = np.abs(beta_obs) >= cutoff

    pieces = []
    for seg in path.segments:
        if seg.active_set != target:
            continue
        feasible = IntervalUnion([(seg.z_lo, seg.z_hi)])
        for uk, vk, is_stable in zip(u, v, stable):
            band = _abs_lt(uk, vk, cutoff)
            cond = band if not is_stable else _complement(band)
            feasible = feasible.intersect(cond)
            if feasible.is_empty:
                break
        if not feasible.is_empty:
            pieces.append(feasible)
    if not pieces:
        raise EmptyRegion("no segment satisfies the cutoff partition")
    out = IntervalUnion.empty()
    for piece in pieces:
        out = out.union(piece)
    return out


def _abs_lt(const: float, slope: float, c: float) -> IntervalUnion:
    """{z : |const + slope*z| < c} as an interval union."""
    if c <= 0.0:
        return IntervalUnion.empty()
    if slope == 0.0:
        return IntervalUnion.full() if abs(const) < c else IntervalUnion.empty()
    lo = (-c - const) / slope
    hi = (c - const) / slope
    if lo > hi:
        lo, hi = hi, lo
    return IntervalUnion([(lo, hi)])


def _complement(u: IntervalUnion) -> IntervalUnion:
    pieces = []
    prev = -np.inf
    for lo, hi in u:
        if lo > prev:
            pieces.append((prev, lo))
        prev = hi
    if prev < np.inf:
        pieces.append((prev, np.inf))
    return IntervalUnion(pieces)


# ---------------------------------------------------------------------------
# Pivot, p-value, confidence interval


def selective_p_value(target: TestTarget, region: IntervalUnion) -> float:
    """Two-sided selective p-value from the truncated-normal null pivot."""
    F = truncnorm_cdf(TruncatedNormal(0.0, target.sigma2, region), target.z_obs)
    pi = 1.0 - F
    return 2.0 * min(pi, 1.0 - pi)


def _invert_pivot(pivot, q: float, z_obs: float, sd: float) -> float:
    """Solve pivot(mu) = q for the mean; pivot is nonincreasing in mu."""
    off = _BRACKET_START_SIGMAS * sd
    lo = z_obs - off
    while pivot(lo) < q:
        off *= 2.0
        if off > _BRACKET_CAP_SIGMAS * sd:
            raise BracketFailure(f"no lower bracket for quantile {q}")
        lo = z_obs - off
    off = _BRACKET_START_SIGMAS * sd
    hi = z_obs + off
    while pivot(hi) > q:
        off *= 2.0
        if off > _BRACKET_CAP_SIGMAS * sd:
            raise BracketFailure(f"no upper bracket for quantile {q}")
        hi = z_obs + off
    tol = CI_ENDPOINT_RTOL * sd
    mid = 0.5 * (lo + hi)
    for _ in range(200):
        val = pivot(mid)
        if hi - lo <= tol and abs(val - q) <= 2e-7:
            break
        if val >= q:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * sd:
            break
        mid = 0.5 * (lo + hi)
    return mid


def selective_ci(
    target: TestTarget, region: IntervalUnion, alpha: float
) -> tuple[float, float]:
    """Invert the pivot in its mean to a (1 - alpha) interval for eta'mu."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    sd = math.sqrt(target.sigma2)
    z_obs = target.z_obs

    def pivot(mu):
        return truncnorm_cdf(TruncatedNormal(mu, target.sigma2, region), z_obs)

    lo = _invert_pivot(pivot, 1.0 - alpha / 2.0, z_obs, sd)
    hi = _invert_pivot(pivot, alpha / 2.0, z_obs, sd)
    return lo, hi


# ---------------------------------------------------------------------------
# Per-feature orchestration


@dataclass
class InferenceOptions:
    """Knobs shared by every variant; variant-specific ones are optional."""

    zmin_sigmas: float = 20.0
    compute_ci: bool = True
    alpha: float = 0.05
    cutoff: float | None = None  # tn-custom stable threshold
    lambda_stable: float | None = None  # tn-l1 larger penalty
    cv: object | None = None  # cv.CvConfig for the validation event
    threads: int = 1
    features: tuple | None = None  # restrict testing to these positions
    # (positions index into the tested list; diagnostic use, e.g. timing
    # a handful of features of a large active set)
    feature_ids: tuple | None = None  # restrict testing to these features
    # (by column index; hypotheses not computed still count toward any
    # multiplicity correction the caller applies)


def run_inference(
    data: ProblemData,
    variant: str = "tn-a",
    alpha: float = 0.05,
    options: InferenceOptions | None = None,
    failures: list | None = None,
) -> list[SelectiveResult]:
    """Full pipeline: select at y_obs, then test each selected feature.

    Per-feature errors are collected (into ``failures`` when given, else
    re-raised only if every feature failed) so one bad feature does not
    abort its siblings. Results are ordered by feature index regardless of
    worker scheduling.
    """
    opts = options or InferenceOptions()
    alpha = alpha if alpha is not None else opts.alpha
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")

    X, y, sigma = data.X, data.y, data.sigma
    lam, delta = data.lam, data.delta

    cv_config = opts.cv
    if cv_config is not None:
        from . import cv as _cv

        lam = _cv.select_lambda(X, y, cv_config)
        if cv_config.lambda_obs is not None and lam != cv_config.lambda_obs:
            from .errors import SelectionMismatch

            raise SelectionMismatch(
                f"configured lambda_obs={cv_config.lambda_obs} but selection at "
                f"y_obs gives {lam}"
            )

    # wide designs run the solver in residual mode, where the p x p Gram
    # is never touched; only build it when the Gram-mode solvers share it
    gram = X.T @ X if X.shape[1] <= 2 * X.shape[0] else None
    solver = GramLassoSolver(X, lam, delta, gram=gram)
    base = solver.solve(y)
    A_obs = base.active
    s_obs = base.signs_active
    if A_obs.size == 0:
        return []

    H_obs = None
    X_inter = None
    gram_inter = None
    tested = [int(j) for j in A_obs]
    if variant == "tn-l1":
        if opts.lambda_stable is None:
            raise ValueError("tn-l1 needs options.lambda_stable")
        stable_sol = GramLassoSolver(X, opts.lambda_stable, delta, gram=gram).solve(y)
        H_obs = frozenset(stable_sol.active.tolist())
    elif variant == "tn-custom":
        if opts.cutoff is None:
            raise ValueError("tn-custom needs options.cutoff")
        beta_ls = least_squares_on(A_obs, X, y)
        H_obs = frozenset(
            int(j) for j, b in zip(A_obs, beta_ls) if abs(b) >= opts.cutoff
        )
    elif variant == "interaction":
        X_inter, _ = build_interactions(X, A_obs)
        if X_inter.shape[1] == 0:
            return []
        gram_inter = X_inter.T @ X_inter
        inter_sol = GramLassoSolver(X_inter, lam, delta, gram=gram_inter).solve(y)
        if inter_sol.active.size == 0:
            return []
        tested = [int(j) for j in inter_sol.active]

    n_hypotheses = len(tested)
    if opts.features is not None:
        tested = [tested[i] for i in opts.features if i < len(tested)]
    if opts.feature_ids is not None:
        wanted = set(opts.feature_ids)
        tested = [j for j in tested if j in wanted]

    def infer_one(j: int) -> SelectiveResult:
        t0 = time.perf_counter()
        target = make_target(
            variant,
            j,
            X=X,
            y_obs=y,
            sigma=sigma,
            A_obs=A_obs,
            H_obs=H_obs,
            X_inter=X_inter,
            delta=delta,
            zmin_sigmas=opts.zmin_sigmas,
        )
        region, visited, matched = _variant_region(
            variant, target, X, lam, delta, gram,
            A_obs, s_obs, H_obs, X_inter, gram_inter, opts,
        )
        if not region.contains(target.z_obs, atol=1e-7 * (1.0 + abs(target.z_obs))):
            raise EmptyRegion(
                f"observed statistic {target.z_obs:.6g} outside its own region "
                f"{region!r} (solver/path inconsistency)"
            )
        p = selective_p_value(target, region)
        ci = selective_ci(target, region, alpha) if opts.compute_ci else None
        return SelectiveResult(
            feature=j,
            variant=variant,
            z_obs=target.z_obs,
            sigma2=target.sigma2,
            p_value=p,
            ci=ci,
            region=region,
            segments_visited=visited,
            matched_segments=matched,
            wall_time=time.perf_counter() - t0,
            target=target,
            n_hypotheses=n_hypotheses,
        )

    def guarded(j: int):
        try:
            return infer_one(j)
        except Exception as exc:  # noqa: BLE001 - aggregated per spec
            return (j, exc)

    if opts.threads > 1:
        with ThreadPoolExecutor(max_workers=opts.threads) as pool:
            raw = list(pool.map(guarded, tested))
    else:
        raw = [guarded(j) for j in tested]

    results = [r for r in raw if isinstance(r, SelectiveResult)]
    errs = [r for r in raw if not isinstance(r, SelectiveResult)]
    if failures is not None:
        failures.extend(errs)
    elif errs and not results:
        raise errs[0][1]
    return results


def _variant_region(
    variant, target, X, lam, delta, gram,
    A_obs, s_obs, H_obs, X_inter, gram_inter, opts,
):
    """Trace the variant's path(s) and assemble its truncation region.

    Returns (region, segments_visited, matched_segments); matched counts
    pre-merge segments satisfying the variant's conditioning predicate on
    the tested path.
    """
    j = target.feature
    if variant == "interaction":
        path_inter = compute_solution_path(
            X_inter, lam, delta, target.line, gram=gram_inter
        )
        member = matching_segments(path_inter, lambda s: j in s.active_set)
        region = _merge_or_raise(member, "interaction membership")
        path_x = compute_solution_path(X, lam, delta, target.line, gram=gram)
        region = region.intersect(region_TN_A(path_x, A_obs))
        return region, len(path_inter) + len(path_x), len(member)

    path = compute_solution_path(X, lam, delta, target.line, gram=gram)
    visited = len(path)

    if variant == "tn-a":
        member = matching_segments(path, lambda s: s.active_set == frozenset(int(v) for v in A_obs))
        region = _merge_or_raise(member, "active-set equality")
    elif variant == "tn-as":
        region = region_TN_As(path, A_obs, s_obs)
        member = matching_segments(
            path, lambda s: s.active_set == frozenset(int(v) for v in A_obs)
        )
    elif variant in ("full", "marginal"):
        member = matching_segments(path, lambda s: j in s.active_set)
        region = _merge_or_raise(member, "membership")
    elif variant == "tn-l1":
        member = matching_segments(path, lambda s: j in s.active_set)
        region = _merge_or_raise(member, "membership")
        path_h = compute_solution_path(
            X, opts.lambda_stable, delta, target.line, gram=gram
        )
        region = region.intersect(region_membership(path_h, lambda s: s.active_set == H_obs))
        visited += len(path_h)
    elif variant == "tn-custom":
        region = region_custom_cutoff(path, X, A_obs, opts.cutoff, target.z_obs)
        member = matching_segments(
            path, lambda s: s.active_set == frozenset(int(v) for v in A_obs)
        )
    else:
        raise ValueError(variant)

    if opts.cv is not None:
        from . import cv as _cv

        z2 = _cv.cv_truncation_region(X, target.line, opts.cv, lam_obs=lam)
        region = region.intersect(z2)
        if region.is_empty:
            raise EmptyRegion("CV event removed the whole region")
    return region, visited, len(member)


# ---------------------------------------------------------------------------
# Result emission

_CSV_FIELDS = (
    "feature",
    "variant",
    "z_obs",
    "sigma2",
    "p_value",
    "ci_lo",
    "ci_hi",
    "region",
    "matched_segments",
    "segments_visited",
    "wall_time",
)


def result_record(r: SelectiveResult) -> dict:
    return {
        "feature": r.feature,
        "variant": r.variant,
        "z_obs": r.z_obs,
        "sigma2": r.sigma2,
        "p_value": r.p_value,
        "ci_lo": r.ci[0] if r.ci else "",
        "ci_hi": r.ci[1] if r.ci else "",
        "region": json.dumps([[lo, hi] for lo, hi in r.region]),
        "matched_segments": r.matched_segments,
        "segments_visited": r.segments_visited,
        "wall_time": r.wall_time,
    }


def results_to_csv(results, fp) -> None:
    writer = csv.DictWriter(fp, fieldnames=_CSV_FIELDS)
    writer.writeheader()
    for r in results:
        writer.writerow(result_record(r))


def results_to_json(results, fp) -> None:
    json.dump([result_record(r) for r in results], fp, indent=2)
    fp.write("\n")
