"""Desk-scale reproductions of the FPR/TPR/CI/QQ/scaling studies.

Every study is deterministic given (config, seed): each trial owns an RNG
stream spawned from (seed, trial) so results do not depend on scheduling,
and output tables avoid wall-time columns so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.stats import kstest, skewnorm

from .cv import CvConfig, cv_truncation_region, select_lambda
from .errors import LassoSIError
from .homotopy import compute_solution_path
from .inference import (
    InferenceOptions,
    SelectiveResult,
    make_target,
    region_TN_A,
    run_inference,
    selective_ci,
    selective_p_value,
)
from .lasso import GramLassoSolver, ProblemData
from .numerics import TruncatedNormal, solve_spd, std_normal_cdf, truncnorm_cdf

NOISE_FAMILIES = ("gaussian", "laplace", "skewnorm", "t")


@dataclass
class SyntheticSpec:
    """Generator for y = X beta + eps with X ~ N(0, I_p) rows."""

    n: int
    p: int
    beta: tuple = ()
    noise: str = "gaussian"
    noise_sd: float = 1.0
    skew: float = 10.0
    t_dof: int = 20
    lam: float = 1.0
    delta: float = 0.0
    trials: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.noise not in NOISE_FAMILIES:
            raise ValueError(f"noise must be one of {NOISE_FAMILIES}")
        if self.noise_sd <= 0:
            raise ValueError("noise_sd must be positive")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        self.beta = tuple(float(v) for v in self.beta)

    def beta_vector(self) -> np.ndarray:
        out = np.zeros(self.p)
        out[: len(self.beta)] = self.beta
        return out


def trial_rng(seed: int, trial: int, *extra) -> np.random.Generator:
    """Independent stream per (seed, trial[, role]); scheduling-invariant."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(trial, *extra))
    )


def sample_noise(spec: SyntheticSpec, rng, size: int) -> np.ndarray:
    """Zero-mean noise scaled to spec.noise_sd for every family."""
    sd = spec.noise_sd
    if spec.noise == "gaussian":
        return sd * rng.standard_normal(size)
    if spec.noise == "laplace":
        return rng.laplace(0.0, sd / np.sqrt(2.0), size)
    if spec.noise == "t":
        scale = sd / np.sqrt(spec.t_dof / (spec.t_dof - 2.0))
        return scale * rng.standard_t(spec.t_dof, size)
    # skew normal: analytic mean/sd of the standard form, then rescale
    raw = skewnorm.rvs(spec.skew, size=size, random_state=rng)
    d = spec.skew / np.sqrt(1.0 + spec.skew**2)
    mean = d * np.sqrt(2.0 / np.pi)
    std = np.sqrt(1.0 - 2.0 * d * d / np.pi)
    return sd * (raw - mean) / std


def generate(spec: SyntheticSpec, trial: int) -> ProblemData:
    """Deterministic instance for (spec.seed, trial)."""
    rng = trial_rng(spec.seed, trial)
    X = rng.standard_normal((spec.n, spec.p))
    eps = sample_noise(spec, rng, spec.n)
    y = X @ spec.beta_vector() + eps
    sigma = spec.noise_sd**2 * np.eye(spec.n)
    return ProblemData(X, y, sigma, spec.lam, spec.delta)


def generate_factor_design(
    n, p, n_factors, col_noise, signal, lam, delta, seed, trial=0
) -> ProblemData:
    """Correlated wide design for the timing stand-in: columns share latent
    factors, which is what lets an elastic-net active set grow into the
    hundreds the way descriptor-style data does."""
    rng = trial_rng(seed, trial)
    F = rng.standard_normal((n, n_factors))
    W = rng.standard_normal((n_factors, p))
    X = F @ W / np.sqrt(n_factors) + col_noise * rng.standard_normal((n, p))
    signal = np.asarray(signal, dtype=float)
    y = F[:, : signal.size] @ signal + rng.standard_normal(n)
    return ProblemData(X, y, np.eye(n), lam, delta)


# ---------------------------------------------------------------------------
# Method descriptors shared by the studies


def _resolve_method(method):
    """Normalize a method token: a variant string, 'ds', or a dict like
    {'name': 'cv'|'cv-over', 'lambda_grid': [...], 'folds': ...}."""
    if isinstance(method, str):
        return {"name": method}
    return dict(method)


def _bonferroni_m(results) -> int:
    """Hypothesis count for the alpha/m correction: the full selected set,
    even when only a subset of the p-values was computed."""
    return max(len(results), max(getattr(r, "n_hypotheses", 0) for r in results))


def _method_label(m: dict) -> str:
    if m["name"] in ("cv", "cv-over"):
        return f"{m['name']}[{len(m['lambda_grid'])}]"
    return m["name"]


def _cv_config(m: dict, n: int) -> CvConfig:
    folds = m.get("folds", "split")
    if folds == "split":
        half = n // 2
        folds = [(np.arange(half), np.arange(half, n))]
    return CvConfig(tuple(m["lambda_grid"]), folds)


def _run_method(
    data: ProblemData, m: dict, alpha: float, rng, compute_ci: bool,
    feature_ids=None,
):
    """One method on one dataset -> list of SelectiveResult-like records."""
    name = m["name"]
    if name == "ds":
        return data_split_inference(data, alpha, rng, compute_ci=compute_ci)
    opts = InferenceOptions(compute_ci=compute_ci, feature_ids=feature_ids)
    if name == "cv":
        opts.cv = _cv_config(m, data.n)
        return run_inference(data, "tn-a", alpha, opts)
    if name == "cv-over":
        return _cv_over_conditioned(
            data, _cv_config(m, data.n), alpha, compute_ci, feature_ids
        )
    return run_inference(data, name, alpha, opts)


@dataclass
class _SplitResult:
    feature: int
    p_value: float
    ci: tuple | None
    true_value_fn: object  # maps mu (length n) -> targeted scalar


def data_split_inference(data: ProblemData, alpha, rng, compute_ci=True):
    """Data-splitting baseline: an even random split, Lasso selection on one
    half, classical known-sigma z-tests/intervals on the other."""
    n = data.n
    perm = rng.permutation(n)
    sel, inf = perm[: n // 2], perm[n // 2 :]
    sol = GramLassoSolver(data.X[sel], data.lam, data.delta).solve(data.y[sel])
    if sol.active.size == 0:
        return []
    A = sol.active
    X2 = data.X[inf][:, A]
    S2 = data.sigma[np.ix_(inf, inf)]
    M = X2.T @ X2
    coef = solve_spd(M, X2.T @ data.y[inf])
    Minv = solve_spd(M, np.eye(A.size))
    cov = Minv @ (X2.T @ S2 @ X2) @ Minv
    proj = solve_spd(M, X2.T)  # rows: target weights on the inference half
    zcrit = 1.959963984540054
    out = []
    for pos, j in enumerate(A):
        sd = float(np.sqrt(cov[pos, pos]))
        zstat = coef[pos] / sd
        pval = float(2.0 * (1.0 - std_normal_cdf(abs(zstat))))
        ci = (coef[pos] - zcrit * sd, coef[pos] + zcrit * sd) if compute_ci else None

        def true_value(mu, _w=proj[pos], _rows=inf):
            return float(_w @ mu[_rows])

        out.append(_SplitResult(int(j), pval, ci, true_value))
    return out


def _cv_over_conditioned(
    data: ProblemData, config: CvConfig, alpha, compute_ci, feature_ids=None
):
    """Comparator conditioning on every intermediate model: intersects the
    per-lambda active-set equality regions of the whole grid with the
    validation event, mirroring all-intermediate-model conditioning."""
    lam_obs = select_lambda(data.X, data.y, config)
    gram = data.X.T @ data.X
    solver = GramLassoSolver(data.X, lam_obs, data.delta, gram=gram)
    base = solver.solve(data.y)
    if base.active.size == 0:
        return []
    grid_sets = {}
    for lam in config.lambda_grid:
        grid_sets[lam] = GramLassoSolver(data.X, lam, data.delta, gram=gram).solve(
            data.y
        ).active
    tested = [
        int(j) for j in base.active
        if feature_ids is None or int(j) in set(feature_ids)
    ]
    out = []
    for j in tested:
        target = make_target(
            "tn-a", int(j), X=data.X, y_obs=data.y, sigma=data.sigma, A_obs=base.active
        )
        region = cv_truncation_region(data.X, target.line, config, lam_obs)
        for lam in config.lambda_grid:
            path = compute_solution_path(data.X, lam, data.delta, target.line, gram=gram)
            region = region.intersect(region_TN_A(path, grid_sets[lam]))
        p = selective_p_value(target, region)
        ci = selective_ci(target, region, alpha) if compute_ci else None
        out.append(
            SelectiveResult(
                int(j), "cv-over", target.z_obs, target.sigma2, p, ci,
                region, 0, len(region), 0.0, target, base.active.size,
            )
        )
    return out


# ---------------------------------------------------------------------------
# Studies


def run_fpr_study(spec: SyntheticSpec, methods, alpha: float, ns=None):
    """Null rejection rates. Reports both the pooled per-hypothesis rate at
    level alpha (the exactly calibrated quantity) and the family-wise rate
    after Bonferroni."""
    if any(v != 0.0 for v in spec.beta):
        raise ValueError("FPR study requires beta = 0")
    ns = list(ns) if ns is not None else [spec.n]
    rows = []
    for n in ns:
        cfg = _with(spec, n=n)
        for method in methods:
            m = _resolve_method(method)
            tests = rejected = fw = sel_trials = skipped = 0
            for trial in range(spec.trials):
                data = generate(cfg, trial)
                try:
                    res = _run_method(
                        data, m, alpha, trial_rng(spec.seed, trial, 1),
                        compute_ci=False,
                    )
                except LassoSIError:
                    skipped += 1
                    continue
                if not res:
                    continue
                sel_trials += 1
                tests += len(res)
                pv = [r.p_value for r in res]
                n_hyp = _bonferroni_m(res)
                rejected += sum(p < alpha for p in pv)
                fw += any(p < alpha / n_hyp for p in pv)
            fpr = rejected / tests if tests else float("nan")
            rows.append(
                {
                    "method": _method_label(m),
                    "n": n,
                    "noise": spec.noise,
                    "lam": spec.lam,
                    "trials": spec.trials,
                    "selected_trials": sel_trials,
                    "tests": tests,
                    "fpr": fpr,
                    "fpr_se": (
                        float(np.sqrt(fpr * (1 - fpr) / tests)) if tests else float("nan")
                    ),
                    "fwer_bonf": fw / sel_trials if sel_trials else float("nan"),
                    "skipped_trials": skipped,
                }
            )
    return rows


def run_tpr_study(spec: SyntheticSpec, methods, alpha: float, ns=None, repeats=10):
    """Conditional power: among truly-signal features that were selected,
    the fraction rejected after Bonferroni."""
    signal = {j for j, v in enumerate(spec.beta) if v != 0.0}
    if not signal:
        raise ValueError("TPR study requires signal features")
    ns = list(ns) if ns is not None else [spec.n]
    rows = []
    for n in ns:
        cfg = _with(spec, n=n)
        for method in methods:
            m = _resolve_method(method)
            # the CV arms are expensive per feature; only the signal
            # features enter the TPR, so skip the others' p-values
            restrict = (
                tuple(sorted(signal)) if m["name"] in ("cv", "cv-over") else None
            )
            for rep in range(repeats):
                detected = rejected = skipped = 0
                for t in range(spec.trials):
                    trial = rep * spec.trials + t
                    data = generate(cfg, trial)
                    try:
                        res = _run_method(
                            data, m, alpha, trial_rng(spec.seed, trial, 1),
                            compute_ci=False, feature_ids=restrict,
                        )
                    except LassoSIError:
                        skipped += 1
                        continue
                    if not res:
                        continue
                    thresh = alpha / _bonferroni_m(res)
                    for r in res:
                        if r.feature in signal:
                            detected += 1
                            rejected += r.p_value < thresh
                rows.append(
                    {
                        "method": _method_label(m),
                        "n": n,
                        "repeat": rep,
                        "detected": detected,
                        "rejected": rejected,
                        "tpr": rejected / detected if detected else float("nan"),
                        "skipped_trials": skipped,
                    }
                )
    return rows


def mean_tpr(rows, method: str, n=None) -> float:
    vals = [
        r["tpr"]
        for r in rows
        if r["method"] == method
        and (n is None or r["n"] == n)
        and not np.isnan(r["tpr"])
    ]
    return float(np.mean(vals))


def run_ci_study(spec: SyntheticSpec, methods, alpha: float, repeats=100):
    """Interval lengths (on features selected by every compared method) and
    empirical coverage of the targeted parameter."""
    resolved = [_resolve_method(m) for m in methods]
    labels = [_method_label(m) for m in resolved]
    records = []
    for rep in range(repeats):
        data = generate(spec, rep)
        mu = data.X @ spec.beta_vector()
        per_method = {}
        for m, label in zip(resolved, labels):
            try:
                res = _run_method(
                    data, m, alpha, trial_rng(spec.seed, rep, 1), compute_ci=True
                )
            except LassoSIError:
                res = []
            per_method[label] = res
        common = None
        for res in per_method.values():
            feats = {r.feature for r in res}
            common = feats if common is None else common & feats
        for label, res in per_method.items():
            for r in res:
                if isinstance(r, _SplitResult):
                    true_val = r.true_value_fn(mu)
                else:
                    true_val = float(r.target.eta @ mu) if r.target is not None else 0.0
                lo, hi = r.ci
                records.append(
                    {
                        "repeat": rep,
                        "method": label,
                        "feature": r.feature,
                        "length": hi - lo,
                        "covered": int(lo <= true_val <= hi),
                        "common": int(r.feature in common),
                    }
                )
    rows = []
    for label in labels:
        mine = [r for r in records if r["method"] == label]
        lens = [r["length"] for r in mine if r["common"]]
        rows.append(
            {
                "method": label,
                "n_ci": len(mine),
                "n_common": len(lens),
                "median_length_common": float(np.median(lens)) if lens else float("nan"),
                "coverage": float(np.mean([r["covered"] for r in mine])),
            }
        )
    return rows, records


QQ_VARIANTS = (
    "full",
    "tn-a",
    "tn-as",
    "marginal",
    "tn-l1",
    "tn-custom",
    "interaction",
    "tn-validation",
)


def run_pivot_qq(
    spec: SyntheticSpec,
    variant: str,
    *,
    lambda_stable: float = 15.0,
    cutoff: float = 1.0,
    cv_grid=(0.5, 1.0, 2.0),
    cv_folds: int = 5,
    max_trial_factor: int = 8,
):
    """Null pivots (at the true targeted mean) for one conditioning variant;
    one pivot per trial, first tested feature. 'naive' ignores truncation."""
    pivots = []
    trial = 0
    budget = spec.trials * max_trial_factor
    while len(pivots) < spec.trials and trial < budget:
        data = generate(spec, trial)
        trial += 1
        mu = data.X @ spec.beta_vector()
        opts = InferenceOptions(compute_ci=False)
        name = variant
        if variant == "tn-validation":
            name = "tn-a"
            opts.cv = CvConfig(tuple(cv_grid), cv_folds)
        elif variant == "tn-l1":
            opts.lambda_stable = lambda_stable
        elif variant == "tn-custom":
            opts.cutoff = cutoff
        elif variant == "naive":
            sol = GramLassoSolver(data.X, data.lam, data.delta).solve(data.y)
            if sol.active.size == 0:
                continue
            t = make_target(
                "tn-a", int(sol.active[0]), X=data.X, y_obs=data.y,
                sigma=data.sigma, A_obs=sol.active,
            )
            zz = (t.z_obs - float(t.eta @ mu)) / np.sqrt(t.sigma2)
            pivots.append(float(std_normal_cdf(zz)))
            continue
        try:
            res = run_inference(data, name, 0.05, opts)
        except LassoSIError:
            continue
        if not res:
            continue
        r = res[0]
        true_mean = float(r.target.eta @ mu)
        pivots.append(
            truncnorm_cdf(TruncatedNormal(true_mean, r.sigma2, r.region), r.z_obs)
        )
    pivots = np.sort(np.asarray(pivots))
    ks = kstest(pivots, "uniform")
    return pivots, float(ks.statistic), float(ks.pvalue)


def run_scaling_study(shapes, features_per_instance=3):
    """Per-shape wall time and interval-count diagnostics. Elastic net is
    used where the shape sets delta > 0 so the active set can exceed n;
    such shapes use the correlated factor design ('factor_design' key),
    iid shapes a plain SyntheticSpec ('spec' key)."""
    rows = []
    for shape in shapes:
        spec = SyntheticSpec(**shape["spec"]) if "spec" in shape else None
        trials = shape.get("trials", 1)
        times, seg_ratios, a_sizes, visited_all, matched_all = [], [], [], [], []
        for trial in range(trials):
            if spec is not None:
                data = generate(spec, trial)
            else:
                data = generate_factor_design(**shape["factor_design"], trial=trial)
            opts = InferenceOptions(
                compute_ci=False, features=list(range(features_per_instance))
            )
            t0 = time.perf_counter()
            res = run_inference(data, "tn-a", 0.05, opts)
            elapsed = time.perf_counter() - t0
            if not res:
                continue
            times.append(elapsed / len(res))
            a = _active_size(data)
            a_sizes.append(a)
            for r in res:
                visited_all.append(r.segments_visited)
                matched_all.append(r.matched_segments)
                seg_ratios.append(r.segments_visited / 2.0**a)
        rows.append(
            {
                "n": data.n,
                "p": data.p,
                "lam": data.lam,
                "delta": data.delta,
                "trials": trials,
                "active_size_mean": float(np.mean(a_sizes)) if a_sizes else 0.0,
                "per_feature_time_s": float(np.mean(times)) if times else float("nan"),
                "segments_visited_mean": float(np.mean(visited_all)) if visited_all else 0.0,
                "matched_segments_mean": float(np.mean(matched_all)) if matched_all else 0.0,
                "visited_over_2powA_max": float(np.max(seg_ratios)) if seg_ratios else 0.0,
            }
        )
    return rows


def _active_size(data: ProblemData) -> int:
    return GramLassoSolver(data.X, data.lam, data.delta).solve(data.y).active.size


def _with(spec: SyntheticSpec, **kw) -> SyntheticSpec:
    d = asdict(spec)
    d.update(kw)
    return SyntheticSpec(**d)


# ---------------------------------------------------------------------------
# Deterministic output layout: results/<study>/<config-hash>/


def config_hash(study: str, config: dict, seed: int) -> str:
    payload = json.dumps(
        {"study": study, "config": config, "seed": seed}, sort_keys=True
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:12]


def write_rows_csv(path: Path, rows) -> None:
    fields = sorted({k for r in rows for k in r})
    with open(path, "w", newline="") as fp:
        w = csv.DictWriter(fp, fieldnames=fields)
        w.writeheader()
        for r in rows:
            w.writerow(r)


def write_study(
    out_dir, study: str, config: dict, seed: int, rows, extra=None, wall_time_s=None
):
    """Write table.csv + manifest.json (+extra files) under the config hash.

    Everything except the manifest's wall_time_s field is reproducible
    byte-for-byte from (config, seed).
    """
    h = config_hash(study, config, seed)
    d = Path(out_dir) / study / h
    d.mkdir(parents=True, exist_ok=True)
    write_rows_csv(d / "table.csv", rows)
    manifest = {
        "study": study,
        "config": config,
        "seed": seed,
        "content_hash": h,
        "rows": len(rows),
        "wall_time_s": wall_time_s,
    }
    with open(d / "manifest.json", "w") as fp:
        json.dump(manifest, fp, indent=2, sort_keys=True)
        fp.write("\n")
    for name, content in (extra or {}).items():
        target = d / name
        target.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(content, (list, tuple)):
            write_rows_csv(target, content)
        else:
            with open(target, "w") as fp:
                fp.write(content)
    return d
