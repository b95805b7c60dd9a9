"""Batch command-line front end.

Two subcommands: ``infer`` runs selective inference on CSV inputs, and
``experiment`` dispatches the synthetic studies. Exit codes: 0 success,
2 malformed input or arguments, 3 numerical failure (the error class name
appears in the message).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import experiments as ex
from .cv import CvConfig, select_lambda
from .errors import LassoSIError
from .inference import (
    VARIANTS,
    InferenceOptions,
    results_to_csv,
    results_to_json,
    run_inference,
)
from .lasso import ProblemData


def _load_matrix(path: str) -> np.ndarray:
    arr = np.loadtxt(path, delimiter=",", ndmin=2)
    return np.asarray(arr, dtype=float)


def _load_vector(path: str) -> np.ndarray:
    return _load_matrix(path).reshape(-1)


def _parse_sigma(token: str, n: int) -> np.ndarray:
    if token == "identity":
        return np.eye(n)
    if token.startswith("scalar:"):
        return float(token.split(":", 1)[1]) * np.eye(n)
    return _load_matrix(token)


def _fold_pairs(n: int, k: int, seed: int | None):
    idx = np.arange(n)
    if seed is not None:
        idx = np.random.default_rng(seed).permutation(n)
    bounds = np.linspace(0, n, k + 1).astype(int)
    pairs = []
    for i in range(k):
        val = np.sort(idx[bounds[i] : bounds[i + 1]])
        train = np.sort(np.concatenate([idx[: bounds[i]], idx[bounds[i + 1] :]]))
        pairs.append((train, val))
    return pairs


def cmd_infer(args) -> int:
    X = _load_matrix(args.x)
    y = _load_vector(args.y)
    if y.shape[0] != X.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    sigma = _parse_sigma(args.sigma, X.shape[0])
    data = ProblemData(X, y, sigma, args.lam, args.elastic_delta)

    opts = InferenceOptions(
        zmin_sigmas=args.zmin_sigmas,
        cutoff=args.cutoff,
        lambda_stable=args.lambda_stable,
        threads=args.threads,
        alpha=args.alpha,
    )
    lambda_obs = None
    if args.cv:
        if not args.lambda_grid:
            raise ValueError("--cv requires --lambda-grid")
        grid = tuple(float(v) for v in args.lambda_grid.split(","))
        opts.cv = CvConfig(grid, _fold_pairs(X.shape[0], args.folds, args.seed))
        lambda_obs = select_lambda(X, y, opts.cv)

    t0 = time.perf_counter()
    failures: list = []
    results = run_inference(data, args.variant, args.alpha, opts, failures=failures)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "results.csv", "w", newline="") as fp:
        results_to_csv(results, fp)
    with open(out / "results.json", "w") as fp:
        results_to_json(results, fp)
    manifest = {
        "n": X.shape[0],
        "p": X.shape[1],
        "lambda": args.lam,
        "elastic_delta": args.elastic_delta,
        "variant": args.variant,
        "alpha": args.alpha,
        "cv": bool(args.cv),
        "lambda_obs": lambda_obs,
        "seed": args.seed,
        "features_tested": [r.feature for r in results],
        "wall_time_s": time.perf_counter() - t0,
    }
    with open(out / "manifest.json", "w") as fp:
        json.dump(manifest, fp, indent=2, sort_keys=True)
        fp.write("\n")

    if failures:
        j, exc = failures[0]
        print(
            f"error: feature {j}: {type(exc).__name__}: {exc}", file=sys.stderr
        )
        return 3
    return 0


# -- experiment defaults, desk scale ----------------------------------------

_DEFAULT_CONFIGS = {
    "fpr": {
        "spec": {"n": 100, "p": 5, "beta": [], "lam": 1.0, "trials": 1200, "seed": 0},
        "methods": ["tn-a", "tn-as"],
        "alpha": 0.05,
        "ns": [100],
    },
    "tpr": {
        "spec": {
            "n": 100, "p": 5, "beta": [0.25, 0.25], "lam": 1.0,
            "trials": 100, "seed": 0,
        },
        "methods": ["tn-a", "tn-as", "ds"],
        "alpha": 0.05,
        "ns": [50, 100, 150, 200],
        "repeats": 10,
    },
    "ci": {
        "spec": {
            "n": 100, "p": 10, "beta": [0.25] * 5, "lam": 1.0,
            "trials": 1, "seed": 0,
        },
        "methods": ["tn-a", "tn-as", "ds"],
        "alpha": 0.05,
        "repeats": 100,
    },
    "qq": {
        "spec": {
            "n": 100, "p": 5, "beta": [2.0, 2.0], "lam": 5.0,
            "trials": 1200, "seed": 0,
        },
        "variant": "tn-a",
        "lambda_stable": 15.0,
        "cutoff": 1.0,
        "cv_grid": [0.5, 1.0, 2.0],
        "cv_folds": 5,
    },
    "scaling": {
        "shapes": [
            {
                "spec": {
                    "n": 150, "p": 30, "beta": [0.5] * 15, "lam": 8.0,
                    "trials": 1, "seed": 0,
                },
                "trials": 3,
            },
            {
                "factor_design": {
                    "n": 100, "p": 5000, "n_factors": 25, "col_noise": 0.35,
                    "signal": [1.0, -0.8, 0.6], "lam": 0.025, "delta": 0.1,
                    "seed": 0,
                },
                "trials": 1,
            },
        ],
        "features_per_instance": 2,
    },
}


def cmd_experiment(args) -> int:
    if args.study not in _DEFAULT_CONFIGS:
        print(f"error: unknown study {args.study!r}", file=sys.stderr)
        return 2
    config = json.loads(json.dumps(_DEFAULT_CONFIGS[args.study]))
    if args.config:
        with open(args.config) as fp:
            config.update(json.load(fp))
    if args.seed is not None:
        for key in ("spec",):
            if key in config:
                config[key]["seed"] = args.seed
        for shape in config.get("shapes", []):
            shape["spec"]["seed"] = args.seed
    if args.variant:
        config["variant"] = args.variant
    if args.n or args.p or args.elastic_delta:
        if args.study == "scaling":
            # dimension flags select a single shape; an elastic penalty
            # implies the correlated wide-design arm
            shapes = config["shapes"]
            tgt = None
            if args.elastic_delta:
                for shape in shapes:
                    if "factor_design" in shape:
                        tgt = shape["factor_design"]
                if tgt is not None:
                    config["shapes"] = [s for s in shapes if "factor_design" in s]
            if tgt is None:
                tgt = shapes[0].get("spec") or shapes[0]["factor_design"]
                config["shapes"] = shapes[:1]
        else:
            tgt = config["spec"]
        if args.n:
            tgt["n"] = args.n
        if args.p:
            tgt["p"] = args.p
        if args.elastic_delta:
            tgt["delta"] = args.elastic_delta

    seed = config.get("spec", {}).get("seed", 0) if "spec" in config else (
        config["shapes"][0]["spec"].get("seed", 0)
    )
    t0 = time.perf_counter()
    extra = None
    if args.study == "fpr":
        spec = ex.SyntheticSpec(**config["spec"])
        rows = ex.run_fpr_study(spec, config["methods"], config["alpha"], config["ns"])
    elif args.study == "tpr":
        spec = ex.SyntheticSpec(**config["spec"])
        rows = ex.run_tpr_study(
            spec, config["methods"], config["alpha"], config["ns"], config["repeats"]
        )
    elif args.study == "ci":
        spec = ex.SyntheticSpec(**config["spec"])
        rows, records = ex.run_ci_study(
            spec, config["methods"], config["alpha"], config["repeats"]
        )
        extra = {"records.csv": records}
    elif args.study == "qq":
        spec = ex.SyntheticSpec(**config["spec"])
        pivots, ks, ks_p = ex.run_pivot_qq(
            spec,
            config["variant"],
            lambda_stable=config["lambda_stable"],
            cutoff=config["cutoff"],
            cv_grid=tuple(config["cv_grid"]),
            cv_folds=config["cv_folds"],
        )
        rows = [
            {"variant": config["variant"], "n_pivots": len(pivots),
             "ks_stat": ks, "ks_pvalue": ks_p}
        ]
        extra = {
            "pivots.csv": [
                {"variant": config["variant"], "index": i, "pivot": float(v)}
                for i, v in enumerate(pivots)
            ]
        }
    else:  # scaling
        rows = ex.run_scaling_study(
            config["shapes"], config.get("features_per_instance", 3)
        )
    out_dir = ex.write_study(
        args.out, args.study, config, seed, rows, extra,
        wall_time_s=time.perf_counter() - t0,
    )
    print(out_dir)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="lassosi",
        description="Selective inference for Lasso-selected features via "
        "exact solution paths along the test-statistic line.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    inf = sub.add_parser("infer", help="run inference on CSV inputs")
    inf.add_argument("--x", required=True, help="design matrix CSV (n rows, p cols)")
    inf.add_argument("--y", required=True, help="response CSV (n rows)")
    inf.add_argument(
        "--sigma",
        default="identity",
        help="noise covariance: CSV path, 'identity', or 'scalar:<v>'",
    )
    inf.add_argument("--lambda", dest="lam", type=float, required=True)
    inf.add_argument("--elastic-delta", type=float, default=0.0)
    inf.add_argument("--variant", choices=VARIANTS, default="tn-a")
    inf.add_argument("--alpha", type=float, default=0.05)
    inf.add_argument("--zmin-sigmas", type=float, default=20.0)
    inf.add_argument("--cv", action="store_true", help="condition on CV selection")
    inf.add_argument("--lambda-grid", help="comma-separated CV grid")
    inf.add_argument("--folds", type=int, default=5)
    inf.add_argument("--cutoff", type=float, help="tn-custom stable cutoff")
    inf.add_argument("--lambda-stable", type=float, help="tn-l1 larger penalty")
    inf.add_argument("--threads", type=int, default=1)
    inf.add_argument("--seed", type=int, default=None)
    inf.add_argument("--out", required=True)
    inf.set_defaults(func=cmd_infer)

    exp = sub.add_parser("experiment", help="run a synthetic study")
    exp.add_argument("study", help="fpr | tpr | ci | qq | scaling")
    exp.add_argument("--config", help="JSON config overriding the defaults")
    exp.add_argument("--seed", type=int, default=None)
    exp.add_argument("--variant", default=None)
    exp.add_argument("--n", type=int, default=None)
    exp.add_argument("--p", type=int, default=None)
    exp.add_argument("--elastic-delta", type=float, default=None)
    exp.add_argument("--out", default="results")
    exp.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except LassoSIError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
