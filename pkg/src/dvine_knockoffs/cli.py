"""Command-line entry points.

Subcommands: fit-vine, sample-knockoffs, select, derandomize, simulate,
experiment, preprocess.  Exit codes: 0 success, 1 usage error, 2 runtime
error.  Every subcommand honors --seed for bit-reproducible output; the
DVINE_KNOCKOFFS_JOBS environment variable sets the default worker count.
"""

import argparse
import json
import os
import sys

import numpy as np

from .dataio import Dataset, load_csv, save_matrix_csv
from .dgp import load_fitted_dvine, save_fitted_dvine
from .dvine import DVineModel, fit_dvine, select_order, simulate
from .errors import DvineKnockoffsError
from .knockoffs import (MarginalTransform, TDCKConfig, TDCKSampler,
                        pseudo_observations, quantile_type8,
                        second_order_gaussian_sample)
from .preprocess import smote_oversample, variance_filter
from .selection import (DTDCKeConfig, KnockoffRun, derandomized_select)
from .lasso import lcd_statistic, percentile_lasso_lambda


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _family_list(text):
    return tuple(f.strip() for f in text.split(",") if f.strip())


def _add_tdck_flags(sub):
    sub.add_argument("--families", type=_family_list,
                     default=TDCKConfig().family_set,
                     help="comma-separated pair-copula families")
    sub.add_argument("--rotations", choices=("tau_sign", "all"),
                     default="tau_sign")
    sub.add_argument("--psi0", type=float, default=0.9)
    sub.add_argument("--order", choices=("auto", "fixed"), default="auto")
    sub.add_argument("--indep-test", action="store_true",
                     help="Kendall-tau independence prescreen per edge")
    sub.add_argument("--trunc-level", type=int, default=None)


def _tdck_config(args, seed=None):
    return TDCKConfig(family_set=args.families, rotation_set=args.rotations,
                      psi0=args.psi0, order_policy=args.order, seed=seed,
                      trunc_level=args.trunc_level,
                      indep_test=args.indep_test)


def build_parser():
    parser = _Parser(prog="dvine-knockoffs",
                     description="FDR-controlled variable selection with "
                                 "truncated D-vine copula knockoffs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-vine", help="fit a (truncated) D-vine to a CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--header", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--with-marginals", action="store_true",
                   help="store the empirical margins for later simulation")
    _add_tdck_flags(p)

    p = sub.add_parser("sample-knockoffs", help="draw one knockoff matrix")
    p.add_argument("--data", required=True)
    p.add_argument("--header", action="store_true")
    p.add_argument("--sampler", choices=("tdck", "gaussian"), default="tdck")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_tdck_flags(p)

    p = sub.add_parser("select", help="one knockoff filter pass")
    p.add_argument("--data", required=True)
    p.add_argument("--response", required=True)
    p.add_argument("--header", action="store_true")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--response-family", choices=("gaussian", "logistic"),
                   default="gaussian")
    p.add_argument("--sampler", choices=("tdck", "gaussian"), default="tdck")
    p.add_argument("--m-lasso", type=int, default=10)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_tdck_flags(p)

    p = sub.add_parser("derandomize",
                       help="derandomized knockoff selection with e-values")
    p.add_argument("--data", required=True)
    p.add_argument("--response", required=True)
    p.add_argument("--header", action="store_true")
    p.add_argument("--alpha-ebh", type=float, default=0.2)
    p.add_argument("--alpha-kn", type=float, default=None,
                   help="default alpha-ebh / 2")
    p.add_argument("--runs", type=int, default=50)
    p.add_argument("--response-family", choices=("gaussian", "logistic"),
                   default="gaussian")
    p.add_argument("--sampler", choices=("tdck", "gaussian"), default="tdck")
    p.add_argument("--lambda-policy", choices=("first_run", "per_run"),
                   default="first_run")
    p.add_argument("--m-lasso", type=int, default=10)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_tdck_flags(p)

    p = sub.add_parser("simulate", help="simulate rows from a stored vine")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("experiment", help="run a replication study")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", default=None,
                   help="per-replication detail (includes wallclock)")
    p.add_argument("--n-jobs", type=int,
                   default=int(os.environ.get("DVINE_KNOCKOFFS_JOBS", "1")))

    p = sub.add_parser("preprocess",
                       help="SMOTE oversampling and/or variance filtering")
    p.add_argument("--data", required=True)
    p.add_argument("--response", required=True)
    p.add_argument("--header", action="store_true")
    p.add_argument("--smote-target", default=None,
                   help="target minority count, or 'balance'")
    p.add_argument("--k-neighbors", type=int, default=5)
    p.add_argument("--variance-top-k", type=int, default=None)
    p.add_argument("--pipeline", choices=("smote-first", "variance-first"),
                   default="smote-first")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-data", required=True)
    p.add_argument("--out-response", default=None)
    return parser


def _load_xy(args):
    data = load_csv(args.data, has_header=args.header)
    resp = load_csv(args.response, has_header=args.header)
    if resp.X.shape[1] != 1:
        raise DvineKnockoffsError("response CSV must have a single column")
    return data, resp.X[:, 0]


def _cmd_fit_vine(args):
    data = load_csv(args.data, has_header=args.header)
    U = pseudo_observations(data.X)
    order = select_order(U) if args.order == "auto" and data.p >= 2 \
        else np.arange(data.p)
    trunc = args.trunc_level if args.trunc_level is not None else data.p - 1
    model = fit_dvine(U[:, order], order=np.arange(data.p), trunc_level=trunc,
                      candidates=args.families, psi0=args.psi0,
                      rotation_policy=args.rotations,
                      indep_test=args.indep_test)
    # store the selected order as original column labels
    model = DVineModel(order=tuple(int(o) for o in order),
                       trunc_level=model.trunc_level, trees=model.trees,
                       n_fit=model.n_fit)
    if args.with_marginals:
        marginals = [MarginalTransform(data.X[:, j]) for j in range(data.p)]
        save_fitted_dvine(model, marginals, args.out)
    else:
        model.to_json(args.out)
    print(f"fitted d={model.dim} vine (trunc_level={model.trunc_level}, "
          f"{model.n_params} parameters) -> {args.out}")
    return 0


def _cmd_sample_knockoffs(args):
    data = load_csv(args.data, has_header=args.header)
    if args.sampler == "tdck":
        km = TDCKSampler(data.X, _tdck_config(args)).sample(
            np.random.default_rng(args.seed))
    else:
        km = second_order_gaussian_sample(data.X,
                                          rng=np.random.default_rng(args.seed))
    save_matrix_csv(args.out, km.X_tilde, data.column_names)
    print(f"{km.source} knockoffs ({km.X_tilde.shape[0]} x "
          f"{km.X_tilde.shape[1]}) -> {args.out}")
    return 0


def _cmd_select(args):
    data, y = _load_xy(args)
    rng = np.random.default_rng(args.seed)
    if args.sampler == "tdck":
        km = TDCKSampler(data.X, _tdck_config(args)).sample(rng)
    else:
        km = second_order_gaussian_sample(data.X, rng=rng)
    lam = percentile_lasso_lambda(
        np.hstack([data.X, km.X_tilde]), y, K=args.folds,
        M_lasso=args.m_lasso, rng=rng,
        family=args.response_family).lambda_hat
    W = lcd_statistic(data.X, km.X_tilde, y, lam, args.response_family)
    run = KnockoffRun.from_statistics(W, args.alpha)
    payload = {"selected": [int(j) for j in run.selected],
               "T": (None if np.isinf(run.T) else run.T),
               "alpha_kn": args.alpha, "lambda": lam,
               "W": [float(w) for w in run.W]}
    if data.column_names:
        payload["selected_names"] = [data.column_names[j] for j in run.selected]
    with open(args.out, "w") as fh:
        json.dump(payload, fh, indent=2)
    print(f"selected {len(run.selected)} of {data.p} -> {args.out}")
    return 0


def _cmd_derandomize(args):
    data, y = _load_xy(args)
    alpha_kn = args.alpha_kn if args.alpha_kn is not None else args.alpha_ebh / 2
    cfg = DTDCKeConfig(alpha_kn=alpha_kn, alpha_ebh=args.alpha_ebh,
                       M=args.runs,
                       sampler=("tdck" if args.sampler == "tdck"
                                else "second_order_gaussian"),
                       response_family=args.response_family,
                       lambda_policy=args.lambda_policy,
                       m_lasso=args.m_lasso, cv_folds=args.folds,
                       tdck=_tdck_config(args, seed=args.seed))
    result = derandomized_select(data.X, y, cfg,
                                 rng=np.random.default_rng(args.seed))
    payload = result.to_dict()
    if data.column_names:
        payload["selected_names"] = [data.column_names[j]
                                     for j in result.selected]
    with open(args.out, "w") as fh:
        json.dump(payload, fh, indent=2)
    print(f"derandomized selection over M={result.M} runs: "
          f"{len(result.selected)} of {data.p} -> {args.out}")
    return 0


def _cmd_simulate(args):
    model, marginals = load_fitted_dvine(args.model)
    U = simulate(model, args.n, rng=np.random.default_rng(args.seed))
    if marginals is not None:
        X = np.empty_like(U)
        for j in range(model.dim):
            X[:, j] = quantile_type8(marginals[j], U[:, j])
    else:
        X = U
    save_matrix_csv(args.out, X)
    scale = "original" if marginals is not None else "copula"
    print(f"simulated {args.n} rows ({scale} scale) -> {args.out}")
    return 0


def _cmd_experiment(args):
    from .experiment import ExperimentConfig, run_experiment
    cfg = ExperimentConfig.from_json(args.config)
    result = run_experiment(cfg, n_jobs=args.n_jobs)
    result.to_json(args.out)
    if args.csv:
        result.to_csv(args.csv)
    print(f"{len(result.reps)} replications (failed {len(result.failed_reps)}): "
          f"FDR {result.fdr:.3f} +/- {result.fdr_se:.3f}, "
          f"power {result.power:.3f} +/- {result.power_se:.3f} -> {args.out}")
    return 0


def _cmd_preprocess(args):
    data = load_csv(args.data, has_header=args.header)
    resp = load_csv(args.response, has_header=args.header)
    ds = Dataset(X=data.X, y=resp.X[:, 0], column_names=data.column_names)

    def run_smote(d):
        if args.smote_target is None:
            return d
        counts = [int(np.sum(d.y == lab)) for lab in np.unique(d.y)]
        target = max(counts) if args.smote_target == "balance" \
            else int(args.smote_target)
        return smote_oversample(d, target, k_neighbors=args.k_neighbors,
                                rng=np.random.default_rng(args.seed))

    def run_variance(d):
        if args.variance_top_k is None:
            return d
        return variance_filter(d, args.variance_top_k)

    steps = (run_smote, run_variance) if args.pipeline == "smote-first" \
        else (run_variance, run_smote)
    for step in steps:
        ds = step(ds)
    save_matrix_csv(args.out_data, ds.X, ds.column_names)
    if args.out_response:
        save_matrix_csv(args.out_response, ds.y)
    print(f"preprocessed -> {ds.n} rows, {ds.p} columns")
    return 0


_COMMANDS = {
    "fit-vine": _cmd_fit_vine,
    "sample-knockoffs": _cmd_sample_knockoffs,
    "select": _cmd_select,
    "derandomize": _cmd_derandomize,
    "simulate": _cmd_simulate,
    "experiment": _cmd_experiment,
    "preprocess": _cmd_preprocess,
}


def cli_main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (DvineKnockoffsError, OSError, ValueError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
