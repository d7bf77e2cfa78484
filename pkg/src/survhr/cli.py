"""Command-line pipelines tying the models, explanations and reports together.

Every command takes an explicit seed (no wall-clock randomness), logs one
line per stage to stderr, and writes machine-readable reports that embed
the fully resolved configuration, so identical command lines produce
byte-identical files.

Exit codes: 0 success, 1 input/validation error, 2 numerical failure,
64 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict

import numpy as np

from . import coxph, hazard, metrics, shapley, simdata, trees, tuning
from .data import SurvivalDataset, load_csv, preprocess, write_csv
from .errors import FitError, MetricError, SurvhrError, ValidationError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERIC = 2
EXIT_USAGE = 64

DEFAULT_HYPERPARAMS = trees.Hyperparams(
    eta=0.1,
    max_depth=3,
    min_child_weight=1.0,
    reg_lambda=1.0,
    reg_alpha=0.0,
    gamma=0.0,
    subsample=1.0,
    colsample_bytree=1.0,
    n_rounds=100,
    seed=0,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _log(msg: str):
    print(msg, file=sys.stderr)


def _dump_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _load_dataset(args, impute: bool) -> SurvivalDataset:
    ds = load_csv(args.data, args.time_col, args.event_col)
    return preprocess(ds, impute=impute)


def _parse_betas(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ValidationError(f"cannot parse coefficient list {text!r}")


def _hyperparams(args) -> trees.Hyperparams:
    if getattr(args, "params", None):
        with open(args.params, encoding="utf-8") as fh:
            return trees.Hyperparams(**json.load(fh))
    return DEFAULT_HYPERPARAMS


def _config_obj(args) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    return cfg


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _cmd_simulate(args):
    cfg = simdata.SimConfig(
        n=args.n,
        betas=_parse_betas(args.betas),
        censor_frac=args.censor,
        max_time=args.max_time,
        seed=args.seed,
    )
    ds = simdata.simulate(cfg)
    write_csv(ds, args.out)
    _log(f"simulate: wrote {ds.n} records ({int(ds.event.sum())} events) to {args.out}")
    return EXIT_OK


def _cmd_fit_cox(args):
    ds = _load_dataset(args, impute=True)
    model = coxph.fit_coxph(ds)
    report = {
        "config": _config_obj(args),
        "model": json.loads(coxph.model_to_json(model)),
        "features": list(ds.feature_names),
    }
    _dump_json(report, args.out)
    _log(
        f"fit-cox: converged={model.converged} iterations={model.iterations} "
        f"loglik={model.log_partial_likelihood:.6f}"
    )
    return EXIT_OK


def _cmd_fit_gbt(args):
    ds = _load_dataset(args, impute=args.impute)
    hp = _hyperparams(args)
    ens = trees.train(ds, hp)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(trees.ensemble_to_json(ens))
        fh.write("\n")
    _log(f"fit-gbt: trained {len(ens.trees)} trees on {ds.n} records")
    return EXIT_OK


def _cmd_tune(args):
    ds = _load_dataset(args, impute=args.impute)
    best, best_score, trace = tuning.random_search(
        ds, tuning.SearchSpace(), args.rounds, args.k, args.seed
    )
    report = {
        "config": _config_obj(args),
        "note": "random search (seeded) in place of adaptive optimization",
        "best_params": asdict(best),
        "best_score": best_score,
        "evaluations": len(trace),
    }
    _dump_json(report, args.out)
    if args.trace:
        tuning.write_trace_jsonl(trace, args.trace)
    _log(f"tune: best mean C-index {best_score:.4f} over {len(trace)} evaluations")
    return EXIT_OK


def _cmd_cv(args):
    if args.model == "cox":
        ds = _load_dataset(args, impute=True)
        trainer = coxph.cox_trainer()
    else:
        ds = _load_dataset(args, impute=args.impute)
        trainer = tuning.boosted_trainer(_hyperparams(args))
    result = metrics.kfold_cv(ds, args.k, trainer, args.seed)
    report = {
        "config": _config_obj(args),
        "fold_scores": list(result.fold_scores),
        "mean": result.mean,
        "std": result.std,
    }
    _dump_json(report, args.out)
    _log(f"cv: {args.model} mean C-index {result.mean:.4f} +/- {result.std:.4f}")
    return EXIT_OK


def _cmd_shap(args):
    ds = _load_dataset(args, impute=args.impute)
    with open(args.ensemble, encoding="utf-8") as fh:
        ens = trees.ensemble_from_json(fh.read())
    shap = shapley.tree_shap(ens, ds)
    shapley.write_shap_csv(shap, args.out)
    _log(f"shap: wrote {shap.phi.shape[0]}x{shap.phi.shape[1]} attributions")
    return EXIT_OK


def _cmd_hr(args):
    ds = _load_dataset(args, impute=args.impute)
    hp = _hyperparams(args)
    estimates = hazard.bootstrap_hr(ds, hp, args.boot, args.seed, n_jobs=args.jobs)
    reference = hazard.full_data_hr(ds, hp)
    report = {
        "config": _config_obj(args),
        "estimates": hazard.hr_report_obj(estimates),
        "full_data_hr": reference,
    }
    _dump_json(report, args.out)
    if args.csv:
        hazard.write_hr_csv(estimates, args.csv)
    _log(f"hr: {len(estimates)} variables, {args.boot} bootstrap replicates")
    return EXIT_OK


def _cmd_km(args):
    ds = _load_dataset(args, impute=False)
    groups = []
    if args.by is None:
        groups.append(("all", np.arange(ds.n)))
    else:
        j = ds.feature_index(args.by)
        split = hazard.median_split(ds, j)
        col = ds.features[:, j]
        binary = np.isin(np.unique(col[~np.isnan(col)]), (0.0, 1.0)).all()
        lbl1, lbl2 = (
            (f"{args.by}=1", f"{args.by}=0") if binary else (f"{args.by}_hi", f"{args.by}_lo")
        )
        groups.append((lbl1, np.asarray(split.s1)))
        groups.append((lbl2, np.asarray(split.s2)))

    summary = {"config": _config_obj(args), "groups": {}}
    for label, idx in groups:
        curve = metrics.km_estimate(ds.time[idx], ds.event[idx])
        out_path = f"{args.out_prefix}_{label}.csv"
        metrics.write_km_csv(curve, out_path)
        summary["groups"][label] = {
            "n": int(idx.shape[0]),
            "file": out_path,
            **metrics.km_summary_obj(curve),
        }
        _log(f"km: {label}: n={idx.shape[0]} median={curve.median_survival}")
    _dump_json(summary, f"{args.out_prefix}_summary.json")
    return EXIT_OK


def _cmd_compare(args):
    """Both model families end to end, with per-variable agreement flags."""
    cox_ds = _load_dataset(args, impute=True)
    ml_ds = _load_dataset(args, impute=args.impute)
    hp = _hyperparams(args)

    _log("compare: fitting Cox model")
    model = coxph.fit_coxph(cox_ds)
    cox_estimates = []
    for j in range(cox_ds.p):
        split = hazard.median_split(cox_ds, j)
        cox_estimates.append(coxph.hazard_ratio_coxph(model, cox_ds, j, split))

    _log(f"compare: bootstrapping tree model ({args.boot} replicates)")
    ml_estimates = hazard.bootstrap_hr(ml_ds, hp, args.boot, args.seed, n_jobs=args.jobs)

    variables = []
    for ce, me in zip(cox_estimates, ml_estimates):
        cox_dir = ce.point >= 1.0
        ml_dir = me.point >= 1.0
        variables.append(
            {
                "variable": ce.variable,
                "cox": {
                    "hr": ce.point,
                    "ci_low": ce.ci_low,
                    "ci_high": ce.ci_high,
                    "significant": ce.significant,
                },
                "ml": {
                    "hr": me.point,
                    "ci_low": me.ci_low,
                    "ci_high": me.ci_high,
                    "significant": me.significant,
                },
                "agree_direction": cox_dir == ml_dir,
                "agree_significance": ce.significant == me.significant,
            }
        )

    report = {
        "config": _config_obj(args),
        "cox_model": json.loads(coxph.model_to_json(model)),
        "variables": variables,
    }
    _dump_json(report, args.out)
    n_agree = sum(v["agree_direction"] and v["agree_significance"] for v in variables)
    _log(f"compare: {n_agree}/{len(variables)} variables agree on direction and significance")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument wiring
# ---------------------------------------------------------------------------


def _add_data_args(p):
    p.add_argument("--data", required=True, help="input CSV path")
    p.add_argument("--time-col", default="time")
    p.add_argument("--event-col", default="event")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="survhr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic survival CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--betas", required=True, help="comma-separated coefficients")
    p.add_argument("--censor", type=float, default=0.2)
    p.add_argument("--max-time", type=float, default=10000.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fit-cox", help="fit the linear Cox model")
    _add_data_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fit_cox)

    p = sub.add_parser("fit-gbt", help="train the boosted-tree Cox model")
    _add_data_args(p)
    p.add_argument("--impute", action="store_true")
    p.add_argument("--params", help="hyperparameter JSON file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fit_gbt)

    p = sub.add_parser("tune", help="random hyperparameter search")
    _add_data_args(p)
    p.add_argument("--impute", action="store_true")
    p.add_argument("--rounds", type=int, default=100)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--trace", help="JSONL evaluation trace path")
    p.set_defaults(func=_cmd_tune)

    p = sub.add_parser("cv", help="k-fold cross-validated concordance")
    _add_data_args(p)
    p.add_argument("--model", choices=("cox", "gbt"), required=True)
    p.add_argument("--impute", action="store_true")
    p.add_argument("--params", help="hyperparameter JSON file (gbt)")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_cv)

    p = sub.add_parser("shap", help="attributions for a saved ensemble")
    _add_data_args(p)
    p.add_argument("--impute", action="store_true")
    p.add_argument("--ensemble", required=True, help="ensemble JSON file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_shap)

    p = sub.add_parser("hr", help="bootstrap hazard ratios from attributions")
    _add_data_args(p)
    p.add_argument("--impute", action="store_true")
    p.add_argument("--params", help="hyperparameter JSON file")
    p.add_argument("--boot", type=int, default=1000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", help="optional flat CSV report")
    p.set_defaults(func=_cmd_hr)

    p = sub.add_parser("km", help="Kaplan-Meier curves, optionally by subgroup")
    _add_data_args(p)
    p.add_argument("--by", help="feature to split on (median / binary levels)")
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=_cmd_km)

    p = sub.add_parser("compare", help="CoxPH vs boosted model, side by side")
    _add_data_args(p)
    p.add_argument("--impute", action="store_true", help="impute for the tree model too")
    p.add_argument("--params", help="hyperparameter JSON file")
    p.add_argument("--boot", type=int, default=1000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_compare)

    return parser


def dispatch(args) -> int:
    try:
        return args.func(args)
    except (ValidationError, OSError) as err:
        _log(f"error: {err}")
        return EXIT_VALIDATION
    except (FitError, MetricError, ValueError, np.linalg.LinAlgError) as err:
        _log(f"numerical failure: {err}")
        return EXIT_NUMERIC
    except SurvhrError as err:
        _log(f"error: {err}")
        return EXIT_VALIDATION


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    return dispatch(args)


if __name__ == "__main__":
    sys.exit(main())
