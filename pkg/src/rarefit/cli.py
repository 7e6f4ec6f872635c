"""Command-line interface: fit models on CSV data, predict, run scenarios.

Exit codes: 0 success, 2 usage error, 3 data error, 4 convergence failure.
Tabular output renders numbers with six significant digits; JSON output
keeps full precision so reloaded coefficients reproduce predictions bit for
bit.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.special import expit

from .core import Dataset, check_full_rank
from .exceptions import ConvergenceError, DataError, RankDeficiencyError
from .fitting import (
    METHODS,
    EstimatorSettings,
    RidgeSettings,
    fit_firth,
    fit_flac,
    fit_flic,
    fit_method,
)
from .inference import intervals_for
from .predictions import predict_ab, predict_au
from .simgen import (
    ScenarioConfig,
    full_scenario_grid,
    resolve_workers,
    run_scenario,
)

SCHEMA_VERSION = 1
_PREDICT_METHODS = METHODS + ("ab", "au")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_CONVERGENCE = 4


def _fmt(value):
    """Render one cell: floats at six significant digits, locale-free."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.6g}"
    return str(value)


def _write_table(path_or_none, header, rows):
    lines = ["\t".join(header)]
    lines.extend("\t".join(_fmt(cell) for cell in row) for row in rows)
    text = "\n".join(lines) + "\n"
    if path_or_none is None:
        sys.stdout.write(text)
    else:
        Path(path_or_none).write_text(text)


def _jsonable(value):
    """Standard-JSON representation: non-finite floats become null."""
    if isinstance(value, dict):
        return {key: _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    return value


def _write_json(path_or_none, payload):
    text = json.dumps(_jsonable(payload), indent=2, allow_nan=False) + "\n"
    if path_or_none is None:
        sys.stdout.write(text)
    else:
        Path(path_or_none).write_text(text)


def _parse_methods(raw, allowed):
    names = [m.strip() for m in raw.split(",") if m.strip()]
    if not names:
        raise UsageError("no methods given")
    seen = []
    for name in names:
        if name not in allowed:
            raise UsageError(f"unknown method {name!r}; choose from {', '.join(allowed)}")
        if name not in seen:
            seen.append(name)
    return seen


class UsageError(Exception):
    pass


def _validate_fit_flags(args, method_names):
    if not 0.0 < args.level < 1.0:
        raise UsageError("--level must lie strictly between 0 and 1")
    if "wf" in method_names and not 0.0 < args.tau < 0.5:
        raise UsageError("--tau must lie strictly between 0 and 0.5")
    if args.ridge_lambda is not None and args.ridge_lambda <= 0:
        raise UsageError("--lambda must be positive")


def _load_csv_dataset(args):
    path = Path(args.input)
    if not path.exists():
        raise DataError(f"input file not found: {path}")
    try:
        frame = pd.read_csv(path)
    except Exception as exc:
        raise DataError(f"could not parse CSV {path}: {exc}") from exc
    if frame.empty:
        raise DataError(f"{path} has no data rows")
    if args.outcome not in frame.columns:
        raise DataError(f"outcome column {args.outcome!r} not in {list(frame.columns)}")
    if args.covariates is None:
        covariate_names = [c for c in frame.columns if c != args.outcome]
    else:
        covariate_names = [c.strip() for c in args.covariates.split(",") if c.strip()]
        missing = [c for c in covariate_names if c not in frame.columns]
        if missing:
            raise DataError(f"covariate columns not found: {missing}")
    y_raw = pd.to_numeric(frame[args.outcome], errors="coerce").to_numpy(dtype=float)
    if np.isnan(y_raw).any():
        raise DataError(f"outcome column {args.outcome!r} contains non-numeric or missing values")
    if not np.all((y_raw == 0.0) | (y_raw == 1.0)):
        raise DataError(f"outcome column {args.outcome!r} must contain only 0 and 1")
    if covariate_names:
        cols = []
        for name in covariate_names:
            col = pd.to_numeric(frame[name], errors="coerce").to_numpy(dtype=float)
            if np.isnan(col).any():
                raise DataError(f"covariate {name!r} contains non-numeric or missing values")
            cols.append(col)
        covariates = np.column_stack(cols)
        ds = Dataset.from_covariates(y_raw, covariates)
    else:
        ds = Dataset(y_raw, np.ones((y_raw.shape[0], 1)))
    terms = ["(intercept)"] + covariate_names
    try:
        check_full_rank(ds.X, ds.w)
    except RankDeficiencyError as exc:
        named = [terms[i] for i in exc.columns]
        raise DataError(f"design matrix is rank deficient; redundant columns: {named}") from exc
    return ds, terms


def _fit_all(ds, method_names, args):
    settings = EstimatorSettings()
    ridge = RidgeSettings(fixed_lambda=args.ridge_lambda)
    fits = {}
    fl_fit = None
    needs_fl = any(m in method_names for m in ("fl", "flic", "flac", "ab", "au"))
    if needs_fl:
        fl_fit = fit_firth(ds, 0.5, settings)
    for name in method_names:
        if name == "fl":
            fits[name] = fl_fit
        elif name == "flic":
            fits[name] = fit_flic(ds, settings, firth_fit=fl_fit)
        elif name == "flac":
            fits[name] = fit_flac(ds, settings, firth_fit=fl_fit)
        elif name in ("ab", "au"):
            continue
        else:
            fits[name] = fit_method(ds, name, settings, wf_tau=args.tau, ridge=ridge)
    return fits, fl_fit


def _method_report(ds, terms, name, fit, level):
    iv = intervals_for(ds, fit, level)
    mean_pred = float(np.mean(expit(ds.X @ fit.beta)))
    slopes = {t: float(np.exp(b)) for t, b in zip(terms[1:], fit.beta[1:])}
    return {
        "converged": bool(fit.converged),
        "separation": bool(fit.extras.get("separation", False)),
        "iterations": int(fit.iterations),
        "loglik": float(fit.loglik),
        "penalized_loglik": float(fit.penloglik),
        "terms": list(terms),
        "coefficients": [float(b) for b in fit.beta],
        "std_errors": [float(s) for s in fit.se],
        "odds_ratios": slopes,
        "ci_method": list(iv.methods),
        "ci_lower": [float(v) for v in iv.lower],
        "ci_upper": [float(v) for v in iv.upper],
        "mean_predicted": mean_pred,
        "extras": {k: v for k, v in fit.extras.items()},
    }


def cmd_fit(args):
    method_names = _parse_methods(args.methods, METHODS)
    _validate_fit_flags(args, method_names)
    ds, terms = _load_csv_dataset(args)
    fits, _ = _fit_all(ds, method_names, args)
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "fit",
        "input": args.input,
        "outcome": args.outcome,
        "n_rows": ds.n,
        "n_events": ds.n_events,
        "level": args.level,
        "methods": {name: _method_report(ds, terms, name, fits[name], args.level)
                    for name in method_names},
    }
    out = None
    if args.out_dir:
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
        out = Path(args.out_dir) / ("fit.json" if args.format == "json" else "fit.tsv")
    if args.format == "json":
        _write_json(out, report)
    else:
        header = ["method", "term", "estimate", "std_error", "odds_ratio",
                  "ci_lower", "ci_upper", "ci_method", "converged", "separation"]
        rows = []
        for name in method_names:
            m = report["methods"][name]
            for i, term in enumerate(m["terms"]):
                rows.append([
                    name,
                    term,
                    m["coefficients"][i],
                    m["std_errors"][i],
                    None if i == 0 else m["odds_ratios"][term],
                    m["ci_lower"][i],
                    m["ci_upper"][i],
                    m["ci_method"][i],
                    m["converged"],
                    m["separation"],
                ])
        _write_table(out, header, rows)
    return EXIT_OK


def cmd_predict(args):
    method_names = _parse_methods(args.methods, _PREDICT_METHODS)
    _validate_fit_flags(args, method_names)
    ds, terms = _load_csv_dataset(args)
    fits, fl_fit = _fit_all(ds, method_names, args)
    predictions = {}
    clipped = {}
    for name in method_names:
        if name == "ab":
            predictions[name] = predict_ab(ds, fl_fit).pi
        elif name == "au":
            pred = predict_au(ds, fl_fit)
            predictions[name] = pred.pi
            clipped[name] = pred.clipped
        else:
            predictions[name] = expit(ds.X @ fits[name].beta)
    averages = {name: float(np.mean(predictions[name])) for name in method_names}

    out = None
    if args.out_dir:
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
        suffix = "json" if args.format == "json" else "tsv"
        out = Path(args.out_dir) / f"predictions.{suffix}"
    if args.format == "json":
        payload = {
            "schema_version": SCHEMA_VERSION,
            "command": "predict",
            "input": args.input,
            "methods": method_names,
            "predictions": {n: [float(v) for v in predictions[n]] for n in method_names},
            "clipped": {n: [bool(v) for v in flags] for n, flags in clipped.items()},
            "averages": averages,
        }
        _write_json(out, payload)
    else:
        header = ["row"] + [f"pi_{n}" for n in method_names]
        header += [f"{n}_clipped" for n in clipped]
        rows = []
        for i in range(ds.n):
            row = [i] + [predictions[n][i] for n in method_names]
            row += [bool(clipped[n][i]) for n in clipped]
            rows.append(row)
        avg_row = ["average"] + [averages[n] for n in method_names] + [None] * len(clipped)
        rows.append(avg_row)
        _write_table(out, header, rows)
    return EXIT_OK


def _scenario_from_dict(entry, index, fallback_seed, default_ci):
    known = {"n", "target_rate", "effect_size", "sign_pattern", "replications",
             "seed", "name", "ci_level"}
    unknown = set(entry) - known
    if unknown:
        raise DataError(f"unknown scenario fields: {sorted(unknown)}")
    try:
        return ScenarioConfig(
            n=int(entry["n"]),
            target_rate=float(entry["target_rate"]),
            effect_size=float(entry["effect_size"]),
            sign_pattern=entry.get("sign_pattern", "all-positive"),
            replications=int(entry.get("replications", 200)),
            seed=int(entry.get("seed", fallback_seed + index)),
            name=entry.get("name"),
            ci_level=entry.get("ci_level", default_ci),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"invalid scenario #{index}: {exc}") from exc


def _load_scenarios(args):
    path = Path(args.input)
    if not path.exists():
        raise DataError(f"scenario file not found: {path}")
    try:
        config = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"scenario file is not valid JSON: {exc}") from exc
    methods = config.get("methods", list(METHODS) + ["ab", "au"])
    if not isinstance(methods, list) or not methods:
        raise DataError("'methods' must be a nonempty list")
    wf_tau = float(config.get("wf_tau", args.tau))
    if not 0.0 < wf_tau < 0.5:
        raise DataError("wf_tau must lie strictly between 0 and 0.5")
    default_ci = config.get("ci_level")
    base_seed = int(config.get("base_seed", args.seed))
    if "grid" in config:
        grid = config["grid"]
        replications = int(grid.get("replications", 1000))
        configs = full_scenario_grid(replications, int(grid.get("base_seed", base_seed)))
        if default_ci is not None:
            configs = [
                ScenarioConfig(
                    n=c.n, target_rate=c.target_rate, effect_size=c.effect_size,
                    sign_pattern=c.sign_pattern, replications=c.replications,
                    seed=c.seed, name=c.name, ci_level=default_ci,
                )
                for c in configs
            ]
    elif "scenarios" in config:
        configs = [
            _scenario_from_dict(entry, i, base_seed, default_ci)
            for i, entry in enumerate(config["scenarios"])
        ]
    else:
        raise DataError("scenario file needs a 'scenarios' list or a 'grid' block")
    if not configs:
        raise DataError("no scenarios defined")
    return configs, methods, wf_tau


_SUMMARY_TABLES = {
    "event_rate": (
        ["scenario", "method", "rel_bias", "rel_rmse", "n_used", "n_failed",
         "n_excluded_separation"],
        lambda s, m: [s.per_method[m].report.event_rate_rel_bias,
                      s.per_method[m].report.event_rate_rel_rmse],
    ),
    "predictions": (
        ["scenario", "method", "bias", "rmse", "c_index", "n_used", "n_failed",
         "n_excluded_separation"],
        lambda s, m: [s.per_method[m].report.pred_bias,
                      s.per_method[m].report.pred_rmse,
                      s.per_method[m].report.c_index],
    ),
    "calibration": (
        ["scenario", "method", "mean_slope", "n_used", "n_failed",
         "n_excluded_separation"],
        lambda s, m: [s.per_method[m].report.cal_slope],
    ),
    "coefficients": (
        ["scenario", "method", "abs_bias_x1000", "rmse_x1000", "n_used", "n_failed",
         "n_excluded_separation"],
        lambda s, m: [s.per_method[m].report.coef_abs_bias,
                      s.per_method[m].report.coef_rmse],
    ),
    "intervals": (
        ["scenario", "method", "coverage", "power", "width", "n_used", "n_failed",
         "n_excluded_separation"],
        lambda s, m: [s.per_method[m].ci_coverage,
                      s.per_method[m].ci_power,
                      s.per_method[m].ci_width],
    ),
}


def cmd_simulate(args):
    configs, methods, wf_tau = _load_scenarios(args)
    methods = _parse_methods(",".join(methods), _PREDICT_METHODS)
    if args.dry_run:
        sys.stdout.write(f"scenarios: {len(configs)}\n")
        for cfg in configs:
            sys.stdout.write(
                f"{cfg.name}\tn={cfg.n}\trate={cfg.target_rate:g}\ta={cfg.effect_size:g}"
                f"\t{cfg.sign_pattern}\treps={cfg.replications}\tseed={cfg.seed}\n"
            )
        return EXIT_OK
    if not args.out_dir:
        raise UsageError("simulate requires --out-dir")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    workers = resolve_workers(None)
    summaries = [
        run_scenario(cfg, methods, workers=workers, wf_tau=wf_tau)
        for cfg in configs
    ]
    if args.format == "json":
        payload = {
            "schema_version": SCHEMA_VERSION,
            "command": "simulate",
            "methods": methods,
            "scenarios": [_summary_to_dict(s) for s in summaries],
        }
        _write_json(out_dir / "summary.json", payload)
    else:
        for table, (header, extract) in _SUMMARY_TABLES.items():
            rows = []
            for summary in summaries:
                for method in summary.methods:
                    ms = summary.per_method[method]
                    rows.append(
                        [summary.config.name, method]
                        + extract(summary, method)
                        + [ms.n_used, ms.n_failed, summary.n_excluded_separation]
                    )
            _write_table(out_dir / f"{table}.tsv", header, rows)
    return EXIT_OK


def _summary_to_dict(summary):
    return {
        "scenario": summary.config.name,
        "n": summary.config.n,
        "target_rate": summary.config.target_rate,
        "effect_size": summary.config.effect_size,
        "sign_pattern": summary.config.sign_pattern,
        "replications": summary.config.replications,
        "seed": summary.config.seed,
        "n_excluded_separation": summary.n_excluded_separation,
        "methods": {
            m: {
                "event_rate_rel_bias": ms.report.event_rate_rel_bias,
                "event_rate_rel_rmse": ms.report.event_rate_rel_rmse,
                "pred_bias": ms.report.pred_bias,
                "pred_rmse": ms.report.pred_rmse,
                "coef_abs_bias": ms.report.coef_abs_bias,
                "coef_rmse": ms.report.coef_rmse,
                "cal_slope": ms.report.cal_slope,
                "c_index": ms.report.c_index,
                "n_used": ms.n_used,
                "n_failed": ms.n_failed,
                "ci_coverage": ms.ci_coverage,
                "ci_power": ms.ci_power,
                "ci_width": ms.ci_width,
            }
            for m, ms in summary.per_method.items()
        },
    }


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="rarefit",
        description="Penalized logistic regression for rare events",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("fit", "fit models on a CSV file"),
        ("predict", "fit models and emit per-row predicted probabilities"),
        ("simulate", "run simulation scenarios from a JSON config"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--input", required=True,
                       help="CSV data file (fit/predict) or scenario JSON (simulate)")
        p.add_argument("--outcome", help="name of the binary outcome column")
        p.add_argument("--covariates",
                       help="comma-separated covariate columns; empty string for "
                            "intercept-only; omitted means all other columns")
        p.add_argument("--methods", help="comma-separated method names")
        p.add_argument("--level", type=float, default=0.95,
                       help="confidence level (default 0.95)")
        p.add_argument("--tau", type=float, default=0.1,
                       help="penalty weight for the weakened Jeffreys fit (default 0.1)")
        p.add_argument("--lambda", dest="ridge_lambda", type=float, default=None,
                       help="fixed ridge strength overriding the AIC search")
        p.add_argument("--seed", type=int, default=1,
                       help="base seed for scenarios lacking one")
        p.add_argument("--format", choices=("tsv", "json"), default="tsv")
        p.add_argument("--out-dir", help="directory for output files "
                                         "(stdout if omitted; required for simulate)")
        if name == "simulate":
            p.add_argument("--dry-run", action="store_true",
                           help="validate and list the scenario grid without running")
    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command in ("fit", "predict"):
        if args.outcome is None:
            parser.error(f"{args.command} requires --outcome")
        if args.methods is None:
            parser.error(f"{args.command} requires --methods")
    try:
        if args.command == "fit":
            return cmd_fit(args)
        if args.command == "predict":
            return cmd_predict(args)
        return cmd_simulate(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
