"""Command-line interface: simulate, train, predict, rank, eval.

Exit codes: 0 on success, 2 for usage and file errors, 3 for invalid data
and training failures.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .baselines import (GeometricModel, LogisticConfig, LogisticModel, fit_geometric_pointestimate,
                        fit_logistic_at_horizon, geometric_neg_log_likelihood)
from .beta_math import BetaDomainError, BetaParams
from .data import DataError, label_at_horizon
from .datafile import load_model, read_dataset, save_model, write_dataset
from .evalkit import AucUndefinedError, auc_at_horizon, risk_scores
from .gbrt import GbrtBetaLogistic, GbrtConfig, fit_gbrt
from .linear import FitConfig, LinearBetaLogistic, TrainingError, fit_linear
from .ranking import ProjectionError, format_float, rank_at_horizon, write_rank_csv
from .sbg import sbg_neg_log_likelihood, survival_curve
from .simgen import (gen_beta_geometric, gen_heterogeneity_sweep, gen_skewed_covariate,
                     gen_table1_mixture)

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 2, 3
BETA_MODELS = (LinearBetaLogistic, GbrtBetaLogistic)


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _nonneg_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _horizon_list(text: str) -> list:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("horizons must be integers >= 1")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="beta-survival",
        description="Beta-logistic discrete-time survival models.",
    )
    parser.add_argument("--threads", type=_positive_int, default=1,
                        help="accepted for compatibility; computation is single-threaded")
    parser.add_argument("--deterministic", action="store_true",
                        help="accepted for compatibility; results are always deterministic")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic dataset")
    p.add_argument("--generator", choices=["table1", "sweep", "betageom", "skewed"], required=True)
    p.add_argument("--n", type=_nonneg_int, required=True,
                   help="rows (per cohort for table1)")
    p.add_argument("--horizon", type=_positive_int, required=True, help="censoring horizon")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=float, default=1.0, help="betageom prior alpha")
    p.add_argument("--beta", type=float, default=1.0, help="betageom prior beta")
    p.add_argument("--homogeneity", type=float, default=5.0, help="sweep homogeneity level")
    p.add_argument("--noise", type=float, default=0.05, help="sweep exponential noise scale")
    p.add_argument("--dim", type=_positive_int, default=20, help="skewed feature dimension")

    p = sub.add_parser("train", help="fit a model and write it as JSON")
    p.add_argument("--model", required=True,
                   choices=["betalogistic-linear", "betalogistic-gbrt", "logistic", "geometric"])
    p.add_argument("--data", required=True)
    p.add_argument("--horizon", type=_positive_int, help="labeling horizon (logistic only)")
    p.add_argument("--config", help="JSON file of optimizer settings")
    p.add_argument("--out-model", required=True)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("predict", help="per-row predictions and survival curves")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--horizon", type=_positive_int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("rank", help="rank rows by median risk at a horizon")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--ids-column", help="column holding item ids (default: row number)")
    p.add_argument("--horizon", type=_positive_int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="horizon AUC of one or more models")
    p.add_argument("--model", action="append", required=True,
                   help="model JSON, optionally NAME=PATH; repeatable")
    p.add_argument("--data", required=True)
    p.add_argument("--horizons", type=_horizon_list, required=True)
    p.add_argument("--out", required=True)
    return parser


def _summary(data) -> str:
    frac = float(np.mean(data.censored)) if len(data) else 0.0
    return f"n={len(data)} censored_fraction={frac:.6f}"


def cmd_simulate(args) -> int:
    if args.generator == "table1":
        data = gen_table1_mixture(args.n, args.horizon, args.seed)
    elif args.generator == "sweep":
        data = gen_heterogeneity_sweep(args.n, args.homogeneity, args.noise, args.horizon, args.seed)
    elif args.generator == "betageom":
        data = gen_beta_geometric(BetaParams(args.alpha, args.beta), args.n, args.horizon, args.seed)
    else:
        data = gen_skewed_covariate(args.n, args.dim, censor_horizon=args.horizon, seed=args.seed)
    write_dataset(data, args.out)
    print(_summary(data))
    return EXIT_OK


def _load_config(path, cls, overrides: dict):
    settings = {}
    if path:
        with open(path, encoding="utf-8") as fh:
            try:
                settings = json.load(fh)
            except json.JSONDecodeError as exc:
                raise UsageError(f"--config: invalid JSON ({exc})") from None
        if not isinstance(settings, dict):
            raise UsageError("--config must hold a JSON object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(settings) - known)
    if unknown:
        raise UsageError(f"--config: unknown setting(s) {', '.join(unknown)} for {cls.__name__}")
    for key, value in overrides.items():
        if key in known:
            settings.setdefault(key, value)
    try:
        return cls(**settings)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"--config: {exc}") from None


def _logistic_nll(model: LogisticModel, data, h: int) -> float:
    keep, y = label_at_horizon(data, h)
    s = model.decision_function(data.X[keep])
    return float(np.sum(data.weight[keep] * (np.logaddexp(0.0, s) - y * s)))


def cmd_train(args) -> int:
    if args.model == "logistic" and args.horizon is None:
        raise UsageError("--horizon is required for --model logistic")
    if args.model != "logistic" and args.horizon is not None:
        raise UsageError("--horizon applies only to --model logistic")
    ds = read_dataset(args.data)
    data = ds.data
    if args.model == "betalogistic-linear":
        config = _load_config(args.config, FitConfig, {"seed": args.seed})
        model, report = fit_linear(data, config)
        loss = sbg_neg_log_likelihood(data, model.params(data.X))
        iterations = report.epochs
    elif args.model == "betalogistic-gbrt":
        config = _load_config(args.config, GbrtConfig, {"seed": args.seed})
        model = fit_gbrt(data, config)
        loss = sbg_neg_log_likelihood(data, model.params(data.X))
        iterations = config.rounds
    elif args.model == "logistic":
        config = _load_config(args.config, LogisticConfig, {})
        model = fit_logistic_at_horizon(data, args.horizon, config)
        loss = _logistic_nll(model, data, args.horizon)
        iterations = None
    else:
        config = _load_config(args.config, LogisticConfig, {})
        model, _ = fit_geometric_pointestimate(data, config)
        loss = geometric_neg_log_likelihood(model, data)
        iterations = None
    save_model(model, args.out_model, ds.encoding)
    line = f"model={args.model} final_loss={format_float(loss)}"
    if iterations is not None:
        line += f" iterations={iterations}"
    print(line)
    if ds.missing_cells:
        print(f"note: {ds.missing_cells} missing numeric cells were imputed as 0", file=sys.stderr)
    return EXIT_OK


def _open_out(path):
    return open(path, "w", newline="", encoding="utf-8")


def cmd_predict(args) -> int:
    model, encoding = load_model(args.model)
    data = read_dataset(args.data, encoding).data
    h = args.horizon
    with _open_out(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        if isinstance(model, BETA_MODELS):
            w.writerow(["row", "alpha", "beta", "p_event_by_h"] + [f"S_{k}" for k in range(1, h + 1)])
            alpha, beta = model.params(data.X)
            curves = survival_curve(alpha, beta, h) if len(data) else np.zeros((0, h))
            for i in range(len(data)):
                w.writerow([i, format_float(alpha[i]), format_float(beta[i]),
                            format_float(1.0 - curves[i, -1])]
                           + [format_float(v) for v in curves[i]])
        elif isinstance(model, GeometricModel):
            w.writerow(["row", "theta", "p_event_by_h"] + [f"S_{k}" for k in range(1, h + 1)])
            theta = model.predict_theta(data.X)
            curves = model.survival(data.X, h)
            for i in range(len(data)):
                w.writerow([i, format_float(theta[i]), format_float(1.0 - curves[i, -1])]
                           + [format_float(v) for v in curves[i]])
        else:
            if h != model.horizon:
                print(f"note: logistic model was trained at horizon {model.horizon}; "
                      f"its probabilities refer to that horizon", file=sys.stderr)
            w.writerow(["row", "p_event_by_h"])
            p = model.predict_proba(data.X)
            for i in range(len(data)):
                w.writerow([i, format_float(p[i])])
    return EXIT_OK


def cmd_rank(args) -> int:
    model, encoding = load_model(args.model)
    if not isinstance(model, BETA_MODELS):
        raise UsageError("rank needs a beta-logistic model")
    exclude = [args.ids_column] if args.ids_column else []
    ds = read_dataset(args.data, encoding, exclude=exclude)
    data = ds.data
    if len(data) == 0:
        raise DataError("nothing to rank: the data file has no rows")
    ids = ds.extra[args.ids_column] if args.ids_column else [str(i) for i in range(len(data))]
    alpha, beta = model.params(data.X)
    items = [(ids[i], BetaParams(float(alpha[i]), float(beta[i]))) for i in range(len(data))]
    ranked = rank_at_horizon(items, args.horizon)
    write_rank_csv(ranked, args.out)
    flagged = [r.item_id for r in ranked if r.projection_failed]
    if flagged:
        print(f"note: projection failed for {len(flagged)} item(s), ranked by raw median: "
              + ", ".join(flagged[:10]), file=sys.stderr)
    return EXIT_OK


def cmd_eval(args) -> int:
    models = []
    for spec in args.model:
        name, sep, path = spec.partition("=")
        if not sep:
            name, path = Path(spec).stem, spec
        models.append((name, *load_model(path)))
    rows = []
    for name, model, encoding in models:
        data = read_dataset(args.data, encoding).data
        for h in args.horizons:
            try:
                ev = auc_at_horizon(risk_scores(model, data.X, h), data, h)
                rows.append([h, name, format_float(ev.auc), ev.n_effective])
            except AucUndefinedError as exc:
                print(f"note: {exc}", file=sys.stderr)
                rows.append([h, name, "nan", exc.n_pos + exc.n_neg])
    rows.sort(key=lambda r: r[0])
    with _open_out(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["horizon", "model", "auc", "n_effective"])
        w.writerows(rows)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "train": cmd_train, "predict": cmd_predict,
            "rank": cmd_rank, "eval": cmd_eval}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, TrainingError, BetaDomainError, ProjectionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
