"""Command line interface.

Subcommands: ``toy``, ``train``, ``predict``, ``eval``, ``tune`` and
``crossing-demo``. Training parameters can come from a JSON file passed with
``--config``; explicit flags override file values, which override defaults.

On failure a single line ``error: <Kind>: <message>`` goes to stderr and the
exit status is 1 (2 for usage errors).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .booster import BoosterConfig, fit, load_model, predict, save_model, single_point_update
from .data import (
    Dataset,
    chronological,
    kfold,
    load_csv,
    make_toy,
    read_matrix_csv,
    standardize_targets,
    true_toy_quantile,
    write_csv,
    write_matrix_csv,
)
from .loss import DEFAULT_DELTA, DEFAULT_LEVELS, DEFAULT_S, LossSpec, QuantileLevels
from .metrics import evaluate
from .tree import TreeParams
from .tune import Grid, grid_search, refit_final

# flag name -> (config key, type, default)
TRAIN_PARAMS = {
    "levels": (str, ",".join(f"{t:g}" for t in DEFAULT_LEVELS)),
    "loss": (str, "arctan"),
    "s": (float, DEFAULT_S),
    "delta": (float, DEFAULT_DELTA),
    "n_estimators": (int, 400),
    "learning_rate": (float, 0.05),
    "lambda": (float, 1.0),
    "gamma": (float, 0.1),
    "max_depth": (int, 3),
    "max_delta_step": (float, 0.5),
    "min_child_weight": (float, 0.0),
    "base_score": (str, "empirical_quantiles"),
    "seed": (int, 0),
}

SCENARIOS = (
    ("1: different second derivative and gradient", lambda a: (-a, a / 10.0)),
    ("2: different gradient", lambda a: (-a, a)),
    ("3: different second derivative", lambda a: (a / 2.0, a)),
)


class CLIError(Exception):
    pass


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model parameters (defaults follow the recommended settings)")
    g.add_argument("--config", help="JSON file with parameter values; flags take precedence")
    for name, (typ, default) in TRAIN_PARAMS.items():
        flag = "--" + name.replace("_", "-")
        kwargs = {"type": typ, "default": None, "help": f"default: {default}"}
        if name == "loss":
            kwargs["choices"] = ("arctan", "exponential", "huber")
        g.add_argument(flag, dest=name, **kwargs)


def resolve_params(args) -> dict:
    values = {k: d for k, (_, d) in TRAIN_PARAMS.items()}
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_vals = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CLIError(f"cannot read config {args.config}: {exc}") from None
        unknown = set(file_vals) - set(values)
        if unknown:
            raise CLIError(f"unknown config keys {sorted(unknown)}")
        for k, v in file_vals.items():
            if k == "levels" and isinstance(v, list):
                v = ",".join(str(t) for t in v)
            values[k] = TRAIN_PARAMS[k][0](v) if v is not None else v
    for k in TRAIN_PARAMS:
        v = getattr(args, k, None)
        if v is not None:
            values[k] = v
    return values


def config_from_params(p: dict) -> BoosterConfig:
    mds = p["max_delta_step"]
    return BoosterConfig(
        n_estimators=p["n_estimators"],
        learning_rate=p["learning_rate"],
        loss=LossSpec(p["loss"], s=p["s"], delta=p["delta"]),
        levels=QuantileLevels.parse(p["levels"]),
        tree=TreeParams(
            max_depth=p["max_depth"],
            lam=p["lambda"],
            gamma=p["gamma"],
            min_child_weight=p["min_child_weight"],
            max_delta_step=math.inf if mds is None or mds <= 0 else mds,
        ),
        base_score_mode=p["base_score"],
        seed=p["seed"],
    )


def _prepare(ds: Dataset, standardize: bool) -> Dataset:
    return standardize_targets(ds) if standardize else ds


def _ensure_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CLIError(f"cannot create output directory {out}: {exc}") from None
    if not os.access(out, os.W_OK):
        raise CLIError(f"output directory {out} is not writable")
    return out


# --- commands ----------------------------------------------------------------


def cmd_toy(args) -> None:
    out = _ensure_dir(args.out)
    levels = QuantileLevels.parse(args.levels)
    write_csv(make_toy(args.n, args.seed), out / "train.csv")
    write_csv(make_toy(args.n_test, args.seed + 1), out / "test.csv")
    x = np.linspace(0.0, 1.0, args.grid)
    q = true_toy_quantile(x[:, None], np.asarray(levels)[None, :])
    write_matrix_csv(out / "true_quantiles.csv", ["x", *levels.labels()], np.column_stack([x, q]))
    print(f"wrote {out / 'train.csv'} ({args.n} rows), {out / 'test.csv'} ({args.n_test} rows), "
          f"{out / 'true_quantiles.csv'} ({args.grid} rows)")


def cmd_train(args) -> None:
    cfg = config_from_params(resolve_params(args))
    ds = _prepare(load_csv(args.data, args.target), not args.no_standardize)
    model, history = fit(ds, cfg)
    out = Path(args.out)
    save_model(model, out)
    log_path = Path(args.log) if args.log else out.with_name(out.stem + "_log.csv")
    with open(log_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "train_pinball"])
        for rec in history:
            w.writerow([rec.iteration, repr(rec.train_pinball)])
    print(f"trained {len(model.trees)} trees on {ds.n_rows} rows; model -> {out}, log -> {log_path}")


def _feature_matrix(path, model, target) -> tuple[np.ndarray, np.ndarray | None]:
    header, M = read_matrix_csv(path)
    names = model.feature_names
    y = None
    if target in header:
        y = M[:, header.index(target)]
    if names:
        missing = [n for n in names if n not in header]
        if missing:
            raise CLIError(f"{path}: missing feature columns {missing}")
        X = M[:, [header.index(n) for n in names]]
    else:
        X = M[:, [i for i, h in enumerate(header) if h != target]]
    return X, y


def cmd_predict(args) -> None:
    model = load_model(args.model)
    X, _ = _feature_matrix(args.data, model, args.target)
    P = predict(model, X)
    write_matrix_csv(args.out, model.levels.labels(), P)
    print(f"wrote {P.shape[0]} x {P.shape[1]} predictions -> {args.out}")


def _levels_from_header(header) -> QuantileLevels:
    try:
        return QuantileLevels(float(h[1:]) for h in header if h.startswith("q"))
    except ValueError as exc:
        raise CLIError(f"cannot infer levels from prediction header {header}: {exc}") from None


def cmd_eval(args) -> None:
    header, P = read_matrix_csv(args.predictions)
    levels = QuantileLevels.parse(args.levels) if args.levels else _levels_from_header(header)
    if P.shape[1] != len(levels):
        raise CLIError(f"{P.shape[1]} prediction columns but {len(levels)} levels")
    t_header, T = read_matrix_csv(args.data)
    if args.target not in t_header:
        raise CLIError(f"{args.data}: no target column {args.target!r}")
    y = T[:, t_header.index(args.target)]
    report = evaluate(y, P, levels, args.lo, args.hi)
    text = report.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    rel_path = args.reliability or (str(Path(args.out).with_suffix("")) + "_reliability.csv" if args.out else None)
    if rel_path:
        Path(rel_path).write_text(report.reliability_csv(), encoding="utf-8")
    if args.csv_row:
        p = Path(args.csv_row)
        new = not p.exists() or p.stat().st_size == 0
        with open(p, "a", encoding="utf-8") as fh:
            if new:
                fh.write(report.csv_header() + "\n")
            fh.write(report.csv_row() + "\n")


def cmd_tune(args) -> None:
    cfg = config_from_params(resolve_params(args))
    ds = _prepare(load_csv(args.data, args.target), not args.no_standardize)
    if args.grid:
        try:
            grid = Grid.from_dict(json.loads(Path(args.grid).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise CLIError(f"cannot read grid {args.grid}: {exc}") from None
    else:
        grid = Grid()
    if args.plan == "kfold":
        plan = kfold(ds.n_rows, args.folds, cfg.seed)
    else:
        fr = [float(v) for v in args.fractions.split(",")]
        if len(fr) != 3:
            raise CLIError("--fractions needs three comma separated values")
        plan = chronological(ds.n_rows, *fr)
    total = len(grid)
    print(f"grid search over {total} cells, plan {args.plan}", file=sys.stderr)

    def progress(i, n, row):
        if not args.quiet:
            print(f"cell {i}/{n} {row['cell']} mean={row['mean_score']:.6g}", file=sys.stderr)

    result = grid_search(ds, cfg, grid, plan, progress=progress, n_jobs=args.threads)
    text = result.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    if args.table:
        Path(args.table).write_text(result.table_csv(), encoding="utf-8")
    if args.refit:
        model, rows = refit_final(ds, result, plan)
        save_model(model, args.refit)
        print(f"refit best cell {result.best_cell} on {rows.size} rows -> {args.refit}", file=sys.stderr)


def crossing_table(levels, loss: LossSpec, lam: float, learning_rate: float, gaps, y: float = 0.0) -> list[dict]:
    rows = []
    for label, make in SCENARIOS:
        for a in gaps:
            q = make(a)
            r = single_point_update(y, q, levels, loss, lam=lam, learning_rate=learning_rate)
            rows.append({
                "scenario": label,
                "gap": float(a),
                "y": y,
                "before": r.before.tolist(),
                "grad": r.grad.tolist(),
                "hess": r.hess.tolist(),
                "after": r.after.tolist(),
                "crossed": r.crossed,
            })
    return rows


def cmd_crossing_demo(args) -> None:
    levels = QuantileLevels.parse(args.levels)
    if len(levels) != 2:
        raise CLIError("crossing demo takes exactly two levels (lower, upper)")
    loss = LossSpec(args.loss, s=args.s, delta=args.delta)
    gaps = [float(v) for v in args.gaps.split(",")]
    rows = crossing_table(levels, loss, args.reg_lambda, args.learning_rate, gaps)
    lab = levels.labels()
    header = ["scenario", "gap", "y", *(f"{l}_before" for l in lab), *(f"{l}_after" for l in lab), "crossed"]
    lines = [header]
    for r in rows:
        lines.append([r["scenario"], repr(r["gap"]), repr(r["y"]), *map(repr, r["before"]), *map(repr, r["after"]),
                      str(r["crossed"]).lower()])
    stream = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(stream, lineterminator="\n")
        w.writerows(lines)
    finally:
        if args.out:
            stream.close()
    n_crossed = sum(r["crossed"] for r in rows)
    print(f"{n_crossed} of {len(rows)} updates crossed", file=sys.stderr)


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="arctanboost", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("toy", help="write the sine toy data and its true quantiles")
    t.add_argument("--n", type=int, default=1000)
    t.add_argument("--n-test", type=int, default=1000)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--grid", type=int, default=101, help="number of x grid points for true quantiles")
    t.add_argument("--levels", default=TRAIN_PARAMS["levels"][1])
    t.add_argument("--out", default=".")
    t.set_defaults(func=cmd_toy)

    tr = sub.add_parser("train", help="fit a model")
    tr.add_argument("--data", required=True)
    tr.add_argument("--target", default="y")
    tr.add_argument("--out", required=True, help="model JSON path")
    tr.add_argument("--log", help="training log CSV (default: <out stem>_log.csv)")
    tr.add_argument("--no-standardize", action="store_true")
    _add_train_flags(tr)
    tr.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", help="predict quantiles with a saved model")
    pr.add_argument("--model", required=True)
    pr.add_argument("--data", required=True)
    pr.add_argument("--target", default="y", help="column ignored if present")
    pr.add_argument("--out", required=True)
    pr.set_defaults(func=cmd_predict)

    ev = sub.add_parser("eval", help="coverage, width, pinball, crossings, reliability")
    ev.add_argument("--predictions", required=True)
    ev.add_argument("--data", required=True, help="CSV holding the target column")
    ev.add_argument("--target", default="y")
    ev.add_argument("--levels", help="default: parsed from prediction header")
    ev.add_argument("--lo", type=float, default=0.05)
    ev.add_argument("--hi", type=float, default=0.95)
    ev.add_argument("--out", help="report JSON (default: stdout)")
    ev.add_argument("--reliability", help="reliability CSV path")
    ev.add_argument("--csv-row", help="append a flat CSV row to this file")
    ev.set_defaults(func=cmd_eval)

    tu = sub.add_parser("tune", help="grid search with k-fold or chronological validation")
    tu.add_argument("--data", required=True)
    tu.add_argument("--target", default="y")
    tu.add_argument("--grid", help="grid JSON with keys n_estimators, lambda, gamma, max_depth")
    tu.add_argument("--plan", choices=("kfold", "chronological"), default="kfold")
    tu.add_argument("--folds", type=int, default=3)
    tu.add_argument("--fractions", default="0.8,0.1,0.1")
    tu.add_argument("--out", help="TuneResult JSON (default: stdout)")
    tu.add_argument("--table", help="per-cell CSV table")
    tu.add_argument("--refit", help="refit best config and save the model here")
    tu.add_argument("--no-standardize", action="store_true")
    tu.add_argument("--threads", type=int, default=1)
    tu.add_argument("--quiet", action="store_true")
    _add_train_flags(tu)
    tu.set_defaults(func=cmd_tune)

    cd = sub.add_parser("crossing-demo", help="single-datum update scenarios for two levels")
    cd.add_argument("--levels", default="0.85,0.95")
    cd.add_argument("--loss", choices=("arctan", "exponential", "huber"), default="arctan")
    cd.add_argument("--s", type=float, default=0.1)
    cd.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    cd.add_argument("--lambda", dest="reg_lambda", type=float, default=0.0)
    cd.add_argument("--learning-rate", type=float, default=1.0)
    cd.add_argument("--gaps", default="0.5,1,2")
    cd.add_argument("--out", help="CSV path (default: stdout)")
    cd.set_defaults(func=cmd_crossing_demo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s: %(message)s")
    try:
        args.func(args)
    except (CLIError, ValueError, OSError, RuntimeError) as exc:
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
