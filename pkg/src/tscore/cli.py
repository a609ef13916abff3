"""Command-line interface.

Subcommands: train, score, experiment, toy-figure, latent-sweep, fetch-data.
Exit codes: 0 success, 1 usage error (bad flags, missing files), 2 runtime
error. All randomness is governed by --seed (env TSCORE_SEED as fallback).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import data as data_mod
from .harness import (
    REGIMES,
    HyperGrid,
    latent_sweep,
    run_experiment,
)
from .score import ScoreKind, score_batch
from .toy import TOY_CONFIG, toy_figure
from .train import TrainConfig, load_model, save_model, train

SEED_ENV = "TSCORE_SEED"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _build_parser() -> _Parser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="tscore", description=__doc__, formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_seed(p):
        p.add_argument(
            "--seed",
            type=int,
            default=None,
            help=f"master random seed (default: ${SEED_ENV} or 0)",
        )

    p = sub.add_parser("train", help="train one model on a dataset CSV", formatter_class=fmt)
    p.add_argument("--data", required=True, help="dataset CSV with a label column")
    p.add_argument("--config", default=None, help="JSON file with training settings")
    p.add_argument("--out", required=True, help="output model file")
    add_seed(p)

    p = sub.add_parser("score", help="append score columns to a dataset CSV", formatter_class=fmt)
    p.add_argument("--model", required=True, help="trained model file")
    p.add_argument("--data", required=True, help="dataset CSV to score")
    p.add_argument(
        "--kinds",
        default="re,pz,proposed",
        help="comma list of score kinds (re, pz, proposed, proposed_enc)",
    )
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument(
        "--sigma2",
        default="beta",
        help="residual variance for scores: 'beta', 're' (fitted), or a number",
    )
    p.add_argument("--refine", action="store_true", help="refine latents by descent")
    add_seed(p)

    p = sub.add_parser("experiment", help="grid search over splits with selection", formatter_class=fmt)
    p.add_argument("--data", required=True, help="dataset CSV")
    p.add_argument("--grid", required=True, help="JSON grid file (HyperGrid keys)")
    p.add_argument("--splits", type=int, default=5, help="number of train/test splits")
    p.add_argument("--out", required=True, help="results JSON-lines file")
    p.add_argument("--summary", default=None, help="summary CSV (default: <out>.summary.csv)")
    p.add_argument("--models-dir", default=None, help="directory for model files")
    p.add_argument("--kinds", default="re,proposed", help="comma list of score kinds")
    p.add_argument("--jobs", type=int, default=os.cpu_count(), help="worker processes")
    add_seed(p)

    p = sub.add_parser("toy-figure", help="train the parabola toy and write its score grid", formatter_class=fmt)
    p.add_argument("--out", required=True, help="grid CSV output")
    p.add_argument("--model-out", default=None, help="also save the toy model here")
    p.add_argument("--samples", type=int, default=2000, help="training sample count")
    p.add_argument("--steps", type=int, default=TOY_CONFIG.steps, help="training steps")
    p.add_argument("--resolution", type=int, default=100, help="grid resolution per axis")
    add_seed(p)

    p = sub.add_parser("latent-sweep", help="AUC vs latent dimension table", formatter_class=fmt)
    p.add_argument("--data", required=True, help="dataset CSV")
    p.add_argument("--k", required=True, help="latent dims, e.g. '1..8' or '1,2,4'")
    p.add_argument("--out", required=True, help="sweep CSV output")
    p.add_argument("--splits", type=int, default=5, help="number of splits")
    p.add_argument("--config", default=None, help="JSON base training settings")
    p.add_argument("--kinds", default="re,proposed", help="comma list of score kinds")
    p.add_argument("--jobs", type=int, default=os.cpu_count(), help="worker processes")
    add_seed(p)

    p = sub.add_parser("fetch-data", help="download and convert a benchmark dataset", formatter_class=fmt)
    p.add_argument("--name", default="synthetic", help="dataset name (see --list)")
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--synthetic", action="store_true", help="generate the offline stand-in")
    p.add_argument("--list", action="store_true", help="list known dataset names")
    add_seed(p)
    return parser


def _seed_of(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    return int(env) if env else 0


def _parse_kinds(text: str) -> list[ScoreKind]:
    return [ScoreKind.parse(part.strip()) for part in text.split(",") if part.strip()]


def _parse_krange(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(part) for part in text.split(",") if part.strip()]


def _require_file(path: str):
    if not Path(path).is_file():
        raise _UsageError(f"tscore: error: no such file: {path}")


def _load_train_config(path: str | None, seed: int) -> TrainConfig:
    doc = {}
    if path is not None:
        _require_file(path)
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    doc["seed"] = seed if seed is not None else doc.get("seed", 0)
    return TrainConfig.from_dict(doc)


def _cmd_train(args) -> int:
    _require_file(args.data)
    config = _load_train_config(args.config, _seed_of(args))
    ds = data_mod.load_csv(args.data)
    model = train(config, ds.features)
    save_model(model, args.out)
    print(
        f"trained on {ds.name}: n={ds.n} d={ds.dim} k={config.latent_dim} "
        f"final_loss={model.final_loss:.6g} sigma2_re={model.sigma2_re:.6g}"
    )
    return 0


def _cmd_score(args) -> int:
    _require_file(args.model)
    _require_file(args.data)
    kinds = _parse_kinds(args.kinds)
    model = load_model(args.model)
    ds = data_mod.load_csv(args.data)
    if ds.dim != model.data_dim:
        raise ValueError(
            f"dimension mismatch: model expects d={model.data_dim}, "
            f"data has d={ds.dim}"
        )
    if args.sigma2 == "beta":
        sigma2 = None
    elif args.sigma2 == "re":
        sigma2 = model.sigma2_re
    else:
        sigma2 = float(args.sigma2)
    rng = np.random.default_rng(_seed_of(args))
    scores = score_batch(
        model, ds.features, kinds, sigma2=sigma2, refine=args.refine, rng=rng
    )
    import csv as _csv

    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(ds.feature_names + ["label"] + [k.column for k in kinds])
        for i in range(ds.n):
            row = [repr(float(v)) for v in ds.features[i]]
            row.append(int(ds.labels[i]))
            row.extend(repr(float(scores[k][i])) for k in kinds)
            writer.writerow(row)
    print(f"scored {ds.n} rows with kinds: {', '.join(k.value for k in kinds)}")
    return 0


def _cmd_experiment(args) -> int:
    _require_file(args.data)
    _require_file(args.grid)
    ds = data_mod.load_csv(args.data)
    grid = HyperGrid.from_file(args.grid)
    kinds = tuple(_parse_kinds(args.kinds))
    summary_path = args.summary or f"{args.out}.summary.csv"
    records, summary = run_experiment(
        ds,
        grid,
        args.out,
        splits=args.splits,
        kinds=kinds,
        master_seed=_seed_of(args),
        jobs=max(1, args.jobs),
        summary_path=summary_path,
        models_dir=args.models_dir,
    )
    print(f"{len(records)} records -> {args.out}")
    for row in summary:
        print(
            f"  {row['dataset']} {row['score_kind']:<12} {row['regime']:<12} "
            f"mean={row['mean_auc']:.4f} median={row['median_auc']:.4f} "
            f"min={row['min_auc']:.4f} max={row['max_auc']:.4f}"
        )
    return 0


def _cmd_toy_figure(args) -> int:
    model = toy_figure(
        args.out,
        n_samples=args.samples,
        seed=_seed_of(args),
        steps=args.steps,
        resolution=args.resolution,
    )
    if args.model_out:
        save_model(model, args.model_out)
    print(f"toy grid ({args.resolution}x{args.resolution}) -> {args.out}")
    return 0


def _cmd_latent_sweep(args) -> int:
    _require_file(args.data)
    ds = data_mod.load_csv(args.data)
    base = _load_train_config(args.config, _seed_of(args))
    k_values = _parse_krange(args.k)
    rows = latent_sweep(
        ds,
        base,
        k_values,
        out_path=args.out,
        splits=args.splits,
        kinds=tuple(_parse_kinds(args.kinds)),
        master_seed=_seed_of(args),
        jobs=max(1, args.jobs),
    )
    print(f"{len(rows)} sweep rows -> {args.out}")
    return 0


# Column mappings for the public tabular benchmarks we can convert:
# breast-cancer-wisconsin: drop the id column, keep 9 integer features,
#   label malignant (class 4) as anomaly; rows with missing '?' are dropped.
# haberman: 3 integer features, label death within 5 years (class 2) as
#   anomaly.
_FETCHERS = {
    "breast-cancer-wisconsin": (
        "https://archive.ics.uci.edu/ml/machine-learning-databases/"
        "breast-cancer-wisconsin/breast-cancer-wisconsin.data",
        lambda cells: (cells[1:10], 1 if cells[10] == "4" else 0),
        9,
    ),
    "haberman": (
        "https://archive.ics.uci.edu/ml/machine-learning-databases/"
        "haberman/haberman.data",
        lambda cells: (cells[0:3], 1 if cells[3] == "2" else 0),
        3,
    ),
}


def _cmd_fetch_data(args) -> int:
    if args.list:
        print("known names: synthetic, " + ", ".join(sorted(_FETCHERS)))
        return 0
    if args.synthetic or args.name == "synthetic":
        ds = data_mod.synthetic_standin(seed=_seed_of(args))
        data_mod.save_csv(ds, args.out)
        print(f"synthetic stand-in ({ds.n} rows, d={ds.dim}) -> {args.out}")
        return 0
    if args.name not in _FETCHERS:
        raise _UsageError(
            f"tscore: error: unknown dataset {args.name!r}; "
            "use --list, or --synthetic for the offline stand-in"
        )
    url, convert, dim = _FETCHERS[args.name]
    import urllib.error
    import urllib.request

    try:
        with urllib.request.urlopen(url, timeout=60) as resp:
            text = resp.read().decode("utf-8")
    except (urllib.error.URLError, OSError) as exc:
        raise RuntimeError(
            f"download failed ({exc}); offline? use --synthetic instead"
        ) from exc
    rows, labels = [], []
    for line in text.splitlines():
        cells = line.strip().split(",")
        if len(cells) < dim + 1 or "?" in cells:
            continue
        feats, label = convert(cells)
        rows.append([float(v) for v in feats])
        labels.append(label)
    ds = data_mod.Dataset(args.name, np.array(rows), np.array(labels))
    data_mod.save_csv(ds, args.out)
    print(f"{args.name} ({ds.n} rows, d={ds.dim}) -> {args.out}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "score": _cmd_score,
    "experiment": _cmd_experiment,
    "toy-figure": _cmd_toy_figure,
    "latent-sweep": _cmd_latent_sweep,
    "fetch-data": _cmd_fetch_data,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (ValueError, OSError, RuntimeError, KeyError) as exc:
        print(f"tscore: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
