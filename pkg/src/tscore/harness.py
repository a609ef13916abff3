"""Experiment machinery: AUC, grid search, model selection, result records.

Scores follow the convention that anomalies are expected to score LOW, so
the AUC here is P(score_anomaly < score_normal) + 0.5 P(tie) - i.e. the
Mann-Whitney statistic computed on negated scores. Results are appended to
a JSON-lines file (schema field ``v: 1``), one record per
(config, split, score kind), which makes interrupted runs resumable.
"""

from __future__ import annotations

import csv
import itertools
import json
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace, asdict
from pathlib import Path

import numpy as np

from .data import Dataset, SplitSpec, normalize, split
from .score import ScoreKind, score_batch
from .train import TrainConfig, TrainedModel, TrainingDiverged, save_model, train

Array = np.ndarray

RECORD_VERSION = 1

SUPERVISED = "supervised"
UNSUPERVISED = "unsupervised"
REGIMES = (SUPERVISED, UNSUPERVISED)


class UndefinedAucError(ValueError):
    """AUC is undefined when only one class is present."""


def auc(scores, labels) -> float:
    """Area under the ROC curve with anomalies as the low-score class.

    Equals the pair statistic P(score_anomaly < score_normal) plus half the
    tie probability, computed exactly via average ranks.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be equal-length vectors")
    n_pos = int(np.count_nonzero(y == 1))
    n_neg = int(np.count_nonzero(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAucError("both classes must be present")
    x = -s  # anomalies should now rank high
    uniq, inv, counts = np.unique(x, return_inverse=True, return_counts=True)
    avg_rank = np.cumsum(counts) - (counts - 1) / 2.0
    ranks = avg_rank[inv]
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass
class HyperGrid:
    """Cartesian hyper-parameter grid plus fixed training settings.

    Defaults mirror the benchmark setup: widths {32, 64}, latent dims
    {2, 4, 9}, mixture sizes {1, 4, 16} over a vMF mixture prior, kernel
    widths {0.001, 0.01, 0.1, 1} and beta {0.01, 0.1, 1, 10}.
    """

    hidden_widths: list[int] = field(default_factory=lambda: [32, 64])
    latent_dims: list[int] = field(default_factory=lambda: [2, 4, 9])
    mixture_sizes: list[int] = field(default_factory=lambda: [1, 4, 16])
    kernel_widths: list[float] = field(default_factory=lambda: [0.001, 0.01, 0.1, 1.0])
    betas: list[float] = field(default_factory=lambda: [0.01, 0.1, 1.0, 10.0])
    prior_kind: str = "vmf-mixture"
    steps: int = 10000
    batch_size: int = 100
    learning_rate: float = 1e-3
    vmf_kappa: float = 10.0
    component_variance: float = 1.0
    n_hidden_layers: int = 3

    def __post_init__(self):
        for name in ("hidden_widths", "latent_dims", "mixture_sizes", "kernel_widths", "betas"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")

    @classmethod
    def from_file(cls, path) -> "HyperGrid":
        with open(path, encoding="utf-8") as fh:
            return cls(**json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)


def expand_grid(grid: HyperGrid, data_dim: int) -> list[TrainConfig]:
    """All grid configs with latent_dim <= data_dim, in stable order."""
    configs = []
    for h, k, m, c, b in itertools.product(
        grid.hidden_widths,
        grid.latent_dims,
        grid.mixture_sizes,
        grid.kernel_widths,
        grid.betas,
    ):
        if k > data_dim:
            continue
        configs.append(
            TrainConfig(
                hidden_width=h,
                latent_dim=k,
                mixture_components=m,
                prior_kind=grid.prior_kind,
                kernel_width=c,
                beta=b,
                batch_size=grid.batch_size,
                steps=grid.steps,
                learning_rate=grid.learning_rate,
                vmf_kappa=grid.vmf_kappa,
                component_variance=grid.component_variance,
                n_hidden_layers=grid.n_hidden_layers,
            )
        )
    if not configs:
        raise ValueError("grid is empty after the latent <= data dim filter")
    return configs


@dataclass
class EvalRecord:
    """One (dataset, split, config, score kind) result row."""

    dataset: str
    split_index: int
    split_seed: int
    config_index: int
    config: dict
    score_kind: str
    train_auc: float | None
    test_auc: float | None
    selection_metric: float | None
    wall_time: float
    failed: bool = False
    error: str | None = None
    model_file: str | None = None

    def to_json_line(self) -> str:
        doc = {"v": RECORD_VERSION}
        doc.update(asdict(self))
        return json.dumps(doc)

    @classmethod
    def from_json_line(cls, line: str) -> "EvalRecord":
        doc = json.loads(line)
        if doc.pop("v", None) != RECORD_VERSION:
            raise ValueError("unsupported record version")
        return cls(**doc)

    @property
    def key(self) -> tuple:
        return (self.dataset, self.split_index, self.config_index, self.score_kind)


def load_records(path) -> list[EvalRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(EvalRecord.from_json_line(line))
    return records


def select_model(
    records: list[EvalRecord], kind: ScoreKind, regime: str
) -> EvalRecord:
    """Pick the best config among records of one dataset + split.

    Supervised selection maximizes train AUC. Unsupervised selection uses
    the label-free train-set metric: lowest mean squared residual for the
    reconstruction score, highest mean train log-score otherwise. Ties go
    to the earliest config in grid order.
    """
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    pool = [r for r in records if r.score_kind == kind.value and not r.failed]
    if not pool:
        raise ValueError("no usable records to select from")
    pool.sort(key=lambda r: r.config_index)
    if regime == SUPERVISED:
        key = lambda r: -np.inf if r.train_auc is None else r.train_auc
        return max(pool, key=key)
    if kind == ScoreKind.RECONSTRUCTION:
        key = lambda r: np.inf if r.selection_metric is None else r.selection_metric
        return min(pool, key=key)
    key = lambda r: -np.inf if r.selection_metric is None else r.selection_metric
    return max(pool, key=key)


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(tuple(parts)).generate_state(1)[0])


def _safe_auc(scores: Array, labels: Array) -> float | None:
    try:
        return auc(scores, labels)
    except UndefinedAucError:
        return None


def _evaluate_unit(args) -> list[dict]:
    """Train one config on one split and score it; returns record dicts."""
    (
        dataset_name,
        split_index,
        split_seed,
        config_index,
        config_dict,
        train_X,
        train_y,
        test_X,
        test_y,
        kinds,
        sigma2_mode,
        model_path,
    ) = args
    config = TrainConfig.from_dict(config_dict)
    t0 = time.perf_counter()
    base = dict(
        dataset=dataset_name,
        split_index=split_index,
        split_seed=split_seed,
        config_index=config_index,
        config=config.to_dict(),
    )
    try:
        model = train(config, train_X)
    except TrainingDiverged as exc:
        wall = time.perf_counter() - t0
        return [
            dict(
                base,
                score_kind=k.value,
                train_auc=None,
                test_auc=None,
                selection_metric=None,
                wall_time=wall,
                failed=True,
                error=str(exc),
                model_file=None,
            )
            for k in kinds
        ]
    if model_path is not None:
        save_model(model, model_path)
    sigma2 = model.sigma2_re if sigma2_mode == "sigma2_re" else None
    train_scores = score_batch(model, train_X, list(kinds), sigma2=sigma2)
    test_scores = score_batch(model, test_X, list(kinds), sigma2=sigma2)
    resid2 = np.sum((train_X - model.reconstruct(train_X)) ** 2, axis=1)
    wall = time.perf_counter() - t0
    records = []
    for k in kinds:
        if k == ScoreKind.RECONSTRUCTION:
            metric = float(resid2.mean())
        else:
            metric = float(train_scores[k].mean())
        records.append(
            dict(
                base,
                score_kind=k.value,
                train_auc=_safe_auc(train_scores[k], train_y),
                test_auc=_safe_auc(test_scores[k], test_y),
                selection_metric=metric,
                wall_time=wall,
                failed=False,
                error=None,
                model_file=str(model_path) if model_path is not None else None,
            )
        )
    return records


def run_experiment(
    ds: Dataset,
    grid: HyperGrid,
    out_path,
    splits: int = 5,
    kinds: tuple[ScoreKind, ...] = (ScoreKind.RECONSTRUCTION, ScoreKind.PROPOSED),
    regimes: tuple[str, ...] = REGIMES,
    master_seed: int = 0,
    jobs: int = 1,
    summary_path=None,
    models_dir=None,
    sigma2_mode: str = "beta",
) -> tuple[list[EvalRecord], list[dict]]:
    """Train the whole grid on every split and append records to out_path.

    Completed (config, split) pairs found in an existing results file are
    skipped, so interrupted runs resume without retraining. Work units run
    on a bounded worker pool; records are written by this process only, in
    deterministic order.
    """
    out_path = Path(out_path)
    if models_dir is None:
        models_dir = Path(str(out_path) + ".models")
    else:
        models_dir = Path(models_dir)
    models_dir.mkdir(parents=True, exist_ok=True)

    existing: dict[tuple, EvalRecord] = {}
    if out_path.exists():
        for rec in load_records(out_path):
            existing[rec.key] = rec

    units = []
    for split_index in range(splits):
        split_seed = _derive_seed(master_seed, 101, split_index)
        train_ds, test_ds = split(ds, SplitSpec(seed=split_seed))
        norm, train_n = normalize(train_ds)
        test_n = norm.apply(test_ds)
        configs = expand_grid(grid, ds.dim)
        for config_index, config in enumerate(configs):
            done = all(
                (ds.name, split_index, config_index, k.value) in existing
                for k in kinds
            )
            if done:
                continue
            seed = _derive_seed(master_seed, 202, split_index, config_index)
            config = replace(config, seed=seed)
            model_path = models_dir / (
                f"{ds.name}_s{split_index:02d}_c{config_index:04d}.json"
            )
            units.append(
                (
                    ds.name,
                    split_index,
                    split_seed,
                    config_index,
                    config.to_dict(),
                    train_n.features,
                    train_n.labels,
                    test_n.features,
                    test_n.labels,
                    tuple(kinds),
                    sigma2_mode,
                    model_path,
                )
            )

    new_records: list[EvalRecord] = []
    with open(out_path, "a", encoding="utf-8") as fh:
        def _consume(result: list[dict]):
            for doc in result:
                rec = EvalRecord(**doc)
                if rec.key in existing:
                    # partially-complete unit from a resume with different
                    # kinds: keep the already-recorded result
                    continue
                fh.write(rec.to_json_line() + "\n")
                new_records.append(rec)
            fh.flush()

        if jobs <= 1:
            for unit in units:
                _consume(_evaluate_unit(unit))
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for result in pool.map(_evaluate_unit, units, chunksize=1):
                    _consume(result)

    records = list(existing.values()) + new_records
    summary = summarize(records, kinds, regimes)
    if summary_path is not None:
        write_summary_csv(summary_path, summary)
    return records, summary


def summarize(
    records: list[EvalRecord],
    kinds: tuple[ScoreKind, ...],
    regimes: tuple[str, ...] = REGIMES,
) -> list[dict]:
    """Per dataset x kind x regime: spread of the selected models' test AUC."""
    summary = []
    datasets = sorted({r.dataset for r in records})
    for dataset in datasets:
        ds_records = [r for r in records if r.dataset == dataset]
        split_ids = sorted({r.split_index for r in ds_records})
        for kind in kinds:
            for regime in regimes:
                chosen: list[float] = []
                for si in split_ids:
                    pool = [r for r in ds_records if r.split_index == si]
                    try:
                        rec = select_model(pool, kind, regime)
                    except ValueError:
                        continue
                    if rec.test_auc is not None:
                        chosen.append(rec.test_auc)
                if not chosen:
                    continue
                arr = np.array(chosen)
                summary.append(
                    {
                        "dataset": dataset,
                        "score_kind": kind.value,
                        "regime": regime,
                        "n_splits": len(chosen),
                        "mean_auc": float(arr.mean()),
                        "median_auc": float(np.median(arr)),
                        "min_auc": float(arr.min()),
                        "max_auc": float(arr.max()),
                    }
                )
    return summary


SUMMARY_COLUMNS = [
    "dataset",
    "score_kind",
    "regime",
    "n_splits",
    "mean_auc",
    "median_auc",
    "min_auc",
    "max_auc",
]


def write_summary_csv(path, summary: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        writer.writeheader()
        for row in summary:
            writer.writerow(row)


SWEEP_COLUMNS = ["dataset", "k", "split", "score_kind", "train_auc", "test_auc"]


def latent_sweep(
    ds: Dataset,
    base_config: TrainConfig,
    k_values: list[int],
    out_path=None,
    splits: int = 5,
    kinds: tuple[ScoreKind, ...] = (ScoreKind.RECONSTRUCTION, ScoreKind.PROPOSED),
    master_seed: int = 0,
    jobs: int = 1,
) -> list[dict]:
    """Train per latent dimension across splits; returns (and writes) rows.

    Each row: dataset, k, split, score_kind, train_auc, test_auc.
    """
    for k in k_values:
        if not 1 <= k <= ds.dim:
            raise ValueError(f"latent dim {k} outside [1, {ds.dim}]")
    units = []
    for split_index in range(splits):
        split_seed = _derive_seed(master_seed, 301, split_index)
        train_ds, test_ds = split(ds, SplitSpec(seed=split_seed))
        norm, train_n = normalize(train_ds)
        test_n = norm.apply(test_ds)
        for ki, k in enumerate(k_values):
            config = replace(
                base_config,
                latent_dim=k,
                seed=_derive_seed(master_seed, 302, split_index, k),
            )
            units.append(
                (
                    ds.name,
                    split_index,
                    split_seed,
                    ki,
                    config.to_dict(),
                    train_n.features,
                    train_n.labels,
                    test_n.features,
                    test_n.labels,
                    tuple(kinds),
                    "beta",
                    None,
                )
            )

    rows: list[dict] = []

    def _consume(result: list[dict]):
        for doc in result:
            if doc["failed"]:
                warnings.warn(
                    f"k={k_values[doc['config_index']]} split={doc['split_index']}: "
                    f"{doc['error']}"
                )
                continue
            rows.append(
                {
                    "dataset": doc["dataset"],
                    "k": k_values[doc["config_index"]],
                    "split": doc["split_index"],
                    "score_kind": doc["score_kind"],
                    "train_auc": doc["train_auc"],
                    "test_auc": doc["test_auc"],
                }
            )

    if jobs <= 1:
        for unit in units:
            _consume(_evaluate_unit(unit))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for result in pool.map(_evaluate_unit, units, chunksize=1):
                _consume(result)

    if out_path is not None:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
            writer.writeheader()
            for row in rows:
                writer.writerow(row)
    return rows
