"""Readers for the tscore output files.

Only the documented file schemas are consumed here; nothing imports the
producing library. Schema violations raise SchemaError naming the missing
column or field.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

RECORD_VERSION = 1

SCORE_LABELS = {
    "score_re": "reconstruction error",
    "score_pz": "latent likelihood",
    "score_proposed": "proposed score",
    "score_proposed_enc": "proposed score (encoder)",
}

KIND_LABELS = {
    "re": "reconstruction error",
    "pz": "latent likelihood",
    "proposed": "proposed score",
    "proposed_enc": "proposed score (encoder)",
}


class SchemaError(ValueError):
    """Input file does not match the documented schema."""


@dataclass
class GridTable:
    """Row-major score grid: coordinates plus one column per score kind."""

    x1: np.ndarray
    x2: np.ndarray
    scores: dict[str, np.ndarray]  # column name -> values


def read_grid_csv(path) -> GridTable:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        for col in ("x1", "x2"):
            if col not in header:
                raise SchemaError(f"{path}: missing column {col!r}")
        score_cols = [h for h in header if h.startswith("score_")]
        if not score_cols:
            raise SchemaError(f"{path}: no score_* columns")
        rows = [row for row in reader if row]
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    data = np.array(rows, dtype=np.float64)
    idx = {h: i for i, h in enumerate(header)}
    return GridTable(
        x1=data[:, idx["x1"]],
        x2=data[:, idx["x2"]],
        scores={c: data[:, idx[c]] for c in score_cols},
    )


RECORD_FIELDS = (
    "dataset",
    "split_index",
    "config_index",
    "score_kind",
    "train_auc",
    "test_auc",
    "selection_metric",
    "failed",
)


def read_records_jsonl(path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            if doc.get("v") != RECORD_VERSION:
                raise SchemaError(f"{path}:{lineno}: unsupported record version")
            for field in RECORD_FIELDS:
                if field not in doc:
                    raise SchemaError(f"{path}:{lineno}: missing field {field!r}")
            records.append(doc)
    if not records:
        raise SchemaError(f"{path}: no records")
    return records


def select_per_split(records: list[dict], kind: str, regime: str) -> dict[int, dict]:
    """Best record per split under the documented selection rules.

    supervised: highest train_auc; unsupervised: lowest selection_metric for
    the "re" kind, highest otherwise. Ties go to the lowest config_index.
    """
    out: dict[int, dict] = {}
    pool = [
        r
        for r in records
        if r["score_kind"] == kind and not r["failed"] and r["test_auc"] is not None
    ]
    for rec in sorted(pool, key=lambda r: r["config_index"]):
        si = rec["split_index"]
        cur = out.get(si)
        if cur is None:
            out[si] = rec
            continue
        if regime == "supervised":
            a = -np.inf if rec["train_auc"] is None else rec["train_auc"]
            b = -np.inf if cur["train_auc"] is None else cur["train_auc"]
            if a > b:
                out[si] = rec
        elif regime == "unsupervised":
            a, b = rec["selection_metric"], cur["selection_metric"]
            if a is None:
                continue
            if b is None or (a < b if kind == "re" else a > b):
                out[si] = rec
        else:
            raise ValueError(f"unknown regime {regime!r}")
    return out


SWEEP_COLUMNS = ("dataset", "k", "split", "score_kind", "train_auc", "test_auc")


def read_sweep_csv(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError(f"{path}: empty file")
        for col in SWEEP_COLUMNS:
            if col not in reader.fieldnames:
                raise SchemaError(f"{path}: missing column {col!r}")
        rows = []
        for row in reader:
            rows.append(
                {
                    "dataset": row["dataset"],
                    "k": int(row["k"]),
                    "split": int(row["split"]),
                    "score_kind": row["score_kind"],
                    "test_auc": float(row["test_auc"]),
                }
            )
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows
