import json

import pytest


@pytest.fixture()
def grid_csv(tmp_path):
    path = tmp_path / "grid.csv"
    lines = ["x1,x2,score_re,score_proposed"]
    for x1 in (0.0, 0.5, 1.0):
        for x2 in (0.0, 1.0):
            lines.append(f"{x1},{x2},{-(x1 + x2)},{-(x1 * x2)}")
    path.write_text("\n".join(lines) + "\n")
    return path


def record(dataset, split, config, kind, train_auc, test_auc, metric, failed=False):
    return {
        "v": 1,
        "dataset": dataset,
        "split_index": split,
        "split_seed": split,
        "config_index": config,
        "config": {},
        "score_kind": kind,
        "train_auc": train_auc,
        "test_auc": test_auc,
        "selection_metric": metric,
        "wall_time": 0.1,
        "failed": failed,
        "error": None,
        "model_file": None,
    }


@pytest.fixture()
def records_jsonl(tmp_path):
    path = tmp_path / "results.jsonl"
    rows = []
    for split in range(3):
        for config in range(2):
            rows.append(
                record("demo", split, config, "re",
                       0.6 + 0.1 * config, 0.65 + 0.05 * config, 0.5 - 0.1 * config)
            )
            rows.append(
                record("demo", split, config, "proposed",
                       0.7 + 0.1 * config, 0.75 + 0.05 * config, -2.0 + config)
            )
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    return path


@pytest.fixture()
def sweep_csv(tmp_path):
    path = tmp_path / "sweep.csv"
    lines = ["dataset,k,split,score_kind,train_auc,test_auc"]
    for k in (1, 2, 3):
        for split in (0, 1):
            lines.append(f"demo,{k},{split},re,0.8,{0.78 + 0.01 * split}")
            lines.append(f"demo,{k},{split},proposed,0.85,{0.7 + 0.05 * k}")
    path.write_text("\n".join(lines) + "\n")
    return path
