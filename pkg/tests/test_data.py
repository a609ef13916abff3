import numpy as np
import pytest

from tscore.data import (
    CsvFormatError,
    Dataset,
    SplitSpec,
    grid_eval,
    load_csv,
    normalize,
    save_csv,
    split,
    synthetic_standin,
    toy_generate,
    toy_true_log_density,
    write_grid_csv,
)
from tscore.score import ScoreKind


def make_ds(n_normal, n_anomaly, d=2, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n_normal + n_anomaly, d))
    y = np.concatenate([np.zeros(n_normal, dtype=int), np.ones(n_anomaly, dtype=int)])
    return Dataset("demo", X, y)


# ---------------------------------------------------------------- csv


def test_load_csv_basic(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b,label\n1.5,2.0,0\n-1,0.25,1\n3,4,0\n")
    ds = load_csv(p)
    assert ds.n == 3 and ds.dim == 2
    assert ds.feature_names == ["a", "b"]
    assert np.array_equal(ds.labels, [0, 1, 0])
    assert ds.features[1, 1] == 0.25


def test_load_csv_rejects_label_only(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("label\n0\n1\n")
    with pytest.raises(CsvFormatError, match="no feature columns"):
        load_csv(p)


def test_load_csv_errors_carry_location(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,label\n1.0,0\nx,1\n")
    with pytest.raises(CsvFormatError, match="row 3.*'a'"):
        load_csv(p)
    p.write_text("a,label\n1.0,2\n")
    with pytest.raises(CsvFormatError, match="label"):
        load_csv(p)
    p.write_text("")
    with pytest.raises(CsvFormatError, match="empty"):
        load_csv(p)
    p.write_text("a,b\n1,2\n")
    with pytest.raises(CsvFormatError, match="missing required column"):
        load_csv(p)


def test_csv_round_trip_lossless(tmp_path, rng):
    ds = make_ds(20, 5, d=3)
    ds.features[0, 0] = np.pi * 1e-7  # awkward decimal expansion
    path = tmp_path / "round.csv"
    save_csv(ds, path)
    clone = load_csv(path, name=ds.name)
    assert np.array_equal(clone.features, ds.features)
    assert np.array_equal(clone.labels, ds.labels)
    assert clone.feature_names == ds.feature_names


# ---------------------------------------------------------------- normalize


def test_normalize_train_normals_standardized():
    ds = make_ds(200, 20, d=4, seed=1)
    norm, out = normalize(ds)
    normals = out.features[out.labels == 0]
    assert np.max(np.abs(normals.mean(axis=0))) < 1e-12
    assert np.max(np.abs(normals.std(axis=0) - 1)) < 1e-12


def test_normalize_constant_feature():
    X = np.column_stack([np.full(10, 3.0), np.arange(10.0)])
    ds = Dataset("const", X, np.zeros(10, dtype=int))
    norm, out = normalize(ds)
    assert norm.std[0] == 1.0
    assert np.all(out.features[:, 0] == 0.0)


def test_normalize_not_idempotent():
    ds = make_ds(50, 0, seed=2)
    ds.features[:] = 3.0 + 2.0 * ds.features
    norm, once = normalize(ds)
    twice = norm.apply(once)
    assert not np.allclose(once.features, twice.features)


def test_normalize_round_trip():
    ds = make_ds(50, 5, seed=3)
    norm, out = normalize(ds)
    back = norm.inverse(out.features)
    assert np.max(np.abs(back - ds.features)) < 1e-12


def test_normalize_excludes_anomalies_from_fit():
    ds = make_ds(100, 50, seed=4)
    ds.features[ds.labels == 1] += 100.0  # extreme anomalies
    norm, _ = normalize(ds)
    clean_mean = ds.features[ds.labels == 0].mean(axis=0)
    assert np.allclose(norm.mean, clean_mean)


# ---------------------------------------------------------------- split


def test_split_no_anomalies():
    ds = make_ds(100, 0)
    with pytest.warns(UserWarning, match="all-normal"):
        train, test = split(ds, SplitSpec(seed=0))
    assert train.n == 80 and test.n == 20
    assert train.labels.sum() == 0


def test_split_contamination_cap():
    ds = make_ds(90, 30)
    train, test = split(ds, SplitSpec(seed=1))
    assert np.sum(train.labels == 0) == 72
    assert np.sum(train.labels == 1) == 8  # 8 / 80 == 10%
    assert np.sum(test.labels == 0) == 18
    assert np.sum(test.labels == 1) == 22


def test_split_deterministic_and_partitioning():
    ds = make_ds(57, 13, seed=5)
    a_train, a_test = split(ds, SplitSpec(seed=7))
    b_train, b_test = split(ds, SplitSpec(seed=7))
    assert np.array_equal(a_train.features, b_train.features)
    assert np.array_equal(a_test.features, b_test.features)
    merged = np.vstack([a_train.features, a_test.features])
    assert merged.shape[0] == ds.n
    # multiset equality via lexicographic sort
    assert np.array_equal(
        np.sort(merged.view([("", merged.dtype)] * merged.shape[1]), axis=0),
        np.sort(ds.features.view([("", merged.dtype)] * merged.shape[1]), axis=0),
    )


def test_split_contamination_bound_holds():
    for seed in range(5):
        ds = make_ds(101, 47, seed=seed)
        train, _ = split(ds, SplitSpec(seed=seed))
        frac = np.mean(train.labels == 1)
        assert frac <= 0.1 + 1.0 / train.n


# ---------------------------------------------------------------- toy data


def test_toy_curve_point():
    # z = 0.5 with no noise sits at (0.25, 0.5); the generator follows it
    ds = toy_generate(50_000, seed=0)
    assert ds.dim == 2 and np.all(ds.labels == 0)
    n = ds.n
    assert abs(ds.features[:, 1].mean() - 0.5) < 4 * np.sqrt(0.16 / n)
    # E[x1] = E[z^2] = var + mean^2 = 0.40; Var(z^2 + e) ~ 0.205
    assert abs(ds.features[:, 0].mean() - 0.40) < 4 * np.sqrt(0.205 / n)


def test_toy_deterministic():
    a = toy_generate(100, seed=42)
    b = toy_generate(100, seed=42)
    assert np.array_equal(a.features, b.features)


def test_toy_true_density_peaks_on_curve():
    on = np.array([[0.25, 0.5]])
    off = np.array([[1.5, -1.5]])
    assert toy_true_log_density(on)[0] > toy_true_log_density(off)[0] + 5


def test_synthetic_standin_properties():
    ds = synthetic_standin(seed=0)
    assert ds.dim == 8
    assert ds.labels.sum() == 120
    assert ds.n == 720
    again = synthetic_standin(seed=0)
    assert np.array_equal(ds.features, again.features)


# ---------------------------------------------------------------- grid


def test_grid_eval_shapes(toy_model):
    header, rows = grid_eval(
        toy_model, [ScoreKind.RECONSTRUCTION], (-0.2, 1.2), (-0.2, 1.2), 2
    )
    assert header == ["x1", "x2", "score_re"]
    assert rows.shape == (4, 3)


def test_grid_eval_matches_single_point_calls(toy_model):
    from tscore.score import proposed_score

    header, rows = grid_eval(
        toy_model, [ScoreKind.PROPOSED], (-0.2, 1.2), (-0.2, 1.2), 5
    )
    for x1, x2, s in rows:
        assert s == proposed_score(toy_model, np.array([x1, x2])).total


def test_grid_eval_no_nan(toy_model):
    header, rows = grid_eval(
        toy_model,
        [ScoreKind.RECONSTRUCTION, ScoreKind.LATENT, ScoreKind.PROPOSED],
        (-0.2, 1.2),
        (-0.2, 1.2),
        100,
    )
    assert rows.shape == (10_000, 5)
    assert np.all(np.isfinite(rows))


def test_grid_eval_rejects_non_2d_models(rng):
    from test_score import linear_model

    model = linear_model(
        np.eye(3)[:, :2], np.zeros(2), np.eye(3)[:2, :], np.zeros(3)
    )
    with pytest.raises(ValueError):
        grid_eval(model, [ScoreKind.RECONSTRUCTION])


def test_grid_csv_round_trip(tmp_path, toy_model):
    header, rows = grid_eval(
        toy_model, [ScoreKind.RECONSTRUCTION], (-0.2, 1.2), (-0.2, 1.2), 3
    )
    path = tmp_path / "grid.csv"
    write_grid_csv(path, header, rows)
    text = path.read_text().strip().splitlines()
    assert text[0] == "x1,x2,score_re"
    assert len(text) == 10
    back = np.array([[float(v) for v in line.split(",")] for line in text[1:]])
    assert np.array_equal(back, rows)
