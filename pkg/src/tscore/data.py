"""Dataset handling: CSV in/out, standardization, splits, and generators.

CSV contract: UTF-8, header row, comma separator, decimal point, and a
column named ``label`` holding 0 (normal) or 1 (anomaly). All remaining
columns must be numeric features. Floats are written with ``repr`` so a
save/load round trip is lossless.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

Array = np.ndarray

LABEL_COLUMN = "label"


class CsvFormatError(ValueError):
    """Malformed dataset CSV; message carries row/column location."""


@dataclass
class Dataset:
    name: str
    features: Array  # (n, d)
    labels: Array  # (n,) of {0, 1}
    feature_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n, d = self.features.shape
        if self.labels.shape != (n,):
            raise ValueError("labels length must match feature rows")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain non-finite entries")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise ValueError("labels must be 0 or 1")
        if not np.any(self.labels == 0):
            raise ValueError("dataset needs at least one normal sample")
        if not self.feature_names:
            self.feature_names = [f"x{i + 1}" for i in range(d)]
        if len(self.feature_names) != d:
            raise ValueError("feature_names length must match feature columns")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, idx: Array, name: str | None = None) -> "Dataset":
        return Dataset(
            name or self.name,
            self.features[idx],
            self.labels[idx],
            list(self.feature_names),
        )


@dataclass
class SplitSpec:
    train_fraction: float = 0.8
    max_train_contamination: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")
        if not 0.0 <= self.max_train_contamination < 1.0:
            raise ValueError("max_train_contamination must lie in [0, 1)")


def load_csv(path, name: str | None = None) -> Dataset:
    """Read a dataset CSV; errors carry the offending row and column."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: file is empty") from None
        if LABEL_COLUMN not in header:
            raise CsvFormatError(f"{path}: missing required column {LABEL_COLUMN!r}")
        label_idx = header.index(LABEL_COLUMN)
        feature_names = [h for i, h in enumerate(header) if i != label_idx]
        if not feature_names:
            raise CsvFormatError(f"{path}: no feature columns besides the label")
        rows, labels = [], []
        for rownum, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise CsvFormatError(
                    f"{path}: row {rownum} has {len(row)} cells, expected {len(header)}"
                )
            vals = []
            for colnum, cell in enumerate(row):
                if colnum == label_idx:
                    if cell not in ("0", "1"):
                        raise CsvFormatError(
                            f"{path}: row {rownum}, column {header[colnum]!r}: "
                            f"label must be 0 or 1, got {cell!r}"
                        )
                    labels.append(int(cell))
                    continue
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise CsvFormatError(
                        f"{path}: row {rownum}, column {header[colnum]!r}: "
                        f"non-numeric value {cell!r}"
                    ) from None
            rows.append(vals)
        if not rows:
            raise CsvFormatError(f"{path}: no data rows")
    import os

    default = os.path.splitext(os.path.basename(str(path)))[0]
    return Dataset(name or default, np.array(rows), np.array(labels), feature_names)


def save_csv(ds: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ds.feature_names + [LABEL_COLUMN])
        for x, y in zip(ds.features, ds.labels):
            writer.writerow([repr(float(v)) for v in x] + [int(y)])


@dataclass
class Normalizer:
    """Per-feature affine transform fitted on training normals."""

    mean: Array
    std: Array  # zero-variance features get std 1

    def transform(self, X: Array) -> Array:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.std

    def inverse(self, X: Array) -> Array:
        return np.asarray(X, dtype=np.float64) * self.std + self.mean

    def apply(self, ds: Dataset) -> Dataset:
        return Dataset(ds.name, self.transform(ds.features), ds.labels, list(ds.feature_names))


def normalize(train: Dataset) -> tuple[Normalizer, Dataset]:
    """Fit standardization on the train split's normal rows, apply to all.

    Anomalies contaminating the train set are excluded from the statistics
    so they cannot distort the scale.
    """
    normals = train.features[train.labels == 0]
    if normals.shape[0] < 2:
        raise ValueError("need at least 2 normal rows to fit a normalizer")
    mean = normals.mean(axis=0)
    std = normals.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)
    norm = Normalizer(mean, std)
    return norm, norm.apply(train)


def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Anomaly-aware train/test split.

    80% of normals (rounded down) go to train; anomalies are mixed into
    train uniformly at random up to the contamination cap (their labels
    travel along for bookkeeping but must not be shown to the trainer);
    everything else goes to test.
    """
    rng = np.random.default_rng(spec.seed)
    normal_idx = np.flatnonzero(ds.labels == 0)
    anomaly_idx = np.flatnonzero(ds.labels == 1)
    normal_idx = rng.permutation(normal_idx)
    anomaly_idx = rng.permutation(anomaly_idx)

    n_train_norm = int(spec.train_fraction * len(normal_idx))
    frac = spec.max_train_contamination
    cap = int(frac * n_train_norm / (1.0 - frac)) if frac > 0 else 0
    n_train_anom = min(cap, len(anomaly_idx))

    train_idx = np.concatenate([normal_idx[:n_train_norm], anomaly_idx[:n_train_anom]])
    test_idx = np.concatenate([normal_idx[n_train_norm:], anomaly_idx[n_train_anom:]])
    train_idx = np.sort(train_idx)
    test_idx = np.sort(test_idx)
    if len(anomaly_idx) == 0:
        warnings.warn(f"{ds.name}: no anomalies; test split is all-normal")
    return ds.subset(train_idx), ds.subset(test_idx)


def toy_generate(n: int, seed: int = 0) -> Dataset:
    """Two-dimensional parabola data: x = (z^2, z) + e.

    z ~ N(0.5, variance 0.15) and e ~ N(0, 0.01 I). All samples are normal.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    z = 0.5 + np.sqrt(0.15) * rng.standard_normal(n)
    e = 0.1 * rng.standard_normal((n, 2))
    x = np.column_stack([z**2, z]) + e
    return Dataset("toy-parabola", x, np.zeros(n, dtype=np.int64), ["x1", "x2"])


def toy_true_log_density(X: Array, n_quad: int = 2001) -> Array:
    """Exact log density of the toy generator via latent quadrature.

    Marginalizes p(x | z) p(z) over z on a wide trapezoidal grid; used as an
    independent oracle for on/off-manifold decisions.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    z = np.linspace(0.5 - 10 * np.sqrt(0.15), 0.5 + 10 * np.sqrt(0.15), n_quad)
    log_pz = -0.5 * np.log(2 * np.pi * 0.15) - 0.5 * (z - 0.5) ** 2 / 0.15
    curve = np.column_stack([z**2, z])  # (q, 2)
    d2 = ((X[:, None, :] - curve[None, :, :]) ** 2).sum(axis=2)  # (n, q)
    log_like = -np.log(2 * np.pi * 0.01) - 0.5 * d2 / 0.01
    integrand = log_pz[None, :] + log_like
    m = integrand.max(axis=1, keepdims=True)
    dz = z[1] - z[0]
    return m[:, 0] + np.log(np.trapezoid(np.exp(integrand - m), dx=dz, axis=1))


def synthetic_standin(
    n_normal: int = 600,
    n_anomaly: int = 120,
    dim: int = 8,
    intrinsic_dim: int = 3,
    seed: int = 0,
) -> Dataset:
    """Deterministic labeled stand-in for the tabular benchmark datasets.

    Normals live near a smooth ``intrinsic_dim``-dimensional sheet embedded
    in ``dim`` dimensions with small isotropic noise. Anomalies are easy:
    half are scattered off the sheet by large noise, half sit on the sheet's
    low-density extension (latent radius 2.5-4), which is where plain
    reconstruction error goes blind.
    """
    rng = np.random.default_rng(seed)
    w1 = rng.standard_normal((intrinsic_dim, 16)) / np.sqrt(intrinsic_dim)
    b1 = 0.3 * rng.standard_normal(16)
    w2 = rng.standard_normal((16, dim)) / np.sqrt(16.0)
    b2 = 0.3 * rng.standard_normal(dim)

    def sheet(u: Array) -> Array:
        return np.tanh(u @ w1 + b1) @ w2 + b2

    u = rng.standard_normal((n_normal, intrinsic_dim))
    normals = sheet(u) + 0.05 * rng.standard_normal((n_normal, dim))

    n_far = n_anomaly // 2
    n_tail = n_anomaly - n_far
    u_far = rng.standard_normal((n_far, intrinsic_dim))
    far = sheet(u_far) + 0.8 * rng.standard_normal((n_far, dim))
    dirs = rng.standard_normal((n_tail, intrinsic_dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radius = rng.uniform(2.5, 4.0, size=(n_tail, 1))
    tail = sheet(dirs * radius) + 0.05 * rng.standard_normal((n_tail, dim))

    features = np.vstack([normals, far, tail])
    labels = np.concatenate(
        [np.zeros(n_normal, dtype=np.int64), np.ones(n_anomaly, dtype=np.int64)]
    )
    names = [f"x{i + 1}" for i in range(dim)]
    return Dataset("synthetic-standin", features, labels, names)


def grid_eval(
    model,
    kinds,
    x_range: tuple[float, float] = (-0.2, 1.2),
    y_range: tuple[float, float] = (-0.2, 1.2),
    resolution: int = 100,
    sigma2: float | None = None,
):
    """Score a 2-D model on a row-major grid; returns (header, rows).

    Rows are (x1, x2, one score per kind); meant to be written as the grid
    CSV consumed by the plotting tools.
    """
    from .score import score_batch

    if model.data_dim != 2:
        raise ValueError("grid evaluation needs a 2-D model")
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    xs = np.linspace(x_range[0], x_range[1], resolution)
    ys = np.linspace(y_range[0], y_range[1], resolution)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    scores = score_batch(model, pts, list(kinds), sigma2=sigma2)
    header = ["x1", "x2"] + [k.column for k in kinds]
    cols = [pts[:, 0], pts[:, 1]] + [scores[k] for k in kinds]
    rows = np.column_stack(cols)
    return header, rows


def write_grid_csv(path, header: list[str], rows: Array) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])
