"""Maximum mean discrepancy with the inverse multiquadric kernel.

The kernel is k(x, y) = c / (c + ||x - y||^2); the MMD^2 estimator is the
unbiased U-statistic, so values near zero may come out slightly negative.
"""

from __future__ import annotations

import numpy as np

Array = np.ndarray


def _check_c(c: float) -> float:
    c = float(c)
    if not c > 0:
        raise ValueError("kernel width c must be positive")
    return c


def imq_kernel(x: Array, y: Array, c: float) -> float:
    """Kernel value for a single pair of equal-length vectors."""
    c = _check_c(c)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    return float(c / (c + np.sum((x - y) ** 2)))


def _sq_dists(X: Array, Z: Array) -> Array:
    """Pairwise squared distances, (n, m), without forming (n, m, k)."""
    xx = np.sum(X * X, axis=1)
    zz = np.sum(Z * Z, axis=1)
    d2 = xx[:, None] + zz[None, :] - 2.0 * (X @ Z.T)
    return np.maximum(d2, 0.0)


def _sq_dists_exact(X: Array, Z: Array, chunk: int = 256) -> Array:
    """Pairwise squared distances where entry (i, j) depends only on the
    value pair (x_i, z_j), never on their positions in the batch.

    Slower than the Gram-matrix route but required for the exchangeability
    guarantee of the estimator value.
    """
    n, m = X.shape[0], Z.shape[0]
    d2 = np.empty((n, m))
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        diff = X[start:stop, None, :] - Z[None, :, :]
        d2[start:stop] = np.sum(diff * diff, axis=2)
    return d2


def _sorted_sum(values: Array) -> float:
    # canonical reduction order: permutation-invariant and reproducible
    return float(np.sum(np.sort(values, axis=None)))


def _as_batch(name: str, A: Array, min_rows: int) -> Array:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError(f"{name} must be 2-D")
    if A.shape[0] < min_rows:
        raise ValueError(f"{name} needs at least {min_rows} rows")
    return A


def mmd2_unbiased(X: Array, Z: Array, c: float) -> float:
    """Unbiased MMD^2 estimate between two samples with equal column count.

    The value is exchangeable: permuting rows of either sample leaves it
    bit-identical (distances are computed pairwise and summed in canonical
    order).
    """
    c = _check_c(c)
    X = _as_batch("X", X, 2)
    Z = _as_batch("Z", Z, 2)
    if X.shape[1] != Z.shape[1]:
        raise ValueError("X and Z must have the same dimension")
    n, m = X.shape[0], Z.shape[0]
    off_diag = ~np.eye(n, dtype=bool)
    Kxx = c / (c + _sq_dists_exact(X, X))
    sxx = _sorted_sum(Kxx[off_diag]) / (n * (n - 1))
    off_diag = ~np.eye(m, dtype=bool)
    Kzz = c / (c + _sq_dists_exact(Z, Z))
    szz = _sorted_sum(Kzz[off_diag]) / (m * (m - 1))
    Kxz = c / (c + _sq_dists_exact(X, Z))
    return float(sxx + szz - 2.0 * _sorted_sum(Kxz) / (n * m))


def mmd2_unbiased_grad(X: Array, Z: Array, c: float) -> tuple[float, Array, Array]:
    """MMD^2 estimate plus its gradients w.r.t. X and Z rows."""
    c = _check_c(c)
    X = _as_batch("X", X, 2)
    Z = _as_batch("Z", Z, 2)
    if X.shape[1] != Z.shape[1]:
        raise ValueError("X and Z must have the same dimension")
    n, m = X.shape[0], Z.shape[0]

    Dxx = _sq_dists(X, X)
    Dzz = _sq_dists(Z, Z)
    Dxz = _sq_dists(X, Z)
    Kxx = c / (c + Dxx)
    Kzz = c / (c + Dzz)
    Kxz = c / (c + Dxz)

    value = (
        (Kxx.sum() - np.trace(Kxx)) / (n * (n - 1))
        + (Kzz.sum() - np.trace(Kzz)) / (m * (m - 1))
        - 2.0 * Kxz.mean()
    )

    # dk/d(r^2) = -c / (c + r^2)^2; each within-sample pair appears twice.
    Wxx = -c / (c + Dxx) ** 2
    np.fill_diagonal(Wxx, 0.0)
    Wzz = -c / (c + Dzz) ** 2
    np.fill_diagonal(Wzz, 0.0)
    Wxz = -c / (c + Dxz) ** 2

    def pair_grad(W: Array, A: Array, B: Array) -> Array:
        # sum_j W_ij * 2 (a_i - b_j), vectorized
        return 2.0 * (W.sum(axis=1)[:, None] * A - W @ B)

    gX = (2.0 / (n * (n - 1))) * pair_grad(Wxx, X, X)
    gX += (-2.0 / (n * m)) * pair_grad(Wxz, X, Z)
    gZ = (2.0 / (m * (m - 1))) * pair_grad(Wzz, Z, Z)
    gZ += (-2.0 / (n * m)) * pair_grad(Wxz.T, Z, X)
    return float(value), gX, gZ
