"""Latent-space priors: log densities and reparameterizable sampling.

Three kinds are supported: an isotropic standard normal, a Gaussian mixture
with learnable component means, and a von Mises-Fisher mixture with
learnable mean directions on the unit sphere. Mixture weights stay uniform
and concentrations/variances stay fixed; only the means receive gradients,
through the reparameterized sampling path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, ive, logsumexp

Array = np.ndarray

STANDARD_NORMAL = "standard-normal"
GAUSSIAN_MIXTURE = "gaussian-mixture"
VMF_MIXTURE = "vmf-mixture"

_LOG_2PI = np.log(2.0 * np.pi)


def uniform_sphere_log_density(dim: int) -> float:
    """Log density of the uniform distribution on S^(dim-1)."""
    return float(gammaln(dim / 2.0) - np.log(2.0) - (dim / 2.0) * np.log(np.pi))


def vmf_log_normalizer(dim: int, kappa: float) -> float:
    """log C_p(kappa) with C the vMF normalizer on S^(dim-1).

    Uses the exponentially scaled Bessel function, so large concentrations
    stay finite. kappa == 0 falls back to the uniform-sphere constant.
    """
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    if kappa == 0.0:
        return uniform_sphere_log_density(dim)
    nu = dim / 2.0 - 1.0
    log_bessel = np.log(ive(nu, kappa)) + kappa
    return float(nu * np.log(kappa) - (dim / 2.0) * _LOG_2PI - log_bessel)


@dataclass
class PriorNoise:
    """Parameter-independent base draws for reparameterized sampling."""

    components: Array | None  # (n,) int, None for standard normal
    eps: Array | None = None  # (n, k) gaussian draws
    w: Array | None = None  # (n,) vMF axis components
    tangent: Array | None = None  # (n, k-1) unit tangent directions

    @property
    def n(self) -> int:
        for a in (self.eps, self.w):
            if a is not None:
                return a.shape[0]
        raise ValueError("empty noise record")


@dataclass
class Prior:
    """Latent prior p(z); see module docstring for the supported kinds."""

    kind: str
    dim: int
    means: Array  # (m, dim); empty (0, dim) for standard normal
    spread: Array  # (m,): variance per gaussian component, kappa per vMF
    weights: Array  # (m,) probability vector

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=np.float64).reshape(-1, self.dim)
        self.spread = np.atleast_1d(np.asarray(self.spread, dtype=np.float64))
        self.weights = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        if self.kind not in (STANDARD_NORMAL, GAUSSIAN_MIXTURE, VMF_MIXTURE):
            raise ValueError(f"unknown prior kind {self.kind!r}")
        if self.kind == STANDARD_NORMAL:
            if len(self.means) != 0:
                raise ValueError("standard normal prior takes no components")
            return
        m = len(self.means)
        if m == 0:
            raise ValueError("mixture prior needs at least one component")
        if self.spread.shape != (m,) or self.weights.shape != (m,):
            raise ValueError("spread/weights must have one entry per component")
        if abs(self.weights.sum() - 1.0) > 1e-12 or np.any(self.weights < 0):
            raise ValueError("weights must form a probability vector")
        if self.kind == GAUSSIAN_MIXTURE and np.any(self.spread <= 0):
            raise ValueError("gaussian component variances must be positive")
        if self.kind == VMF_MIXTURE:
            if self.dim < 2:
                raise ValueError("vMF prior requires dim >= 2")
            if np.any(self.spread < 0):
                raise ValueError("vMF concentrations must be non-negative")
            norms = np.linalg.norm(self.means, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-9):
                raise ValueError("vMF directions must be unit-norm")

    # ----- constructors -------------------------------------------------

    @classmethod
    def standard_normal(cls, dim: int) -> "Prior":
        return cls(STANDARD_NORMAL, dim, np.zeros((0, dim)), np.zeros(0), np.zeros(0))

    @classmethod
    def gaussian_mixture(cls, means, variance=1.0, weights=None) -> "Prior":
        means = np.asarray(means, dtype=np.float64)
        m, dim = means.shape
        var = np.full(m, float(variance)) if np.isscalar(variance) else np.asarray(variance)
        w = np.full(m, 1.0 / m) if weights is None else np.asarray(weights)
        return cls(GAUSSIAN_MIXTURE, dim, means, var, w)

    @classmethod
    def vmf_mixture(cls, directions, kappa, weights=None) -> "Prior":
        dirs = np.asarray(directions, dtype=np.float64)
        dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
        m, dim = dirs.shape
        kap = np.full(m, float(kappa)) if np.isscalar(kappa) else np.asarray(kappa)
        w = np.full(m, 1.0 / m) if weights is None else np.asarray(weights)
        return cls(VMF_MIXTURE, dim, dirs, kap, w)

    # ----- densities ----------------------------------------------------

    def log_density(self, z: Array) -> float:
        """Log p(z) at a single latent point."""
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (self.dim,):
            raise ValueError(f"z has shape {z.shape}, expected ({self.dim},)")
        return float(self.log_density_batch(z[None, :])[0])

    def log_density_batch(self, Z: Array) -> Array:
        """Log p(z) for each row of a (n, dim) array."""
        Z = np.asarray(Z, dtype=np.float64)
        if Z.ndim != 2 or Z.shape[1] != self.dim:
            raise ValueError(f"Z has shape {Z.shape}, expected (n, {self.dim})")
        if self.kind == STANDARD_NORMAL:
            return -0.5 * (self.dim * _LOG_2PI + np.sum(Z * Z, axis=1))
        if self.kind == GAUSSIAN_MIXTURE:
            # (n, m) squared distances
            d2 = np.sum((Z[:, None, :] - self.means[None, :, :]) ** 2, axis=2)
            comp = (
                -0.5 * (self.dim * (_LOG_2PI + np.log(self.spread)) )[None, :]
                - 0.5 * d2 / self.spread[None, :]
            )
            return logsumexp(comp + np.log(self.weights)[None, :], axis=1)
        # vMF mixture: evaluate on the unit sphere
        norms = np.linalg.norm(Z, axis=1)
        if np.any(norms < 1e-12):
            raise ValueError("cannot project a zero vector onto the sphere")
        U = Z / norms[:, None]
        log_c = np.array(
            [vmf_log_normalizer(self.dim, k) for k in self.spread]
        )
        # per-row broadcast sum (not a matmul) keeps each row's value
        # independent of the batch it is evaluated in
        cosines = np.sum(U[:, None, :] * self.means[None, :, :], axis=2)
        comp = log_c[None, :] + cosines * self.spread[None, :]
        return logsumexp(comp + np.log(self.weights)[None, :], axis=1)

    # ----- sampling -----------------------------------------------------

    def draw_noise(self, n: int, rng: np.random.Generator) -> PriorNoise:
        """Draw the parameter-independent randomness for n samples."""
        if n < 1:
            raise ValueError("n must be >= 1")
        if self.kind == STANDARD_NORMAL:
            return PriorNoise(None, eps=rng.standard_normal((n, self.dim)))
        comp = rng.choice(len(self.weights), size=n, p=self.weights)
        if self.kind == GAUSSIAN_MIXTURE:
            return PriorNoise(comp, eps=rng.standard_normal((n, self.dim)))
        w = _sample_vmf_axis(self.spread[comp], self.dim, rng)
        tang = rng.standard_normal((n, self.dim - 1))
        tang /= np.linalg.norm(tang, axis=1, keepdims=True)
        return PriorNoise(comp, w=w, tangent=tang)

    def apply_noise(self, noise: PriorNoise) -> Array:
        """Map base draws to samples; differentiable in the component means."""
        if self.kind == STANDARD_NORMAL:
            return noise.eps.copy()
        if self.kind == GAUSSIAN_MIXTURE:
            std = np.sqrt(self.spread[noise.components])[:, None]
            return self.means[noise.components] + std * noise.eps
        s = np.concatenate(
            [
                noise.w[:, None],
                np.sqrt(np.clip(1.0 - noise.w**2, 0.0, None))[:, None] * noise.tangent,
            ],
            axis=1,
        )
        return _householder_apply(self.means[noise.components], s)

    def noise_backward(self, noise: PriorNoise, d_samples: Array) -> Array:
        """Gradient of a scalar loss w.r.t. the component means.

        d_samples is dL/dZ for Z = apply_noise(noise); returns an array
        shaped like ``means`` (empty for the standard normal).
        """
        if self.kind == STANDARD_NORMAL:
            return np.zeros((0, self.dim))
        grad = np.zeros_like(self.means)
        if self.kind == GAUSSIAN_MIXTURE:
            np.add.at(grad, noise.components, d_samples)
            return grad
        s = np.concatenate(
            [
                noise.w[:, None],
                np.sqrt(np.clip(1.0 - noise.w**2, 0.0, None))[:, None] * noise.tangent,
            ],
            axis=1,
        )
        mu = self.means[noise.components]
        per_sample = _householder_mean_grad(mu, s, d_samples)
        np.add.at(grad, noise.components, per_sample)
        return grad

    def sample(self, n: int, rng: np.random.Generator) -> Array:
        """n samples from the prior, (n, dim)."""
        return self.apply_noise(self.draw_noise(n, rng))

    # ----- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "dim": self.dim,
            "means": self.means.tolist(),
            "spread": self.spread.tolist(),
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Prior":
        return cls(
            d["kind"],
            int(d["dim"]),
            np.array(d["means"], dtype=np.float64).reshape(-1, int(d["dim"])),
            np.array(d["spread"], dtype=np.float64),
            np.array(d["weights"], dtype=np.float64),
        )


def _householder_apply(mu: Array, s: Array) -> Array:
    """Reflect s so that e1 maps onto each row of mu.

    H = I - 2 v v^T / (v^T v) with v = e1 - mu; H @ e1 == mu for unit mu.
    Rows where mu ~= e1 pass through unchanged.
    """
    v = -mu.copy()
    v[:, 0] += 1.0
    q = np.sum(v * v, axis=1)
    u = np.sum(v * s, axis=1)
    ok = q > 1e-12
    scale = np.zeros_like(q)
    scale[ok] = 2.0 * u[ok] / q[ok]
    return s - scale[:, None] * v


def _householder_mean_grad(mu: Array, s: Array, g: Array) -> Array:
    """Per-sample dL/dmu for z = H(mu) s given g = dL/dz."""
    v = -mu.copy()
    v[:, 0] += 1.0
    q = np.sum(v * v, axis=1)
    u = np.sum(v * s, axis=1)
    gv = np.sum(g * v, axis=1)
    ok = q > 1e-12
    out = np.zeros_like(mu)
    qs = q[ok]
    out[ok] = (
        (2.0 / qs)[:, None] * (u[ok, None] * g[ok] + gv[ok, None] * s[ok])
        - (4.0 * u[ok] * gv[ok] / qs**2)[:, None] * v[ok]
    )
    return out


def _sample_vmf_axis(kappa: Array, dim: int, rng: np.random.Generator) -> Array:
    """Rejection-sample the cosine w between a vMF draw and its mean direction.

    Ulrich/Wood scheme; handles kappa == 0 (uniform sphere) naturally.
    """
    n = len(kappa)
    p1 = dim - 1.0
    b = p1 / (np.sqrt(4.0 * kappa**2 + p1**2) + 2.0 * kappa)
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + p1 * np.log(1.0 - x0**2)
    w = np.empty(n)
    todo = np.arange(n)
    while todo.size:
        z = rng.beta(p1 / 2.0, p1 / 2.0, size=todo.size)
        u = rng.uniform(size=todo.size)
        bt, x0t, ct, kt = b[todo], x0[todo], c[todo], kappa[todo]
        cand = (1.0 - (1.0 + bt) * z) / (1.0 - (1.0 - bt) * z)
        accept = kt * cand + p1 * np.log(1.0 - x0t * cand) - ct >= np.log(u)
        w[todo[accept]] = cand[accept]
        todo = todo[~accept]
    return w
