"""Anomaly scores for trained autoencoder models.

All scores are unnormalized log densities: higher means more normal, and
only the ordering matters for AUC. Four kinds are available:

* ``re``            reconstruction error, -||x - f(g(x))||^2 / (2 sigma2_RE)
* ``pz``            prior log density at the encoding, log p(z)|_{z=g(x)}
* ``proposed``      log p(z') - sum log s_i(J_f(z')) - ||x - x'||^2/(2 sigma^2)
* ``proposed_enc``  encoder-side variant: log p(g(x')) + sum log s_i(J_g(x'))
                    - ||x - x'||^2/(2 sigma^2)

where z' = g(x) (optionally refined by descent on the residual) and
x' = f(z'). The Jacobian volume uses singular values above a relative rank
tolerance; rank-deficient points keep the surviving values and are flagged
instead of going to -inf, so anomalies stay comparable.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .mlp import Mlp, svd
from .priors import VMF_MIXTURE
from .train import TrainedModel

Array = np.ndarray

DEFAULT_RANK_TOLERANCE = 1e-9


class ScoreKind(str, Enum):
    RECONSTRUCTION = "re"
    LATENT = "pz"
    PROPOSED = "proposed"
    PROPOSED_ENCODER = "proposed_enc"

    @classmethod
    def parse(cls, name: str) -> "ScoreKind":
        try:
            return cls(name)
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown score kind {name!r} (valid: {valid})") from None

    @property
    def column(self) -> str:
        return f"score_{self.value}"


@dataclass
class JacobianFactorization:
    """SVD-backed volume element of a rectangular Jacobian."""

    jacobian: Array
    singular_values: Array  # descending
    log_volume: float  # sum of log s_i over values above tolerance
    rank_deficient: bool


@dataclass
class ProposedScore:
    """The proposed score with its three terms kept separate."""

    total: float
    log_prior: float
    log_volume: float
    residual: float
    rank_deficient: bool


def decoder_jacobian(decoder: Mlp, z: Array) -> Array:
    """Exact (d, k) Jacobian of the decoder at a single latent point."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (decoder.in_dim,):
        raise ValueError(f"z has shape {z.shape}, expected ({decoder.in_dim},)")
    return decoder.jacobian(z)


def pseudo_det(
    J: Array, rank_tolerance: float = DEFAULT_RANK_TOLERANCE
) -> JacobianFactorization:
    """Log volume element of a rectangular Jacobian: sum log s_i.

    Singular values at or below ``rank_tolerance * s_max`` count as zero.
    When fewer than min(d, k) values survive, the result is flagged
    rank-deficient and the volume uses the surviving values only.
    """
    J = np.asarray(J, dtype=np.float64)
    _, s, _ = svd(J)
    cutoff = rank_tolerance * s[0] if s[0] > 0 else 0.0
    keep = s > cutoff
    log_volume = float(np.sum(np.log(s[keep]))) if np.any(keep) else 0.0
    return JacobianFactorization(
        jacobian=J,
        singular_values=s,
        log_volume=log_volume,
        rank_deficient=int(np.count_nonzero(keep)) < len(s),
    )


def _log_volume_batch(J_stack: Array, rank_tolerance: float) -> tuple[Array, Array]:
    """Vectorized pseudo-determinant over a (n, d, k) Jacobian stack."""
    s = np.linalg.svd(J_stack, compute_uv=False)
    cutoff = rank_tolerance * s[:, :1]
    keep = (s > cutoff) & (s > 0)
    logs = np.where(keep, np.log(np.where(keep, s, 1.0)), 0.0)
    return logs.sum(axis=1), keep.sum(axis=1) < s.shape[1]


def _check_point(model: TrainedModel, x: Array) -> Array:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.data_dim,):
        raise ValueError(f"x has shape {x.shape}, expected ({model.data_dim},)")
    return x


def _resolve_sigma2(model: TrainedModel, sigma2: float | None) -> float:
    # beta plays the role of the observation-noise variance by default;
    # callers may pass sigma2=model.sigma2_re instead.
    s2 = model.config.beta if sigma2 is None else float(sigma2)
    if s2 <= 0:
        raise ValueError("sigma2 must be positive")
    return s2


def reconstruction_score(model: TrainedModel, x: Array) -> float:
    """-||x - f(g(x))||^2 / (2 sigma2_RE); zero when exactly reconstructed."""
    x = _check_point(model, x)
    r = x - model.reconstruct(x[None, :])[0]
    return float(-0.5 * np.sum(r * r) / model.sigma2_re)


def latent_score(model: TrainedModel, x: Array) -> float:
    """Prior log density at the encoding of x."""
    x = _check_point(model, x)
    return float(model.prior.log_density_batch(model.encode(x[None, :]))[0])


def proposed_score(
    model: TrainedModel,
    x: Array,
    sigma2: float | None = None,
    rank_tolerance: float = DEFAULT_RANK_TOLERANCE,
    z: Array | None = None,
) -> ProposedScore:
    """Change-of-variables score through the decoder at z' = g(x).

    Pass ``z`` to use a refined latent point instead of the encoding.
    """
    x = _check_point(model, x)
    if model.data_dim < model.latent_dim:
        raise ValueError("score requires data dimension >= latent dimension")
    s2 = _resolve_sigma2(model, sigma2)
    z = model.encode(x[None, :])[0] if z is None else np.asarray(z, dtype=np.float64)
    x_hat = model.decode(z[None, :])[0]
    fac = pseudo_det(model.decoder.jacobian(z), rank_tolerance)
    log_prior = float(model.prior.log_density_batch(z[None, :])[0])
    residual = float(-0.5 * np.sum((x - x_hat) ** 2) / s2)
    return ProposedScore(
        total=log_prior - fac.log_volume + residual,
        log_prior=log_prior,
        log_volume=fac.log_volume,
        residual=residual,
        rank_deficient=fac.rank_deficient,
    )


def encoder_variant_score(
    model: TrainedModel,
    x: Array,
    sigma2: float | None = None,
    rank_tolerance: float = DEFAULT_RANK_TOLERANCE,
) -> float:
    """Encoder-side variant: volume from the (k, d) encoder Jacobian at x'."""
    x = _check_point(model, x)
    if model.data_dim < model.latent_dim:
        raise ValueError("score requires data dimension >= latent dimension")
    s2 = _resolve_sigma2(model, sigma2)
    z = model.encode(x[None, :])
    x_hat = model.decode(z)
    J = _encoder_jacobian_batch(model, x_hat)[0]
    fac = pseudo_det(J, rank_tolerance)
    log_prior = float(model.prior.log_density_batch(model.encode(x_hat))[0])
    residual = float(-0.5 * np.sum((x - x_hat[0]) ** 2) / s2)
    return log_prior + fac.log_volume + residual


def _encoder_jacobian_batch(model: TrainedModel, X: Array) -> Array:
    """(n, k, d) Jacobians of the full encoding map (incl. sphere projection)."""
    J = model.encoder.jacobian_batch(X)
    if model.prior.kind != VMF_MIXTURE:
        return J
    Y = model.encoder(X)
    norms = np.linalg.norm(Y, axis=1, keepdims=True)
    Z = Y / norms
    proj = np.eye(model.latent_dim)[None] - Z[:, :, None] * Z[:, None, :]
    return (proj / norms[:, :, None]) @ J


def refine_latent(
    model: TrainedModel,
    x: Array,
    z0: Array,
    steps: int = 100,
    restarts: int = 1,
    rng: np.random.Generator | None = None,
) -> Array:
    """Descend ||f(z) - x||^2 from z0 (plus restarts-1 prior starts).

    Returns the best point seen; never worse than z0. Uses backtracking on
    the step size, so non-convergence simply returns the best candidate.
    """
    x = _check_point(model, x)
    z0 = np.asarray(z0, dtype=np.float64)
    if z0.shape != (model.latent_dim,):
        raise ValueError(f"z0 has shape {z0.shape}, expected ({model.latent_dim},)")
    if steps < 0 or restarts < 1:
        raise ValueError("steps must be >= 0 and restarts >= 1")
    starts = [z0]
    if restarts > 1:
        if rng is None:
            rng = np.random.default_rng(0)
        starts.extend(model.prior.sample(restarts - 1, rng))

    def residual(z: Array) -> float:
        r = model.decode(z[None, :])[0] - x
        return float(np.dot(r, r))

    best_z, best_r = z0, residual(z0)
    for start in starts:
        z, r, lr = start.copy(), residual(start), 0.1
        for _ in range(steps):
            grad = 2.0 * model.decoder.jacobian(z).T @ (
                model.decode(z[None, :])[0] - x
            )
            gnorm = np.linalg.norm(grad)
            if gnorm < 1e-14:
                break
            trial = z - lr * grad
            tr = residual(trial)
            if tr < r:
                z, r = trial, tr
                lr *= 1.2
            else:
                lr *= 0.5
                if lr < 1e-12:
                    break
        if r < best_r:
            best_z, best_r = z, r
    return best_z


def score_batch(
    model: TrainedModel,
    X: Array,
    kinds: list[ScoreKind],
    sigma2: float | None = None,
    rank_tolerance: float = DEFAULT_RANK_TOLERANCE,
    refine: bool = False,
    refine_steps: int = 100,
    refine_restarts: int = 1,
    rng: np.random.Generator | None = None,
) -> dict[ScoreKind, Array]:
    """Score every row of X for each requested kind; shares intermediates."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.data_dim:
        raise ValueError(f"X has shape {X.shape}, expected (n, {model.data_dim})")
    if (
        ScoreKind.PROPOSED in kinds or ScoreKind.PROPOSED_ENCODER in kinds
    ) and model.data_dim < model.latent_dim:
        raise ValueError("score requires data dimension >= latent dimension")
    s2 = _resolve_sigma2(model, sigma2)

    Z = model.encode(X)
    if refine:
        Z = np.stack(
            [
                refine_latent(model, x, z, refine_steps, refine_restarts, rng)
                for x, z in zip(X, Z)
            ]
        )
    X_hat = model.decode(Z)
    resid2 = np.sum((X - X_hat) ** 2, axis=1)

    out: dict[ScoreKind, Array] = {}
    for kind in kinds:
        if kind == ScoreKind.RECONSTRUCTION:
            out[kind] = -0.5 * resid2 / model.sigma2_re
        elif kind == ScoreKind.LATENT:
            out[kind] = model.prior.log_density_batch(Z)
        elif kind == ScoreKind.PROPOSED:
            logvol, _ = _log_volume_batch(
                model.decoder.jacobian_batch(Z), rank_tolerance
            )
            out[kind] = (
                model.prior.log_density_batch(Z) - logvol - 0.5 * resid2 / s2
            )
        elif kind == ScoreKind.PROPOSED_ENCODER:
            logvol, _ = _log_volume_batch(
                _encoder_jacobian_batch(model, X_hat), rank_tolerance
            )
            out[kind] = (
                model.prior.log_density_batch(model.encode(X_hat))
                + logvol
                - 0.5 * resid2 / s2
            )
        else:
            raise ValueError(f"unknown score kind {kind!r}")
    return out
