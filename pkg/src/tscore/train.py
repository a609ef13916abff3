"""Autoencoder training: reconstruction + beta * MMD, optimized with ADAM.

The encoder is deterministic (no sampling at its output); the regularizer
matches the encoded batch against fresh prior samples with the unbiased
IMQ-kernel MMD estimator. Learnable prior component means are trained
jointly; von Mises-Fisher directions are re-projected onto the unit sphere
after every optimizer step.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .mlp import Adam, Mlp
from .mmd import mmd2_unbiased_grad
from .priors import GAUSSIAN_MIXTURE, STANDARD_NORMAL, VMF_MIXTURE, Prior, PriorNoise

Array = np.ndarray

MODEL_MAGIC = "TSCORE-MODEL"
MODEL_VERSION = 1


class TrainingDiverged(RuntimeError):
    """Loss became non-finite during training; carries the step index."""

    def __init__(self, step: int):
        super().__init__(f"training diverged at step {step}")
        self.step = step


@dataclass
class TrainConfig:
    """All hyper-parameters of one training run."""

    hidden_width: int = 32
    latent_dim: int = 2
    mixture_components: int = 1
    prior_kind: str = STANDARD_NORMAL
    kernel_width: float = 1.0
    beta: float = 1.0
    batch_size: int = 100
    steps: int = 10000
    seed: int = 0
    learning_rate: float = 1e-3
    vmf_kappa: float = 10.0
    component_variance: float = 1.0
    n_hidden_layers: int = 3

    def __post_init__(self):
        if self.latent_dim < 1 or self.hidden_width < 1:
            raise ValueError("dimensions must be positive")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.kernel_width <= 0:
            raise ValueError("kernel width must be positive")
        if self.batch_size < 2:
            raise ValueError("batch size must be >= 2 (MMD needs pairs)")
        if self.mixture_components < 1:
            raise ValueError("mixture needs at least one component")
        if self.prior_kind == STANDARD_NORMAL and self.mixture_components != 1:
            raise ValueError("standard normal prior implies one component")
        if self.prior_kind == VMF_MIXTURE and self.latent_dim < 2:
            raise ValueError("vMF prior requires latent_dim >= 2")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass
class TrainedModel:
    """Encoder/decoder pair with its prior and fitted residual variance."""

    encoder: Mlp
    decoder: Mlp
    prior: Prior
    sigma2_re: float
    config: TrainConfig
    final_loss: float | None = None
    loss_history: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self):
        k = self.encoder.out_dim
        if self.decoder.in_dim != k or self.prior.dim != k or self.config.latent_dim != k:
            raise ValueError("encoder, decoder, prior, and config dims must agree")
        if self.decoder.out_dim != self.encoder.in_dim:
            raise ValueError("decoder output must match encoder input dimension")
        if not self.sigma2_re > 0:
            raise ValueError("sigma2_re must be positive")

    @property
    def data_dim(self) -> int:
        return self.encoder.in_dim

    @property
    def latent_dim(self) -> int:
        return self.encoder.out_dim

    def encode(self, X: Array) -> Array:
        """Latent codes for a (n, d) batch; on the sphere for vMF priors."""
        Y = self.encoder(np.atleast_2d(np.asarray(X, dtype=np.float64)))
        if self.prior.kind == VMF_MIXTURE:
            return _sphere_normalize(Y)
        return Y

    def decode(self, Z: Array) -> Array:
        return self.decoder(np.atleast_2d(np.asarray(Z, dtype=np.float64)))

    def reconstruct(self, X: Array) -> Array:
        return self.decode(self.encode(X))


def _sphere_normalize(Y: Array) -> Array:
    norms = np.linalg.norm(Y, axis=1, keepdims=True)
    if np.any(norms < 1e-12):
        raise ValueError("encoder produced a zero vector; cannot project to sphere")
    return Y / norms


def _sphere_normalize_backward(Y: Array, Z: Array, dZ: Array) -> Array:
    # z = y/|y|  =>  dy = (dz - z (z.dz)) / |y|
    norms = np.linalg.norm(Y, axis=1, keepdims=True)
    inner = np.sum(Z * dZ, axis=1, keepdims=True)
    return (dZ - Z * inner) / norms


def wae_loss_and_grads(
    encoder: Mlp,
    decoder: Mlp,
    prior: Prior,
    batch: Array,
    beta: float,
    kernel_width: float,
    noise: PriorNoise,
):
    """Loss value and gradients for fixed prior base draws.

    Returns (loss, rec_term, mmd_term, encoder_grads, decoder_grads,
    prior_mean_grads). Gradient lists are parallel to ``Mlp.params()``.
    """
    X = np.asarray(batch, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("batch must be 2-D with at least 2 rows")
    n = X.shape[0]

    Y, tape_e = encoder.forward(X)
    spherical = prior.kind == VMF_MIXTURE
    Z_e = _sphere_normalize(Y) if spherical else Y
    X_hat, tape_d = decoder.forward(Z_e)

    R = X_hat - X
    rec = float(np.sum(R * R) / n)

    Z_p = prior.apply_noise(noise)
    mmd_val, g_ze, g_zp = mmd2_unbiased_grad(Z_e, Z_p, kernel_width)
    loss = rec + beta * mmd_val

    dec_grads, d_ze = decoder.backward(tape_d, (2.0 / n) * R)
    d_ze = d_ze + beta * g_ze
    d_y = _sphere_normalize_backward(Y, Z_e, d_ze) if spherical else d_ze
    enc_grads, _ = encoder.backward(tape_e, d_y)
    prior_grads = prior.noise_backward(noise, beta * g_zp)
    return loss, rec, mmd_val, enc_grads, dec_grads, prior_grads


def wae_loss(
    encoder: Mlp,
    decoder: Mlp,
    prior: Prior,
    batch: Array,
    beta: float,
    kernel_width: float,
    rng: np.random.Generator,
) -> float:
    """Training loss on one batch with fresh prior draws."""
    X = np.asarray(batch, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("batch must be 2-D with at least 2 rows")
    noise = prior.draw_noise(X.shape[0], rng)
    loss, *_ = wae_loss_and_grads(
        encoder, decoder, prior, X, beta, kernel_width, noise
    )
    return loss


def _init_prior(config: TrainConfig, rng: np.random.Generator) -> Prior:
    k, m = config.latent_dim, config.mixture_components
    if config.prior_kind == STANDARD_NORMAL:
        return Prior.standard_normal(k)
    if config.prior_kind == GAUSSIAN_MIXTURE:
        return Prior.gaussian_mixture(
            rng.standard_normal((m, k)), variance=config.component_variance
        )
    if config.prior_kind == VMF_MIXTURE:
        return Prior.vmf_mixture(rng.standard_normal((m, k)), kappa=config.vmf_kappa)
    raise ValueError(f"unknown prior kind {config.prior_kind!r}")


def train(
    config: TrainConfig, data: Array, rng: np.random.Generator | None = None
) -> TrainedModel:
    """Fit an encoder/decoder/prior triple on (n, d) data.

    Mini-batches are drawn uniformly with replacement; one fresh prior draw
    of batch size feeds the MMD term each step. Fully deterministic given
    ``config.seed`` (when no explicit generator is passed).
    """
    X = np.asarray(data, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("data must be a 2-D array")
    n, d = X.shape
    if not np.all(np.isfinite(X)):
        raise ValueError("data contains non-finite entries")
    if config.latent_dim > d:
        raise ValueError(
            f"latent_dim {config.latent_dim} exceeds data dimension {d}"
        )
    if n < config.batch_size:
        raise ValueError(f"need at least batch_size={config.batch_size} rows")
    if rng is None:
        rng = np.random.default_rng(config.seed)

    encoder = Mlp.create(
        d, config.hidden_width, config.latent_dim, rng, config.n_hidden_layers
    )
    decoder = Mlp.create(
        config.latent_dim, config.hidden_width, d, rng, config.n_hidden_layers
    )
    prior = _init_prior(config, rng)

    params = encoder.params() + decoder.params()
    learnable_prior = prior.kind != STANDARD_NORMAL
    if learnable_prior:
        params = params + [prior.means]
    adam = Adam(learning_rate=config.learning_rate)

    losses: list[float] = []
    for step in range(config.steps):
        idx = rng.integers(0, n, size=config.batch_size)
        noise = prior.draw_noise(config.batch_size, rng)
        try:
            loss, _, _, enc_g, dec_g, prior_g = wae_loss_and_grads(
                encoder, decoder, prior, X[idx], config.beta, config.kernel_width, noise
            )
        except ValueError:
            # inputs were validated up front, so a mid-run rejection means
            # parameters went non-finite
            raise TrainingDiverged(step) from None
        if not math.isfinite(loss):
            raise TrainingDiverged(step)
        grads = enc_g + dec_g + ([prior_g] if learnable_prior else [])
        adam.step(params, grads)
        if prior.kind == VMF_MIXTURE:
            prior.means /= np.linalg.norm(prior.means, axis=1, keepdims=True)
        losses.append(loss)

    residual = X - decoder(
        _sphere_normalize(encoder(X)) if prior.kind == VMF_MIXTURE else encoder(X)
    )
    sigma2_re = max(float(np.var(residual)), np.finfo(np.float64).tiny)
    return TrainedModel(
        encoder=encoder,
        decoder=decoder,
        prior=prior,
        sigma2_re=sigma2_re,
        config=config,
        final_loss=losses[-1] if losses else None,
        loss_history=losses,
    )


def save_model(model: TrainedModel, path) -> None:
    """Write a model as versioned JSON (weights at full double precision)."""
    doc = {
        "magic": MODEL_MAGIC,
        "version": MODEL_VERSION,
        "config": model.config.to_dict(),
        "encoder": model.encoder.to_dict(),
        "decoder": model.decoder.to_dict(),
        "prior": model.prior.to_dict(),
        "sigma2_re": model.sigma2_re,
        "final_loss": model.final_loss,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_model(path) -> TrainedModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("magic") != MODEL_MAGIC:
        raise ValueError(f"{path}: not a model file (bad magic)")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"{path}: unsupported model version {doc.get('version')}")
    return TrainedModel(
        encoder=Mlp.from_dict(doc["encoder"]),
        decoder=Mlp.from_dict(doc["decoder"]),
        prior=Prior.from_dict(doc["prior"]),
        sigma2_re=float(doc["sigma2_re"]),
        config=TrainConfig.from_dict(doc["config"]),
        final_loss=doc.get("final_loss"),
    )
