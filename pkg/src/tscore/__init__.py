"""Exact-likelihood anomaly scoring for autoencoder generative models."""

from .data import (
    Dataset,
    Normalizer,
    SplitSpec,
    grid_eval,
    load_csv,
    normalize,
    save_csv,
    split,
    synthetic_standin,
    toy_generate,
)
from .harness import (
    EvalRecord,
    HyperGrid,
    UndefinedAucError,
    auc,
    expand_grid,
    latent_sweep,
    load_records,
    run_experiment,
    select_model,
)
from .mlp import Adam, Layer, Mlp, svd, swish
from .mmd import imq_kernel, mmd2_unbiased, mmd2_unbiased_grad
from .priors import Prior
from .score import (
    JacobianFactorization,
    ProposedScore,
    ScoreKind,
    decoder_jacobian,
    encoder_variant_score,
    latent_score,
    proposed_score,
    pseudo_det,
    reconstruction_score,
    refine_latent,
    score_batch,
)
from .train import (
    TrainConfig,
    TrainedModel,
    TrainingDiverged,
    load_model,
    save_model,
    train,
    wae_loss,
    wae_loss_and_grads,
)

__version__ = "0.1.0"
