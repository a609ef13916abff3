"""Parabola toy pipeline: generate data, fit a 1-D latent model, grid scores.

This is the 2-D showcase where plain reconstruction error assigns high
scores along the low-density extension of the learned curve while the
change-of-variables score does not.
"""

from __future__ import annotations

from dataclasses import replace

from .data import grid_eval, toy_generate, write_grid_csv
from .score import ScoreKind
from .train import TrainConfig, TrainedModel, train

TOY_CONFIG = TrainConfig(
    hidden_width=32,
    latent_dim=1,
    mixture_components=1,
    prior_kind="standard-normal",
    kernel_width=1.0,
    beta=0.2,
    batch_size=100,
    steps=10000,
    learning_rate=1e-3,
)

TOY_GRID_RANGE = (-0.2, 1.2)
TOY_SCORE_KINDS = (ScoreKind.RECONSTRUCTION, ScoreKind.LATENT, ScoreKind.PROPOSED)


def train_toy_model(
    n_samples: int = 2000, seed: int = 0, steps: int | None = None
) -> TrainedModel:
    """Fit the default toy configuration on freshly generated parabola data."""
    config = replace(TOY_CONFIG, seed=seed)
    if steps is not None:
        config = replace(config, steps=steps)
    data = toy_generate(n_samples, seed=seed)
    return train(config, data.features)


def toy_figure(
    out_csv,
    n_samples: int = 2000,
    seed: int = 0,
    steps: int | None = None,
    resolution: int = 100,
    kinds=TOY_SCORE_KINDS,
) -> TrainedModel:
    """Train the toy model and write the three-score grid CSV."""
    model = train_toy_model(n_samples, seed, steps)
    header, rows = grid_eval(
        model, kinds, TOY_GRID_RANGE, TOY_GRID_RANGE, resolution
    )
    write_grid_csv(out_csv, header, rows)
    return model
