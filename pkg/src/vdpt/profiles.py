"""Shipped training profiles and the default synthetic cohort recipe.

Two profile families:

- "deployed": the hyperparameters the deployed clinical models were
  selected with (three hidden layers each; full-batch weighted BCE for the
  deterministic net, mini-batch undersampled ELBO for the stochastic one).
  These are the package defaults and assume a full-scale training corpus.

- "synthetic": desk-scale profiles tuned (by this repo's own random-search
  machinery) for the bundled synthetic cohort generator. The deployed
  stochastic profile's learning rate diverges on the synthetic stand-in
  data, so the acceptance suite and the quickstart CLI run these.
"""

from __future__ import annotations

from .mlp import TrainConfig
from .vdp import VdpTrainConfig

DEFAULT_SYNTHETIC_N = 6000
DEFAULT_SYNTHETIC_PREVALENCE = 0.08
DEFAULT_SYNTHETIC_MISSING_RATE = 0.05


def deployed_mlp_profile(seed: int = 0) -> TrainConfig:
    return TrainConfig(seed=seed)


def deployed_vdp_profile(seed: int = 0) -> VdpTrainConfig:
    return VdpTrainConfig(seed=seed)


def synthetic_mlp_profile(seed: int = 0, pos_weight: float = 11.5) -> TrainConfig:
    return TrainConfig(
        widths=(32, 32),
        epochs=60,
        batch_size=0,
        learning_rate=0.05,
        weight_decay=0.001,
        momentum=0.9,
        pos_weight=pos_weight,
        seed=seed,
    )


def synthetic_vdp_profile(seed: int = 0) -> VdpTrainConfig:
    return VdpTrainConfig(
        widths=(32,),
        epochs=100,
        batch_size=256,
        learning_rate=0.005,
        jitter=1e-2,
        weight_decay=0.001,
        momentum=0.9,
        rebalance="undersample",
        seed=seed,
    )


def profile_for(model_kind: str, family: str, seed: int = 0):
    """Look up a training config by model kind ("mlp"/"vdp") and profile
    family ("deployed"/"synthetic")."""
    table = {
        ("mlp", "deployed"): deployed_mlp_profile,
        ("mlp", "synthetic"): synthetic_mlp_profile,
        ("vdp", "deployed"): deployed_vdp_profile,
        ("vdp", "synthetic"): synthetic_vdp_profile,
    }
    try:
        return table[(model_kind, family)](seed=seed)
    except KeyError:
        raise ValueError(f"no profile for model={model_kind!r} family={family!r}") from None
