"""CIFE and baseline model assemblies, objectives and checkpoints."""
from cife.models.networks import AdaptationModel, CifeModel, DannModel, ModelSpec, build_model
from cife.models.objectives import (
    Coupling,
    LossBundle,
    cdan_condition,
    discriminator_objective,
    extractor_objective,
    forward_predict_concat,
    loss_category,
    loss_classification,
    loss_domain,
    total_objective,
)
from cife.models.checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "AdaptationModel",
    "CifeModel",
    "DannModel",
    "ModelSpec",
    "build_model",
    "Coupling",
    "LossBundle",
    "cdan_condition",
    "discriminator_objective",
    "extractor_objective",
    "forward_predict_concat",
    "loss_category",
    "loss_classification",
    "loss_domain",
    "total_objective",
    "load_checkpoint",
    "save_checkpoint",
]
