"""Self-describing JSON checkpoints."""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from cife.autodiff.tensor import Tensor
from cife.core.errors import CheckpointError, ShapeError
from cife.core.types import HeadKind, TrainConfig, Variant
from cife.models.networks import AdaptationModel, CifeModel, DannModel
from cife.nn.layers import LinearLayer, Mlp

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "cife-checkpoint"
CHECKPOINT_VERSION = 1


def _component_record(net: Mlp) -> Dict[str, Any]:
    return {
        "head": net.head.value,
        "widths": net.widths,
        "layers": [
            {"weight": layer.weight.data.tolist(), "bias": layer.bias.data.tolist()}
            for layer in net.layers
        ],
    }


def _component_from_record(name: str, record: Dict[str, Any]) -> Mlp:
    try:
        widths = [int(w) for w in record["widths"]]
        layers = []
        for w_in, w_out, layer in zip(widths[:-1], widths[1:], record["layers"]):
            layers.append(LinearLayer(
                w_in, w_out,
                weight=Tensor(np.array(layer["weight"], dtype=np.float64).reshape(w_in, w_out), requires_grad=True),
                bias=Tensor(np.array(layer["bias"], dtype=np.float64).reshape(w_out), requires_grad=True),
            ))
        if len(layers) != len(widths) - 1:
            raise CheckpointError(f"component {name}: {len(layers)} layers for widths {widths}")
        return Mlp(layers=layers, head=HeadKind(record["head"]))
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, CheckpointError):
            raise
        raise CheckpointError(f"component {name} is malformed: {e}") from e


def checkpoint_record(
    model: AdaptationModel,
    train_config: Optional[TrainConfig] = None,
    config_hash: Optional[str] = None,
) -> Dict[str, Any]:
    """Plain-dict checkpoint contents."""
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "variant": model.variant.value,
        "input_dim": model.input_dim,
        "num_classes": model.num_classes,
        "components": {name: _component_record(net) for name, net in model.components().items()},
        "train_config": train_config.to_record() if train_config else None,
        "config_hash": config_hash,
        "seed": train_config.seed if train_config else None,
        "checksum": model.checksum(),
    }


def save_checkpoint(
    path: Union[str, Path],
    model: AdaptationModel,
    train_config: Optional[TrainConfig] = None,
    config_hash: Optional[str] = None,
) -> Path:
    """
    Write ``model`` as canonical JSON.

    Keys are sorted and floats use their shortest round-tripping repr,
    so equal models give byte-identical files and loading restores every
    parameter bit-exactly.
    """
    path = Path(path)
    record = checkpoint_record(model, train_config, config_hash)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(record, sort_keys=True, allow_nan=False) + "\n")
    logger.info("Saved %s checkpoint to %s", model.variant.value, path)
    return path


def load_checkpoint(path: Union[str, Path]) -> Tuple[AdaptationModel, Dict[str, Any]]:
    """
    Read a checkpoint written by save_checkpoint.

    Returns:
        (model, metadata) where metadata holds train_config (a
        TrainConfig or None), config_hash and seed

    Raises:
        CheckpointError: If the file is not a valid checkpoint
    """
    path = Path(path)
    try:
        record = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise CheckpointError(f"{path} is not valid JSON: {e}") from e
    if not isinstance(record, dict) or record.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not a cife checkpoint")
    if record.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {record.get('version')}")

    try:
        variant = Variant(record["variant"])
        nets = {name: _component_from_record(name, rec) for name, rec in record["components"].items()}
        if variant.aligns_categories:
            model: AdaptationModel = CifeModel(
                f_s=nets["F_s"], f_d=nets["F_d"], c=nets["C"], d_d=nets["D_d"], d_t=nets["D_t"], variant=variant,
            )
        else:
            model = DannModel(f=nets["F"], c=nets["C"], d=nets.get("D"), variant=variant)
        train_config = TrainConfig.from_record(record["train_config"]) if record.get("train_config") else None
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, CheckpointError):
            raise
        if isinstance(e, ShapeError):
            raise CheckpointError(f"{path}: {e}") from e
        raise CheckpointError(f"{path} is malformed: {e}") from e

    stored = record.get("checksum")
    if stored is not None and stored != model.checksum():
        raise CheckpointError(f"{path}: parameter checksum mismatch")
    metadata = {
        "train_config": train_config,
        "config_hash": record.get("config_hash"),
        "seed": record.get("seed"),
    }
    return model, metadata
