"""
Backbone Services
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Tuple

import torch
from torch import nn

from apps.core.exceptions import ConfigurationError, DimensionMismatchError
from apps.core.utils import ensure_parent

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 'finehash-checkpoint'
CHECKPOINT_VERSION = 1


def gap(feature_map: torch.Tensor) -> torch.Tensor:
    """
    Global average pooling: channel-wise mean over the two trailing spatial axes.

    Accepts (C, H, W) or batched (N, C, H, W) maps.
    """
    if feature_map.dim() < 3:
        raise DimensionMismatchError(
            f"gap expects (..., C, H, W), got shape {tuple(feature_map.shape)}"
        )
    if feature_map.shape[-1] == 0 or feature_map.shape[-2] == 0:
        raise DimensionMismatchError("gap needs a non-empty spatial extent")
    return feature_map.mean(dim=(-2, -1))


@dataclass
class CheckpointArchive:
    """
    Contents of a checkpoint file.

    `config` is the flat run configuration the model was built from;
    `shapes` maps every parameter/buffer name to its shape.
    """
    config: Dict[str, Any]
    shapes: Dict[str, List[int]]
    state_dict: Dict[str, torch.Tensor]
    extra: Dict[str, Any] = field(default_factory=dict)


class CheckpointService:
    """
    Versioned parameter archive shared by every network in the project.

    Layout (a single ``torch.save`` payload)::

        {'format': 'finehash-checkpoint', 'version': 1,
         'config': {...}, 'shapes': {name: [dims]},
         'state_dict': {name: tensor}, 'extra': {...}}
    """

    @staticmethod
    def save(module: nn.Module, path, config: Dict[str, Any], extra: Dict[str, Any] = None) -> Path:
        path = ensure_parent(path)
        state = {name: tensor.detach().cpu().clone() for name, tensor in module.state_dict().items()}
        payload = {
            'format': CHECKPOINT_FORMAT,
            'version': CHECKPOINT_VERSION,
            'config': dict(config),
            'shapes': {name: list(tensor.shape) for name, tensor in state.items()},
            'state_dict': state,
            'extra': dict(extra or {}),
        }
        torch.save(payload, path)
        logger.info(f"Saved checkpoint with {len(state)} tensors to {path}")
        return path

    @staticmethod
    def load(path) -> CheckpointArchive:
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"Checkpoint not found: {path}", path=str(path))

        try:
            payload = torch.load(path, map_location='cpu', weights_only=True)
        except Exception as exc:
            raise ConfigurationError(f"Unreadable checkpoint {path}: {exc}", path=str(path))

        if not isinstance(payload, dict) or payload.get('format') != CHECKPOINT_FORMAT:
            raise ConfigurationError(f"{path} is not a checkpoint archive", path=str(path))
        if payload.get('version') != CHECKPOINT_VERSION:
            raise ConfigurationError(
                f"Unsupported checkpoint version {payload.get('version')}",
                path=str(path), version=payload.get('version'),
            )

        state = payload['state_dict']
        shapes = payload['shapes']
        for name, tensor in state.items():
            if list(tensor.shape) != list(shapes.get(name, [])):
                raise ConfigurationError(
                    f"Checkpoint tensor {name} has shape {list(tensor.shape)}, header says {shapes.get(name)}",
                    path=str(path), tensor=name,
                )

        return CheckpointArchive(
            config=payload['config'],
            shapes=shapes,
            state_dict=state,
            extra=payload.get('extra', {}),
        )

    @staticmethod
    def restore(module: nn.Module, archive: CheckpointArchive) -> nn.Module:
        """
        Load archived tensors into `module`, failing on any name or shape mismatch.
        """
        expected: Dict[str, Tuple[int, ...]] = {
            name: tuple(tensor.shape) for name, tensor in module.state_dict().items()
        }
        missing = sorted(set(expected) - set(archive.state_dict))
        unexpected = sorted(set(archive.state_dict) - set(expected))
        if missing or unexpected:
            raise ConfigurationError(
                "Checkpoint does not match the model layout",
                missing=missing, unexpected=unexpected,
            )
        for name, shape in expected.items():
            if tuple(archive.state_dict[name].shape) != shape:
                raise ConfigurationError(
                    f"Checkpoint tensor {name} has shape {tuple(archive.state_dict[name].shape)}, model expects {shape}",
                    tensor=name,
                )
        module.load_state_dict(archive.state_dict)
        return module
