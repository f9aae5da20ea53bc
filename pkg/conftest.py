"""
Root conftest.py for pytest configuration.

This file provides shared fixtures and configuration for all tests.
"""
import pytest
import torch

from apps.backbone.networks import Backbone
from apps.core.tests.factories import SyntheticSpecFactory, TrainConfigFactory


@pytest.fixture(autouse=True)
def fixed_seed():
    """Every test starts from the same global torch seed."""
    torch.manual_seed(0)


@pytest.fixture
def toy_config():
    """Toy training configuration (32x32 input, three classes, 8-bit codes)."""
    return TrainConfigFactory()


@pytest.fixture
def toy_backbone(toy_config):
    """Backbone built from the toy configuration."""
    return Backbone(toy_config.backbone, toy_config.anchors.num_anchors)


@pytest.fixture
def toy_model(toy_config):
    """Complete network built from the toy configuration."""
    from apps.collab.networks import FineHashNet

    return FineHashNet(toy_config)


@pytest.fixture
def synthetic_spec():
    """A tiny planted-glyph dataset spec."""
    return SyntheticSpecFactory(seed=5)


@pytest.fixture
def synthetic_dataset(synthetic_spec, tmp_path):
    """Generate the tiny planted-glyph dataset on disk."""
    from apps.cli.services import SyntheticDatasetService

    return SyntheticDatasetService.generate(synthetic_spec, tmp_path / 'synthetic')
