"""
Run Configuration Serializers
"""
from dataclasses import fields as dataclass_fields
from pathlib import Path
from typing import Dict, Mapping

from rest_framework import serializers

from apps.core.config import format_config_value, read_config_file, write_config_file
from apps.core.exceptions import ConfigurationError
from .structures import SCHEDULE_CHOICES, SCOPE_CHOICES, TrainConfig

CONFIG_HEADER = "finehash run configuration (key=value, one per line)"


class CommaSeparatedField(serializers.Field):
    """`16,16,32` <-> [16, 16, 32], each item validated by `child`."""

    def __init__(self, child, **kwargs):
        self.child = child
        super().__init__(**kwargs)

    def to_internal_value(self, data):
        if isinstance(data, str):
            data = [item.strip() for item in data.split(',') if item.strip()]
        if not data:
            raise serializers.ValidationError('Expected at least one value.')
        return tuple(self.child.run_validation(item) for item in data)

    def to_representation(self, value):
        return ','.join(format_config_value(self.child.to_representation(item)) for item in value)


class RatioListField(serializers.Field):
    """`1:1,2:3,3:2` <-> ((1, 1), (2, 3), (3, 2)), height:width."""

    def to_internal_value(self, data):
        if isinstance(data, str):
            data = [item.strip() for item in data.split(',') if item.strip()]
        ratios = []
        for item in data:
            try:
                a, b = (float(part) for part in (item.split(':') if isinstance(item, str) else item))
            except (TypeError, ValueError):
                raise serializers.ValidationError(f"Ratio {item!r} is not of the form a:b.")
            if a <= 0 or b <= 0:
                raise serializers.ValidationError(f"Ratio {item!r} must be positive.")
            ratios.append((int(a) if a.is_integer() else a, int(b) if b.is_integer() else b))
        if not ratios:
            raise serializers.ValidationError('Expected at least one ratio.')
        return tuple(ratios)

    def to_representation(self, value):
        return ','.join(f"{format_config_value(a)}:{format_config_value(b)}" for a, b in value)


class TrainConfigSerializer(serializers.Serializer):
    """
    Validates a flat key=value run configuration into a TrainConfig.

    Every key is optional and falls back to the TrainConfig default; keys
    this serializer does not declare are rejected by name.
    """
    input_size = serializers.IntegerField(min_value=8, required=False)
    stage_widths = CommaSeparatedField(serializers.IntegerField(min_value=1), required=False)
    extra_widths = CommaSeparatedField(serializers.IntegerField(min_value=1), required=False)
    anchor_sizes = CommaSeparatedField(serializers.FloatField(min_value=1.0), required=False)
    anchor_ratios = RatioListField(required=False)
    num_classes = serializers.IntegerField(min_value=2, required=False)
    code_length = serializers.IntegerField(min_value=8, max_value=256, required=False)
    fusion_dim = serializers.IntegerField(min_value=0, required=False)

    triplet_margin = serializers.FloatField(required=False)
    localization_margin = serializers.FloatField(required=False)
    lambda_cls = serializers.FloatField(min_value=0.0, required=False)
    lambda_rank = serializers.FloatField(min_value=0.0, required=False)
    lambda_loc = serializers.FloatField(min_value=0.0, required=False)
    num_candidates = serializers.IntegerField(min_value=1, required=False)
    nms_threshold = serializers.FloatField(min_value=0.0, max_value=1.0, required=False)
    triplets_per_anchor = serializers.IntegerField(min_value=1, required=False)
    localization_scope = serializers.ChoiceField(choices=SCOPE_CHOICES, required=False)

    batch_size = serializers.IntegerField(min_value=1, required=False)
    learning_rate = serializers.FloatField(required=False)
    weight_decay = serializers.FloatField(min_value=0.0, required=False)
    lr_decay_epochs = serializers.IntegerField(min_value=1, required=False)
    lr_decay_factor = serializers.FloatField(required=False)
    epochs = serializers.IntegerField(min_value=0, required=False)
    localization_warmup_epochs = serializers.IntegerField(min_value=0, required=False)
    schedule = serializers.ChoiceField(choices=SCHEDULE_CHOICES, required=False)
    seed = serializers.IntegerField(min_value=0, required=False)

    def validate_triplet_margin(self, value):
        if value <= 0:
            raise serializers.ValidationError('Margin must be positive.')
        return value

    def validate_localization_margin(self, value):
        return self.validate_triplet_margin(value)

    def validate_learning_rate(self, value):
        if value <= 0:
            raise serializers.ValidationError('Learning rate must be positive.')
        return value

    def validate_lr_decay_factor(self, value):
        if not 0 < value <= 1:
            raise serializers.ValidationError('Decay factor must lie in (0, 1].')
        return value

    def validate(self, attrs):
        unknown = [key for key in self.initial_data if key not in self.fields]
        if unknown:
            raise serializers.ValidationError({unknown[0]: ['Unknown configuration key.']})
        return attrs

    def create(self, validated_data):
        return TrainConfig(**validated_data)

    @classmethod
    def parse(cls, values: Mapping[str, str]) -> TrainConfig:
        serializer = cls(data=dict(values))
        if not serializer.is_valid():
            key, messages = next(iter(serializer.errors.items()))
            raise ConfigurationError(
                f"Invalid configuration key {key}: {messages[0]}",
                key=key,
                errors={field: [str(m) for m in errs] for field, errs in serializer.errors.items()},
            )
        return serializer.save()

    @classmethod
    def dump(cls, config: TrainConfig) -> Dict[str, str]:
        """Every field as its config-file string, in declaration order."""
        data = cls(config).data
        return {key: format_config_value(data[key]) for key in cls.key_order()}

    @staticmethod
    def key_order():
        return [field.name for field in dataclass_fields(TrainConfig)]


def read_train_config(path) -> TrainConfig:
    return TrainConfigSerializer.parse(read_config_file(path))


def write_train_config(path, config: TrainConfig) -> Path:
    return write_config_file(
        path,
        TrainConfigSerializer.dump(config),
        order=TrainConfigSerializer.key_order(),
        header=CONFIG_HEADER,
    )
