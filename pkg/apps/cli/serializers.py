"""
Dataset File Serializers
"""
from rest_framework import serializers

from apps.geometry.structures import BoundingBox


class ManifestRowSerializer(serializers.Serializer):
    """
    One `path,label` manifest row. Paths are kept as written; resolving
    them against the manifest directory is the caller's job.
    """
    path = serializers.CharField(trim_whitespace=True)
    label = serializers.IntegerField(min_value=1)


class GlyphRowSerializer(ManifestRowSerializer):
    """
    A manifest row plus the planted glyph box in canvas pixels.
    """
    x_min = serializers.FloatField(min_value=0.0)
    y_min = serializers.FloatField(min_value=0.0)
    x_max = serializers.FloatField()
    y_max = serializers.FloatField()

    def validate(self, attrs):
        if attrs['x_max'] <= attrs['x_min'] or attrs['y_max'] <= attrs['y_min']:
            raise serializers.ValidationError('Glyph box has no area.')
        return attrs

    @staticmethod
    def box(attrs) -> BoundingBox:
        return BoundingBox(attrs['x_min'], attrs['y_min'], attrs['x_max'], attrs['y_max'])
