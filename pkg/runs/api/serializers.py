from rest_framework import serializers

from ..models import SimulationRun


# =============================================================================
# RUN REGISTRY
# =============================================================================

class SimulationRunSerializer(serializers.ModelSerializer):
    duration = serializers.FloatField(read_only=True)

    class Meta:
        model = SimulationRun
        fields = [
            'id', 'command', 'backend', 'preset', 'status', 'exit_code', 'points',
            'output_dir', 'files', 'message', 'created_at', 'finished_at', 'duration',
        ]


class SimulationRunDetailSerializer(SimulationRunSerializer):
    class Meta(SimulationRunSerializer.Meta):
        fields = SimulationRunSerializer.Meta.fields + ['config']


# =============================================================================
# PRESETS
# =============================================================================

class PresetSerializer(serializers.Serializer):
    name = serializers.CharField()
    scheme = serializers.CharField(allow_null=True)
    description = serializers.CharField(allow_blank=True)
