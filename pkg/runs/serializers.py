import numpy as np
from rest_framework import serializers

from core.exceptions import SimulationError
from emitters.presets import load_preset
from emitters.schemes import Scheme

from .config import BACKENDS, COMMANDS, parse_model_value, sweep_grid


class SweepSerializer(serializers.Serializer):
    """Either an explicit ``values`` list or a ``start``/``stop``/``points`` grid."""
    parameter = serializers.CharField()
    values = serializers.ListField(required=False)
    start = serializers.JSONField(required=False)
    stop = serializers.JSONField(required=False)
    points = serializers.IntegerField(min_value=1, required=False)
    scale = serializers.ChoiceField(choices=['linear', 'log'], required=False, default='linear')

    def validate(self, attrs):
        if 'values' not in attrs and not {'start', 'stop', 'points'} <= set(attrs):
            raise serializers.ValidationError(
                "Give either 'values' or all of 'start', 'stop' and 'points'."
            )
        try:
            grid = sweep_grid(attrs)
        except SimulationError as exc:
            raise serializers.ValidationError({'values': [exc.message]})
        if len(grid) == 0:
            raise serializers.ValidationError({'values': ["Sweep grid is empty."]})
        steps = np.diff(np.asarray(grid, dtype=np.float64))
        if steps.size and not (np.all(steps > 0) or np.all(steps < 0)):
            raise serializers.ValidationError({'values': ["Sweep grid must be strictly monotone."]})
        return attrs


class RunConfigSerializer(serializers.Serializer):
    command = serializers.ChoiceField(choices=list(COMMANDS), required=False, default='steady-sweep')
    preset = serializers.CharField()
    backend = serializers.ChoiceField(choices=list(BACKENDS), required=False, default='exact')
    overrides = serializers.DictField(required=False, default=dict)
    sweep = SweepSerializer(required=False, allow_null=True, default=None)
    outputs = serializers.ListField(child=serializers.CharField(), required=False, default=list)
    options = serializers.DictField(required=False, default=dict)
    out = serializers.CharField(required=False, default='output')

    def validate_overrides(self, value):
        errors = {}
        parsed = {}
        for name, raw in value.items():
            try:
                parsed[name] = parse_model_value(name, raw)
            except SimulationError as exc:
                errors[name] = [exc.message]
        if errors:
            raise serializers.ValidationError(errors)
        return value

    def validate(self, attrs):
        overrides = {name: parse_model_value(name, raw) for name, raw in attrs['overrides'].items()}
        try:
            spec = load_preset(attrs['preset'], **overrides)
        except SimulationError as exc:
            raise serializers.ValidationError(exc.errors or {'preset': [exc.message]})

        backend = attrs['backend']
        command = attrs['command']
        errors = {}
        if backend == 'dicke' and spec.scheme is not Scheme.TWO_LEVEL:
            errors['backend'] = [
                f"The dicke backend needs the two-level scheme, not {spec.scheme.value}."
            ]
        if command == 'dicke-map' and backend != 'dicke':
            errors['backend'] = ["dicke-map runs on the dicke backend only."]
        if command == 'g2' and backend == 'meanfield':
            errors['backend'] = ["g2 needs a density-matrix backend (exact or dicke)."]
        if attrs['options'].get('listing') and backend != 'meanfield':
            errors['options'] = ["The equation listing exists for the meanfield backend only."]

        sweep = attrs.get('sweep')
        if sweep is not None:
            try:
                spec.with_overrides(**{sweep['parameter']: sweep_grid(sweep)[0]})
            except SimulationError as exc:
                errors['sweep'] = exc.errors or [exc.message]
        if errors:
            raise serializers.ValidationError(errors)
        return attrs
