import math

from rest_framework import serializers

from .schemes import (
    DECAY_CHANNELS, DEPHASING_CHANNELS, ModelSpec, ResonantBranch, Scheme,
    fields_of, resolve_detunings,
)


def _rate_field():
    return serializers.FloatField(min_value=0.0, required=False, default=0.0)


class ModelSpecSerializer(serializers.Serializer):
    """Validates raw model parameters and builds a frozen ModelSpec."""
    scheme = serializers.ChoiceField(choices=[s.value for s in Scheme])
    N = serializers.IntegerField(min_value=1)
    g = serializers.FloatField()
    kappa = serializers.FloatField()
    omega_c = serializers.FloatField(required=False, default=0.0)
    omega_e1g1 = serializers.FloatField(required=False, allow_null=True, default=None)
    omega_e2g2 = serializers.FloatField(required=False, allow_null=True, default=None)
    n_max = serializers.IntegerField(min_value=1, required=False, default=5)
    resonant_branch = serializers.ChoiceField(
        choices=[b.value for b in ResonantBranch], required=False, default=ResonantBranch.MS0.value
    )
    D_gs = serializers.FloatField(required=False, default=2.0 * math.pi * 2.87e9)
    D_es = serializers.FloatField(required=False, default=2.0 * math.pi * 1.42e9)
    emitter_detuning = serializers.FloatField(required=False, default=0.0)
    emitter_detunings = serializers.ListField(
        child=serializers.FloatField(), required=False, default=list
    )
    metastable_lifetime = serializers.FloatField(required=False, allow_null=True, default=None)

    def get_fields(self):
        declared = super().get_fields()
        for name in list(DECAY_CHANNELS) + list(DEPHASING_CHANNELS):
            declared[name] = _rate_field()
        return declared

    def validate_g(self, value):
        if not value > 0:
            raise serializers.ValidationError("Coupling g must be > 0.")
        return value

    def validate_kappa(self, value):
        if not value > 0:
            raise serializers.ValidationError("Cavity damping kappa must be > 0.")
        return value

    def validate_metastable_lifetime(self, value):
        if value is not None and not value > 0:
            raise serializers.ValidationError("Lifetime must be > 0.")
        return value

    def validate(self, attrs):
        errors = {}
        scheme = Scheme(attrs['scheme'])

        for name in fields_of(scheme.levels):
            if attrs.get(name, 0.0) != 0.0:
                errors[name] = [f"Must be 0 for the {scheme.value} scheme (level absent)."]

        detunings = attrs.get('emitter_detunings') or []
        if detunings and len(detunings) != attrs['N']:
            errors['emitter_detunings'] = [
                f"Expected {attrs['N']} per-emitter detunings, got {len(detunings)}."
            ]

        lifetime = attrs.get('metastable_lifetime')
        if lifetime is not None and scheme.has('m'):
            total = attrs.get('gamma_mg1', 0.0) + attrs.get('gamma_mg2', 0.0)
            if total <= 0 or not math.isclose(1.0 / total, lifetime, rel_tol=1e-9):
                errors['metastable_lifetime'] = [
                    "1/(gamma_mg1 + gamma_mg2) does not match the metastable lifetime."
                ]

        if errors:
            raise serializers.ValidationError(errors)

        omega_e1g1, omega_e2g2 = resolve_detunings(
            attrs['resonant_branch'], attrs['D_gs'], attrs['D_es'], attrs['emitter_detuning']
        )
        if attrs.get('omega_e1g1') is None:
            attrs['omega_e1g1'] = omega_e1g1
        if attrs.get('omega_e2g2') is None:
            attrs['omega_e2g2'] = omega_e2g2
        return attrs

    def create(self, validated_data):
        data = dict(validated_data)
        data['scheme'] = Scheme(data['scheme'])
        data['resonant_branch'] = ResonantBranch(data['resonant_branch'])
        data['emitter_detunings'] = tuple(data.get('emitter_detunings') or ())
        return ModelSpec(**data)
