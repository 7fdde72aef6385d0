"""
RunConfig: what one ``nvsim`` invocation computes.

A config names a model preset plus overrides, the backend, an optional
one-parameter sweep, the requested output files and per-command options.
Files are YAML; ``--override key=value`` entries go through the same unit
parser as the presets.
"""
import copy
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from core.exceptions import ConfigError, ModelValidationError
from core.units import parse_assignment, parse_quantity
from emitters.presets import load_preset

logger = logging.getLogger(__name__)

COMMANDS = ('steady-sweep', 'g2', 'pulse', 'spectrum', 'dicke-map')
BACKENDS = ('exact', 'dicke', 'meanfield')

_INTEGER_FIELDS = ('N', 'n_max')
_TEXT_FIELDS = ('scheme', 'resonant_branch')
_TIME_FIELDS = ('metastable_lifetime',)
_ANGULAR_FIELDS = ('g', 'omega_c', 'omega_e1g1', 'omega_e2g2', 'D_gs', 'D_es',
                   'emitter_detuning', 'emitter_detunings')


# =============================================================================
# VALUE PARSING
# =============================================================================

def parse_model_value(name, value):
    """Parse one ModelSpec override written as a number or unit string."""
    if name in _INTEGER_FIELDS:
        try:
            number = float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"'{name}' must be an integer, got {value!r}")
        if not number.is_integer():
            raise ConfigError(f"'{name}' must be an integer, got {value!r}")
        return int(number)
    if name in _TEXT_FIELDS:
        return str(value)
    if name == 'emitter_detunings':
        items = value.split(',') if isinstance(value, str) else value
        return tuple(parse_quantity(item.strip() if isinstance(item, str) else item) for item in items)
    if name in _TIME_FIELDS:
        return None if value is None else parse_quantity(value, kind='time')
    return parse_quantity(value)


def unit_of(name):
    if name in _INTEGER_FIELDS:
        return ''
    if name in _TIME_FIELDS:
        return 's'
    if name in _ANGULAR_FIELDS:
        return 'rad/s'
    return '1/s'


def column_label(name):
    """Column header with its unit, e.g. ``gamma_pump[1/s]``."""
    unit = unit_of(name)
    return f"{name}[{unit}]" if unit else name


def sweep_grid(sweep):
    """Numeric values of a sweep section, in the order they are run."""
    parameter = sweep['parameter']
    if sweep.get('values') is not None:
        return [parse_model_value(parameter, value) for value in sweep['values']]
    start = parse_model_value(parameter, sweep['start'])
    stop = parse_model_value(parameter, sweep['stop'])
    points = int(sweep['points'])
    if sweep.get('scale', 'linear') == 'log':
        if start <= 0 or stop <= 0:
            raise ConfigError("A log sweep needs positive start and stop values")
        grid = np.geomspace(start, stop, points)
    else:
        grid = np.linspace(start, stop, points)
    if parameter in _INTEGER_FIELDS:
        return [int(round(value)) for value in grid]
    return [float(value) for value in grid]


# =============================================================================
# RUN CONFIG
# =============================================================================

@dataclass(frozen=True)
class RunConfig:
    preset: str
    command: str = 'steady-sweep'
    backend: str = 'exact'
    overrides: dict = field(default_factory=dict)
    sweep: dict | None = None
    outputs: list = field(default_factory=list)
    options: dict = field(default_factory=dict)
    out: str = 'output'

    @classmethod
    def from_dict(cls, data):
        from .serializers import RunConfigSerializer

        serializer = RunConfigSerializer(data=data)
        if not serializer.is_valid():
            raise ModelValidationError(_flatten(serializer.errors), message="Invalid run configuration")
        attrs = dict(serializer.validated_data)
        if attrs.get('sweep') is not None:
            attrs['sweep'] = dict(attrs['sweep'])
        return cls(**copy.deepcopy(attrs))

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Config file '{path}' does not exist")
        try:
            with path.open() as handle:
                data = yaml.safe_load(handle) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"Config file '{path}' is not valid YAML: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"Config file '{path}' must hold a mapping")
        logger.debug(f"Loaded run config from {path}")
        return cls.from_dict(data)

    @classmethod
    def from_header(cls, metadata):
        """Rebuild the config stored in a CSV metadata header."""
        if 'config' not in metadata:
            raise ConfigError("Metadata header has no 'config' section")
        return cls.from_dict(metadata['config'])

    def with_arguments(self, command=None, backend=None, out=None, overrides=(), options=None):
        """Apply command-line choices on top of the file contents and re-validate."""
        data = self.as_dict()
        data['out'] = self.out
        if command:
            data['command'] = command
        if backend:
            data['backend'] = backend
        if out:
            data['out'] = str(out)
        for text in overrides:
            key, value = parse_assignment(text)
            data['overrides'][key] = value
        if options:
            data['options'].update(options)
        return RunConfig.from_dict(data)

    # -------------------------------------------------------------------------
    # Resolution
    # -------------------------------------------------------------------------

    def parsed_overrides(self):
        return {name: parse_model_value(name, value) for name, value in self.overrides.items()}

    def resolve(self):
        """The validated ModelSpec of the unswept configuration."""
        return load_preset(self.preset, **self.parsed_overrides())

    def sweep_values(self):
        """Sweep grid, or ``[None]`` for a single-point run."""
        if self.sweep is None:
            return [None]
        return sweep_grid(self.sweep)

    @property
    def sweep_parameter(self):
        return self.sweep['parameter'] if self.sweep else None

    def point_spec(self, spec, value):
        if value is None:
            return spec
        return spec.with_overrides(**{self.sweep_parameter: value})

    def option(self, name, default=None, kind=None):
        """Observable option, parsed as a ``'rate'`` or ``'time'`` quantity when ``kind`` is set."""
        value = self.options.get(name, default)
        if value is None or kind is None:
            return value
        return parse_quantity(value, kind=kind)

    def wants(self, output):
        return not self.outputs or output in self.outputs

    def as_dict(self):
        """Canonical form without the output directory."""
        data = copy.deepcopy(asdict(self))
        data.pop('out')
        return data

    def as_metadata(self, spec, version):
        return {
            'version': version,
            'config': self.as_dict(),
            'model': spec.as_dict(),
        }


def _flatten(errors):
    """DRF error structure as plain strings keyed by field."""
    if isinstance(errors, dict):
        return {key: _flatten(value) for key, value in errors.items()}
    if isinstance(errors, list):
        return [_flatten(item) for item in errors]
    return str(errors)
