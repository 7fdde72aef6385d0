"""
Rate presets and the shipped YAML model presets.

A preset document lists lifetimes and branching ratios per source level
(rates follow as ratio / lifetime) plus cavity, splitting, pump and
dephasing parameters written with unit suffixes.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from core.conf import simulation_setting
from core.exceptions import ConfigError, ModelValidationError
from core.units import parse_quantity

from .schemes import D_ES, D_GS, DECAY_CHANNELS, validate

logger = logging.getLogger(__name__)

_CHANNEL_FIELD = {channel: name for name, channel in DECAY_CHANNELS.items()}


@dataclass(frozen=True)
class RatePreset:
    """Lifetimes (s) per level and branching ratios per decay channel."""
    lifetimes: dict
    branching: dict = field(default_factory=dict)


def rates_from_preset(preset):
    """
    Turn lifetimes and branching ratios into ModelSpec rate fields.

    Returns a partial dict of ModelSpec fields, including the default
    zero-field splittings.
    """
    errors = {}
    rates = {}
    for source, lifetime in preset.lifetimes.items():
        ratios = preset.branching.get(source, {})
        if not lifetime > 0:
            errors[source] = [f"Lifetime of level {source} must be > 0."]
            continue
        if not ratios:
            errors[source] = [f"Level {source} has a lifetime but no decay channels."]
            continue
        total = sum(ratios.values())
        if abs(total - 1.0) > 1e-12:
            errors[source] = [f"Branching ratios of level {source} sum to {total:.12g}, not 1."]
            continue
        for target, ratio in ratios.items():
            name = _CHANNEL_FIELD.get((source, target))
            if name is None:
                errors[f"{source}->{target}"] = ["No such decay channel."]
                continue
            if ratio < 0:
                errors[f"{source}->{target}"] = ["Branching ratio must be >= 0."]
                continue
            rates[name] = ratio / lifetime

    if errors:
        raise ModelValidationError(errors)

    rates.setdefault('D_gs', D_GS)
    rates.setdefault('D_es', D_ES)
    if 'm' in preset.lifetimes:
        rates['metastable_lifetime'] = preset.lifetimes['m']
    return rates


# =============================================================================
# PRESET FILES
# =============================================================================

def _presets_dir():
    return Path(simulation_setting('PRESETS_DIR'))


def list_presets():
    """Names and descriptions of the shipped presets, sorted by name."""
    items = []
    for path in sorted(_presets_dir().glob('*.yaml')):
        with path.open() as handle:
            document = yaml.safe_load(handle) or {}
        items.append({
            'name': document.get('name', path.stem),
            'scheme': document.get('scheme'),
            'description': (document.get('description') or '').strip(),
        })
    return items


def load_preset_document(name):
    path = _presets_dir() / f"{name}.yaml"
    if not path.exists():
        known = ", ".join(item['name'] for item in list_presets())
        raise ConfigError(f"Unknown preset '{name}' (known: {known})")
    with path.open() as handle:
        return yaml.safe_load(handle) or {}


def spec_fields_from_document(document):
    """Flatten a preset document into raw ModelSpec fields (SI units)."""
    try:
        data = {
            'scheme': document['scheme'],
            'N': int(document.get('N', 1)),
            'n_max': int(document.get('n_max', simulation_setting('DEFAULT_N_MAX'))),
            'resonant_branch': document.get('resonant_branch', 'ms0'),
        }
        cavity = document.get('cavity', {})
        data['kappa'] = parse_quantity(cavity['kappa'])
        data['omega_c'] = parse_quantity(cavity.get('omega_c', 0.0))
        if 'g' in cavity:
            data['g'] = parse_quantity(cavity['g'])
        else:
            purcell = parse_quantity(cavity['purcell_rate'])
            data['g'] = math.sqrt(purcell * data['kappa']) / 2.0

        for key, value in (document.get('splittings') or {}).items():
            data[key] = parse_quantity(value)

        preset = RatePreset(
            lifetimes={
                level: parse_quantity(value, kind='time')
                for level, value in (document.get('lifetimes') or {}).items()
            },
            branching={
                level: {target: float(ratio) for target, ratio in ratios.items()}
                for level, ratios in (document.get('branching') or {}).items()
            },
        )
        data.update({k: v for k, v in rates_from_preset(preset).items() if k not in data})

        for section in ('pump', 'dephasing', 'detunings'):
            for key, value in (document.get(section) or {}).items():
                data[key] = parse_quantity(value)
    except KeyError as exc:
        raise ConfigError(f"Preset is missing required entry {exc}") from exc
    return data


# =============================================================================
# CALIBRATED OVERLAYS
# =============================================================================

CALIBRATED_DIR = 'calibrated'


def calibration_path(name):
    return _presets_dir() / CALIBRATED_DIR / f"{name}.yaml"


def load_calibration(name):
    """Fitted parameters written by ``nvsim calibrate --write``; {} if none."""
    path = calibration_path(name)
    if not path.exists():
        return {}
    with path.open() as handle:
        document = yaml.safe_load(handle) or {}
    return {key: parse_quantity(value) for key, value in (document.get('parameters') or {}).items()}


def write_calibration(name, document):
    """Store a calibration overlay; later load_preset calls apply it."""
    path = calibration_path(name)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w') as handle:
        yaml.safe_dump(document, handle, sort_keys=False, default_flow_style=False)
    logger.info(f"Wrote calibration overlay {path}")
    return path


def load_preset(name, **overrides):
    """
    Load a shipped preset as a validated ModelSpec.

    A calibration overlay, when present, is applied before ``overrides``.
    """
    document = load_preset_document(name)
    data = spec_fields_from_document(document)
    spec = validate(data)
    logger.debug(f"Loaded preset {name}: N={spec.N}, scheme={spec.scheme.value}")
    calibrated = load_calibration(name)
    if calibrated:
        logger.debug(f"Applying calibration overlay to {name}: {sorted(calibrated)}")
        spec = spec.with_overrides(**calibrated)
    if overrides:
        spec = spec.with_overrides(**overrides)
    return replace(spec, label=name)
