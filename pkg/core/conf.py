"""
Simulation settings with built-in defaults.

Project overrides live in ``settings.SIMULATION``; nested dicts are merged
key by key so a project only states what it changes.
"""
import copy
from pathlib import Path

from django.conf import settings

from .exceptions import ConfigError

DEFAULTS = {
    'PRESETS_DIR': Path(__file__).resolve().parent.parent / 'emitters' / 'presets',
    'DEFAULT_N_MAX': 5,
    # vectorized size (D**2) above which build_qme refuses to assemble
    'MAX_EXACT_DIMENSION': 400_000,
    # kets (Dicke states x Fock states) the Dicke backend stores densely
    'MAX_DICKE_KETS': 6000,
    'SOLVER': {
        'METHOD': 'BDF',
        'RTOL': 1e-8,
        'ATOL': 1e-10,
    },
    'STEADY_STATE': {
        'RESIDUAL_TOL': 1e-10,
        'REFINEMENT_STEPS': 3,
        'FALLBACK_LIFETIMES': 50.0,
        'STATIONARITY_TOL': 1e-8,
        'MULTIPLICITY_TOL': 1e-6,
    },
    'MEANFIELD': {
        'T_END': None,
        'RESIDUAL_TOL': 1e-10,
        'CHUNKS': 40,
    },
    'G2': {
        'TAU_MIN': 1e-11,
        'TAU_MAX': 2e-6,
        'POINTS': 240,
        'DIP_WINDOW': (0.0, 5e-9),
        'SHOULDER_WINDOW': (5e-9, 2e-6),
        'THRESHOLD': 0.015,
    },
    'SPECTRUM': {
        'TAU_MAX': 40e-9,
        'POINTS': 4096,
        'DECAY_FLOOR': 1e-4,
        'PEAK_PROMINENCE': 0.05,
        'LOW_CONFIDENCE_RESIDUAL': 0.2,
    },
    'PULSE': {
        'T_END': 50e-9,
        'POINTS': 501,
        'POPULATION_SAMPLES': 11,
    },
    'CSV_FLOAT_FORMAT': '%.10e',
    'RECORD_RUNS': True,
    'DEFAULT_WORKERS': 1,
}


def _merge(base, override):
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def simulation_settings():
    """Return the merged SIMULATION settings dict."""
    project = getattr(settings, 'SIMULATION', {}) if settings.configured else {}
    return _merge(DEFAULTS, project)


_MISSING = object()


def simulation_setting(path, default=_MISSING):
    """
    Look up a dotted key such as ``'SOLVER.RTOL'``.

    A missing key returns ``default`` when one is given (None included)
    and raises ConfigError otherwise.
    """
    node = simulation_settings()
    for part in path.split('.'):
        if not isinstance(node, dict) or part not in node:
            if default is not _MISSING:
                return default
            raise ConfigError(f"Unknown simulation setting '{path}'")
        node = node[part]
    return node
