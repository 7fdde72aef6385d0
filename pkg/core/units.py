"""
Unit-suffixed scalar parsing for presets, run configs and ``--override``.

Rates written in Hz are taken literally as events per second. Angular
quantities are written with a ``2pi*`` prefix (``"2.87 2pi*GHz"`` or
``"2pi*2.87 GHz"``) and stored in rad/s. Lifetimes come back in seconds.
"""
import math
import re

from .exceptions import ConfigError

_SCALE = {
    'hz': 1.0,
    'khz': 1e3,
    'mhz': 1e6,
    'ghz': 1e9,
    'thz': 1e12,
    '1/s': 1.0,
    'rad/s': 1.0,
}

_TIME = {
    's': 1.0,
    'ms': 1e-3,
    'us': 1e-6,
    'µs': 1e-6,
    'ns': 1e-9,
    'ps': 1e-12,
}

_PATTERN = re.compile(
    r'^\s*(?P<pre>2pi\s*\*\s*)?(?P<num>[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?)'
    r'\s*(?P<unit>(2pi\s*\*\s*)?(1/s|[A-Za-zµ/]+))?\s*$'
)


def parse_quantity(value, kind='rate'):
    """
    Parse ``value`` into SI units.

    ``kind`` is ``'rate'`` (1/s or rad/s) or ``'time'`` (s). Plain numbers
    pass through unchanged.
    """
    if isinstance(value, bool):
        raise ConfigError(f"Expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"Expected a number or unit string, got {value!r}")

    match = _PATTERN.match(value)
    if not match:
        raise ConfigError(f"Cannot parse quantity '{value}'")

    number = float(match.group('num'))
    unit = (match.group('unit') or '').replace(' ', '').lower()
    angular = bool(match.group('pre'))
    if unit.startswith('2pi*'):
        angular = True
        unit = unit[4:]

    if not unit:
        scale = 1.0
    elif kind == 'time':
        if unit not in _TIME or angular:
            raise ConfigError(f"'{value}' is not a time")
        scale = _TIME[unit]
    else:
        if unit in _TIME:
            raise ConfigError(f"'{value}' is a time where a rate was expected")
        if unit not in _SCALE:
            raise ConfigError(f"Unknown unit '{unit}' in '{value}'")
        scale = _SCALE[unit]

    if angular:
        scale *= 2.0 * math.pi
    return number * scale


def parse_assignment(text):
    """Split a ``key=value`` override, keeping the value as a string."""
    if '=' not in text:
        raise ConfigError(f"Override '{text}' must look like key=value")
    key, value = text.split('=', 1)
    key = key.strip()
    if not key:
        raise ConfigError(f"Override '{text}' has an empty key")
    return key, value.strip()
