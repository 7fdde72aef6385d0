# =============================================================================
# NV-CENTER LEVEL SCHEMES AND MODEL PARAMETERS
# =============================================================================
"""
Level schemes and the validated ModelSpec every backend consumes.

Frequencies are stored in rad/s as detunings in the frame rotating at the
cavity frequency; rates are stored in 1/s.
"""
import enum
import math
from dataclasses import asdict, dataclass, field, fields, replace

from core.exceptions import ModelValidationError

D_GS = 2.0 * math.pi * 2.87e9
D_ES = 2.0 * math.pi * 1.42e9


class Scheme(str, enum.Enum):
    FIVE_LEVEL = 'five-level'
    THREE_LEVEL = 'three-level'
    TWO_LEVEL = 'two-level'

    @property
    def levels(self):
        return _LEVELS[self]

    @property
    def size(self):
        return len(_LEVELS[self])

    def index(self, name):
        return _LEVELS[self].index(name)

    def has(self, name):
        return name in _LEVELS[self]

    @property
    def excited(self):
        """Levels that count as one excitation for the U(1) charge."""
        return tuple(name for name in _LEVELS[self] if name.startswith('e'))


class ResonantBranch(str, enum.Enum):
    MS0 = 'ms0'
    MS1 = 'ms1'


_LEVELS = {
    Scheme.FIVE_LEVEL: ('g1', 'g2', 'e1', 'e2', 'm'),
    Scheme.THREE_LEVEL: ('g1', 'e1', 'm'),
    Scheme.TWO_LEVEL: ('g1', 'e1'),
}

# rate field -> (source level, target level) of the jump operator |target><source|
DECAY_CHANNELS = {
    'gamma_e1g1': ('e1', 'g1'),
    'gamma_e2g2': ('e2', 'g2'),
    'gamma_g1e1': ('g1', 'e1'),
    'gamma_g2e2': ('g2', 'e2'),
    'gamma_e1m': ('e1', 'm'),
    'gamma_e2m': ('e2', 'm'),
    'gamma_mg1': ('m', 'g1'),
    'gamma_mg2': ('m', 'g2'),
}

# dephasing field -> (excited, ground)
DEPHASING_CHANNELS = {
    'chi_e1g1': ('e1', 'g1'),
    'chi_e2g2': ('e2', 'g2'),
}

# optical lines coupled to the cavity: (excited, ground, detuning field)
OPTICAL_LINES = (
    ('e1', 'g1', 'omega_e1g1'),
    ('e2', 'g2', 'omega_e2g2'),
)

RATE_FIELDS = tuple(DECAY_CHANNELS) + tuple(DEPHASING_CHANNELS)

# swept aliases that set several fields at once
ALIASES = {
    'gamma_pump': ('gamma_g1e1', 'gamma_g2e2'),
    'gamma_ge': ('gamma_g1e1', 'gamma_g2e2'),
    'chi': ('chi_e1g1', 'chi_e2g2'),
}


def fields_of(level_names):
    """Rate and detuning fields that only make sense if all their levels exist."""
    absent = []
    for name, (source, target) in DECAY_CHANNELS.items():
        if source not in level_names or target not in level_names:
            absent.append(name)
    for name, (excited, ground) in DEPHASING_CHANNELS.items():
        if excited not in level_names or ground not in level_names:
            absent.append(name)
    return absent


@dataclass(frozen=True)
class ModelSpec:
    scheme: Scheme
    N: int
    g: float
    kappa: float
    omega_c: float = 0.0
    omega_e1g1: float | None = None
    omega_e2g2: float | None = None
    gamma_e1g1: float = 0.0
    gamma_e2g2: float = 0.0
    gamma_g1e1: float = 0.0
    gamma_g2e2: float = 0.0
    chi_e1g1: float = 0.0
    chi_e2g2: float = 0.0
    gamma_e1m: float = 0.0
    gamma_e2m: float = 0.0
    gamma_mg1: float = 0.0
    gamma_mg2: float = 0.0
    n_max: int = 5
    resonant_branch: ResonantBranch = ResonantBranch.MS0
    D_gs: float = D_GS
    D_es: float = D_ES
    emitter_detuning: float = 0.0
    emitter_detunings: tuple = ()
    metastable_lifetime: float | None = None
    label: str = field(default='', compare=False)

    @property
    def levels(self):
        return self.scheme.size

    @property
    def purcell_rate(self):
        return 4.0 * self.g ** 2 / self.kappa

    @property
    def rate_scale(self):
        """Largest rate or frequency magnitude; sets the generator scale."""
        values = [self.kappa, self.g, abs(self.omega_c)]
        values += [abs(getattr(self, name) or 0.0) for name in ('omega_e1g1', 'omega_e2g2')]
        values += [getattr(self, name) for name in RATE_FIELDS]
        values += [abs(d) for d in self.emitter_detunings]
        return max(values)

    @property
    def slowest_rate(self):
        rates = [getattr(self, name) for name in RATE_FIELDS if getattr(self, name) > 0]
        rates.append(self.kappa)
        return min(rates)

    def detuning(self, line, emitter=0):
        """Detuning of optical line 'e1g1' / 'e2g2' for one emitter (rad/s)."""
        base = getattr(self, f'omega_{line}')
        extra = self.emitter_detunings[emitter] if self.emitter_detunings else 0.0
        return base + extra

    def as_dict(self):
        data = asdict(self)
        data['scheme'] = Scheme(self.scheme).value
        data['resonant_branch'] = ResonantBranch(self.resonant_branch).value
        data['emitter_detunings'] = list(self.emitter_detunings)
        data.pop('label')
        return data

    def with_overrides(self, **changes):
        """Apply field changes (aliases allowed) and re-validate."""
        expanded = {}
        for key, value in changes.items():
            for target in ALIASES.get(key, (key,)):
                if target in ('gamma_g2e2', 'chi_e2g2') and not self.scheme.has('e2'):
                    continue
                expanded[target] = value
        unknown = sorted(set(expanded) - {f.name for f in fields(self)})
        if unknown:
            raise ModelValidationError({name: ["Unknown model parameter."] for name in unknown})
        if set(expanded) & {'resonant_branch', 'D_gs', 'D_es', 'emitter_detuning'}:
            expanded.setdefault('omega_e1g1', None)
            expanded.setdefault('omega_e2g2', None)
        return validate(replace(self, **expanded))


def resolve_detunings(resonant_branch, D_gs=D_GS, D_es=D_ES, common=0.0):
    """Optical detunings relative to the cavity for the chosen resonant branch."""
    branch = ResonantBranch(resonant_branch)
    if branch is ResonantBranch.MS0:
        return common, D_es - D_gs + common
    return D_gs - D_es + common, common


def validate(spec):
    """Run every ModelSpec invariant; return the frozen, completed spec."""
    from .serializers import ModelSpecSerializer

    data = spec.as_dict() if isinstance(spec, ModelSpec) else dict(spec)
    serializer = ModelSpecSerializer(data=data)
    if not serializer.is_valid():
        raise ModelValidationError(
            {name: [str(message) for message in messages]
             for name, messages in serializer.errors.items()}
        )
    return serializer.save()


def reduce_scheme(spec, scheme):
    """Drop the levels ``scheme`` lacks, zeroing their rates."""
    scheme = Scheme(scheme)
    absent = fields_of(scheme.levels)
    changes = {name: 0.0 for name in absent}
    if not scheme.has('m'):
        changes['metastable_lifetime'] = None
    return validate(replace(spec, scheme=scheme, **changes))
