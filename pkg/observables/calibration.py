"""
Fit model rates so a preset reproduces target g2 feature values.

The preset's ``calibration`` section names the targets (any of g0, g1,
g2), a tolerance and the free parameters with their bounds. Parameters
are varied on a log scale by a bounded curve_fit of the feature values;
every evaluation is a product-space steady state plus a g2 curve.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from core.exceptions import ConfigError, ConvergenceError, SimulationError
from core.units import parse_quantity
from emitters.presets import load_preset, load_preset_document, write_calibration
from emitters.schemes import ALIASES
from master_equation.liouville import build_qme
from master_equation.solvers import steady_state

from .correlations import default_g2_taus, g2
from .features import extract_g2_features

logger = logging.getLogger(__name__)

FEATURES = ('g0', 'g1', 'g2')

# residual reported for parameter sets the model cannot evaluate
FAILED_RESIDUAL = 10.0


@dataclass(frozen=True)
class CalibrationPlan:
    preset: str
    targets: dict
    bounds: dict
    N: int = 2
    tolerance: float = 0.15
    max_evaluations: int = 80

    @classmethod
    def from_preset(cls, name):
        document = load_preset_document(name)
        section = document.get('calibration')
        if not section:
            raise ConfigError(f"Preset '{name}' has no calibration section")

        targets = {key: float(value) for key, value in (section.get('targets') or {}).items()}
        unknown = sorted(set(targets) - set(FEATURES))
        if not targets or unknown:
            raise ConfigError(f"Calibration targets must be among {', '.join(FEATURES)}; got {sorted(targets)}")

        bounds = {}
        for parameter, bound in (section.get('parameters') or {}).items():
            if not isinstance(bound, (list, tuple)) or len(bound) != 2:
                raise ConfigError(f"Calibration bounds of '{parameter}' must be [low, high]")
            low, high = (parse_quantity(value) for value in bound)
            if not 0 < low < high:
                raise ConfigError(f"Calibration bounds of '{parameter}' need 0 < low < high")
            bounds[parameter] = (low, high)
        if not bounds:
            raise ConfigError(f"Preset '{name}' lists no calibration parameters")

        return cls(
            preset=name,
            targets=targets,
            bounds=bounds,
            N=int(section.get('N', document.get('N', 2))),
            tolerance=float(section.get('tolerance', 0.15)),
            max_evaluations=int(section.get('max_evaluations', 80)),
        )


@dataclass
class CalibrationResult:
    plan: CalibrationPlan
    parameters: dict
    features: object
    evaluations: int = 0
    spec: object = None

    @property
    def deviations(self):
        return {name: getattr(self.features, name) - target for name, target in self.plan.targets.items()}

    @property
    def converged(self):
        return all(abs(value) <= self.plan.tolerance for value in self.deviations.values())

    def as_document(self):
        """Overlay stored next to the preset."""
        return {
            'preset': self.plan.preset,
            'N': self.plan.N,
            'parameters': {name: float(value) for name, value in self.parameters.items()},
            'targets': dict(self.plan.targets),
            'features': {name: float(getattr(self.features, name)) for name in FEATURES},
            'tolerance': self.plan.tolerance,
            'evaluations': self.evaluations,
        }


@dataclass
class _Evaluation:
    parameters: dict
    features: object
    deviations: np.ndarray
    spec: object = None


class G2Calibration:
    """Bounded least-squares fit of g2 feature values; keeps every evaluation."""

    def __init__(self, plan, taus=None):
        self.plan = plan
        self.taus = default_g2_taus() if taus is None else np.asarray(taus, dtype=np.float64)
        self.base = load_preset(plan.preset, N=plan.N)
        self.names = list(plan.bounds)
        # log10 coordinates centred on each bound's geometric mean
        self.centres = np.array([
            0.5 * (math.log10(low) + math.log10(high)) for low, high in plan.bounds.values()
        ])
        self.history = []

    def current_value(self, name):
        return float(getattr(self.base, ALIASES.get(name, (name,))[0]))

    def parameters_at(self, x):
        return {name: float(10.0 ** (centre + value)) for name, centre, value in zip(self.names, self.centres, x)}

    def evaluate(self, parameters):
        spec = self.base.with_overrides(**parameters)
        liouvillian = build_qme(spec)
        curve = g2(liouvillian, steady_state(liouvillian), self.taus)
        return spec, extract_g2_features(curve)

    def model(self, _, *x):
        """Feature values at log coordinates ``x``, in target order."""
        targets = np.array(list(self.plan.targets.values()))
        parameters = self.parameters_at(x)
        try:
            spec, features = self.evaluate(parameters)
        except SimulationError as exc:
            logger.warning(f"Calibration point {parameters} failed: {exc.message}")
            return targets + FAILED_RESIDUAL
        values = np.array([getattr(features, name) for name in self.plan.targets])
        deviations = values - targets
        self.history.append(_Evaluation(parameters, features, deviations, spec))
        logger.info(
            f"Calibration {len(self.history)}: "
            + ", ".join(f"{name}={value:.4g}" for name, value in parameters.items())
            + " -> " + ", ".join(f"{name}={getattr(features, name):.3f}" for name in self.plan.targets)
        )
        return values

    def start(self):
        low = np.log10([bound[0] for bound in self.plan.bounds.values()]) - self.centres
        high = np.log10([bound[1] for bound in self.plan.bounds.values()]) - self.centres
        x0 = np.log10([max(self.current_value(name), 1e-300) for name in self.names]) - self.centres
        margin = 1e-6 * (high - low)
        return np.clip(x0, low + margin, high - margin), (low, high)

    def run(self):
        x0, bounds = self.start()
        targets = np.array(list(self.plan.targets.values()))
        try:
            curve_fit(
                self.model, np.arange(targets.size), targets, p0=x0, bounds=bounds,
                diff_step=0.02, xtol=1e-3, ftol=1e-4, max_nfev=self.plan.max_evaluations,
            )
        except RuntimeError as exc:
            logger.warning(f"Calibration fit stopped early: {exc}")
        if not self.history:
            raise ConvergenceError(f"No calibration point of '{self.plan.preset}' could be evaluated")

        best = min(self.history, key=lambda item: float(np.abs(item.deviations).max()))
        result = CalibrationResult(self.plan, best.parameters, best.features, len(self.history), best.spec)
        level = logging.INFO if result.converged else logging.WARNING
        logger.log(level, f"Calibration of {self.plan.preset} after {result.evaluations} evaluation(s): "
                          + ", ".join(f"{name} off by {value:+.3f}" for name, value in result.deviations.items()))
        return result


def calibrate_preset(name, taus=None, write=False):
    """
    Fit the preset's calibration parameters; with ``write`` the result is
    stored as the preset's overlay.

    Raises ConvergenceError if the best point misses the tolerance.
    """
    result = G2Calibration(CalibrationPlan.from_preset(name), taus=taus).run()
    if not result.converged:
        raise ConvergenceError(
            f"Calibration of '{name}' missed the tolerance {result.plan.tolerance}: "
            + ", ".join(f"{key} {value:+.3f}" for key, value in result.deviations.items())
        )
    if write:
        write_calibration(name, result.as_document())
    return result
