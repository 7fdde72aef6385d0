"""
Collective quantities of density-matrix states and the superradiant pulse
protocol.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from core.exceptions import ConfigError, NumericalDomainError
from core.operators import DensityState
from cumulant.algebra import PHOTON_NUMBER, transition
from cumulant.equations import MeanFieldSystem
from cumulant.integrate import integrate
from dicke.liouvillian import build_dicke_liouvillian, dicke_populations, dicke_state
from emitters.schemes import Scheme
from master_equation.liouville import build_qme, product_signature
from master_equation.solvers import evolve, steady_state

logger = logging.getLogger(__name__)

DENSITY_BACKENDS = ('exact', 'dicke')


def build_liouvillian(spec, backend):
    """Generator of a density-matrix backend ('exact' or 'dicke')."""
    if backend == 'exact':
        return build_qme(spec)
    if backend == 'dicke':
        return build_dicke_liouvillian(spec)
    raise ConfigError(f"'{backend}' is not a density-matrix backend")


def collective_numbers(liouvillian, state):
    """(J, M) with J(J+1) = <J^2> and M = <Jz> of the g1/e1 pseudo-spin."""
    j_sq = liouvillian.expect('J2', state).real
    argument = 1.0 + 4.0 * j_sq
    if argument < 0:
        raise NumericalDomainError(f"<J^2> = {j_sq:.6g} is negative")
    return 0.5 * (math.sqrt(argument) - 1.0), liouvillian.expect('Jz', state).real


def inverted_state(liouvillian):
    """Every emitter in e1, cavity empty."""
    spec = liouvillian.spec
    if liouvillian.signature == product_signature(spec):
        level = spec.scheme.index('e1')
        index = int(np.ravel_multi_index((level,) * spec.N + (0,), liouvillian.signature.dims))
        return DensityState.basis(liouvillian.signature, index, blocks=liouvillian.space.blocks)
    return dicke_state(liouvillian, spec.N / 2, spec.N / 2)


# =============================================================================
# SUPERRADIANT PULSE
# =============================================================================

@dataclass
class PulseResult:
    times: np.ndarray
    radiation: np.ndarray
    photon_number: np.ndarray
    inversion: np.ndarray
    populations: list = field(default_factory=list)

    @property
    def peak_index(self):
        return int(np.argmax(self.radiation))

    @property
    def peak_rate(self):
        return float(self.radiation[self.peak_index])

    @property
    def peak_time(self):
        return float(self.times[self.peak_index])

    def is_delayed(self):
        """Burst peaks after t=0 rather than decaying monotonically."""
        return 0 < self.peak_index < len(self.times) - 1

    def as_frame(self):
        return pd.DataFrame({
            't[s]': self.times,
            'radiation[1/s]': self.radiation,
            'photon_number': self.photon_number,
            'inversion': self.inversion,
        })


def superradiant_pulse(spec, times, backend='dicke', initial='pumped', pump=None,
                       record_populations=False):
    """
    Transient emission after the pump is switched off.

    ``initial='pumped'`` starts from the steady state under ``pump`` (or the
    spec's own pump rate); ``'inverted'`` starts with all emitters in e1.
    All rates other than the pump are kept during the release.
    """
    if initial not in ('pumped', 'inverted'):
        raise ConfigError(f"Unknown pulse initial state '{initial}'")
    pumped = spec.with_overrides(gamma_pump=pump) if pump is not None else spec
    released = pumped.with_overrides(gamma_pump=0.0)
    times = np.asarray(times, dtype=np.float64)

    if backend == 'meanfield':
        return _meanfield_pulse(pumped, released, times, initial)

    generator = build_liouvillian(released, backend).for_sector(0)
    if initial == 'pumped':
        start = steady_state(build_liouvillian(pumped, backend))
    else:
        start = inverted_state(generator)
    trajectory = evolve(generator, start, times)

    photons = trajectory.expect('n').real
    inversion = trajectory.expect('Jz').real / spec.N
    populations = []
    if record_populations and backend == 'dicke' and released.scheme is Scheme.TWO_LEVEL:
        populations = [dicke_populations(trajectory.state(i), spec.N) for i in range(len(times))]
    result = PulseResult(times, released.kappa * photons, photons, inversion, populations)
    logger.info(f"Pulse N={spec.N}: peak {result.peak_rate:.3e}/s at t={result.peak_time:.3e}s")
    return result


def _meanfield_pulse(pumped, released, times, initial):
    system = MeanFieldSystem(released)
    if initial == 'pumped':
        start = integrate(MeanFieldSystem(pumped)).final.values
    else:
        start = system.product_state({'e1': 1.0})
    trajectory = integrate(system, init=start, times=times)
    photons = trajectory.expect(PHOTON_NUMBER).real
    inversion = 0.5 * (trajectory.expect(transition(1, 'e1', 'e1'))
                       - trajectory.expect(transition(1, 'g1', 'g1'))).real
    return PulseResult(times, released.kappa * photons, photons, inversion)
