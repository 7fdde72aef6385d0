"""
Time integration of a MeanFieldSystem and conversion of its moments to
Dicke quantum numbers.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from core.conf import simulation_setting
from core.exceptions import ConfigError, NumericalDomainError, StiffnessError

from .algebra import PHOTON_NUMBER, Monomial, transition

logger = logging.getLogger(__name__)


@dataclass
class MeanFieldState:
    """Moment vector of one instant."""
    system: object
    values: np.ndarray

    def expect(self, monomial):
        return self.system.value(self.values, monomial)

    def pair(self, first, second):
        """<s1(first) s2(second)> for level pairs such as ('e1', 'g1')."""
        return self.expect(Monomial(0, 0, ((1,) + tuple(first), (2,) + tuple(second))))

    @property
    def photon_number(self):
        return self.expect(PHOTON_NUMBER).real

    @property
    def radiation_rate(self):
        return self.system.spec.kappa * self.photon_number

    def populations(self):
        return {
            level: self.expect(transition(1, level, level)).real
            for level in self.system.spec.scheme.levels
        }


@dataclass
class MeanFieldTrajectory:
    times: np.ndarray
    values: np.ndarray
    system: object
    converged: bool
    residual: float

    def __len__(self):
        return len(self.times)

    def state(self, index):
        return MeanFieldState(self.system, self.values[index])

    @property
    def final(self):
        return self.state(-1)

    def expect(self, monomial):
        return np.array([self.system.value(row, monomial) for row in self.values])


def _default_t_end(system):
    configured = simulation_setting('MEANFIELD.T_END', default=None)
    if configured:
        return float(configured)
    return simulation_setting('STEADY_STATE.FALLBACK_LIFETIMES') / system.spec.slowest_rate


def _solve(system, y0, t_span, t_eval, rtol, atol):
    solution = solve_ivp(
        lambda t, y: system.rhs(y),
        t_span,
        y0,
        method=simulation_setting('SOLVER.METHOD'),
        t_eval=t_eval,
        rtol=rtol,
        atol=atol,
        jac=lambda t, y: system.jacobian(y),
    )
    if not solution.success:
        logger.error(f"Mean-field integration failed: {solution.message}")
        raise StiffnessError(f"Mean-field integration failed: {solution.message}")
    return solution.y.T


def integrate(system, init=None, t_end=None, times=None, rtol=None, atol=None):
    """
    Integrate the closed moment equations.

    With ``times`` the trajectory is sampled there. Otherwise it runs in
    geometrically growing chunks up to ``t_end`` and stops as soon as the
    relative residual drops below ``MEANFIELD.RESIDUAL_TOL``; the result
    then records whether that happened.
    """
    rtol = rtol or simulation_setting('SOLVER.RTOL')
    atol = atol or simulation_setting('SOLVER.ATOL')
    y0 = system.product_state() if init is None else np.asarray(init, dtype=np.complex128)
    if y0.shape != (system.size,):
        raise ConfigError(f"Initial moment vector must have {system.size} entries")
    tolerance = simulation_setting('MEANFIELD.RESIDUAL_TOL')

    if times is not None:
        times = np.asarray(times, dtype=np.float64)
        if times.ndim != 1 or times.size == 0 or np.any(np.diff(times) <= 0):
            raise ConfigError("Time grid must be a non-empty, strictly increasing sequence")
        if times.size == 1:
            values = y0[None, :].copy()
        else:
            values = _solve(system, y0, (times[0], times[-1]), times, rtol, atol)
        residual = system.residual(values[-1])
        return MeanFieldTrajectory(times, values, system, residual < tolerance, residual)

    t_end = t_end or _default_t_end(system)
    first = min(1.0 / system.spec.rate_scale, t_end / 10.0)
    boundaries = np.concatenate(([0.0], np.geomspace(first, t_end, simulation_setting('MEANFIELD.CHUNKS'))))
    samples, values = [0.0], [y0]
    residual = system.residual(y0)
    y = y0
    for start, stop in zip(boundaries[:-1], boundaries[1:]):
        y = _solve(system, y, (start, stop), [stop], rtol, atol)[-1]
        samples.append(stop)
        values.append(y)
        residual = system.residual(y)
        if residual < tolerance:
            break

    converged = residual < tolerance
    if converged:
        logger.info(f"Mean-field steady state at t={samples[-1]:.3e}s, residual {residual:.3e}")
    else:
        logger.warning(
            f"Mean-field run reached t_end={t_end:.3e}s without converging "
            f"(residual {residual:.3e} > {tolerance:.1e})"
        )
    return MeanFieldTrajectory(np.array(samples), np.array(values), system, converged, residual)


# =============================================================================
# DICKE NUMBERS
# =============================================================================

def collective_moments(state, N):
    """<Jx^2>, <Jy^2>, <Jz^2> of the g1/e1 pseudo-spin from emitter moments."""
    g, e = 'g1', 'e1'
    occupied = (state.expect(transition(1, g, g)) + state.expect(transition(1, e, e))).real
    flip = state.pair((g, e), (e, g)) + state.pair((e, g), (g, e))
    double = state.pair((g, e), (g, e)) + state.pair((e, g), (e, g))
    z_pair = (
        state.pair((e, e), (e, e)) - 2.0 * state.pair((g, g), (e, e)) + state.pair((g, g), (g, g))
    )
    jx2 = 0.25 * N * (occupied + (N - 1) * (flip + double).real)
    jy2 = 0.25 * N * (occupied + (N - 1) * (flip - double).real)
    jz2 = 0.25 * N * (occupied + (N - 1) * z_pair.real)
    return jx2, jy2, jz2


def dicke_numbers(state, N=None):
    """(J, M) averages: J(J+1) = <J^2> and M = (N/2)(<s_e1e1> - <s_g1g1>)."""
    N = N or state.system.N
    total = sum(collective_moments(state, N))
    argument = 1.0 + 4.0 * total
    if argument < 0:
        raise NumericalDomainError(f"<J^2> = {total:.6g} gives a negative square-root argument")
    J = 0.5 * (math.sqrt(argument) - 1.0)
    populations = state.populations()
    M = 0.5 * N * (populations['e1'] - populations['g1'])
    return J, M
