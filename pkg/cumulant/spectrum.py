"""
Emission spectrum at mean-field level.

Two-time correlations C_O(tau) = <O(tau) a(0)> of the first-order moments
obey the linearized moment equations; second-order moments are expanded
with the same cumulant rule, treating a(0) as the third operator.
"""
import logging

import numpy as np
from scipy.linalg import expm

from core.conf import simulation_setting
from core.exceptions import ConvergenceError
from observables.correlations import Spectrum, fourier_spectrum

from .algebra import A, ADAG, canonical, factors, multiply

logger = logging.getLogger(__name__)

# uniform-grid bounds for the automatically chosen tau grid
_STEPS_PER_PERIOD = 8
_MAX_POINTS = 1 << 16


def regression_matrix(system, state, seed=A):
    """
    Affine generator (M, d) of dC/dtau = M C + d over the first-order
    moments whose excitation charge cancels the seed's; other correlations
    vanish in a phase-invariant steady state.
    """
    y = state.values
    excited = system.spec.scheme.excited
    target = -seed.charge(excited)
    rows = [i for i, v in enumerate(system.variables) if v.order == 1 and v.charge(excited) == target]
    position = {index: k for k, index in enumerate(rows)}
    first = {i: v for i, v in enumerate(system.variables) if v.order == 1}
    seed_mean = system.value(y, seed)

    matrix = np.zeros((len(rows), len(rows)), dtype=np.complex128)
    offset = np.zeros(len(rows), dtype=np.complex128)
    coefficients = system.term_values()
    for k, row in enumerate(rows):
        for coefficient, key in coefficients[row]:
            if not key:
                offset[k] += coefficient * seed_mean
                continue
            if len(key) != 1:
                raise ValueError("First-order moment equations must be linear in the moments")
            variable = system.variables[key[0]]
            if variable.order == 1:
                if key[0] in position:
                    matrix[k, position[key[0]]] += coefficient
                continue
            p, q = (system.index[canonical(f)] for f in factors(variable))
            for left, right in ((p, q), (q, p)):
                if right in position:
                    matrix[k, position[right]] += coefficient * y[left]
            offset[k] += coefficient * (y[key[0]] - 2.0 * y[p] * y[q]) * seed_mean
    initial = np.array([
        sum(weight * system.value(y, m) for m, weight in multiply(first[i], seed).items())
        for i in rows
    ], dtype=np.complex128)
    return rows, matrix, offset, initial


def _auto_grid(matrix):
    eigenvalues = np.linalg.eigvals(matrix)
    decay = -eigenvalues.real
    if eigenvalues.size == 0 or np.any(decay <= 0):
        logger.warning("Linearized correlations do not decay; using the configured spectrum window")
        return np.linspace(0.0, simulation_setting('SPECTRUM.TAU_MAX'), simulation_setting('SPECTRUM.POINTS'))
    floor = simulation_setting('SPECTRUM.DECAY_FLOOR')
    t_max = 1.5 * np.log(1.0 / floor) / decay.min()
    step = 2.0 * np.pi / (_STEPS_PER_PERIOD * np.abs(eigenvalues).max())
    points = int(min(np.ceil(t_max / step) + 1, _MAX_POINTS))
    return np.linspace(0.0, t_max, points)


def mf_spectrum(system, state, omegas=None, taus=None, converged=True):
    """
    S(omega) from <a^dag(tau) a(0)> evolved with the linearized closed
    equations at the mean-field steady ``state``.
    """
    if not converged:
        raise ConvergenceError("Mean-field spectrum needs a converged steady state")
    rows, matrix, offset, initial = regression_matrix(system, state)
    taus = _auto_grid(matrix) if taus is None else np.asarray(taus, dtype=np.float64)

    size = len(rows)
    augmented = np.zeros((size + 1, size + 1), dtype=np.complex128)
    augmented[:size, :size] = matrix
    augmented[:size, size] = offset
    steps = np.diff(taus)
    correlations = np.empty((taus.size, size), dtype=np.complex128)
    vector = np.concatenate((initial, [1.0]))
    correlations[0] = initial
    uniform = steps.size and np.allclose(steps, steps[0], rtol=1e-9, atol=0.0)
    propagator = expm(augmented * steps[0]) if uniform else None
    for k, step in enumerate(steps, start=1):
        vector = (propagator if uniform else expm(augmented * step)) @ vector
        correlations[k] = vector[:size]

    photon_row = rows.index(system.index[ADAG])
    kappa = system.spec.kappa
    omegas, samples, warnings = fourier_spectrum(taus, correlations[:, photon_row], kappa, omegas)
    logger.info(f"Mean-field spectrum on {taus.size} delays up to {taus[-1]:.3e}s")
    return Spectrum(omegas, samples, state.photon_number, kappa, warnings)
