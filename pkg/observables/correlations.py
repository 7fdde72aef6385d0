"""
Radiation rate, photon correlation g2(tau) and the emission spectrum.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from core.conf import simulation_setting
from core.exceptions import ConfigError, NormalizationError
from master_equation.solvers import regression_correlator

logger = logging.getLogger(__name__)


def radiation_rate(source, kappa=None):
    """
    kappa <a^dag a> in photons/s.

    ``source`` is a (Liouvillian, DensityState) pair, a mean-field state, or
    a photon number (then ``kappa`` is required).
    """
    if isinstance(source, tuple):
        liouvillian, state = source
        kappa = liouvillian.spec.kappa if kappa is None else kappa
        return kappa * liouvillian.expect('n', state).real
    if hasattr(source, 'photon_number'):
        kappa = source.system.spec.kappa if kappa is None else kappa
        return kappa * source.photon_number
    if kappa is None:
        raise ConfigError("radiation_rate needs kappa for a bare photon number")
    return kappa * float(source)


# =============================================================================
# G2
# =============================================================================

def default_g2_taus():
    """tau = 0 followed by a geometric grid between G2.TAU_MIN and G2.TAU_MAX."""
    grid = np.geomspace(
        simulation_setting('G2.TAU_MIN'),
        simulation_setting('G2.TAU_MAX'),
        simulation_setting('G2.POINTS'),
    )
    return np.concatenate(([0.0], grid))


@dataclass
class G2Curve:
    taus: np.ndarray
    values: np.ndarray
    photon_number: float = 0.0
    imaginary_residue: float = 0.0

    def __len__(self):
        return len(self.taus)

    @property
    def g0(self):
        return float(self.values[0])

    def as_frame(self):
        return pd.DataFrame({'tau[s]': self.taus, 'g2': self.values})


def g2(liouvillian, rho_ss, taus=None, check=True):
    """
    <a^dag(0) a^dag(tau) a(tau) a(0)> / <a^dag a>^2 by quantum regression
    of the seed a rho a^dag, traced against a^dag a.
    """
    taus = default_g2_taus() if taus is None else np.asarray(taus, dtype=np.float64)
    ops = liouvillian.operators
    photons = liouvillian.expect('n', rho_ss).real
    if photons < 1e-14:
        raise NormalizationError(
            f"Steady photon number {photons:.3e} is too small to normalize g2"
        )
    numerator = regression_correlator(
        liouvillian, rho_ss, ops['n'], ops['a'], taus, right=ops['adag'], check=check,
    )
    values = numerator / photons ** 2
    residue = float(np.abs(values.imag).max())
    if residue > 1e-9 * max(1.0, float(np.abs(values.real).max())):
        logger.warning(f"g2 has an imaginary residue of {residue:.3e}")
    return G2Curve(taus, values.real.copy(), photons, residue)


# =============================================================================
# SPECTRUM
# =============================================================================

@dataclass
class Spectrum:
    """S(omega) with omega in rad/s relative to the cavity frame."""
    omegas: np.ndarray
    samples: np.ndarray
    photon_number: float = 0.0
    kappa: float = 0.0
    warnings: list = field(default_factory=list)
    peaks: list = field(default_factory=list)

    def integral(self):
        """int S domega / 2 pi on the sampled grid."""
        return float(trapezoid(self.samples, self.omegas)) / (2.0 * np.pi)

    def as_frame(self):
        return pd.DataFrame({'omega[rad/s]': self.omegas, 'S': self.samples})


def trapezoid_weights(taus):
    steps = np.diff(taus)
    weights = np.zeros_like(taus)
    weights[:-1] += 0.5 * steps
    weights[1:] += 0.5 * steps
    return weights


def fourier_spectrum(taus, correlation, kappa, omegas=None):
    """
    S(omega) = 2 kappa Re int_0^inf e^{-i omega tau} C(tau) dtau with
    trapezoid weights. A uniform grid starting at 0 with no ``omegas`` is
    transformed by FFT (centred frequencies); otherwise the sum is direct.

    Returns (omegas, samples, warnings).
    """
    taus = np.asarray(taus, dtype=np.float64)
    correlation = np.asarray(correlation, dtype=np.complex128)
    if taus.size < 2 or taus[0] != 0.0:
        raise ConfigError("Spectrum tau grid must start at 0 and have at least two points")

    warnings = []
    floor = simulation_setting('SPECTRUM.DECAY_FLOOR')
    start = abs(correlation[0])
    if start > 0 and abs(correlation[-1]) > floor * start:
        message = (f"Correlation decayed only to {abs(correlation[-1]) / start:.2e} of its "
                   f"initial value by tau={taus[-1]:.3e}s; spectrum is window-limited")
        logger.warning(message)
        warnings.append(message)

    weights = trapezoid_weights(taus)
    steps = np.diff(taus)
    uniform = np.allclose(steps, steps[0], rtol=1e-9, atol=0.0)
    if omegas is None and uniform:
        transform = np.fft.fft(weights * correlation)
        freqs = 2.0 * np.pi * np.fft.fftfreq(taus.size, d=steps[0])
        order = np.argsort(freqs)
        omegas, transform = freqs[order], transform[order]
    else:
        if omegas is None:
            raise ConfigError("A non-uniform tau grid needs an explicit omega grid")
        omegas = np.asarray(omegas, dtype=np.float64)
        transform = np.exp(-1j * np.outer(omegas, taus)) @ (weights * correlation)
    return omegas, 2.0 * kappa * transform.real, warnings


def default_spectrum_taus():
    return np.linspace(
        0.0, simulation_setting('SPECTRUM.TAU_MAX'), simulation_setting('SPECTRUM.POINTS')
    )


def spectrum(liouvillian, rho_ss, taus=None, omegas=None, check_stationary=True):
    """Emission spectrum from <a^dag(tau) a(0)> by quantum regression."""
    taus = default_spectrum_taus() if taus is None else np.asarray(taus, dtype=np.float64)
    ops = liouvillian.operators
    correlation = regression_correlator(
        liouvillian, rho_ss, ops['adag'], ops['a'], taus, check=check_stationary,
    )
    kappa = liouvillian.spec.kappa
    omegas, samples, warnings = fourier_spectrum(taus, correlation, kappa, omegas)
    photons = liouvillian.expect('n', rho_ss).real
    return Spectrum(omegas, samples, photons, kappa, warnings)


def equal_time_moment(liouvillian, rho_ss, *names):
    """<product of named operators> at one instant, e.g. ('adag', 'adag', 'a', 'a')."""
    ops = liouvillian.operators
    op = ops[names[0]]
    for name in names[1:]:
        op = op @ ops[name]
    return rho_ss.expect(op)
