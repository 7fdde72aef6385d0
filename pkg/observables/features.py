"""
Derived quantities: g2 feature values and times, spectral peak fits,
hybrid (polariton) mode frequencies and radiation scaling exponents.
"""
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import curve_fit
from scipy.signal import find_peaks, peak_widths

from core.conf import simulation_setting
from core.exceptions import ConfigError

logger = logging.getLogger(__name__)


# =============================================================================
# G2 FEATURES
# =============================================================================

@dataclass
class G2Features:
    g0: float
    g1: float
    g2: float
    tau0: float | None = None
    tau1: float | None = None
    tau2: float | None = None
    residuals: dict = field(default_factory=dict)
    models: dict = field(default_factory=dict)

    def detected(self):
        return {name: getattr(self, name) is not None for name in ('tau0', 'tau1', 'tau2')}

    def as_record(self):
        """Flat key-value record; absent times are None."""
        record = {k: v for k, v in asdict(self).items() if k not in ('residuals', 'models')}
        record.update({f'residual_{k}': v for k, v in self.residuals.items()})
        return record


def _gaussian(tau, offset, amplitude, width):
    return offset + amplitude * np.exp(-(tau / width) ** 2)


def _fit(model, taus, values, p0, name, residuals, models):
    try:
        params, _ = curve_fit(model, taus, values, p0=p0, maxfev=20000)
    except (RuntimeError, ValueError) as exc:
        logger.warning(f"g2 feature fit '{name}' failed: {exc}")
        return None
    residuals[name] = float(np.sqrt(np.mean((model(taus, *params) - values) ** 2)))
    models[name] = model.__name__.lstrip('_')
    return params


def _window(taus, bounds):
    low, high = bounds
    return np.flatnonzero((taus > low) & (taus <= high))


def extract_g2_features(curve, dip_window=None, shoulder_window=None, threshold=None):
    """
    Bunching peak g0, antibunching dip g1 and late shoulder g2 with their
    time scales. Values are always reported; a time is None unless its
    feature stands out from 1 (or from the dip) by more than ``threshold``.
    """
    taus = np.asarray(curve.taus, dtype=np.float64)
    values = np.asarray(curve.values, dtype=np.float64)
    dip_window = dip_window or simulation_setting('G2.DIP_WINDOW')
    shoulder_window = shoulder_window or simulation_setting('G2.SHOULDER_WINDOW')
    threshold = simulation_setting('G2.THRESHOLD') if threshold is None else threshold

    dip_points = _window(taus, dip_window)
    shoulder_points = _window(taus, shoulder_window)
    if dip_points.size == 0 or shoulder_points.size == 0:
        raise ConfigError("g2 curve does not cover the dip and shoulder windows")

    dip = int(dip_points[np.argmin(values[dip_points])])
    g1 = float(values[dip])
    peak = int(np.argmax(values[:dip + 1]))
    g0 = float(values[peak])
    shoulder = int(shoulder_points[np.argmax(values[shoulder_points])])
    g2 = float(values[shoulder])

    features = G2Features(g0=g0, g1=g1, g2=g2)

    if g0 > 1.0 + threshold and dip > peak + 2:
        segment = slice(peak, dip + 1)
        half = g1 + 0.5 * (g0 - g1)
        below = np.flatnonzero(values[segment] < half)
        guess = taus[segment][below[0]] if below.size and taus[segment][below[0]] > 0 else taus[dip] / 2
        params = _fit(_gaussian, taus[segment], values[segment], (g1, g0 - g1, guess),
                      'tau0', features.residuals, features.models)
        if params is not None and params[2] != 0:
            features.tau0 = abs(float(params[2]))

    if g2 > 1.0 + threshold and g2 > g1 + threshold and shoulder > dip + 2:
        segment = slice(dip, shoulder + 1)
        start = taus[dip]

        def _rise(tau, width):
            return g2 - (g2 - g1) * np.exp(-(tau - start) / width)

        guess = max(0.3 * (taus[shoulder] - start), 1e-15)
        params = _fit(_rise, taus[segment], values[segment], (guess,),
                      'tau1', features.residuals, features.models)
        if params is not None:
            features.tau1 = abs(float(params[0]))

        if taus.size - shoulder > 3:
            tail = slice(shoulder, None)
            peak_time = taus[shoulder]

            def _decay(tau, width):
                return 1.0 + (g2 - 1.0) * np.exp(-(tau - peak_time) / width)

            guess = max(taus[-1] - peak_time, 1e-15) / 3.0
            params = _fit(_decay, taus[tail], values[tail], (guess,),
                          'tau2', features.residuals, features.models)
            if params is not None:
                features.tau2 = abs(float(params[0]))
    return features


# =============================================================================
# SPECTRAL PEAKS
# =============================================================================

@dataclass
class PeakFit:
    center: float
    width: float
    amplitude: float
    low_confidence: bool = False

    def as_dict(self):
        return asdict(self)


def lorentzians(omega, *params):
    """Sum of Lorentzians; params are (center, half-width, height) triples."""
    total = np.zeros_like(omega, dtype=np.float64)
    for center, width, height in zip(params[0::3], params[1::3], params[2::3]):
        total = total + height / (1.0 + ((omega - center) / width) ** 2)
    return total


def fit_spectrum_peaks(spectrum, prominence=None):
    """
    Multi-Lorentzian least-squares fit seeded by the detected peaks.

    Returns PeakFit entries sorted by center; all are flagged low-confidence
    when the largest residual exceeds ``SPECTRUM.LOW_CONFIDENCE_RESIDUAL``
    of the tallest peak.
    """
    omegas = np.asarray(spectrum.omegas, dtype=np.float64)
    samples = np.asarray(spectrum.samples, dtype=np.float64)
    top = float(samples.max()) if samples.size else 0.0
    if top <= 0:
        return []
    prominence = simulation_setting('SPECTRUM.PEAK_PROMINENCE') if prominence is None else prominence
    indices, _ = find_peaks(samples, prominence=prominence * top)
    if indices.size == 0:
        indices = np.array([int(np.argmax(samples))])

    step = float(np.mean(np.diff(omegas)))
    widths = peak_widths(samples, indices, rel_height=0.5)[0] * step / 2.0
    p0 = []
    for index, width in zip(indices, widths):
        p0 += [omegas[index], max(width, step), samples[index]]

    span = max(widths.max(), step) * 10.0
    mask = (omegas >= omegas[indices].min() - span) & (omegas <= omegas[indices].max() + span)
    try:
        params, _ = curve_fit(lorentzians, omegas[mask], samples[mask], p0=p0, maxfev=50000)
    except RuntimeError as exc:
        logger.warning(f"Spectrum peak fit failed ({exc}); reporting detected peaks")
        params = np.asarray(p0)
        low_confidence = True
    else:
        residual = float(np.abs(lorentzians(omegas[mask], *params) - samples[mask]).max())
        low_confidence = residual > simulation_setting('SPECTRUM.LOW_CONFIDENCE_RESIDUAL') * top
        if low_confidence:
            logger.warning(f"Spectrum fit residual {residual:.3e} is large against peak {top:.3e}")

    peaks = [
        PeakFit(float(c), abs(float(w)), float(h), low_confidence)
        for c, w, h in zip(params[0::3], params[1::3], params[2::3])
    ]
    peaks.sort(key=lambda p: p.center)
    spectrum.peaks = peaks
    return peaks


# =============================================================================
# COLLECTIVE ANALYSIS
# =============================================================================

def hybrid_mode_frequencies(J, g, detuning=0.0, cavity=0.0):
    """
    Normal modes of the cavity coupled to a weakly excited collective spin
    (bosonized with J^+ ~ sqrt(2J) b): coupling g sqrt(2J).
    """
    coupling = g * np.sqrt(2.0 * max(J, 0.0))
    hamiltonian = np.array([[cavity, coupling], [coupling, detuning]], dtype=np.float64)
    lower, upper = np.linalg.eigvalsh(hamiltonian)
    return float(lower), float(upper)


@dataclass
class RadiationScaling:
    pumps: np.ndarray
    rates: np.ndarray
    slopes: np.ndarray

    def regimes(self, tolerance=0.1):
        labels = []
        for slope in self.slopes:
            if slope > 1.0 + tolerance:
                labels.append('superlinear')
            elif slope < 1.0 - tolerance:
                labels.append('sublinear')
            else:
                labels.append('linear')
        return labels


def radiation_scaling(pumps, rates):
    """Local log-log slope d ln I / d ln gamma along a pump sweep."""
    pumps = np.asarray(pumps, dtype=np.float64)
    rates = np.asarray(rates, dtype=np.float64)
    if pumps.size < 2 or np.any(pumps <= 0) or np.any(rates <= 0):
        raise ConfigError("Scaling needs at least two positive pump values and radiation rates")
    slopes = np.gradient(np.log(rates), np.log(pumps))
    return RadiationScaling(pumps, rates, slopes)


def power_law_exponent(x, y):
    """Least-squares exponent of y ~ x^p."""
    slope, _ = np.polyfit(np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float)), 1)
    return float(slope)
