import math
import shutil
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
from django.test import SimpleTestCase, tag

from core.conf import simulation_setting
from core.exceptions import ConfigError, NormalizationError
from emitters.presets import load_preset
from master_equation.liouville import build_qme
from master_equation.solvers import steady_state

from .calibration import CalibrationPlan, G2Calibration, calibrate_preset
from .collective import build_liouvillian, collective_numbers, inverted_state, superradiant_pulse
from .correlations import (
    G2Curve, Spectrum, default_g2_taus, fourier_spectrum, g2, radiation_rate, spectrum,
)
from .export import read_csv, read_header, write_csv
from .features import (
    extract_g2_features, fit_spectrum_peaks, hybrid_mode_frequencies, lorentzians,
    power_law_exponent, radiation_scaling,
)


def single_emitter(**changes):
    return load_preset('paper-default-2lvl', N=1, **changes)


def synthetic_g2(taus):
    peak = 0.4 * np.exp(-(taus / 1e-9) ** 2)
    dip = -0.4 * np.exp(-taus / 3e-9) * (1.0 - np.exp(-(taus / 1e-9) ** 2))
    shoulder = 0.1 * (1.0 - np.exp(-taus / 3e-9)) * np.exp(-taus / 300e-9)
    return 1.0 + peak + dip + shoulder


# =============================================================================
# RADIATION AND CORRELATIONS
# =============================================================================

class RadiationRateTests(SimpleTestCase):

    def test_bare_photon_number(self):
        self.assertEqual(radiation_rate(0.5, kappa=2e9), 1e9)

    def test_bare_photon_number_needs_kappa(self):
        with self.assertRaises(ConfigError):
            radiation_rate(0.5)

    def test_density_state(self):
        liouvillian = build_qme(single_emitter())
        rho = steady_state(liouvillian)
        expected = liouvillian.spec.kappa * liouvillian.expect('n', rho).real
        self.assertAlmostEqual(radiation_rate((liouvillian, rho)), expected)
        self.assertGreater(expected, 0.0)


class G2Tests(SimpleTestCase):

    def setUp(self):
        self.liouvillian = build_qme(single_emitter())
        self.rho = steady_state(self.liouvillian)

    def test_single_emitter_is_antibunched(self):
        curve = g2(self.liouvillian, self.rho, taus=[0.0, 1e-9])
        self.assertLess(curve.g0, 1.0)

    def test_relaxes_to_one(self):
        taus = np.concatenate(([0.0], np.geomspace(1e-11, 2e-5, 60)))
        curve = g2(self.liouvillian, self.rho, taus=taus)
        self.assertAlmostEqual(curve.values[-1], 1.0, delta=0.02)
        self.assertLess(curve.imaginary_residue, 1e-9)
        self.assertEqual(list(curve.as_frame().columns), ['tau[s]', 'g2'])

    def test_dark_cavity_cannot_be_normalized(self):
        liouvillian = build_qme(single_emitter(gamma_pump=0.0))
        with self.assertRaises(NormalizationError):
            g2(liouvillian, steady_state(liouvillian), taus=[0.0, 1e-9])

    def test_default_grid_starts_at_zero(self):
        taus = default_g2_taus()
        self.assertEqual(taus[0], 0.0)
        self.assertTrue(np.all(np.diff(taus) > 0))


class TwoLevelPairG2Tests(SimpleTestCase):
    """Without a metastable level the pair relaxes to 1 with no late shoulder."""

    def test_no_shoulder(self):
        liouvillian = build_qme(load_preset('paper-default-2lvl', N=2))
        curve = g2(liouvillian, steady_state(liouvillian), default_g2_taus())
        low, high = simulation_setting('G2.SHOULDER_WINDOW')
        window = (curve.taus >= low) & (curve.taus <= high)
        self.assertTrue(window.any())
        self.assertLess(float(np.abs(curve.values[window] - 1.0).max()), 0.015)

        features = extract_g2_features(curve)
        self.assertIsNone(features.tau2)
        self.assertFalse(features.detected()['tau2'])
        self.assertLess(abs(features.g2 - 1.0), 0.015)


class CalibrationTests(SimpleTestCase):

    def test_plan_of_reference_preset(self):
        plan = CalibrationPlan.from_preset('paper-default-5lvl')
        self.assertEqual(plan.targets, {'g0': 1.4, 'g1': 0.68, 'g2': 1.0})
        self.assertEqual(plan.tolerance, 0.15)
        self.assertEqual(plan.N, 2)
        self.assertEqual(plan.bounds['chi'], (1e8, 5e9))
        self.assertEqual(sorted(plan.bounds), ['chi', 'gamma_e1m', 'gamma_pump'])

    def test_preset_without_calibration_section(self):
        with self.assertRaises(ConfigError):
            CalibrationPlan.from_preset('paper-default-2lvl')

    def test_start_point_is_the_preset(self):
        calibration = G2Calibration(CalibrationPlan.from_preset('paper-default-5lvl'))
        x0, (low, high) = calibration.start()
        self.assertTrue(np.all((x0 > low) & (x0 < high)))
        parameters = calibration.parameters_at(x0)
        self.assertAlmostEqual(parameters['chi'] / 8e8, 1.0, places=6)
        self.assertAlmostEqual(parameters['gamma_pump'] / 1e6, 1.0, places=6)

    @tag('slow')
    def test_reference_pair_reproduces_g2_features(self):
        with tempfile.TemporaryDirectory() as tmp:
            shutil.copy(Path(simulation_setting('PRESETS_DIR')) / 'paper-default-5lvl.yaml', tmp)
            with self.settings(SIMULATION={'PRESETS_DIR': tmp}):
                result = calibrate_preset('paper-default-5lvl', write=True)
                self.assertTrue(result.converged)
                self.assertTrue((Path(tmp) / 'calibrated' / 'paper-default-5lvl.yaml').exists())

                liouvillian = build_qme(load_preset('paper-default-5lvl', N=2))
                features = extract_g2_features(g2(liouvillian, steady_state(liouvillian), default_g2_taus()))
        self.assertAlmostEqual(features.g0, 1.4, delta=0.15)
        self.assertAlmostEqual(features.g1, 0.68, delta=0.15)
        self.assertAlmostEqual(features.g2, 1.0, delta=0.15)


class SpectrumTests(SimpleTestCase):

    def test_decaying_field_gives_lorentzian(self):
        kappa, photons = 1e9, 0.3
        taus = np.linspace(0.0, 40e-9, 4096)
        omegas, samples, warnings = fourier_spectrum(taus, photons * np.exp(-0.5 * kappa * taus), kappa)
        self.assertEqual(warnings, [])
        centre = int(np.argmax(samples))
        self.assertLess(abs(omegas[centre]), omegas[1] - omegas[0] + 1e-9)
        self.assertAlmostEqual(samples[centre] / (4.0 * photons), 1.0, delta=0.01)
        integral = Spectrum(omegas, samples).integral()
        self.assertAlmostEqual(integral / (kappa * photons), 1.0, delta=0.01)

    def test_short_window_is_flagged(self):
        taus = np.linspace(0.0, 1e-9, 64)
        _, _, warnings = fourier_spectrum(taus, np.exp(-0.5e9 * taus), 1e9)
        self.assertEqual(len(warnings), 1)

    def test_grid_must_start_at_zero(self):
        with self.assertRaises(ConfigError):
            fourier_spectrum([1e-9, 2e-9], [1.0, 0.5], 1e9)

    def test_integral_equals_radiation_rate(self):
        liouvillian = build_qme(single_emitter())
        rho = steady_state(liouvillian)
        result = spectrum(liouvillian, rho, taus=np.linspace(0.0, 40e-9, 4096))
        rate = radiation_rate((liouvillian, rho))
        self.assertAlmostEqual(result.integral() / rate, 1.0, delta=0.01)

    def test_strong_coupling_splits_into_hybrid_modes(self):
        g = 1e9
        spec = load_preset('paper-default-2lvl', N=6, n_max=3, g=g, kappa=1e9)
        liouvillian = build_liouvillian(spec, 'dicke')
        rho = steady_state(liouvillian)
        J, _ = collective_numbers(liouvillian, rho)
        self.assertGreater(J, 2.5)

        omegas = np.linspace(-6e9, 6e9, 1201)
        result = spectrum(liouvillian, rho, taus=np.linspace(0.0, 40e-9, 2001), omegas=omegas)
        peaks = fit_spectrum_peaks(Spectrum(result.omegas, result.samples / result.samples.max()))
        self.assertEqual(len(peaks), 2)

        expected = 2.0 * g * math.sqrt(2.0 * J)
        splitting = peaks[1].center - peaks[0].center
        self.assertAlmostEqual(splitting / expected, 1.0, delta=0.1)
        lower, upper = hybrid_mode_frequencies(J, g)
        self.assertAlmostEqual(peaks[0].center / lower, 1.0, delta=0.1)
        self.assertAlmostEqual(peaks[1].center / upper, 1.0, delta=0.1)


# =============================================================================
# FEATURES
# =============================================================================

class G2FeatureTests(SimpleTestCase):

    def test_flat_curve_has_no_features(self):
        taus = default_g2_taus()
        features = extract_g2_features(G2Curve(taus, np.ones_like(taus)))
        self.assertEqual((features.g0, features.g1, features.g2), (1.0, 1.0, 1.0))
        self.assertEqual(features.detected(), {'tau0': False, 'tau1': False, 'tau2': False})
        self.assertIsNone(features.as_record()['tau0'])

    def test_synthetic_peak_dip_and_shoulder(self):
        taus = default_g2_taus()
        features = extract_g2_features(G2Curve(taus, synthetic_g2(taus)))
        self.assertAlmostEqual(features.g0, 1.4, places=6)
        self.assertLess(features.g1, 0.95)
        self.assertGreater(features.g2, 1.05)
        self.assertTrue(all(features.detected().values()))
        self.assertTrue(0.3e-9 < features.tau0 < 3e-9)
        self.assertTrue(features.tau0 < features.tau1 < features.tau2)
        self.assertAlmostEqual(features.tau2 / 300e-9, 1.0, delta=0.1)
        self.assertIn('residual_tau2', features.as_record())

    def test_curve_must_cover_windows(self):
        taus = np.linspace(0.0, 1e-9, 10)
        with self.assertRaises(ConfigError):
            extract_g2_features(G2Curve(taus, np.ones_like(taus)))


class PeakFitTests(SimpleTestCase):

    def setUp(self):
        self.omegas = np.linspace(-5e9, 5e9, 4001)

    def test_single_lorentzian(self):
        samples = lorentzians(self.omegas, 1e9, 5e7, 2.0)
        peaks = fit_spectrum_peaks(Spectrum(self.omegas, samples))
        self.assertEqual(len(peaks), 1)
        self.assertAlmostEqual(peaks[0].center / 1e9, 1.0, delta=0.01)
        self.assertAlmostEqual(peaks[0].width / 5e7, 1.0, delta=0.01)
        self.assertFalse(peaks[0].low_confidence)

    def test_split_pair(self):
        samples = lorentzians(self.omegas, -1e9, 5e7, 1.0, 1e9, 5e7, 1.5)
        result = Spectrum(self.omegas, samples)
        peaks = fit_spectrum_peaks(result)
        self.assertEqual(len(peaks), 2)
        self.assertAlmostEqual(peaks[0].center / -1e9, 1.0, delta=0.02)
        self.assertAlmostEqual(peaks[1].center / 1e9, 1.0, delta=0.02)
        self.assertAlmostEqual(peaks[1].amplitude / 1.5, 1.0, delta=0.02)
        self.assertEqual(result.peaks, peaks)

    def test_merged_pair_reports_one_peak(self):
        samples = lorentzians(self.omegas, -1e7, 5e7, 1.0, 1e7, 5e7, 1.0)
        self.assertEqual(len(fit_spectrum_peaks(Spectrum(self.omegas, samples))), 1)

    def test_empty_spectrum(self):
        self.assertEqual(fit_spectrum_peaks(Spectrum(self.omegas, np.zeros_like(self.omegas))), [])


class CollectiveAnalysisTests(SimpleTestCase):

    def test_resonant_hybrid_modes(self):
        lower, upper = hybrid_mode_frequencies(2.0, 1e9)
        self.assertAlmostEqual(lower, -2e9, delta=1.0)
        self.assertAlmostEqual(upper, 2e9, delta=1.0)

    def test_detuned_hybrid_modes(self):
        g, J, delta = 1e9, 8.0, 3e9
        lower, upper = hybrid_mode_frequencies(J, g, detuning=delta)
        coupling = g * math.sqrt(2.0 * J)
        self.assertAlmostEqual(upper - lower, math.sqrt(delta ** 2 + 4.0 * coupling ** 2), delta=1.0)

    def test_no_collective_spin_no_splitting(self):
        self.assertEqual(hybrid_mode_frequencies(0.0, 1e9), (0.0, 0.0))

    def test_scaling_regimes(self):
        pumps = np.geomspace(1e5, 1e9, 9)
        self.assertEqual(set(radiation_scaling(pumps, pumps ** 2).regimes()), {'superlinear'})
        self.assertEqual(set(radiation_scaling(pumps, 3.0 * pumps).regimes()), {'linear'})
        self.assertEqual(set(radiation_scaling(pumps, np.sqrt(pumps)).regimes()), {'sublinear'})

    def test_scaling_needs_two_points(self):
        with self.assertRaises(ConfigError):
            radiation_scaling([1e6], [1.0])

    def test_power_law_exponent(self):
        N = np.array([2, 4, 8, 16])
        self.assertAlmostEqual(power_law_exponent(N, 0.5 * N ** 2), 2.0)

    def test_inverted_state_on_both_backends(self):
        spec = load_preset('paper-default-2lvl', N=2)
        for backend in ('exact', 'dicke'):
            liouvillian = build_liouvillian(spec, backend)
            J, M = collective_numbers(liouvillian, inverted_state(liouvillian))
            self.assertAlmostEqual(J, 1.0)
            self.assertAlmostEqual(M, 1.0)

    def test_unknown_density_backend(self):
        with self.assertRaises(ConfigError):
            build_liouvillian(single_emitter(), 'meanfield')


class PulseTests(SimpleTestCase):

    def test_inverted_ensemble_emits_delayed_burst(self):
        spec = load_preset('paper-default-2lvl', N=4)
        result = superradiant_pulse(spec, np.linspace(0.0, 5e-9, 101), initial='inverted')
        self.assertTrue(result.is_delayed())
        self.assertAlmostEqual(result.inversion[0], 0.5)
        self.assertEqual(result.radiation[0], 0.0)
        self.assertEqual(list(result.as_frame().columns),
                         ['t[s]', 'radiation[1/s]', 'photon_number', 'inversion'])

    def test_unknown_initial_state(self):
        with self.assertRaises(ConfigError):
            superradiant_pulse(single_emitter(), [0.0, 1e-9], initial='thermal')

    @tag('slow')
    def test_peak_rate_grows_faster_than_linearly(self):
        sizes = [4, 8, 16]
        peaks = []
        for N in sizes:
            spec = load_preset('paper-default-2lvl', N=N, kappa=2.0 * math.pi * 1e10)
            result = superradiant_pulse(spec, np.linspace(0.0, 20e-9, 401), initial='inverted')
            peaks.append(result.peak_rate)
        self.assertGreater(power_law_exponent(sizes, peaks), 1.5)


# =============================================================================
# EXPORT
# =============================================================================

class ExportTests(SimpleTestCase):

    def test_header_round_trip(self):
        metadata = {'version': '0.3.0', 'config': {'preset': 'paper-default-2lvl', 'overrides': {'N': 2}}}
        frame = pd.DataFrame({'gamma_pump[1/s]': [1e5, 1e6], 'photon_number': [0.25, 0.5]})
        with tempfile.TemporaryDirectory() as tmp:
            path = write_csv(frame, Path(tmp) / 'steady.csv', metadata=metadata)
            self.assertEqual(read_header(path), metadata)
            pd.testing.assert_frame_equal(read_csv(path), frame)
            self.assertEqual(sorted(p.name for p in Path(tmp).iterdir()), ['steady.csv'])

    def test_file_without_header(self):
        frame = pd.DataFrame({'x': [1.0]})
        with tempfile.TemporaryDirectory() as tmp:
            path = write_csv(frame, Path(tmp) / 'nested' / 'plain.csv')
            self.assertEqual(read_header(path), {})
            self.assertTrue(path.read_text().startswith('x\n'))
