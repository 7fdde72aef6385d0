import math
import shutil
import tempfile
from pathlib import Path

from django.test import SimpleTestCase

from core.conf import simulation_setting
from core.exceptions import ConfigError, ModelValidationError

from .presets import (
    RatePreset, list_presets, load_calibration, load_preset, rates_from_preset, write_calibration,
)
from .schemes import D_ES, D_GS, ModelSpec, ResonantBranch, Scheme, reduce_scheme, validate

GAMMA = 2.0 * math.pi * 1e9


def two_level(**changes):
    data = {
        'scheme': 'two-level', 'N': 2, 'g': 1e9, 'kappa': GAMMA,
        'gamma_e1g1': 1 / 12e-9, 'gamma_g1e1': 1e6, 'chi_e1g1': 1e8,
    }
    data.update(changes)
    return validate(data)


# =============================================================================
# RATE PRESETS
# =============================================================================

class RatePresetTests(SimpleTestCase):

    def test_single_channel_rate_is_inverse_lifetime(self):
        rates = rates_from_preset(RatePreset({'e1': 12e-9}, {'e1': {'g1': 1.0}}))
        self.assertAlmostEqual(rates['gamma_e1g1'], 1 / 12e-9)

    def test_metastable_split_sums_to_inverse_lifetime(self):
        rates = rates_from_preset(RatePreset({'m': 172e-9}, {'m': {'g1': 0.3, 'g2': 0.7}}))
        self.assertAlmostEqual(rates['gamma_mg1'] + rates['gamma_mg2'], 1 / 172e-9)
        self.assertEqual(rates['metastable_lifetime'], 172e-9)

    def test_branching_must_sum_to_one(self):
        with self.assertRaises(ModelValidationError) as ctx:
            rates_from_preset(RatePreset({'e1': 12e-9}, {'e1': {'g1': 0.5, 'm': 0.2}}))
        self.assertIn('e1', ctx.exception.errors)

    def test_nonpositive_lifetime(self):
        with self.assertRaises(ModelValidationError):
            rates_from_preset(RatePreset({'e1': 0.0}, {'e1': {'g1': 1.0}}))

    def test_unknown_channel(self):
        with self.assertRaises(ModelValidationError) as ctx:
            rates_from_preset(RatePreset({'e1': 12e-9}, {'e1': {'e2': 1.0}}))
        self.assertIn('e1->e2', ctx.exception.errors)


# =============================================================================
# VALIDATION
# =============================================================================

class ValidateTests(SimpleTestCase):

    def test_absent_level_rate_is_named(self):
        with self.assertRaises(ModelValidationError) as ctx:
            two_level(gamma_e1m=1e6)
        self.assertIn('gamma_e1m', ctx.exception.errors)

    def test_negative_kappa(self):
        with self.assertRaises(ModelValidationError) as ctx:
            two_level(kappa=-1.0)
        self.assertIn('kappa', ctx.exception.errors)

    def test_negative_rate(self):
        with self.assertRaises(ModelValidationError):
            two_level(gamma_g1e1=-5.0)

    def test_valid_spec_round_trips(self):
        spec = load_preset('paper-default-5lvl')
        self.assertEqual(validate(spec), spec)

    def test_ms0_detunings(self):
        spec = two_level()
        self.assertEqual(spec.omega_e1g1, 0.0)
        self.assertAlmostEqual(spec.omega_e2g2, D_ES - D_GS)

    def test_ms1_detunings(self):
        spec = load_preset('paper-default-5lvl', resonant_branch='ms1')
        self.assertIs(spec.resonant_branch, ResonantBranch.MS1)
        self.assertAlmostEqual(spec.omega_e1g1, D_GS - D_ES)
        self.assertEqual(spec.omega_e2g2, 0.0)

    def test_per_emitter_detunings_need_one_per_emitter(self):
        with self.assertRaises(ModelValidationError) as ctx:
            two_level(emitter_detunings=[1e8])
        self.assertIn('emitter_detunings', ctx.exception.errors)
        spec = two_level(emitter_detunings=[1e8, -1e8])
        self.assertEqual(spec.detuning('e1g1', 1), -1e8)

    def test_metastable_lifetime_must_match_rates(self):
        spec = load_preset('paper-default-5lvl')
        with self.assertRaises(ModelValidationError) as ctx:
            spec.with_overrides(gamma_mg1=1e3)
        self.assertIn('metastable_lifetime', ctx.exception.errors)


# =============================================================================
# PRESETS AND OVERRIDES
# =============================================================================

class PresetTests(SimpleTestCase):

    def test_shipped_presets(self):
        names = [item['name'] for item in list_presets()]
        self.assertEqual(names, ['paper-default-2lvl', 'paper-default-3lvl', 'paper-default-5lvl'])

    def test_purcell_rate_of_reference_preset(self):
        spec = load_preset('paper-default-5lvl')
        self.assertIs(spec.scheme, Scheme.FIVE_LEVEL)
        self.assertAlmostEqual(spec.purcell_rate / 0.74e9, 1.0, places=12)
        self.assertEqual(spec.label, 'paper-default-5lvl')

    def test_metastable_rates(self):
        spec = load_preset('paper-default-5lvl')
        self.assertAlmostEqual((spec.gamma_mg1 + spec.gamma_mg2) * 172e-9, 1.0)

    def test_unknown_preset(self):
        with self.assertRaises(ConfigError):
            load_preset('nope')

    def test_pump_alias_sets_both_branches(self):
        spec = load_preset('paper-default-5lvl').with_overrides(gamma_pump=2e8)
        self.assertEqual(spec.gamma_g1e1, 2e8)
        self.assertEqual(spec.gamma_g2e2, 2e8)

    def test_pump_alias_skips_absent_branch(self):
        spec = load_preset('paper-default-2lvl').with_overrides(gamma_pump=2e8)
        self.assertEqual(spec.gamma_g1e1, 2e8)
        self.assertEqual(spec.gamma_g2e2, 0.0)

    def test_unknown_override(self):
        with self.assertRaises(ModelValidationError) as ctx:
            load_preset('paper-default-2lvl', photon_count=3)
        self.assertIn('photon_count', ctx.exception.errors)

    def test_overrides_do_not_mutate(self):
        spec = load_preset('paper-default-2lvl')
        spec.with_overrides(N=3)
        self.assertEqual(spec.N, 2)
        self.assertIsInstance(spec, ModelSpec)


class CalibrationOverlayTests(SimpleTestCase):

    def setUp(self):
        workspace = tempfile.TemporaryDirectory()
        self.addCleanup(workspace.cleanup)
        self.root = Path(workspace.name)
        shutil.copy(Path(simulation_setting('PRESETS_DIR')) / 'paper-default-5lvl.yaml', self.root)

    def test_shipped_preset_has_no_overlay_by_default(self):
        with self.settings(SIMULATION={'PRESETS_DIR': self.root}):
            self.assertEqual(load_calibration('paper-default-5lvl'), {})
            self.assertEqual(load_preset('paper-default-5lvl').chi_e1g1, 8e8)

    def test_overlay_applies_before_overrides(self):
        with self.settings(SIMULATION={'PRESETS_DIR': self.root}):
            path = write_calibration('paper-default-5lvl', {'parameters': {'chi': 5e8, 'gamma_e1m': 4e6}})
            self.assertEqual(path, self.root / 'calibrated' / 'paper-default-5lvl.yaml')
            self.assertEqual([item['name'] for item in list_presets()], ['paper-default-5lvl'])

            spec = load_preset('paper-default-5lvl')
            self.assertEqual((spec.chi_e1g1, spec.chi_e2g2, spec.gamma_e1m), (5e8, 5e8, 4e6))
            self.assertEqual(spec.label, 'paper-default-5lvl')
            self.assertEqual(load_preset('paper-default-5lvl', chi=2e8).chi_e1g1, 2e8)

    def test_overlay_is_validated(self):
        with self.settings(SIMULATION={'PRESETS_DIR': self.root}):
            write_calibration('paper-default-5lvl', {'parameters': {'chi': -1.0}})
            with self.assertRaises(ModelValidationError):
                load_preset('paper-default-5lvl')


class SchemeReductionTests(SimpleTestCase):

    def test_reduction_zeroes_absent_levels(self):
        spec = load_preset('paper-default-5lvl')
        reduced = reduce_scheme(spec, 'two-level')
        self.assertIs(reduced.scheme, Scheme.TWO_LEVEL)
        self.assertEqual(reduced.gamma_e1m, 0.0)
        self.assertEqual(reduced.gamma_g2e2, 0.0)
        self.assertIsNone(reduced.metastable_lifetime)
        self.assertEqual(reduced.gamma_e1g1, spec.gamma_e1g1)
