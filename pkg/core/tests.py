import math
import pickle

import numpy as np
from django.test import SimpleTestCase, override_settings

from .conf import simulation_setting
from .exceptions import (
    CapacityError, ConfigError, InvalidDimensionError, InvalidLevelError, ModelValidationError,
    NormalizationError, SignatureError,
)
from .operators import (
    DensityState, SpaceSignature, adjoint, annihilation, commutator, creation, embed, identity,
    projector, transition,
)
from .units import parse_assignment, parse_quantity


# =============================================================================
# OPERATORS
# =============================================================================

class SignatureTests(SimpleTestCase):

    def test_total_is_product_of_dims(self):
        self.assertEqual(SpaceSignature((5, 5, 3)).total, 75)

    def test_rejects_zero_dimension(self):
        with self.assertRaises(InvalidDimensionError):
            SpaceSignature((2, 0))

    def test_rejects_empty_signature(self):
        with self.assertRaises(InvalidDimensionError):
            SpaceSignature(())


class AnnihilationTests(SimpleTestCase):

    def test_two_level_truncation_has_single_entry(self):
        a = annihilation(2).toarray()
        expected = np.array([[0, 1], [0, 0]], dtype=complex)
        np.testing.assert_allclose(a, expected)

    def test_superdiagonal_holds_square_roots(self):
        a = annihilation(4).toarray()
        np.testing.assert_allclose(np.diag(a, k=1), np.sqrt([1, 2, 3]))
        self.assertEqual(annihilation(4).nnz, 3)

    def test_commutator_is_identity_below_truncation(self):
        a = annihilation(6)
        diagonal = np.diag(commutator(a, creation(6)).toarray()).real
        np.testing.assert_allclose(diagonal[:-1], np.ones(5))
        self.assertAlmostEqual(diagonal[-1], -5.0)

    def test_charge_is_minus_one(self):
        self.assertEqual(annihilation(3).excitation, -1)
        self.assertEqual(creation(3).excitation, 1)

    def test_invalid_truncation(self):
        with self.assertRaises(InvalidDimensionError):
            annihilation(0)


class TransitionTests(SimpleTestCase):

    def test_contraction_rule(self):
        # |b><a| composed after |a><c| gives |b><c|
        for a, b, c in [(2, 0, 1), (4, 3, 0), (1, 1, 1)]:
            product = transition(5, a, b) @ transition(5, c, a)
            np.testing.assert_allclose(product.toarray(), transition(5, c, b).toarray())

    def test_mismatched_contraction_vanishes(self):
        product = transition(5, 2, 0) @ transition(5, 1, 3)
        self.assertEqual(product.nnz, 0)

    def test_projectors_are_complete(self):
        total = sum((projector(5, level) for level in range(1, 5)), projector(5, 0))
        np.testing.assert_allclose(total.toarray(), np.eye(5))

    def test_level_out_of_range(self):
        with self.assertRaises(InvalidLevelError):
            transition(3, 0, 3)

    def test_adjoint_is_involution(self):
        op = 0.3j * transition(3, 0, 2) + annihilation(3) * 0 + transition(3, 1, 1)
        np.testing.assert_allclose(adjoint(adjoint(op)).toarray(), op.toarray())


class EmbedTests(SimpleTestCase):

    def test_matches_dense_kronecker(self):
        signature = SpaceSignature((2, 3))
        lowering = transition(2, 1, 0)
        lifted = embed(lowering, 0, signature)
        expected = np.kron(lowering.toarray(), np.eye(3))
        np.testing.assert_allclose(lifted.toarray(), expected)
        self.assertEqual(lifted.nnz, 3)

    def test_identity_lifts_to_identity(self):
        signature = SpaceSignature((2, 3, 4))
        lifted = embed(identity(3), 1, signature)
        np.testing.assert_allclose(lifted.toarray(), np.eye(24))

    def test_different_slots_commute(self):
        signature = SpaceSignature((3, 4))
        left = embed(transition(3, 0, 2), 0, signature)
        right = embed(annihilation(4), 1, signature)
        np.testing.assert_allclose((left @ right).toarray(), (right @ left).toarray())

    def test_dimension_mismatch(self):
        with self.assertRaises(SignatureError):
            embed(annihilation(3), 0, SpaceSignature((2, 3)))

    def test_signature_mismatch_on_sum(self):
        with self.assertRaises(SignatureError):
            annihilation(3) + annihilation(4)

    def test_trace_is_cyclic(self):
        rng = np.random.default_rng(7)
        signature = SpaceSignature((2, 3))
        ops = [
            embed(transition(2, 0, 1), 0, signature) * complex(*rng.normal(size=2))
            + embed(annihilation(3), 1, signature) * complex(*rng.normal(size=2))
            for _ in range(2)
        ]
        left, right = ops
        self.assertAlmostEqual((left @ right).trace(), (right @ left).trace(), places=10)


class DensityStateTests(SimpleTestCase):

    def test_basis_state_is_valid(self):
        state = DensityState.basis((2, 3), 4).check()
        self.assertAlmostEqual(state.trace().real, 1.0)

    def test_expectation_of_number_operator(self):
        state = DensityState.basis(3, 2)
        n = creation(3) @ annihilation(3)
        self.assertAlmostEqual(state.expect(n).real, 2.0)

    def test_negative_eigenvalue_rejected(self):
        state = DensityState(2, np.diag([1.2, -0.2]))
        with self.assertRaises(NormalizationError):
            state.check()

    def test_trace_drift_rejected(self):
        with self.assertRaises(NormalizationError):
            DensityState(2, np.diag([0.5, 0.4])).check()


# =============================================================================
# UNITS AND SETTINGS
# =============================================================================

class UnitParsingTests(SimpleTestCase):

    def test_plain_numbers_pass_through(self):
        self.assertEqual(parse_quantity(2.5e8), 2.5e8)
        self.assertEqual(parse_quantity('1e5'), 1e5)

    def test_rates(self):
        self.assertAlmostEqual(parse_quantity('10 MHz'), 1e7)
        self.assertAlmostEqual(parse_quantity('0.74 GHz'), 0.74e9)
        self.assertAlmostEqual(parse_quantity('3 1/s'), 3.0)

    def test_angular_prefix_and_suffix(self):
        expected = 2.0 * math.pi * 2.87e9
        self.assertAlmostEqual(parse_quantity('2.87 2pi*GHz'), expected, delta=1e-3)
        self.assertAlmostEqual(parse_quantity('2pi*2.87 GHz'), expected, delta=1e-3)

    def test_times(self):
        self.assertAlmostEqual(parse_quantity('172 ns', kind='time'), 172e-9)
        self.assertAlmostEqual(parse_quantity('12 us', kind='time'), 12e-6)

    def test_time_where_rate_expected(self):
        with self.assertRaises(ConfigError):
            parse_quantity('12 ns')

    def test_unknown_unit(self):
        with self.assertRaises(ConfigError):
            parse_quantity('3 furlongs')

    def test_booleans_are_not_numbers(self):
        with self.assertRaises(ConfigError):
            parse_quantity(True)

    def test_assignment(self):
        self.assertEqual(parse_assignment('gamma_pump = 10 MHz'), ('gamma_pump', '10 MHz'))
        with self.assertRaises(ConfigError):
            parse_assignment('gamma_pump')


class SimulationSettingsTests(SimpleTestCase):

    def test_defaults(self):
        self.assertEqual(simulation_setting('SOLVER.METHOD'), 'BDF')
        self.assertEqual(simulation_setting('G2.POINTS'), 240)

    @override_settings(SIMULATION={'SOLVER': {'RTOL': 1e-6}})
    def test_nested_override_keeps_siblings(self):
        self.assertEqual(simulation_setting('SOLVER.RTOL'), 1e-6)
        self.assertEqual(simulation_setting('SOLVER.ATOL'), 1e-10)

    def test_unknown_key(self):
        with self.assertRaises(ConfigError):
            simulation_setting('SOLVER.NOPE')

    def test_explicit_none_default_is_returned(self):
        self.assertIsNone(simulation_setting('NO.SUCH', None))
        self.assertIsNone(simulation_setting('SOLVER.NOPE', default=None))

    def test_falsy_defaults_are_returned(self):
        self.assertEqual(simulation_setting('NO.SUCH', 0), 0)
        self.assertEqual(simulation_setting('NO.SUCH', {}), {})

    def test_existing_key_ignores_default(self):
        self.assertEqual(simulation_setting('SOLVER.METHOD', None), 'BDF')

    def test_missing_key_without_default_raises(self):
        with self.assertRaises(ConfigError):
            simulation_setting('NO.SUCH')


class ExceptionTests(SimpleTestCase):

    def test_capacity_error_names_backend(self):
        error = CapacityError("Too large", feasible_backend='meanfield')
        self.assertIn("'meanfield'", error.message)
        self.assertEqual(error.exit_code, 3)

    def test_validation_error_lists_fields(self):
        error = ModelValidationError({'kappa': ['Must be > 0.']})
        self.assertEqual(error.exit_code, 2)
        self.assertEqual(error.as_payload()['kappa'], ['Must be > 0.'])

    def test_errors_survive_pickling(self):
        for error in (
            CapacityError("Too large", feasible_backend='dicke'),
            ModelValidationError({'N': ['Bad.']}),
            NormalizationError("Off"),
        ):
            restored = pickle.loads(pickle.dumps(error))
            self.assertIs(type(restored), type(error))
            self.assertEqual(restored.message, error.message)
            self.assertEqual(restored.errors, error.errors)
