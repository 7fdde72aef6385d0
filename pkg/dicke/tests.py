import math

import numpy as np
from django.test import SimpleTestCase, override_settings
from sympy import Rational
from sympy.physics.quantum.cg import CG

from core.exceptions import BasisError, CapacityError, SchemeMismatchError
from emitters.presets import load_preset
from emitters.schemes import validate
from master_equation.liouville import build_qme
from master_equation.solvers import steady_state
from observables.correlations import g2

from .basis import DickeBasis, clebsch_gordan, collective_jump_rates, degeneracy, dicke_dimension
from .liouvillian import build_dicke_liouvillian, dicke_populations, dicke_state


def two_level(**changes):
    data = {
        'scheme': 'two-level', 'N': 2, 'n_max': 3, 'g': 1.5e9, 'kappa': 2.0 * math.pi * 1e9,
        'gamma_e1g1': 8e7, 'gamma_g1e1': 2e8, 'chi_e1g1': 1e8,
    }
    data.update(changes)
    return validate(data)


def assert_rates(case, rates, expected):
    case.assertEqual(set(rates), set(expected))
    for key, value in expected.items():
        case.assertAlmostEqual(rates[key], value, places=12)


# =============================================================================
# BASIS
# =============================================================================

class BasisTests(SimpleTestCase):

    def test_dimensions(self):
        self.assertEqual(dicke_dimension(2), 4)
        self.assertEqual(dicke_dimension(3), 6)
        self.assertEqual(dicke_dimension(40), 441)
        self.assertEqual(DickeBasis.for_emitters(40).dimension, 441)

    def test_degeneracies_fill_product_space(self):
        for N in (1, 2, 5, 8):
            basis = DickeBasis.for_emitters(N)
            total = sum(d * (j2 + 1) for j2, d in basis.degeneracies().items())
            self.assertEqual(total, 2 ** N)

    def test_small_degeneracies(self):
        self.assertEqual(degeneracy(2, 2), 1)
        self.assertEqual(degeneracy(2, 0), 1)
        self.assertEqual(degeneracy(3, 1), 2)

    def test_blocks_run_downward_in_J(self):
        basis = DickeBasis.for_emitters(3)
        self.assertEqual(basis.j2_values, (3, 1))
        self.assertEqual(basis.states[0], (3, -3))
        self.assertEqual(basis.position(0.5, 0.5), 5)

    def test_rejects_non_dicke_state(self):
        with self.assertRaises(BasisError):
            DickeBasis.for_emitters(2).position(1, 2)
        with self.assertRaises(BasisError):
            DickeBasis.for_emitters(2).position(0.3, 0)


class ClebschGordanTests(SimpleTestCase):

    def test_matches_sympy(self):
        for j2 in range(0, 5):
            for dj2 in (2, 0, -2):
                jp2 = j2 + dj2
                for q in (1, 0, -1):
                    for m2 in range(-j2 - 2, j2 + 3, 2):
                        value = clebsch_gordan(j2, m2, q, dj2)
                        allowed = jp2 >= 0 and abs(m2) <= jp2 and abs(m2 - 2 * q) <= j2
                        if not allowed or (j2 == 0 and dj2 != 2):
                            self.assertEqual(value, 0.0)
                            continue
                        expected = CG(
                            Rational(j2, 2), Rational(m2 - 2 * q, 2), 1, q,
                            Rational(jp2, 2), Rational(m2, 2),
                        ).doit()
                        self.assertAlmostEqual(value, float(expected), places=12)


class JumpRateTests(SimpleTestCase):

    def test_emission_from_fully_inverted_pair(self):
        assert_rates(self, collective_jump_rates(2, 1, 1, 'emission'), {(1, 0): 1.0, (0, 0): 1.0})

    def test_dephasing_moves_symmetric_state_to_singlet(self):
        assert_rates(self, collective_jump_rates(2, 1, 0, 'dephasing'), {(0, 0): 2.0})

    def test_pump_from_ground_state(self):
        assert_rates(self, collective_jump_rates(2, 1, -1, 'pump'), {(1, 0): 1.0, (0, 0): 1.0})

    def test_cavity_coupling_ladder(self):
        rates = collective_jump_rates(4, 2, 1, 'cavity-coupling')
        assert_rates(self, rates, {(2, 2): 2.0, (2, 0): math.sqrt(6.0)})

    def test_cavity_coupling_stops_at_top(self):
        rates = collective_jump_rates(2, 1, 1, 'cavity-coupling')
        assert_rates(self, rates, {(1, 0): math.sqrt(2.0)})

    def test_unknown_channel(self):
        with self.assertRaises(BasisError):
            collective_jump_rates(2, 1, 0, 'tunnelling')


# =============================================================================
# GENERATOR
# =============================================================================

class DickeGeneratorTests(SimpleTestCase):

    def test_preserves_trace(self):
        liouvillian = build_dicke_liouvillian(two_level(N=4))
        self.assertLess(liouvillian.trace_defect(), 1e-12 * liouvillian.scale)

    def test_ground_and_inverted_states(self):
        liouvillian = build_dicke_liouvillian(two_level(N=3))
        ground = dicke_state(liouvillian, 1.5, -1.5)
        inverted = dicke_state(liouvillian, 1.5, 1.5)
        self.assertAlmostEqual(liouvillian.expect('pop:g1', ground).real, 1.0)
        self.assertAlmostEqual(liouvillian.expect('pop:e1', inverted).real, 1.0)
        self.assertAlmostEqual(dicke_populations(inverted, 3)[(1.5, 1.5)], 1.0)

    def test_rejects_multilevel_scheme(self):
        with self.assertRaises(SchemeMismatchError):
            build_dicke_liouvillian(load_preset('paper-default-5lvl'))

    @override_settings(SIMULATION={'MAX_DICKE_KETS': 10})
    def test_capacity_points_at_meanfield(self):
        with self.assertRaises(CapacityError) as ctx:
            build_dicke_liouvillian(two_level(N=4))
        self.assertIn("'meanfield'", ctx.exception.message)


class ProductSpaceAgreementTests(SimpleTestCase):
    """The permutation-invariant generator reproduces the product-space results."""

    @override_settings(SIMULATION={'STEADY_STATE': {'REFINEMENT_STEPS': 6}})
    def test_steady_state_observables(self):
        for N in (1, 2, 3):
            spec = two_level(N=N)
            exact = build_qme(spec)
            dicke = build_dicke_liouvillian(spec)
            rho_exact = steady_state(exact)
            rho_dicke = steady_state(dicke).check()

            for name in ('n', 'pop:e1', 'pop:g1', 'Jz', 'J2'):
                expected = exact.expect(name, rho_exact).real
                self.assertAlmostEqual(
                    dicke.expect(name, rho_dicke).real, expected, delta=1e-8 * max(abs(expected), 1e-6),
                    msg=f"{name} for N={N}",
                )
            populations = dicke_populations(rho_dicke, N)
            self.assertAlmostEqual(populations.total(), 1.0, places=10)

    @override_settings(SIMULATION={
        'SOLVER': {'RTOL': 1e-12, 'ATOL': 1e-15},
        'STEADY_STATE': {'REFINEMENT_STEPS': 6},
    })
    def test_g2_curves(self):
        taus = [0.0, 1e-10, 1e-9, 5e-9]
        for N in (1, 2):
            spec = two_level(N=N)
            exact = build_qme(spec)
            dicke = build_dicke_liouvillian(spec)
            curve_exact = g2(exact, steady_state(exact), taus)
            curve_dicke = g2(dicke, steady_state(dicke), taus)
            np.testing.assert_allclose(curve_dicke.values, curve_exact.values, rtol=1e-8)
