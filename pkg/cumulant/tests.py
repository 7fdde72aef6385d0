import numpy as np
import sympy
from django.test import SimpleTestCase

from core.exceptions import ConfigError, ConvergenceError
from core.operators import embed, transition as level_transition
from emitters.presets import load_preset
from emitters.schemes import Scheme
from master_equation.liouville import build_qme
from master_equation.solvers import steady_state
from observables.collective import collective_numbers

from .algebra import (
    A, ADAG, PHOTON_NUMBER, Monomial, canonical, combine, dagger, multiply, transition,
)
from .equations import G, KAPPA, N, OMEGA_C, MeanFieldSystem, cumulant_close, derive_eom
from .integrate import MeanFieldState, collective_moments, dicke_numbers, integrate
from .spectrum import mf_spectrum


def weak_pump_pair(**changes):
    return load_preset('paper-default-2lvl', **changes)


class ProductStateMoments:
    """Moments of an exact N=2 density matrix, read the way MeanFieldState reads its vector."""

    def __init__(self, liouvillian, state):
        self.liouvillian = liouvillian
        self.state = state
        self.scheme = liouvillian.spec.scheme

    def _site(self, emitter, levels):
        a, b = (self.scheme.index(level) for level in levels)
        # s(a, b) = |a><b|
        op = level_transition(self.scheme.size, b, a)
        return embed(op, emitter, self.liouvillian.signature)

    def expect(self, monomial):
        (_, a, b), = monomial.transitions
        return self.state.expect(self._site(0, (a, b)))

    def pair(self, first, second):
        return self.state.expect(self._site(0, first) @ self._site(1, second))

    def populations(self):
        return self.liouvillian.populations(self.state)


# =============================================================================
# ALGEBRA
# =============================================================================

class AlgebraTests(SimpleTestCase):

    def test_boson_reordering(self):
        # a a^dag = a^dag a + 1
        self.assertEqual(multiply(A, ADAG), {PHOTON_NUMBER: 1, Monomial(): 1})

    def test_emitter_contraction(self):
        product = multiply(transition(1, 'e1', 'g1'), transition(1, 'g1', 'e1'))
        self.assertEqual(product, {transition(1, 'e1', 'e1'): 1})
        self.assertEqual(multiply(transition(1, 'e1', 'g1'), transition(1, 'e1', 'g1')), {})

    def test_canonical_relabels_emitters(self):
        left = Monomial(0, 0, ((3, 'g1', 'e1'), (5, 'e1', 'e1')))
        self.assertEqual(canonical(left), Monomial(0, 0, ((1, 'e1', 'e1'), (2, 'g1', 'e1'))))

    def test_dagger_is_involution(self):
        monomial = Monomial(1, 2, ((1, 'g1', 'e1'),))
        self.assertEqual(dagger(dagger(monomial)), monomial)
        self.assertEqual(dagger(monomial), Monomial(2, 1, ((1, 'e1', 'g1'),)))


class ClosureTests(SimpleTestCase):

    def test_mixed_third_order_moment(self):
        monomial = Monomial(1, 1, ((1, 'g1', 'e1'),))
        coherence = transition(1, 'g1', 'e1')
        closed = cumulant_close(monomial)
        self.assertEqual(closed, {
            (ADAG, Monomial(0, 1, ((1, 'g1', 'e1'),))): 1,
            (A, Monomial(1, 0, ((1, 'g1', 'e1'),))): 1,
            (coherence, PHOTON_NUMBER): 1,
            (coherence, A, ADAG): -2,
        })

    def test_repeated_factor_accumulates(self):
        closed = cumulant_close(Monomial(1, 2))
        self.assertEqual(closed, {
            (ADAG, Monomial(0, 2)): 1,
            (A, PHOTON_NUMBER): 2,
            (A, A, ADAG): -2,
        })

    def test_rejects_other_orders(self):
        with self.assertRaises(ValueError):
            cumulant_close(PHOTON_NUMBER)


# =============================================================================
# EQUATIONS
# =============================================================================

class HierarchyTests(SimpleTestCase):

    def test_cavity_field_equation(self):
        rhs = derive_eom(Scheme.TWO_LEVEL).rhs(A)
        self.assertEqual(set(rhs), {A, transition(1, 'g1', 'e1')})
        self.assertEqual(sympy.expand(rhs[A] - (-sympy.I * OMEGA_C - KAPPA / 2)), 0)
        self.assertEqual(sympy.expand(rhs[transition(1, 'g1', 'e1')] + sympy.I * G * N), 0)

    def test_uncoupled_populations_ignore_the_cavity(self):
        hierarchy = derive_eom(Scheme.FIVE_LEVEL)
        for level in Scheme.FIVE_LEVEL.levels:
            for monomial, coefficient in hierarchy.rhs(transition(1, level, level)).items():
                if monomial.creations or monomial.annihilations:
                    self.assertEqual(coefficient.subs(G, 0), 0)

    def test_populations_are_conserved(self):
        for scheme in Scheme:
            hierarchy = derive_eom(scheme)
            total = combine(*((1, hierarchy.rhs(transition(1, level, level))) for level in scheme.levels))
            self.assertTrue(all(sympy.expand(c) == 0 for c in total.values()), scheme.value)

    def test_closed_system_is_second_order(self):
        hierarchy = derive_eom(Scheme.THREE_LEVEL)
        self.assertTrue(all(v.order <= 2 for v in hierarchy.variables))
        self.assertTrue(all(m.order == 3 for m in hierarchy.open_moments()))

    def test_listing(self):
        listing = MeanFieldSystem(weak_pump_pair()).listing()
        self.assertTrue(listing.startswith('# scheme: two-level\n'))
        self.assertIn('d<a>/dt = ', listing)

    def test_per_emitter_detunings_rejected(self):
        with self.assertRaises(ConfigError):
            MeanFieldSystem(weak_pump_pair(emitter_detunings=[1e8, -1e8]))


class MeanFieldSystemTests(SimpleTestCase):

    def setUp(self):
        self.system = MeanFieldSystem(load_preset('paper-default-5lvl'))

    def test_jacobian_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        y = rng.normal(size=self.system.size) + 1j * rng.normal(size=self.system.size)
        direction = rng.normal(size=self.system.size) + 1j * rng.normal(size=self.system.size)
        step = 1e-6
        numeric = (self.system.rhs(y + step * direction) - self.system.rhs(y - step * direction)) / (2 * step)
        analytic = self.system.jacobian(y) @ direction
        np.testing.assert_allclose(analytic, numeric, rtol=1e-6, atol=1e-6 * np.abs(numeric).max())

    def test_product_state(self):
        y = self.system.product_state({'g1': 0.5, 'e1': 0.5})
        state = MeanFieldState(self.system, y)
        self.assertAlmostEqual(state.populations()['e1'], 0.5)
        self.assertAlmostEqual(state.pair(('e1', 'e1'), ('g1', 'g1')).real, 0.25)
        self.assertEqual(state.photon_number, 0.0)

    def test_product_state_rejects_bad_populations(self):
        with self.assertRaises(ConfigError):
            self.system.product_state({'g1': 0.7})
        with self.assertRaises(ConfigError):
            self.system.product_state({'x': 1.0})

    def test_conjugate_moments_stay_conjugate(self):
        trajectory = integrate(self.system, times=np.linspace(0.0, 20e-9, 5))
        values = trajectory.values
        np.testing.assert_allclose(
            values[:, self.system.conjugate_index], values.conj(), atol=1e-10 * max(1.0, np.abs(values).max())
        )


# =============================================================================
# INTEGRATION AND COLLECTIVE NUMBERS
# =============================================================================

class IntegrateTests(SimpleTestCase):

    def test_reaches_fixed_point(self):
        system = MeanFieldSystem(weak_pump_pair())
        trajectory = integrate(system)
        self.assertTrue(trajectory.converged)
        self.assertLess(system.residual(trajectory.final.values), 1e-10)
        self.assertAlmostEqual(sum(trajectory.final.populations().values()), 1.0, places=8)

    def test_rejects_bad_initial_vector(self):
        system = MeanFieldSystem(weak_pump_pair())
        with self.assertRaises(ConfigError):
            integrate(system, init=np.zeros(3))

    def test_photon_number_close_to_exact_at_weak_pump(self):
        spec = weak_pump_pair()
        exact = build_qme(spec)
        expected = exact.expect('n', steady_state(exact)).real
        state = integrate(MeanFieldSystem(spec)).final
        self.assertAlmostEqual(state.photon_number / expected, 1.0, delta=0.15)

    def test_spectrum_needs_converged_state(self):
        system = MeanFieldSystem(weak_pump_pair())
        state = MeanFieldState(system, system.product_state())
        with self.assertRaises(ConvergenceError):
            mf_spectrum(system, state, converged=False)


class DickeNumberTests(SimpleTestCase):

    def test_ground_and_inverted_product_states(self):
        system = MeanFieldSystem(weak_pump_pair(N=6))
        for populations, M in (({'g1': 1.0}, -3.0), ({'e1': 1.0}, 3.0)):
            state = MeanFieldState(system, system.product_state(populations))
            J, M_value = dicke_numbers(state)
            self.assertAlmostEqual(J, 3.0, places=12)
            self.assertAlmostEqual(M_value, M, places=12)

    def test_half_excited_product_state(self):
        system = MeanFieldSystem(weak_pump_pair(N=4))
        state = MeanFieldState(system, system.product_state({'g1': 0.5, 'e1': 0.5}))
        jx2, jy2, jz2 = collective_moments(state, 4)
        self.assertAlmostEqual(jx2, 1.0)
        self.assertAlmostEqual(jy2, 1.0)
        self.assertAlmostEqual(jz2, 1.0)

    def test_matches_exact_collective_operators(self):
        spec = weak_pump_pair(gamma_pump=3e8)
        exact = build_qme(spec)
        rho = steady_state(exact)
        J, M = dicke_numbers(ProductStateMoments(exact, rho), N=2)
        expected_J, expected_M = collective_numbers(exact, rho)
        self.assertAlmostEqual(J, expected_J, delta=1e-6)
        self.assertAlmostEqual(M, expected_M, delta=1e-6)
