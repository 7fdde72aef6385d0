import numpy as np
from django.test import SimpleTestCase, override_settings
from scipy import sparse
from scipy.linalg import expm

from core.exceptions import CapacityError, ConfigError, HermiticityError
from core.operators import DensityState, Operator, SpaceSignature, annihilation, identity, number
from emitters.schemes import validate
from observables.correlations import equal_time_moment

from .liouville import Liouvillian, build_qme, dissipator, hamiltonian_part, restrict_levels
from .solvers import evolve, regression_correlator, steady_state
from .spaces import LiouvilleSpace


def model(**changes):
    data = {
        'scheme': 'two-level', 'N': 1, 'n_max': 3, 'g': 2e8, 'kappa': 1e9,
        'gamma_e1g1': 8e7, 'gamma_g1e1': 5e7, 'chi_e1g1': 1e8,
    }
    data.update(changes)
    return validate(data)


def vec(matrix):
    return np.asarray(matrix).flatten(order='F')


# =============================================================================
# BUILDING BLOCKS
# =============================================================================

class DissipatorTests(SimpleTestCase):

    def test_vacuum_is_dark(self):
        rho = np.diag([1.0, 0.0, 0.0])
        np.testing.assert_allclose(dissipator(annihilation(3)) @ vec(rho), np.zeros(9), atol=1e-15)

    def test_single_photon_decays_to_vacuum(self):
        rho = np.diag([0.0, 1.0, 0.0])
        expected = np.diag([-1.0, 1.0, 0.0])
        np.testing.assert_allclose(dissipator(annihilation(3)) @ vec(rho), vec(expected), atol=1e-15)

    def test_matches_dense_formula(self):
        rng = np.random.default_rng(11)
        o = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        rho = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        od = o.conj().T
        expected = 0.5 * (od @ o @ rho + rho @ od @ o) - o @ rho @ od
        result = dissipator(Operator(3, o)) @ vec(rho)
        np.testing.assert_allclose(result, vec(expected), atol=1e-12)


class HamiltonianPartTests(SimpleTestCase):

    def test_identity_generates_nothing(self):
        self.assertEqual(abs(hamiltonian_part(identity(4))).sum(), 0.0)

    def test_coherence_phase(self):
        omega = 3.0e9
        rho = np.array([[0.0, 1.0], [0.0, 0.0]])
        result = hamiltonian_part(number(2) * omega) @ vec(rho)
        np.testing.assert_allclose(result, vec(1j * omega * rho))

    def test_rejects_non_hermitian(self):
        with self.assertRaises(HermiticityError):
            hamiltonian_part(annihilation(3))


# =============================================================================
# MODEL ASSEMBLY
# =============================================================================

class BuildTests(SimpleTestCase):

    def test_generator_preserves_trace(self):
        for changes in ({}, {'N': 2, 'n_max': 2}):
            liouvillian = build_qme(model(**changes))
            self.assertLess(liouvillian.trace_defect(), 1e-12 * liouvillian.scale)

    def test_sector_generator_is_smaller(self):
        liouvillian = build_qme(model(N=2, n_max=3))
        sector = liouvillian.for_sector(0)
        self.assertEqual(sector.sector, 0)
        self.assertLess(sector.size, liouvillian.size)
        self.assertIs(liouvillian.for_sector(0), sector)

    def test_five_level_reduces_to_two_level(self):
        rates = {'N': 2, 'n_max': 2, 'g': 2e8, 'kappa': 1e9,
                 'gamma_e1g1': 8e7, 'gamma_g1e1': 5e7, 'chi_e1g1': 1e8}
        five = validate(dict(rates, scheme='five-level', gamma_e2g2=8e7, chi_e2g2=1e8))
        two = validate(dict(rates, scheme='two-level'))
        reduced = restrict_levels(build_qme(five), keep=[0, 2])
        reference = build_qme(two)
        self.assertEqual(reduced.signature, reference.signature)
        np.testing.assert_allclose(
            reduced.matrix.toarray(), reference.matrix.toarray(), atol=1e-6
        )

    @override_settings(SIMULATION={'MAX_EXACT_DIMENSION': 100})
    def test_capacity_points_at_dicke_backend(self):
        with self.assertRaises(CapacityError) as ctx:
            build_qme(model(N=2))
        self.assertIn("'dicke'", ctx.exception.message)


# =============================================================================
# SOLVERS
# =============================================================================

class EvolveTests(SimpleTestCase):

    def test_matches_matrix_exponential(self):
        liouvillian = build_qme(model(n_max=2))
        rho0 = DensityState.basis(liouvillian.signature, 2)
        times = np.linspace(0.0, 5e-9, 6)
        trajectory = evolve(liouvillian, rho0, times)
        generator = liouvillian.matrix.toarray()
        start = liouvillian.vector(rho0)
        for t, vector in zip(times, trajectory.vectors):
            np.testing.assert_allclose(vector, expm(generator * t) @ start, atol=1e-6)
        np.testing.assert_allclose(trajectory.traces().real, np.ones(times.size), atol=1e-8)

    def test_zero_generator_keeps_state(self):
        signature = SpaceSignature((2,))
        liouvillian = Liouvillian(signature, sparse.csr_matrix((4, 4)), LiouvilleSpace.full(2))
        rho0 = DensityState(signature, np.diag([0.3, 0.7]))
        trajectory = evolve(liouvillian, rho0, [0.0, 1.0, 2.0])
        for state in trajectory.states():
            np.testing.assert_allclose(state.matrix, rho0.matrix)

    def test_empty_cavity_decays_exponentially(self):
        spec = model(g=1.0, gamma_g1e1=0.0, chi_e1g1=0.0)
        liouvillian = build_qme(spec)
        # emitter in g1, one photon
        rho0 = DensityState.basis(liouvillian.signature, 1)
        times = np.linspace(0.0, 3e-9, 7)
        photons = evolve(liouvillian, rho0, times).expect('n').real
        np.testing.assert_allclose(photons, np.exp(-spec.kappa * times), rtol=1e-5)

    def test_time_grid_must_increase(self):
        liouvillian = build_qme(model())
        with self.assertRaises(ConfigError):
            evolve(liouvillian, liouvillian.ground_state(), [0.0, 2.0, 1.0])


class SteadyStateTests(SimpleTestCase):

    def test_unpumped_system_relaxes_to_vacuum(self):
        liouvillian = build_qme(model(gamma_g1e1=0.0))
        rho = steady_state(liouvillian).check()
        self.assertAlmostEqual(liouvillian.expect('n', rho).real, 0.0, places=10)
        self.assertAlmostEqual(liouvillian.populations(rho)['g1'], 1.0, places=10)

    def test_uncoupled_emitter_follows_rate_equation(self):
        spec = model(g=1.0)
        liouvillian = build_qme(spec)
        rho = steady_state(liouvillian).check()
        expected = spec.gamma_g1e1 / (spec.gamma_g1e1 + spec.gamma_e1g1)
        self.assertAlmostEqual(liouvillian.populations(rho)['e1'], expected, places=6)

    def test_steady_state_is_stationary(self):
        liouvillian = build_qme(model(N=2, n_max=3))
        rho = steady_state(liouvillian).check()
        residual = liouvillian.matrix @ liouvillian.vector(rho)
        self.assertLess(np.abs(residual).max(), 1e-8 * liouvillian.scale)


class RegressionTests(SimpleTestCase):

    def setUp(self):
        self.liouvillian = build_qme(model(g=3.4e9, gamma_g1e1=2e8, n_max=4))
        self.rho = steady_state(self.liouvillian)

    def test_zero_delay_matches_equal_time_moment(self):
        ops = self.liouvillian.operators
        values = regression_correlator(
            self.liouvillian, self.rho, ops['n'], ops['a'], [0.0, 1e-10], right=ops['adag'],
        )
        expected = equal_time_moment(self.liouvillian, self.rho, 'adag', 'adag', 'a', 'a')
        self.assertAlmostEqual(values[0].real, expected.real, places=12)

    def test_first_order_correlator_starts_at_photon_number(self):
        ops = self.liouvillian.operators
        values = regression_correlator(self.liouvillian, self.rho, ops['adag'], ops['a'], [0.0, 1e-9])
        self.assertAlmostEqual(values[0].real, self.liouvillian.expect('n', self.rho).real, places=12)
        self.assertLess(abs(values[-1]), abs(values[0]))
