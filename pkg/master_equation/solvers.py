"""
Time propagation, steady states and quantum-regression correlators for
the density-matrix backends (product space and Dicke).
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import splu

from core.conf import simulation_setting
from core.exceptions import (
    ConfigError, SteadyStateMultiplicityError, StationarityError, StiffnessError,
)
from core.operators import DensityState

logger = logging.getLogger(__name__)


@dataclass
class Trajectory:
    """States of an evolution sampled at ``times`` (vectors on the generator's space)."""
    times: np.ndarray
    vectors: np.ndarray
    liouvillian: object

    def __len__(self):
        return len(self.times)

    def state(self, index):
        return self.liouvillian.density(self.vectors[index])

    def states(self):
        return [self.state(i) for i in range(len(self))]

    def expect(self, op):
        op = self.liouvillian.operators[op] if isinstance(op, str) else op
        return self.vectors @ self.liouvillian.space.expectation_vector(op)

    def traces(self):
        return self.vectors @ self.liouvillian.space.trace_vector()

    @property
    def final(self):
        return self.state(-1)


def _check_times(times):
    times = np.asarray(times, dtype=np.float64)
    if times.ndim != 1 or times.size == 0:
        raise ConfigError("Time grid must be a non-empty 1-d sequence")
    if np.any(np.diff(times) <= 0):
        raise ConfigError("Time grid must be strictly increasing")
    return times


def evolve(liouvillian, rho0, times, rtol=None, atol=None):
    """
    Integrate d rho/dt = L rho on ``liouvillian``'s space.

    ``rho0`` is a DensityState or a vector on that space. Elements of a
    DensityState outside the space are ignored.
    """
    times = _check_times(times)
    rtol = rtol or simulation_setting('SOLVER.RTOL')
    atol = atol or simulation_setting('SOLVER.ATOL')
    if isinstance(rho0, DensityState):
        y0 = liouvillian.vector(rho0)
    else:
        y0 = np.asarray(rho0, dtype=np.complex128)

    matrix = liouvillian.matrix
    if times.size == 1 or matrix.nnz == 0:
        return Trajectory(times, np.tile(y0, (times.size, 1)), liouvillian)

    solution = solve_ivp(
        lambda t, y: matrix @ y,
        (times[0], times[-1]),
        y0,
        method=simulation_setting('SOLVER.METHOD'),
        t_eval=times,
        rtol=rtol,
        atol=atol,
        jac=matrix,
    )
    if not solution.success:
        logger.error(f"Integration failed after t={solution.t[-1] if solution.t.size else 0:.3e}s: "
                     f"{solution.message}")
        raise StiffnessError(f"Time integration failed: {solution.message}")
    return Trajectory(times, solution.y.T.copy(), liouvillian)


# =============================================================================
# STEADY STATE
# =============================================================================

def _finalize(liouvillian, vector):
    state = liouvillian.density(vector)
    matrix = 0.5 * (state.matrix + state.matrix.conj().T)
    matrix /= np.trace(matrix).real
    return DensityState(state.signature, matrix, blocks=state.blocks)


def _relative_residual(liouvillian, vector):
    scale = liouvillian.scale or 1.0
    return float(np.abs(liouvillian.matrix @ vector).max()) / scale


def _linear_steady_state(liouvillian, refinement_steps):
    matrix = liouvillian.matrix.tocsr()
    size = liouvillian.size
    weights = liouvillian.space.trace_vector()
    first = matrix.getrow(0)
    trace_row = np.flatnonzero(weights)
    system = (
        matrix
        - sparse.csr_matrix((first.data, (np.zeros(first.nnz, dtype=np.int64), first.indices)),
                            shape=(size, size))
        + sparse.csr_matrix((weights[trace_row], (np.zeros(trace_row.size, dtype=np.int64), trace_row)),
                            shape=(size, size))
    ).tocsc()
    rhs = np.zeros(size, dtype=np.complex128)
    rhs[0] = 1.0

    lu = splu(system)
    vector = lu.solve(rhs)
    for _ in range(refinement_steps):
        vector = vector + lu.solve(rhs - system @ vector)
    if not np.all(np.isfinite(vector)):
        raise RuntimeError("non-finite solution")
    return vector


def _relaxation_time(liouvillian):
    spec = liouvillian.spec
    lifetimes = simulation_setting('STEADY_STATE.FALLBACK_LIFETIMES')
    if spec is not None:
        return lifetimes / spec.slowest_rate
    diagonal = np.abs(liouvillian.matrix.diagonal())
    diagonal = diagonal[diagonal > 0]
    return lifetimes / diagonal.min() if diagonal.size else 1.0


def _evolved_steady_state(liouvillian):
    """Long-time evolution from two different states; they must agree."""
    t_end = _relaxation_time(liouvillian)
    weights = liouvillian.space.trace_vector()
    mixed = weights / weights.sum()
    ground = np.zeros(liouvillian.size, dtype=np.complex128)
    ground[liouvillian.space.locate([0], [0])[0]] = 1.0

    finals = []
    for start in (mixed, ground):
        trajectory = evolve(liouvillian, start, [0.0, t_end])
        finals.append(trajectory.vectors[-1])

    spread = float(np.abs(finals[0] - finals[1]).max())
    if spread > simulation_setting('STEADY_STATE.MULTIPLICITY_TOL'):
        raise SteadyStateMultiplicityError(
            f"Long-time limits from different initial states differ by {spread:.3e}"
        )
    return finals[0]


def steady_state(liouvillian):
    """
    Stationary state of the generator (sector 0 when charges are known).

    Solves L rho = 0 with the first row replaced by the trace condition,
    then falls back to long-time evolution if the solve is singular or
    its residual is too large.
    """
    target = liouvillian.for_sector(0) if liouvillian.charges is not None else liouvillian
    tolerance = simulation_setting('STEADY_STATE.RESIDUAL_TOL')

    try:
        vector = _linear_steady_state(target, simulation_setting('STEADY_STATE.REFINEMENT_STEPS'))
        residual = _relative_residual(target, vector)
    except RuntimeError as exc:
        logger.warning(f"Steady-state linear solve failed ({exc}); falling back to evolution")
        vector, residual = None, np.inf

    if residual > tolerance:
        if vector is not None:
            logger.warning(
                f"Steady-state residual {residual:.3e} above {tolerance:.1e}; "
                f"falling back to long-time evolution"
            )
        vector = _evolved_steady_state(target)
        residual = _relative_residual(target, vector)

    logger.info(f"Steady state found: size {target.size}, relative residual {residual:.3e}")
    return _finalize(target, vector)


# =============================================================================
# QUANTUM REGRESSION
# =============================================================================

def check_stationary(liouvillian, rho):
    target = liouvillian.for_sector(0) if liouvillian.charges is not None else liouvillian
    residual = _relative_residual(target, target.vector(rho))
    tolerance = simulation_setting('STEADY_STATE.STATIONARITY_TOL')
    if residual > tolerance:
        raise StationarityError(
            f"State is not stationary: relative residual {residual:.3e} > {tolerance:.1e}"
        )
    return residual


def regression_correlator(liouvillian, rho_ss, A, B, taus, right=None, check=True):
    """
    <A(t+tau) B(t)> at stationarity, or Tr[A e^{L tau}(B rho C)] with
    ``right=C`` (the g2 kernel uses B=a, C=a^dag).

    The seed is evolved in the excitation sector it lives in.
    """
    taus = _check_times(taus)
    if check:
        check_stationary(liouvillian, rho_ss)

    seed = B.matrix @ rho_ss.matrix
    if right is not None:
        seed = (right.matrix.transpose() @ seed.T).T
    seed = np.asarray(seed)

    sector = None
    if liouvillian.charges is not None:
        charges = [op.excitation for op in (B, right) if op is not None]
        if any(charge is None for charge in charges):
            raise ConfigError("Regression seed operators need a definite excitation charge")
        sector = sum(charges)
    target = liouvillian.for_sector(sector) if sector is not None else liouvillian

    vector = target.space.to_vector(seed)
    trace = complex(target.space.trace_vector() @ vector)
    scale = trace if abs(trace) > 1e-300 else complex(np.abs(vector).max())
    if scale == 0:
        return np.zeros(taus.size, dtype=np.complex128)

    grid = taus if taus[0] == 0 else np.concatenate(([0.0], taus))
    trajectory = evolve(target, vector / scale, grid)
    values = trajectory.expect(A) * scale
    return values if taus[0] == 0 else values[1:]
