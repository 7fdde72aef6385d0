"""
Permutation-invariant generator for N identical two-level emitters and
the cavity, on kets |J, M> x |n>.

Density blocks are stored weighted by their degeneracy, so the trace is
the plain sum of block traces. Individual (local) channels move weight
between neighbouring J blocks through the operators A_{q,dJ}; the
collective cavity coupling acts inside each block.
"""
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import sparse

from core.conf import simulation_setting
from core.exceptions import (
    CapacityError, ConfigError, NormalizationError, SchemeMismatchError,
)
from core.operators import (
    DensityState, Operator, SpaceSignature, adjoint, annihilation, embed, identity,
)
from emitters.schemes import Scheme
from master_equation.liouville import Liouvillian
from master_equation.spaces import LiouvilleSpace

from .basis import DickeBasis, LOCAL_CHANNELS, local_amplitude

logger = logging.getLogger(__name__)


def dicke_signature(N, n_max):
    return SpaceSignature((DickeBasis.for_emitters(N).dimension, n_max))


def _spin_operators(basis):
    """Collective Jz, J+ and J^2 on the Dicke slot."""
    size = basis.dimension
    jz = np.array([m2 / 2.0 for _, m2 in basis.states])
    j_sq = np.array([(j2 / 2.0) * (j2 / 2.0 + 1) for j2, _ in basis.states])
    rows, cols, values = [], [], []
    for (j2, m2), col in basis.index.items():
        target = (j2, m2 + 2)
        if target in basis.index:
            j, m = j2 / 2.0, m2 / 2.0
            rows.append(basis.index[target])
            cols.append(col)
            values.append(np.sqrt(j * (j + 1) - m * (m + 1)))
    signature = SpaceSignature((size,))
    return (
        Operator(signature, sparse.diags(jz), 0),
        Operator(signature, sparse.coo_matrix((values, (rows, cols)), shape=(size, size)), 1),
        Operator(signature, sparse.diags(j_sq), 0),
    )


def _local_operator(basis, q, dj2):
    """A_{q,dJ}: block-changing map of the local channel with component q."""
    size = basis.dimension
    rows, cols, values = [], [], []
    for (j2, m2), col in basis.index.items():
        target = (j2 + dj2, m2 + 2 * q)
        if target not in basis.index:
            continue
        amplitude = local_amplitude(basis.N, j2, m2, q, dj2)
        if amplitude:
            rows.append(basis.index[target])
            cols.append(col)
            values.append(amplitude)
    return Operator(
        SpaceSignature((size,)),
        sparse.coo_matrix((values, (rows, cols)), shape=(size, size)),
        q,
    )


def dicke_operators(basis, n_max):
    """Named operators on |J, M> x |n> for observables and assembly."""
    signature = SpaceSignature((basis.dimension, n_max))
    jz, jp, j_sq = _spin_operators(basis)
    a = embed(annihilation(n_max), 1, signature)
    half_n = 0.5 * basis.N
    ops = {
        'identity': identity(signature),
        'a': a,
        'adag': adjoint(a),
        'n': adjoint(a) @ a,
        'Jz': embed(jz, 0, signature),
        'Jp': embed(jp, 0, signature),
        'J2': embed(j_sq, 0, signature),
    }
    ops['Jm'] = adjoint(ops['Jp'])
    ops['pop:e1'] = (1.0 / basis.N) * (ops['Jz'] + half_n * ops['identity'])
    ops['pop:g1'] = (1.0 / basis.N) * (half_n * ops['identity'] - ops['Jz'])
    for channel, (q, _) in LOCAL_CHANNELS.items():
        for dj2 in (2, 0, -2):
            ops[f'local:{channel}:{dj2}'] = embed(_local_operator(basis, q, dj2), 0, signature)
    return ops


def _generator(space, spec, ops, N):
    """Assemble the generator on one sector space from sandwich terms."""
    sandwich = space.superoperator
    half_n = 0.5 * N
    ident = ops['identity']

    hamiltonian = (
        spec.omega_c * ops['n']
        + spec.omega_e1g1 * (ops['Jz'] + half_n * ident)
        + spec.g * (ops['Jp'] @ ops['a'] + ops['adag'] @ ops['Jm'])
    )
    matrix = sandwich(hamiltonian, None, -1j) + sandwich(None, hamiltonian, 1j)

    # cavity loss
    matrix = matrix + spec.kappa * (
        sandwich(ops['a'], ops['adag'])
        - 0.5 * sandwich(ops['n'], None)
        - 0.5 * sandwich(None, ops['n'])
    )

    excited = ops['Jz'] + half_n * ident
    ground = half_n * ident - ops['Jz']
    for channel, rate, occupied in (
        ('emission', spec.gamma_e1g1, excited),
        ('pump', spec.gamma_g1e1, ground),
    ):
        if not rate:
            continue
        jumps = sum(
            (sandwich(ops[f'local:{channel}:{dj2}'], adjoint(ops[f'local:{channel}:{dj2}']))
             for dj2 in (2, 0, -2)),
            sparse.csr_matrix((space.size, space.size)),
        )
        matrix = matrix + rate * (
            jumps - 0.5 * sandwich(occupied, None) - 0.5 * sandwich(None, occupied)
        )

    if spec.chi_e1g1:
        jumps = sum(
            (sandwich(ops[f'local:dephasing:{dj2}'], adjoint(ops[f'local:dephasing:{dj2}']))
             for dj2 in (2, 0, -2)),
            sparse.csr_matrix((space.size, space.size)),
        )
        matrix = matrix + 0.5 * spec.chi_e1g1 * (jumps - N * sparse.identity(space.size))
    return matrix.tocsr()


def build_dicke_liouvillian(spec, sector=0):
    """
    Permutation-invariant generator for a two-level spec, restricted to the
    excitation sector ``sector`` (0 holds populations and steady states).
    """
    if spec.scheme is not Scheme.TWO_LEVEL:
        raise SchemeMismatchError(
            f"The Dicke backend handles two-level emitters only, not {spec.scheme.value}; "
            f"use the exact (build_qme) or meanfield (cumulant) backend"
        )
    if any(spec.emitter_detunings):
        raise ConfigError("Per-emitter detunings break permutation symmetry; use the exact backend")

    basis = DickeBasis.for_emitters(spec.N)
    kets = basis.dimension * spec.n_max
    limit = simulation_setting('MAX_DICKE_KETS')
    if kets > limit:
        raise CapacityError(
            f"Dicke space with N={spec.N}, n_max={spec.n_max} has {kets} kets (limit {limit})",
            feasible_backend='meanfield',
        )

    signature = dicke_signature(spec.N, spec.n_max)
    ops = dicke_operators(basis, spec.n_max)
    charges = (basis.excitations()[:, None] + np.arange(spec.n_max)[None, :]).ravel()
    block_ids = np.repeat(basis.block_ids(), spec.n_max)
    blocks = [np.flatnonzero(block_ids == j2) for j2 in basis.j2_values]

    def builder(k):
        space = LiouvilleSpace.sector_of(charges, k, block_ids=block_ids, blocks=blocks)
        matrix = _generator(space, spec, ops, spec.N)
        logger.info(f"Assembled Dicke generator: N={spec.N}, sector {k}, size {space.size}, "
                    f"nnz {matrix.nnz}")
        return Liouvillian(signature, matrix, space, spec, ops, charges, builder)

    return builder(sector)


# =============================================================================
# STATES AND POPULATIONS
# =============================================================================

def dicke_state(liouvillian, J, M, photons=0):
    """|J, M> x |photons> as a DensityState on the generator's signature."""
    basis = DickeBasis.for_emitters(liouvillian.spec.N)
    index = basis.position(J, M) * liouvillian.spec.n_max + photons
    return DensityState.basis(liouvillian.signature, index, blocks=liouvillian.space.blocks)


@dataclass
class DickePopulations:
    """Occupation of every (J, M), photon number traced out."""
    N: int
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def total(self):
        return float(sum(self.values.values()))

    def as_frame(self):
        return pd.DataFrame(
            [(J, M, p) for (J, M), p in self.values.items()],
            columns=['J', 'M', 'population'],
        )

    def to_csv(self, path, float_format=None):
        self.as_frame().to_csv(
            path, index=False,
            float_format=float_format or simulation_setting('CSV_FLOAT_FORMAT'),
        )
        return path


def dicke_populations(state, N):
    """Partial trace over the cavity, diagonal in (J, M)."""
    basis = DickeBasis.for_emitters(N)
    n_max = state.signature.dims[1]
    diagonal = np.real(np.diag(state.matrix)).reshape(basis.dimension, n_max).sum(axis=1)
    values = {
        (j2 / 2.0, m2 / 2.0): float(diagonal[i]) for i, (j2, m2) in enumerate(basis.states)
    }
    lowest = min(values.values())
    total = float(diagonal.sum())
    if lowest < -1e-9 or abs(total - 1.0) > 1e-8:
        raise NormalizationError(
            f"Dicke populations invalid: min {lowest:.3e}, sum {total:.12f}"
        )
    return DickePopulations(N, values)
