"""
Product-space Liouvillian of the NV-cavity master equation.

The generator is assembled as a sparse superoperator on column-stacked
density matrices, ``vec(A X B) = (B^T kron A) vec(X)``. Every term is
covariant under the excitation-number U(1), so the generator also splits
into sectors of fixed excitation difference between ket and bra.
"""
import logging

import numpy as np
from scipy import sparse

from core.conf import simulation_setting
from core.exceptions import CapacityError, HermiticityError, SignatureError
from core.operators import (
    DensityState, Operator, SpaceSignature, adjoint, annihilation, embed, identity, transition,
)
from emitters.schemes import (
    DECAY_CHANNELS, DEPHASING_CHANNELS, OPTICAL_LINES, Scheme,
)

from .spaces import LiouvilleSpace

logger = logging.getLogger(__name__)


# =============================================================================
# SUPEROPERATOR BUILDING BLOCKS
# =============================================================================

def dissipator(op):
    """
    Superoperator of D[o] rho = 1/2 {o^dag o, rho} - o rho o^dag.

    The master equation enters with a minus sign; the assembler applies it.
    """
    matrix = op.matrix
    dim = matrix.shape[0]
    eye = sparse.identity(dim, format='csr', dtype=np.complex128)
    product = (matrix.conj().transpose() @ matrix).tocsr()
    return (
        0.5 * (sparse.kron(eye, product) + sparse.kron(product.transpose(), eye))
        - sparse.kron(matrix.conj(), matrix)
    ).tocsr()


def hamiltonian_part(hamiltonian, tol=1e-10):
    """Superoperator of rho -> -i [H, rho]; H in angular-frequency units."""
    if not hamiltonian.is_hermitian(tol * max(1.0, _scale(hamiltonian.matrix))):
        raise HermiticityError("Hamiltonian must be Hermitian")
    matrix = hamiltonian.matrix
    eye = sparse.identity(matrix.shape[0], format='csr', dtype=np.complex128)
    return (-1j * (sparse.kron(eye, matrix) - sparse.kron(matrix.transpose(), eye))).tocsr()


def _scale(matrix):
    return float(np.abs(matrix.data).max()) if matrix.nnz else 0.0


# =============================================================================
# LIOUVILLIAN
# =============================================================================

class Liouvillian:
    """
    Sparse generator on a LiouvilleSpace.

    ``charges`` holds the excitation number of every ket; when present the
    generator can be restricted to a sector with ``for_sector``.
    ``operators`` exposes the named operators observables are built from
    ('a', 'n', 'Jz', 'J2', 'pop:<level>', ...).
    """

    def __init__(self, signature, matrix, space, spec=None, operators=None,
                 charges=None, builder=None):
        self.signature = signature
        self.matrix = matrix.tocsr()
        self.space = space
        self.spec = spec
        self.operators = operators or {}
        self.charges = charges
        self._builder = builder
        self._sectors = {}
        if self.matrix.shape != (space.size, space.size):
            raise SignatureError(
                f"Generator shape {self.matrix.shape} does not fit space of size {space.size}"
            )

    def __repr__(self):
        return (f"Liouvillian(signature={self.signature}, size={self.size}, "
                f"sector={self.sector}, nnz={self.matrix.nnz})")

    @property
    def size(self):
        return self.space.size

    @property
    def sector(self):
        return self.space.sector

    @property
    def scale(self):
        return _scale(self.matrix)

    def for_sector(self, sector):
        if self.sector == sector:
            return self
        if self._builder is None:
            raise SignatureError("Generator carries no excitation charges; sectors unavailable")
        if sector not in self._sectors:
            self._sectors[sector] = self._builder(sector)
        return self._sectors[sector]

    def trace_defect(self):
        """max |w^T L| for the trace functional w; zero for a trace-preserving flow."""
        if self.sector not in (None, 0):
            return 0.0
        column_sums = self.space.trace_vector() @ self.matrix
        return float(np.abs(column_sums).max()) if self.size else 0.0

    def vector(self, state):
        matrix = state.matrix if isinstance(state, DensityState) else state
        return self.space.to_vector(matrix)

    def density(self, vector):
        return DensityState(self.signature, self.space.to_matrix(vector), blocks=self.space.blocks)

    def expect(self, name_or_op, state):
        op = self.operators[name_or_op] if isinstance(name_or_op, str) else name_or_op
        return state.expect(op)

    def populations(self, state):
        """Per-level populations averaged over emitters."""
        levels = self.spec.scheme.levels if self.spec else ()
        return {level: state.expect(self.operators[f'pop:{level}']).real for level in levels}

    def ground_state(self):
        """All emitters in g1, cavity vacuum (ket index 0 in both backends)."""
        return DensityState.basis(self.signature, 0, blocks=self.space.blocks)

    @classmethod
    def assemble(cls, signature, hamiltonian, jumps, operators=None, charges=None, spec=None):
        """
        Full-space generator -i[H, .] - sum_k rate_k D[o_k].

        ``jumps`` is a sequence of (rate, Operator); zero rates are skipped.
        """
        matrix = hamiltonian_part(hamiltonian)
        for rate, op in jumps:
            if rate:
                matrix = matrix - rate * dissipator(op)
        space = LiouvilleSpace.full(signature.total)
        builder = None
        if charges is not None:
            full = matrix.tocsr()

            def builder(sector):
                sub = LiouvilleSpace.sector_of(charges, sector)
                restricted = full[sub.keys][:, sub.keys]
                return cls(signature, restricted, sub, spec, operators, charges, builder)

        return cls(signature, matrix, space, spec, operators, charges, builder)


# =============================================================================
# MODEL ASSEMBLY
# =============================================================================

def _emitter_operator(scheme, signature, emitter, source, target):
    """|target><source| on one emitter, charged by the excitation it adds."""
    excited = scheme.excited
    charge = int(target in excited) - int(source in excited)
    op = transition(scheme.size, scheme.index(source), scheme.index(target), excitation=charge)
    return embed(op, emitter, signature)


def ket_charges(signature, scheme):
    """Excitation number (photons + excited emitters) of every product ket."""
    digits = np.unravel_index(np.arange(signature.total), signature.dims)
    excited = np.zeros(scheme.size, dtype=np.int64)
    for name in scheme.excited:
        excited[scheme.index(name)] = 1
    charges = digits[-1].astype(np.int64)
    for emitter_digits in digits[:-1]:
        charges = charges + excited[emitter_digits]
    return charges


def product_operators(spec, signature):
    """Cavity, collective spin and population operators on the product space."""
    scheme, N = spec.scheme, spec.N
    a = embed(annihilation(spec.n_max), N, signature)
    ops = {'a': a, 'adag': adjoint(a), 'n': adjoint(a) @ a, 'identity': identity(signature)}

    zero = Operator(signature, sparse.csr_matrix((signature.total, signature.total)), 0)
    for level in scheme.levels:
        total = zero
        for i in range(N):
            total = total + _emitter_operator(scheme, signature, i, level, level)
        ops[f'pop:{level}'] = (1.0 / N) * total

    jz, jp = zero, Operator(signature, zero.matrix, 1)
    for i in range(N):
        jz = jz + 0.5 * (
            _emitter_operator(scheme, signature, i, 'e1', 'e1')
            - _emitter_operator(scheme, signature, i, 'g1', 'g1')
        )
        jp = jp + _emitter_operator(scheme, signature, i, 'g1', 'e1')
    jm = adjoint(jp)
    ops.update({
        'Jz': jz, 'Jp': jp, 'Jm': jm,
        'J2': jz @ jz + 0.5 * (jp @ jm + jm @ jp),
    })
    return ops


def model_terms(spec, signature):
    """Hamiltonian and (rate, jump) list of the NV-cavity model."""
    scheme, N = spec.scheme, spec.N
    ops = product_operators(spec, signature)
    a, adag = ops['a'], ops['adag']

    hamiltonian = spec.omega_c * ops['n']
    jumps = [(spec.kappa, a)]
    for i in range(N):
        for excited, ground, _ in OPTICAL_LINES:
            if not scheme.has(excited):
                continue
            line = f'{excited}{ground}'
            raising = _emitter_operator(scheme, signature, i, ground, excited)
            lowering = adjoint(raising)
            projector = _emitter_operator(scheme, signature, i, excited, excited)
            hamiltonian = hamiltonian + spec.detuning(line, i) * projector
            hamiltonian = hamiltonian + spec.g * (raising @ a + adag @ lowering)

        for name, (source, target) in DECAY_CHANNELS.items():
            rate = getattr(spec, name)
            if rate and scheme.has(source) and scheme.has(target):
                jumps.append((rate, _emitter_operator(scheme, signature, i, source, target)))

        for name, (excited, ground) in DEPHASING_CHANNELS.items():
            rate = getattr(spec, name)
            if rate and scheme.has(excited):
                sigma_z = (
                    _emitter_operator(scheme, signature, i, excited, excited)
                    - _emitter_operator(scheme, signature, i, ground, ground)
                )
                jumps.append((0.5 * rate, sigma_z))
    return hamiltonian, jumps, ops


def product_signature(spec):
    return SpaceSignature((spec.scheme.size,) * spec.N + (spec.n_max,))


def build_qme(spec):
    """
    Full product-space Liouvillian of the model.

    Raises CapacityError when the vectorized dimension exceeds
    ``SIMULATION['MAX_EXACT_DIMENSION']``.
    """
    signature = product_signature(spec)
    size = signature.total ** 2
    budget = simulation_setting('MAX_EXACT_DIMENSION')
    if size > budget:
        feasible = 'dicke' if spec.scheme is Scheme.TWO_LEVEL else 'meanfield'
        raise CapacityError(
            f"Product space {signature} needs a {size}-dimensional generator "
            f"(budget {budget})",
            feasible_backend=feasible,
        )

    hamiltonian, jumps, ops = model_terms(spec, signature)
    charges = ket_charges(signature, spec.scheme)
    liouvillian = Liouvillian.assemble(signature, hamiltonian, jumps, ops, charges, spec)
    logger.info(
        f"Assembled product-space generator: signature {signature}, "
        f"size {liouvillian.size}, nnz {liouvillian.matrix.nnz}"
    )
    return liouvillian


def restrict_levels(liouvillian, keep):
    """
    Restrict a full-space product generator to kets whose emitters all sit
    in ``keep`` (level indices). The subspace must be invariant.
    """
    signature = liouvillian.signature
    keep = np.asarray(sorted(keep))
    digits = np.unravel_index(np.arange(signature.total), signature.dims)
    mask = np.ones(signature.total, dtype=bool)
    for emitter_digits in digits[:-1]:
        mask &= np.isin(emitter_digits, keep)
    kets = np.flatnonzero(mask)
    rows = np.tile(kets, kets.size)
    cols = np.repeat(kets, kets.size)
    keys = rows + cols * signature.total
    restricted = liouvillian.matrix[keys][:, keys]
    sub_signature = SpaceSignature((keep.size,) * (len(signature) - 1) + (signature.dims[-1],))
    return Liouvillian(sub_signature, restricted, LiouvilleSpace.full(sub_signature.total))
