"""
Sparse operators and density states on tensor-product Hilbert spaces.

Subsystems are ordered ``[emitter 1, ..., emitter N, cavity]`` and basis
indices follow ``numpy.kron`` ordering, so index arithmetic is identical
across backends. Operators are immutable once built.
"""
from dataclasses import dataclass
from numbers import Number

import numpy as np
from scipy import sparse

from .exceptions import (
    InvalidDimensionError, InvalidLevelError, NormalizationError, SignatureError,
)


# =============================================================================
# SIGNATURE
# =============================================================================

@dataclass(frozen=True)
class SpaceSignature:
    """Ordered subsystem dimensions of a product space."""
    dims: tuple

    def __post_init__(self):
        dims = tuple(self.dims) if not isinstance(self.dims, Number) else (self.dims,)
        if not dims:
            raise InvalidDimensionError("A signature needs at least one subsystem")
        for dim in dims:
            if isinstance(dim, bool) or not isinstance(dim, (int, np.integer)) or dim < 1:
                raise InvalidDimensionError(f"Subsystem dimension {dim!r} must be an integer >= 1")
        object.__setattr__(self, 'dims', tuple(int(d) for d in dims))

    @property
    def total(self):
        return int(np.prod(self.dims))

    def __len__(self):
        return len(self.dims)

    def __str__(self):
        return "x".join(str(d) for d in self.dims)


def _as_signature(value):
    if isinstance(value, SpaceSignature):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return SpaceSignature((int(value),))
    return SpaceSignature(tuple(value))


# =============================================================================
# OPERATOR
# =============================================================================

class Operator:
    """
    Sparse complex matrix tagged with a SpaceSignature.

    ``excitation`` is the change of the excitation number the operator
    produces (``-1`` for the annihilation operator). It is ``None`` when
    the operator has no definite charge.
    """
    __slots__ = ('signature', 'matrix', 'excitation')

    def __init__(self, signature, matrix, excitation=None):
        signature = _as_signature(signature)
        matrix = sparse.csr_matrix(matrix, dtype=np.complex128)
        if matrix.shape != (signature.total, signature.total):
            raise SignatureError(
                f"Matrix shape {matrix.shape} does not fit signature {signature}"
            )
        matrix.sum_duplicates()
        matrix.sort_indices()
        object.__setattr__(self, 'signature', signature)
        object.__setattr__(self, 'matrix', matrix)
        object.__setattr__(self, 'excitation', excitation)

    def __setattr__(self, name, value):
        raise AttributeError("Operator is immutable")

    def __repr__(self):
        return f"Operator(signature={self.signature}, nnz={self.nnz}, excitation={self.excitation})"

    @property
    def dim(self):
        return self.signature.total

    @property
    def nnz(self):
        return int(np.count_nonzero(self.matrix.data))

    def toarray(self):
        return self.matrix.toarray()

    def trace(self):
        return complex(self.matrix.diagonal().sum())

    def dag(self):
        return adjoint(self)

    def is_hermitian(self, tol=1e-10):
        diff = self.matrix - self.matrix.conj().transpose()
        return diff.nnz == 0 or float(np.abs(diff.data).max()) <= tol

    def _check(self, other):
        if not isinstance(other, Operator):
            raise TypeError(f"Expected Operator, got {type(other).__name__}")
        if other.signature != self.signature:
            raise SignatureError(
                f"Signature {self.signature} does not match {other.signature}"
            )

    def __matmul__(self, other):
        return compose(self, other)

    def __add__(self, other):
        self._check(other)
        charge = self.excitation if self.excitation == other.excitation else None
        return Operator(self.signature, self.matrix + other.matrix, charge)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __neg__(self):
        return (-1.0) * self

    def __mul__(self, scalar):
        if not isinstance(scalar, Number):
            return NotImplemented
        return Operator(self.signature, self.matrix * scalar, self.excitation)

    __rmul__ = __mul__


def identity(signature):
    signature = _as_signature(signature)
    return Operator(signature, sparse.identity(signature.total, format='csr'), 0)


def compose(left, right):
    """Matrix product ``left @ right``; signatures must be identical."""
    left._check(right)
    charge = None
    if left.excitation is not None and right.excitation is not None:
        charge = left.excitation + right.excitation
    return Operator(left.signature, left.matrix @ right.matrix, charge)


def adjoint(op):
    charge = -op.excitation if op.excitation is not None else None
    return Operator(op.signature, op.matrix.conj().transpose(), charge)


def commutator(left, right):
    return left @ right - right @ left


# =============================================================================
# ELEMENTARY OPERATORS
# =============================================================================

def annihilation(n_max):
    """Photon annihilation operator on Fock states |0>..|n_max-1>."""
    if isinstance(n_max, bool) or not isinstance(n_max, (int, np.integer)) or n_max < 1:
        raise InvalidDimensionError(f"Photon truncation n_max={n_max!r} must be >= 1")
    n = np.arange(1, n_max)
    matrix = sparse.coo_matrix((np.sqrt(n), (n - 1, n)), shape=(n_max, n_max))
    return Operator(SpaceSignature((n_max,)), matrix, -1)


def creation(n_max):
    return adjoint(annihilation(n_max))


def number(n_max):
    a = annihilation(n_max)
    return adjoint(a) @ a


def transition(levels, from_level, to_level, excitation=None):
    """The operator |to><from| on a single emitter with ``levels`` states."""
    if isinstance(levels, bool) or not isinstance(levels, (int, np.integer)) or levels < 1:
        raise InvalidDimensionError(f"Level count {levels!r} must be >= 1")
    for index in (from_level, to_level):
        if not isinstance(index, (int, np.integer)) or not 0 <= index < levels:
            raise InvalidLevelError(f"Level {index!r} outside 0..{levels - 1}")
    matrix = sparse.coo_matrix(([1.0], ([to_level], [from_level])), shape=(levels, levels))
    if excitation is None and from_level == to_level:
        excitation = 0
    return Operator(SpaceSignature((levels,)), matrix, excitation)


def projector(levels, level):
    return transition(levels, level, level)


def embed(op, slot, signature):
    """Kronecker lift of a single-subsystem operator into ``signature``."""
    signature = _as_signature(signature)
    if not 0 <= slot < len(signature):
        raise SignatureError(f"Slot {slot} outside signature {signature}")
    if op.signature.dims != (signature.dims[slot],):
        raise SignatureError(
            f"Operator of dimension {op.dim} cannot occupy slot {slot} of {signature}"
        )
    before = int(np.prod(signature.dims[:slot], dtype=np.int64))
    after = int(np.prod(signature.dims[slot + 1:], dtype=np.int64))
    matrix = sparse.kron(
        sparse.kron(sparse.identity(before, format='csr'), op.matrix, format='csr'),
        sparse.identity(after, format='csr'),
        format='csr',
    )
    return Operator(signature, matrix, op.excitation)


# =============================================================================
# DENSITY STATE
# =============================================================================

class DensityState:
    """
    Density matrix on a SpaceSignature.

    ``blocks`` optionally lists index arrays of invariant diagonal blocks;
    the positivity check then diagonalizes each block separately.
    """

    def __init__(self, signature, matrix, blocks=None):
        self.signature = _as_signature(signature)
        if sparse.issparse(matrix):
            matrix = matrix.toarray()
        self.matrix = np.asarray(matrix, dtype=np.complex128)
        if self.matrix.shape != (self.signature.total, self.signature.total):
            raise SignatureError(
                f"State shape {self.matrix.shape} does not fit signature {self.signature}"
            )
        self.blocks = blocks

    def __repr__(self):
        return f"DensityState(signature={self.signature}, trace={self.trace().real:.6g})"

    @classmethod
    def basis(cls, signature, index, blocks=None):
        signature = _as_signature(signature)
        matrix = np.zeros((signature.total, signature.total), dtype=np.complex128)
        matrix[index, index] = 1.0
        return cls(signature, matrix, blocks)

    @classmethod
    def from_vector(cls, signature, vector, blocks=None):
        vector = np.asarray(vector, dtype=np.complex128)
        vector = vector / np.linalg.norm(vector)
        return cls(signature, np.outer(vector, vector.conj()), blocks)

    @classmethod
    def maximally_mixed(cls, signature, blocks=None):
        signature = _as_signature(signature)
        return cls(signature, np.eye(signature.total) / signature.total, blocks)

    def trace(self):
        return complex(np.trace(self.matrix))

    def expect(self, op):
        """Tr(op rho)."""
        if op.signature != self.signature:
            raise SignatureError(f"Operator {op.signature} does not act on state {self.signature}")
        return complex(op.matrix.multiply(self.matrix.T).sum())

    def hermiticity_error(self):
        return float(np.abs(self.matrix - self.matrix.conj().T).max())

    def min_eigenvalue(self):
        hermitian = 0.5 * (self.matrix + self.matrix.conj().T)
        blocks = self.blocks or [np.arange(self.signature.total)]
        return min(
            float(np.linalg.eigvalsh(hermitian[np.ix_(block, block)])[0]) for block in blocks
        )

    def check(self, trace_tol=1e-9, hermitian_tol=1e-9, positivity_tol=1e-7, positivity=True):
        """Raise NormalizationError unless the state is a valid density matrix."""
        drift = abs(self.trace() - 1.0)
        if drift > trace_tol:
            raise NormalizationError(f"Trace deviates from 1 by {drift:.3e}")
        asym = self.hermiticity_error()
        if asym > hermitian_tol:
            raise NormalizationError(f"State is not Hermitian (max deviation {asym:.3e})")
        if positivity:
            lowest = self.min_eigenvalue()
            if lowest < -positivity_tol:
                raise NormalizationError(f"State has negative eigenvalue {lowest:.3e}")
        return self

    def distance(self, other):
        """Trace distance to another state on the same signature."""
        diff = self.matrix - other.matrix
        diff = 0.5 * (diff + diff.conj().T)
        return 0.5 * float(np.abs(np.linalg.eigvalsh(diff)).sum())
