"""
Index bookkeeping for vectorized density states.

A LiouvilleSpace is an ordered set of density-matrix elements (row, col)
evolved together. The full space uses column stacking: element (r, c)
sits at ``r + c * dim``. Sector spaces keep the subset with a fixed
excitation difference, in the same relative order.
"""
import numpy as np
from scipy import sparse


def _expand(indptr, keys):
    """Ragged gather: for each key, positions indptr[key]..indptr[key+1]."""
    starts = indptr[keys]
    counts = indptr[keys + 1] - starts
    owner = np.repeat(np.arange(len(keys)), counts)
    offsets = np.arange(owner.size) - np.repeat(np.cumsum(counts) - counts, counts)
    return owner, starts[owner] + offsets


class LiouvilleSpace:

    def __init__(self, dim, rows, cols, sector=None, blocks=None):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        keys = rows + cols * dim
        order = np.argsort(keys, kind='stable')
        self.dim = int(dim)
        self.rows = rows[order]
        self.cols = cols[order]
        self.keys = keys[order]
        self.sector = sector
        self.blocks = blocks

    def __repr__(self):
        return f"LiouvilleSpace(dim={self.dim}, size={self.size}, sector={self.sector})"

    @classmethod
    def full(cls, dim):
        flat = np.arange(dim * dim, dtype=np.int64)
        return cls(dim, flat % dim, flat // dim)

    @classmethod
    def sector_of(cls, charges, sector, block_ids=None, blocks=None):
        """Elements whose row and column charges differ by ``sector``."""
        charges = np.asarray(charges)
        dim = charges.size
        rows, cols = [], []
        # group kets by charge to avoid a dim**2 scan
        for charge in np.unique(charges):
            left = np.flatnonzero(charges == charge)
            right = np.flatnonzero(charges == charge - sector)
            if not left.size or not right.size:
                continue
            r = np.repeat(left, right.size)
            c = np.tile(right, left.size)
            if block_ids is not None:
                same = block_ids[r] == block_ids[c]
                r, c = r[same], c[same]
            rows.append(r)
            cols.append(c)
        rows = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
        cols = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
        return cls(dim, rows, cols, sector=sector, blocks=blocks)

    @property
    def size(self):
        return int(self.keys.size)

    @property
    def is_full(self):
        return self.size == self.dim * self.dim

    def locate(self, rows, cols):
        """Positions of (rows, cols) in this space, -1 where absent."""
        wanted = np.asarray(rows, dtype=np.int64) + np.asarray(cols, dtype=np.int64) * self.dim
        position = np.searchsorted(self.keys, wanted)
        position = np.minimum(position, max(self.size - 1, 0))
        found = self.size > 0
        hit = (self.keys[position] == wanted) if found else np.zeros(wanted.shape, dtype=bool)
        return np.where(hit, position, -1)

    def to_vector(self, matrix):
        if sparse.issparse(matrix):
            return np.asarray(matrix.tocsr()[self.rows, self.cols], dtype=np.complex128).ravel()
        return np.asarray(matrix, dtype=np.complex128)[self.rows, self.cols]

    def to_matrix(self, vector):
        matrix = np.zeros((self.dim, self.dim), dtype=np.complex128)
        matrix[self.rows, self.cols] = vector
        return matrix

    def trace_vector(self):
        return (self.rows == self.cols).astype(np.float64)

    def expectation_vector(self, op):
        """w such that w @ vec(rho) = Tr(op rho)."""
        matrix = op.matrix if hasattr(op, 'matrix') else sparse.csr_matrix(op)
        return np.asarray(matrix.tocsr()[self.cols, self.rows], dtype=np.complex128).ravel()

    def superoperator(self, left=None, right=None, scale=1.0):
        """
        Sparse matrix of rho -> scale * left @ rho @ right on this space.

        Images falling outside the space are dropped, so the space must be
        invariant under the map.
        """
        source = np.arange(self.size)
        target_rows = self.rows
        values = np.ones(self.size, dtype=np.complex128)

        if left is not None:
            left = (left.matrix if hasattr(left, 'matrix') else left).tocsc()
            owner, position = _expand(left.indptr, self.rows)
            source = source[owner]
            target_rows = left.indices[position]
            values = left.data[position]

        target_cols = self.cols[source]
        if right is not None:
            right = (right.matrix if hasattr(right, 'matrix') else right).tocsr()
            owner, position = _expand(right.indptr, target_cols)
            source = source[owner]
            target_rows = target_rows[owner]
            target_cols = right.indices[position]
            values = values[owner] * right.data[position]

        target = self.locate(target_rows, target_cols)
        keep = (target >= 0) & (values != 0)
        return sparse.csr_matrix(
            (scale * values[keep], (target[keep], source[keep])),
            shape=(self.size, self.size),
        )
