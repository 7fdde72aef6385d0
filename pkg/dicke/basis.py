"""
Dicke basis |J, M> for N two-level emitters.

J and M are stored doubled (``j2 = 2J``, ``m2 = 2M``) so half-integer
values never become floating-point keys. Blocks run from J = N/2 down to
0 or 1/2; inside a block M runs upward from -J.
"""
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from core.exceptions import BasisError, InvalidDimensionError


def dicke_dimension(N):
    """Number of (J, M) pairs for N emitters."""
    if N < 1:
        raise InvalidDimensionError(f"Emitter count N={N} must be >= 1")
    if N % 2 == 0:
        return (N // 2 + 1) ** 2
    return (N + 1) * (N + 3) // 4


def degeneracy(N, j2):
    """Multiplicity d(J, N) of the irreducible block with 2J = j2."""
    k = (N - j2) // 2
    return math.comb(N, k) - (math.comb(N, k - 1) if k >= 1 else 0)


@dataclass(frozen=True)
class DickeBasis:
    N: int
    states: tuple
    index: dict

    @classmethod
    @lru_cache(maxsize=64)
    def for_emitters(cls, N):
        dicke_dimension(N)
        states = []
        for j2 in range(N, -1, -2):
            for m2 in range(-j2, j2 + 1, 2):
                states.append((j2, m2))
        return cls(N, tuple(states), {state: i for i, state in enumerate(states)})

    @property
    def dimension(self):
        return len(self.states)

    @property
    def j2_values(self):
        return tuple(range(self.N, -1, -2))

    def blocks(self):
        """(j2, [m2...]) per block."""
        return [(j2, list(range(-j2, j2 + 1, 2))) for j2 in self.j2_values]

    def degeneracies(self):
        return {j2: degeneracy(self.N, j2) for j2 in self.j2_values}

    def block_ids(self):
        return np.array([j2 for j2, _ in self.states], dtype=np.int64)

    def excitations(self):
        return np.array([(m2 + self.N) // 2 for _, m2 in self.states], dtype=np.int64)

    def contains(self, j2, m2):
        return (j2, m2) in self.index

    def position(self, J, M):
        j2, m2 = doubled(J), doubled(M)
        if (j2, m2) not in self.index:
            raise BasisError(f"(J={J}, M={M}) is not a Dicke state for N={self.N}")
        return self.index[(j2, m2)]


def doubled(value):
    twice = 2 * value
    rounded = int(round(twice))
    if abs(twice - rounded) > 1e-9:
        raise BasisError(f"{value} is not an integer or half-integer")
    return rounded


# =============================================================================
# ANGULAR-MOMENTUM COEFFICIENTS
# =============================================================================

def clebsch_gordan(j2, m2_final, q, dj2):
    """
    <J, M-q; 1, q | J', M> for J' = J + dj2/2, closed form.

    ``m2_final`` is 2M of the final state. Returns 0 outside the allowed range.
    """
    j = j2 / 2.0
    M = m2_final / 2.0
    jp2 = j2 + dj2
    if jp2 < 0 or abs(m2_final) > jp2 or abs(m2_final - 2 * q) > j2:
        return 0.0
    if j2 == 0 and dj2 != 2:
        return 0.0

    if q == 1:
        if dj2 == 2:
            return math.sqrt((j + M) * (j + M + 1) / ((2 * j + 1) * (2 * j + 2)))
        if dj2 == 0:
            return -math.sqrt((j + M) * (j - M + 1) / (2 * j * (j + 1)))
        return math.sqrt((j - M) * (j - M + 1) / (2 * j * (2 * j + 1)))
    if q == 0:
        if dj2 == 2:
            return math.sqrt((j - M + 1) * (j + M + 1) / ((2 * j + 1) * (j + 1)))
        if dj2 == 0:
            return M / math.sqrt(j * (j + 1))
        return -math.sqrt((j - M) * (j + M) / (j * (2 * j + 1)))
    if q == -1:
        if dj2 == 2:
            return math.sqrt((j - M) * (j - M + 1) / ((2 * j + 1) * (2 * j + 2)))
        if dj2 == 0:
            return math.sqrt((j - M) * (j + M + 1) / (2 * j * (j + 1)))
        return math.sqrt((j + M + 1) * (j + M) / (2 * j * (2 * j + 1)))
    raise ValueError(f"q={q} must be -1, 0 or 1")


# channel -> (spherical component q, prefactor of the local jump map)
LOCAL_CHANNELS = {
    'emission': (-1, 2.0),
    'pump': (1, 2.0),
    'dephasing': (0, 4.0),
}
_PREFACTOR = {q: factor for q, factor in LOCAL_CHANNELS.values()}


def block_weight(N, j2, dj2):
    """Reduced weight of the local jump map from block J to J + dj2/2."""
    if dj2 == 2:
        return (N - j2) / 4.0
    if dj2 == 0:
        return (N + 2) / 4.0
    return (N + j2 + 2) / 4.0


def local_amplitude(N, j2, m2, q, dj2):
    """
    Matrix element of the block-changing operator A_{q,dJ}; the local map
    sum_i o_i rho o_i^dag equals sum_dJ A rho A^dag on degeneracy-weighted
    Dicke blocks.
    """
    prefactor = _PREFACTOR[q]
    coefficient = clebsch_gordan(j2, m2 + 2 * q, q, dj2)
    if coefficient == 0.0:
        return 0.0
    return math.sqrt(prefactor * block_weight(N, j2, dj2)) * coefficient


def collective_jump_rates(N, J, M, channel):
    """
    Transition coefficients from |J, M> to (J', M').

    Local channels ('emission', 'pump', 'dephasing') give the population
    transfer of sum_i o_i |J,M><J,M| o_i^dag per unit rate. 'cavity-coupling'
    gives the collective ladder elements of J+ and J- within the block.
    """
    basis = DickeBasis.for_emitters(N)
    j2, m2 = doubled(J), doubled(M)
    if not basis.contains(j2, m2):
        raise BasisError(f"(J={J}, M={M}) is not a Dicke state for N={N}")

    result = {}
    if channel == 'cavity-coupling':
        j = j2 / 2.0
        m = m2 / 2.0
        for step in (1, -1):
            if abs(m2 + 2 * step) <= j2:
                value = math.sqrt(j * (j + 1) - m * (m + step))
                result[(J, M + step)] = value
        return result

    if channel not in LOCAL_CHANNELS:
        raise BasisError(f"Unknown channel '{channel}'")
    q, _ = LOCAL_CHANNELS[channel]
    for dj2 in (2, 0, -2):
        amplitude = local_amplitude(N, j2, m2, q, dj2)
        if amplitude:
            result[((j2 + dj2) / 2.0, (m2 + 2 * q) / 2.0)] = amplitude ** 2
    return result
