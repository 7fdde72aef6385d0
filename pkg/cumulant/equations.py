"""
Equations of motion for first- and second-order expectation values.

The exact hierarchy is derived mechanically from the model, i.e.
d<O>/dt = <i[H, O]> + sum_k rate_k <L^dag O L - 1/2 {L^dag L, O}>, with all
emitters identical: only representative emitters appear, and sums over
emitters outside an operator's support contribute with multiplicity
N - (number of tags). Third-order moments are then closed with the
second-order cumulant expansion.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np
import sympy
from scipy import sparse

from core.exceptions import ConfigError
from emitters.schemes import (
    DECAY_CHANNELS, DEPHASING_CHANNELS, OPTICAL_LINES, RATE_FIELDS, Scheme,
)

from .algebra import (
    A, ADAG, PHOTON_NUMBER, Monomial, accumulate, canonical, combine, dagger,
    drop_factor, factors, product, simplify, transition, with_cavity,
)

logger = logging.getLogger(__name__)

N = sympy.Symbol('N', positive=True)
G = sympy.Symbol('g', real=True)
KAPPA = sympy.Symbol('kappa', positive=True)
OMEGA_C = sympy.Symbol('omega_c', real=True)
SYMBOLS = {
    'N': N, 'g': G, 'kappa': KAPPA, 'omega_c': OMEGA_C,
    'omega_e1g1': sympy.Symbol('omega_e1g1', real=True),
    'omega_e2g2': sympy.Symbol('omega_e2g2', real=True),
    **{name: sympy.Symbol(name, nonnegative=True) for name in RATE_FIELDS},
}
HALF = sympy.Rational(1, 2)


# =============================================================================
# MODEL TERMS
# =============================================================================

def _site_hamiltonian(scheme, tag):
    """Detuning and cavity coupling of one emitter."""
    terms = {}
    for excited, ground, field in OPTICAL_LINES:
        if not scheme.has(excited):
            continue
        accumulate(terms, transition(tag, excited, excited), SYMBOLS[field])
        accumulate(terms, with_cavity(transition(tag, excited, ground), annihilations=1), G)
        accumulate(terms, with_cavity(transition(tag, ground, excited), creations=1), G)
    return terms


def _site_jumps(scheme, tag):
    """(rate, jump expression) for the individual channels of one emitter."""
    jumps = []
    for name, (source, target) in DECAY_CHANNELS.items():
        if scheme.has(source) and scheme.has(target):
            jumps.append((SYMBOLS[name], {transition(tag, target, source): 1}))
    for name, (excited, ground) in DEPHASING_CHANNELS.items():
        if scheme.has(excited):
            jumps.append((
                HALF * SYMBOLS[name],
                {transition(tag, excited, excited): 1, transition(tag, ground, ground): -1},
            ))
    return jumps


def _heisenberg(hamiltonian, observable):
    """i[H, O]."""
    return combine(
        (sympy.I, product(hamiltonian, observable)),
        (-sympy.I, product(observable, hamiltonian)),
    )


def _lindblad_adjoint(jump, observable):
    """L^dag O L - 1/2 {L^dag L, O}."""
    jump_dag = {dagger(m): sympy.conjugate(c) for m, c in jump.items()}
    occupation = product(jump_dag, jump)
    return combine(
        (1, product(product(jump_dag, observable), jump)),
        (-HALF, product(occupation, observable)),
        (-HALF, product(observable, occupation)),
    )


def drift(scheme, monomial):
    """Exact right-hand side of d<monomial>/dt as {Monomial: coefficient}."""
    observable = {monomial: 1}
    tags = monomial.tags
    parts = [
        (1, _heisenberg({PHOTON_NUMBER: OMEGA_C}, observable)),
        (KAPPA, _lindblad_adjoint({A: 1}, observable)),
    ]
    for tag in tags:
        parts.append((1, _heisenberg(_site_hamiltonian(scheme, tag), observable)))
        for rate, jump in _site_jumps(scheme, tag):
            parts.append((rate, _lindblad_adjoint(jump, observable)))
    if monomial.creations or monomial.annihilations:
        fresh = max(tags, default=0) + 1
        parts.append((N - len(tags), _heisenberg(_site_hamiltonian(scheme, fresh), observable)))
    return simplify(combine(*parts))


# =============================================================================
# HIERARCHY
# =============================================================================

def moment_variables(scheme):
    """All canonical first- and second-order moments of the scheme, sorted."""
    levels = scheme.levels
    pairs = [(a, b) for a in levels for b in levels]
    first = [A, ADAG] + [transition(1, a, b) for a, b in pairs]
    second = [PHOTON_NUMBER, Monomial(0, 2), Monomial(2, 0)]
    for a, b in pairs:
        second.append(with_cavity(transition(1, a, b), annihilations=1))
        second.append(with_cavity(transition(1, a, b), creations=1))
    for left, right in combinations_with_replacement(pairs, 2):
        second.append(Monomial(0, 0, ((1,) + left, (2,) + right)))
    return tuple(sorted({canonical(m) for m in first + second}, key=Monomial.sort_key))


@dataclass(frozen=True)
class Hierarchy:
    """Unclosed equations: variable -> {Monomial: sympy coefficient}."""
    scheme: Scheme
    variables: tuple
    equations: dict

    def rhs(self, monomial):
        return self.equations[canonical(monomial)]

    def open_moments(self):
        """Third-order moments that appear on some right-hand side."""
        found = set()
        for expression in self.equations.values():
            found.update(m for m in expression if m.order > 2)
        return sorted(found, key=Monomial.sort_key)


@lru_cache(maxsize=None)
def _derive(scheme):
    variables = moment_variables(scheme)
    equations = {variable: drift(scheme, variable) for variable in variables}
    logger.info(f"Derived {len(variables)} moment equations for the {scheme.value} scheme")
    return Hierarchy(scheme, variables, equations)


def derive_eom(spec):
    """Exact moment equations up to second order for ``spec``'s scheme."""
    scheme = spec.scheme if hasattr(spec, 'scheme') else Scheme(spec)
    return _derive(scheme)


def cumulant_close(monomial):
    """
    <f1 f2 f3> ~ <f1><f2 f3> + <f2><f1 f3> + <f3><f1 f2> - 2<f1><f2><f3>.

    Returns {tuple of canonical monomials: integer weight}; each key is a
    product of expectation values.
    """
    if monomial.order != 3:
        raise ValueError(f"Closure applies to third-order moments, not '{monomial}'")
    singles = factors(monomial)
    closed = {}
    for i, single in enumerate(singles):
        key = tuple(sorted(
            (canonical(single), canonical(drop_factor(monomial, i))), key=Monomial.sort_key
        ))
        closed[key] = closed.get(key, 0) + 1
    key = tuple(sorted((canonical(s) for s in singles), key=Monomial.sort_key))
    closed[key] = closed.get(key, 0) - 2
    return {k: v for k, v in closed.items() if v}


# =============================================================================
# CLOSED SYSTEM
# =============================================================================

@dataclass(frozen=True)
class _ClosedEquations:
    variables: tuple
    index: dict
    # per variable: [(sympy coefficient, (variable indices...)), ...]; () is the constant
    rows: tuple
    parameters: tuple
    evaluate: object


@lru_cache(maxsize=None)
def _closed(scheme):
    hierarchy = _derive(scheme)
    variables = hierarchy.variables
    index = {m: i for i, m in enumerate(variables)}
    rows = []
    for variable in variables:
        terms = {}
        for monomial, coefficient in hierarchy.equations[variable].items():
            if monomial.is_identity():
                keys = {(): 1}
            elif monomial.order <= 2:
                keys = {(index[monomial],): 1}
            elif monomial.order == 3:
                keys = {
                    tuple(sorted(index[m] for m in product_key)): weight
                    for product_key, weight in cumulant_close(monomial).items()
                }
            else:
                raise ValueError(f"Moment '{monomial}' of order {monomial.order} survived derivation")
            for key, weight in keys.items():
                terms[key] = terms.get(key, 0) + weight * coefficient
        rows.append(tuple(
            (coefficient, key) for key, coefficient in
            ((k, sympy.expand(c)) for k, c in sorted(terms.items()))
            if coefficient != 0
        ))
    parameters = tuple(SYMBOLS.values())
    coefficients = [coefficient for row in rows for coefficient, _ in row]
    evaluate = sympy.lambdify(parameters, coefficients, modules='numpy')
    return _ClosedEquations(variables, index, tuple(rows), parameters, evaluate)


def _parameter_values(spec):
    values = {
        'N': spec.N, 'g': spec.g, 'kappa': spec.kappa, 'omega_c': spec.omega_c,
        'omega_e1g1': spec.omega_e1g1 or 0.0, 'omega_e2g2': spec.omega_e2g2 or 0.0,
    }
    values.update({name: getattr(spec, name) for name in RATE_FIELDS})
    return [values[name] for name in SYMBOLS]


class MeanFieldSystem:
    """
    Closed ODE system over first- and second-order moments of one spec.

    The right-hand side is c + L y + sum Q y_j y_k + sum C y_j y_k y_l,
    evaluated with precomputed index arrays; the Jacobian is analytic.
    """

    def __init__(self, spec):
        if any(spec.emitter_detunings):
            raise ConfigError("Per-emitter detunings need distinguishable emitters; use the exact backend")
        self.spec = spec
        self.N = spec.N
        closed = _closed(spec.scheme)
        self.variables = closed.variables
        self.index = closed.index
        self._rows = closed.rows
        self.size = len(self.variables)
        values = np.asarray(closed.evaluate(*_parameter_values(spec)), dtype=np.complex128)
        self._compile(values)
        self.conjugate_index = np.array(
            [self.index[canonical(dagger(v))] for v in self.variables], dtype=np.int64
        )
        logger.debug(f"Mean-field system for N={spec.N}: {self.size} variables")

    def __repr__(self):
        return f"MeanFieldSystem(scheme={self.spec.scheme.value}, N={self.N}, size={self.size})"

    def _compile(self, values):
        size = self.size
        buckets = {0: [], 1: [], 2: [], 3: []}
        self._term_values = []
        position = 0
        for row, terms in enumerate(self._rows):
            numeric = []
            for _, key in terms:
                buckets[len(key)].append((row, key, values[position]))
                numeric.append((values[position], key))
                position += 1
            self._term_values.append(numeric)

        self.constant = np.zeros(size, dtype=np.complex128)
        for row, _, value in buckets[0]:
            self.constant[row] += value

        linear = buckets[1]
        self.linear = sparse.csr_matrix(
            ([v for _, _, v in linear], ([r for r, _, _ in linear], [k[0] for _, k, _ in linear])),
            shape=(size, size), dtype=np.complex128,
        )

        self._products = []
        for degree in (2, 3):
            entries = buckets[degree]
            if not entries:
                continue
            rows = np.array([r for r, _, _ in entries], dtype=np.int64)
            keys = np.array([k for _, k, _ in entries], dtype=np.int64)
            coefficients = np.array([v for _, _, v in entries], dtype=np.complex128)
            scatter = sparse.csr_matrix(
                (np.ones(rows.size), (rows, np.arange(rows.size))), shape=(size, rows.size)
            )
            self._products.append((rows, keys, coefficients, scatter))

    # -------------------------------------------------------------------------

    def term_values(self):
        """Per variable: [(numeric coefficient, variable indices), ...]."""
        return self._term_values

    def rhs(self, y):
        out = self.constant + self.linear @ y
        for _, keys, coefficients, scatter in self._products:
            out = out + scatter @ (coefficients * np.prod(y[keys], axis=1))
        return out

    def jacobian(self, y):
        rows_all, cols_all, data_all = [], [], []
        for rows, keys, coefficients, _ in self._products:
            gathered = y[keys]
            for slot in range(keys.shape[1]):
                others = np.delete(gathered, slot, axis=1)
                rows_all.append(rows)
                cols_all.append(keys[:, slot])
                data_all.append(coefficients * np.prod(others, axis=1))
        if not rows_all:
            return self.linear
        nonlinear = sparse.csr_matrix(
            (np.concatenate(data_all), (np.concatenate(rows_all), np.concatenate(cols_all))),
            shape=(self.size, self.size),
        )
        return (self.linear + nonlinear).tocsr()

    def residual(self, y):
        """max|dy/dt| relative to the model's fastest rate and the largest moment."""
        scale = self.spec.rate_scale * max(float(np.abs(y).max()), 1e-300)
        return float(np.abs(self.rhs(y)).max()) / scale

    # -------------------------------------------------------------------------

    def value(self, y, monomial):
        if monomial.is_identity():
            return 1.0 + 0.0j
        return complex(y[self.index[canonical(monomial)]])

    def product_state(self, populations=None):
        """
        Uncorrelated emitters with the given level populations (default all
        in g1) and an empty cavity; coherences start at zero.
        """
        populations = dict(populations or {'g1': 1.0})
        levels = self.spec.scheme.levels
        unknown = sorted(set(populations) - set(levels))
        if unknown:
            raise ConfigError(f"Levels {unknown} are not part of the {self.spec.scheme.value} scheme")
        total = sum(populations.values())
        if abs(total - 1.0) > 1e-12 or any(not 0.0 <= p <= 1.0 for p in populations.values()):
            raise ConfigError(f"Initial populations must lie in [0, 1] and sum to 1 (sum {total})")

        def single(monomial):
            if monomial.transitions:
                _, a, b = monomial.transitions[0]
                return populations.get(a, 0.0) if a == b else 0.0
            return 0.0

        y = np.empty(self.size, dtype=np.complex128)
        for i, variable in enumerate(self.variables):
            y[i] = np.prod([single(f) for f in factors(variable)])
        return y

    def listing(self):
        """Plain-text audit listing of the closed equations (symbolic coefficients)."""
        names = [f"<{v}>" for v in self.variables]
        lines = [
            f"# scheme: {self.spec.scheme.value}",
            f"# variables: {self.size}",
            "# products of expectation values come from the second-order cumulant closure",
        ]
        for variable, terms in zip(names, self._rows):
            parts = []
            for coefficient, key in terms:
                factor = ''.join(names[i] for i in key) or '1'
                parts.append(f"({sympy.sstr(coefficient)})*{factor}")
            lines.append(f"d{variable}/dt = " + (' + '.join(parts) if parts else '0'))
        return '\n'.join(lines) + '\n'


def build_meanfield(spec):
    return MeanFieldSystem(spec)
