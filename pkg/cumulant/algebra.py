"""
Normal-ordered operator products used to derive the mean-field hierarchy.

A Monomial is ``a^dag^p a^q`` times emitter transitions ``s_t(a, b) = |a><b|``
on distinct representative emitters ``t``. Products are brought back to this
form with the bosonic reordering rule and the emitter contraction
``s(a, b) s(c, d) = delta_bc s(a, d)``. Expressions are plain dicts
``{Monomial: coefficient}`` with sympy coefficients.
"""
import enum
import math
from dataclasses import dataclass

import sympy


class SymbolKind(str, enum.Enum):
    CREATE = 'boson-create'
    ANNIHILATE = 'boson-annihilate'
    TRANSITION = 'emitter-transition'


@dataclass(frozen=True)
class OperatorSymbol:
    """A single factor: a^dag, a or s_tag(a, b)."""
    kind: SymbolKind
    levels: tuple = ()
    tag: int = 0

    def dag(self):
        if self.kind is SymbolKind.CREATE:
            return OperatorSymbol(SymbolKind.ANNIHILATE)
        if self.kind is SymbolKind.ANNIHILATE:
            return OperatorSymbol(SymbolKind.CREATE)
        return OperatorSymbol(self.kind, self.levels[::-1], self.tag)

    def as_monomial(self):
        if self.kind is SymbolKind.CREATE:
            return Monomial(1, 0)
        if self.kind is SymbolKind.ANNIHILATE:
            return Monomial(0, 1)
        return Monomial(0, 0, ((self.tag,) + tuple(self.levels),))

    def __str__(self):
        if self.kind is SymbolKind.CREATE:
            return 'adag'
        if self.kind is SymbolKind.ANNIHILATE:
            return 'a'
        return f's{self.tag}({self.levels[0]},{self.levels[1]})'


@dataclass(frozen=True, order=True)
class Monomial:
    creations: int = 0
    annihilations: int = 0
    # ((tag, a, b), ...) sorted by tag, one entry per tag
    transitions: tuple = ()

    @property
    def order(self):
        return self.creations + self.annihilations + len(self.transitions)

    @property
    def tags(self):
        return tuple(tag for tag, _, _ in self.transitions)

    def is_identity(self):
        return self.order == 0

    def symbols(self):
        """Factors in normal order."""
        out = [OperatorSymbol(SymbolKind.CREATE)] * self.creations
        out += [OperatorSymbol(SymbolKind.ANNIHILATE)] * self.annihilations
        out += [OperatorSymbol(SymbolKind.TRANSITION, (a, b), tag) for tag, a, b in self.transitions]
        return out

    def charge(self, excited):
        """Excitation number the monomial adds (a^dag and |e><g| count +1)."""
        total = self.creations - self.annihilations
        for _, a, b in self.transitions:
            total += int(a in excited) - int(b in excited)
        return total

    def sort_key(self):
        return (self.order, self.creations, self.annihilations, self.transitions)

    def __str__(self):
        if self.is_identity():
            return '1'
        return ' '.join(str(symbol) for symbol in self.symbols())


IDENTITY = Monomial()
A = Monomial(0, 1)
ADAG = Monomial(1, 0)
PHOTON_NUMBER = Monomial(1, 1)


def transition(tag, a, b):
    return Monomial(0, 0, ((tag, a, b),))


def with_cavity(monomial, creations=0, annihilations=0):
    """a^dag^creations (monomial) a^annihilations, already normal ordered."""
    return Monomial(
        monomial.creations + creations, monomial.annihilations + annihilations,
        monomial.transitions,
    )


# =============================================================================
# PRODUCTS
# =============================================================================

def _boson_product(p, q, r, s):
    """(a^dag^p a^q)(a^dag^r a^s) = sum_k C(q,k) C(r,k) k! a^dag^(p+r-k) a^(q+s-k)."""
    return [
        (math.comb(q, k) * math.comb(r, k) * math.factorial(k), p + r - k, q + s - k)
        for k in range(min(q, r) + 1)
    ]


def _emitter_product(left, right):
    """Contract transitions tag by tag; None when a delta vanishes."""
    merged = dict((tag, (a, b)) for tag, a, b in left)
    for tag, c, d in right:
        if tag in merged:
            a, b = merged[tag]
            if b != c:
                return None
            merged[tag] = (a, d)
        else:
            merged[tag] = (c, d)
    return tuple((tag, a, b) for tag, (a, b) in sorted(merged.items()))


def multiply(left, right):
    """Product of two monomials as {Monomial: integer coefficient}."""
    transitions = _emitter_product(left.transitions, right.transitions)
    if transitions is None:
        return {}
    return {
        Monomial(p, q, transitions): weight
        for weight, p, q in _boson_product(
            left.creations, left.annihilations, right.creations, right.annihilations
        )
    }


def dagger(monomial):
    return Monomial(
        monomial.annihilations, monomial.creations,
        tuple((tag, b, a) for tag, a, b in monomial.transitions),
    )


def accumulate(target, monomial, coefficient):
    target[monomial] = target.get(monomial, 0) + coefficient
    return target


def product(left, right):
    """Product of two expressions."""
    result = {}
    for m1, c1 in left.items():
        for m2, c2 in right.items():
            for monomial, weight in multiply(m1, m2).items():
                accumulate(result, monomial, weight * c1 * c2)
    return result


def combine(*terms):
    """Sum of (scale, expression) pairs."""
    result = {}
    for scale, expression in terms:
        for monomial, coefficient in expression.items():
            accumulate(result, monomial, scale * coefficient)
    return result


def simplify(expression):
    """Canonicalize monomials, expand coefficients and drop zeros."""
    result = {}
    for monomial, coefficient in expression.items():
        accumulate(result, canonical(monomial), coefficient)
    cleaned = {}
    for monomial, coefficient in result.items():
        coefficient = sympy.expand(coefficient)
        if coefficient != 0:
            cleaned[monomial] = coefficient
    return cleaned


# =============================================================================
# EXPECTATION VALUES
# =============================================================================

def canonical(monomial):
    """
    Representative form of an expectation value: emitters are identical,
    so tags are reassigned 1..k in order of their sorted level pairs.
    """
    pairs = sorted((a, b) for _, a, b in monomial.transitions)
    return Monomial(
        monomial.creations, monomial.annihilations,
        tuple((tag, a, b) for tag, (a, b) in enumerate(pairs, start=1)),
    )


def factors(monomial):
    """Single-factor monomials in normal order."""
    return [symbol.as_monomial() for symbol in monomial.symbols()]


def drop_factor(monomial, position):
    """The monomial with its ``position``-th normal-ordered factor removed."""
    kept = [symbol for i, symbol in enumerate(monomial.symbols()) if i != position]
    creations = sum(1 for s in kept if s.kind is SymbolKind.CREATE)
    annihilations = sum(1 for s in kept if s.kind is SymbolKind.ANNIHILATE)
    transitions = tuple(
        (s.tag,) + tuple(s.levels) for s in kept if s.kind is SymbolKind.TRANSITION
    )
    return Monomial(creations, annihilations, transitions)
