"""
Exact arithmetic: rational and rational-function base fields, dense univariate
polynomials, subresultant resultants, squarefree decomposition and towers of
algebraic extensions with dynamic-evaluation splitting.
"""

import logging
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import sympy
from sympy.polys.domains import QQ
from sympy.polys.fields import field as rational_function_field

from .config import DEFAULT_CONFIG
from .errors import DomainError, InvertibleWitness, NotSquarefreeError, ZeroDivisorFound

logger = logging.getLogger(__name__)

KINDS = ("number", "residue", "homogeneous")


def _ground_to_fraction(coefficient) -> Fraction:
    return Fraction(int(coefficient.numerator), int(coefficient.denominator))


def format_expr(expression) -> str:
    """sympy string with ^ for powers."""
    return str(expression).replace("**", "^")


class _Domain:
    """Shared helpers for the arithmetic domains."""

    def pow(self, a, k: int):
        if k < 0:
            return self.pow(self.inv(a), -k)
        result, base = self.one(), a
        while k:
            if k & 1:
                result = self.mul(result, base)
            k >>= 1
            if k:
                base = self.mul(base, base)
        return result

    def exquo(self, a, b):
        return self.mul(a, self.inv(b))

    def sum(self, values):
        total = self.zero()
        for value in values:
            total = self.add(total, value)
        return total

    def is_one(self, a) -> bool:
        return self.eq(a, self.one())


class RationalField(_Domain):
    """The field of rational numbers with Fraction elements."""

    depth = 0
    name = "QQ"

    def zero(self):
        return Fraction(0)

    def one(self):
        return Fraction(1)

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def mul(self, a, b):
        return a * b

    def neg(self, a):
        return -a

    def inv(self, a):
        if a == 0:
            raise DomainError("Division by zero in QQ")
        return 1 / Fraction(a)

    def is_zero(self, a) -> bool:
        return a == 0

    def eq(self, a, b) -> bool:
        return a == b

    def from_fraction(self, q):
        return Fraction(q)

    def from_expr(self, expression):
        expression = sympy.sympify(expression)
        if not expression.is_Rational:
            raise DomainError(f"{expression} is not a rational number")
        return Fraction(int(expression.p), int(expression.q))

    def to_expr(self, a):
        return sympy.Rational(a.numerator, a.denominator)

    def as_rational(self, a) -> Optional[Fraction]:
        return a

    def to_str(self, a) -> str:
        return str(a)


class FunctionField(_Domain):
    """
    The rational function field QQ(x1, ..., xn), backed by sympy's sparse fraction field.
    """

    depth = 0

    def __init__(self, variables: Sequence[str]):
        """
        Initialize the field.

        Args:
            variables: Variable names, e.g. ["x1", "x2"]
        """
        if not variables:
            raise ValueError("A function field needs at least one variable")
        self.variables = tuple(variables)
        created = rational_function_field(",".join(self.variables), QQ)
        self.K = created[0]
        self.gens = tuple(created[1:])
        self.symbols = tuple(sympy.Symbol(v) for v in self.variables)
        self.name = f"QQ({', '.join(self.variables)})"

    def zero(self):
        return self.K.zero

    def one(self):
        return self.K.one

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def mul(self, a, b):
        return a * b

    def neg(self, a):
        return -a

    def inv(self, a):
        if not a:
            raise DomainError("Division by zero in a rational function field")
        return self.K.one / a

    def is_zero(self, a) -> bool:
        return not a

    def eq(self, a, b) -> bool:
        return a == b

    def from_fraction(self, q):
        q = Fraction(q)
        return self.K.ground_new(QQ(q.numerator, q.denominator))

    def from_expr(self, expression):
        try:
            return self.K.from_expr(sympy.sympify(expression))
        except (ValueError, sympy.PolynomialError, sympy.CoercionFailed) as e:
            raise DomainError(f"Cannot read {expression} as a rational function in {', '.join(self.variables)}: {e}")

    def monomial(self, exponent: Sequence[int], coefficient=1):
        numer = {tuple(max(e, 0) for e in exponent): QQ(Fraction(coefficient).numerator, Fraction(coefficient).denominator)}
        denom = {tuple(max(-e, 0) for e in exponent): QQ(1)}
        return self.K.new(self.K.ring.from_dict(numer), self.K.ring.from_dict(denom))

    def to_expr(self, a):
        return a.as_expr()

    def as_rational(self, a) -> Optional[Fraction]:
        if a.numer.is_ground and a.denom.is_ground:
            if not a.numer:
                return Fraction(0)
            return _ground_to_fraction(a.numer.LC) / _ground_to_fraction(a.denom.LC)
        return None

    def to_str(self, a) -> str:
        return format_expr(a.as_expr())


class UniPoly:
    """
    Dense univariate polynomial, coefficients stored lowest degree first.
    """

    __slots__ = ("domain", "coeffs")

    def __init__(self, domain, coeffs: Sequence):
        coeffs = list(coeffs)
        while coeffs and domain.is_zero(coeffs[-1]):
            coeffs.pop()
        self.domain = domain
        self.coeffs = tuple(coeffs)

    @classmethod
    def constant(cls, domain, value) -> "UniPoly":
        return cls(domain, [value])

    @classmethod
    def variable(cls, domain) -> "UniPoly":
        return cls(domain, [domain.zero(), domain.one()])

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def lc(self):
        return self.coeffs[-1] if self.coeffs else self.domain.zero()

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    def coeff(self, k: int):
        return self.coeffs[k] if 0 <= k < len(self.coeffs) else self.domain.zero()

    def is_monic(self) -> bool:
        return bool(self.coeffs) and self.domain.is_one(self.lc)

    def __add__(self, other: "UniPoly") -> "UniPoly":
        D = self.domain
        size = max(len(self.coeffs), len(other.coeffs))
        return UniPoly(D, [D.add(self.coeff(k), other.coeff(k)) for k in range(size)])

    def __sub__(self, other: "UniPoly") -> "UniPoly":
        D = self.domain
        size = max(len(self.coeffs), len(other.coeffs))
        return UniPoly(D, [D.sub(self.coeff(k), other.coeff(k)) for k in range(size)])

    def __neg__(self) -> "UniPoly":
        return UniPoly(self.domain, [self.domain.neg(c) for c in self.coeffs])

    def __mul__(self, other: "UniPoly") -> "UniPoly":
        D = self.domain
        if self.is_zero or other.is_zero:
            return UniPoly(D, [])
        result = [D.zero()] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if D.is_zero(a):
                continue
            for j, b in enumerate(other.coeffs):
                result[i + j] = D.add(result[i + j], D.mul(a, b))
        return UniPoly(D, result)

    def __eq__(self, other) -> bool:
        if not isinstance(other, UniPoly) or len(self.coeffs) != len(other.coeffs):
            return False
        return all(self.domain.eq(a, b) for a, b in zip(self.coeffs, other.coeffs))

    def __hash__(self):
        return hash(len(self.coeffs))

    def __pow__(self, k: int) -> "UniPoly":
        result = UniPoly.constant(self.domain, self.domain.one())
        for _ in range(k):
            result = result * self
        return result

    def scale(self, c) -> "UniPoly":
        return UniPoly(self.domain, [self.domain.mul(a, c) for a in self.coeffs])

    def shift(self, k: int) -> "UniPoly":
        """Multiply by Z^k."""
        if self.is_zero:
            return self
        return UniPoly(self.domain, [self.domain.zero()] * k + list(self.coeffs))

    def map(self, fn: Callable, domain) -> "UniPoly":
        return UniPoly(domain, [fn(c) for c in self.coeffs])

    def divmod(self, other: "UniPoly") -> Tuple["UniPoly", "UniPoly"]:
        """Euclidean division; the divisor's leading coefficient must be invertible."""
        D = self.domain
        if other.is_zero:
            raise DomainError("Polynomial division by zero")
        inverse = D.inv(other.lc)
        remainder = list(self.coeffs)
        quotient = [D.zero()] * max(len(remainder) - len(other.coeffs) + 1, 0)
        for k in range(len(remainder) - len(other.coeffs), -1, -1):
            top = remainder[k + other.degree]
            if D.is_zero(top):
                continue
            factor = D.mul(top, inverse)
            quotient[k] = factor
            for j, b in enumerate(other.coeffs):
                remainder[k + j] = D.sub(remainder[k + j], D.mul(factor, b))
        return UniPoly(D, quotient), UniPoly(D, remainder[:other.degree] if other.degree > 0 else [])

    def __mod__(self, other: "UniPoly") -> "UniPoly":
        return self.divmod(other)[1]

    def __floordiv__(self, other: "UniPoly") -> "UniPoly":
        return self.divmod(other)[0]

    def exquo(self, other: "UniPoly") -> "UniPoly":
        quotient, remainder = self.divmod(other)
        if not remainder.is_zero:
            raise DomainError("Polynomial division is not exact")
        return quotient

    def exquo_scalar(self, c) -> "UniPoly":
        return UniPoly(self.domain, [self.domain.exquo(a, c) for a in self.coeffs])

    def prem(self, other: "UniPoly") -> "UniPoly":
        """Pseudo-remainder lc(other)^(deg self - deg other + 1) * self mod other."""
        D = self.domain
        d = other.degree
        exponent = self.degree - d + 1
        if exponent <= 0:
            return self
        remainder = self
        lc = other.lc
        while not remainder.is_zero and remainder.degree >= d:
            term = other.scale(remainder.lc).shift(remainder.degree - d)
            remainder = remainder.scale(lc) - term
            exponent -= 1
        return remainder.scale(D.pow(lc, exponent))

    def derivative(self) -> "UniPoly":
        D = self.domain
        return UniPoly(D, [D.mul(D.from_fraction(k), c) for k, c in enumerate(self.coeffs) if k > 0])

    def evaluate(self, x):
        """Horner evaluation at an element of the coefficient domain."""
        D = self.domain
        result = D.zero()
        for c in reversed(self.coeffs):
            result = D.add(D.mul(result, x), c)
        return result

    def compose(self, other: "UniPoly") -> "UniPoly":
        result = UniPoly(self.domain, [])
        for c in reversed(self.coeffs):
            result = result * other + UniPoly.constant(self.domain, c)
        return result

    def monic(self) -> "UniPoly":
        if self.is_zero:
            raise DomainError("The zero polynomial has no monic associate")
        if self.domain.is_one(self.lc):
            return self
        return self.scale(self.domain.inv(self.lc))

    def gcd(self, other: "UniPoly") -> "UniPoly":
        a, b = self, other
        while not b.is_zero:
            a, b = b, a % b
        return a.monic() if not a.is_zero else a

    def xgcd(self, other: "UniPoly") -> Tuple["UniPoly", "UniPoly", "UniPoly"]:
        """Return (g, s, t) with s*self + t*other = g and g monic."""
        D = self.domain
        zero, one = UniPoly(D, []), UniPoly.constant(D, D.one())
        r0, r1, s0, s1, t0, t1 = self, other, one, zero, zero, one
        while not r1.is_zero:
            quotient, remainder = r0.divmod(r1)
            r0, r1 = r1, remainder
            s0, s1 = s1, s0 - quotient * s1
            t0, t1 = t1, t0 - quotient * t1
        if r0.is_zero:
            return r0, s0, t0
        inverse = D.inv(r0.lc)
        return r0.scale(inverse), s0.scale(inverse), t0.scale(inverse)

    def to_str(self, var: str = "Z", printer: Optional[Callable] = None) -> str:
        """Human-readable form, highest degree first."""
        printer = printer or getattr(self.domain, "to_expr", None)
        parts = []
        for k in range(self.degree, -1, -1):
            c = self.coeffs[k]
            if self.domain.is_zero(c):
                continue
            expression = sympy.sympify(printer(c)) if printer else sympy.sympify(str(c))
            monomial = "" if k == 0 else (var if k == 1 else f"{var}^{k}")
            if k == 0:
                term = format_expr(expression)
            elif expression == 1:
                term = monomial
            elif expression == -1:
                term = "-" + monomial
            elif expression.is_Add:
                term = f"({format_expr(expression)})*{monomial}"
            else:
                term = f"{format_expr(expression)}*{monomial}"
            parts.append(term)
        if not parts:
            return "0"
        text = parts[0]
        for term in parts[1:]:
            text += f" - {term[1:]}" if term.startswith("-") else f" + {term}"
        return text

    def __repr__(self):
        return f"UniPoly({self.to_str()})"


class PolynomialRing(_Domain):
    """Univariate polynomials over a field, as a domain with exact division."""

    def __init__(self, field):
        self.field = field
        self.name = f"{getattr(field, 'name', 'F')}[Z]"

    def zero(self):
        return UniPoly(self.field, [])

    def one(self):
        return UniPoly.constant(self.field, self.field.one())

    def variable(self):
        return UniPoly.variable(self.field)

    def constant(self, c):
        return UniPoly.constant(self.field, c)

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def mul(self, a, b):
        return a * b

    def neg(self, a):
        return -a

    def inv(self, a):
        if a.degree != 0:
            raise DomainError("Only nonzero constants are units in a polynomial ring")
        return UniPoly.constant(self.field, self.field.inv(a.lc))

    def exquo(self, a, b):
        return a.exquo(b)

    def is_zero(self, a) -> bool:
        return a.is_zero

    def eq(self, a, b) -> bool:
        return a == b

    def from_fraction(self, q):
        return self.constant(self.field.from_fraction(q))

    def to_expr(self, a):
        z = sympy.Symbol("Z")
        to_expr = getattr(self.field, "to_expr")
        return sum((to_expr(c) * z ** k for k, c in enumerate(a.coeffs)), sympy.Integer(0))


def resultant(p: UniPoly, q: UniPoly):
    """
    Resultant of two polynomials over an integral domain (subresultant PRS).

    Res(p, q) = lc(p)^deg(q) * prod q(r) over the roots r of p, so Res(X - a, X - b) = a - b.
    """
    if p.is_zero or q.is_zero:
        raise DomainError("Resultant of the zero polynomial")
    D = p.domain
    if p.degree == 0:
        return D.pow(p.lc, q.degree)
    if q.degree == 0:
        return D.pow(q.lc, p.degree)

    A, B, s = p, q, 1
    if A.degree < B.degree:
        A, B = B, A
        if A.degree % 2 and B.degree % 2:
            s = -1
    g = h = D.one()
    while True:
        delta = A.degree - B.degree
        if A.degree % 2 and B.degree % 2:
            s = -s
        R = A.prem(B)
        A = B
        if R.is_zero:
            return D.zero()
        B = R.exquo_scalar(D.mul(g, D.pow(h, delta)))
        g = A.lc
        if delta == 1:
            h = g
        elif delta > 1:
            h = D.exquo(D.pow(g, delta), D.pow(h, delta - 1))
        if B.degree == 0:
            break
    result = D.exquo(D.pow(B.lc, A.degree), D.pow(h, A.degree - 1))
    return result if s > 0 else D.neg(result)


class FactorList(list):
    """A list of (factor, multiplicity) pairs; `normalized` tells whether the input was made monic."""

    def __init__(self, items=(), normalized: bool = False):
        super().__init__(items)
        self.normalized = normalized


def squarefree_decomposition(p: UniPoly) -> FactorList:
    """
    Yun's squarefree decomposition over a characteristic-zero field.

    Returns:
        FactorList of (factor, multiplicity) with monic, squarefree, pairwise coprime factors
    """
    normalized = not p.is_monic()
    if p.is_zero:
        raise DomainError("Squarefree decomposition of the zero polynomial")
    p = p.monic()
    result = FactorList(normalized=normalized)
    if p.degree == 0:
        return result

    derivative = p.derivative()
    a0 = p.gcd(derivative)
    b = p.exquo(a0)
    c = derivative.exquo(a0)
    d = c - b.derivative()
    multiplicity = 1
    while b.degree > 0:
        a = b.gcd(d)
        b = b.exquo(a)
        c = d.exquo(a)
        d = c - b.derivative()
        if a.degree > 0:
            result.append((a, multiplicity))
        multiplicity += 1
    return result


def squarefree_part(p: UniPoly) -> UniPoly:
    """Product of the distinct irreducible factors, made monic."""
    p = p.monic()
    g = p.gcd(p.derivative())
    return p.exquo(g) if g.degree > 0 else p


def factor_rational_univariate(p: UniPoly, degree_bound: int = DEFAULT_CONFIG.factor_degree_bound) -> List[UniPoly]:
    """
    Irreducible monic factors of a rational polynomial, repeated by multiplicity.

    Args:
        p: Polynomial over RationalField
        degree_bound: Largest supported degree

    Returns:
        Factors sorted by degree, then coefficients
    """
    if p.degree > degree_bound:
        raise DomainError(f"Rational factorization is limited to degree {degree_bound}, got {p.degree}")
    if p.degree < 1:
        return []
    z = sympy.Symbol("Z")
    expression = sum((sympy.Rational(c.numerator, c.denominator) * z ** k for k, c in enumerate(p.coeffs)), sympy.Integer(0))
    _, factors = sympy.Poly(expression, z, domain="QQ").factor_list()
    result = []
    for factor, multiplicity in factors:
        coefficients = [Fraction(int(c.p), int(c.q)) for c in reversed(factor.monic().all_coeffs())]
        result.extend([UniPoly(p.domain, coefficients)] * multiplicity)
    result.sort(key=lambda f: (f.degree, f.coeffs))
    return result


class ExtensionField(_Domain):
    """
    One tower level: the quotient of polynomials over the level below by a monic modulus.
    Elements are tuples of length deg(modulus).
    """

    def __init__(self, below, name: str, modulus: UniPoly, kind: str = "number",
                 grade=None, counted: bool = False, pinned: bool = False):
        """
        Initialize a tower level.

        Args:
            below: Domain of the level below
            name: Generator name
            modulus: Monic polynomial over `below`
            kind: "number", "residue" or "homogeneous"
            grade: Valuation degree of the generator (homogeneous levels)
            counted: Whether the level enumerates several conjugate roots
            pinned: Whether only one root of the modulus is meant
        """
        if kind not in KINDS:
            raise ValueError(f"Unknown level kind: {kind}")
        if modulus.degree < 1 or not modulus.is_monic():
            raise DomainError(f"Modulus of {name} must be monic of positive degree")
        self.below = below
        self.name = name
        self.modulus = modulus
        self.kind = kind
        self.grade = grade
        self.counted = counted
        self.pinned = pinned
        self.degree = modulus.degree
        self.depth = below.depth + 1

    def zero(self):
        return tuple([self.below.zero()] * self.degree)

    def one(self):
        return self.from_below(self.below.one())

    def from_below(self, value):
        return tuple([value] + [self.below.zero()] * (self.degree - 1))

    def generator(self):
        if self.degree == 1:
            return (self.below.neg(self.modulus.coeffs[0]),)
        return tuple([self.below.zero(), self.below.one()] + [self.below.zero()] * (self.degree - 2))

    def to_poly(self, a) -> UniPoly:
        return UniPoly(self.below, a)

    def from_poly(self, p: UniPoly):
        if p.degree >= self.degree:
            p = p % self.modulus
        return tuple(p.coeff(k) for k in range(self.degree))

    def add(self, a, b):
        return tuple(self.below.add(x, y) for x, y in zip(a, b))

    def sub(self, a, b):
        return tuple(self.below.sub(x, y) for x, y in zip(a, b))

    def neg(self, a):
        return tuple(self.below.neg(x) for x in a)

    def mul(self, a, b):
        B = self.below
        q = self.degree
        product = [B.zero()] * (2 * q - 1)
        for i, x in enumerate(a):
            if B.is_zero(x):
                continue
            for j, y in enumerate(b):
                if not B.is_zero(y):
                    product[i + j] = B.add(product[i + j], B.mul(x, y))
        m = self.modulus.coeffs
        for k in range(2 * q - 2, q - 1, -1):
            top = product[k]
            if B.is_zero(top):
                continue
            for j in range(q):
                product[k - q + j] = B.sub(product[k - q + j], B.mul(top, m[j]))
        return tuple(product[:q])

    def inv(self, a):
        if self.is_zero(a):
            raise DomainError(f"Division by zero at level {self.name}")
        g, s, _ = self.to_poly(a).xgcd(self.modulus)
        if g.degree > 0:
            raise ZeroDivisorFound(self, g)
        return self.from_poly(s)

    def is_zero(self, a) -> bool:
        return all(self.below.is_zero(x) for x in a)

    def eq(self, a, b) -> bool:
        return all(self.below.eq(x, y) for x, y in zip(a, b))

    def from_fraction(self, q):
        return self.from_below(self.below.from_fraction(q))

    def as_below(self, a):
        """The element of the level below if a has no generator terms, else None."""
        if all(self.below.is_zero(x) for x in a[1:]):
            return a[0]
        return None

    def as_rational(self, a) -> Optional[Fraction]:
        value = self.as_below(a)
        return None if value is None else self.below.as_rational(value)


class TowerField(_Domain):
    """
    A base field followed by a triangular sequence of extension levels.
    Elements are elements of the top level.
    """

    def __init__(self, base, levels: Sequence[ExtensionField] = ()):
        self.base = base
        self.levels = tuple(levels)

    @property
    def top(self):
        return self.levels[-1] if self.levels else self.base

    @property
    def depth(self) -> int:
        return len(self.levels)

    @property
    def name(self) -> str:
        if not self.levels:
            return self.base.name
        return f"{self.base.name}[{', '.join(level.name for level in self.levels)}]"

    def zero(self):
        return self.top.zero()

    def one(self):
        return self.top.one()

    def add(self, a, b):
        return self.top.add(a, b)

    def sub(self, a, b):
        return self.top.sub(a, b)

    def mul(self, a, b):
        return self.top.mul(a, b)

    def neg(self, a):
        return self.top.neg(a)

    def inv(self, a):
        return self.top.inv(a)

    def is_zero(self, a) -> bool:
        return self.top.is_zero(a)

    def eq(self, a, b) -> bool:
        return self.top.eq(a, b)

    def prefix(self, depth: int) -> "TowerField":
        return TowerField(self.base, self.levels[:depth])

    def level_index(self, name: str) -> int:
        for index, level in enumerate(self.levels):
            if level.name == name:
                return index
        raise DomainError(f"No tower level named {name}")

    def lift(self, value, depth: int = 0):
        """Embed an element of level `depth` (0 = base) into the top level."""
        for level in self.levels[depth:]:
            value = level.from_below(value)
        return value

    def from_base(self, value):
        return self.lift(value, 0)

    def from_fraction(self, q):
        return self.from_base(self.base.from_fraction(q))

    def from_rational_function(self, expression):
        return self.from_base(self.base.from_expr(expression))

    def generator(self, name: str):
        index = self.level_index(name)
        return self.lift(self.levels[index].generator(), index + 1)

    def project(self, value, depth: int = 0):
        """The element of level `depth` equal to value, or None if value involves higher generators."""
        for level in reversed(self.levels[depth:]):
            value = level.as_below(value)
            if value is None:
                return None
        return value

    def as_base(self, value):
        return self.project(value, 0)

    def as_rational(self, value) -> Optional[Fraction]:
        base_value = self.as_base(value)
        return None if base_value is None else self.base.as_rational(base_value)

    def adjoin_root(self, name: str, modulus: UniPoly, kind: str = "number", grade=None,
                    counted: bool = False, pinned: bool = False) -> "TowerField":
        """
        Extend the tower by a root of a monic squarefree modulus over the top level.

        Raises:
            NotSquarefreeError: if the modulus has a repeated factor
        """
        if any(level.name == name for level in self.levels):
            raise DomainError(f"Generator name {name} already used")
        if not modulus.is_monic():
            raise DomainError(f"Modulus for {name} must be monic")
        repeated = modulus.gcd(modulus.derivative())
        if repeated.degree > 0:
            raise NotSquarefreeError(f"Modulus for {name} is not squarefree", factor=repeated)
        level = ExtensionField(self.top, name, modulus, kind, grade, counted, pinned)
        logger.debug("Adjoined %s of degree %d (%s)", name, modulus.degree, kind)
        return TowerField(self.base, self.levels + (level,))

    def transport(self, value, source: "TowerField", images: Optional[Dict[int, object]] = None):
        """
        Evaluate an element of `source` in this tower, sending each source generator
        to the given image (default: the generator of the same name).
        """
        if source is self:
            return value
        depth = len(source.levels)
        if images is None and self.levels[:depth] == source.levels:
            return self.lift(value, depth)
        images = dict(images or {})
        for index, level in enumerate(source.levels):
            if index not in images:
                images[index] = self.generator(level.name)
        return self._evaluate(value, source, depth, images)

    def _evaluate(self, value, source: "TowerField", depth: int, images: Dict[int, object]):
        if depth == 0:
            return self.from_base(value)
        generator = images[depth - 1]
        result = self.zero()
        for coefficient in reversed(value):
            result = self.add(self.mul(result, generator), self._evaluate(coefficient, source, depth - 1, images))
        return result

    def convert(self, value, source: "TowerField"):
        return self.transport(value, source)

    def split(self, index: int, factor: UniPoly) -> Tuple["TowerField", "TowerField"]:
        """
        Replace the modulus of one level by a factor and by its cofactor.

        Returns:
            Two towers; levels above `index` are rebuilt over each branch
        """
        level = self.levels[index]
        factor = factor.monic()
        cofactor = level.modulus.exquo(factor).monic()
        branches = []
        for piece in (factor, cofactor):
            rebuilt = TowerField(self.base, self.levels[:index])
            rebuilt = TowerField(self.base, rebuilt.levels + (
                ExtensionField(rebuilt.top, level.name, piece, level.kind, level.grade, level.counted, level.pinned),))
            for upper in self.levels[index + 1:]:
                old_prefix = self.prefix(self.levels.index(upper))
                modulus = UniPoly(rebuilt.top, [rebuilt.convert(c, old_prefix) for c in upper.modulus.coeffs])
                rebuilt = TowerField(self.base, rebuilt.levels + (
                    ExtensionField(rebuilt.top, upper.name, modulus, upper.kind, upper.grade, upper.counted, upper.pinned),))
            branches.append(rebuilt)
        logger.debug("Split level %s into degrees %d and %d", level.name, factor.degree, cofactor.degree)
        return branches[0], branches[1]

    def describe(self) -> List[str]:
        """One line per level: 'g1 := root(Z^2 - x1*x2, branch 0)'."""
        lines = []
        for index, level in enumerate(self.levels):
            prefix = self.prefix(index)
            lines.append(f"{level.name} := root({level.modulus.to_str('Z', prefix.to_expr)}, branch 0)")
        return lines

    def to_expr(self, value, depth: Optional[int] = None):
        depth = len(self.levels) if depth is None else depth
        if depth == 0:
            return self.base.to_expr(value)
        symbol = sympy.Symbol(self.levels[depth - 1].name)
        return sum((self.to_expr(c, depth - 1) * symbol ** k for k, c in enumerate(value)), sympy.Integer(0))

    def to_str(self, value) -> str:
        return format_expr(self.to_expr(value))

    def from_expr(self, expression, depth: Optional[int] = None):
        """Read a sympy expression in the base variables and generator names."""
        depth = len(self.levels) if depth is None else depth
        expression = sympy.sympify(expression)
        if depth == 0:
            return self.base.from_expr(expression)
        level = self.levels[depth - 1]
        symbol = sympy.Symbol(level.name)
        below = self.prefix(depth - 1)
        if symbol not in expression.free_symbols:
            return level.from_below(below.from_expr(expression, depth - 1))
        try:
            poly = sympy.Poly(sympy.expand(expression), symbol)
        except sympy.PolynomialError as e:
            raise DomainError(f"{expression} is not polynomial in {level.name}: {e}")
        coefficients = [below.from_expr(c, depth - 1) for c in reversed(poly.all_coeffs())]
        return level.from_poly(UniPoly(level.below, coefficients))

    def flatten(self, value, depth: int = 0) -> List:
        """Coordinates of value over level `depth` in the power-product basis."""
        if len(self.levels) == depth:
            return [value]
        below = self.prefix(len(self.levels) - 1)
        result = []
        for coefficient in value:
            result.extend(below.flatten(coefficient, depth))
        return result

    def dimension_over(self, depth: int = 0) -> int:
        size = 1
        for level in self.levels[depth:]:
            size *= level.degree
        return size

    def counted_degree(self) -> int:
        size = 1
        for level in self.levels:
            if level.counted:
                size *= level.degree
        return size


def crt_merge(tower: TowerField, first: Tuple[TowerField, object], second: Tuple[TowerField, object]):
    """
    Recombine the images of an element in the two branches of a top-level split.
    """
    (left, a), (right, b) = first, second
    level = tower.levels[-1]
    g1, g2 = left.levels[-1].modulus, right.levels[-1].modulus
    one, s, t = g1.xgcd(g2)
    if one.degree != 0:
        raise DomainError("Branches of a split must have coprime moduli")
    pa, pb = UniPoly(level.below, a), UniPoly(level.below, b)
    merged = pa * t * g2 + pb * s * g1
    return level.from_poly(merged % level.modulus)


def zero_divisor_split(tower: TowerField, witness) -> Tuple[TowerField, TowerField]:
    """
    Split a tower along a zero divisor.

    Returns:
        (tower where the witness vanishes, tower where it is invertible)

    Raises:
        InvertibleWitness: if the witness is a unit, carrying its inverse
    """
    try:
        inverse = tower.inv(witness)
    except ZeroDivisorFound as found:
        index = next(i for i, level in enumerate(tower.levels) if level is found.level)
        return tower.split(index, found.factor)
    raise InvertibleWitness("Witness is invertible; no split", inverse=inverse)
