"""
Homogeneous elements with respect to a monomial valuation: validation, monomial
normal forms, resultant-built annihilators for powers, sums and products,
integral normalization and tower compression.
"""

import logging
from fractions import Fraction
from math import gcd
from typing import Dict, List, Optional, Sequence, Tuple

import sympy

from .config import DEFAULT_CONFIG, SolverConfig
from .errors import CertificateError, DomainError, ZeroDivisorFound
from .graded_series import ExponentVector, SeriesRing
from .tower_arithmetic import (
    ExtensionField,
    PolynomialRing,
    RationalField,
    TowerField,
    UniPoly,
    factor_rational_univariate,
    format_expr,
    resultant,
    squarefree_part,
)
from .weights import GradeValue, kernel_relations, to_fraction

logger = logging.getLogger(__name__)


class HomogeneousElement:
    """
    A root of Z^q + g_1 Z^(q-1) + ... + g_q where g_k is homogeneous of degree k*d.
    """

    def __init__(self, name: str, degree: GradeValue, polynomial: UniPoly, ring: SeriesRing,
                 integral: bool, minimality_certified: bool = False):
        self.name = name
        self.degree = degree
        self.polynomial = polynomial
        self.ring = ring
        self.integral = integral
        self.minimality_certified = minimality_certified

    @property
    def q(self) -> int:
        return self.polynomial.degree

    def coefficient(self, k: int):
        """g_k, the coefficient of Z^(q-k)."""
        return self.polynomial.coeff(self.q - k)

    def polynomial_str(self) -> str:
        return self.polynomial.to_str("Z", self.ring.tower.to_expr)

    def describe(self) -> str:
        return f"{self.name} := root({self.polynomial_str()}, branch 0)"

    def adjoin(self, tower: Optional[TowerField] = None, depth: Optional[int] = None) -> TowerField:
        """Extend a tower (default: the element's own) by this element."""
        tower = tower or self.ring.tower
        depth = len(self.ring.tower.levels) if depth is None else depth
        modulus = UniPoly(tower.top, [tower.lift(c, depth) for c in self.polynomial.coeffs])
        level = ExtensionField(tower.top, self.name, modulus, "homogeneous", self.degree, pinned=True)
        return TowerField(tower.base, tower.levels + (level,))

    def to_dict(self) -> Dict:
        return {
            "gen": self.name,
            "minpoly": self.polynomial_str(),
            "degree": self.degree.to_json(),
            "integral": self.integral,
            "minimality_certified": self.minimality_certified,
        }

    def __repr__(self):
        return f"HomogeneousElement({self.describe()})"


def validate(polynomial, degree: Optional[GradeValue], ring: SeriesRing, name: str = "g",
             minimality_certified: bool = False) -> HomogeneousElement:
    """
    Check (nu, d)-homogeneity of a monic polynomial and build the element.

    Args:
        polynomial: Monic UniPoly over the ring's tower, or its coefficients low to high
        degree: d, or None to infer it from the first nonzero coefficient
        ring: Series ring supplying weights and tower

    Returns:
        HomogeneousElement with the integral flag set
    """
    if not isinstance(polynomial, UniPoly):
        polynomial = UniPoly(ring.tower.top, polynomial)
    if not polynomial.is_monic():
        raise DomainError("Annihilating polynomial must be monic")
    q = polynomial.degree
    if q < 1:
        raise DomainError("Annihilating polynomial must have positive degree")

    integral = True
    for k in range(1, q + 1):
        g = polynomial.coeff(q - k)
        if ring.tower.is_zero(g):
            continue
        parts = ring.split_value(g)
        if len(parts) > 1:
            found = sorted(parts)
            raise DomainError(f"Coefficient g_{k} mixes degrees {found[0]} and {found[1]}")
        found = next(iter(parts))
        if degree is None:
            degree = found / k
        elif found != degree * k:
            raise DomainError(f"Coefficient g_{k} has degree {found}, expected {degree * k}")
        if not ring.is_polynomial(g):
            integral = False
    if degree is None:
        raise DomainError("Z^q defines the zero element, not a homogeneous element")
    return HomogeneousElement(name, degree, polynomial, ring, integral, minimality_certified)


def from_expr(expression, ring: SeriesRing, name: str = "g", degree: Optional[GradeValue] = None) -> HomogeneousElement:
    """Build an element from a sympy polynomial in Z."""
    z = sympy.Symbol("Z")
    poly = sympy.Poly(sympy.sympify(expression), z)
    coefficients = [ring.tower.from_expr(c) for c in reversed(poly.all_coeffs())]
    return validate(UniPoly(ring.tower.top, coefficients), degree, ring, name)


class MonomialForm:
    """gamma = c * x^beta with c algebraic over QQ."""

    def __init__(self, c_polynomial: UniPoly, c_value: Optional[Fraction], beta: ExponentVector, variables: Sequence[str]):
        self.c_polynomial = c_polynomial
        self.c_value = c_value
        self.beta = beta
        self.variables = tuple(variables)

    @property
    def integral(self) -> bool:
        return self.beta.is_nonnegative()

    def render(self) -> str:
        monomial = self.beta.render(self.variables)
        if self.c_value is not None:
            if self.c_value == 1:
                return monomial
            c = str(self.c_value)
        else:
            c = f"root({self.c_polynomial.to_str('T')})"
        return c if monomial == "1" else f"{c}*{monomial}"

    def to_dict(self) -> Dict:
        return {
            "c": str(self.c_value) if self.c_value is not None else f"root({self.c_polynomial.to_str('T')})",
            "beta": self.beta.to_json(),
            "integral": self.integral,
        }


def _monomial_of(value, field) -> Tuple[Fraction, Tuple[int, ...]]:
    numerator_terms = value.numer.terms()
    denominator_terms = value.denom.terms()
    if len(numerator_terms) != 1 or len(denominator_terms) != 1:
        raise DomainError(f"{field.to_str(value)} is not a monomial")
    (num_monom, num_coeff), = numerator_terms
    (den_monom, den_coeff), = denominator_terms
    coefficient = Fraction(int(num_coeff.numerator), int(num_coeff.denominator)) / \
        Fraction(int(den_coeff.numerator), int(den_coeff.denominator))
    return coefficient, tuple(a - b for a, b in zip(num_monom, den_monom))


def monomial_normal_form(element: HomogeneousElement, config: SolverConfig = DEFAULT_CONFIG) -> MonomialForm:
    """
    Write gamma as c * x^beta when the weights are rationally independent.

    Raises:
        DomainError: "normal form requires N=n" for dependent weights
    """
    ring = element.ring
    weights = ring.weights
    if kernel_relations(weights).dimension:
        raise DomainError("normal form requires N=n")
    if ring.tower.levels:
        raise DomainError("Normal forms are computed for elements over QQ(x)")

    q = element.q
    beta = None
    constants = [Fraction(0)] * (q + 1)
    constants[q] = Fraction(1)
    for k in range(1, q + 1):
        g = element.coefficient(k)
        if ring.tower.is_zero(g):
            continue
        coefficient, exponent = _monomial_of(g, ring.tower.base)
        candidate = ExponentVector([Fraction(e, k) for e in exponent])
        if beta is None:
            beta = candidate
        elif candidate != beta:
            raise CertificateError(f"Coefficient g_{k} is not a power of x^beta")
        constants[q - k] = coefficient

    annihilator = UniPoly(RationalField(), constants)
    factors = factor_rational_univariate(annihilator, config.factor_degree_bound)
    chosen = factors[0]
    c_value = -chosen.coeffs[0] if chosen.degree == 1 else None
    return MonomialForm(chosen, c_value, beta, weights.variables)


def _constant_poly(polynomial: UniPoly, ring_domain: PolynomialRing) -> UniPoly:
    return polynomial.map(ring_domain.constant, ring_domain)


def _finish(result: UniPoly, degree: GradeValue, ring: SeriesRing, name: str) -> HomogeneousElement:
    result = squarefree_part(result.monic())
    return validate(result, degree, ring, name)


def combine_power(element: HomogeneousElement, k: int, name: Optional[str] = None) -> HomogeneousElement:
    """
    Annihilator of gamma^k as Res_X(P(X), Z - X^k), squarefree part taken.
    """
    if k < 1:
        raise DomainError(f"Power must be positive, got {k}")
    field = element.polynomial.domain
    R = PolynomialRing(field)
    P = _constant_poly(element.polynomial, R)
    Q = UniPoly(R, [R.variable()] + [R.zero()] * (k - 1) + [R.constant(field.neg(field.one()))])
    result = _finish(resultant(P, Q), element.degree * k, element.ring, name or f"{element.name}^{k}")
    result.minimality_certified = element.minimality_certified and result.q == element.q
    return result


def combine_sum(first: HomogeneousElement, e1: int, second: HomogeneousElement, e2: int,
                name: Optional[str] = None) -> HomogeneousElement:
    """
    Annihilator of gamma1^e1 + gamma2^e2 as Res_X(P1(Z - X), P2(X)).
    """
    if first.degree * e1 != second.degree * e2:
        raise DomainError(f"Degrees differ: {first.degree * e1} and {second.degree * e2}")
    left = combine_power(first, e1) if e1 > 1 else first
    right = combine_power(second, e2) if e2 > 1 else second
    field = left.polynomial.domain
    R = PolynomialRing(field)
    shifted = UniPoly(R, [R.variable(), R.constant(field.neg(field.one()))])
    A = _constant_poly(left.polynomial, R).compose(shifted)
    B = _constant_poly(right.polynomial, R)
    return _finish(resultant(B, A), first.degree * e1, first.ring, name or f"{first.name}+{second.name}")


def combine_product(first: HomogeneousElement, second: HomogeneousElement, name: Optional[str] = None) -> HomogeneousElement:
    """
    Annihilator of gamma1 * gamma2 as Res_X(P2(X), X^q1 P1(Z/X)); the degree is d1 + d2.
    """
    field = first.polynomial.domain
    R = PolynomialRing(field)
    q1 = first.q
    homogenized = [R.constant(first.polynomial.coeff(q1 - m)).shift(q1 - m) for m in range(q1 + 1)]
    A = UniPoly(R, homogenized)
    B = _constant_poly(second.polynomial, R)
    return _finish(resultant(B, A), first.degree + second.degree, first.ring, name or f"{first.name}*{second.name}")


def integralize(element: HomogeneousElement, name: Optional[str] = None) -> Tuple[HomogeneousElement, object]:
    """
    Clear denominators: gamma' = h * gamma with g'_k = g_k * h^k.

    Returns:
        (integral element, multiplier h as a base field element)
    """
    ring = element.ring
    tower = ring.tower
    field = tower.base
    denominators = []
    for k in range(1, element.q + 1):
        for component in tower.flatten(element.coefficient(k)):
            if component.denom.is_ground:
                continue
            candidate = field.K.new(component.denom.monic())
            if not any(candidate == seen for seen in denominators):
                denominators.append(candidate)
    multiplier = field.one()
    for denominator in denominators:
        multiplier = field.mul(multiplier, denominator)
    if not denominators:
        return element, multiplier

    lifted = tower.from_base(multiplier)
    h_degree = ring.degree(lifted)
    q = element.q
    coefficients = [None] * (q + 1)
    coefficients[q] = tower.one()
    for k in range(1, q + 1):
        coefficients[q - k] = tower.mul(element.coefficient(k), tower.pow(lifted, k))
    result = validate(UniPoly(tower.top, coefficients), element.degree + h_degree, ring, name or f"{element.name}'",
                      element.minimality_certified)
    if not result.integral:
        raise CertificateError(f"Integralization of {element.name} left denominators")
    return result, multiplier


def perfect_power_part(value, k: int, field) -> Tuple[int, Fraction, object]:
    """
    Write a rational function as c * u^e with e | k as large as possible.

    Returns:
        (e, c, u) with c rational and u a base field element
    """
    expression = sympy.together(field.to_expr(value))
    numerator, denominator = sympy.fraction(expression)
    exponent = k
    pieces = []
    content = Fraction(1)
    for part, sign in ((numerator, 1), (denominator, -1)):
        coefficient, factors = sympy.sqf_list(sympy.Poly(part, *field.symbols))
        coefficient = to_fraction(coefficient)
        content = content * coefficient if sign > 0 else content / coefficient
        for factor, multiplicity in factors:
            exponent = gcd(exponent, multiplicity)
            pieces.append((factor.as_expr(), multiplicity * sign))
    if exponent <= 1:
        return 1, Fraction(1), value
    root = sympy.Integer(1)
    for factor, multiplicity in pieces:
        root = root * factor ** (multiplicity // exponent)
    return exponent, content, field.from_expr(root)


def rational_root(c: Fraction, e: int) -> Optional[Fraction]:
    """The rational e-th root of c if it exists (real, sign-preserving for odd e)."""
    if c == 0:
        return Fraction(0)
    if c < 0 and e % 2 == 0:
        return None
    sign = -1 if c < 0 else 1
    num, exact_num = sympy.integer_nthroot(abs(c.numerator), e)
    den, exact_den = sympy.integer_nthroot(c.denominator, e)
    if exact_num and exact_den:
        return Fraction(sign * int(num), int(den))
    return None


class HomTower:
    """
    A sequence of homogeneous elements over a base tower, plus expressions of
    replaced generators in terms of the current ones.
    """

    def __init__(self, ring: SeriesRing, elements: Sequence[HomogeneousElement],
                 expressions: Optional[Dict[str, sympy.Expr]] = None):
        self.ring = ring
        self.elements = list(elements)
        self.expressions = dict(expressions or {})

    @property
    def size(self) -> int:
        return len(self.elements)

    @property
    def degrees(self) -> List[int]:
        return [element.q for element in self.elements]

    def names(self) -> List[str]:
        return [element.name for element in self.elements]

    def build_tower(self) -> TowerField:
        """Adjoin every element to the base tower in order."""
        tower = self.ring.tower
        depth = len(tower.levels)
        for element in self.elements:
            tower = element.adjoin(tower, depth)
        return tower

    def describe(self) -> List[str]:
        lines = [element.describe() for element in self.elements]
        for name, expression in sorted(self.expressions.items()):
            lines.append(f"{name} = {format_expr(expression)}")
        return lines

    def to_dict(self) -> Dict:
        return {
            "elements": [element.to_dict() for element in self.elements],
            "expressions": {name: format_expr(e) for name, e in sorted(self.expressions.items())},
        }


class _Echelon:
    """Incremental row echelon form over a field, tracking combinations of inserted vectors."""

    def __init__(self, field):
        self.field = field
        self.rows: List[Tuple[int, List, Dict[int, object]]] = []
        self.count = 0

    def _reduce(self, vector: Sequence) -> Tuple[List, Dict[int, object]]:
        F = self.field
        residual = list(vector)
        combination: Dict[int, object] = {}
        for pivot, row, row_combination in self.rows:
            c = residual[pivot]
            if F.is_zero(c):
                continue
            residual = [F.sub(a, F.mul(c, b)) for a, b in zip(residual, row)]
            for index, value in row_combination.items():
                combination[index] = F.sub(combination.get(index, F.zero()), F.mul(c, value))
        return residual, combination

    def add(self, vector: Sequence) -> bool:
        """Insert a vector; False if it depends on the previous ones."""
        F = self.field
        residual, combination = self._reduce(vector)
        pivot = next((i for i, a in enumerate(residual) if not F.is_zero(a)), None)
        if pivot is None:
            return False
        inverse = F.inv(residual[pivot])
        combination[self.count] = F.one()
        row = [F.mul(a, inverse) for a in residual]
        self.rows.append((pivot, row, {i: F.mul(v, inverse) for i, v in combination.items()}))
        self.count += 1
        return True

    def express(self, vector: Sequence) -> Optional[Dict[int, object]]:
        """Coefficients writing vector through the inserted vectors, or None."""
        F = self.field
        residual, combination = self._reduce(vector)
        if any(not F.is_zero(a) for a in residual):
            return None
        return {index: F.neg(value) for index, value in combination.items()}


def _integer_relation(elements: Sequence[HomogeneousElement]) -> List[int]:
    rows = [[sympy.Rational(c.numerator, c.denominator) for c in element.degree.coords] for element in elements]
    kernel = sympy.Matrix(rows).T.nullspace()
    if not kernel:
        raise CertificateError("Degrees of the elements are rationally independent")
    vector = [sympy.Rational(v) for v in kernel[0]]
    scale = sympy.ilcm(*[v.q for v in vector])
    return [int(v * scale) for v in vector]


def _compress_step(ring: SeriesRing, group: Sequence[HomogeneousElement], seed: int, retries: int,
                   label: str) -> Tuple[List[HomogeneousElement], Dict[str, sympy.Expr]]:
    relation = _integer_relation(group)
    positive = [i for i, r in enumerate(relation) if r > 0]
    negative = [i for i, r in enumerate(relation) if r < 0]
    if not positive or not negative:
        raise CertificateError("Degree relation has no sign change; positive degrees expected")
    nonzero = [abs(r) for r in relation if r]
    common = 1
    for r in nonzero:
        common = common * r // gcd(common, r)

    base_tower = ring.tower
    depth = len(base_tower.levels)
    replaced: Dict[int, HomogeneousElement] = {}
    expressions: Dict[str, sympy.Expr] = {}
    for i in positive + negative:
        element = group[i]
        e = common // abs(relation[i])
        if e == 1:
            replaced[i] = element
            continue
        coefficients = []
        for c in element.polynomial.coeffs:
            coefficients.append(c)
            coefficients.extend([base_tower.zero()] * (e - 1))
        rooted = validate(UniPoly(base_tower.top, coefficients[:len(coefficients) - (e - 1)]),
                          element.degree / e, ring, f"{element.name}r")
        replaced[i] = rooted
        expressions[element.name] = sympy.Symbol(rooted.name) ** e

    working = base_tower
    for i in positive + negative:
        working = replaced[i].adjoin(working, depth)
    dimension = working.dimension_over(depth)

    def product(indices):
        value = working.one()
        for i in indices:
            value = working.mul(value, working.generator(replaced[i].name))
        return value

    A, B = product(positive), product(negative)
    F = base_tower

    def flat(value):
        return working.flatten(value, depth)

    span = _Echelon(F)
    frontier = [working.one()]
    span.add(flat(working.one()))
    while frontier:
        current = frontier.pop(0)
        for factor in (A, B):
            candidate = working.mul(current, factor)
            if span.add(flat(candidate)):
                frontier.append(candidate)
    target_dimension = span.count

    for attempt in range(retries):
        c = seed + attempt + 1
        theta = working.add(A, working.mul(working.from_fraction(c), B))
        try:
            powers = _Echelon(F)
            power = working.one()
            while powers.add(flat(power)):
                power = working.mul(power, theta)
            if powers.count != target_dimension:
                logger.debug("Compression candidate c=%d spans %d of %d", c, powers.count, target_dimension)
                continue
            relation_coefficients = powers.express(flat(power))
            a_coefficients = powers.express(flat(A))
            b_coefficients = powers.express(flat(B))
        except ZeroDivisorFound:
            logger.debug("Compression candidate c=%d met a zero divisor", c)
            continue
        if relation_coefficients is None or a_coefficients is None or b_coefficients is None:
            continue

        q = powers.count
        minimal = [F.neg(relation_coefficients.get(k, F.zero())) for k in range(q)] + [F.one()]
        degree = sum((replaced[i].degree for i in positive[1:]), replaced[positive[0]].degree)
        theta_element = validate(UniPoly(F.top, minimal), degree, ring, label, True)

        theta_symbol = sympy.Symbol(label)

        def polynomial_in_theta(coefficients):
            return sum((F.to_expr(coefficients.get(k, F.zero())) * theta_symbol ** k for k in range(q)), sympy.Integer(0))

        kept = [replaced[i] for i in positive[:-1]] + [replaced[i] for i in negative[:-1]]
        for indices, coefficients in ((positive, a_coefficients), (negative, b_coefficients)):
            last = replaced[indices[-1]]
            others = sympy.Integer(1)
            for i in indices[:-1]:
                others = others * sympy.Symbol(replaced[i].name)
            expressions[last.name] = polynomial_in_theta(coefficients) / others
        for name, expression in list(expressions.items()):
            expressions[name] = expression.subs({sympy.Symbol(n): e for n, e in expressions.items() if n != name})
        logger.info("Compressed %d elements into %s with c=%d (degree %d)", len(group), label, c, q)
        zero_relation = [group[i] for i, r in enumerate(relation) if r == 0]
        return kept + zero_relation + [theta_element], expressions

    raise CertificateError(f"Tower compression failed after {retries} candidates")


def tower_compress(tower: HomTower, seed: int = 0, config: SolverConfig = DEFAULT_CONFIG) -> HomTower:
    """
    Reduce a tower of homogeneous elements to at most N elements.

    Args:
        tower: Elements over a common base
        seed: Chooses the combination constants 1, 2, 3, ... offset by the seed

    Returns:
        HomTower with expressions for every replaced generator
    """
    ring = tower.ring
    N = ring.weights.rank
    expressions: Dict[str, sympy.Expr] = dict(tower.expressions)
    elements = []
    for element in tower.elements:
        if element.q == 1:
            expressions[element.name] = ring.tower.to_expr(ring.tower.neg(element.coefficient(1)))
        else:
            elements.append(element)
    residue = [e for e in elements if e.degree.is_zero()]
    graded = [e for e in elements if not e.degree.is_zero()]

    step = 0
    while len(graded) > N:
        step += 1
        merged, new_expressions = _compress_step(ring, graded[:N + 1], seed, config.compress_retries, f"h{step}")
        substitution = {sympy.Symbol(n): e for n, e in new_expressions.items()}
        for name in list(expressions):
            expressions[name] = expressions[name].subs(substitution)
        expressions.update(new_expressions)
        graded = merged + graded[N + 1:]
    return HomTower(ring, residue + graded, expressions)


def exponent_support(value, tower: TowerField, variables: Sequence[str], depth: Optional[int] = None) -> List[ExponentVector]:
    """
    Exponent vectors of a tower element whose homogeneous levels are binomial (Z^q - c x^e).
    Number and residue levels contribute exponent zero.
    """
    depth = len(tower.levels) if depth is None else depth
    n = len(variables)
    if depth == 0:
        if not value:
            return []
        denominators = value.denom.terms()
        if len(denominators) != 1:
            raise DomainError(f"{tower.base.to_str(value)} has a non-monomial denominator")
        (den_monom, _), = denominators
        return [ExponentVector([a - b for a, b in zip(monom, den_monom)]) for monom, _ in value.numer.terms()]
    level = tower.levels[depth - 1]
    shift = ExponentVector([0] * n)
    if level.kind == "homogeneous":
        shift = _binomial_exponent(level, tower.prefix(depth - 1), variables)
    result = set()
    for j, coefficient in enumerate(value):
        for vector in exponent_support(coefficient, tower, variables, depth - 1):
            result.add(vector + shift * j)
    return sorted(result)


def _binomial_exponent(level: ExtensionField, below: TowerField, variables: Sequence[str]) -> ExponentVector:
    modulus = level.modulus
    q = modulus.degree
    if any(not below.is_zero(c) for c in modulus.coeffs[1:q]):
        raise DomainError(f"Generator {level.name} is not a monomial root")
    constant = below.neg(modulus.coeffs[0])
    vectors = exponent_support(constant, below, variables)
    if len(vectors) != 1:
        raise DomainError(f"Generator {level.name} is not a monomial root")
    return vectors[0] * Fraction(1, q)
