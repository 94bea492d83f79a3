"""
Weight vectors for monomial valuations, their value group and relation lattices.
Real weights are exact rational combinations of a declared basis with refinable enclosures.
"""

import itertools
import logging
import math
import threading
from fractions import Fraction
from functools import total_ordering
from typing import Dict, List, Optional, Sequence, Tuple, Union

import sympy
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations

from .config import DEFAULT_CONFIG, SolverConfig
from .errors import BudgetExhausted, CertificateError, DomainError, ParseError, PrecisionError

logger = logging.getLogger(__name__)

_TRANSFORMATIONS = standard_transformations + (convert_xor,)
_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)

Interval = Tuple[Fraction, Fraction]


def to_fraction(value) -> Fraction:
    """Convert ints, Fractions, sympy rationals and decimal strings to a Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, sympy.Basic):
        rational = sympy.Rational(value)
        return Fraction(int(rational.p), int(rational.q))
    if hasattr(value, "numerator") and hasattr(value, "denominator") and not isinstance(value, float):
        return Fraction(int(value.numerator), int(value.denominator))
    return Fraction(value)


def format_fraction(value: Fraction) -> str:
    """Render a Fraction as 'p' or 'p/q'."""
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


class ValueGroup:
    """
    A finitely generated subgroup of the reals, presented over a basis of symbols.
    Each symbol has a rational enclosure; symbols with a sympy expression can be refined.
    """

    def __init__(self, names: Sequence[str], enclosures: Sequence[Interval],
                 expressions: Optional[Sequence[Optional[sympy.Expr]]] = None,
                 refinement_budget: int = DEFAULT_CONFIG.refinement_budget):
        """
        Initialize the value group.

        Args:
            names: Basis symbol names, the first one is always "1"
            enclosures: Rational interval [lo, hi] for each symbol
            expressions: Optional exact sympy value for each symbol
            refinement_budget: Maximum refinement rounds for one sign decision
        """
        if len(names) != len(enclosures):
            raise ValueError("Each basis symbol needs an enclosure")
        self.names = tuple(names)
        self._bounds: List[Interval] = [(Fraction(lo), Fraction(hi)) for lo, hi in enclosures]
        self._expressions = list(expressions) if expressions else [None] * len(names)
        self._digits = [15] * len(names)
        self.refinement_budget = refinement_budget
        self._sign_cache: Dict[Tuple[Fraction, ...], int] = {}
        self._lock = threading.Lock()

        for index, (lo, hi) in enumerate(self._bounds):
            if lo > hi:
                raise ValueError(f"Empty enclosure for {self.names[index]}: [{lo}, {hi}]")

    @classmethod
    def rational(cls) -> "ValueGroup":
        """The group generated by 1 alone."""
        return cls(["1"], [(Fraction(1), Fraction(1))], [sympy.Integer(1)])

    @property
    def size(self) -> int:
        return len(self.names)

    @property
    def is_rational(self) -> bool:
        return self.size == 1

    def enclosure(self, index: int) -> Interval:
        return self._bounds[index]

    def refine(self, index: int) -> bool:
        """
        Tighten the enclosure of one basis symbol.

        Returns:
            True if the enclosure changed
        """
        lo, hi = self._bounds[index]
        if lo == hi:
            return False
        expression = self._expressions[index]
        if expression is None:
            return False
        with self._lock:
            digits = self._digits[index] * 2
            self._digits[index] = digits
            approximation = to_fraction(sympy.N(expression, digits))
            margin = (abs(approximation) + 1) / 10 ** (digits - 3)
            new_lo = max(lo, approximation - margin)
            new_hi = min(hi, approximation + margin)
            if new_lo > new_hi:
                raise DomainError(f"Declared enclosure of {self.names[index]} excludes its value")
            self._bounds[index] = (new_lo, new_hi)
        logger.debug("Refined %s to %d digits", self.names[index], digits)
        return True

    def interval(self, coords: Sequence[Fraction], offset: Fraction = Fraction(0)) -> Interval:
        """Enclosure of offset + sum(coords[j] * b_j)."""
        lo = hi = Fraction(offset)
        for c, (blo, bhi) in zip(coords, self._bounds):
            if c > 0:
                lo += c * blo
                hi += c * bhi
            elif c < 0:
                lo += c * bhi
                hi += c * blo
        return lo, hi

    def sign(self, coords: Sequence[Fraction], offset: Fraction = Fraction(0)) -> int:
        """
        Certified sign of offset + sum(coords[j] * b_j).

        Raises:
            PrecisionError: if refinement cannot separate the value from zero
        """
        key = tuple(coords) + (offset,)
        if key in self._sign_cache:
            return self._sign_cache[key]
        if all(c == 0 for c in coords):
            return (offset > 0) - (offset < 0)

        active = [j for j, c in enumerate(coords) if c != 0]
        for _ in range(self.refinement_budget + 1):
            lo, hi = self.interval(coords, offset)
            if lo > 0:
                self._sign_cache[key] = 1
                return 1
            if hi < 0:
                self._sign_cache[key] = -1
                return -1
            if lo == hi:
                self._sign_cache[key] = 0
                return 0
            if not any([self.refine(j) for j in active]):
                break
        raise PrecisionError(
            f"Cannot decide the sign of {self.format(coords, offset)}: bad basis declaration or refinement budget exhausted"
        )

    def format(self, coords: Sequence[Fraction], offset: Fraction = Fraction(0)) -> str:
        parts = []
        total = list(coords)
        if offset:
            total[0] = total[0] + offset
        for c, name in zip(total, self.names):
            if c == 0:
                continue
            if name == "1":
                parts.append(format_fraction(c))
            elif c == 1:
                parts.append(name)
            else:
                parts.append(f"{format_fraction(c)}*{name}")
        return " + ".join(parts).replace("+ -", "- ") if parts else "0"

    def to_dict(self) -> Dict[str, List[str]]:
        return {name: [format_fraction(lo), format_fraction(hi)] for name, (lo, hi) in zip(self.names, self._bounds)}


@total_ordering
class GradeValue:
    """
    An element of the value group, stored as exact coordinates over the basis.
    """

    __slots__ = ("coords", "group")

    def __init__(self, coords: Sequence, group: ValueGroup):
        self.coords = tuple(to_fraction(c) for c in coords)
        self.group = group
        if len(self.coords) != group.size:
            raise ValueError(f"Expected {group.size} coordinates, got {len(self.coords)}")

    @classmethod
    def constant(cls, value, group: ValueGroup) -> "GradeValue":
        coords = [Fraction(0)] * group.size
        coords[0] = to_fraction(value)
        return cls(coords, group)

    def _coerce(self, other) -> "GradeValue":
        if isinstance(other, GradeValue):
            return other
        if isinstance(other, (int, Fraction)):
            return GradeValue.constant(other, self.group)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return GradeValue([a + b for a, b in zip(self.coords, other.coords)], self.group)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return GradeValue([a - b for a, b in zip(self.coords, other.coords)], self.group)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return GradeValue([-a for a in self.coords], self.group)

    def __mul__(self, scalar):
        if isinstance(scalar, GradeValue):
            raise TypeError("Grade values can only be scaled by rationals")
        s = to_fraction(scalar)
        return GradeValue([a * s for a in self.coords], self.group)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        s = to_fraction(scalar)
        if s == 0:
            raise ZeroDivisionError("division of a grade value by zero")
        return GradeValue([a / s for a in self.coords], self.group)

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = GradeValue.constant(other, self.group)
        if not isinstance(other, GradeValue):
            return NotImplemented
        return self.coords == other.coords

    def __lt__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if self.coords == other.coords:
            return False
        return self.group.sign([a - b for a, b in zip(self.coords, other.coords)]) < 0

    def __hash__(self):
        return hash(self.coords)

    def compare(self, other) -> int:
        """-1, 0 or 1; equal coordinates decide without refinement."""
        coerced = self._coerce(other)
        if coerced is NotImplemented:
            raise TypeError(f"Cannot compare {self} with {other!r}")
        if self.coords == coerced.coords:
            return 0
        return self.group.sign([a - b for a, b in zip(self.coords, coerced.coords)])

    def sign(self) -> int:
        return self.group.sign(self.coords)

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coords)

    def is_rational(self) -> bool:
        return all(c == 0 for c in self.coords[1:])

    def rational_value(self) -> Fraction:
        if not self.is_rational():
            raise DomainError(f"{self} is not rational")
        return self.coords[0]

    def interval(self) -> Interval:
        return self.group.interval(self.coords)

    def to_float(self) -> float:
        lo, hi = self.interval()
        return float((lo + hi) / 2)

    def to_json(self) -> List[str]:
        return [format_fraction(c) for c in self.coords]

    def __str__(self):
        return self.group.format(self.coords)

    def __repr__(self):
        return f"GradeValue({self})"


class PrecisionBound:
    """
    A lower bound on a valuation: the element is zero below this bound.
    A bound of None means the element is exactly zero.
    """

    is_lower_bound = True

    def __init__(self, bound: Optional[GradeValue]):
        self.bound = bound

    def __str__(self):
        return "infinity" if self.bound is None else f">= {self.bound}"

    def __repr__(self):
        return f"PrecisionBound({self})"


class RelationLattice:
    """Rational basis of the kernel of q -> sum(alpha_i q_i)."""

    def __init__(self, vectors: Sequence[Sequence[int]], n: int):
        self.vectors = [tuple(int(v) for v in vector) for vector in vectors]
        self.n = n

    @property
    def dimension(self) -> int:
        return len(self.vectors)

    def contains(self, vector: Sequence) -> bool:
        """Whether a rational vector lies in the span of the basis."""
        if not self.vectors:
            return all(to_fraction(v) == 0 for v in vector)
        base = sympy.Matrix(self.vectors)
        extended = base.col_join(sympy.Matrix([[sympy.Rational(to_fraction(v)) for v in vector]]))
        return extended.rank() == base.rank()

    def is_contained_in(self, other: "RelationLattice") -> bool:
        return all(other.contains(vector) for vector in self.vectors)

    def annihilates(self, weights: "Weights") -> bool:
        for vector in self.vectors:
            for j in range(weights.group.size):
                if sum(Fraction(vector[i]) * weights.matrix[i][j] for i in range(self.n)) != 0:
                    return False
        return True

    def to_list(self) -> List[List[int]]:
        return [list(vector) for vector in self.vectors]


class Weights:
    """
    The weight vector alpha of a monomial valuation.
    Row i of the matrix gives alpha_i over the value group basis.
    """

    def __init__(self, variables: Sequence[str], group: ValueGroup, matrix: Sequence[Sequence]):
        """
        Initialize weights and certify positivity.

        Args:
            variables: Variable names x1..xn
            group: Value group with its basis
            matrix: n rows of basis coordinates
        """
        self.variables = tuple(variables)
        self.group = group
        self.matrix = [tuple(to_fraction(c) for c in row) for row in matrix]
        if len(self.matrix) != len(self.variables):
            raise ValueError(f"Expected {len(self.variables)} weight rows, got {len(self.matrix)}")
        self._degree_cache: Dict[Tuple, GradeValue] = {}

        for index, row in enumerate(self.matrix):
            if all(c == 0 for c in row):
                raise DomainError(f"Weight of {self.variables[index]} is zero")
            if group.sign(row) <= 0:
                raise DomainError(f"Weight of {self.variables[index]} is not positive: {group.format(row)}")

    @classmethod
    def rational(cls, values: Sequence, variables: Optional[Sequence[str]] = None) -> "Weights":
        names = variables or [f"x{i + 1}" for i in range(len(values))]
        return cls(names, ValueGroup.rational(), [[to_fraction(v)] for v in values])

    @classmethod
    def ord(cls, n: int, variables: Optional[Sequence[str]] = None) -> "Weights":
        """The order valuation, alpha = (1, ..., 1)."""
        return cls.rational([1] * n, variables)

    @classmethod
    def generic(cls, n: int, variables: Optional[Sequence[str]] = None) -> "Weights":
        """Rationally independent weights (1, sqrt2, sqrt3, sqrt5, ...)."""
        if n > len(_PRIMES) + 1:
            raise DomainError(f"Generic weights are only tabulated for up to {len(_PRIMES) + 1} variables")
        expressions = [sympy.Integer(1)] + [sympy.sqrt(p) for p in _PRIMES[:n - 1]]
        names = ["1"] + [f"sqrt{p}" for p in _PRIMES[:n - 1]]
        group = ValueGroup(names, [_initial_enclosure(e) for e in expressions], expressions)
        matrix = [[1 if j == i else 0 for j in range(n)] for i in range(n)]
        return cls(variables or [f"x{i + 1}" for i in range(n)], group, matrix)

    @classmethod
    def parse(cls, text: str, variables: Optional[Sequence[str]] = None,
              config: SolverConfig = DEFAULT_CONFIG) -> "Weights":
        """
        Parse a weight specification.

        Accepted forms:
            "1,2"                                   rational weights
            "1, sqrt(2)"                            expressions, basis inferred
            "b1: sqrt(2) [1.414,1.415]; b2: [1.7,1.8]; a1 = b1; a2 = b2; a3 = 13*b1 + b2"

        Args:
            text: The specification
            variables: Variable names (defaults to x1..xn)
            config: Supplies the refinement budget

        Returns:
            Weights instance
        """
        statements = [s.strip() for s in text.replace("\n", ";").split(";") if s.strip()]
        if not statements:
            raise ParseError("Empty weight specification")

        declared: Dict[str, sympy.Symbol] = {}
        names: List[str] = ["1"]
        enclosures: List[Interval] = [(Fraction(1), Fraction(1))]
        expressions: List[Optional[sympy.Expr]] = [sympy.Integer(1)]
        rows: Dict[int, sympy.Expr] = {}
        listed: List[sympy.Expr] = []

        for statement in statements:
            if ":" in statement:
                name, body = [part.strip() for part in statement.split(":", 1)]
                expression, enclosure = _parse_declaration(name, body)
                declared[name] = sympy.Symbol(name)
                names.append(name)
                enclosures.append(enclosure)
                expressions.append(expression)
            elif "=" in statement:
                target, body = [part.strip() for part in statement.split("=", 1)]
                index = _row_index(target)
                rows[index] = _parse_linear(body, declared)
            else:
                listed.extend(_parse_linear(item, declared) for item in statement.split(","))

        if rows and listed:
            raise ParseError("Use either a weight list or per-variable rows, not both")
        if rows:
            if sorted(rows) != list(range(len(rows))):
                raise ParseError(f"Weight rows must cover a1..a{len(rows)} without gaps")
            listed = [rows[i] for i in range(len(rows))]

        # Atoms that are neither 1 nor declared become implicit basis symbols
        for expression in listed:
            for atom in expression.as_coefficients_dict():
                if atom == 1 or atom in declared.values():
                    continue
                if atom.free_symbols:
                    raise ParseError(f"Undeclared symbol in weight {expression}")
                key = str(atom)
                if key not in names:
                    names.append(key)
                    enclosures.append(_initial_enclosure(atom))
                    expressions.append(atom)
                    declared[key] = atom

        lookup = {sympy.Integer(1): 0}
        for index, name in enumerate(names[1:], start=1):
            lookup[declared[name]] = index

        matrix = []
        for expression in listed:
            row = [Fraction(0)] * len(names)
            for atom, coefficient in expression.as_coefficients_dict().items():
                if not coefficient.is_Rational:
                    raise ParseError(f"Weight {expression} is not a rational combination of basis symbols")
                row[lookup[atom]] += to_fraction(coefficient)
            matrix.append(row)

        group = ValueGroup(names, enclosures, expressions, config.refinement_budget)
        if len(names) == 1:
            group = ValueGroup.rational()
        return cls(variables or [f"x{i + 1}" for i in range(len(matrix))], group, matrix)

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def rank(self) -> int:
        """N, the rational dimension of the value group."""
        return sympy.Matrix([[sympy.Rational(c.numerator, c.denominator) for c in row] for row in self.matrix]).rank()

    @property
    def is_rational(self) -> bool:
        return self.group.is_rational

    def weight(self, index: int) -> GradeValue:
        return GradeValue(self.matrix[index], self.group)

    def degree(self, exponent: Sequence) -> GradeValue:
        """The weighted degree <alpha, exponent> of a monomial."""
        key = tuple(exponent)
        cached = self._degree_cache.get(key)
        if cached is not None:
            return cached
        coords = [Fraction(0)] * self.group.size
        for e, row in zip(key, self.matrix):
            if e:
                e = to_fraction(e)
                coords = [c + e * r for c, r in zip(coords, row)]
        value = GradeValue(coords, self.group)
        self._degree_cache[key] = value
        return value

    def zero(self) -> GradeValue:
        return GradeValue.constant(0, self.group)

    def value(self, item) -> GradeValue:
        """Coerce a rational or a grade value into this group."""
        if isinstance(item, GradeValue):
            return item
        return GradeValue.constant(to_fraction(item), self.group)

    def to_dict(self) -> Dict:
        return {
            "variables": list(self.variables),
            "basis": self.group.to_dict(),
            "matrix": [[format_fraction(c) for c in row] for row in self.matrix],
        }

    def __str__(self):
        return "(" + ", ".join(str(self.weight(i)) for i in range(self.n)) + ")"


def _initial_enclosure(expression: sympy.Expr) -> Interval:
    if expression.is_Rational:
        value = to_fraction(expression)
        return value, value
    approximation = to_fraction(sympy.N(expression, 20))
    margin = (abs(approximation) + 1) / 10 ** 15
    return approximation - margin, approximation + margin


def _parse_declaration(name: str, body: str) -> Tuple[Optional[sympy.Expr], Interval]:
    expression_text, enclosure = body, None
    if "[" in body:
        expression_text, bracket = body.split("[", 1)
        bounds = bracket.rstrip("]").split(",")
        if len(bounds) != 2:
            raise ParseError(f"Enclosure for {name} must be [lo, hi]")
        try:
            enclosure = (to_fraction(bounds[0]), to_fraction(bounds[1]))
        except (ValueError, ZeroDivisionError) as e:
            raise ParseError(f"Bad enclosure for {name}: {e}")
    expression_text = expression_text.strip()

    expression = None
    if expression_text:
        try:
            expression = parse_expr(expression_text, transformations=_TRANSFORMATIONS)
        except (SyntaxError, TypeError, sympy.SympifyError) as e:
            raise ParseError(f"Bad value for {name}: {e}")
    elif name.startswith("sqrt") and name[4:].isdigit():
        expression = sympy.sqrt(int(name[4:]))
    elif name == "pi":
        expression = sympy.pi
    elif name == "e":
        expression = sympy.E

    if expression is not None and expression.free_symbols:
        raise ParseError(f"Value of {name} must be a constant")
    if enclosure is None:
        if expression is None:
            raise ParseError(f"Basis symbol {name} needs a value or an enclosure")
        enclosure = _initial_enclosure(expression)
    return expression, enclosure


def _row_index(target: str) -> int:
    if len(target) < 2 or target[0] not in "ax" or not target[1:].isdigit():
        raise ParseError(f"Weight row must be named aK or xK, got {target!r}")
    return int(target[1:]) - 1


def _parse_linear(text: str, declared: Dict[str, sympy.Symbol]) -> sympy.Expr:
    try:
        expression = parse_expr(text.strip(), local_dict=dict(declared), transformations=_TRANSFORMATIONS)
    except (SyntaxError, TypeError, sympy.SympifyError) as e:
        raise ParseError(f"Bad weight expression {text!r}: {e}")
    return sympy.expand(expression)


def kernel_relations(weights: Weights) -> RelationLattice:
    """
    Integer basis of the rational relations among the weights.

    Returns:
        RelationLattice whose vectors r satisfy sum_i r_i * alpha_i = 0
    """
    transpose = sympy.Matrix([[sympy.Rational(c.numerator, c.denominator) for c in row] for row in weights.matrix]).T
    vectors = []
    for vector in transpose.nullspace():
        entries = [sympy.Rational(v) for v in vector]
        scale = sympy.ilcm(*[e.q for e in entries]) if entries else 1
        integers = [int(e * scale) for e in entries]
        divisor = sympy.igcd(*integers) if any(integers) else 1
        integers = [v // divisor for v in integers]
        last = [v for v in integers if v != 0][-1]
        if last < 0:
            integers = [-v for v in integers]
        vectors.append(integers)
    lattice = RelationLattice(vectors, weights.n)
    logger.debug("Relation lattice of dimension %d for weights %s", lattice.dimension, weights)
    return lattice


def _pivot_rows(weights: Weights) -> Tuple[List[int], Dict[int, List[Fraction]]]:
    """Pick independent rows and express every row through them."""
    pivots: List[int] = []
    for i in range(weights.n):
        candidate = pivots + [i]
        block = sympy.Matrix([[sympy.Rational(c.numerator, c.denominator) for c in weights.matrix[k]] for k in candidate])
        if block.rank() == len(candidate):
            pivots.append(i)

    pivot_block = sympy.Matrix([[sympy.Rational(c.numerator, c.denominator) for c in weights.matrix[k]] for k in pivots]).T
    combinations: Dict[int, List[Fraction]] = {}
    for i in range(weights.n):
        row = sympy.Matrix([sympy.Rational(c.numerator, c.denominator) for c in weights.matrix[i]])
        solution, params = pivot_block.gauss_jordan_solve(row)
        if params.shape[0]:
            solution = solution.subs({p: 0 for p in params})
        combinations[i] = [to_fraction(v) for v in solution]
    return pivots, combinations


def rel_approx(weights: Weights, q: int, epsilon, budget: Optional[int] = None,
               config: SolverConfig = DEFAULT_CONFIG) -> Tuple[int, ...]:
    """
    Find an integer weight vector preserving every rational relation of the weights
    and approximating q * alpha within relative error epsilon.

    Args:
        weights: The weights alpha
        q: Scaling factor (>= 1)
        epsilon: Relative error bound (> 0)
        budget: Maximum number of candidate tuples examined

    Returns:
        Tuple of positive integers alpha'
    """
    q = int(q)
    epsilon = to_fraction(epsilon)
    if q < 1:
        raise DomainError(f"q must be at least 1, got {q}")
    if epsilon <= 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    budget = budget or config.rel_budget

    pivots, combinations = _pivot_rows(weights)
    low_factor, high_factor = q * (1 - epsilon), q * (1 + epsilon)

    candidate_lists = []
    for k in pivots:
        lo, hi = weights.weight(k).interval()
        first = max(1, math.ceil(low_factor * lo))
        last = math.floor(high_factor * hi)
        center = q * (lo + hi) / 2
        values = sorted(range(first, last + 1), key=lambda v: (abs(v - center), v))
        candidate_lists.append(values)
    logger.debug("rel_approx q=%d eps=%s candidates per pivot: %s", q, epsilon, [len(c) for c in candidate_lists])

    best, best_displacement, examined = None, None, 0
    for choice in itertools.product(*candidate_lists):
        examined += 1
        if examined > budget:
            break
        image = []
        for i in range(weights.n):
            value = sum(c * v for c, v in zip(combinations[i], choice))
            image.append(value)
        if any(v.denominator != 1 or v <= 0 for v in image):
            continue
        image = tuple(int(v) for v in image)
        displacement = max(abs(q - v / weights.weight(i).to_float()) for i, v in enumerate(image))
        if best_displacement is None or displacement < best_displacement:
            best, best_displacement = image, displacement
        if _certify_displacement(weights, image, low_factor, high_factor):
            logger.info("rel_approx found %s after %d candidates", image, examined)
            return image

    raise BudgetExhausted(
        f"No integer weights within relative error {epsilon} for q={q} after {min(examined, budget)} candidates",
        best=None if best is None else {"alpha": best, "displacement": best_displacement},
    )


def _certify_displacement(weights: Weights, image: Sequence[int], low_factor: Fraction, high_factor: Fraction) -> bool:
    try:
        for i, value in enumerate(image):
            row = weights.matrix[i]
            if weights.group.sign([-low_factor * c for c in row], Fraction(value)) <= 0:
                return False
            if weights.group.sign([high_factor * c for c in row], -Fraction(value)) <= 0:
                return False
    except PrecisionError:
        return False
    return True


def rel_approx_auto(weights: Weights, epsilon, q_start: int = 1, q_max: Optional[int] = None,
                    budget: Optional[int] = None, config: SolverConfig = DEFAULT_CONFIG) -> Tuple[int, Tuple[int, ...]]:
    """
    Increase q until rel_approx succeeds.

    Returns:
        (q, alpha') for the first q that works
    """
    q_max = q_max or config.rel_auto_max_q
    last_error = None
    for q in range(max(1, q_start), q_max + 1):
        try:
            return q, rel_approx(weights, q, epsilon, budget, config)
        except BudgetExhausted as e:
            last_error = e
    raise BudgetExhausted(f"No q in [{q_start}, {q_max}] admits an approximation within {epsilon}",
                          best=None if last_error is None else last_error.best)


def as_integer_weights(values: Union[Weights, Sequence[int]], variables: Sequence[str]) -> Weights:
    if isinstance(values, Weights):
        return values
    return Weights.rational(list(values), variables)


class TransferCheck:
    """Result of checking that a homogeneous polynomial stays homogeneous for approximated weights."""

    def __init__(self, nu: GradeValue, nu_prime: Fraction, lower: Fraction, upper: Fraction):
        self.homogeneous = True
        self.nu = nu
        self.nu_prime = nu_prime
        self.lower = lower
        self.upper = upper

    def to_dict(self) -> Dict:
        return {
            "homogeneous": self.homogeneous,
            "nu": self.nu.to_json(),
            "nu_prime": format_fraction(self.nu_prime),
            "lower": format_fraction(self.lower),
            "upper": format_fraction(self.upper),
        }


def _monomial_degrees(expression: sympy.Expr, weights: Weights) -> List[Tuple[Tuple[int, ...], GradeValue]]:
    symbols = sympy.symbols(weights.variables)
    poly = sympy.Poly(sympy.expand(expression), *symbols)
    return [(monom, weights.degree(monom)) for monom, _ in poly.terms()]


def homogeneity_transfer_check(polynomial, weights: Weights, approximation, q: int, epsilon) -> TransferCheck:
    """
    Check that an alpha-homogeneous polynomial is alpha'-homogeneous and bound its new valuation.

    Args:
        polynomial: sympy expression in the weight variables
        weights: alpha
        approximation: alpha' as integers or Weights
        q: The scaling factor used for alpha'
        epsilon: The relative error used for alpha'

    Returns:
        TransferCheck with nu_alpha, nu_alpha' and the certified sandwich
    """
    epsilon = to_fraction(epsilon)
    target = as_integer_weights(approximation, weights.variables)
    terms = _monomial_degrees(polynomial, weights)
    if not terms:
        raise DomainError("The zero polynomial has no valuation")
    first_monom, nu = terms[0]
    for monom, degree in terms[1:]:
        if degree != nu:
            raise DomainError(
                f"Polynomial is not homogeneous: monomials {first_monom} (degree {nu}) and {monom} (degree {degree})"
            )
    new_degrees = {target.degree(monom).rational_value() for monom, _ in terms}
    if len(new_degrees) != 1:
        raise CertificateError(f"Homogeneity lost under weights {target}: degrees {sorted(new_degrees)}")
    nu_prime = new_degrees.pop()

    lower, upper = q * (1 - epsilon), q * (1 + epsilon)
    group = weights.group
    if group.sign([-lower * c for c in nu.coords], nu_prime) < 0 or group.sign([upper * c for c in nu.coords], -nu_prime) < 0:
        raise CertificateError(f"Valuation {nu_prime} escapes the bounds q(1 -/+ eps) * {nu}")
    return TransferCheck(nu, nu_prime, lower, upper)


class SandwichBound:
    """alpha' valuation of a truncated series with the q(1 -/+ eps) bounds around its alpha valuation."""

    def __init__(self, nu: GradeValue, nu_prime: Fraction, lower: Fraction, upper: Fraction,
                 layers: List[TransferCheck], determined: bool):
        self.nu = nu
        self.nu_prime = nu_prime
        self.lower = lower
        self.upper = upper
        self.layers = layers
        self.determined = determined

    def to_dict(self) -> Dict:
        return {
            "nu": self.nu.to_json(),
            "nu_prime": format_fraction(self.nu_prime),
            "lower": format_fraction(self.lower),
            "upper": format_fraction(self.upper),
            "determined": self.determined,
            "layers": [check.to_dict() for check in self.layers],
        }


def valuation_sandwich(series, weights: Weights, approximation, q: int, epsilon) -> SandwichBound:
    """
    Apply the homogeneity transfer to every layer of a truncated series over QQ(x).

    Args:
        series: TruncatedGradedSeries with polynomial layers
        weights: alpha
        approximation: alpha' from rel_approx(alpha, q, epsilon)

    Returns:
        SandwichBound; `determined` is False when an unseen layer could still
        lower the alpha' valuation
    """
    epsilon = to_fraction(epsilon)
    tower = series.tower
    if tower.levels:
        raise DomainError("Sandwich bounds apply to series over QQ(x) only")
    checks = []
    for degree, value in series.items():
        expression = tower.base.to_expr(value)
        numerator, denominator = sympy.fraction(sympy.together(expression))
        if not denominator.is_number:
            raise DomainError(f"Layer of degree {degree} is not polynomial: {expression}")
        checks.append(homogeneity_transfer_check(numerator, weights, approximation, q, epsilon))
    if not checks:
        raise PrecisionError(f"Series vanishes modulo {series.precision}; no valuation to bound")

    nu_prime = min(check.nu_prime for check in checks)
    lower = q * (1 - epsilon)
    determined = True
    if series.precision is not None:
        determined = weights.group.sign([lower * c for c in series.precision.coords], -nu_prime) > 0
    logger.debug("Sandwich over %d layers: nu' = %s (determined: %s)", len(checks), nu_prime, determined)
    return SandwichBound(checks[0].nu, nu_prime, lower, q * (1 + epsilon), checks, determined)
