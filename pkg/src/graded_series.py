"""
Truncated series graded by a monomial valuation.
Each series is a finite map from degrees to homogeneous layers plus a precision bound.
"""

import logging
from fractions import Fraction
from functools import reduce
from math import gcd
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import DomainError, PrecisionError
from .tower_arithmetic import TowerField, format_expr
from .weights import GradeValue, PrecisionBound, Weights, format_fraction, to_fraction

logger = logging.getLogger(__name__)

Precision = Optional[GradeValue]


def min_precision(a: Precision, b: Precision) -> Precision:
    """Minimum where None stands for infinite precision."""
    if a is None:
        return b
    if b is None:
        return a
    return a if a <= b else b


def add_precision(a: Precision, b: Precision) -> Precision:
    if a is None or b is None:
        return None
    return a + b


class ExponentVector:
    """Rational exponent vector with an explicit common denominator."""

    __slots__ = ("entries",)

    def __init__(self, entries: Sequence):
        self.entries = tuple(to_fraction(e) for e in entries)

    @property
    def denominator(self) -> int:
        return reduce(lambda a, b: a * b // gcd(a, b), (e.denominator for e in self.entries), 1)

    def is_nonnegative(self) -> bool:
        return all(e >= 0 for e in self.entries)

    def __add__(self, other: "ExponentVector") -> "ExponentVector":
        return ExponentVector([a + b for a, b in zip(self.entries, other.entries)])

    def __sub__(self, other: "ExponentVector") -> "ExponentVector":
        return ExponentVector([a - b for a, b in zip(self.entries, other.entries)])

    def __mul__(self, scalar) -> "ExponentVector":
        s = to_fraction(scalar)
        return ExponentVector([a * s for a in self.entries])

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        return isinstance(other, ExponentVector) and self.entries == other.entries

    def __hash__(self):
        return hash(self.entries)

    def __lt__(self, other: "ExponentVector") -> bool:
        return self.entries < other.entries

    def degree(self, weights: Weights) -> GradeValue:
        return weights.degree(self.entries)

    def to_json(self) -> List[str]:
        return [format_fraction(e) for e in self.entries]

    def render(self, variables: Sequence[str]) -> str:
        factors = []
        for name, e in zip(variables, self.entries):
            if e == 0:
                continue
            if e == 1:
                factors.append(name)
            elif e.denominator == 1:
                factors.append(f"{name}^{e.numerator}")
            else:
                factors.append(f"{name}^({format_fraction(e)})")
        return "*".join(factors) if factors else "1"

    def __repr__(self):
        return f"ExponentVector({self.to_json()})"


class SeriesRing:
    """
    The graded ring: weights plus the tower holding layer coefficients.
    """

    def __init__(self, weights: Weights, tower: TowerField):
        """
        Initialize the ring.

        Args:
            weights: Monomial valuation weights
            tower: Tower over QQ(x1..xn) holding layer values
        """
        base_variables = getattr(tower.base, "variables", None)
        if base_variables is not None and tuple(base_variables) != tuple(weights.variables):
            raise DomainError(f"Tower variables {base_variables} differ from weight variables {weights.variables}")
        self.weights = weights
        self.tower = tower

    def with_tower(self, tower: TowerField) -> "SeriesRing":
        return SeriesRing(self.weights, tower)

    @property
    def variables(self) -> Tuple[str, ...]:
        return self.weights.variables

    def compatible(self, other: "SeriesRing") -> bool:
        return self.weights is other.weights or self.weights.matrix == other.weights.matrix

    def _split_base(self, value) -> Dict[GradeValue, object]:
        field = self.tower.base
        if field.is_zero(value):
            return {}
        denominator_degrees = {self.weights.degree(m) for m, _ in value.denom.terms()}
        if len(denominator_degrees) != 1:
            raise DomainError(f"Denominator of {field.to_str(value)} is not homogeneous")
        shift = denominator_degrees.pop()
        groups: Dict[GradeValue, Dict] = {}
        for monom, coefficient in value.numer.terms():
            groups.setdefault(self.weights.degree(monom) - shift, {})[monom] = coefficient
        if len(groups) == 1:
            return {next(iter(groups)): value}
        ring = field.K.ring
        return {degree: field.K.new(ring.from_dict(terms), value.denom) for degree, terms in groups.items()}

    def _split(self, value, depth: int) -> Dict[GradeValue, object]:
        if depth == 0:
            return self._split_base(value)
        level = self.tower.levels[depth - 1]
        below = level.below
        parts: Dict[GradeValue, List] = {}
        for j, coefficient in enumerate(value):
            for degree, piece in self._split(coefficient, depth - 1).items():
                if j and level.grade is not None:
                    degree = degree + level.grade * j
                slots = parts.setdefault(degree, [below.zero()] * level.degree)
                slots[j] = below.add(slots[j], piece)
        return {degree: tuple(slots) for degree, slots in parts.items() if not level.is_zero(tuple(slots))}

    def split_value(self, value) -> Dict[GradeValue, object]:
        """Decompose a tower element into its homogeneous parts."""
        return self._split(value, len(self.tower.levels))

    def degree(self, value) -> Optional[GradeValue]:
        """Degree of a homogeneous tower element (None for zero)."""
        parts = self.split_value(value)
        if not parts:
            return None
        if len(parts) > 1:
            degrees = sorted(parts)
            raise DomainError(f"{self.tower.to_str(value)} is not homogeneous: degrees {degrees[0]} and {degrees[1]}")
        return next(iter(parts))

    def is_polynomial(self, value) -> bool:
        """Whether every base component has a constant denominator."""
        return all(c.denom.is_ground for c in self.tower.flatten(value)) if self.tower.levels else value.denom.is_ground

    def series(self, layers: Dict[GradeValue, object], precision: Precision = None) -> "TruncatedGradedSeries":
        return TruncatedGradedSeries(self, layers, precision)

    def zero(self, precision: Precision = None) -> "TruncatedGradedSeries":
        return TruncatedGradedSeries(self, {}, precision)

    def one(self) -> "TruncatedGradedSeries":
        return self.from_value(self.tower.one())

    def constant(self, q) -> "TruncatedGradedSeries":
        return self.from_value(self.tower.from_fraction(to_fraction(q)))

    def from_value(self, value, precision: Precision = None) -> "TruncatedGradedSeries":
        return TruncatedGradedSeries(self, self.split_value(value), precision)

    def from_expr(self, expression, precision: Precision = None) -> "TruncatedGradedSeries":
        """
        Build a series from a sympy expression in the variables and tower generators.
        Rational functions with non-homogeneous denominators are expanded by series division.
        """
        value = self.tower.from_expr(expression)
        try:
            return self.from_value(value, precision)
        except DomainError:
            if self.tower.levels:
                raise
        if precision is None:
            raise DomainError(f"Expanding {expression} needs a finite precision")
        K = self.tower.base.K
        numerator = self.from_value(K.new(value.numer))
        denominator = self.from_value(K.new(value.denom))
        return numerator.divide(denominator, precision)

    def to_dict(self) -> Dict:
        return {"weights": self.weights.to_dict(), "tower": self.tower.describe()}


class TruncatedGradedSeries:
    """
    A series known modulo terms of valuation >= precision.
    precision=None means the series is exact.
    """

    def __init__(self, ring: SeriesRing, layers: Dict[GradeValue, object], precision: Precision = None):
        tower = ring.tower
        kept = {}
        for degree, value in layers.items():
            if tower.is_zero(value):
                continue
            if precision is not None and not degree < precision:
                continue
            kept[degree] = value
        self.ring = ring
        self.precision = precision
        self._layers = kept
        self._keys = sorted(kept)

    # Structure

    @property
    def tower(self) -> TowerField:
        return self.ring.tower

    @property
    def is_exact(self) -> bool:
        return self.precision is None

    def keys(self) -> List[GradeValue]:
        return list(self._keys)

    def items(self) -> List[Tuple[GradeValue, object]]:
        return [(k, self._layers[k]) for k in self._keys]

    def layer(self, degree: GradeValue):
        return self._layers.get(degree, self.tower.zero())

    def __len__(self):
        return len(self._keys)

    def is_zero(self) -> bool:
        """True when no layer is known to be nonzero."""
        return not self._keys

    def support(self) -> List[GradeValue]:
        return self.keys()

    def lower_valuation(self) -> Precision:
        """Least degree, or the precision bound when no layer is stored (None = infinity)."""
        if self._keys:
            return self._keys[0]
        return self.precision

    def valuation(self):
        """The valuation, or a PrecisionBound when the series is zero to its precision."""
        if self._keys:
            return self._keys[0]
        return PrecisionBound(self.precision)

    def initial_form(self):
        if not self._keys:
            raise PrecisionError(f"Valuation below precision unknown (series is zero modulo {self.precision})")
        return self._layers[self._keys[0]]

    # Precision

    def truncate(self, precision: Precision) -> "TruncatedGradedSeries":
        return TruncatedGradedSeries(self.ring, self._layers, min_precision(self.precision, precision))

    def with_precision(self, precision: Precision) -> "TruncatedGradedSeries":
        return TruncatedGradedSeries(self.ring, self._layers, precision)

    def agrees_with(self, other: "TruncatedGradedSeries", precision: Precision = None) -> bool:
        """Layerwise equality below a common precision."""
        bound = min_precision(min_precision(self.precision, other.precision), precision)
        other = _align(self, other)
        T = self.tower
        for degree in set(self._keys) | set(other._keys):
            if bound is not None and not degree < bound:
                continue
            if not T.eq(self.layer(degree), other.layer(degree)):
                return False
        return True

    # Arithmetic

    def __add__(self, other: "TruncatedGradedSeries") -> "TruncatedGradedSeries":
        other = _align(self, other)
        T = self.tower
        layers = dict(self._layers)
        for degree, value in other._layers.items():
            layers[degree] = T.add(layers[degree], value) if degree in layers else value
        return TruncatedGradedSeries(self.ring, layers, min_precision(self.precision, other.precision))

    def __neg__(self) -> "TruncatedGradedSeries":
        T = self.tower
        return TruncatedGradedSeries(self.ring, {d: T.neg(v) for d, v in self._layers.items()}, self.precision)

    def __sub__(self, other: "TruncatedGradedSeries") -> "TruncatedGradedSeries":
        return self + (-_align(self, other))

    def __mul__(self, other) -> "TruncatedGradedSeries":
        if not isinstance(other, TruncatedGradedSeries):
            return self.scale(other)
        return self.multiply(other)

    def multiply(self, other: "TruncatedGradedSeries", cap: Precision = None) -> "TruncatedGradedSeries":
        """Product with precision min(p_f + v(g), p_g + v(f)), optionally capped."""
        other = _align(self, other)
        precision = min_precision(
            add_precision(self.precision, other.lower_valuation()),
            add_precision(other.precision, self.lower_valuation()),
        )
        if self.is_exact and self.is_zero() or other.is_exact and other.is_zero():
            precision = None
        precision = min_precision(precision, cap)
        T = self.tower
        layers: Dict[GradeValue, object] = {}
        for d1, a in self.items():
            for d2, b in other.items():
                degree = d1 + d2
                if precision is not None and not degree < precision:
                    break
                product = T.mul(a, b)
                layers[degree] = T.add(layers[degree], product) if degree in layers else product
        return TruncatedGradedSeries(self.ring, layers, precision)

    def scale(self, value) -> "TruncatedGradedSeries":
        """Multiply by an exact tower element."""
        return self.multiply(self.ring.from_value(value))

    def scale_homogeneous(self, value, degree: GradeValue) -> "TruncatedGradedSeries":
        """Multiply by a homogeneous tower element of known degree."""
        T = self.tower
        layers = {d + degree: T.mul(v, value) for d, v in self._layers.items()}
        return TruncatedGradedSeries(self.ring, layers, add_precision(self.precision, degree))

    def __pow__(self, k: int) -> "TruncatedGradedSeries":
        result = self.ring.one()
        for _ in range(k):
            result = result * self
        return result

    def invert_unit(self, target: Precision) -> "TruncatedGradedSeries":
        """
        Inverse of a valuation-zero series by the geometric series.

        Args:
            target: Requested precision

        Returns:
            g with self * g = 1 modulo min(target, precision)
        """
        T = self.tower
        if self.is_zero():
            raise PrecisionError("Cannot invert a series that vanishes to its precision")
        valuation = self.lower_valuation()
        if not valuation.is_zero():
            raise DomainError(f"Not a unit: valuation {valuation}")
        inverse0 = T.inv(self.layer(valuation))
        if len(self._keys) == 1 and self.is_exact:
            return TruncatedGradedSeries(self.ring, {valuation: inverse0}, target)
        bound = min_precision(target, self.precision)
        if bound is None:
            raise DomainError("Inverting a non-monomial series needs a target precision")

        h = TruncatedGradedSeries(self.ring, {d: T.mul(v, inverse0) for d, v in self._layers.items() if d != valuation}, bound)
        minus_h = -h
        total = self.ring.one().with_precision(bound)
        power = total
        steps = 0
        while True:
            power = power.multiply(minus_h, cap=bound)
            if power.is_zero():
                break
            total = total + power
            steps += 1
        logger.debug("invert_unit: %d geometric steps to precision %s", steps, bound)
        return total.scale_homogeneous(inverse0, valuation).with_precision(bound)

    def divide(self, divisor: "TruncatedGradedSeries", target: Precision) -> "TruncatedGradedSeries":
        """
        Quotient in the valuation ring.

        Args:
            divisor: g with v(self) >= v(g)
            target: Requested precision

        Returns:
            q with g * q = self modulo the contract precision
        """
        divisor = _align(self, divisor)
        T = self.tower
        if divisor.is_zero():
            raise PrecisionError("Divisor vanishes to its precision")
        vg = divisor.lower_valuation()
        if self.is_zero():
            if self.is_exact:
                return self.ring.zero()
            if self.precision < vg:
                raise PrecisionError("Dividend precision is below the divisor valuation")
            return self.ring.zero(min_precision(target, self.precision - vg))
        vf = self.lower_valuation()
        if vf < vg:
            raise DomainError(f"Quotient not in valuation ring: v(f) = {vf} < v(g) = {vg}")

        inverse0 = T.inv(divisor.initial_form())
        unit = divisor.scale_homogeneous(inverse0, -vg)
        numerator = self.scale_homogeneous(inverse0, -vg)
        if len(unit) == 1 and unit.is_exact:
            return numerator.truncate(target)
        unit_target = None if target is None else target - (vf - vg)
        inverse = unit.invert_unit(unit_target)
        return numerator.multiply(inverse).truncate(target)

    # Conversions

    def map_values(self, fn: Callable, ring: SeriesRing) -> "TruncatedGradedSeries":
        return TruncatedGradedSeries(ring, {d: fn(v) for d, v in self._layers.items()}, self.precision)

    def embed(self, ring: SeriesRing) -> "TruncatedGradedSeries":
        """Move the series into a ring whose tower extends or refines this one."""
        if ring.tower is self.tower:
            return TruncatedGradedSeries(ring, self._layers, self.precision)
        source = self.tower
        return self.map_values(lambda v: ring.tower.convert(v, source), ring)

    def to_json(self) -> Dict:
        return {
            "precision": None if self.precision is None else self.precision.to_json(),
            "layers": [{"deg": d.to_json(), "term": self.tower.to_str(v)} for d, v in self.items()],
        }

    def to_str(self) -> str:
        terms = [f"({self.tower.to_str(v)})" for _, v in self.items()]
        body = " + ".join(terms) if terms else "0"
        return body if self.precision is None else f"{body} + O({self.precision})"

    def __repr__(self):
        return f"TruncatedGradedSeries({self.to_str()})"


def _align(f: TruncatedGradedSeries, g: TruncatedGradedSeries) -> TruncatedGradedSeries:
    """Bring g into f's ring when the towers are compatible."""
    if g.ring is f.ring or g.tower is f.tower:
        if not f.ring.compatible(g.ring):
            raise DomainError("Weight mismatch between series")
        return g
    if not f.ring.compatible(g.ring):
        raise DomainError("Weight mismatch between series")
    depth = len(g.tower.levels)
    if f.tower.levels[:depth] == g.tower.levels and f.tower.base is g.tower.base:
        return g.embed(f.ring)
    names_f = [level.name for level in f.tower.levels]
    if all(level.name in names_f for level in g.tower.levels):
        return g.embed(f.ring)
    raise DomainError("Series live in incompatible towers")


def combine(f: TruncatedGradedSeries, g: TruncatedGradedSeries, op: str) -> TruncatedGradedSeries:
    """Add or multiply two series under the precision contract."""
    if op == "add":
        return f + g
    if op == "mul":
        return f * g
    raise DomainError(f"Unknown operation {op!r}; expected 'add' or 'mul'")


def semigroup_membership(values: Iterable, generators: Sequence) -> bool:
    """
    Decide whether every value is a nonnegative integer combination of the generators.

    Args:
        values: Rationals or GradeValues
        generators: Positive rationals or GradeValues

    Returns:
        True if all values are members
    """
    generators = list(generators)
    for g in generators:
        if isinstance(g, GradeValue):
            if g.is_zero() or g.sign() < 0:
                raise DomainError(f"Generator {g} is not positive")
        elif to_fraction(g) <= 0:
            raise DomainError(f"Generator {g} is not positive")

    def subtract(a, b):
        return a - b

    def is_zero(a):
        return a.is_zero() if isinstance(a, GradeValue) else a == 0

    def negative(a):
        return a.sign() < 0 if isinstance(a, GradeValue) else a < 0

    memo: Dict[Tuple, bool] = {}

    def search(remaining, index: int) -> bool:
        key = (remaining.coords if isinstance(remaining, GradeValue) else remaining, index)
        if key in memo:
            return memo[key]
        if is_zero(remaining):
            return True
        if index == len(generators) or negative(remaining):
            return False
        found = False
        current = remaining
        while not negative(current):
            if search(current, index + 1):
                found = True
                break
            current = subtract(current, generators[index])
        memo[key] = found
        return found

    normalized = [v if isinstance(v, GradeValue) else to_fraction(v) for v in values]
    gens = [g if isinstance(g, GradeValue) else to_fraction(g) for g in generators]
    generators = gens
    return all(search(v, 0) for v in normalized)
