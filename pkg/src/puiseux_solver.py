"""
Roots of monic polynomials over graded series rings.
Graded Hensel lifting, factor lifting, the Newton-Puiseux recursion with
dynamic evaluation, completion factors and stability under perturbation.
"""

import logging
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd
import sympy

from .config import DEFAULT_CONFIG, SolverConfig
from .errors import (
    BudgetExhausted,
    CertificateError,
    DomainError,
    HypothesisError,
    NotSquarefreeError,
    PrecisionError,
    ZeroDivisorFound,
)
from .graded_series import Precision, SeriesRing, TruncatedGradedSeries, add_precision, min_precision
from .homogeneous import HomTower, integralize, perfect_power_part, rational_root, tower_compress, validate
from .tower_arithmetic import (
    ExtensionField,
    RationalField,
    TowerField,
    UniPoly,
    factor_rational_univariate,
    format_expr,
    squarefree_decomposition,
)
from .weights import GradeValue

logger = logging.getLogger(__name__)


def vanishes_to(value: TruncatedGradedSeries, bound: Precision) -> bool:
    """Whether value is known to be zero modulo bound (exactly zero when bound is None)."""
    if bound is None:
        return value.is_exact and value.is_zero()
    if not value.truncate(bound).is_zero():
        return False
    return value.precision is None or not value.precision < bound


def series_to_expr(series: TruncatedGradedSeries):
    return sum((series.tower.to_expr(v) for _, v in series.items()), sympy.Integer(0))


def _scale_rational(series: TruncatedGradedSeries, q) -> TruncatedGradedSeries:
    T = series.tower
    factor = T.from_fraction(Fraction(q))
    return series.map_values(lambda v: T.mul(v, factor), series.ring)


class SeriesPoly:
    """
    Polynomial in Z with series coefficients, lowest degree first.
    """

    def __init__(self, ring: SeriesRing, coeffs: Sequence[TruncatedGradedSeries]):
        coeffs = list(coeffs)
        while coeffs and coeffs[-1].is_exact and coeffs[-1].is_zero():
            coeffs.pop()
        self.ring = ring
        self.coeffs = coeffs

    @classmethod
    def from_residue(cls, ring: SeriesRing, poly: UniPoly) -> "SeriesPoly":
        return cls(ring, [ring.from_value(c) for c in poly.coeffs])

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def coeff(self, k: int) -> TruncatedGradedSeries:
        return self.coeffs[k] if 0 <= k < len(self.coeffs) else self.ring.zero()

    def __add__(self, other: "SeriesPoly") -> "SeriesPoly":
        size = max(len(self.coeffs), len(other.coeffs))
        return SeriesPoly(self.ring, [self.coeff(k) + other.coeff(k) for k in range(size)])

    def __sub__(self, other: "SeriesPoly") -> "SeriesPoly":
        size = max(len(self.coeffs), len(other.coeffs))
        return SeriesPoly(self.ring, [self.coeff(k) - other.coeff(k) for k in range(size)])

    def __neg__(self) -> "SeriesPoly":
        return SeriesPoly(self.ring, [-c for c in self.coeffs])

    def multiply(self, other: "SeriesPoly", cap: Precision = None) -> "SeriesPoly":
        if not self.coeffs or not other.coeffs:
            return SeriesPoly(self.ring, [])
        result = [None] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                product = a.multiply(b, cap)
                result[i + j] = product if result[i + j] is None else result[i + j] + product
        return SeriesPoly(self.ring, result)

    def scale(self, factor: TruncatedGradedSeries, cap: Precision = None) -> "SeriesPoly":
        return SeriesPoly(self.ring, [c.multiply(factor, cap) for c in self.coeffs])

    def mul_linear(self, c: TruncatedGradedSeries, cap: Precision = None) -> "SeriesPoly":
        """Multiply by Z + c."""
        shifted = [self.ring.zero()] + self.coeffs
        scaled = [a.multiply(c, cap) for a in self.coeffs] + [self.ring.zero()]
        return SeriesPoly(self.ring, [a + b for a, b in zip(shifted, scaled)])

    def mod_monic(self, divisor: "SeriesPoly", cap: Precision = None) -> "SeriesPoly":
        """Remainder modulo a monic divisor."""
        remainder = list(self.coeffs)
        d = divisor.degree
        for k in range(len(remainder) - 1, d - 1, -1):
            top = remainder[k]
            if top.is_exact and top.is_zero():
                continue
            for j in range(d):
                remainder[k - d + j] = remainder[k - d + j] - top.multiply(divisor.coeffs[j], cap)
        return SeriesPoly(self.ring, remainder[:d])

    def truncate(self, bound: Precision) -> "SeriesPoly":
        return SeriesPoly(self.ring, [c.truncate(bound) for c in self.coeffs])

    def vanishes_to(self, bound: Precision) -> bool:
        return all(vanishes_to(c, bound) for c in self.coeffs)

    def evaluate(self, y: TruncatedGradedSeries, cap: Precision = None) -> TruncatedGradedSeries:
        result = self.ring.zero()
        for c in reversed(self.coeffs):
            result = result.multiply(y, cap) + c
        return result


@lru_cache(maxsize=None)
def _discriminant_terms(d: int) -> Tuple[Tuple[Tuple[int, ...], Fraction], ...]:
    """Discriminant of Z^d + c1 Z^(d-1) + ... + cd as exponent/coefficient pairs in c1..cd."""
    z = sympy.Symbol("Z")
    symbols = sympy.symbols(f"c1:{d + 1}")
    generic = z ** d + sum(c * z ** (d - i - 1) for i, c in enumerate(symbols))
    disc = sympy.discriminant(generic, z)
    terms = sympy.Poly(disc, *symbols).terms()
    return tuple((monom, Fraction(int(c.p), int(c.q))) for monom, c in terms)


class MonicPoly:
    """
    P(Z) = Z^d + a_1 Z^(d-1) + ... + a_d with series coefficients.
    """

    def __init__(self, ring: SeriesRing, coefficients: Sequence[TruncatedGradedSeries]):
        """
        Initialize the polynomial.

        Args:
            ring: Series ring of the coefficients
            coefficients: a_1, ..., a_d
        """
        self.ring = ring
        self.coefficients = [c if c.ring is ring else c.embed(ring) for c in coefficients]

    @classmethod
    def from_expr(cls, expression, ring: SeriesRing, precision: Precision = None, variable: str = "Z") -> "MonicPoly":
        """
        Read a monic polynomial in Z with rational-function coefficients.

        Raises:
            DomainError: if the leading coefficient is not 1
        """
        z = sympy.Symbol(variable)
        try:
            poly = sympy.Poly(sympy.sympify(expression), z)
        except sympy.PolynomialError as e:
            raise DomainError(f"{expression} is not a polynomial in {variable}: {e}")
        coefficients = poly.all_coeffs()
        if poly.degree() < 1:
            raise DomainError(f"{expression} has no positive degree in {variable}")
        if sympy.simplify(coefficients[0] - 1) != 0:
            raise DomainError(f"Polynomial is not monic: leading coefficient {coefficients[0]}")
        return cls(ring, [ring.from_expr(c, precision) for c in coefficients[1:]])

    @classmethod
    def from_series_poly(cls, poly: SeriesPoly) -> "MonicPoly":
        d = poly.degree
        return cls(poly.ring, [poly.coeff(d - i) for i in range(1, d + 1)])

    @classmethod
    def from_roots(cls, ring: SeriesRing, roots: Sequence[TruncatedGradedSeries]) -> "MonicPoly":
        """The product of Z - s over the given series."""
        poly = SeriesPoly(ring, [ring.one()])
        for root in roots:
            poly = poly.mul_linear(-root)
        return cls.from_series_poly(poly)

    @property
    def degree(self) -> int:
        return len(self.coefficients)

    def coefficient(self, i: int) -> TruncatedGradedSeries:
        """a_i, with a_0 = 1."""
        if i == 0:
            return self.ring.one()
        return self.coefficients[i - 1]

    @property
    def precision(self) -> Precision:
        bound = None
        for c in self.coefficients:
            bound = min_precision(bound, c.precision)
        return bound

    def as_series_poly(self) -> SeriesPoly:
        d = self.degree
        return SeriesPoly(self.ring, [self.coefficient(d - k) for k in range(d + 1)])

    def evaluate(self, y: TruncatedGradedSeries, cap: Precision = None) -> TruncatedGradedSeries:
        result = self.ring.one()
        for a in self.coefficients:
            result = result.multiply(y, cap) + a
        return result

    def evaluate_derivative(self, y: TruncatedGradedSeries, cap: Precision = None) -> TruncatedGradedSeries:
        d = self.degree
        result = self.ring.constant(d)
        for i in range(1, d):
            result = result.multiply(y, cap) + _scale_rational(self.coefficient(i), d - i)
        return result

    def shift(self, c: TruncatedGradedSeries) -> "MonicPoly":
        """P(Z + c)."""
        poly = SeriesPoly(self.ring, [self.ring.one()])
        for a in self.coefficients:
            poly = poly.mul_linear(c) + SeriesPoly(self.ring, [a])
        return MonicPoly.from_series_poly(poly)

    def embed(self, ring: SeriesRing) -> "MonicPoly":
        if ring is self.ring:
            return self
        return MonicPoly(ring, [c.embed(ring) for c in self.coefficients])

    def residue(self) -> UniPoly:
        """The residue polynomial: degree-zero layers of the coefficients."""
        T = self.ring.tower
        zero = self.ring.weights.zero()
        coeffs = []
        for i in range(self.degree, -1, -1):
            a = self.coefficient(i)
            v = a.lower_valuation()
            if v is not None and v < zero:
                raise DomainError(f"Coefficient a_{i} has negative valuation {v}")
            if a.precision is not None and not zero < a.precision:
                raise PrecisionError(f"Coefficient a_{i} is unknown at degree 0")
            coeffs.append(a.layer(zero))
        return UniPoly(T.top, coeffs)

    def __mul__(self, other: "MonicPoly") -> "MonicPoly":
        return MonicPoly.from_series_poly(self.as_series_poly().multiply(other.embed(self.ring).as_series_poly()))

    def truncate(self, bound: Precision) -> "MonicPoly":
        return MonicPoly(self.ring, [c.truncate(bound) for c in self.coefficients])

    def agrees_with(self, other: "MonicPoly", bound: Precision = None) -> bool:
        if self.degree != other.degree:
            return False
        return all(a.agrees_with(b, bound) for a, b in zip(self.coefficients, other.coefficients))

    def closeness(self, other: "MonicPoly") -> Precision:
        """min_i v(a_i - b_i); None when the polynomials are equal exactly."""
        bound = None
        found = False
        for a, b in zip(self.coefficients, other.embed(self.ring).coefficients):
            difference = a - b
            if difference.is_exact and difference.is_zero():
                continue
            found = True
            bound = min_precision(bound, difference.lower_valuation())
        return bound if found else None

    def discriminant(self) -> TruncatedGradedSeries:
        """(-1)^(d(d-1)/2) Res(P, P') by the universal formula in a_1..a_d."""
        d = self.degree
        terms = _discriminant_terms(d)
        powers: Dict[Tuple[int, int], TruncatedGradedSeries] = {}

        def power(i: int, k: int) -> TruncatedGradedSeries:
            if (i, k) not in powers:
                powers[(i, k)] = self.ring.one() if k == 0 else power(i, k - 1) * self.coefficient(i)
            return powers[(i, k)]

        total = self.ring.zero()
        for monom, coefficient in terms:
            term = self.ring.constant(coefficient)
            for i, k in enumerate(monom, start=1):
                if k:
                    term = term * power(i, k)
            total = total + term
        return total

    def to_expr(self):
        z = sympy.Symbol("Z")
        d = self.degree
        return z ** d + sum((series_to_expr(self.coefficient(i)) * z ** (d - i) for i in range(1, d + 1)), sympy.Integer(0))

    def to_str(self) -> str:
        text = format_expr(self.to_expr())
        bound = self.precision
        return text if bound is None else f"{text} + O({bound})"

    def __repr__(self):
        return f"MonicPoly({self.to_str()})"


def hensel_lift_root(P: MonicPoly, r0, target: Precision, config: SolverConfig = DEFAULT_CONFIG) -> TruncatedGradedSeries:
    """
    Lift a simple root of the residue polynomial to a root of P.

    Args:
        P: Monic polynomial with coefficients of nonnegative valuation
        r0: Tower element, a simple root of the residue polynomial
        target: Requested precision

    Returns:
        y with residue r0 and P(y) = 0 modulo min(target, precision of P)
    """
    ring = P.ring
    T = ring.tower
    residue = P.residue()
    if not T.is_zero(residue.evaluate(r0)):
        raise DomainError(f"{T.to_str(r0)} is not a root of the residue polynomial")
    if T.is_zero(residue.derivative().evaluate(r0)):
        raise DomainError("Multiple residue root: split the factor with hensel_split and recurse")
    bound = min_precision(target, P.precision)
    if bound is None:
        raise DomainError("Hensel lifting of an exact polynomial needs a target precision")

    y = ring.from_value(r0)
    w = ring.from_value(T.inv(residue.derivative().evaluate(r0)))
    one = ring.one()
    value = P.evaluate(y, cap=bound)
    for step in range(config.max_hensel_iterations):
        if vanishes_to(value, bound):
            logger.debug("Hensel lift converged after %d steps to precision %s", step, bound)
            return y.truncate(bound)
        error = value.lower_valuation()
        if not value.is_zero():
            # y - P(y) w, then w + w (1 - P'(y) w) for the inverse of the slope
            cap = value.precision
            y = (y - value.multiply(w, cap)).truncate(cap).with_precision(None)
            slope = P.evaluate_derivative(y, cap=cap)
            w = (w + w.multiply(one - slope.multiply(w, cap), cap)).truncate(cap).with_precision(None)
        window = min_precision(bound, error * 2)
        value = P.evaluate(y, cap=window)
    raise BudgetExhausted(f"Hensel lifting did not reach precision {bound} in {config.max_hensel_iterations} steps")


def hensel_split(P: MonicPoly, left: UniPoly, right: UniPoly, target: Precision,
                 config: SolverConfig = DEFAULT_CONFIG) -> Tuple[MonicPoly, MonicPoly]:
    """
    Lift a coprime factorization of the residue polynomial to a factorization of P.

    Args:
        P: Monic polynomial
        left, right: Monic coprime residue factors with left * right = residue of P
        target: Requested precision

    Returns:
        (S1, S2) with S1 * S2 = P modulo the precision and residues left, right
    """
    ring = P.ring
    g, s, t = left.xgcd(right)
    if g.degree > 0:
        raise DomainError(f"Residue factors share the factor {g.to_str('Z', ring.tower.to_expr)}")
    if not left * right == P.residue():
        raise DomainError("Residue factors do not multiply to the residue polynomial")
    bound = min_precision(target, P.precision)
    if bound is None:
        raise DomainError("Factor lifting of an exact polynomial needs a target precision")

    F = SeriesPoly.from_residue(ring, left)
    G = SeriesPoly.from_residue(ring, right)
    left_series, right_series = F, G
    s_series = SeriesPoly.from_residue(ring, s)
    t_series = SeriesPoly.from_residue(ring, t)
    full = P.as_series_poly()
    for step in range(config.max_hensel_iterations):
        error = (full - F.multiply(G, bound)).truncate(bound)
        if error.vanishes_to(bound):
            logger.debug("Factor lifting converged after %d steps", step)
            return MonicPoly.from_series_poly(F.truncate(bound)), MonicPoly.from_series_poly(G.truncate(bound))
        F = (F + error.multiply(t_series, bound).mod_monic(left_series, bound)).truncate(bound)
        G = (G + error.multiply(s_series, bound).mod_monic(right_series, bound)).truncate(bound)
    raise BudgetExhausted(f"Factor lifting did not reach precision {bound} in {config.max_hensel_iterations} steps")


class PuiseuxRoot:
    """
    A root (or a group of conjugate roots) of a monic polynomial, as a series over a tower.
    """

    def __init__(self, ring: SeriesRing, expansion: TruncatedGradedSeries, count: int = 1,
                 source: Optional[MonicPoly] = None, homogeneous: Optional[HomTower] = None,
                 witness=None, back_substitution: Optional[str] = None):
        self.ring = ring
        self.expansion = expansion
        self.count = count
        self.source = source
        self.homogeneous = homogeneous
        self.witness = witness
        self.back_substitution = back_substitution

    @property
    def tower(self) -> TowerField:
        return self.ring.tower

    @property
    def precision(self) -> Precision:
        return self.expansion.precision

    def valuation(self):
        return self.expansion.valuation()

    def initial_term(self) -> str:
        if self.expansion.is_zero():
            return "0"
        return self.tower.to_str(self.expansion.initial_form())

    def tower_entries(self) -> List[Dict]:
        entries = []
        for index, level in enumerate(self.tower.levels):
            prefix = self.tower.prefix(index)
            entries.append({
                "gen": level.name,
                "minpoly": level.modulus.to_str("Z", prefix.to_expr),
                "kind": level.kind,
                "degree": level.grade.to_json() if level.grade is not None else None,
                "counted": level.counted,
                "pinned": level.pinned,
            })
        return entries

    def to_dict(self) -> Dict:
        valuation = self.valuation()
        data = {
            "count": self.count,
            "valuation": valuation.to_json() if isinstance(valuation, GradeValue) else None,
            "precision": None if self.precision is None else self.precision.to_json(),
            "tower": self.tower_entries(),
            "expansion": [{"deg": d.to_json(), "term": self.tower.to_str(v)} for d, v in self.expansion.items()],
        }
        if self.homogeneous is not None:
            data["homogeneous"] = self.homogeneous.to_dict()
        if self.witness is not None:
            data["witness"] = self.witness.to_dict()
        if self.back_substitution is not None:
            data["back_substitution"] = self.back_substitution
        return data

    def to_text(self) -> str:
        lines = [f"root (count {self.count}, valuation {self.valuation()}):"]
        lines.extend(f"  {line}" for line in self.tower.describe())
        lines.append(f"  z = {self.expansion.to_str()}")
        if self.back_substitution:
            lines.append(f"  {self.back_substitution}")
        return "\n".join(lines)

    def __repr__(self):
        return f"PuiseuxRoot({self.expansion.to_str()}, count={self.count})"


def homogeneous_certificate(ring: SeriesRing, seed: int = 0, config: SolverConfig = DEFAULT_CONFIG) -> Optional[HomTower]:
    """
    Integral homogeneous elements for the tower's homogeneous levels defined over QQ(x),
    compressed to at most N elements.
    """
    tower = ring.tower
    base_ring = ring.with_tower(TowerField(tower.base))
    elements = []
    expressions = {}
    for index, level in enumerate(tower.levels):
        if level.kind != "homogeneous":
            continue
        prefix = tower.prefix(index)
        coefficients = [prefix.as_base(c) for c in level.modulus.coeffs]
        if any(c is None for c in coefficients):
            logger.debug("Level %s depends on lower generators; kept out of the certificate", level.name)
            continue
        element = validate(UniPoly(tower.base, coefficients), level.grade, base_ring, level.name)
        if not element.integral:
            element, multiplier = integralize(element, f"{level.name}i")
            expressions[level.name] = sympy.Symbol(element.name) / tower.base.to_expr(multiplier)
        elements.append(element)
    if not elements:
        return None
    certificate = HomTower(base_ring, elements, expressions)
    if certificate.size > ring.weights.rank:
        try:
            certificate = tower_compress(certificate, seed, config)
        except DomainError as e:
            logger.warning("Tower compression skipped: %s", e)
    return certificate


def _trim_unused_levels(ring: SeriesRing, expansion: TruncatedGradedSeries) -> Tuple[SeriesRing, TruncatedGradedSeries]:
    """Drop uncounted top levels whose generator the expansion never uses."""
    tower = ring.tower
    depth = len(tower.levels)
    layers = dict(expansion.items())
    while depth and not tower.levels[depth - 1].counted:
        below = {}
        for degree, value in layers.items():
            projected = tower.prefix(depth).project(value, depth - 1)
            if projected is None:
                break
            below[degree] = projected
        else:
            layers = below
            depth -= 1
            continue
        break
    if depth == len(tower.levels):
        return ring, expansion
    logger.debug("Dropped %d unused tower levels", len(tower.levels) - depth)
    trimmed = ring.with_tower(tower.prefix(depth))
    return trimmed, trimmed.series(layers, expansion.precision)


class NewtonPuiseuxSolver:
    """
    The Newton-Puiseux recursion over a graded series ring.
    """

    def __init__(self, config: SolverConfig = DEFAULT_CONFIG, seed: int = 0):
        self.config = config
        self.seed = seed
        self._counters: Dict[str, int] = {}
        self._splits = 0

    def _fresh(self, prefix: str, tower: TowerField) -> str:
        taken = {level.name for level in tower.levels}
        while True:
            self._counters[prefix] = self._counters.get(prefix, 0) + 1
            name = f"{prefix}{self._counters[prefix]}"
            if name not in taken:
                return name

    def solve(self, P: MonicPoly, target) -> List[PuiseuxRoot]:
        """
        All roots of a squarefree monic polynomial modulo the target precision.

        Args:
            P: Monic polynomial over the base ring
            target: Requested precision (rational or GradeValue)

        Returns:
            Root groups whose counts sum to the degree
        """
        weights = P.ring.weights
        target = weights.value(target)
        if P.precision is not None and P.precision < target:
            target = P.precision
        disc = P.discriminant()
        if disc.is_exact and disc.is_zero():
            raise NotSquarefreeError("squarefree precondition violated: discriminant is zero")
        if disc.is_zero():
            raise PrecisionError(f"Discriminant vanishes modulo {disc.precision}; raise the precision")
        slack = disc.lower_valuation()
        logger.info("Solving %s to precision %s (discriminant valuation %s)", P.to_str(), target, slack)

        for attempt in range(1, self.config.max_precision_retries + 1):
            self._counters = {}
            self._splits = 0
            internal = target * self.config.precision_slack_factor + slack * attempt
            internal = min_precision(internal, P.precision)
            groups = self._solve(P, internal)
            roots = []
            for ring, expansion, multiplicity in groups:
                if multiplicity > 1 or (expansion.precision is not None and expansion.precision < target):
                    break
                if not vanishes_to(P.embed(ring).evaluate(expansion, cap=target), target):
                    break
                ring, expansion = _trim_unused_levels(ring, expansion)
                count = ring.tower.counted_degree()
                roots.append(PuiseuxRoot(ring, expansion.truncate(target), count, P,
                                         homogeneous_certificate(ring, self.seed, self.config)))
            else:
                total = sum(root.count for root in roots)
                if total != P.degree:
                    raise CertificateError(f"Root counts sum to {total}, expected {P.degree}")
                logger.info("Found %d root groups for degree %d", len(roots), P.degree)
                return roots
            logger.debug("Precision attempt %d was insufficient; retrying", attempt)
        raise PrecisionError(f"Roots could not be separated to precision {target}")

    def _solve(self, P: MonicPoly, target: GradeValue) -> List[Tuple[SeriesRing, TruncatedGradedSeries, int]]:
        ring = P.ring
        try:
            return self._solve_unsplit(P, target)
        except ZeroDivisorFound as found:
            index = next((i for i, level in enumerate(ring.tower.levels) if level is found.level), None)
            if index is None:
                raise
            self._count_split()
            level = ring.tower.levels[index]
            left, right = ring.tower.split(index, found.factor)
            branches = [left] if level.pinned else [left, right]
            logger.debug("Zero divisor at %s: following %d branch(es)", level.name, len(branches))
            results = []
            for branch in branches:
                results.extend(self._solve(P.embed(ring.with_tower(branch)), target))
            return results

    def _solve_unsplit(self, P: MonicPoly, target: GradeValue):
        ring = P.ring
        T = ring.tower
        d = P.degree
        if d == 1:
            return [(ring, (-P.coefficient(1)).truncate(target), 1)]

        shift = -_scale_rational(P.coefficient(1), Fraction(1, d))
        shifted = P.shift(shift)

        exact: List[Tuple[GradeValue, int]] = []
        bounds: List[GradeValue] = []
        for i in range(2, d + 1):
            a = shifted.coefficient(i)
            if a.is_zero():
                if not a.is_exact:
                    bounds.append(a.precision / i)
                continue
            exact.append((a.lower_valuation() / i, i))
        if not exact and not bounds:
            raise NotSquarefreeError("squarefree precondition violated: all roots coincide")
        lowest_bound = min(bounds) if bounds else None
        lam = min(v for v, _ in exact) if exact else None
        if lam is None or (lowest_bound is not None and lowest_bound < lam):
            if lowest_bound is not None and not lowest_bound < target:
                return [(ring, shift.truncate(target), d)]
            raise PrecisionError("Precision too low to determine the Newton polygon")
        if not lam < target:
            return [(ring, shift.truncate(target), d)]
        i0 = min(i for v, i in exact if v == lam)
        w = T.neg(shifted.coefficient(i0).initial_form())

        extended, gamma = self._adjoin_gamma(ring, w, i0, lam)
        while True:
            try:
                return self._rescaled(shifted.embed(extended), gamma, lam, shift, target)
            except ZeroDivisorFound as found:
                levels = extended.tower.levels
                index = next((i for i, level in enumerate(levels) if level is found.level), None)
                if index is None or index < len(T.levels):
                    raise
                self._count_split()
                left, _ = extended.tower.split(index, found.factor)
                gamma = left.convert(gamma, extended.tower)
                extended = extended.with_tower(left)
                logger.debug("Pinned level %s split; keeping the first branch", levels[index].name)

    def _count_split(self):
        self._splits += 1
        if self._splits > self.config.max_zero_divisor_splits:
            raise BudgetExhausted(f"More than {self.config.max_zero_divisor_splits} dynamic-evaluation splits")

    def _adjoin_gamma(self, ring: SeriesRing, w, k: int, lam: GradeValue):
        """Adjoin gamma with gamma^k = w, extracting perfect powers first."""
        T = ring.tower
        base_w = T.as_base(w)
        tower = T
        if base_w is not None:
            e, c, u = perfect_power_part(base_w, k, T.base)
            c_root = rational_root(c, e)
            if c_root is not None:
                c_value = tower.from_fraction(c_root)
            else:
                constant = UniPoly(RationalField(), [-c] + [Fraction(0)] * (e - 1) + [Fraction(1)])
                factor = factor_rational_univariate(constant, self.config.factor_degree_bound)[0]
                if factor.degree == 1:
                    c_value = tower.from_fraction(-factor.coeffs[0])
                else:
                    name = self._fresh("c", tower)
                    modulus = UniPoly(tower.top, [tower.from_fraction(a) for a in factor.coeffs])
                    tower = tower.adjoin_root(name, modulus, "number", pinned=True)
                    c_value = tower.generator(name)
            inner = tower.mul(c_value, tower.from_base(u))
            m = k // e
        else:
            inner, m = w, k
        if m == 1:
            return ring.with_tower(tower), inner
        name = self._fresh("g", tower)
        kind = "residue" if lam.is_zero() else "homogeneous"
        modulus = UniPoly(tower.top, [tower.neg(inner)] + [tower.zero()] * (m - 1) + [tower.one()])
        tower = tower.adjoin_root(name, modulus, kind, grade=lam if kind == "homogeneous" else None, pinned=True)
        return ring.with_tower(tower), tower.generator(name)

    def _rescaled(self, P: MonicPoly, gamma, lam: GradeValue, shift: TruncatedGradedSeries, target: GradeValue):
        ring = P.ring
        T = ring.tower
        inverse = T.inv(gamma)
        power = T.one()
        coefficients = []
        for i in range(1, P.degree + 1):
            power = T.mul(power, inverse)
            coefficients.append(P.coefficient(i).scale_homogeneous(power, -(lam * i)))
        S = MonicPoly(ring, coefficients)
        residue = S.residue()
        sub_target = target - lam

        groups = []
        for factor, multiplicity in self._residue_factors(residue, T):
            for branch_ring, y, count in self._branch(S, residue, factor, multiplicity, sub_target):
                image = branch_ring.tower.convert(gamma, T)
                z = y.scale_homogeneous(image, lam) + shift.embed(branch_ring)
                groups.append((branch_ring, z.truncate(target), count))
        return groups

    def _residue_factors(self, residue: UniPoly, T: TowerField) -> List[Tuple[UniPoly, int]]:
        result = []
        for part, multiplicity in squarefree_decomposition(residue):
            rational = [T.as_rational(c) for c in part.coeffs]
            if all(c is not None for c in rational):
                seen = []
                for factor in factor_rational_univariate(UniPoly(RationalField(), rational), self.config.factor_degree_bound):
                    if factor not in seen:
                        seen.append(factor)
                        result.append((UniPoly(T.top, [T.from_fraction(c) for c in factor.coeffs]), multiplicity))
                continue
            if T.is_zero(part.coeff(0)):
                result.append((UniPoly.variable(T.top), multiplicity))
                part = part.exquo(UniPoly.variable(T.top))
            if part.degree >= 1:
                result.append((part, multiplicity))
        return result

    def _branch(self, S: MonicPoly, residue: UniPoly, factor: UniPoly, multiplicity: int, target: GradeValue):
        ring = S.ring
        T = ring.tower
        if factor.degree == 1:
            return self._branch_at(S, residue, ring, T.neg(factor.coeff(0)), multiplicity, target)
        name = self._fresh("r", T)
        tower = T.adjoin_root(name, factor, "residue", counted=True)
        return self._branch_over(S, residue, ring.with_tower(tower), name, multiplicity, target)

    def _branch_over(self, S: MonicPoly, residue: UniPoly, branch_ring: SeriesRing, name: str,
                     multiplicity: int, target: GradeValue):
        tower = branch_ring.tower
        try:
            return self._branch_at(S, residue, branch_ring, tower.generator(name), multiplicity, target)
        except ZeroDivisorFound as found:
            if found.level is not tower.levels[-1]:
                raise
            self._count_split()
            results = []
            for piece in tower.split(len(tower.levels) - 1, found.factor):
                results.extend(self._branch_over(S, residue, branch_ring.with_tower(piece), name, multiplicity, target))
            return results

    def _branch_at(self, S: MonicPoly, residue: UniPoly, branch_ring: SeriesRing, r0, multiplicity: int,
                   target: GradeValue):
        T = S.ring.tower
        local_S = S.embed(branch_ring)
        B = branch_ring.tower
        if multiplicity == 1:
            return [(branch_ring, hensel_lift_root(local_S, r0, target, self.config), 1)]

        local = UniPoly(B.top, [B.neg(r0), B.one()]) ** multiplicity
        lifted_residue = residue.map(lambda c: B.convert(c, T), B.top)
        cofactor = lifted_residue.exquo(local)
        if cofactor.degree == 0:
            piece = local_S
        else:
            piece, _ = hensel_split(local_S, local, cofactor, target, self.config)
        return self._solve(piece, target)


def newton_puiseux_roots(P: MonicPoly, target, seed: int = 0, config: SolverConfig = DEFAULT_CONFIG) -> List[PuiseuxRoot]:
    """
    Roots of a squarefree monic polynomial as series over towers of homogeneous elements.

    Args:
        P: Monic polynomial over the base series ring
        target: Requested precision
        seed: Drives the choice of compression constants

    Returns:
        PuiseuxRoot groups, counts summing to deg P
    """
    return NewtonPuiseuxSolver(config, seed).solve(P, target)


def stability_threshold(P: MonicPoly) -> GradeValue:
    """c = (d/2) * v(discriminant)."""
    disc = P.discriminant()
    if disc.is_zero():
        if disc.is_exact:
            raise NotSquarefreeError("squarefree precondition violated: discriminant is zero")
        raise PrecisionError(f"Discriminant valuation undetermined modulo {disc.precision}")
    return disc.lower_valuation() * Fraction(P.degree, 2)


def _largest_root_valuation(Q: MonicPoly) -> Optional[GradeValue]:
    """Largest root valuation of a monic polynomial, read off its last Newton edge."""
    d = Q.degree
    if d == 0:
        return None
    last = Q.coefficient(d)
    if last.is_zero():
        raise PrecisionError("Constant coefficient vanishes to precision; roots are not separated")
    v_last = last.lower_valuation()
    best = None
    for j in range(d):
        a = Q.coefficient(j)
        if a.is_zero():
            continue
        slope = (v_last - a.lower_valuation()) / (d - j)
        best = slope if best is None or slope < best else best
    return best


def root_separation(P: MonicPoly, roots: Sequence[PuiseuxRoot]) -> Optional[GradeValue]:
    """max over pairs of roots of v(z_i - z_j), from the Newton polygon of P(Z + z)/Z."""
    if P.degree < 2:
        return None
    best = None
    for root in roots:
        shifted = P.embed(root.ring).shift(root.expansion)
        deflated = MonicPoly(root.ring, shifted.coefficients[:-1])
        value = _largest_root_valuation(deflated)
        if value is not None and (best is None or best < value):
            best = value
    return best


def _level_norm(poly: SeriesPoly, tower: TowerField, depth: int, ring_below: SeriesRing) -> SeriesPoly:
    """Norm of a polynomial from level `depth` down to level depth-1."""
    level = tower.levels[depth - 1]
    q = level.degree
    grade = level.grade if level.grade is not None else ring_below.weights.zero()

    def component(series: TruncatedGradedSeries, j: int) -> TruncatedGradedSeries:
        layers = {degree - grade * j: value[j] for degree, value in series.items()}
        return TruncatedGradedSeries(ring_below, layers, add_precision(series.precision, -(grade * j)))

    parts = [SeriesPoly(ring_below, [component(c, j) for c in poly.coeffs]) for j in range(q)]
    powers = [level.one()]
    for _ in range(2 * q - 2):
        powers.append(level.mul(powers[-1], level.generator()))

    matrix = []
    for r in range(q):
        row = []
        for c in range(q):
            entry = SeriesPoly(ring_below, [])
            for j in range(q):
                coordinate = powers[j + c][r]
                if level.below.is_zero(coordinate):
                    continue
                factor = TruncatedGradedSeries(ring_below, {grade * (j + c - r): coordinate})
                entry = entry + parts[j].scale(factor)
            row.append(entry)
        matrix.append(row)
    return _determinant(matrix, ring_below)


def _determinant(matrix: List[List[SeriesPoly]], ring: SeriesRing) -> SeriesPoly:
    size = len(matrix)
    if size == 1:
        return matrix[0][0]
    total = SeriesPoly(ring, [])
    for c in range(size):
        minor = [row[:c] + row[c + 1:] for row in matrix[1:]]
        term = matrix[0][c].multiply(_determinant(minor, ring))
        total = total + term if c % 2 == 0 else total - term
    return total


def _involves(series: TruncatedGradedSeries, level: ExtensionField) -> bool:
    return any(level.as_below(value) is None for _, value in series.items())


def completion_factors(P: MonicPoly, roots: Sequence[PuiseuxRoot]) -> List[MonicPoly]:
    """
    Irreducible factors of P over the graded completion, as norms of Z - z.

    Returns:
        Distinct monic factors whose degrees sum to deg P
    """
    factors: List[MonicPoly] = []
    for root in roots:
        tower = root.tower
        poly = SeriesPoly(root.ring, [-root.expansion, root.ring.one()])
        for depth in range(len(tower.levels), 0, -1):
            level = tower.levels[depth - 1]
            ring_below = root.ring.with_tower(tower.prefix(depth - 1))
            if any(_involves(c, level) for c in poly.coeffs):
                poly = _level_norm(poly, tower, depth, ring_below)
            else:
                poly = SeriesPoly(ring_below, [c.map_values(level.as_below, ring_below) for c in poly.coeffs])
        factor = MonicPoly.from_series_poly(poly)
        if not any(factor.agrees_with(f) for f in factors):
            factors.append(factor)
    total = sum(f.degree for f in factors)
    if total != P.degree:
        raise CertificateError(f"Completion factors have total degree {total}, expected {P.degree}")
    return factors


class FactorMatch:
    """A factor of P paired with the factor of a perturbation Q."""

    def __init__(self, p_factor: MonicPoly, q_factor: MonicPoly, closeness: Precision):
        self.p_factor = p_factor
        self.q_factor = q_factor
        self.closeness = closeness

    def to_dict(self) -> Dict:
        return {
            "p_factor": self.p_factor.to_str(),
            "q_factor": self.q_factor.to_str(),
            "degree": self.p_factor.degree,
            "closeness": "infinity" if self.closeness is None else self.closeness.to_json(),
        }


def transfer_factorization(P: MonicPoly, Q: MonicPoly, roots: Sequence[PuiseuxRoot],
                           seed: int = 0, config: SolverConfig = DEFAULT_CONFIG) -> List[FactorMatch]:
    """
    Transfer the completion factorization of P to a close polynomial Q.

    Args:
        P: Squarefree monic polynomial
        Q: Monic polynomial of the same degree
        roots: Roots of P

    Returns:
        One FactorMatch per irreducible factor of P

    Raises:
        HypothesisError: if min v(a_i - b_i) <= d * max v(z_i - z_j)
    """
    d = P.degree
    if Q.degree != d:
        raise DomainError(f"Degrees differ: {d} and {Q.degree}")
    p_factors = completion_factors(P, roots)
    distance = P.closeness(Q)
    if distance is None:
        return [FactorMatch(f, f, None) for f in p_factors]

    separation = root_separation(P, roots)
    if separation is not None and not separation * d < distance:
        raise HypothesisError(
            f"min v(a_i - b_i) = {distance} does not exceed d * max v(z_i - z_j) = {separation * d}",
            distance=distance.to_json(), bound=(separation * d).to_json(),
        )
    precision = None
    for root in roots:
        precision = min_precision(precision, root.precision)
    q_roots = newton_puiseux_roots(Q, precision, seed, config)
    q_factors = completion_factors(Q, q_roots)

    required = distance / d
    matches = []
    available = list(q_factors)
    for factor in p_factors:
        candidates = [(f.closeness(factor), f) for f in available if f.degree == factor.degree]
        if not candidates:
            raise CertificateError(f"No factor of degree {factor.degree} in the perturbation")
        closeness, best = max(candidates, key=lambda pair: (pair[0] is None, pair[0] if pair[0] is not None else 0))
        if closeness is not None and closeness < required:
            raise CertificateError(f"Closest factor is at {closeness}, below {required}")
        available.remove(best)
        matches.append(FactorMatch(factor, best, closeness))
    logger.info("Transferred %d factor(s) at distance %s", len(matches), distance)
    return matches


def stable_tower(P: MonicPoly, roots: Optional[Sequence[PuiseuxRoot]] = None, target=None,
                 seed: int = 0, config: SolverConfig = DEFAULT_CONFIG) -> Tuple[HomTower, GradeValue]:
    """
    A tower hosting the roots of P and of every Q within the returned threshold.

    Returns:
        (homogeneous tower, c) with c = max((d/2) v(disc), d * max v(gamma))
    """
    threshold = stability_threshold(P)
    if roots is None:
        roots = newton_puiseux_roots(P, target if target is not None else config.default_precision, seed, config)
    base_ring = P.ring.with_tower(TowerField(P.ring.tower.base))
    elements, names = [], set()
    for root in roots:
        if root.homogeneous is None:
            continue
        for element in root.homogeneous.elements:
            key = element.polynomial_str()
            if key not in names:
                names.add(key)
                elements.append(element)
    guard = P.ring.weights.zero()
    for element in elements:
        if guard < element.degree:
            guard = element.degree
    c = threshold if not threshold < guard * P.degree else guard * P.degree
    return HomTower(base_ring, elements), c


def conjugate_roots(root: PuiseuxRoot) -> List[PuiseuxRoot]:
    """
    Expand a root group into explicit roots by splitting its last counted level.
    """
    tower = root.tower
    indices = [i for i, level in enumerate(tower.levels) if level.counted]
    if not indices:
        return [root]
    index = indices[-1]
    level = tower.levels[index]
    split = tower.prefix(index + 1)
    values = [split.generator(level.name)]
    remaining = UniPoly(split.top, [split.lift(c, index) for c in level.modulus.coeffs])
    remaining = remaining.exquo(UniPoly(split.top, [split.neg(values[0]), split.one()]))
    j = 1
    while remaining.degree > 0:
        j += 1
        if remaining.degree == 1:
            values.append(split.neg(remaining.coeff(0)))
            break
        depth = len(split.levels)
        split = split.adjoin_root(f"{level.name}_{j}", remaining, "residue")
        values = [split.lift(v, depth) for v in values]
        new = split.generator(f"{level.name}_{j}")
        values.append(new)
        remaining = remaining.map(lambda c: split.lift(c, depth), split.top)
        remaining = remaining.exquo(UniPoly(split.top, [split.neg(new), split.one()]))

    results = []
    for j, value in enumerate(values, start=1):
        target = split
        images = {index: value}
        for position in range(index + 1, len(tower.levels)):
            upper = tower.levels[position]
            source = tower.prefix(position)
            modulus = UniPoly(target.top, [target.transport(c, source, images) for c in upper.modulus.coeffs])
            name = upper.name if j == 1 else f"{upper.name}_{j}"
            depth = len(target.levels)
            target = TowerField(target.base, target.levels + (
                ExtensionField(target.top, name, modulus, upper.kind, upper.grade, upper.counted, upper.pinned),))
            images = {i: target.lift(v, depth) for i, v in images.items()}
            images[position] = target.generator(name)
        ring = root.ring.with_tower(target)
        expansion = root.expansion.map_values(lambda v: target.transport(v, tower, images), ring)
        results.append(PuiseuxRoot(ring, expansion, root.count // level.degree, root.source, root.homogeneous))
    return results


def scale_nonmonic(coefficients: Sequence, ring: SeriesRing, precision: Precision = None) -> Tuple[MonicPoly, object]:
    """
    Make a polynomial monic: Q(Z) = a^(d-1) P(Z/a) for the leading coefficient a.

    Args:
        coefficients: Expressions from the leading coefficient down to the constant term

    Returns:
        (Q, a) where roots of P are w / a for roots w of Q
    """
    leading = sympy.sympify(coefficients[0])
    if leading == 0:
        raise DomainError("Leading coefficient is zero")
    scaled = [sympy.expand(sympy.sympify(c) * leading ** (i - 1)) for i, c in enumerate(coefficients) if i > 0]
    return MonicPoly(ring, [ring.from_expr(c, precision) for c in scaled]), leading


def unscale_root(root: PuiseuxRoot, leading) -> PuiseuxRoot:
    """Back-substitute z = w / a, dividing in the valuation ring when possible."""
    note = f"z = w/({format_expr(leading)})"
    divisor = root.ring.from_expr(leading)
    try:
        expansion = root.expansion.divide(divisor, root.precision)
    except DomainError:
        return PuiseuxRoot(root.ring, root.expansion, root.count, root.source, root.homogeneous,
                           root.witness, note + " (w shown)")
    return PuiseuxRoot(root.ring, expansion, root.count, root.source, root.homogeneous, root.witness, note)


def roots_frame(roots: Sequence[PuiseuxRoot]) -> pd.DataFrame:
    """One row per root group."""
    rows = []
    for index, root in enumerate(roots):
        rows.append({
            "index": index,
            "count": root.count,
            "valuation": str(root.valuation()),
            "initial_term": root.initial_term(),
            "tower_size": len(root.tower.levels),
            "precision": str(root.precision),
        })
    return pd.DataFrame(rows, columns=["index", "count", "valuation", "initial_term", "tower_size", "precision"])
