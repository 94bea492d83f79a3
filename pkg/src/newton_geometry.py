"""
Newton polygons, discriminant tests and cone checks for monic polynomials over graded series.
"""

import itertools
import logging
from fractions import Fraction
from functools import reduce
from math import gcd
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd
import sympy

from .config import DEFAULT_CONFIG, SolverConfig
from .errors import CertificateError, DomainError, HypothesisError, PrecisionError
from .graded_series import ExponentVector, SeriesRing, TruncatedGradedSeries
from .homogeneous import exponent_support
from .puiseux_solver import MonicPoly, PuiseuxRoot, completion_factors, newton_puiseux_roots
from .tower_arithmetic import TowerField, format_expr
from .weights import GradeValue, Weights

logger = logging.getLogger(__name__)

Point = Tuple[int, GradeValue]


def _slope(a: Point, b: Point) -> GradeValue:
    return (b[1] - a[1]) / (b[0] - a[0])


class NewtonPolygon:
    """
    Lower convex hull of the points (j, v(a_j)), with a_0 = 1 at (0, 0).
    Edge slopes are root valuations and edge lengths their counts.
    """

    def __init__(self, points: Sequence[Point], degree: int):
        self.points = sorted(points, key=lambda p: p[0])
        self.degree = degree
        self.vertices = self._lower_hull()

    def _lower_hull(self) -> List[Point]:
        # Monotone chain
        vertices: List[Point] = []
        for point in self.points:
            while len(vertices) >= 2 and not _slope(vertices[-2], vertices[-1]) < _slope(vertices[-1], point):
                vertices.pop()
            vertices.append(point)
        return vertices

    @property
    def edges(self) -> List[Tuple[GradeValue, int]]:
        return [(_slope(a, b), b[0] - a[0]) for a, b in zip(self.vertices, self.vertices[1:])]

    def value_at(self, j: int) -> Optional[GradeValue]:
        """Height of the hull above abscissa j."""
        for a, b in zip(self.vertices, self.vertices[1:]):
            if a[0] <= j <= b[0]:
                return a[1] + _slope(a, b) * (j - a[0])
        return None

    def root_valuations(self) -> List[GradeValue]:
        """Slopes repeated by edge length."""
        result = []
        for slope, length in self.edges:
            result.extend([slope] * length)
        return result

    def to_frame(self) -> pd.DataFrame:
        on_hull = {p[0] for p in self.vertices}
        rows = [{
            "j": j,
            "valuation": str(v),
            "valuation_float": v.to_float(),
            "on_hull": j in on_hull,
        } for j, v in self.points]
        return pd.DataFrame(rows, columns=["j", "valuation", "valuation_float", "on_hull"])

    def edges_frame(self) -> pd.DataFrame:
        rows = [{
            "slope": str(slope),
            "length": length,
            "start": a[0],
            "end": b[0],
        } for (slope, length), a, b in zip(self.edges, self.vertices, self.vertices[1:])]
        return pd.DataFrame(rows, columns=["slope", "length", "start", "end"])

    def to_dict(self) -> Dict:
        return {
            "degree": self.degree,
            "points": [{"j": j, "valuation": v.to_json()} for j, v in self.points],
            "vertices": [{"j": j, "valuation": v.to_json()} for j, v in self.vertices],
            "edges": [{"slope": s.to_json(), "length": n} for s, n in self.edges],
        }

    def to_text(self) -> str:
        lines = [f"Newton polygon of degree {self.degree}"]
        lines.append("vertices: " + ", ".join(f"({j}, {v})" for j, v in self.vertices))
        for slope, length in self.edges:
            lines.append(f"edge: slope {slope}, length {length}")
        return "\n".join(lines)

    def to_svg(self, width: int = 480, height: int = 360, margin: int = 40) -> str:
        """The points, the hull and a slope label per edge."""
        xs = [j for j, _ in self.points]
        ys = [v.to_float() for _, v in self.points]
        span_x = max(max(xs) - min(xs), 1)
        span_y = max(max(ys) - min(ys), 1.0)

        def place(j: int, v: GradeValue) -> Tuple[float, float]:
            x = margin + (j - min(xs)) * (width - 2 * margin) / span_x
            y = height - margin - (v.to_float() - min(ys)) * (height - 2 * margin) / span_y
            return round(x, 2), round(y, 2)

        parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
                 f'viewBox="0 0 {width} {height}">']
        parts.append(f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" y2="{height - margin}" stroke="#999"/>')
        parts.append(f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="#999"/>')
        hull = " ".join(f"{x},{y}" for x, y in (place(j, v) for j, v in self.vertices))
        parts.append(f'<polyline points="{hull}" fill="none" stroke="#1f77b4" stroke-width="2"/>')
        vertex_set = {j for j, _ in self.vertices}
        for j, v in self.points:
            x, y = place(j, v)
            fill = "#1f77b4" if j in vertex_set else "#ffffff"
            parts.append(f'<circle cx="{x}" cy="{y}" r="4" fill="{fill}" stroke="#1f77b4"/>')
            parts.append(f'<text x="{x}" y="{height - margin + 16}" font-size="11" text-anchor="middle">{j}</text>')
        for (slope, length), a, b in zip(self.edges, self.vertices, self.vertices[1:]):
            (x1, y1), (x2, y2) = place(*a), place(*b)
            parts.append(f'<text x="{round((x1 + x2) / 2, 2)}" y="{round((y1 + y2) / 2 - 8, 2)}" font-size="12" '
                         f'text-anchor="middle">slope {slope}, length {length}</text>')
        parts.append("</svg>")
        return "\n".join(parts)

    def __repr__(self):
        return f"NewtonPolygon(edges={[(str(s), n) for s, n in self.edges]})"


def newton_polygon(P: MonicPoly) -> NewtonPolygon:
    """
    Newton polygon of P with respect to the ring's weights.

    Raises:
        PrecisionError: if a coefficient known only as a lower bound could touch the hull
    """
    points: List[Point] = [(0, P.ring.weights.zero())]
    bounds: List[Point] = []
    for j in range(1, P.degree + 1):
        a = P.coefficient(j)
        if a.is_zero():
            if not a.is_exact:
                bounds.append((j, a.precision))
            continue
        points.append((j, a.lower_valuation()))
    if points[-1][0] != P.degree:
        raise PrecisionError("Constant coefficient undetermined: the polygon has no last vertex")
    polygon = NewtonPolygon(points, P.degree)
    for j, bound in bounds:
        height = polygon.value_at(j)
        if height is None or not height < bound:
            raise PrecisionError(f"Coefficient a_{j} is zero modulo {bound}; raise the precision")
    logger.debug("Newton polygon with %d edge(s)", len(polygon.edges))
    return polygon


class EdgeTest:
    """Outcome of the one-edge test."""

    def __init__(self, polygon: NewtonPolygon, factors: List[MonicPoly]):
        self.polygon = polygon
        self.factors = factors

    @property
    def consistent(self) -> bool:
        return len(self.polygon.edges) <= 1

    def to_dict(self) -> Dict:
        return {
            "consistent_with_irreducible": self.consistent,
            "edges": [{"slope": s.to_json(), "length": n} for s, n in self.polygon.edges],
            "factors": [f.to_str() for f in self.factors],
        }


def single_edge_test(P: MonicPoly, target=None, roots: Optional[Sequence[PuiseuxRoot]] = None,
                     seed: int = 0, config: SolverConfig = DEFAULT_CONFIG) -> EdgeTest:
    """
    One edge is necessary for irreducibility over the completion.
    With several edges, return the factorization obtained by grouping roots per edge.
    """
    polygon = newton_polygon(P)
    if len(polygon.edges) <= 1:
        return EdgeTest(polygon, [])
    if roots is None:
        roots = newton_puiseux_roots(P, target if target is not None else config.default_precision, seed, config)

    groups: Dict[GradeValue, List[MonicPoly]] = {}
    for factor in completion_factors(P, roots):
        slope = factor.coefficient(factor.degree).lower_valuation() / factor.degree
        groups.setdefault(slope, []).append(factor)
    factors = []
    for slope, length in polygon.edges:
        members = groups.get(slope, [])
        if sum(f.degree for f in members) != length:
            raise CertificateError(f"Root valuations do not match the edge of slope {slope}")
        product = members[0]
        for member in members[1:]:
            product = product * member
        factors.append(product)

    rebuilt = factors[0]
    for factor in factors[1:]:
        rebuilt = rebuilt * factor
    if not rebuilt.agrees_with(P.embed(rebuilt.ring)):
        raise CertificateError("Edge factors do not multiply back to P")
    logger.info("Polynomial splits along %d edges", len(factors))
    return EdgeTest(polygon, factors)


def discriminant(P: MonicPoly) -> TruncatedGradedSeries:
    """(-1)^(d(d-1)/2) Res(P, P')."""
    disc = P.discriminant()
    if disc.is_zero() and not disc.is_exact:
        raise PrecisionError(f"Discriminant vanishes modulo {disc.precision}; raise the precision")
    return disc


def _monomial(expression, symbols) -> Optional[Tuple[Fraction, Tuple[int, ...]]]:
    numerator, denominator = sympy.fraction(sympy.together(expression))
    if not denominator.is_number:
        return None
    terms = sympy.Poly(numerator, *symbols).terms()
    if len(terms) != 1:
        return None
    monom, coefficient = terms[0]
    value = sympy.Rational(coefficient) / sympy.Rational(denominator)
    return Fraction(int(value.p), int(value.q)), monom


def _divide_layers(series: TruncatedGradedSeries, divisor, degree: GradeValue) -> Optional[TruncatedGradedSeries]:
    """series / divisor if every quotient layer is a polynomial, else None."""
    field = series.tower.base
    inverse = field.inv(divisor)
    layers = {}
    for d, value in series.items():
        quotient = field.mul(value, inverse)
        if not quotient.denom.is_ground:
            return None
        layers[d - degree] = quotient
    precision = None if series.precision is None else series.precision - degree
    return TruncatedGradedSeries(series.ring, layers, precision)


class QuasiOrdinaryResult:
    """Discriminant = x^beta * unit, or the reason it is not."""

    def __init__(self, beta: Optional[ExponentVector], unit: Optional[TruncatedGradedSeries],
                 obstruction: Optional[str], precision):
        self.beta = beta
        self.unit = unit
        self.obstruction = obstruction
        self.precision = precision

    @property
    def is_quasi_ordinary(self) -> bool:
        return self.obstruction is None

    def to_dict(self) -> Dict:
        return {
            "quasi_ordinary": self.is_quasi_ordinary,
            "beta": self.beta.to_json() if self.beta is not None else None,
            "unit": self.unit.to_str() if self.unit is not None else None,
            "obstruction": self.obstruction,
            "precision": None if self.precision is None else self.precision.to_json(),
        }


def quasi_ordinary_test(P: MonicPoly) -> QuasiOrdinaryResult:
    """Check that the discriminant is a monomial times a unit, up to its precision."""
    ring = P.ring
    if ring.tower.levels:
        raise DomainError("Quasi-ordinary test needs coefficients over QQ(x)")
    disc = discriminant(P)
    if disc.is_zero():
        return QuasiOrdinaryResult(None, None, "discriminant is zero", disc.precision)
    lowest = disc.lower_valuation()
    field = ring.tower.base
    found = _monomial(field.to_expr(disc.initial_form()), field.symbols)
    if found is None:
        return QuasiOrdinaryResult(None, None, f"lowest layer {format_expr(field.to_expr(disc.initial_form()))} "
                                   f"is not a monomial", disc.precision)
    _, beta = found
    unit = _divide_layers(disc, field.monomial(beta), lowest)
    if unit is None:
        return QuasiOrdinaryResult(ExponentVector(beta), None, "cofactor of the lowest monomial is not a power series",
                                   disc.precision)
    return QuasiOrdinaryResult(ExponentVector(beta), unit, None, disc.precision)


def _generic_copy(P: MonicPoly) -> MonicPoly:
    weights = P.ring.weights
    if weights.rank == weights.n:
        return P
    if P.precision is not None:
        raise DomainError("Switching to independent weights needs exact coefficients")
    generic = Weights.generic(weights.n, weights.variables)
    ring = SeriesRing(generic, TowerField(P.ring.tower.base))
    return MonicPoly.from_expr(P.to_expr(), ring)


class AJResult:
    """Roots of a quasi-ordinary polynomial with their exponents certified in (1/q) N^n."""

    def __init__(self, roots: List[PuiseuxRoot], q: int, exponents: List[List[ExponentVector]]):
        self.roots = roots
        self.q = q
        self.exponents = exponents

    def to_dict(self) -> Dict:
        return {
            "q": self.q,
            "roots": [root.to_dict() for root in self.roots],
            "exponents": [[e.to_json() for e in vectors] for vectors in self.exponents],
        }


def root_exponents(root: PuiseuxRoot) -> List[ExponentVector]:
    """Exponent vectors of every layer of a root over a binomial tower."""
    vectors = set()
    for _, value in root.expansion.items():
        vectors.update(exponent_support(value, root.tower, root.ring.variables))
    return sorted(vectors)


def aj_roots(P: MonicPoly, target, seed: int = 0, config: SolverConfig = DEFAULT_CONFIG) -> AJResult:
    """
    Roots of a quasi-ordinary polynomial as fractional power series.
    Weights with relations are replaced by independent ones so that every
    homogeneous element is a monomial.

    Raises:
        HypothesisError: if P is not quasi-ordinary
        CertificateError: if an exponent falls outside (1/q) N^n
    """
    test = quasi_ordinary_test(P)
    if not test.is_quasi_ordinary:
        raise HypothesisError(f"Not quasi-ordinary: {test.obstruction}")
    generic = _generic_copy(P)
    roots = newton_puiseux_roots(generic, target, seed, config)
    q = 1
    exponents = []
    for root in roots:
        vectors = root_exponents(root)
        for vector in vectors:
            if not vector.is_nonnegative():
                raise CertificateError(f"Exponent {vector.to_json()} has a negative entry")
            q = q * vector.denominator // gcd(q, vector.denominator)
        exponents.append(vectors)
    logger.info("Abhyankar-Jung roots certified with q = %d", q)
    return AJResult(roots, q, exponents)


class WeightedDiscriminant:
    """Discriminant = delta * unit with delta homogeneous, or None."""

    def __init__(self, delta, unit: Optional[TruncatedGradedSeries], precision):
        self.delta = delta
        self.unit = unit
        self.precision = precision

    @property
    def holds(self) -> bool:
        return self.unit is not None

    def to_dict(self) -> Dict:
        return {
            "holds": self.holds,
            "delta": format_expr(self.delta) if self.delta is not None else None,
            "unit": self.unit.to_str() if self.unit is not None else None,
            "precision": None if self.precision is None else self.precision.to_json(),
        }


def weighted_disc_check(P: MonicPoly) -> WeightedDiscriminant:
    """The lowest layer of the discriminant, when the cofactor is a unit up to precision."""
    ring = P.ring
    if ring.tower.levels:
        raise DomainError("Weighted discriminant check needs coefficients over QQ(x)")
    disc = discriminant(P)
    if disc.is_zero():
        return WeightedDiscriminant(None, None, disc.precision)
    field = ring.tower.base
    delta = disc.initial_form()
    if not delta.denom.is_ground:
        return WeightedDiscriminant(field.to_expr(delta), None, disc.precision)
    unit = _divide_layers(disc, delta, disc.lower_valuation())
    return WeightedDiscriminant(field.to_expr(delta), unit, disc.precision)


class BoundedDenominator:
    """A homogeneous c(x) clearing every layer denominator of the roots, with the candidates tried."""

    def __init__(self, c, tried: List):
        self.c = c
        self.tried = tried

    @property
    def found(self) -> bool:
        return self.c is not None

    def to_dict(self) -> Dict:
        return {
            "found": self.found,
            "c": format_expr(self.c) if self.c is not None else None,
            "tried": [format_expr(t) for t in self.tried],
        }


def bounded_denominator_check(roots: Sequence[PuiseuxRoot]) -> BoundedDenominator:
    """
    Search a single homogeneous c(x) with c * (every tower coordinate of every layer) polynomial.
    Candidates: 1, products of level discriminants by increasing degree, then the lcm of
    the observed denominators.
    """
    if not roots:
        return BoundedDenominator(sympy.Integer(1), [])
    field = roots[0].tower.base
    symbols = field.symbols
    denominators = []
    discriminants = []
    for root in roots:
        tower = root.tower
        for _, value in root.expansion.items():
            for component in tower.flatten(value):
                denominator = sympy.Poly(field.to_expr(component).as_numer_denom()[1], *symbols, domain="QQ")
                if not denominator.is_ground:
                    denominators.append(denominator.monic())
        for index, level in enumerate(tower.levels):
            if level.kind != "homogeneous":
                continue
            prefix = tower.prefix(index)
            coefficients = [prefix.as_base(c) for c in level.modulus.coeffs]
            if any(c is None for c in coefficients):
                continue
            z = sympy.Symbol("Z")
            modulus = sum((field.to_expr(c) * z ** k for k, c in enumerate(coefficients)), sympy.Integer(0))
            numerator = sympy.fraction(sympy.together(sympy.discriminant(modulus, z)))[0]
            if numerator.free_symbols:
                discriminants.append(sympy.Poly(numerator, *symbols).primitive()[1].as_expr())

    def clears(candidate) -> bool:
        poly = sympy.Poly(candidate, *symbols, domain="QQ")
        return all(poly.rem(d).is_zero for d in denominators)

    def homogeneous(candidate) -> bool:
        ring = roots[0].ring.with_tower(TowerField(field))
        try:
            ring.degree(field.from_expr(candidate))
        except DomainError:
            return False
        return True

    candidates = [sympy.Integer(1)]
    for size in range(1, len(discriminants) + 1):
        for subset in itertools.combinations(discriminants, size):
            candidates.append(sympy.expand(reduce(lambda a, b: a * b, subset)))
    lcm = reduce(lambda a, b: a.lcm(b), denominators, sympy.Poly(1, *symbols, domain="QQ"))
    candidates.append(lcm.monic().as_expr() if not lcm.is_ground else sympy.Integer(1))

    tried = []
    for candidate in candidates:
        tried.append(candidate)
        if clears(candidate) and homogeneous(candidate):
            logger.info("Denominators cleared by %s", format_expr(candidate))
            return BoundedDenominator(candidate, tried)
    return BoundedDenominator(None, tried)


def _primitive(vector: ExponentVector) -> Tuple[int, ...]:
    scale = vector.denominator
    integers = [int(e * scale) for e in vector.entries]
    divisor = reduce(gcd, (abs(v) for v in integers), 0) or 1
    return tuple(v // divisor for v in integers)


class ConeSpec:
    """A rational cone given by generators; strict convexity certified by a positive weight."""

    def __init__(self, generators: Sequence[Sequence[int]]):
        self.generators = [tuple(g) for g in generators]

    def to_dict(self) -> Dict:
        return {"generators": [list(g) for g in self.generators]}

    def __repr__(self):
        return f"ConeSpec({self.generators})"


def support_cone_check(root: PuiseuxRoot, weights: Optional[Weights] = None) -> ConeSpec:
    """
    Cone spanned by the exponents of a root, certified strictly convex by <alpha, g> > 0.
    In two variables the generators are reduced to the two extreme rays.
    """
    weights = weights or root.ring.weights
    directions = sorted({_primitive(v) for v in root_exponents(root) if any(v.entries)})
    for direction in directions:
        if weights.degree(direction).sign() <= 0:
            raise CertificateError(f"Generator {list(direction)} has non-positive weight")
    if weights.n == 2 and len(directions) > 2:
        def cross(a, b):
            return a[0] * b[1] - a[1] * b[0]
        lowest = directions[0]
        highest = directions[0]
        for d in directions[1:]:
            if cross(d, lowest) > 0:
                lowest = d
            if cross(highest, d) > 0:
                highest = d
        directions = sorted({lowest, highest})
    return ConeSpec(directions)


def _valid_inequalities(points: List[Tuple[Fraction, ...]], n: int) -> List[Tuple[Tuple[Fraction, ...], Fraction]]:
    """Inequalities <w, y> >= c valid on conv(points) + R_{>=0}^n, including every facet."""
    units = [tuple(Fraction(1 if i == k else 0) for i in range(n)) for k in range(n)]
    differences = [tuple(p[i] - q[i] for i in range(n)) for p, q in itertools.combinations(points, 2)]
    pool = differences + units
    inequalities = []
    seen = set()
    for chosen in itertools.combinations(pool, n - 1):
        if n == 1:
            normals = [sympy.Matrix([[1]])]
        else:
            normals = sympy.Matrix([list(v) for v in chosen]).nullspace()
        if len(normals) != 1:
            continue
        w = [Fraction(int(sympy.Rational(c).p), int(sympy.Rational(c).q)) for c in normals[0]]
        if all(c <= 0 for c in w):
            w = [-c for c in w]
        if any(c < 0 for c in w):
            continue
        key = tuple(w)
        if key in seen:
            continue
        seen.add(key)
        offset = min(sum(c * p[i] for i, c in enumerate(w)) for p in points)
        inequalities.append((key, offset))
    return inequalities


class PolyhedronCheck:
    """Containment of the Newton polyhedron of each factor in its cone, with a counterexample if any."""

    def __init__(self, factors: List[MonicPoly], counterexample: Optional[Dict] = None):
        self.factors = factors
        self.counterexample = counterexample

    @property
    def passes(self) -> bool:
        return self.counterexample is None

    def to_dict(self) -> Dict:
        return {
            "passes": self.passes,
            "factors": [f.to_str() for f in self.factors],
            "counterexample": self.counterexample,
        }


def _series_exponents(series: TruncatedGradedSeries) -> List[Tuple[int, ...]]:
    field = series.tower.base
    result = []
    for _, value in series.items():
        if not value.denom.is_ground:
            raise DomainError(f"Coefficient layer {field.to_str(value)} is not a polynomial")
        result.extend(monom for monom, _ in value.numer.terms())
    return result


def polyhedron_cone_check(P: MonicPoly, target=None, seed: int = 0,
                          config: SolverConfig = DEFAULT_CONFIG) -> PolyhedronCheck:
    """
    For each irreducible factor of a quasi-ordinary P, check that every point (exp(a_j), d - j)
    lies in the cone from (0, ..., 0, d) over the Newton polyhedron of a_d.
    """
    test = quasi_ordinary_test(P)
    if not test.is_quasi_ordinary:
        raise HypothesisError(f"Cone check needs a quasi-ordinary polynomial: {test.obstruction}")
    generic = _generic_copy(P)
    roots = newton_puiseux_roots(generic, target if target is not None else config.default_precision, seed, config)
    factors = completion_factors(generic, roots)
    n = P.ring.weights.n
    for index, factor in enumerate(factors):
        d = factor.degree
        base_points = [tuple(Fraction(e) for e in m) for m in _series_exponents(factor.coefficient(d))]
        if not base_points:
            raise PrecisionError("Constant coefficient of a factor vanishes to precision")
        inequalities = _valid_inequalities(base_points, n)
        for j in range(1, d):
            for monom in _series_exponents(factor.coefficient(j)):
                scaled = [Fraction(e * d, j) for e in monom]
                for w, offset in inequalities:
                    if sum(c * y for c, y in zip(w, scaled)) < offset:
                        point = [int(e) for e in monom] + [d - j]
                        logger.warning("Point %s of factor %d lies outside the cone", point, index)
                        return PolyhedronCheck(factors, {"factor": index, "point": point})
    return PolyhedronCheck(factors)
