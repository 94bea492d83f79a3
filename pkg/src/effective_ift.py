"""
Newton iteration from an approximate root with tracked denominators.
The lifted root is written with powers of a single homogeneous polynomial delta
in its layer denominators, and the exponents get an affine bound a*i + b.
"""

import logging
import math
from fractions import Fraction
from typing import Dict, List, Tuple

import sympy

from .config import DEFAULT_CONFIG, SolverConfig
from .errors import CertificateError, DomainError, HypothesisError, PrecisionError
from .graded_series import TruncatedGradedSeries
from .puiseux_solver import MonicPoly, PuiseuxRoot, vanishes_to
from .tower_arithmetic import format_expr
from .weights import GradeValue, format_fraction

logger = logging.getLogger(__name__)


class DenominatorWitness:
    """
    delta, the exponent m(i) of delta in each layer denominator, and (a, b) with m(i) <= a*i + b.
    """

    def __init__(self, delta, exponents: List[Tuple[GradeValue, Fraction, int]], a: int, b: int):
        self.delta = delta
        self.exponents = exponents
        self.a = a
        self.b = b

    def holds(self) -> bool:
        return all(m <= self.a * i + self.b for _, i, m in self.exponents)

    def to_dict(self) -> Dict:
        return {
            "delta": format_expr(self.delta),
            "a": self.a,
            "b": self.b,
            "exponents": [{"deg": d.to_json(), "i": format_fraction(i), "m": m} for d, i, m in self.exponents],
        }

    def __repr__(self):
        return f"DenominatorWitness(delta={format_expr(self.delta)}, a={self.a}, b={self.b})"


def _delta_exponent(denominator: sympy.Poly, delta: sympy.Poly) -> Tuple[int, sympy.Poly]:
    """Largest m with delta^m dividing the denominator, and the cofactor."""
    if delta.is_ground:
        return 0, denominator
    m = 0
    while True:
        quotient, remainder = denominator.div(delta)
        if not remainder.is_zero:
            return m, denominator
        denominator, m = quotient, m + 1


def denominator_witness(expansion: TruncatedGradedSeries, delta_value) -> DenominatorWitness:
    """
    Measure the delta-exponents of every layer and fit the bounding pair.

    Args:
        expansion: Series over QQ(x)
        delta_value: Base field element whose primitive numerator is delta

    Raises:
        CertificateError: if a layer denominator has a factor other than delta
    """
    field = expansion.tower.base
    symbols = field.symbols
    numerator, _ = sympy.fraction(sympy.together(field.to_expr(delta_value)))
    _, delta = sympy.Poly(numerator, *symbols).primitive()

    exponents = []
    keys = expansion.keys()
    if not keys:
        return DenominatorWitness(delta.as_expr(), [], 0, 0)
    start = keys[0]
    for degree, value in expansion.items():
        _, denominator = sympy.fraction(sympy.together(field.to_expr(value)))
        m, rest = _delta_exponent(sympy.Poly(denominator, *symbols), delta)
        if not rest.is_ground:
            raise CertificateError(f"Layer of degree {degree} has denominator factor {rest.as_expr()} besides delta")
        i = (degree - start).interval()[0]
        exponents.append((degree, i, m))

    b = exponents[0][2]
    slopes = [Fraction(m - b) / i for _, i, m in exponents if i > 0]
    a = max(0, math.ceil(max(slopes))) if slopes else 0
    for _, i, m in exponents:
        if i == 0 and m > b:
            b = m
    witness = DenominatorWitness(delta.as_expr(), exponents, a, b)
    if not witness.holds():
        raise CertificateError(f"Bounding pair ({a}, {b}) does not dominate the measured exponents")
    return witness


def effective_ift(P: MonicPoly, u: TruncatedGradedSeries, target, config: SolverConfig = DEFAULT_CONFIG) -> PuiseuxRoot:
    """
    Lift an approximate root u with v(P(u)) > 2 v(P'(u)) to the unique nearby root.

    Args:
        P: Monic polynomial over QQ(x) series
        u: Approximate root
        target: Requested precision of the root

    Returns:
        PuiseuxRoot carrying a DenominatorWitness

    Raises:
        HypothesisError: if v(P(u)) <= 2 v(P'(u))
    """
    ring = P.ring
    if ring.tower.levels:
        raise DomainError("Denominator tracking is implemented over QQ(x) only")
    target = ring.weights.value(target)
    u = u.embed(ring).with_precision(None)

    value = P.evaluate(u)
    slope = P.evaluate_derivative(u)
    if slope.is_zero():
        raise HypothesisError("P'(u) vanishes; the approximate root is not simple")
    v_slope = slope.lower_valuation()
    if value.is_exact and value.is_zero():
        logger.info("Approximate root is exact")
        witness = denominator_witness(u, slope.initial_form())
        return PuiseuxRoot(ring, u.truncate(target), 1, P, witness=witness)
    v_value = value.lower_valuation()
    if not v_slope * 2 < v_value:
        raise HypothesisError(
            f"Need v(P(u)) > 2 v(P'(u)): v(P(u)) = {v_value}, v(P'(u)) = {v_slope}",
            value_valuation=v_value.to_json(), derivative_valuation=v_slope.to_json(),
        )
    delta_value = slope.initial_form()

    working = target + v_slope
    if P.precision is not None and P.precision < working:
        raise PrecisionError(f"Coefficients are known modulo {P.precision}; need {working}")
    y = u
    for step in range(config.max_hensel_iterations):
        value = P.evaluate(y, cap=working)
        if vanishes_to(value, working):
            logger.debug("Effective IFT converged after %d steps", step)
            break
        derivative = P.evaluate_derivative(y, cap=working)
        y = (y - value.divide(derivative, target)).truncate(target).with_precision(None)
    else:
        raise PrecisionError(f"Newton iteration did not reach precision {target}")

    expansion = y.truncate(target)
    witness = denominator_witness(expansion, delta_value)
    logger.info("Root lifted to %s with bounding pair (%d, %d)", target, witness.a, witness.b)
    return PuiseuxRoot(ring, expansion, 1, P, witness=witness)
