#!/usr/bin/env python3
"""
Tests for homogeneous elements: validation, combinators, normal forms and compression.
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from fractions import Fraction

from src.errors import DomainError
from src.graded_series import ExponentVector, SeriesRing
from src.homogeneous import (
    HomTower, combine_power, combine_product, combine_sum, from_expr, integralize, monomial_normal_form,
    perfect_power_part, rational_root, tower_compress,
)
from src.tower_arithmetic import FunctionField, TowerField
from src.weights import Weights


def make_ring(weights: Weights) -> SeriesRing:
    return SeriesRing(weights, TowerField(FunctionField(weights.variables)))


def same_polynomial(element, other) -> bool:
    tower = element.ring.tower
    if element.q != other.q:
        return False
    return all(tower.eq(a, b) for a, b in zip(element.polynomial.coeffs, other.polynomial.coeffs))


def test_validate():
    """Degree inference and rejection of mixed degrees."""
    print("🧪 Testing homogeneity validation...")

    ring = make_ring(Weights.ord(2))
    root = from_expr("Z^2 - x1*x2", ring, "g")
    assert root.degree == 1
    assert root.integral
    assert root.describe() == "g := root(Z^2 - x1*x2, branch 0)"

    fractional = from_expr("Z^2 - x1^3/x2", ring, "h")
    assert fractional.degree == 1
    assert not fractional.integral

    try:
        from_expr("Z^2 + x1*Z + x2", ring)
        assert False, "g_2 = x2 has degree 1, not 2"
    except DomainError:
        pass
    try:
        from_expr("Z^2 - x1 - x2^2", ring)
        assert False, "x1 + x2^2 is not homogeneous"
    except DomainError:
        pass

    print("✅ Validation tests passed\n")


def test_combinators():
    """Resultant annihilators for powers, sums and products."""
    print("🧪 Testing resultant combinators...")

    ring = make_ring(Weights.ord(2))
    first = from_expr("Z^2 - x1", ring, "s1")
    second = from_expr("Z^2 - x2", ring, "s2")

    square = combine_power(first, 2)
    assert square.q == 1
    assert ring.tower.eq(square.coefficient(1), ring.tower.from_expr("-x1"))

    total = combine_sum(first, 1, second, 1, "s")
    expected = from_expr("Z^4 - 2*(x1 + x2)*Z^2 + (x1 - x2)^2", ring, "s")
    assert same_polynomial(total, expected)
    assert total.degree == Fraction(1, 2)
    print(f"  {total.describe()}")

    product = combine_product(first, second, "p")
    assert same_polynomial(product, from_expr("Z^2 - x1*x2", ring))
    assert product.degree == 1

    try:
        combine_sum(first, 1, from_expr("Z - x1", ring), 1)
        assert False, "degrees 1/2 and 1 differ"
    except DomainError:
        pass

    print("✅ Combinator tests passed\n")


def test_integralize_and_powers():
    """Clearing denominators and perfect-power extraction."""
    print("🧪 Testing integralization...")

    ring = make_ring(Weights.rational([1, 2]))
    element = from_expr("Z^2 - x2/x1", ring, "g")
    assert element.degree == Fraction(1, 2)
    assert not element.integral

    integral, multiplier = integralize(element)
    assert integral.integral
    assert integral.degree == Fraction(3, 2)
    assert ring.tower.eq(integral.coefficient(2), ring.tower.from_expr("-x1*x2"))
    assert ring.tower.base.to_str(multiplier) == "x1"

    field = ring.tower.base
    e, c, u = perfect_power_part(field.from_expr("4*x1^2*x2^2"), 2, field)
    assert (e, c) == (2, Fraction(4))
    assert u == field.from_expr("x1*x2")
    assert perfect_power_part(field.from_expr("x1*x2"), 2, field)[0] == 1

    assert rational_root(Fraction(4, 9), 2) == Fraction(2, 3)
    assert rational_root(Fraction(-8), 3) == Fraction(-2)
    assert rational_root(Fraction(2), 2) is None

    print("✅ Integralization tests passed\n")


def test_monomial_normal_form():
    """gamma = c * x^beta under rationally independent weights."""
    print("🧪 Testing monomial normal form...")

    ring = make_ring(Weights.parse("1, sqrt(2)"))
    form = monomial_normal_form(from_expr("Z^2 - x1*x2", ring, "g"))
    assert form.beta == ExponentVector([Fraction(1, 2), Fraction(1, 2)])
    assert form.c_value is not None and abs(form.c_value) == 1
    assert form.integral

    irrational = monomial_normal_form(from_expr("Z^2 - 2*x1", ring, "h"))
    assert irrational.c_value is None
    assert irrational.render().startswith("root(")
    assert irrational.beta.render(["x1", "x2"]) == "x1^(1/2)"

    try:
        monomial_normal_form(from_expr("Z^2 - x1*x2", make_ring(Weights.ord(2))))
        assert False, "ord has a rational relation"
    except DomainError as e:
        assert "N=n" in e.message

    print("✅ Monomial normal form tests passed\n")


def test_tower_compress():
    """sqrt(x1) and sqrt(x2) compress to one element under ord."""
    print("🧪 Testing tower compression...")

    ring = make_ring(Weights.ord(2))
    tower = HomTower(ring, [from_expr("Z^2 - x1", ring, "s1"), from_expr("Z^2 - x2", ring, "s2")])
    compressed = tower_compress(tower)
    assert compressed.size == 1
    theta = compressed.elements[0]
    assert theta.q == 4
    assert theta.minimality_certified
    assert set(compressed.expressions) == {"s1", "s2"}
    assert same_polynomial(theta, from_expr("Z^4 - 2*(x1 + x2)*Z^2 + (x1 - x2)^2", ring))
    for line in compressed.describe():
        print(f"  {line}")

    built = compressed.build_tower()
    assert built.dimension_over() == 4

    linear = HomTower(ring, [from_expr("Z - x1", ring, "t")])
    assert tower_compress(linear).size == 0

    print("✅ Tower compression tests passed\n")


def main():
    """Run all tests."""
    print("🚀 Starting Homogeneous Element Tests\n")

    try:
        test_validate()
        test_combinators()
        test_integralize_and_powers()
        test_monomial_normal_form()
        test_tower_compress()

        print("🎉 All homogeneous element tests passed!")

    except Exception as e:
        print(f"❌ Test failed: {e}")
        import traceback
        traceback.print_exc()
        return 1

    return 0


if __name__ == "__main__":
    exit(main())
