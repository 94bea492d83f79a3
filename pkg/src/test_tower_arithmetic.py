#!/usr/bin/env python3
"""
Tests for exact arithmetic: polynomials, resultants, squarefree decomposition and towers.
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from fractions import Fraction

from src.errors import InvertibleWitness, NotSquarefreeError, ZeroDivisorFound
from src.tower_arithmetic import (
    FunctionField, RationalField, TowerField, UniPoly, crt_merge, factor_rational_univariate, resultant,
    squarefree_decomposition, squarefree_part, zero_divisor_split,
)

QQ_FIELD = RationalField()


def poly(*coeffs):
    """Rational polynomial from coefficients, lowest degree first."""
    return UniPoly(QQ_FIELD, [Fraction(c) for c in coeffs])


def test_resultant():
    """Resultant sign convention and a quadratic case."""
    print("🧪 Testing resultant...")

    # Res(X - 2, X - 5) = 2 - 5
    assert resultant(poly(-2, 1), poly(-5, 1)) == Fraction(-3)
    # (sqrt2 - 1)(-sqrt2 - 1) = -1
    assert resultant(poly(-2, 0, 1), poly(-1, 1)) == Fraction(-1)
    # Common root gives zero
    assert resultant(poly(-1, 0, 1), poly(-1, 1)) == Fraction(0)

    print("✅ Resultant tests passed\n")


def test_squarefree_decomposition():
    """Yun's algorithm on (Z - 1)^2 (Z - 2)."""
    print("🧪 Testing squarefree decomposition...")

    p = poly(-2, 5, -4, 1)
    factors = squarefree_decomposition(p)
    assert [(f, m) for f, m in factors] == [(poly(-2, 1), 1), (poly(-1, 1), 2)]
    assert not factors.normalized
    assert squarefree_part(p) == poly(2, -3, 1)

    scaled = squarefree_decomposition(p.scale(Fraction(3)))
    assert scaled.normalized
    print(f"  Factors: {[(f.to_str(), m) for f, m in factors]}")

    print("✅ Squarefree decomposition tests passed\n")


def test_rational_factorization():
    """Z^4 - 4 = (Z^2 - 2)(Z^2 + 2)."""
    print("🧪 Testing rational factorization...")

    factors = factor_rational_univariate(poly(-4, 0, 0, 0, 1))
    assert factors == [poly(-2, 0, 1), poly(2, 0, 1)]
    assert factor_rational_univariate(poly(1, 2, 1)) == [poly(1, 1), poly(1, 1)]

    print("✅ Rational factorization tests passed\n")


def test_number_tower():
    """Arithmetic in QQ(sqrt 2)."""
    print("🧪 Testing number tower...")

    tower = TowerField(QQ_FIELD).adjoin_root("s", poly(-2, 0, 1))
    s = tower.generator("s")
    assert tower.eq(tower.mul(s, s), tower.from_fraction(2))
    assert tower.eq(tower.inv(s), tower.mul(s, tower.from_fraction(Fraction(1, 2))))
    assert tower.describe() == ["s := root(Z^2 - 2, branch 0)"]
    assert tower.dimension_over() == 2

    try:
        TowerField(QQ_FIELD).adjoin_root("t", poly(0, 0, 1))
        assert False, "Z^2 is not squarefree"
    except NotSquarefreeError as e:
        assert e.factor == poly(0, 1)

    print("✅ Number tower tests passed\n")


def test_zero_divisor_split():
    """Dynamic evaluation over Z^2 - 1."""
    print("🧪 Testing zero-divisor splitting...")

    tower = TowerField(QQ_FIELD).adjoin_root("r", poly(-1, 0, 1), "residue", counted=True)
    r = tower.generator("r")
    witness = tower.sub(r, tower.one())

    try:
        tower.inv(witness)
        assert False, "r - 1 is a zero divisor"
    except ZeroDivisorFound as found:
        assert found.factor == poly(-1, 1)

    left, right = zero_divisor_split(tower, witness)
    assert left.levels[0].modulus == poly(-1, 1)
    assert right.levels[0].modulus == poly(1, 1)
    assert left.counted_degree() == 1 and right.counted_degree() == 1

    merged = crt_merge(tower, (left, (Fraction(1),)), (right, (Fraction(-1),)))
    assert tower.eq(merged, r)

    try:
        zero_divisor_split(tower, r)
        assert False, "r is invertible"
    except InvertibleWitness as e:
        assert tower.eq(tower.mul(e.inverse, r), tower.one())

    print("✅ Zero-divisor tests passed\n")


def test_function_field_tower():
    """A homogeneous generator over QQ(x1, x2)."""
    print("🧪 Testing function field tower...")

    field = FunctionField(["x1", "x2"])
    base = TowerField(field)
    x1x2 = field.from_expr("x1*x2")
    modulus = UniPoly(field, [field.neg(x1x2), field.zero(), field.one()])
    tower = base.adjoin_root("g", modulus, "homogeneous")
    g = tower.generator("g")
    assert tower.eq(tower.mul(g, g), tower.from_base(x1x2))
    inverse = tower.inv(g)
    assert tower.eq(tower.mul(inverse, g), tower.one())
    assert tower.as_base(inverse) is None
    assert tower.eq(tower.from_expr("x1 + g*x2"), tower.add(tower.from_rational_function("x1"),
                                                              tower.mul(g, tower.from_rational_function("x2"))))

    print("✅ Function field tower tests passed\n")


def main():
    """Run all tests."""
    print("🚀 Starting Arithmetic Tests\n")

    try:
        test_resultant()
        test_squarefree_decomposition()
        test_rational_factorization()
        test_number_tower()
        test_zero_divisor_split()
        test_function_field_tower()

        print("🎉 All arithmetic tests passed!")

    except Exception as e:
        print(f"❌ Test failed: {e}")
        import traceback
        traceback.print_exc()
        return 1

    return 0


if __name__ == "__main__":
    exit(main())
