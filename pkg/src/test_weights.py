#!/usr/bin/env python3
"""
Tests for weights, the value group and the integer approximation machinery.
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import random
from fractions import Fraction

import sympy

from src.errors import BudgetExhausted, DomainError, ParseError
from src.graded_series import SeriesRing
from src.tower_arithmetic import FunctionField, TowerField
from src.weights import (
    RelationLattice, Weights, homogeneity_transfer_check, kernel_relations, rel_approx, rel_approx_auto, valuation_sandwich,
)

FOUR_VARIABLE = ("b1: sqrt(2) [1.414, 1.415]; b2: sqrt(3) [1.732, 1.733]; "
                 "a1 = b1; a2 = b2; a3 = 13*b1 + b2; a4 = b1 + 757*b2")


def test_parse_and_compare():
    """Weight parsing and exact comparison of irrational degrees."""
    print("🧪 Testing weight parsing...")

    weights = Weights.parse("1, sqrt(2)")
    assert weights.n == 2 and weights.rank == 2
    assert not weights.is_rational
    assert weights.weight(0) < weights.weight(1)
    assert weights.degree([2, 0]) > weights.weight(1)
    assert weights.degree([0, 2]) < weights.degree([3, 0])
    assert weights.degree([1, 0]).compare(weights.degree([0, 1])) == -1
    assert weights.degree([2, 0]).compare(weights.degree([0, 1])) == 1
    assert weights.degree([1, 1]).compare(weights.degree([1, 1])) == 0

    four = Weights.parse(FOUR_VARIABLE)
    assert four.n == 4 and four.rank == 2
    assert four.weight(2) == four.weight(0) * 13 + four.weight(1)

    assert Weights.ord(3).degree([1, 1, 1]) == 3
    assert Weights.generic(3).rank == 3

    try:
        Weights.parse("")
        assert False, "empty specification"
    except ParseError:
        pass

    print("✅ Weight parsing tests passed\n")


def test_kernel_relations():
    """Rational relations among the weights."""
    print("🧪 Testing kernel relations...")

    assert kernel_relations(Weights.rational([1, 2])).to_list() == [[-2, 1]]
    assert kernel_relations(Weights.parse("1, sqrt(2)")).dimension == 0

    lattice = kernel_relations(Weights.parse(FOUR_VARIABLE))
    assert lattice.dimension == 2
    expected = [(-13, -1, 1, 0), (-1, -757, 0, 1)]
    for vector in expected:
        assert lattice.contains(vector)
    assert RelationLattice(expected, 4).is_contained_in(lattice)
    assert lattice.is_contained_in(RelationLattice(expected, 4))
    assert lattice.annihilates(Weights.parse(FOUR_VARIABLE))
    print(f"  Relations: {lattice.to_list()}")

    print("✅ Kernel relation tests passed\n")


def test_rel_approx():
    """Integer approximations that keep every relation."""
    print("🧪 Testing integer weight approximation...")

    rational = Weights.rational([1, 2])
    assert rel_approx(rational, 3, Fraction(1, 10)) == (3, 6)
    assert rel_approx(rational, 1, Fraction(1, 10)) == (1, 2)

    four = Weights.parse(FOUR_VARIABLE)
    alpha = rel_approx(four, 10, Fraction(1, 10))
    n1, n2 = alpha[0], alpha[1]
    assert alpha == (n1, n2, 13 * n1 + n2, n1 + 757 * n2)
    print(f"  alpha' = {alpha}")

    q, approximation = rel_approx_auto(Weights.parse("1, sqrt(2)"), Fraction(1, 10))
    assert (q, approximation) == (2, (2, 3))

    try:
        rel_approx(Weights.parse("1, sqrt(2)"), 1, Fraction(1, 10))
        assert False, "no integer pair approximates (1, sqrt 2) at q = 1"
    except BudgetExhausted:
        pass
    try:
        rel_approx(rational, 0, Fraction(1, 10))
        assert False, "q must be positive"
    except DomainError:
        pass

    print("✅ Integer approximation tests passed\n")


def test_homogeneity_transfer():
    """Homogeneous polynomials stay homogeneous and keep the q(1 -/+ eps) sandwich."""
    print("🧪 Testing homogeneity transfer...")

    weights = Weights.rational([1, 2])
    x1, x2 = sympy.symbols("x1 x2")
    check = homogeneity_transfer_check(x1 ** 2 + x2, weights, (3, 6), 3, Fraction(1, 10))
    assert check.nu == 2 and check.nu_prime == 6
    assert check.lower * 2 <= check.nu_prime <= check.upper * 2

    try:
        homogeneity_transfer_check(x1 + x2, weights, (3, 6), 3, Fraction(1, 10))
        assert False, "x1 + x2 is not homogeneous"
    except DomainError:
        pass

    ring = SeriesRing(weights, TowerField(FunctionField(weights.variables)))
    series = ring.from_expr("x1^2 + x2 + x1^3")
    sandwich = valuation_sandwich(series, weights, (3, 6), 3, Fraction(1, 10))
    assert sandwich.nu == 2 and sandwich.nu_prime == 6
    assert sandwich.determined
    assert len(sandwich.layers) == 2

    print("✅ Homogeneity transfer tests passed\n")


def test_generated_homogeneity_transfer():
    """Random homogeneous polynomials keep homogeneity and the sandwich under integer weights."""
    print("🧪 Testing homogeneity transfer on generated polynomials...")

    rng = random.Random(3)
    # weights, one exchange of equal-degree monomials (or None), q and the approximation
    cases = []
    for weights, exchange in [
        (Weights.rational([1, 2]), ((0, 1), (2, 0))),
        (Weights.rational([2, 3]), ((3, 0), (0, 2))),
        (Weights.parse(FOUR_VARIABLE), ((0, 0, 1, 0), (13, 1, 0, 0))),
        (Weights.parse("1, sqrt(2)"), None),
    ]:
        if weights.is_rational:
            q, alpha = 3, rel_approx(weights, 3, Fraction(1, 10))
        elif weights.n == 4:
            q, alpha = 10, rel_approx(weights, 10, Fraction(1, 10))
        else:
            q, alpha = rel_approx_auto(weights, Fraction(1, 10))
        cases.append((weights, exchange, q, alpha))

    for index in range(100):
        weights, exchange, q, alpha = cases[index % len(cases)]
        symbols = sympy.symbols(weights.variables)
        base = [rng.randint(0, 3) for _ in range(weights.n)]
        trades = rng.randint(0, 2) if exchange is not None else 0
        monomials = []
        for t in range(trades + 1):
            exponents = list(base)
            if exchange is not None:
                left, right = exchange
                exponents = [e + t * l + (trades - t) * r for e, l, r in zip(base, left, right)]
            monomials.append(exponents)
        polynomial = sum(
            (rng.choice([-3, -2, -1, 1, 2, 3]) * sympy.Mul(*[s ** e for s, e in zip(symbols, exponents)])
             for exponents in monomials),
            sympy.Integer(0),
        )

        check = homogeneity_transfer_check(polynomial, weights, alpha, q, Fraction(1, 10))
        assert check.nu == weights.degree(monomials[0])
        assert check.nu_prime == sum(a * e for a, e in zip(alpha, monomials[0]))
        assert check.lower == q * Fraction(9, 10) and check.upper == q * Fraction(11, 10)
        if weights.is_rational:
            nu = check.nu.rational_value()
            assert check.lower * nu <= check.nu_prime <= check.upper * nu

    print("✅ Generated homogeneity transfer tests passed\n")


def main():
    """Run all tests."""
    print("🚀 Starting Weight Tests\n")

    try:
        test_parse_and_compare()
        test_kernel_relations()
        test_rel_approx()
        test_homogeneity_transfer()
        test_generated_homogeneity_transfer()

        print("🎉 All weight tests passed!")

    except Exception as e:
        print(f"❌ Test failed: {e}")
        import traceback
        traceback.print_exc()
        return 1

    return 0


if __name__ == "__main__":
    exit(main())
