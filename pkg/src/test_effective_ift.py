#!/usr/bin/env python3
"""
Tests for Newton iteration from an approximate root with denominator tracking.
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import sympy

from src.effective_ift import denominator_witness, effective_ift
from src.errors import CertificateError, HypothesisError
from src.graded_series import SeriesRing
from src.puiseux_solver import MonicPoly, vanishes_to
from src.tower_arithmetic import FunctionField, TowerField
from src.weights import Weights

QUADRATIC = "Z^2 - x1^2 - x2^3"


def make_ring() -> SeriesRing:
    weights = Weights.ord(2)
    return SeriesRing(weights, TowerField(FunctionField(weights.variables)))


def test_lift_from_x1():
    """x1 * sqrt(1 + x2^3/x1^2) with delta = x1 and (a, b) = (2, 0)."""
    print("🧪 Testing effective IFT lift...")

    ring = make_ring()
    P = MonicPoly.from_expr(QUADRATIC, ring)
    root = effective_ift(P, ring.from_expr("x1"), 6)
    assert root.precision == 6
    assert vanishes_to(P.evaluate(root.expansion, cap=ring.weights.value(6)), ring.weights.value(6))
    assert root.expansion.agrees_with(ring.from_expr("x1 + x2^3/(2*x1)"), ring.weights.value(3))

    witness = root.witness
    assert witness.delta == sympy.Symbol("x1")
    assert (witness.a, witness.b) == (2, 0)
    assert witness.holds()
    assert [m for _, _, m in witness.exponents] == [0, 1, 3, 5, 7]
    print(f"  {witness}")

    data = root.to_dict()
    assert data["witness"]["a"] == 2

    print("✅ Effective IFT lift tests passed\n")


def test_hypothesis():
    """The lift needs v(P(u)) > 2 v(P'(u))."""
    print("🧪 Testing IFT hypothesis...")

    ring = make_ring()
    P = MonicPoly.from_expr(QUADRATIC, ring)
    try:
        effective_ift(P, ring.from_expr("x1 + x2"), 4)
        assert False, "v(P(u)) = 2 is not above 2 v(P'(u)) = 2"
    except HypothesisError as e:
        assert e.exit_code == 3
    try:
        effective_ift(P, ring.zero(), 4)
        assert False, "P'(0) = 0"
    except HypothesisError:
        pass

    print("✅ IFT hypothesis tests passed\n")


def test_denominator_witness():
    """Foreign denominator factors are refused."""
    print("🧪 Testing denominator witness...")

    ring = make_ring()
    field = ring.tower.base
    series = ring.from_expr("x1 + x2^3/x1 + x2^5/x1^2")
    witness = denominator_witness(series, field.from_expr("3*x1"))
    assert [m for _, _, m in witness.exponents] == [0, 1, 2]
    assert (witness.a, witness.b) == (1, 0)

    try:
        denominator_witness(ring.from_expr("x1 + x1^2/x2"), field.from_expr("x1"))
        assert False, "x2 is not a power of delta"
    except CertificateError:
        pass

    print("✅ Denominator witness tests passed\n")


def main():
    """Run all tests."""
    print("🚀 Starting Effective IFT Tests\n")

    try:
        test_lift_from_x1()
        test_hypothesis()
        test_denominator_witness()

        print("🎉 All effective IFT tests passed!")

    except Exception as e:
        print(f"❌ Test failed: {e}")
        import traceback
        traceback.print_exc()
        return 1

    return 0


if __name__ == "__main__":
    exit(main())
