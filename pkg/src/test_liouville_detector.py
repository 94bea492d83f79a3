#!/usr/bin/env python3
"""
Tests for the Liouville gap detector.
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from fractions import Fraction

import sympy

from src.errors import DomainError, PrecisionError
from src.graded_series import SeriesRing
from src.liouville_detector import default_a_max, liouville_flag, partial_sum_approximants, record
from src.puiseux_solver import MonicPoly, newton_puiseux_roots
from src.tower_arithmetic import FunctionField, TowerField
from src.weights import Weights

x1, x2 = sympy.symbols("x1 x2")


def make_ring() -> SeriesRing:
    weights = Weights.rational([1, 2])
    return SeriesRing(weights, TowerField(FunctionField(weights.variables)))


def factorial_series(ring: SeriesRing):
    """sum of (x2/x1)^(i!) for i = 1..5, known to degree 121."""
    expression = sum((x2 / x1) ** sympy.factorial(i) for i in range(1, 6))
    return ring.from_expr(expression, ring.weights.value(121))


def binomial_series(ring: SeriesRing):
    """x1 * sqrt(1 + x2/x1) to degree 9."""
    expression = sum(sympy.binomial(sympy.Rational(1, 2), k) * x2 ** k / x1 ** (k - 1) for k in range(8))
    return ring.from_expr(expression, ring.weights.value(9))


def test_factorial_gap():
    """Ratios 2, 3, 4, 5 are flagged at a_max = 3."""
    print("🧪 Testing factorial gap series...")

    ring = make_ring()
    z = factorial_series(ring)
    rec = record(z, partial_sum_approximants(z, [2, 6, 24, 120]))
    assert len(rec) == 4
    assert [(s, e) for s, e in rec.samples] == [(1, 2), (2, 6), (6, 24), (24, 120)]
    assert rec.ratios() == [Fraction(2), Fraction(3), Fraction(4), Fraction(5)]

    verdict = liouville_flag(rec, 3, 3)
    assert verdict.flagged and verdict.status == "flagged"
    assert len(verdict.evidence) == 3
    assert verdict.to_dict()["ratios"] == ["2", "3", "4", "5"]

    assert not liouville_flag(rec, 10, 3).flagged
    print(rec.to_frame().to_string(index=False))

    print("✅ Factorial gap tests passed\n")


def test_binomial_clear():
    """An algebraic series stays clear."""
    print("🧪 Testing binomial series...")

    ring = make_ring()
    z = binomial_series(ring)
    rec = record(z, partial_sum_approximants(z, [2, 3, 4, 5, 6, 7, 8]))
    assert len(rec) == 7
    verdict = liouville_flag(rec, 3, 3)
    assert not verdict.flagged
    assert verdict.evidence == []
    assert rec.ratios()[2] == 4

    print("✅ Binomial series tests passed\n")


def test_solver_roots_are_clear():
    """Roots of Z^2 - x1 - x2 sampled with their own partial sums."""
    print("🧪 Testing solver roots against the detector...")

    ring = make_ring()
    P = MonicPoly.from_expr("Z^2 - x1 - x2", ring)
    for root in newton_puiseux_roots(P, 8):
        cutoffs = root.expansion.keys()[1:]
        rec = record(root.expansion, partial_sum_approximants(root.expansion, cutoffs))
        verdict = liouville_flag(rec, default_a_max(P.degree), 3)
        assert not verdict.flagged
    assert default_a_max(2) == 4
    assert default_a_max() == 10

    print("✅ Solver root tests passed\n")


def test_edge_cases():
    """Dropped pairs, undetermined denominators and short records."""
    print("🧪 Testing detector edge cases...")

    ring = make_ring()
    constant = ring.from_expr("1 + x1")
    rec = record(constant, partial_sum_approximants(constant, [2]))
    assert len(rec) == 0 and rec.dropped == 1

    try:
        record(constant, [(ring.one(), ring.zero())])
        assert False, "g = 0"
    except PrecisionError:
        pass

    z = factorial_series(ring)
    try:
        partial_sum_approximants(z, [200])
        assert False, "cutoff beyond the precision"
    except PrecisionError:
        pass

    short = record(z, partial_sum_approximants(z, [2, 6]))
    for count in (3, 0):
        try:
            liouville_flag(short, 3, count)
            assert False, f"count {count} must be refused"
        except DomainError:
            pass

    print("✅ Edge case tests passed\n")


def main():
    """Run all tests."""
    print("🚀 Starting Liouville Detector Tests\n")

    try:
        test_factorial_gap()
        test_binomial_clear()
        test_solver_roots_are_clear()
        test_edge_cases()

        print("🎉 All Liouville detector tests passed!")

    except Exception as e:
        print(f"❌ Test failed: {e}")
        import traceback
        traceback.print_exc()
        return 1

    return 0


if __name__ == "__main__":
    exit(main())
