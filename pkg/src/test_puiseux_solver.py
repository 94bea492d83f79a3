#!/usr/bin/env python3
"""
Tests for Hensel lifting, the Newton-Puiseux recursion and stability under perturbation.
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import random

import sympy

from src.config import SolverConfig
from src.errors import BudgetExhausted, DomainError, HypothesisError, NotSquarefreeError
from src.graded_series import SeriesRing
from src.puiseux_solver import (
    MonicPoly, NewtonPuiseuxSolver, completion_factors, conjugate_roots, hensel_lift_root, hensel_split, newton_puiseux_roots,
    roots_frame, scale_nonmonic, stability_threshold, stable_tower, transfer_factorization, unscale_root,
    vanishes_to,
)
from src.tower_arithmetic import FunctionField, TowerField, UniPoly
from src.weights import Weights

CUBIC = "Z^3 + 3*x1*x2*Z - 2*x1^4"
SLOW_CUBIC = "Z^3 - 2*Z^2*x1*x2^3 + 3*Z^2*x2^3 - 2*Z*x1^3*x2^2 + Z*x2^2 + x1^2*x2^2 - 2*x1*x2^2"
MONOMIALS = ["1", "x1", "x2", "x1*x2", "x1^2", "x2^2"]


def make_ring(weights: Weights) -> SeriesRing:
    return SeriesRing(weights, TowerField(FunctionField(weights.variables)))


def is_root(P: MonicPoly, root) -> bool:
    value = P.embed(root.ring).evaluate(root.expansion, cap=root.precision)
    return vanishes_to(value, root.precision)


def test_hensel_lift_root():
    """Z^2 - (1 + x1) lifts to the binomial series of sqrt(1 + x1)."""
    print("🧪 Testing Hensel lifting...")

    ring = make_ring(Weights.ord(1))
    P = MonicPoly.from_expr("Z^2 - 1 - x1", ring)
    four = ring.weights.value(4)
    y = hensel_lift_root(P, ring.tower.one(), four)
    assert y.precision == 4
    assert y.agrees_with(ring.from_expr("1 + x1/2 - x1^2/8 + x1^3/16"))

    try:
        hensel_lift_root(P, ring.tower.from_fraction(2), four)
        assert False, "2 is not a residue root"
    except DomainError:
        pass

    print("✅ Hensel lifting tests passed\n")


def test_hensel_precision_doubling():
    """Deep lifts converge and respect the iteration budget."""
    print("🧪 Testing Hensel precision doubling...")

    ring = make_ring(Weights.ord(1))
    P = MonicPoly.from_expr("Z^2 - 1 - x1", ring)
    twenty = ring.weights.value(20)
    y = hensel_lift_root(P, ring.tower.one(), twenty)
    assert y.precision == 20
    assert vanishes_to(P.evaluate(y, cap=twenty), twenty)
    assert y.agrees_with(ring.from_expr("1 + x1/2 - x1^2/8 + x1^3/16"), ring.weights.value(4))

    slow = make_ring(Weights.rational([1, 2]))
    Q = MonicPoly.from_expr(SLOW_CUBIC, slow)
    roots = newton_puiseux_roots(Q, 6)
    assert sum(root.count for root in roots) == 3
    for root in roots:
        assert is_root(Q, root)

    try:
        hensel_lift_root(P, ring.tower.one(), twenty, SolverConfig(max_hensel_iterations=2))
        assert False, "two doubling steps cannot reach precision 20"
    except BudgetExhausted as e:
        assert e.exit_code == 4

    print("✅ Hensel precision doubling tests passed\n")


def test_search_budgets():
    """Exhausted iteration and split budgets exit with the budget code."""
    print("🧪 Testing search budgets...")

    ring = make_ring(Weights.ord(2))
    four = ring.weights.value(4)
    no_iterations = SolverConfig(max_hensel_iterations=0)

    try:
        newton_puiseux_roots(MonicPoly.from_expr("Z^2 - x1*x2", ring), 4, config=no_iterations)
        assert False, "lifting needs at least one iteration"
    except BudgetExhausted as e:
        assert e.kind == "budget-exhausted"

    T = ring.tower
    P = MonicPoly.from_expr("Z^2 - Z + x1*x2", ring)
    left = UniPoly(T.top, [T.zero(), T.one()])
    right = UniPoly(T.top, [T.neg(T.one()), T.one()])
    try:
        hensel_split(P, left, right, four, no_iterations)
        assert False, "factor lifting needs at least one iteration"
    except BudgetExhausted as e:
        assert e.exit_code == 4

    solver = NewtonPuiseuxSolver(SolverConfig(max_zero_divisor_splits=0))
    try:
        solver._count_split()
        assert False, "no split is allowed"
    except BudgetExhausted as e:
        assert e.exit_code == 4

    print("✅ Search budget tests passed\n")


def test_unused_levels_trimmed():
    """A rational root does not carry the generator of its sibling roots."""
    print("🧪 Testing tower trimming...")

    ring = make_ring(Weights.ord(2))
    P = MonicPoly.from_expr("((Z - x2)^2 - x1)*(Z - x1 - x2^2)", ring)
    roots = newton_puiseux_roots(P, 5)
    assert sum(root.count for root in roots) == 3
    for root in roots:
        assert is_root(P, root)

    rational = [root for root in roots if not root.tower.levels]
    assert len(rational) == 1
    assert rational[0].expansion.agrees_with(ring.from_expr("x1 + x2^2"))
    assert rational[0].to_dict()["tower"] == []
    assert "homogeneous" not in rational[0].to_dict()

    algebraic = [root for root in roots if root.tower.levels]
    assert len(algebraic) == 2
    for root in algebraic:
        assert [level.kind for level in root.tower.levels] == ["homogeneous"]
        assert root.valuation() == ring.weights.value(1) / 2

    print("✅ Tower trimming tests passed\n")


def random_polynomial(rng: random.Random, constant: bool = True) -> str:
    """A small polynomial in x1, x2 with coefficients in -2..2."""
    terms = []
    for monomial in MONOMIALS if constant else MONOMIALS[1:]:
        c = rng.randint(-2, 2)
        if c:
            terms.append(f"{c}*{monomial}")
    return " + ".join(terms) or "0"


def distinct_polynomials(rng: random.Random, k: int) -> list:
    """k pairwise different polynomials."""
    chosen = []
    while len(chosen) < k:
        candidate = random_polynomial(rng)
        if all(sympy.expand(sympy.sympify(candidate) - sympy.sympify(other)) != 0 for other in chosen):
            chosen.append(candidate)
    return chosen


def test_generated_root_certificates():
    """Every root of generated polynomials satisfies P to the requested precision."""
    print("🧪 Testing roots of generated polynomials...")

    rng = random.Random(2024)
    weight_choices = [Weights.ord(2), Weights.rational([1, 2]), Weights.rational([2, 3]), Weights.parse("1, sqrt(2)")]
    for index in range(32):
        weights = weight_choices[index % len(weight_choices)]
        ring = make_ring(weights)
        linear = distinct_polynomials(rng, rng.randint(1, 2))
        factors = [f"(Z - ({s}))" for s in linear]
        if len(linear) == 1 or rng.random() < 0.5:
            a, b = rng.choice([1, 3]), rng.randint(0, 1)
            c = rng.choice([1, 2, -3])
            factors.append(f"((Z - ({random_polynomial(rng)}))^2 - {c}*x1^{a}*x2^{b})")
        text = "*".join(factors)
        P = MonicPoly.from_expr(text, ring)
        roots = newton_puiseux_roots(P, 4, seed=index)
        assert sum(root.count for root in roots) == P.degree, text
        for root in roots:
            assert is_root(P, root), f"{text}: {root.expansion.to_str()}"

    print("✅ Generated root certificate tests passed\n")


def test_known_roots_recovered():
    """The roots of a product of Z - s_i are the s_i."""
    print("🧪 Testing recovery of known roots...")

    rng = random.Random(7)
    weight_choices = [Weights.ord(2), Weights.rational([1, 2]), Weights.parse("1, sqrt(2)")]
    for index in range(21):
        ring = make_ring(weight_choices[index % len(weight_choices)])
        known = distinct_polynomials(rng, rng.randint(2, 3))
        P = MonicPoly.from_roots(ring, [ring.from_expr(s) for s in known])
        assert P.degree == len(known)
        assert P.agrees_with(MonicPoly.from_expr("*".join(f"(Z - ({s}))" for s in known), ring))

        roots = newton_puiseux_roots(P, 4)
        assert [root.count for root in roots] == [1] * len(known)
        for s in known:
            assert any(root.expansion.agrees_with(root.ring.from_expr(s)) for root in roots), f"{s} not found"

    print("✅ Known root recovery tests passed\n")


def test_hensel_split():
    """Residue factorization Z(Z - 1) of Z^2 - Z + x1*x2."""
    print("🧪 Testing factor lifting...")

    ring = make_ring(Weights.ord(2))
    T = ring.tower
    P = MonicPoly.from_expr("Z^2 - Z + x1*x2", ring)
    four = ring.weights.value(4)
    left = UniPoly(T.top, [T.zero(), T.one()])
    right = UniPoly(T.top, [T.neg(T.one()), T.one()])
    S1, S2 = hensel_split(P, left, right, four)
    assert (S1 * S2).agrees_with(P, four)
    assert S1.coefficient(1).agrees_with(ring.from_expr("-x1*x2"), four)
    assert S2.coefficient(1).agrees_with(ring.from_expr("-1 + x1*x2"), four)

    print("✅ Factor lifting tests passed\n")


def test_newton_puiseux_cubic():
    """One root of valuation 2 and two of valuation 1."""
    print("🧪 Testing Newton-Puiseux on the cubic...")

    ring = make_ring(Weights.ord(2))
    P = MonicPoly.from_expr(CUBIC, ring)
    roots = newton_puiseux_roots(P, 6)
    assert sum(root.count for root in roots) == 3
    for root in roots:
        assert is_root(P, root)

    valuations = [root.valuation() for root in roots for _ in range(root.count)]
    assert sum(1 for v in valuations if v == 1) == 2
    assert sum(1 for v in valuations if v == 2) == 1

    small = next(root for root in roots if root.valuation() == 2)
    assert small.tower.eq(small.expansion.initial_form(), small.tower.from_expr("2*x1^3/(3*x2)"))
    print(f"  {small.expansion.to_str()}")

    frame = roots_frame(roots)
    assert len(frame) == len(roots)
    assert frame["count"].sum() == 3

    factors = completion_factors(P, roots)
    assert sorted(f.degree for f in factors) == [1, 2]

    print("✅ Cubic tests passed\n")


def test_conjugate_roots():
    """A counted residue level expands into explicit conjugates."""
    print("🧪 Testing conjugate expansion...")

    ring = make_ring(Weights.ord(1))
    P = MonicPoly.from_expr("Z^3 - 2 - x1", ring)
    roots = newton_puiseux_roots(P, 3)
    assert sum(root.count for root in roots) == 3
    group = next(root for root in roots if root.count == 2)
    conjugates = conjugate_roots(group)
    assert len(conjugates) == 2
    for root in conjugates:
        assert root.count == 1
        assert is_root(P, root)

    print("✅ Conjugate expansion tests passed\n")


def test_squarefree_precondition():
    """A repeated root is refused, not deflated."""
    print("🧪 Testing squarefree precondition...")

    ring = make_ring(Weights.ord(2))
    P = MonicPoly.from_expr("Z^2 - 2*x1*Z + x1^2", ring)
    try:
        newton_puiseux_roots(P, 4)
        assert False, "(Z - x1)^2 is not squarefree"
    except NotSquarefreeError as e:
        assert "squarefree" in e.message

    try:
        MonicPoly.from_expr("2*Z^2 - x1", ring)
        assert False, "leading coefficient 2"
    except DomainError:
        pass

    print("✅ Squarefree precondition tests passed\n")


def test_stability():
    """Threshold c = (d/2) v(disc) and transfer to a close polynomial."""
    print("🧪 Testing stability...")

    ring = make_ring(Weights.ord(2))
    P = MonicPoly.from_expr("Z^2 - x1*x2", ring)
    assert stability_threshold(P) == 2
    assert stability_threshold(MonicPoly.from_expr(CUBIC, ring)) == 9

    roots = newton_puiseux_roots(P, 8)
    tower, c = stable_tower(P, roots)
    assert c == 2
    assert tower.size >= 1

    Q = MonicPoly.from_expr("Z^2 - x1*x2 + x1^5", ring)
    matches = transfer_factorization(P, Q, roots)
    assert len(matches) == 1
    assert matches[0].p_factor.degree == 2
    assert matches[0].to_dict()["degree"] == 2

    near = MonicPoly.from_expr("Z^2 - x1*x2 + x1^2", ring)
    try:
        transfer_factorization(P, near, roots)
        assert False, "distance 2 does not exceed d * separation = 2"
    except HypothesisError:
        pass

    print("✅ Stability tests passed\n")


def test_scale_nonmonic():
    """2 Z^2 - x1^2 becomes W^2 - 2 x1^2 and roots are divided back."""
    print("🧪 Testing non-monic scaling...")

    ring = make_ring(Weights.ord(1))
    Q, leading = scale_nonmonic([2, 0, "-x1^2"], ring)
    assert Q.agrees_with(MonicPoly.from_expr("Z^2 - 2*x1^2", ring))
    roots = [unscale_root(root, leading) for root in newton_puiseux_roots(Q, 4)]
    assert sum(root.count for root in roots) == 2
    for root in roots:
        assert root.back_substitution.startswith("z = w/(2)")
        assert root.valuation() == 1

    print("✅ Non-monic scaling tests passed\n")


def main():
    """Run all tests."""
    print("🚀 Starting Puiseux Solver Tests\n")

    try:
        test_hensel_lift_root()
        test_hensel_precision_doubling()
        test_search_budgets()
        test_hensel_split()
        test_newton_puiseux_cubic()
        test_conjugate_roots()
        test_unused_levels_trimmed()
        test_generated_root_certificates()
        test_known_roots_recovered()
        test_squarefree_precondition()
        test_stability()
        test_scale_nonmonic()

        print("🎉 All Puiseux solver tests passed!")

    except Exception as e:
        print(f"❌ Test failed: {e}")
        import traceback
        traceback.print_exc()
        return 1

    return 0


if __name__ == "__main__":
    exit(main())
