#!/usr/bin/env python3
"""
Tests for document parsing, command dispatch and serialization.
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import json
import random
from fractions import Fraction

from src.document_parser import load_root, parse, parse_expression, run, serialize
from src.errors import DomainError, NotSquarefreeError, ParseError
from src.graded_series import SeriesRing
from src.puiseux_solver import MonicPoly, vanishes_to
from src.tower_arithmetic import FunctionField, TowerField

CUBIC_DOCUMENT = """# the cubic
variables: x1, x2
weights: 1, 1
poly: Z^3 + 3*x1*x2*Z - 2*x1^4
precision: 6
command: roots
"""


def make_ring(doc) -> SeriesRing:
    return SeriesRing(doc.weights, TowerField(FunctionField(doc.variables)))


def expect_parse_error(text: str, line=None, column=None, **overrides) -> ParseError:
    try:
        parse(text, **overrides)
    except ParseError as e:
        if line is not None:
            assert e.line == line, f"line {e.line} != {line}"
        if column is not None:
            assert e.column == column, f"column {e.column} != {column}"
        return e
    raise AssertionError(f"ParseError expected for {text!r}")


def test_parse_document():
    """Statements, defaults and inferred variables."""
    print("🧪 Testing document parsing...")

    doc = parse(CUBIC_DOCUMENT)
    assert doc.variables == ("x1", "x2")
    assert doc.command == "roots"
    assert doc.precision == 6
    assert doc.is_monic
    assert len(doc.coefficients) == 4

    inferred = parse("poly: Z^2 - x1*x3\n")
    assert inferred.variables == ("x1", "x2", "x3")
    assert inferred.weights.degree([1, 1, 1]) == 3
    assert inferred.precision == 6 and inferred.seed == 0

    generic = parse("weights: generic\npoly: Z^2 - x1*x2\n")
    assert generic.variables == ("x1", "x2")
    assert not generic.weights.is_rational
    assert parse(CUBIC_DOCUMENT, weights="ord").weights.is_rational

    overridden = parse(CUBIC_DOCUMENT, command="polygon", precision="5/2", weights="1, 2")
    assert overridden.command == "polygon"
    assert overridden.precision == Fraction(5, 2)
    assert overridden.weights.weight(1) == 2

    print("✅ Document parsing tests passed\n")


def test_parse_errors():
    """Errors carry the line and column of the offending text."""
    print("🧪 Testing parse errors...")

    expect_parse_error("variables: x1, x2\npoly: Z^2 - x3\n", 2, 13)
    expect_parse_error("variables: x1\n\nfoo: 1\n", 3, 1)
    expect_parse_error("variables: x1\npoly: Z^2 - (x1\n", 2, 13)
    e = expect_parse_error("variables: x1\npoly: Z^2 - x1^(1/2)\n", 2)
    assert "Fractional exponents" in e.message
    expect_parse_error("variables: x1\npoly: Z^2 - x1^-1\n", 2)
    expect_parse_error("variables: x1, Z\npoly: Z^2 - x1\n", 1)
    expect_parse_error("poly: Z^2 - x1\ncommand: solve\n", 2)
    expect_parse_error("poly: Z^2 - x1\nprecision: -1\n", 2)
    expect_parse_error("poly: Z^2 - x1\npoly: Z - x1\n", 2)

    nonmonic = "variables: x1\npoly: 2*Z^2 - x1\n"
    e = expect_parse_error(nonmonic, 2)
    assert "scale_nonmonic" in e.message
    assert not parse(nonmonic, scale_nonmonic=True).is_monic

    try:
        parse_expression("x1 +* x2", ["x1", "x2"], 1)
        assert False, "dangling operator"
    except ParseError:
        pass

    print("✅ Parse error tests passed\n")


def test_run_commands():
    """Dispatch of the main commands."""
    print("🧪 Testing command dispatch...")

    roots = run(parse(CUBIC_DOCUMENT))
    assert roots.results["total_count"] == 3
    assert "z = " in roots.text

    polygon = run(parse(CUBIC_DOCUMENT, command="polygon"))
    assert [edge["length"] for edge in polygon.results["edges"]] == [2, 1]
    assert serialize(polygon, "svg").startswith("<svg")

    rel = run(parse("weights: 1, 2\ncommand: rel\nq: 3\n"))
    assert rel.results["alpha_prime"] == [3, 6]
    assert rel.results["relations"] == [[-2, 1]]

    gap = run(parse("weights: 1, 2\nseries: x2/x1 + (x2/x1)^2 + (x2/x1)^6 + (x2/x1)^24\n"
                    "precision: 30\ncommand: gap\na_max: 3\ncount: 3\n"))
    assert gap.results["verdict"]["status"] == "flagged"

    ift = run(parse("variables: x1, x2\npoly: Z^2 - x1^2 - x2^3\napprox: x1\nprecision: 5\ncommand: ift\n"))
    assert (ift.results["witness"]["a"], ift.results["witness"]["b"]) == (2, 0)

    try:
        run(parse("variables: x1\npoly: Z^2 - 2*x1*Z + x1^2\n"))
        assert False, "(Z - x1)^2 is not squarefree"
    except NotSquarefreeError as e:
        assert e.details["command"] == "roots"
        assert e.exit_code == 3

    print("✅ Command dispatch tests passed\n")


def test_serialization():
    """Deterministic JSON, text and the SVG restriction."""
    print("🧪 Testing serialization...")

    first = serialize(run(parse(CUBIC_DOCUMENT)), "json")
    second = serialize(run(parse(CUBIC_DOCUMENT)), "json")
    assert first == second

    data = json.loads(first)
    assert data["success"] is True
    assert data["precision"]["bound"] == "6"
    assert data["provenance"]["seed"] == 0
    assert data["input"]["variables"] == ["x1", "x2"]

    try:
        serialize(run(parse(CUBIC_DOCUMENT)), "svg")
        assert False, "SVG is for polygons only"
    except ParseError as e:
        assert e.exit_code == 2

    print("✅ Serialization tests passed\n")


def test_load_root():
    """A root read back from JSON still solves the polynomial."""
    print("🧪 Testing root round trip...")

    doc = parse("variables: x1, x2\npoly: Z^2 - x1*x2\nprecision: 4\n")
    data = json.loads(serialize(run(doc), "json"))
    P = MonicPoly.from_expr(doc.poly, make_ring(doc))
    for entry in data["results"]["roots"]:
        root = load_root(entry, doc.weights)
        assert root.count == entry["count"]
        assert [level.name for level in root.tower.levels] == [item["gen"] for item in entry["tower"]]
        value = P.embed(root.ring).evaluate(root.expansion, cap=root.precision)
        assert vanishes_to(value, root.precision)
        assert "homogeneous" in entry
        assert root.homogeneous is not None
        assert root.to_dict()["homogeneous"] == entry["homogeneous"]

    try:
        load_root({"tower": [{"gen": "g1", "minpoly": "Z^2 +* x1", "kind": "homogeneous"}]}, doc.weights)
        assert False, "unreadable polynomial"
    except (ParseError, DomainError):
        pass

    print("✅ Root round trip tests passed\n")


def random_document(rng: random.Random) -> str:
    """A roots document with a quadratic whose roots are rational or square roots of monomials."""
    monomials = ["x1", "x2", "x1*x2", "x1^2", "x2^2"]

    def small() -> str:
        text = str(rng.choice([-2, -1, 1, 2]))
        for monomial in rng.sample(monomials, 2):
            text += f" {rng.choice(['+', '-'])} {rng.choice([1, 2])}*{monomial}"
        return text

    if rng.random() < 0.5:
        s1 = small()
        s2 = f"{s1} {rng.choice(['+', '-'])} {rng.choice([1, 2])}*{rng.choice(monomials)}"
        poly = f"(Z - ({s1}))*(Z - ({s2}))"
    else:
        poly = f"(Z - ({small()}))^2 - {rng.choice([1, 2])}*x1^{rng.choice([1, 3])}*x2^{rng.randint(0, 2)}"
    weights = rng.choice(["1, 1", "1, 2", "2, 3", "1, sqrt(2)", "ord"])
    return (f"variables: x1, x2\nweights: {weights}\npoly: {poly}\n"
            f"precision: {rng.choice([3, 4])}\nseed: {rng.randint(0, 5)}\ncommand: roots\n")


def test_generated_documents():
    """Generated documents serialize identically on every run and their roots read back unchanged."""
    print("🧪 Testing generated documents...")

    rng = random.Random(17)
    for _ in range(100):
        text = random_document(rng)
        first = serialize(run(parse(text)), "json")
        second = serialize(run(parse(text)), "json")
        assert first == second, text

        doc = parse(text)
        data = json.loads(first)
        assert sum(entry["count"] for entry in data["results"]["roots"]) == 2, text
        for entry in data["results"]["roots"]:
            assert load_root(entry, doc.weights).to_dict() == entry, text

    print("✅ Generated document tests passed\n")


def main():
    """Run all tests."""
    print("🚀 Starting Document Parser Tests\n")

    try:
        test_parse_document()
        test_parse_errors()
        test_run_commands()
        test_serialization()
        test_load_root()
        test_generated_documents()

        print("🎉 All document parser tests passed!")

    except Exception as e:
        print(f"❌ Test failed: {e}")
        import traceback
        traceback.print_exc()
        return 1

    return 0


if __name__ == "__main__":
    exit(main())
