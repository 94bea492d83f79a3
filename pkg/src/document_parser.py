"""
Input documents, command dispatch and output serialization.

A document holds one statement per line:

    variables: x1, x2
    weights: 1, 1
    poly: Z^3 + 3*x1*x2*Z - 2*x1^4
    precision: 6
    command: roots

Blank lines and lines starting with '#' are ignored. Expressions use integers,
rationals, the declared variables, + - * / ^ and parentheses; Z is reserved for
the polynomial variable. Exponents must be nonnegative integer literals.
"""

import json
import logging
import re
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import sympy
from sympy.parsing.sympy_parser import parse_expr, standard_transformations

from .config import DEFAULT_CONFIG, SolverConfig
from .effective_ift import effective_ift
from .errors import DomainError, ParseError, PuiseuxError
from .graded_series import SeriesRing, TruncatedGradedSeries
from .homogeneous import HomTower, from_expr as homogeneous_from_expr
from .liouville_detector import default_a_max, liouville_flag, partial_sum_approximants, record
from .newton_geometry import aj_roots, discriminant, newton_polygon, quasi_ordinary_test, weighted_disc_check
from .puiseux_solver import (
    MonicPoly, PuiseuxRoot, conjugate_roots, newton_puiseux_roots, scale_nonmonic, stability_threshold,
    stable_tower, transfer_factorization, unscale_root,
)
from .tower_arithmetic import ExtensionField, FunctionField, TowerField, UniPoly, format_expr
from .weights import GradeValue, Weights, format_fraction, kernel_relations, rel_approx, rel_approx_auto, \
    to_fraction, valuation_sandwich

logger = logging.getLogger(__name__)

STATEMENT_KEYS = (
    "variables", "weights", "poly", "precision", "command", "seed", "other", "approx", "series",
    "cutoffs", "q", "epsilon", "a_max", "count", "scale_nonmonic",
)
COMMANDS = ("roots", "polygon", "qo-check", "aj", "rel", "stability", "gap", "disc", "conjugates", "ift")
FORMATS = ("text", "json", "svg")
RESERVED = "Z"
DEFAULT_EPSILON = Fraction(1, 10)

_TOKEN = re.compile(r"(?P<number>\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>\*\*|[-+*/^()])")
_IDENTIFIER = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")
_INDEXED = re.compile(r"x(\d+)$")


class Statement:
    """A 'key: value' line with the position of its value."""

    def __init__(self, key: str, value: str, line: int, column: int):
        self.key = key
        self.value = value
        self.line = line
        self.column = column


class InputDocument:
    """
    A parsed document: variables, weights, the polynomial and the command options.
    """

    def __init__(self, variables: Sequence[str], weights: Weights, command: str, precision: Fraction,
                 seed: int, coefficients: Optional[List[sympy.Expr]] = None, scale_nonmonic: bool = False,
                 other: Optional[sympy.Expr] = None, approx: Optional[sympy.Expr] = None,
                 series: Optional[sympy.Expr] = None, options: Optional[Dict[str, Any]] = None):
        self.variables = tuple(variables)
        self.weights = weights
        self.command = command
        self.precision = precision
        self.seed = seed
        self.coefficients = coefficients
        self.scale_nonmonic = scale_nonmonic
        self.other = other
        self.approx = approx
        self.series = series
        self.options = options or {}

    @property
    def poly(self) -> Optional[sympy.Expr]:
        if self.coefficients is None:
            return None
        z = sympy.Symbol(RESERVED)
        d = len(self.coefficients) - 1
        return sum((c * z ** (d - i) for i, c in enumerate(self.coefficients)), sympy.Integer(0))

    @property
    def is_monic(self) -> bool:
        return self.coefficients is not None and self.coefficients[0] == 1

    def to_dict(self) -> Dict:
        return {
            "variables": list(self.variables),
            "weights": self.weights.to_dict(),
            "command": self.command,
            "precision": format_fraction(self.precision),
            "seed": self.seed,
            "poly": None if self.poly is None else format_expr(self.poly),
        }


class OutputDocument:
    """Results of one command plus the text rendering and the artifacts other formats need."""

    def __init__(self, command: str, results: Dict, text: str, document: InputDocument,
                 config: SolverConfig, artifacts: Optional[Dict[str, Any]] = None):
        self.command = command
        self.results = results
        self.text = text
        self.document = document
        self.config = config
        self.artifacts = artifacts or {}

    def to_dict(self) -> Dict:
        return {
            "success": True,
            "command": self.command,
            "input": self.document.to_dict(),
            "precision": {
                "bound": format_fraction(self.document.precision),
                "statement": "expansions are exact modulo terms of valuation >= bound",
            },
            "results": self.results,
            "provenance": {
                "seed": self.document.seed,
                "config": self.config.to_dict(),
            },
        }


# Parsing

def _tokens(text: str, line: int, column: int) -> List[Tuple[str, str, int]]:
    """(kind, text, column) triples; column is 1-based within the source line."""
    tokens = []
    position = 0
    while position < len(text):
        if text[position].isspace():
            position += 1
            continue
        match = _TOKEN.match(text, position)
        if match is None:
            raise ParseError(f"Unexpected character {text[position]!r}", line, column + position)
        tokens.append((match.lastgroup, match.group(), column + position))
        position = match.end()
    return tokens


def _check_grammar(tokens: List[Tuple[str, str, int]], names: Sequence[str], line: int) -> None:
    depth, opened = 0, []
    for index, (kind, text, column) in enumerate(tokens):
        if kind == "name" and text not in names:
            raise ParseError(f"Unknown variable {text!r}", line, column)
        if text == "(":
            depth += 1
            opened.append(column)
        elif text == ")":
            if depth == 0:
                raise ParseError("Unbalanced ')'", line, column)
            depth -= 1
            opened.pop()
        elif text in ("^", "**"):
            following = tokens[index + 1:index + 4]
            if following and following[0][0] == "number":
                continue
            if len(following) == 3 and following[0][1] == "(" and following[1][0] == "number" and following[2][1] == ")":
                continue
            if len(following) == 3 and following[0][1] == "(" and following[2][1] == "/":
                raise ParseError("Fractional exponents are not accepted in inputs", line, column)
            if following and following[0][1] == "-":
                raise ParseError("Negative exponents are not accepted; write a quotient instead", line, column)
            raise ParseError("Exponent must be a nonnegative integer literal", line, column)
    if depth:
        raise ParseError("Unclosed '('", line, opened[-1])


def parse_expression(text: str, names: Sequence[str], line: Optional[int] = None, column: int = 1) -> sympy.Expr:
    """
    Parse one expression over the given names.

    Args:
        text: Expression source
        names: Allowed identifiers
        line: Source line, for error positions
        column: Column of the first character of text

    Returns:
        sympy expression
    """
    tokens = _tokens(text, line, column)
    if not tokens:
        raise ParseError("Empty expression", line, column)
    _check_grammar(tokens, names, line)
    symbols = {name: sympy.Symbol(name) for name in names}
    try:
        return sympy.expand(parse_expr(text.replace("^", "**"), local_dict=symbols,
                                       transformations=standard_transformations))
    except (SyntaxError, TypeError, sympy.SympifyError, ZeroDivisionError) as e:
        raise ParseError(f"Cannot parse {text!r}: {e}", line, column)


def _statements(text: str) -> Dict[str, Statement]:
    found: Dict[str, Statement] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if ":" not in stripped:
            raise ParseError("Expected 'key: value'", number, len(raw) - len(raw.lstrip()) + 1)
        key, value = raw.split(":", 1)
        key = key.strip()
        if key not in STATEMENT_KEYS:
            raise ParseError(f"Unknown statement {key!r}", number, len(raw) - len(raw.lstrip()) + 1)
        if key in found:
            raise ParseError(f"Duplicate statement {key!r}", number, 1)
        column = len(raw) - len(value) + 1 + (len(value) - len(value.lstrip()))
        found[key] = Statement(key, value.strip(), number, column)
    return found


def _parse_number(statement: Statement, integer: bool = False, positive: bool = True):
    try:
        value = int(statement.value) if integer else Fraction(statement.value)
    except ValueError:
        raise ParseError(f"Invalid number {statement.value!r} for {statement.key}", statement.line, statement.column)
    if positive and value <= 0:
        raise ParseError(f"{statement.key} must be positive, got {statement.value}", statement.line, statement.column)
    return value


def _parse_bool(statement: Statement) -> bool:
    value = statement.value.lower()
    if value not in ("true", "false", "yes", "no", "1", "0"):
        raise ParseError(f"Invalid flag {statement.value!r}", statement.line, statement.column)
    return value in ("true", "yes", "1")


def _variables(statements: Dict[str, Statement]) -> Optional[List[str]]:
    statement = statements.get("variables")
    if statement is None:
        return None
    names = [name.strip() for name in statement.value.split(",")]
    for name in names:
        if not _IDENTIFIER.match(name):
            raise ParseError(f"Invalid variable name {name!r}", statement.line, statement.column)
        if name == RESERVED:
            raise ParseError(f"{RESERVED} is reserved for the polynomial variable", statement.line, statement.column)
    if len(set(names)) != len(names):
        raise ParseError("Variables must be distinct", statement.line, statement.column)
    return names


def _inferred_variables(statements: Dict[str, Statement]) -> List[str]:
    """x1..xn for the largest index used in any expression statement."""
    largest = 0
    for key in ("poly", "other", "approx", "series"):
        statement = statements.get(key)
        if statement is None:
            continue
        for match in re.finditer(r"[A-Za-z_][A-Za-z0-9_]*", statement.value):
            indexed = _INDEXED.match(match.group())
            if indexed:
                largest = max(largest, int(indexed.group(1)))
    if largest == 0:
        raise ParseError("Cannot infer the variables; add a 'variables:' statement")
    return [f"x{i + 1}" for i in range(largest)]


def _weights(text: Optional[str], statement: Optional[Statement], variables: Optional[List[str]],
             config: SolverConfig) -> Weights:
    line = statement.line if statement is not None else None
    column = statement.column if statement is not None else None
    keyword = text.strip().lower()
    if keyword in ("ord", "generic"):
        try:
            if keyword == "ord":
                return Weights.ord(len(variables), variables)
            return Weights.generic(len(variables), variables)
        except DomainError as e:
            raise ParseError(e.message, line, column)
    try:
        weights = Weights.parse(text, variables, config)
    except ParseError as e:
        raise ParseError(e.message, line, column)
    except (ValueError, sympy.SympifyError) as e:
        raise ParseError(f"Invalid weights {text!r}: {e}", line, column)
    if variables is not None and weights.n != len(variables):
        raise ParseError(f"{weights.n} weights for {len(variables)} variables", line, column)
    return weights


def parse(text: str, config: SolverConfig = DEFAULT_CONFIG, **overrides: Any) -> InputDocument:
    """
    Parse a document.

    Args:
        text: Document source
        config: Supplies defaults for precision and seed
        **overrides: command, precision, seed, weights, scale_nonmonic values replacing the document's

    Returns:
        InputDocument

    Raises:
        ParseError: with line and column of the offending statement
    """
    statements = _statements(text)
    overrides = {key: value for key, value in overrides.items() if value is not None}

    variables = _variables(statements)
    weights_text = overrides.get("weights")
    weights_statement = statements.get("weights")
    if weights_text is None and weights_statement is not None:
        weights_text = weights_statement.value
    if weights_text is not None:
        if not variables and weights_text.strip().lower() in ("ord", "generic"):
            variables = _inferred_variables(statements)
        weights = _weights(weights_text, weights_statement if "weights" not in overrides else None, variables, config)
        variables = variables or list(weights.variables)
    else:
        variables = variables or _inferred_variables(statements)
        weights = Weights.ord(len(variables), variables)

    command = overrides.get("command")
    if command is None:
        command = statements["command"].value if "command" in statements else "roots"
    if command not in COMMANDS:
        where = statements.get("command")
        raise ParseError(f"Unknown command {command!r}; expected one of {', '.join(COMMANDS)}",
                         where.line if where and "command" not in overrides else None,
                         where.column if where and "command" not in overrides else None)

    precision = overrides.get("precision")
    if precision is None:
        precision = _parse_number(statements["precision"]) if "precision" in statements else config.default_precision
    try:
        precision = to_fraction(precision)
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"Invalid precision {precision!r}")
    if precision <= 0:
        raise ParseError(f"Precision must be positive, got {precision}")
    seed = overrides.get("seed")
    if seed is None:
        seed = _parse_number(statements["seed"], integer=True, positive=False) if "seed" in statements else config.default_seed
    scaling = overrides.get("scale_nonmonic")
    if scaling is None:
        scaling = _parse_bool(statements["scale_nonmonic"]) if "scale_nonmonic" in statements else False

    with_z = list(variables) + [RESERVED]
    coefficients = None
    if "poly" in statements:
        coefficients = _coefficients(statements["poly"], with_z, scaling)
    elif command not in ("rel", "gap"):
        raise ParseError(f"Command {command} needs a 'poly:' statement")
    if command == "gap" and coefficients is None and "series" not in statements:
        raise ParseError("Command gap needs a 'series:' or a 'poly:' statement")

    def expression(key: str, names: Sequence[str]) -> Optional[sympy.Expr]:
        statement = statements.get(key)
        if statement is None:
            return None
        return parse_expression(statement.value, names, statement.line, statement.column)

    other = None
    if "other" in statements:
        _coefficients(statements["other"], with_z, False)
        other = expression("other", with_z)
    approx = expression("approx", variables)
    series = expression("series", variables)
    if command == "ift" and approx is None:
        raise ParseError("Command ift needs an 'approx:' statement")

    options: Dict[str, Any] = {}
    if "cutoffs" in statements:
        statement = statements["cutoffs"]
        try:
            options["cutoffs"] = [Fraction(item.strip()) for item in statement.value.split(",")]
        except ValueError:
            raise ParseError(f"Invalid cutoffs {statement.value!r}", statement.line, statement.column)
    if "q" in statements:
        options["q"] = _parse_number(statements["q"], integer=True)
    if "epsilon" in statements:
        options["epsilon"] = _parse_number(statements["epsilon"])
    if "a_max" in statements:
        options["a_max"] = _parse_number(statements["a_max"])
    if "count" in statements:
        options["count"] = _parse_number(statements["count"], integer=True)

    logger.debug("Parsed %s document over %s", command, ", ".join(variables))
    return InputDocument(variables, weights, command, precision, seed, coefficients, scaling,
                         other, approx, series, options)


def _coefficients(statement: Statement, names: Sequence[str], scaling: bool) -> List[sympy.Expr]:
    """Coefficients in Z, leading first; non-monic input needs the scaling flag."""
    expr = parse_expression(statement.value, names, statement.line, statement.column)
    z = sympy.Symbol(RESERVED)
    try:
        poly = sympy.Poly(expr, z)
    except sympy.PolynomialError as e:
        raise ParseError(f"Not a polynomial in {RESERVED}: {e}", statement.line, statement.column)
    if poly.degree() < 1:
        raise ParseError(f"Polynomial has no positive degree in {RESERVED}", statement.line, statement.column)
    coefficients = [sympy.expand(c) for c in poly.all_coeffs()]
    if sympy.simplify(coefficients[0] - 1) != 0:
        if not scaling:
            raise ParseError(f"Polynomial is not monic (leading coefficient {format_expr(coefficients[0])}); "
                             f"enable scale_nonmonic", statement.line, statement.column)
    else:
        coefficients[0] = sympy.Integer(1)
    return coefficients


# Dispatch

def _base_ring(doc: InputDocument) -> SeriesRing:
    return SeriesRing(doc.weights, TowerField(FunctionField(doc.variables)))


def _coefficient(ring: SeriesRing, expression: sympy.Expr, precision: Fraction, config: SolverConfig) -> TruncatedGradedSeries:
    """Exact when the expression has a homogeneous denominator, expanded generously otherwise."""
    try:
        return ring.from_expr(expression)
    except DomainError:
        return ring.from_expr(expression, ring.weights.value(precision * config.precision_slack_factor * 4))


def _monic(ring: SeriesRing, coefficients: Sequence[sympy.Expr], precision: Fraction,
           config: SolverConfig) -> MonicPoly:
    return MonicPoly(ring, [_coefficient(ring, c, precision, config) for c in coefficients[1:]])


def _polynomial(doc: InputDocument, ring: SeriesRing, config: SolverConfig) -> Tuple[MonicPoly, Optional[sympy.Expr]]:
    """The monic polynomial to work on and the leading coefficient when it was scaled."""
    if doc.is_monic:
        return _monic(ring, doc.coefficients, doc.precision, config), None
    P, leading = scale_nonmonic(doc.coefficients, ring)
    logger.info("Scaled non-monic input by leading coefficient %s", format_expr(leading))
    return P, leading


def _roots(doc: InputDocument, P: MonicPoly, leading, config: SolverConfig) -> List[PuiseuxRoot]:
    roots = newton_puiseux_roots(P, doc.precision, doc.seed, config)
    if leading is not None:
        roots = [unscale_root(root, leading) for root in roots]
    return roots


def _run_roots(doc, ring, config):
    P, leading = _polynomial(doc, ring, config)
    roots = _roots(doc, P, leading, config)
    results = {
        "degree": P.degree,
        "roots": [root.to_dict() for root in roots],
        "total_count": sum(root.count for root in roots),
    }
    return results, "\n".join(root.to_text() for root in roots), {}


def _run_conjugates(doc, ring, config):
    P, leading = _polynomial(doc, ring, config)
    roots = _roots(doc, P, leading, config)
    expanded = [conjugate_roots(root) for root in roots]
    results = {
        "degree": P.degree,
        "groups": [[branch.to_dict() for branch in group] for group in expanded],
    }
    lines = []
    for index, group in enumerate(expanded):
        lines.append(f"group {index} ({len(group)} branch(es)):")
        lines.extend(branch.to_text() for branch in group)
    return results, "\n".join(lines), {}


def _run_polygon(doc, ring, config):
    P, _ = _polynomial(doc, ring, config)
    polygon = newton_polygon(P)
    return polygon.to_dict(), polygon.to_text(), {"polygon": polygon}


def _run_qo_check(doc, ring, config):
    P, _ = _polynomial(doc, ring, config)
    result = quasi_ordinary_test(P)
    text = "quasi-ordinary" if result.is_quasi_ordinary else f"not quasi-ordinary: {result.obstruction}"
    if result.beta is not None:
        text += f"\nmonomial: {result.beta.render(ring.variables)}"
    return result.to_dict(), text, {}


def _run_aj(doc, ring, config):
    P, _ = _polynomial(doc, ring, config)
    result = aj_roots(P, doc.precision, doc.seed, config)
    lines = [f"q = {result.q}"]
    for root, vectors in zip(result.roots, result.exponents):
        lines.append(root.to_text())
        lines.append("  exponents: " + ", ".join(v.render(ring.variables) for v in vectors))
    return result.to_dict(), "\n".join(lines), {}


def _run_rel(doc, ring, config):
    weights = doc.weights
    epsilon = doc.options.get("epsilon", DEFAULT_EPSILON)
    lattice = kernel_relations(weights)
    if "q" in doc.options:
        q = doc.options["q"]
        alpha = rel_approx(weights, q, epsilon, config=config)
    else:
        q, alpha = rel_approx_auto(weights, epsilon, config=config)
    results = {
        "relations": lattice.to_list(),
        "q": q,
        "epsilon": format_fraction(epsilon),
        "alpha_prime": list(alpha),
    }
    lines = [
        f"relations: {lattice.to_list()}",
        f"alpha' = {tuple(alpha)} for q = {q}, epsilon = {format_fraction(epsilon)}",
    ]
    if doc.series is not None:
        series = _coefficient(ring, doc.series, doc.precision, config).truncate(ring.weights.value(doc.precision))
        sandwich = valuation_sandwich(series, weights, alpha, q, epsilon)
        results["sandwich"] = sandwich.to_dict()
        lines.append(f"nu' = {format_fraction(sandwich.nu_prime)} within "
                     f"[{format_fraction(sandwich.lower)}, {format_fraction(sandwich.upper)}] * nu = {sandwich.nu}")
    return results, "\n".join(lines), {}


def _run_stability(doc, ring, config):
    P, _ = _polynomial(doc, ring, config)
    threshold = stability_threshold(P)
    roots = newton_puiseux_roots(P, doc.precision, doc.seed, config)
    tower, c = stable_tower(P, roots, doc.precision, doc.seed, config)
    results = {"threshold": threshold.to_json(), "c": c.to_json(), "tower": tower.to_dict()}
    lines = [f"threshold (d/2) v(disc) = {threshold}", f"c = {c}"]
    lines.extend(tower.describe())
    if doc.other is not None:
        Q = MonicPoly.from_expr(doc.other, ring)
        matches = transfer_factorization(P, Q, roots, doc.seed, config)
        results["transfer"] = [match.to_dict() for match in matches]
        results["irreducible"] = len(matches) == 1
        for match in matches:
            lines.append(f"{match.p_factor.to_str()}  ->  {match.q_factor.to_str()}")
    return results, "\n".join(lines), {}


def _gap_report(z: TruncatedGradedSeries, cutoffs, a_max, count, config) -> Tuple[Dict, str]:
    if cutoffs is None:
        cutoffs = z.keys()[1:]
    rec = record(z, partial_sum_approximants(z, cutoffs))
    verdict = liouville_flag(rec, a_max, count, config)
    text = rec.to_frame().to_string(index=False) + f"\n{verdict.status} (a_max {a_max})"
    return {"record": rec.to_dict(), "verdict": verdict.to_dict()}, text


def _run_gap(doc, ring, config):
    count = doc.options.get("count")
    precision = ring.weights.value(doc.precision)
    if doc.series is not None:
        z = _coefficient(ring, doc.series, doc.precision, config).truncate(precision)
        a_max = doc.options.get("a_max", default_a_max(None, config))
        return (*_gap_report(z, doc.options.get("cutoffs"), a_max, count, config), {})

    P, leading = _polynomial(doc, ring, config)
    a_max = doc.options.get("a_max", default_a_max(P.degree, config))
    reports, lines = [], []
    for root in _roots(doc, P, leading, config):
        try:
            report, text = _gap_report(root.expansion, None, a_max, count, config)
        except DomainError as e:
            report, text = {"verdict": {"status": "insufficient", "reason": e.message}}, f"insufficient: {e.message}"
        report["root"] = root.initial_term()
        reports.append(report)
        lines.append(f"root starting {root.initial_term()}:\n{text}")
    return {"roots": reports}, "\n".join(lines), {}


def _run_disc(doc, ring, config):
    P, _ = _polynomial(doc, ring, config)
    disc = discriminant(P)
    weighted = weighted_disc_check(P)
    results = {"discriminant": disc.to_json(), "weighted": weighted.to_dict()}
    lines = [f"discriminant = {disc.to_str()}"]
    if not disc.is_zero():
        threshold = stability_threshold(P)
        results["threshold"] = threshold.to_json()
        lines.append(f"valuation {disc.lower_valuation()}, threshold {threshold}")
    if weighted.holds:
        lines.append(f"delta = {format_expr(weighted.delta)}")
    return results, "\n".join(lines), {}


def _run_ift(doc, ring, config):
    P, _ = _polynomial(doc, ring, config)
    u = ring.from_expr(doc.approx)
    root = effective_ift(P, u, doc.precision, config)
    witness = root.witness
    text = root.to_text() + f"\n  delta = {format_expr(witness.delta)}, m(i) <= {witness.a}*i + {witness.b}"
    return root.to_dict(), text, {}


HANDLERS: Dict[str, Callable] = {
    "roots": _run_roots,
    "conjugates": _run_conjugates,
    "polygon": _run_polygon,
    "qo-check": _run_qo_check,
    "aj": _run_aj,
    "rel": _run_rel,
    "stability": _run_stability,
    "gap": _run_gap,
    "disc": _run_disc,
    "ift": _run_ift,
}


def run(doc: InputDocument, config: SolverConfig = DEFAULT_CONFIG) -> OutputDocument:
    """
    Dispatch a document to its command.

    Raises:
        PuiseuxError: from the command, with the command name added to its details
    """
    ring = _base_ring(doc)
    logger.info("Running %s at precision %s (seed %d)", doc.command, format_fraction(doc.precision), doc.seed)
    try:
        results, text, artifacts = HANDLERS[doc.command](doc, ring, config)
    except PuiseuxError as e:
        e.details.setdefault("command", doc.command)
        raise
    return OutputDocument(doc.command, results, text, doc, config, artifacts)


def serialize(out: OutputDocument, fmt: str = "json") -> str:
    """
    Render an output document.

    Args:
        out: Output document
        fmt: "text", "json" or "svg" (polygon only)
    """
    if fmt == "json":
        return json.dumps(out.to_dict(), indent=2, sort_keys=True) + "\n"
    if fmt == "text":
        return out.text + "\n"
    if fmt == "svg":
        polygon = out.artifacts.get("polygon")
        if polygon is None:
            raise ParseError(f"SVG output is only available for the polygon command, not {out.command}")
        return polygon.to_svg()
    raise ParseError(f"Unknown format {fmt!r}; expected one of {', '.join(FORMATS)}")


# Reading results back

def load_root(data: Dict, weights: Weights) -> PuiseuxRoot:
    """
    Rebuild a root from its JSON form.

    Args:
        data: One entry of a roots result
        weights: Weights of the document that produced it

    Returns:
        PuiseuxRoot over a tower rebuilt from the listed minimal polynomials
    """
    base = FunctionField(weights.variables)
    tower = TowerField(base)
    names = list(weights.variables)
    z = sympy.Symbol(RESERVED)

    def read(text: str) -> sympy.Expr:
        symbols = {name: sympy.Symbol(name) for name in names + [RESERVED]}
        try:
            return parse_expr(text.replace("^", "**"), local_dict=symbols, transformations=standard_transformations)
        except (SyntaxError, TypeError, sympy.SympifyError) as e:
            raise ParseError(f"Cannot read {text!r}: {e}")

    def grade(coords) -> Optional[GradeValue]:
        return None if coords is None else GradeValue([to_fraction(c) for c in coords], weights.group)

    for entry in data.get("tower", []):
        poly = sympy.Poly(read(entry["minpoly"]), z)
        coefficients = [tower.from_expr(c) for c in reversed(poly.all_coeffs())]
        modulus = UniPoly(tower.top, coefficients)
        level = ExtensionField(tower.top, entry["gen"], modulus, entry["kind"], grade(entry.get("degree")),
                               entry.get("counted", False), entry.get("pinned", not entry.get("counted", False)))
        tower = TowerField(base, tower.levels + (level,))
        names.append(entry["gen"])

    ring = SeriesRing(weights, tower)
    layers = {grade(item["deg"]): tower.from_expr(read(item["term"])) for item in data.get("expansion", [])}
    expansion = TruncatedGradedSeries(ring, layers, grade(data.get("precision")))

    certificate = None
    if "homogeneous" in data:
        base_ring = SeriesRing(weights, TowerField(base))
        elements = []
        for entry in data["homogeneous"].get("elements", []):
            element = homogeneous_from_expr(read(entry["minpoly"]), base_ring, entry["gen"], grade(entry.get("degree")))
            element.minimality_certified = entry.get("minimality_certified", False)
            elements.append(element)
            names.append(entry["gen"])
        expressions = {name: read(text) for name, text in data["homogeneous"].get("expressions", {}).items()}
        certificate = HomTower(base_ring, elements, expressions)
    return PuiseuxRoot(ring, expansion, data.get("count", 1), homogeneous=certificate,
                       back_substitution=data.get("back_substitution"))
