"""
Liouville gap detector.

An algebraic series z admits constants C, a with v(z - f/g) <= a*v(g) + C for every
approximant f/g. Approximation quality that keeps outgrowing v(g) is evidence that z
is transcendental over the power series field. The detector never proves algebraicity.
"""

import logging
from fractions import Fraction
from functools import reduce
from typing import Dict, List, Optional, Sequence, Tuple, Union

import pandas as pd

from .config import DEFAULT_CONFIG, SolverConfig
from .errors import DomainError, PrecisionError
from .graded_series import TruncatedGradedSeries
from .weights import GradeValue, format_fraction

logger = logging.getLogger(__name__)

Ratio = Union[Fraction, float]


def _ratio(error: GradeValue, size: GradeValue) -> Ratio:
    """v(error) / max(1, v(g)), exact when both values are rational."""
    denominator = size if size > 1 else GradeValue.constant(1, size.group)
    if error.is_rational() and denominator.is_rational():
        return error.rational_value() / denominator.rational_value()
    return error.to_float() / denominator.to_float()


def _format_ratio(value: Ratio) -> str:
    return format_fraction(value) if isinstance(value, Fraction) else f"{value:.6g}"


class ApproximationRecord:
    """
    Samples (v(g), v(z - f/g)) sorted by v(g).
    """

    def __init__(self, samples: Sequence[Tuple[GradeValue, GradeValue]], dropped: int = 0):
        self.samples = sorted(samples, key=lambda s: s[0])
        self.dropped = dropped

    def __len__(self):
        return len(self.samples)

    def ratios(self) -> List[Ratio]:
        return [_ratio(error, size) for size, error in self.samples]

    def to_frame(self) -> pd.DataFrame:
        rows = [{
            "nu_g": str(size),
            "nu_error": str(error),
            "ratio": _format_ratio(ratio),
        } for (size, error), ratio in zip(self.samples, self.ratios())]
        return pd.DataFrame(rows, columns=["nu_g", "nu_error", "ratio"])

    def to_dict(self) -> Dict:
        return {
            "samples": [{"nu_g": s.to_json(), "nu_error": e.to_json()} for s, e in self.samples],
            "ratios": [_format_ratio(r) for r in self.ratios()],
            "dropped": self.dropped,
        }


def record(z: TruncatedGradedSeries, approximants: Sequence[Tuple[TruncatedGradedSeries, TruncatedGradedSeries]]) -> ApproximationRecord:
    """
    Measure each approximant f/g against z.

    v(z - f/g) is computed as v(g*z - f) - v(g), so only the valuation ring is needed.

    Args:
        z: The series under test
        approximants: Pairs (f, g) in z's ring

    Returns:
        ApproximationRecord; pairs whose error lies beyond z's precision are dropped

    Raises:
        PrecisionError: if some g vanishes to its precision
    """
    samples = []
    dropped = 0
    for index, (f, g) in enumerate(approximants):
        if g.is_zero():
            raise PrecisionError(f"Approximant {index}: v(g) is undetermined (g vanishes modulo {g.precision})")
        size = g.lower_valuation()
        residual = g.multiply(z) - f.embed(z.ring)
        if residual.is_zero():
            logger.info("Approximant %d dropped: error beyond precision %s", index, residual.precision)
            dropped += 1
            continue
        samples.append((size, residual.lower_valuation() - size))
    logger.debug("Recorded %d samples, dropped %d", len(samples), dropped)
    return ApproximationRecord(samples, dropped)


class LiouvilleVerdict:
    """
    flagged when the record violates every Liouville bound with exponent <= a_max.
    """

    def __init__(self, flagged: bool, a_max, count_threshold: int,
                 evidence: List[Tuple[GradeValue, GradeValue]], ratios: List[Ratio]):
        self.flagged = flagged
        self.a_max = a_max
        self.count_threshold = count_threshold
        self.evidence = evidence
        self.ratios = ratios

    @property
    def status(self) -> str:
        return "flagged" if self.flagged else "clear"

    def to_dict(self) -> Dict:
        return {
            "status": self.status,
            "a_max": format_fraction(Fraction(self.a_max)),
            "count_threshold": self.count_threshold,
            "ratios": [_format_ratio(r) for r in self.ratios],
            "evidence": [{"nu_g": s.to_json(), "nu_error": e.to_json()} for s, e in self.evidence],
        }

    def __repr__(self):
        return f"LiouvilleVerdict({self.status}, a_max={self.a_max}, run={len(self.evidence)})"


def default_a_max(degree: Optional[int] = None, config: SolverConfig = DEFAULT_CONFIG) -> int:
    """2*deg under a degree hypothesis, else the configured default."""
    return 2 * degree if degree else config.default_a_max


def liouville_flag(rec: ApproximationRecord, a_max=None, count_threshold: Optional[int] = None,
                   config: SolverConfig = DEFAULT_CONFIG) -> LiouvilleVerdict:
    """
    Look for count_threshold consecutive samples with strictly increasing ratios
    whose last ratio exceeds a_max.

    Args:
        rec: Approximation record
        a_max: Slope threshold (config default when None)
        count_threshold: Run length (config default when None)

    Returns:
        LiouvilleVerdict with the first qualifying run as evidence
    """
    a_max = config.default_a_max if a_max is None else a_max
    count_threshold = config.default_count_threshold if count_threshold is None else count_threshold
    if count_threshold < 1:
        raise DomainError(f"count_threshold must be positive, got {count_threshold}")
    if len(rec) < count_threshold:
        raise DomainError(f"Need at least {count_threshold} samples, got {len(rec)}")

    ratios = rec.ratios()
    bound = Fraction(a_max)
    start = 0
    for end in range(len(ratios)):
        # v(g) = 0 only bounds the additive constant
        if rec.samples[end][0].is_zero():
            start = end + 1
            continue
        if end > start and not ratios[end] > ratios[end - 1]:
            start = end
        while end - start + 1 > count_threshold:
            start += 1
        if end - start + 1 == count_threshold and ratios[end] > bound:
            evidence = rec.samples[start:end + 1]
            logger.info("Liouville gap: ratios %s exceed %s", [_format_ratio(r) for r in ratios[start:end + 1]], a_max)
            return LiouvilleVerdict(True, a_max, count_threshold, evidence, ratios)
    return LiouvilleVerdict(False, a_max, count_threshold, [], ratios)


def partial_sum_approximants(z: TruncatedGradedSeries, cutoffs: Sequence) -> List[Tuple[TruncatedGradedSeries, TruncatedGradedSeries]]:
    """
    Approximants from truncations of z.

    For each cutoff c the partial sum s of the layers of degree < c is written as f/g
    with g the least common denominator of its base coefficients.

    Args:
        z: Series
        cutoffs: Degrees (numbers or GradeValues)

    Returns:
        List of (f, g) pairs
    """
    ring = z.ring
    tower = ring.tower
    field = tower.base
    pairs = []
    for cutoff in cutoffs:
        bound = ring.weights.value(cutoff)
        if z.precision is not None and z.precision < bound:
            raise PrecisionError(f"Cutoff {bound} exceeds the series precision {z.precision}")
        partial = ring.series({d: v for d, v in z.items() if d < bound})
        components = [c for _, v in partial.items() for c in (tower.flatten(v) if tower.levels else [v])]
        denominators = [c.denom for c in components if not field.is_zero(c)]
        common = reduce(lambda a, b: a.lcm(b), denominators) if denominators else None
        if common is None:
            g = ring.one()
        else:
            g = ring.from_value(tower.from_base(field.K.new(common)))
        pairs.append((partial.multiply(g), g))
    return pairs
