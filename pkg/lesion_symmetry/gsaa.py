"""
Geometry shape-based asymmetry analysis (GSAA).

The mask is split into four quadrants by the horizontal and vertical lines through the
lesion centroid, the white pixels of each quadrant are counted, four count quotients are
tested against a band around 1, and the number of quotients inside the band decides the
label. All decisions use exact integer arithmetic: the centroid is kept as integer sums
and every comparison is cross-multiplied.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Tuple

import numpy as np

from .base import (
    BaseAsymmetryAnalyzer,
    GsaaConfig,
    GsaaResult,
    GsaaWarning,
    IndicatorMode,
    QuadrantCounts,
    SymmetryClass,
)
from .exceptions import EmptyMask
from .mask import BinaryMask

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Centroid:
    """Exact lesion centroid (sum_rows / count, sum_cols / count)."""

    sum_rows: int
    sum_cols: int
    count: int

    @property
    def row(self) -> Fraction:
        return Fraction(self.sum_rows, self.count)

    @property
    def col(self) -> Fraction:
        return Fraction(self.sum_cols, self.count)


def _white_coords(mask: BinaryMask) -> Tuple[np.ndarray, np.ndarray]:
    rows, cols = np.nonzero(mask.pixels)
    if rows.size == 0:
        raise EmptyMask(f"mask {mask.source_id or '<unnamed>'} has no white pixel")
    return rows.astype(np.int64), cols.astype(np.int64)


def _centroid_of(rows: np.ndarray, cols: np.ndarray) -> Centroid:
    return Centroid(int(rows.sum()), int(cols.sum()), int(rows.size))


def centroid(mask: BinaryMask) -> Centroid:
    """
    Compute the exact centroid of the white pixels.

    Raises:
        EmptyMask: The mask has no white pixel
    """
    return _centroid_of(*_white_coords(mask))


def quadrant_counts(mask: BinaryMask) -> QuadrantCounts:
    """
    Count white pixels per centroid quadrant.

    A pixel (r, c) is on the right iff c * count >= sum_cols and at the bottom iff
    r * count >= sum_rows, so pixels lying exactly on a centroid line go right / bottom.

    Raises:
        EmptyMask: The mask has no white pixel
    """
    rows, cols = _white_coords(mask)
    center = _centroid_of(rows, cols)
    right = cols * center.count >= center.sum_cols
    bottom = rows * center.count >= center.sum_rows
    return QuadrantCounts(
        a_p=int(np.count_nonzero(right & bottom)),
        b_p=int(np.count_nonzero(~right & bottom)),
        c_p=int(np.count_nonzero(~right & ~bottom)),
        d_p=int(np.count_nonzero(right & ~bottom)),
    )


def quotient_indicators(
    counts: QuadrantCounts, config: Optional[GsaaConfig] = None
) -> Tuple[Tuple[int, int, int, int], Tuple[GsaaWarning, ...]]:
    """
    Test each configured quadrant pair against the ratio band.

    Args:
        counts: Quadrant counts of a non-empty mask
        config: Pair set, indicator mode and band (defaults to GsaaConfig())

    Returns:
        (indicators in pair-set order, warnings)
    """
    config = config or GsaaConfig()
    lower, upper = config.band
    indicators = []
    warnings = set()
    for num_key, den_key in config.pair_set.pairs:
        num, den = counts.by_letter(num_key), counts.by_letter(den_key)
        if config.indicator_mode is IndicatorMode.SYMMETRIC:
            if num == 0 and den == 0:
                warnings.add(GsaaWarning.EMPTY_QUADRANT_PAIR)
                inside = False
            else:
                small, large = min(num, den), max(num, den)
                inside = small * lower.denominator >= large * lower.numerator
        else:
            if den == 0:
                warnings.add(GsaaWarning.EMPTY_QUADRANT_PAIR)
                inside = False
            else:
                inside = (
                    num * lower.denominator >= den * lower.numerator
                    and num * upper.denominator <= den * upper.numerator
                )
        indicators.append(1 if inside else 0)
    ordered = tuple(w for w in GsaaWarning if w in warnings)
    return tuple(indicators), ordered


def label_for_ones(ones_count: int) -> SymmetryClass:
    """0 indicators set -> asymmetric, 1-2 -> half-symmetric, 3-4 -> symmetric."""
    if ones_count == 0:
        return SymmetryClass.ASYMMETRIC
    if ones_count <= 2:
        return SymmetryClass.HALF_SYMMETRIC
    return SymmetryClass.SYMMETRIC


def classify(mask: BinaryMask, config: Optional[GsaaConfig] = None) -> GsaaResult:
    """
    Classify a lesion mask as asymmetric, half-symmetric or symmetric.

    Args:
        mask: Binary lesion mask
        config: Analysis configuration (defaults to GsaaConfig())

    Returns:
        GsaaResult with counts, indicators and warnings

    Raises:
        EmptyMask: The mask has no white pixel
    """
    config = config or GsaaConfig()
    counts = quadrant_counts(mask)
    indicators, pair_warnings = quotient_indicators(counts, config)
    ones = sum(indicators)

    found = set(pair_warnings)
    if counts.total < config.min_pixels_warning:
        found.add(GsaaWarning.TINY_MASK)
    if mask.non_binary:
        found.add(GsaaWarning.NON_BINARY_INPUT)
    warnings = tuple(w for w in GsaaWarning if w in found)
    if warnings:
        logger.warning(
            "mask %s: %s", mask.source_id or "<unnamed>", ", ".join(w.value for w in warnings)
        )

    return GsaaResult(
        label=label_for_ones(ones),
        counts=counts,
        indicators=indicators,
        ones_count=ones,
        warnings=warnings,
        source_id=mask.source_id,
    )


class GSAAnalyzer(BaseAsymmetryAnalyzer):
    """
    Vectorized GSAA analyzer.

    Parameters:
        config: GsaaConfig with pair set, indicator mode and band
    """

    def analyze(self, mask: BinaryMask) -> GsaaResult:
        return classify(mask, self.config)
