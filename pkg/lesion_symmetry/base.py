"""
Shared types and base class for lesion asymmetry analyzers.

This module defines the symmetry labels, the GSAA configuration and result records, and
an abstract base class that gives every analyzer the same interface for:
- Single-mask analysis
- Batch runs with a result history
- JSON output
- Visualization of the label distribution
"""

import json
import logging
from abc import ABC, abstractmethod
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Optional, Tuple

import matplotlib.pyplot as plt

from .mask import BinaryMask

logger = logging.getLogger(__name__)


class SymmetryClass(str, Enum):
    """Three-valued lesion shape label."""

    ASYMMETRIC = "asymmetric"
    HALF_SYMMETRIC = "half_symmetric"
    SYMMETRIC = "symmetric"

    @classmethod
    def parse(cls, text: str) -> "SymmetryClass":
        """Parse a label case-insensitively (``Half-Symmetric`` is accepted too)."""
        key = text.strip().lower().replace("-", "_").replace(" ", "_")
        return cls(key)


class PairSet(str, Enum):
    """Quadrant pairs whose count quotients become the four indicators."""

    ALGORITHM = "algorithm"
    TABLE = "table"

    @property
    def pairs(self) -> Tuple[Tuple[str, str], ...]:
        if self is PairSet.ALGORITHM:
            return (("a", "b"), ("a", "d"), ("b", "c"), ("c", "d"))
        return (("a", "c"), ("b", "d"), ("a", "b"), ("c", "d"))

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(f"{num.upper()}/{den.upper()}" for num, den in self.pairs)


class IndicatorMode(str, Enum):
    """
    How a quotient is tested against the band.

    ``symmetric`` sets the indicator when min/max >= lower (order independent);
    ``literal`` sets it when lower <= num/den <= upper.
    """

    SYMMETRIC = "symmetric"
    LITERAL = "literal"


class GsaaWarning(str, Enum):
    EMPTY_QUADRANT_PAIR = "empty_quadrant_pair"
    TINY_MASK = "tiny_mask"
    NON_BINARY_INPUT = "non_binary_input"


@dataclass(frozen=True)
class QuadrantCounts:
    """
    White-pixel counts of the four centroid-split regions.

    A is right-bottom, B left-bottom, C left-up and D right-up.
    """

    a_p: int
    b_p: int
    c_p: int
    d_p: int

    @property
    def total(self) -> int:
        return self.a_p + self.b_p + self.c_p + self.d_p

    def by_letter(self, letter: str) -> int:
        return getattr(self, f"{letter.lower()}_p")

    def as_tuple(self) -> Tuple[int, int, int, int]:
        return (self.a_p, self.b_p, self.c_p, self.d_p)

    def to_dict(self) -> Dict[str, int]:
        return {"a_p": self.a_p, "b_p": self.b_p, "c_p": self.c_p, "d_p": self.d_p}


@dataclass(frozen=True)
class GsaaConfig:
    """
    Configuration of the quadrant analysis.

    Attributes:
        pair_set: Which four quadrant pairs are compared
        indicator_mode: Band test applied to each pair
        lower: Lower edge of the band (0 < lower <= 1)
        upper: Upper edge of the band (upper >= 1), used by the literal mode
        min_pixels_warning: Masks with fewer white pixels get a TinyMask warning
    """

    pair_set: PairSet = PairSet.ALGORITHM
    indicator_mode: IndicatorMode = IndicatorMode.SYMMETRIC
    lower: float = 0.90
    upper: float = 1.10
    min_pixels_warning: int = 16

    def __post_init__(self):
        object.__setattr__(self, "pair_set", PairSet(self.pair_set))
        object.__setattr__(self, "indicator_mode", IndicatorMode(self.indicator_mode))
        if not (0 < self.lower <= 1 <= self.upper):
            raise ValueError(
                f"band must satisfy 0 < lower <= 1 <= upper, got ({self.lower}, {self.upper})"
            )
        if self.min_pixels_warning < 0:
            raise ValueError("min_pixels_warning must be non-negative")

    @property
    def band(self) -> Tuple[Fraction, Fraction]:
        """Band edges as exact rationals of their decimal spelling (0.90 -> 9/10)."""
        return Fraction(str(self.lower)), Fraction(str(self.upper))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "pair_set": self.pair_set.value,
            "indicator_mode": self.indicator_mode.value,
            "lower": self.lower,
            "upper": self.upper,
            "min_pixels_warning": self.min_pixels_warning,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GsaaConfig":
        return cls(**data)


@dataclass(frozen=True)
class GsaaResult:
    """Outcome of analyzing one mask."""

    label: SymmetryClass
    counts: QuadrantCounts
    indicators: Tuple[int, int, int, int]
    ones_count: int
    warnings: Tuple[GsaaWarning, ...] = ()
    source_id: Optional[str] = field(default=None, compare=False)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "source_id": self.source_id,
            "label": self.label.value,
            "counts": self.counts.to_dict(),
            "indicators": list(self.indicators),
            "ones_count": self.ones_count,
            "warnings": [w.value for w in self.warnings],
        }


class BaseAsymmetryAnalyzer(ABC):
    """
    Abstract base class for mask asymmetry analyzers.

    All analyzers must implement ``analyze``; batch runs, label counting, JSON export
    and plotting are shared.
    """

    def __init__(self, config: Optional[GsaaConfig] = None):
        """
        Initialize the analyzer.

        Args:
            config: Analysis configuration (defaults to GsaaConfig())
        """
        self.config = config or GsaaConfig()
        self.params = self.config.to_dict()
        self.history: List[GsaaResult] = []

    @abstractmethod
    def analyze(self, mask: BinaryMask) -> GsaaResult:
        """
        Analyze a single mask.

        Args:
            mask: Binary lesion mask with at least one white pixel

        Returns:
            GsaaResult for the mask
        """
        pass

    def count_labels(self) -> Dict[str, int]:
        """
        Count the results of the last run per label.

        Returns:
            Dictionary with counts for each SymmetryClass value
        """
        counts = Counter(result.label.value for result in self.history)
        # Ensure all labels are present
        for label in SymmetryClass:
            if label.value not in counts:
                counts[label.value] = 0
        return {label.value: counts[label.value] for label in SymmetryClass}

    def run(self, masks: Iterable[BinaryMask], workers: int = 1) -> List[GsaaResult]:
        """
        Analyze a sequence of masks.

        Results keep the input order whatever the number of workers.

        Args:
            masks: Masks to analyze
            workers: Number of threads to fan out over

        Returns:
            List of results, also stored as ``history``
        """
        masks = list(masks)
        if workers > 1 and len(masks) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(self.analyze, masks))
        else:
            results = [self.analyze(mask) for mask in masks]
        self.history = results
        logger.info(
            "%s analyzed %d masks: %s", type(self).__name__, len(results), self.count_labels()
        )
        return self.history

    def to_json(self, indent: int = 2) -> str:
        """
        Export the last run to JSON format.

        Args:
            indent: JSON indentation level

        Returns:
            JSON string with analyzer parameters, label summary and per-mask results
        """
        output = {
            "analyzer_type": self.__class__.__name__,
            "parameters": self.params,
            "summary": self.count_labels(),
            "results": [result.to_dict() for result in self.history],
        }
        return json.dumps(output, indent=indent)

    def save_json(self, filepath: str) -> None:
        """
        Save the last run to a JSON file.

        Args:
            filepath: Path to output JSON file
        """
        with open(filepath, "w") as f:
            f.write(self.to_json())

    def _draw_distribution(self, title: Optional[str], figsize: tuple) -> None:
        if not self.history:
            raise ValueError("No results to plot. Run the analyzer first.")

        if title is None:
            title = f"{self.__class__.__name__} Label Distribution"

        counts = self.count_labels()
        labels = list(counts)
        colors = {"asymmetric": "#d62728", "half_symmetric": "#ff7f0e", "symmetric": "#2ca02c"}

        plt.figure(figsize=figsize)
        bars = plt.bar(labels, [counts[k] for k in labels], color=[colors[k] for k in labels])
        plt.bar_label(bars)
        plt.xlabel("Shape class", fontsize=12)
        plt.ylabel("Number of lesions", fontsize=12)
        plt.title(title, fontsize=14, fontweight="bold")
        plt.grid(True, axis="y", alpha=0.3)
        plt.tight_layout()

    def plot(self, title: Optional[str] = None, figsize: tuple = (8, 5)) -> None:
        """
        Plot the label distribution of the last run.

        Args:
            title: Plot title (uses analyzer name if not provided)
            figsize: Figure size (width, height)
        """
        self._draw_distribution(title, figsize)
        plt.show()

    def save_plot(
        self, filepath: str, title: Optional[str] = None, figsize: tuple = (8, 5), dpi: int = 150
    ) -> None:
        """
        Save the label distribution plot to a file.

        Args:
            filepath: Path to output image file
            title: Plot title (uses analyzer name if not provided)
            figsize: Figure size (width, height)
            dpi: Resolution in dots per inch
        """
        self._draw_distribution(title, figsize)
        plt.savefig(filepath, dpi=dpi, bbox_inches="tight")
        plt.close()
