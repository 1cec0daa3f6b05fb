"""
Lesion Symmetry Package

Shape-symmetry analysis of binary skin-lesion masks and the tooling around it:
evaluation metrics, a one-vs-one linear SVM over externally extracted features,
dataset augmentation and splitting, and synthetic masks of known class.

Analyzers:
    - GSAAnalyzer: Vectorized quadrant-count symmetry analysis
    - OracleAnalyzer: Per-pixel reference implementation of the same analysis
"""

from .base import (
    BaseAsymmetryAnalyzer,
    GsaaConfig,
    GsaaResult,
    GsaaWarning,
    IndicatorMode,
    PairSet,
    QuadrantCounts,
    SymmetryClass,
)
from .exceptions import LesionSymmetryError
from .gsaa import GSAAnalyzer, centroid, classify, quadrant_counts, quotient_indicators
from .mask import Axis, BinaryMask, load_mask, mirror, read_mask, rotate180, save_mask, write_mask
from .metrics import ClassSet, ConfusionMatrix, MetricsReport, confusion_matrix, full_report
from .synth import OracleAnalyzer, ShapeKind, ShapeSpec, generate, oracle_classify

__all__ = [
    "Axis",
    "BaseAsymmetryAnalyzer",
    "BinaryMask",
    "ClassSet",
    "ConfusionMatrix",
    "GSAAnalyzer",
    "GsaaConfig",
    "GsaaResult",
    "GsaaWarning",
    "IndicatorMode",
    "LesionSymmetryError",
    "MetricsReport",
    "OracleAnalyzer",
    "PairSet",
    "QuadrantCounts",
    "ShapeKind",
    "ShapeSpec",
    "SymmetryClass",
    "centroid",
    "classify",
    "confusion_matrix",
    "full_report",
    "generate",
    "load_mask",
    "mirror",
    "oracle_classify",
    "quadrant_counts",
    "quotient_indicators",
    "read_mask",
    "rotate180",
    "save_mask",
    "write_mask",
]

__version__ = "0.1.0"
