"""
Exception hierarchy for the lesion-symmetry package.

Every domain error derives from LesionSymmetryError, itself a ValueError, so callers
that already guard against invalid input keep working. The CLI reports ``code`` as the
machine-parsable error name.
"""


class LesionSymmetryError(ValueError):
    """Base class for all data errors raised by the package."""

    @property
    def code(self) -> str:
        return type(self).__name__


# Mask I/O
class MalformedImage(LesionSymmetryError):
    """Image bytes could not be decoded."""


class UnsupportedFormat(LesionSymmetryError):
    """Image is not PNG, PBM or PGM."""


class EncodeFailure(LesionSymmetryError):
    """Mask could not be encoded to the requested format."""


# GSAA
class EmptyMask(LesionSymmetryError):
    """Mask has no lesion (white) pixel; the analysis is undefined."""


# Metrics
class LengthMismatch(LesionSymmetryError):
    """Prediction and ground-truth sequences differ in length."""


class UnknownLabel(LesionSymmetryError):
    """A label is not part of the class set."""


class EmptyMatrix(LesionSymmetryError):
    """Confusion matrix holds no observation."""


# Tabular inputs
class HeaderMismatch(LesionSymmetryError):
    """CSV header does not match the expected layout."""


class RaggedRow(LesionSymmetryError):
    """CSV row has the wrong number of cells."""


class NonFiniteValue(LesionSymmetryError):
    """Numeric cell is not a finite real number."""


class DuplicateId(LesionSymmetryError):
    """Identifier appears more than once."""


# SVM
class EmptySet(LesionSymmetryError):
    """Feature set has no record."""


class SingleClassData(LesionSymmetryError):
    """Binary training data lacks one of the two classes."""


class TooFewClasses(LesionSymmetryError):
    """One-vs-one training needs at least two classes."""


class DimensionMismatch(LesionSymmetryError):
    """Feature vector dimension differs from the model dimension."""


class UnlabeledData(LesionSymmetryError):
    """Evaluation needs labeled records."""


# Dataset operations
class MissingMask(LesionSymmetryError):
    """Label table references an image without mask."""


class EmptyInput(LesionSymmetryError):
    """Nothing to split."""


class BadFractions(LesionSymmetryError):
    """Split fractions are not positive or do not sum to one."""


# Synthetic generation
class ConstructionFailed(LesionSymmetryError):
    """Generator exhausted its retry budget without a verified mask."""


class MissingRecord(LesionSymmetryError):
    """Id listed in a split manifest has no feature record."""
