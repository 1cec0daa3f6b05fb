"""
Synthetic lesion masks of known symmetry class, and a brute-force GSAA oracle.

Generators build their masks by construction (mirroring a random part) or by rejection
sampling, then re-check the result with ``oracle_classify`` before returning it, so a
generated mask always carries the class it was built for. The oracle scans pixels one by
one in plain Python integers and does not reuse the vectorized engine.
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, NamedTuple, Optional, Union

import numpy as np

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
from .exceptions import ConstructionFailed, EmptyMask
from .mask import Axis, BinaryMask

logger = logging.getLogger(__name__)

RETRY_BUDGET = 1000
MIN_SIZE = 8


class ShapeKind(str, Enum):
    DISK = "disk"
    ELLIPSE = "ellipse"
    MIRRORED_BLOB = "mirrored_blob"
    ONE_AXIS_BLOB = "one_axis_blob"
    FREE_BLOB = "free_blob"

    @property
    def symmetry(self) -> SymmetryClass:
        if self is ShapeKind.ONE_AXIS_BLOB:
            return SymmetryClass.HALF_SYMMETRIC
        if self is ShapeKind.FREE_BLOB:
            return SymmetryClass.ASYMMETRIC
        return SymmetryClass.SYMMETRIC


@dataclass(frozen=True)
class ShapeSpec:
    """
    What to generate.

    Attributes:
        kind: Shape family
        size: Canvas edge in pixels (>= 8)
        seed: Seed of the shape's random stream
        axis: Symmetry line of one_axis_blob shapes
    """

    kind: ShapeKind = ShapeKind.DISK
    size: int = 64
    seed: int = 0
    axis: Axis = Axis.VERTICAL

    def __post_init__(self):
        object.__setattr__(self, "kind", ShapeKind(self.kind))
        object.__setattr__(self, "axis", Axis(self.axis))
        if self.size < MIN_SIZE:
            raise ValueError(f"size must be at least {MIN_SIZE}, got {self.size}")

    def to_dict(self) -> Dict[str, Union[str, int]]:
        return {
            "kind": self.kind.value,
            "size": self.size,
            "seed": self.seed,
            "axis": self.axis.value,
        }


_LABEL_OF_ONES = {
    0: SymmetryClass.ASYMMETRIC,
    1: SymmetryClass.HALF_SYMMETRIC,
    2: SymmetryClass.HALF_SYMMETRIC,
    3: SymmetryClass.SYMMETRIC,
    4: SymmetryClass.SYMMETRIC,
}


def oracle_classify(mask: BinaryMask, config: Optional[GsaaConfig] = None) -> GsaaResult:
    """
    Reference GSAA classification by a full per-pixel scan.

    Raises:
        EmptyMask: The mask has no white pixel
    """
    config = config or GsaaConfig()
    grid = mask.pixels.tolist()

    count = sum_r = sum_c = 0
    for r, line in enumerate(grid):
        for c, value in enumerate(line):
            if value:
                count += 1
                sum_r += r
                sum_c += c
    if count == 0:
        raise EmptyMask(f"mask {mask.source_id or '<unnamed>'} has no white pixel")

    quadrant = {"a": 0, "b": 0, "c": 0, "d": 0}
    for r, line in enumerate(grid):
        lower_half = r * count >= sum_r
        for c, value in enumerate(line):
            if not value:
                continue
            right_half = c * count >= sum_c
            if lower_half:
                quadrant["a" if right_half else "b"] += 1
            else:
                quadrant["d" if right_half else "c"] += 1

    lo_num, lo_den = config.band[0].numerator, config.band[0].denominator
    hi_num, hi_den = config.band[1].numerator, config.band[1].denominator
    indicators = []
    empty_pair = False
    for first, second in config.pair_set.pairs:
        p, q = quadrant[first], quadrant[second]
        if config.indicator_mode is IndicatorMode.LITERAL:
            if q == 0:
                empty_pair = True
                indicators.append(0)
                continue
            ok = lo_num * q <= lo_den * p and hi_den * p <= hi_num * q
        else:
            if p == 0 and q == 0:
                empty_pair = True
                indicators.append(0)
                continue
            ok = lo_den * min(p, q) >= lo_num * max(p, q)
        indicators.append(int(ok))

    flags = {
        GsaaWarning.EMPTY_QUADRANT_PAIR: empty_pair,
        GsaaWarning.TINY_MASK: count < config.min_pixels_warning,
        GsaaWarning.NON_BINARY_INPUT: mask.non_binary,
    }
    ones = sum(indicators)
    return GsaaResult(
        label=_LABEL_OF_ONES[ones],
        counts=QuadrantCounts(quadrant["a"], quadrant["b"], quadrant["c"], quadrant["d"]),
        indicators=tuple(indicators),
        ones_count=ones,
        warnings=tuple(w for w in GsaaWarning if flags[w]),
        source_id=mask.source_id,
    )


class OracleAnalyzer(BaseAsymmetryAnalyzer):
    """Per-pixel reference analyzer; slow, used to cross-check GSAAnalyzer."""

    def analyze(self, mask: BinaryMask) -> GsaaResult:
        return oracle_classify(mask, self.config)


def is_generic(mask: BinaryMask) -> bool:
    """True when neither centroid coordinate falls on a pixel center."""
    rows, cols = np.nonzero(mask.pixels)
    count = int(rows.size)
    return count > 0 and int(rows.sum()) % count != 0 and int(cols.sum()) % count != 0


def _fourfold(quadrant: np.ndarray) -> np.ndarray:
    """Assemble a full grid from its right-bottom quadrant by mirroring it three times."""
    return np.block(
        [
            [quadrant[::-1, ::-1], quadrant[::-1, :]],
            [quadrant[:, ::-1], quadrant],
        ]
    )


def gen_symmetric(spec: ShapeSpec, config: Optional[GsaaConfig] = None) -> BinaryMask:
    """
    Build a mask with exact mirror symmetry about both centroid lines.

    One quadrant is drawn at random (a disk or ellipse sector, or random pixels for
    ``mirrored_blob``) and reflected into the other three, on an even-sized canvas, so
    the four quadrant counts are equal.

    Raises:
        ConstructionFailed: The oracle does not see four indicators set
    """
    rng = np.random.default_rng(spec.seed)
    half = spec.size // 2
    rr, cc = np.mgrid[0:half, 0:half] + 0.5
    if spec.kind is ShapeKind.DISK:
        radius = rng.uniform(0.6, 1.0) * half
        quadrant = rr**2 + cc**2 <= radius**2
    elif spec.kind is ShapeKind.ELLIPSE:
        semi_r, semi_c = rng.uniform(0.5, 1.0, size=2) * half
        quadrant = (rr / semi_r) ** 2 + (cc / semi_c) ** 2 <= 1.0
    else:
        quadrant = rng.random((half, half)) < rng.uniform(0.3, 0.7)
        quadrant[0, 0] = True

    mask = BinaryMask(_fourfold(quadrant))
    result = oracle_classify(mask, config)
    if result.ones_count != 4:
        raise ConstructionFailed(f"{spec.kind.value} seed {spec.seed}: {result.indicators}")
    return mask


def gen_half_symmetric(
    spec: ShapeSpec, axis: Union[Axis, str, None] = None, config: Optional[GsaaConfig] = None
) -> BinaryMask:
    """
    Build a mask symmetric about exactly one centroid line.

    The shape is a jittered wedge, mirrored about a vertical seam and widening towards the
    bottom, so the left and right halves match while the top and bottom masses differ.
    With ``axis="horizontal"`` the grid is transposed. Candidates are redrawn until the
    oracle labels them half-symmetric under ``config`` with a centroid off every pixel
    center.

    Args:
        spec: Size and seed
        axis: Symmetry line, ``vertical`` (left mirrors right) or ``horizontal``;
            defaults to ``spec.axis``
        config: Configuration the label is verified under (defaults to GsaaConfig())

    Raises:
        ConstructionFailed: No candidate passed within the retry budget
    """
    axis = Axis(axis or spec.axis)
    rng = np.random.default_rng(spec.seed)
    height, half = spec.size, spec.size // 2
    base = np.ceil(half * (np.arange(height) + 1) / height).astype(int)
    for _ in range(RETRY_BUDGET):
        widths = np.sort(np.clip(base + rng.integers(-1, 2, size=height), 1, half))
        right = np.arange(half)[None, :] < widths[:, None]
        grid = np.hstack([right[:, ::-1], right])
        if axis is Axis.HORIZONTAL:
            grid = grid.T
        mask = BinaryMask(grid)
        labeled_half = oracle_classify(mask, config).label is SymmetryClass.HALF_SYMMETRIC
        if labeled_half and is_generic(mask):
            return mask
    raise ConstructionFailed(f"no half-symmetric mask of size {spec.size} for seed {spec.seed}")


def gen_asymmetric(spec: ShapeSpec, config: Optional[GsaaConfig] = None) -> BinaryMask:
    """
    Rejection-sample unions of random ellipses until no indicator is set.

    Accepted masks have a centroid off every pixel center and are asymmetric under both
    pair sets in the mode of ``config``.

    Raises:
        ConstructionFailed: No candidate passed within the retry budget
    """
    config = config or GsaaConfig()
    checks = [replace(config, pair_set=pair_set) for pair_set in PairSet]
    rng = np.random.default_rng(spec.seed)
    size = spec.size
    yy, xx = np.mgrid[0:size, 0:size]
    for attempt in range(RETRY_BUDGET):
        grid = np.zeros((size, size), dtype=bool)
        for _ in range(int(rng.integers(2, 5))):
            cy, cx = rng.uniform(0.2, 0.8, size=2) * size
            ry, rx = rng.uniform(0.08, 0.3, size=2) * size
            grid |= ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
        if not grid.any():
            continue
        mask = BinaryMask(grid)
        if is_generic(mask) and all(oracle_classify(mask, c).ones_count == 0 for c in checks):
            logger.debug("asymmetric mask for seed %d after %d rejections", spec.seed, attempt)
            return mask
    raise ConstructionFailed(f"no asymmetric mask of size {size} for seed {spec.seed}")


def generate(spec: ShapeSpec, config: Optional[GsaaConfig] = None) -> BinaryMask:
    """Generate a mask of ``spec.kind``; its GSAA label is ``spec.kind.symmetry``."""
    if spec.kind is ShapeKind.ONE_AXIS_BLOB:
        return gen_half_symmetric(spec, config=config)
    if spec.kind is ShapeKind.FREE_BLOB:
        return gen_asymmetric(spec, config)
    return gen_symmetric(spec, config)


class SynthItem(NamedTuple):
    image_id: str
    mask: BinaryMask
    label: SymmetryClass


MIXED_CYCLE = (ShapeKind.MIRRORED_BLOB, ShapeKind.ONE_AXIS_BLOB, ShapeKind.FREE_BLOB)


def synth_dataset(
    kind: Union[ShapeKind, str], count: int, seed: int, size: int = 64
) -> List[SynthItem]:
    """
    Generate ``count`` labeled masks with ids ``synth_0000 ...``.

    Each item gets its own seed spawned from ``seed``. ``kind="mixed"`` cycles through
    symmetric, half-symmetric and asymmetric shapes.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    kinds = MIXED_CYCLE if str(getattr(kind, "value", kind)) == "mixed" else (ShapeKind(kind),)
    streams = np.random.SeedSequence(seed).spawn(count)
    items = []
    for i, stream in enumerate(streams):
        spec = ShapeSpec(kinds[i % len(kinds)], size, int(stream.generate_state(1)[0]))
        image_id = f"synth_{i:04d}"
        items.append(SynthItem(image_id, generate(spec).with_id(image_id), spec.kind.symmetry))
    logger.info("generated %d synthetic masks", len(items))
    return items
