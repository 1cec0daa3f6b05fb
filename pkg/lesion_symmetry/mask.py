"""
Binary lesion masks.

This module holds the mask representation used across the package, its PNG / PBM / PGM
codecs and the elementary geometric transforms (mirrors and half-turn rotation).
Row 0 is the top of the image and column 0 its left edge, in every module.
"""

import io
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterator, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from .exceptions import DuplicateId, EncodeFailure, MalformedImage, UnsupportedFormat

logger = logging.getLogger(__name__)

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
PBM_MAGIC = (b"P1", b"P4")
PGM_MAGIC = (b"P2", b"P5")
MASK_SUFFIXES = (".png", ".pbm", ".pgm")
SAVE_FORMATS = ("png", "pbm", "pgm")


class Axis(str, Enum):
    """Mirror axis: horizontal flips columns, vertical flips rows."""

    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"


class PixelCoord(NamedTuple):
    row: int
    col: int


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """
    Two-dimensional lesion mask, True = lesion (white), False = background.

    The pixel grid is stored as a read-only boolean numpy array of shape
    (height, width). Equality compares the pixel grids only, so a mask equals its
    re-decoded copy whatever its ``source_id``.

    Attributes:
        pixels: Boolean array, row-major, shape (height, width)
        source_id: Optional identifier (file stem for masks read from disk)
        non_binary: True when the decoded image held values other than 0 and the
            format maximum
    """

    pixels: np.ndarray
    source_id: Optional[str] = None
    non_binary: bool = False

    def __post_init__(self):
        grid = np.array(self.pixels, dtype=bool, copy=True)
        if grid.ndim != 2:
            raise ValueError(f"mask must be 2-dimensional, got shape {grid.shape}")
        if grid.shape[0] < 1 or grid.shape[1] < 1:
            raise ValueError(f"mask must be at least 1x1, got shape {grid.shape}")
        grid.setflags(write=False)
        object.__setattr__(self, "pixels", grid)

    @classmethod
    def from_rows(cls, rows: Sequence[Union[str, Sequence[int]]], source_id: Optional[str] = None):
        """
        Build a mask from text rows such as ``["0110", "1111"]`` or nested 0/1 lists.

        Any character other than ``0`` or ``.`` counts as lesion.
        """
        grid = [
            [ch not in "0." for ch in row] if isinstance(row, str) else [bool(v) for v in row]
            for row in rows
        ]
        return cls(np.array(grid, dtype=bool), source_id=source_id)

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def white_count(self) -> int:
        return int(np.count_nonzero(self.pixels))

    def __getitem__(self, coord: Tuple[int, int]) -> bool:
        row, col = coord
        if not (0 <= row < self.height and 0 <= col < self.width):
            raise IndexError(f"pixel {tuple(coord)} outside {self.height}x{self.width} mask")
        return bool(self.pixels[row, col])

    def iter_white(self) -> Iterator[PixelCoord]:
        """Yield the coordinates of lesion pixels in row-major order."""
        for row, line in enumerate(self.pixels.tolist()):
            for col, value in enumerate(line):
                if value:
                    yield PixelCoord(row, col)

    def with_id(self, source_id: Optional[str]) -> "BinaryMask":
        return BinaryMask(self.pixels, source_id=source_id, non_binary=self.non_binary)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    __hash__ = None

    def __repr__(self) -> str:
        return (
            f"BinaryMask({self.height}x{self.width}, white={self.white_count}, "
            f"source_id={self.source_id!r})"
        )


def _sniff(data: bytes) -> Optional[str]:
    if data.startswith(PNG_SIGNATURE):
        return "png"
    head = data[:2]
    if head in PBM_MAGIC:
        return "pbm"
    if head in PGM_MAGIC:
        return "pgm"
    return None


def _luminance(image: Image.Image) -> Tuple[np.ndarray, int]:
    """Return the integer luminance grid of a decoded image and the format maximum."""
    mode = image.mode
    if mode == "1":
        return np.array(image, dtype=np.uint8) * 255, 255
    if mode == "L":
        return np.array(image, dtype=np.uint8), 255
    if mode.startswith("I"):
        # 16-bit PGM / PNG
        return np.array(image, dtype=np.int64), 65535
    # RGB, RGBA, palette, LA: ITU-R 601-2 integer luma
    return np.array(image.convert("L"), dtype=np.uint8), 255


def load_mask(
    data: bytes, format_hint: Optional[str] = None, source_id: Optional[str] = None
) -> BinaryMask:
    """
    Decode a PNG, PBM or PGM image into a binary mask.

    Every pixel with nonzero luminance is lesion. Pixels that are neither 0 nor the
    format maximum are accepted, flagged on the mask and logged as a warning.

    Args:
        data: Raw file content
        format_hint: Optional expected format (``png``, ``pbm`` or ``pgm``)
        source_id: Identifier stored on the returned mask

    Returns:
        Decoded BinaryMask

    Raises:
        UnsupportedFormat: Content (or hint) is a format other than PNG/PBM/PGM
        MalformedImage: Content cannot be decoded
    """
    if format_hint is not None and format_hint.lower().lstrip(".") not in SAVE_FORMATS:
        raise UnsupportedFormat(f"unsupported mask format {format_hint!r}")

    try:
        image = Image.open(io.BytesIO(data))
        image.load()
    except UnidentifiedImageError as exc:
        raise MalformedImage(f"cannot identify image content ({len(data)} bytes)") from exc
    except (OSError, SyntaxError, ValueError) as exc:
        raise MalformedImage(f"cannot decode image: {exc}") from exc

    detected = _sniff(data)
    if image.format not in ("PNG", "PPM") or detected is None:
        raise UnsupportedFormat(f"{image.format or 'unknown'} images are not supported")
    if format_hint is not None:
        hint = format_hint.lower().lstrip(".")
        if hint != detected:
            raise MalformedImage(f"content is {detected}, expected {hint}")

    values, maximum = _luminance(image)
    if values.ndim != 2:
        raise MalformedImage(f"unexpected pixel layout {values.shape}")
    stray = int(np.count_nonzero((values != 0) & (values != maximum)))
    if stray:
        logger.warning(
            "mask %s has %d non-binary pixels (values outside {0, %d})",
            source_id or "<bytes>",
            stray,
            maximum,
        )
    return BinaryMask(values != 0, source_id=source_id, non_binary=bool(stray))


def save_mask(mask: BinaryMask, fmt: str = "png") -> bytes:
    """
    Encode a mask as 8-bit grayscale PNG, binary PBM (P4) or binary PGM (P5).

    Lesion pixels are written as 255 (white), background as 0.

    Raises:
        EncodeFailure: Unknown format or encoder error
    """
    fmt = fmt.lower().lstrip(".")
    if fmt not in SAVE_FORMATS:
        raise EncodeFailure(f"cannot encode masks as {fmt!r}")

    gray = Image.fromarray(np.where(mask.pixels, 255, 0).astype(np.uint8))
    if fmt == "pbm":
        image, pil_format = gray.convert("1", dither=Image.Dither.NONE), "PPM"
    elif fmt == "pgm":
        image, pil_format = gray, "PPM"
    else:
        image, pil_format = gray, "PNG"

    buffer = io.BytesIO()
    try:
        image.save(buffer, format=pil_format)
    except (OSError, ValueError) as exc:
        raise EncodeFailure(f"cannot encode mask as {fmt}: {exc}") from exc
    return buffer.getvalue()


def read_mask(path: Union[str, Path]) -> BinaryMask:
    """Read a mask file; the file stem becomes the mask's ``source_id``."""
    path = Path(path)
    return load_mask(path.read_bytes(), format_hint=path.suffix or None, source_id=path.stem)


def write_mask(mask: BinaryMask, path: Union[str, Path], fmt: Optional[str] = None) -> Path:
    """Write a mask; the format defaults to the file extension."""
    path = Path(path)
    path.write_bytes(save_mask(mask, fmt or path.suffix or "png"))
    return path


def iter_mask_files(directory: Union[str, Path]) -> List[Tuple[str, Path]]:
    """
    List mask files of a directory as ``(image_id, path)`` sorted by id.

    Files are matched by extension (.png, .pbm, .pgm, any case); the id is the file stem.

    Raises:
        DuplicateId: Two mask files share a stem
    """
    found = {}
    for path in sorted(Path(directory).iterdir()):
        if not path.is_file() or path.suffix.lower() not in MASK_SUFFIXES:
            continue
        if path.stem in found:
            raise DuplicateId(
                f"mask id {path.stem!r} found twice ({found[path.stem].name}, {path.name})"
            )
        found[path.stem] = path
    return sorted(found.items())


def mirror(mask: BinaryMask, axis: Union[Axis, str]) -> BinaryMask:
    """
    Mirror a mask.

    Args:
        mask: Source mask
        axis: ``horizontal`` maps column c to width-1-c, ``vertical`` maps row r
            to height-1-r

    Returns:
        New mask with the same source id
    """
    axis = Axis(axis)
    flipped = np.fliplr(mask.pixels) if axis is Axis.HORIZONTAL else np.flipud(mask.pixels)
    return BinaryMask(flipped, source_id=mask.source_id, non_binary=mask.non_binary)


def rotate180(mask: BinaryMask) -> BinaryMask:
    """Rotate a mask by a half turn: pixel (r, c) moves to (height-1-r, width-1-c)."""
    return BinaryMask(
        np.flip(mask.pixels, axis=(0, 1)), source_id=mask.source_id, non_binary=mask.non_binary
    )
