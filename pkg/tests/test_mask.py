"""
Unit tests for binary masks, their codecs and geometric transforms.
"""

import io
import os
import tempfile
import unittest

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from PIL import Image

from lesion_symmetry.exceptions import (
    DuplicateId,
    EncodeFailure,
    LesionSymmetryError,
    MalformedImage,
    UnsupportedFormat,
)
from lesion_symmetry.mask import (
    Axis,
    BinaryMask,
    PixelCoord,
    iter_mask_files,
    load_mask,
    mirror,
    read_mask,
    rotate180,
    save_mask,
    write_mask,
)


def mask_strategy(max_side: int = 12):
    rows = st.integers(1, max_side)
    cols = st.integers(1, max_side)
    return st.tuples(rows, cols).flatmap(
        lambda shape: st.lists(
            st.lists(st.booleans(), min_size=shape[1], max_size=shape[1]),
            min_size=shape[0],
            max_size=shape[0],
        )
    ).map(BinaryMask.from_rows)


def encode(array: np.ndarray, fmt: str, mode: str = None) -> bytes:
    buffer = io.BytesIO()
    image = Image.fromarray(array, mode) if mode else Image.fromarray(array)
    image.save(buffer, format=fmt)
    return buffer.getvalue()


class TestBinaryMask(unittest.TestCase):
    """Test cases for the BinaryMask type."""

    def setUp(self):
        self.mask = BinaryMask.from_rows(["0110", "1111", "0100"], source_id="m1")

    def test_shape_and_count(self):
        """Test shape and count."""
        self.assertEqual(self.mask.height, 3)
        self.assertEqual(self.mask.width, 4)
        self.assertEqual(self.mask.white_count, 7)
        self.assertEqual(self.mask.source_id, "m1")

    def test_indexing(self):
        """Test pixel indexing and bounds."""
        self.assertTrue(self.mask[0, 1])
        self.assertFalse(self.mask[0, 0])
        self.assertTrue(self.mask[PixelCoord(2, 1)])
        with self.assertRaises(IndexError):
            self.mask[3, 0]
        with self.assertRaises(IndexError):
            self.mask[0, -1]

    def test_iter_white_row_major(self):
        """Test iter white row major."""
        white = list(self.mask.iter_white())
        self.assertEqual(white[0], PixelCoord(0, 1))
        self.assertEqual(white[-1], PixelCoord(2, 1))
        self.assertEqual(len(white), 7)

    def test_pixels_are_read_only(self):
        """Test pixels are read only."""
        with self.assertRaises(ValueError):
            self.mask.pixels[0, 0] = True

    def test_equality_ignores_id(self):
        """Test equality ignores id."""
        self.assertEqual(self.mask, self.mask.with_id("other"))
        self.assertNotEqual(self.mask, BinaryMask.from_rows(["0110", "1111", "0110"]))

    def test_rejects_bad_shapes(self):
        """Test rejects bad shapes."""
        with self.assertRaises(ValueError):
            BinaryMask(np.zeros(5, dtype=bool))
        with self.assertRaises(ValueError):
            BinaryMask(np.zeros((0, 3), dtype=bool))

    def test_from_rows_accepts_dots_and_lists(self):
        """Test from rows accepts dots and lists."""
        self.assertEqual(BinaryMask.from_rows([".#", "#."]), BinaryMask.from_rows([[0, 1], [1, 0]]))


class TestCodecs(unittest.TestCase):
    """Test cases for load_mask / save_mask."""

    def setUp(self):
        self.mask = BinaryMask.from_rows(["00100", "01110", "11111", "01100"])

    def test_save_then_load_each_format(self):
        """Test save then load each format."""
        for fmt in ("png", "pbm", "pgm"):
            with self.subTest(fmt=fmt):
                data = save_mask(self.mask, fmt)
                loaded = load_mask(data, format_hint=fmt)
                self.assertEqual(loaded, self.mask)
                self.assertFalse(loaded.non_binary)

    @settings(
        max_examples=60,
        deadline=None,
        suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
    )
    @given(mask_strategy(max_side=24), st.sampled_from(("png", "pbm", "pgm")))
    def test_random_masks_reload_identically(self, mask, fmt):
        """Test load(save(mask)) == mask for random shapes in every format."""
        self.assertEqual(load_mask(save_mask(mask, fmt)), mask)

    def test_random_64x64_mask(self):
        """Test a seeded random 64x64 mask survives every format."""
        rng = np.random.default_rng(64)
        mask = BinaryMask(rng.random((64, 64)) < 0.5)
        for fmt in ("png", "pbm", "pgm"):
            with self.subTest(fmt=fmt):
                self.assertEqual(load_mask(save_mask(mask, fmt), format_hint=fmt), mask)

    def test_pbm_and_pgm_magic(self):
        """Test PBM and PGM magic."""
        self.assertTrue(save_mask(self.mask, "pbm").startswith(b"P4"))
        self.assertTrue(save_mask(self.mask, "pgm").startswith(b"P5"))
        self.assertTrue(save_mask(self.mask, "png").startswith(b"\x89PNG"))

    def test_plain_pgm(self):
        """Test plain PGM."""
        mask = load_mask(b"P2\n2 2\n255\n0 255\n255 0\n")
        self.assertEqual(mask, BinaryMask.from_rows(["01", "10"]))

    def test_non_binary_values_are_lesion_and_flagged(self):
        """Test non binary values are lesion and flagged."""
        gray = np.array([[0, 128], [255, 0]], dtype=np.uint8)
        with self.assertLogs("lesion_symmetry.mask", level="WARNING"):
            mask = load_mask(encode(gray, "PNG"))
        self.assertTrue(mask.non_binary)
        self.assertEqual(mask, BinaryMask.from_rows(["01", "10"]))

    def test_rgb_png_uses_luminance(self):
        """Test rgb PNG uses luminance."""
        rgb = np.zeros((2, 3, 3), dtype=np.uint8)
        rgb[0, 1] = (255, 255, 255)
        mask = load_mask(encode(rgb, "PNG"))
        self.assertEqual(mask, BinaryMask.from_rows(["010", "000"]))

    def test_sixteen_bit_png(self):
        """Test sixteen bit PNG."""
        deep = np.array([[0, 65535], [65535, 65535]], dtype=np.uint16)
        mask = load_mask(encode(deep, "PNG"))
        self.assertEqual(mask, BinaryMask.from_rows(["01", "11"]))
        self.assertFalse(mask.non_binary)

    def test_garbage_is_malformed(self):
        """Test garbage is malformed."""
        with self.assertRaises(MalformedImage) as ctx:
            load_mask(b"definitely not an image")
        self.assertIsInstance(ctx.exception, LesionSymmetryError)
        self.assertIsInstance(ctx.exception, ValueError)
        self.assertEqual(ctx.exception.code, "MalformedImage")

    def test_truncated_png_is_malformed(self):
        """Test truncated PNG is malformed."""
        data = save_mask(self.mask, "png")
        with self.assertRaises(MalformedImage):
            load_mask(data[:30])

    def test_other_formats_are_unsupported(self):
        """Test other formats are unsupported."""
        gray = np.zeros((4, 4), dtype=np.uint8)
        with self.assertRaises(UnsupportedFormat):
            load_mask(encode(gray, "BMP"))
        rgb = np.zeros((4, 4, 3), dtype=np.uint8)
        with self.assertRaises(UnsupportedFormat):
            load_mask(encode(rgb, "PPM"))

    def test_format_hint(self):
        """Test format hint."""
        data = save_mask(self.mask, "png")
        with self.assertRaises(MalformedImage):
            load_mask(data, format_hint="pgm")
        with self.assertRaises(UnsupportedFormat):
            load_mask(data, format_hint="jpg")
        self.assertEqual(load_mask(data, format_hint=".PNG"), self.mask)

    def test_unknown_output_format(self):
        """Test unknown output format."""
        with self.assertRaises(EncodeFailure):
            save_mask(self.mask, "tiff")


class TestMaskFiles(unittest.TestCase):
    """Test cases for path helpers and mask discovery."""

    def test_write_and_read_use_stem_as_id(self):
        """Test write and read use stem as id."""
        mask = BinaryMask.from_rows(["011", "110"])
        with tempfile.TemporaryDirectory() as tmp:
            path = write_mask(mask, os.path.join(tmp, "IMD002.pbm"))
            loaded = read_mask(path)
        self.assertEqual(loaded, mask)
        self.assertEqual(loaded.source_id, "IMD002")

    def test_iter_mask_files_sorted_and_filtered(self):
        """Test iter mask files sorted and filtered."""
        mask = BinaryMask.from_rows(["1"])
        with tempfile.TemporaryDirectory() as tmp:
            for name in ("b.png", "a.PGM", "c.pbm"):
                write_mask(mask, os.path.join(tmp, name), name.rsplit(".", 1)[1])
            with open(os.path.join(tmp, "notes.txt"), "w") as f:
                f.write("ignored")
            found = iter_mask_files(tmp)
        self.assertEqual([image_id for image_id, _ in found], ["a", "b", "c"])

    def test_iter_mask_files_duplicate_stem(self):
        """Test iter mask files duplicate stem."""
        mask = BinaryMask.from_rows(["1"])
        with tempfile.TemporaryDirectory() as tmp:
            write_mask(mask, os.path.join(tmp, "x.png"))
            write_mask(mask, os.path.join(tmp, "x.pgm"))
            with self.assertRaises(DuplicateId):
                iter_mask_files(tmp)


class TestTransforms(unittest.TestCase):
    """Test cases for mirrors and half-turn rotation."""

    def setUp(self):
        self.mask = BinaryMask.from_rows(["110", "000"], source_id="t")

    def test_horizontal_mirror(self):
        """Test horizontal mirror."""
        self.assertEqual(mirror(self.mask, Axis.HORIZONTAL), BinaryMask.from_rows(["011", "000"]))

    def test_vertical_mirror(self):
        """Test vertical mirror."""
        self.assertEqual(mirror(self.mask, "vertical"), BinaryMask.from_rows(["000", "110"]))

    def test_rotate180(self):
        """Test rotate180."""
        self.assertEqual(rotate180(self.mask), BinaryMask.from_rows(["000", "011"]))
        self.assertEqual(rotate180(self.mask).source_id, "t")

    @settings(max_examples=200, deadline=None)
    @given(mask_strategy())
    def test_mirror_is_an_involution(self, mask):
        """Test mirror is an involution."""
        for axis in Axis:
            self.assertEqual(mirror(mirror(mask, axis), axis), mask)

    @settings(max_examples=200, deadline=None)
    @given(mask_strategy())
    def test_rotate180_is_both_mirrors(self, mask):
        """Test rotate180 is both mirrors."""
        both = mirror(mirror(mask, Axis.HORIZONTAL), Axis.VERTICAL)
        self.assertEqual(rotate180(mask), both)
        self.assertEqual(rotate180(mask).white_count, mask.white_count)


if __name__ == "__main__":
    unittest.main()
