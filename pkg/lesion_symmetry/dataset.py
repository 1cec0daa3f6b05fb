"""
Dataset plumbing: ground-truth label tables, mirror augmentation and seeded splits.
"""

import csv
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .base import SymmetryClass
from .exceptions import (
    BadFractions,
    DuplicateId,
    EmptyInput,
    HeaderMismatch,
    MissingMask,
    RaggedRow,
    UnknownLabel,
)
from .mask import Axis, BinaryMask, mirror

logger = logging.getLogger(__name__)

DEFAULT_FRACTIONS = (0.75, 0.20, 0.05)
MIRROR_SUFFIXES = (("_h", Axis.HORIZONTAL), ("_v", Axis.VERTICAL))


@dataclass(frozen=True)
class LabelTable:
    """Ground-truth symmetry label per image id, ordered by id."""

    entries: Dict[str, SymmetryClass] = field(default_factory=dict)

    def __post_init__(self):
        entries = {key: SymmetryClass(self.entries[key]) for key in sorted(self.entries)}
        object.__setattr__(self, "entries", entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, image_id: str) -> bool:
        return image_id in self.entries

    def __getitem__(self, image_id: str) -> SymmetryClass:
        return self.entries[image_id]

    @property
    def ids(self) -> List[str]:
        return list(self.entries)

    @property
    def counts(self) -> Dict[str, int]:
        counts = {label.value: 0 for label in SymmetryClass}
        for label in self.entries.values():
            counts[label.value] += 1
        return counts


def _text(content: Union[str, bytes]) -> str:
    return content.decode("utf-8-sig") if isinstance(content, bytes) else content


def ingest_labels(content: Union[str, bytes]) -> LabelTable:
    """
    Parse an ``image_id,label`` CSV into a LabelTable.

    Labels are matched case-insensitively (``Half-Symmetric`` is accepted).

    Raises:
        HeaderMismatch: Header is not ``image_id,label``
        RaggedRow: A row does not have two cells
        UnknownLabel: A label is not a symmetry class
        DuplicateId: An id appears twice
    """
    reader = csv.reader(io.StringIO(_text(content)))
    header = [cell.strip().lower() for cell in next(reader, [])]
    if header != ["image_id", "label"]:
        raise HeaderMismatch(f"expected header image_id,label; got {','.join(header)}")

    entries = {}
    for number, row in enumerate(reader, start=2):
        if not row or not any(cell.strip() for cell in row):
            continue
        if len(row) != 2:
            raise RaggedRow(f"line {number} has {len(row)} cells, expected 2")
        image_id, text = row[0].strip(), row[1]
        try:
            label = SymmetryClass.parse(text)
        except ValueError:
            raise UnknownLabel(f"line {number}: unknown label {text.strip()!r}") from None
        if image_id in entries:
            raise DuplicateId(f"image id {image_id!r} appears twice")
        entries[image_id] = label

    table = LabelTable(entries)
    logger.info("ingested %d labels: %s", len(table), table.counts)
    return table


def save_labels(labels: Union[LabelTable, Mapping[str, Union[str, SymmetryClass]]]) -> str:
    """Render labels as an ``image_id,label`` CSV sorted by id."""
    entries = labels.entries if isinstance(labels, LabelTable) else labels
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["image_id", "label"])
    for image_id in sorted(entries):
        label = entries[image_id]
        writer.writerow([image_id, SymmetryClass(label).value])
    return buffer.getvalue()


@dataclass(frozen=True)
class AugmentedItem:
    image_id: str
    mask: BinaryMask
    label: SymmetryClass
    source_id: str


def _mirrored(image_id: str, mask: BinaryMask, label: SymmetryClass) -> List[AugmentedItem]:
    items = [AugmentedItem(image_id, mask.with_id(image_id), label, image_id)]
    for suffix, axis in MIRROR_SUFFIXES:
        new_id = image_id + suffix
        items.append(AugmentedItem(new_id, mirror(mask, axis).with_id(new_id), label, image_id))
    return items


def augment_mirror(
    masks: Mapping[str, BinaryMask], labels: LabelTable, workers: int = 1
) -> List[AugmentedItem]:
    """
    Triple a labeled mask set with horizontal and vertical mirrors.

    For every labeled id ``x`` the output holds ``x``, ``x_h`` (horizontal mirror) and
    ``x_v`` (vertical mirror), all carrying the label of ``x``, ordered by ``x``.

    Args:
        masks: Masks by image id
        labels: Labels of the images to augment
        workers: Number of threads mirroring concurrently

    Raises:
        MissingMask: A labeled id has no mask
        DuplicateId: A mirror id coincides with another generated id, e.g. inputs
            ``x`` and ``x_h``
    """
    missing = [image_id for image_id in labels.ids if image_id not in masks]
    if missing:
        raise MissingMask(f"{len(missing)} labeled images have no mask, first {missing[0]!r}")
    generated = set()
    for image_id in labels.ids:
        for new_id in [image_id] + [image_id + suffix for suffix, _ in MIRROR_SUFFIXES]:
            if new_id in generated:
                raise DuplicateId(f"augmented id {new_id!r} would be produced twice")
            generated.add(new_id)
    unlabeled = len(set(masks) - set(labels.ids))
    if unlabeled:
        logger.debug("%d masks have no label and are not augmented", unlabeled)

    jobs = [(image_id, masks[image_id], labels[image_id]) for image_id in labels.ids]
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            groups = list(pool.map(lambda job: _mirrored(*job), jobs))
    else:
        groups = [_mirrored(*job) for job in jobs]
    items = [item for group in groups for item in group]
    logger.info("augmented %d masks into %d", len(jobs), len(items))
    return items


def augmented_labels(items: Iterable[AugmentedItem]) -> LabelTable:
    return LabelTable({item.image_id: item.label for item in items})


@dataclass(frozen=True)
class SplitManifest:
    """
    Train / validation / test partition of a set of ids.

    Attributes:
        seed: Seed of the shuffle
        fractions: (train, val, test) fractions requested
        train: Training ids, sorted
        val: Validation ids, sorted
        test: Test ids, sorted
    """

    seed: int
    fractions: Tuple[float, float, float]
    train: Tuple[str, ...]
    val: Tuple[str, ...]
    test: Tuple[str, ...]

    def __post_init__(self):
        for name in ("train", "val", "test"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "fractions", tuple(float(f) for f in self.fractions))
        total = len(self.train) + len(self.val) + len(self.test)
        if len(set(self.train) | set(self.val) | set(self.test)) != total:
            raise ValueError("train, val and test ids must be disjoint")

    @property
    def ids(self) -> List[str]:
        return sorted(self.train + self.val + self.test)

    def to_dict(self) -> Dict:
        return {
            "seed": self.seed,
            "fractions": list(self.fractions),
            "train": list(self.train),
            "val": list(self.val),
            "test": list(self.test),
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_json(cls, text: str) -> "SplitManifest":
        try:
            data = json.loads(text)
            return cls(
                seed=int(data["seed"]),
                fractions=tuple(data["fractions"]),
                train=tuple(data["train"]),
                val=tuple(data["val"]),
                test=tuple(data["test"]),
            )
        except json.JSONDecodeError as exc:
            raise HeaderMismatch(f"split manifest is not valid JSON: {exc}") from exc
        except KeyError as exc:
            raise HeaderMismatch(f"split manifest lacks {exc.args[0]!r}") from None
        except (TypeError, AttributeError) as exc:
            raise HeaderMismatch(f"malformed split manifest: {exc}") from exc


def _round_half_up(value: Decimal) -> int:
    return int(value.quantize(Decimal(1), rounding=ROUND_HALF_UP))


def _check_fractions(fractions: Sequence[float]) -> Tuple[float, float, float]:
    if len(fractions) != 3:
        raise BadFractions(f"expected three fractions (train, val, test), got {len(fractions)}")
    fractions = tuple(float(f) for f in fractions)
    if any(not f > 0 for f in fractions):
        raise BadFractions(f"fractions must be positive, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise BadFractions(f"fractions must sum to 1, got {sum(fractions)}")
    return fractions


def split(
    ids: Iterable[str],
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
    seed: int = 0,
    test_count: Optional[int] = None,
) -> SplitManifest:
    """
    Randomly partition ids into train, validation and test subsets.

    Ids are sorted first and then shuffled with the seeded PCG64 generator, so the
    manifest depends on the id set and the seed only. The test and validation sizes are
    ``n * fraction`` rounded half-up and train takes the remainder; ``test_count``
    overrides the test size.

    Args:
        ids: Image ids
        fractions: (train, val, test), positive, summing to 1
        seed: Shuffle seed
        test_count: Exact number of test ids

    Raises:
        EmptyInput: ``ids`` is empty
        BadFractions: Invalid fractions or sizes that do not fit
        DuplicateId: An id is repeated
    """
    ids = list(ids)
    if not ids:
        raise EmptyInput("no id to split")
    if len(set(ids)) != len(ids):
        raise DuplicateId("ids to split must be unique")
    fractions = _check_fractions(fractions)

    n = len(ids)
    _, val_frac, test_frac = (Decimal(str(f)) for f in fractions)
    n_test = _round_half_up(n * test_frac) if test_count is None else int(test_count)
    n_val = _round_half_up(n * val_frac)
    if not 0 <= n_test <= n:
        raise BadFractions(f"test count {n_test} outside 0..{n}")
    if n_test + n_val > n:
        raise BadFractions(f"{n_test} test and {n_val} validation ids exceed {n} ids")

    ordered = sorted(ids)
    permutation = np.random.default_rng(seed).permutation(n)
    shuffled = [ordered[i] for i in permutation]
    test = sorted(shuffled[:n_test])
    val = sorted(shuffled[n_test : n_test + n_val])
    train = sorted(shuffled[n_test + n_val :])

    logger.info("split %d ids: train %d, val %d, test %d", n, len(train), len(val), len(test))
    return SplitManifest(seed, fractions, tuple(train), tuple(val), tuple(test))
