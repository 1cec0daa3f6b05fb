"""
Command-line interface.

    lesion-symmetry classify --masks DIR [--pair-set algorithm|table] [--mode symmetric|literal]
    lesion-symmetry label --masks DIR --out labels.csv
    lesion-symmetry eval (--pred CSV --truth CSV | --cm CSV) --out report.json
    lesion-symmetry augment --masks DIR --labels CSV --out DIR
    lesion-symmetry split --labels CSV --seed S --out manifest.json
    lesion-symmetry svm train|predict|evaluate ...
    lesion-symmetry synth --kind K --count N --seed S --out DIR

Exit codes: 0 success, 1 data error (one ``error: <Code>: <message>`` line on stderr),
2 usage error.
"""

import argparse
import csv
import io
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from . import __version__
from .base import GsaaConfig, IndicatorMode, PairSet
from .dataset import (
    DEFAULT_FRACTIONS,
    SplitManifest,
    augment_mirror,
    augmented_labels,
    ingest_labels,
    save_labels,
    split,
)
from .exceptions import LesionSymmetryError
from .gsaa import GSAAnalyzer
from .mask import SAVE_FORMATS, iter_mask_files, read_mask, write_mask
from .metrics import (
    ClassSet,
    confusion_matrix,
    full_report,
    load_confusion_matrix,
    load_label_pairs,
    save_confusion_matrix_plot,
)
from .svm import (
    OvoEnsemble,
    SvmHyper,
    evaluate,
    load_features,
    predict_set,
    predictions_to_csv,
    train_ovo,
)
from .synth import ShapeKind, synth_dataset

logger = logging.getLogger(__name__)

CLASSIFY_HEADER = [
    "image_id",
    "label",
    "a_p",
    "b_p",
    "c_p",
    "d_p",
    "i1",
    "i2",
    "i3",
    "i4",
    "warnings",
]


def configure_logging(verbose: int = 0, quiet: bool = False) -> None:
    if quiet:
        level = logging.ERROR
    elif verbose >= 2:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        level = logging.WARNING
    logging.basicConfig(
        stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s", force=True
    )


def _write(path: str, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def _read(path: str) -> bytes:
    return Path(path).read_bytes()


def _fractions(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _gsaa_config(args: argparse.Namespace) -> GsaaConfig:
    return GsaaConfig(
        pair_set=args.pair_set, indicator_mode=args.mode, lower=args.lower, upper=args.upper
    )


def _load_masks(directory: str):
    return [read_mask(path) for _, path in iter_mask_files(directory)]


def _classify_masks(args: argparse.Namespace):
    analyzer = GSAAnalyzer(_gsaa_config(args))
    results = analyzer.run(_load_masks(args.masks), workers=args.workers)
    if getattr(args, "json", None):
        analyzer.save_json(args.json)
    if getattr(args, "plot", None):
        analyzer.save_plot(args.plot)
    return analyzer, results


def cmd_classify(args: argparse.Namespace) -> int:
    analyzer, results = _classify_masks(args)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CLASSIFY_HEADER)
    for result in results:
        writer.writerow(
            [result.source_id, result.label.value]
            + list(result.counts.as_tuple())
            + list(result.indicators)
            + [";".join(w.value for w in result.warnings)]
        )
    if args.out:
        _write(args.out, buffer.getvalue())
        print(f"classified {len(results)} masks: {analyzer.count_labels()}")
    else:
        sys.stdout.write(buffer.getvalue())
    return 0


def cmd_label(args: argparse.Namespace) -> int:
    analyzer, results = _classify_masks(args)
    _write(args.out, save_labels({r.source_id: r.label for r in results}))
    print(f"labeled {len(results)} masks: {analyzer.count_labels()}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    if args.cm:
        classes = ClassSet(tuple(args.classes.split(","))) if args.classes else None
        cm = load_confusion_matrix(_read(args.cm), classes)
    else:
        pred, truth, classes = load_label_pairs(_read(args.pred), _read(args.truth))
        cm = confusion_matrix(pred, truth, classes)
    report = full_report(cm)
    _write(args.out, report.to_json() + "\n")
    if args.plot:
        save_confusion_matrix_plot(cm, args.plot)
    rendered = report.rendered(3)
    print(f"n {report.n} accuracy {rendered['accuracy']} kappa {rendered['kappa']}")
    return 0


def cmd_augment(args: argparse.Namespace) -> int:
    labels = ingest_labels(_read(args.labels))
    masks = {mask.source_id: mask for mask in _load_masks(args.masks)}
    items = augment_mirror(masks, labels, workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for item in items:
        write_mask(item.mask, out / f"{item.image_id}.{args.format}", args.format)
    _write(str(out / "labels.csv"), save_labels(augmented_labels(items)))
    print(f"wrote {len(items)} masks to {out}")
    return 0


def cmd_split(args: argparse.Namespace) -> int:
    labels = ingest_labels(_read(args.labels))
    manifest = split(labels.ids, args.fractions, args.seed, test_count=args.test_count)
    _write(args.out, manifest.to_json() + "\n")
    print(f"train {len(manifest.train)} val {len(manifest.val)} test {len(manifest.test)}")
    return 0


def _subset(features, manifest_path: Optional[str], subset: str):
    if not manifest_path:
        return features
    manifest = SplitManifest.from_json(_read(manifest_path).decode("utf-8"))
    return features.select(getattr(manifest, subset))


def cmd_svm_train(args: argparse.Namespace) -> int:
    features = _subset(load_features(_read(args.features)), args.manifest, "train")
    hyper = SvmHyper(lam=args.lam, epochs=args.epochs, standardize=not args.no_standardize)
    ensemble = train_ovo(features, hyper, seed=args.seed, workers=args.workers)
    _write(args.out, ensemble.to_json() + "\n")
    print(f"trained {len(ensemble.models)} pair models on {len(features)} records")
    return 0


def cmd_svm_predict(args: argparse.Namespace) -> int:
    ensemble = OvoEnsemble.from_json(_read(args.model).decode("utf-8"))
    features = _subset(load_features(_read(args.features)), args.manifest, args.subset)
    predictions = predict_set(ensemble, features)
    _write(args.out, predictions_to_csv(features.ids, predictions, ensemble.classes))
    print(f"predicted {len(predictions)} records")
    return 0


def cmd_svm_evaluate(args: argparse.Namespace) -> int:
    ensemble = OvoEnsemble.from_json(_read(args.model).decode("utf-8"))
    features = _subset(load_features(_read(args.features)), args.manifest, args.subset)
    cm = evaluate(ensemble, features)
    report = full_report(cm)
    _write(args.out, report.to_json() + "\n")
    if args.plot:
        save_confusion_matrix_plot(cm, args.plot)
    rendered = report.rendered(3)
    print(f"n {report.n} accuracy {rendered['accuracy']} kappa {rendered['kappa']}")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    items = synth_dataset(args.kind, args.count, args.seed, size=args.size)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for item in items:
        write_mask(item.mask, out / f"{item.image_id}.{args.format}", args.format)
    _write(str(out / "labels.csv"), save_labels({i.image_id: i.label for i in items}))
    print(f"wrote {len(items)} masks to {out}")
    return 0


def _add_gsaa_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--masks", required=True, help="Directory of .png/.pbm/.pgm masks")
    parser.add_argument(
        "--pair-set",
        choices=[p.value for p in PairSet],
        default=PairSet.ALGORITHM.value,
        help="Quadrant pairs compared (default: algorithm)",
    )
    parser.add_argument(
        "--mode",
        choices=[m.value for m in IndicatorMode],
        default=IndicatorMode.SYMMETRIC.value,
        help="Band test of each quotient (default: symmetric)",
    )
    parser.add_argument("--lower", type=float, default=0.90, help="Lower band edge")
    parser.add_argument("--upper", type=float, default=1.10, help="Upper band edge")
    parser.add_argument("--workers", type=_positive_int, default=1, help="Worker threads")
    parser.add_argument("--json", help="Also save the analyzer run as JSON")
    parser.add_argument("--plot", help="Also save the label distribution plot")


def _add_subset_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--manifest", help="Split manifest restricting the records")
    parser.add_argument(
        "--subset", choices=["train", "val", "test"], default="test", help="Manifest subset"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lesion-symmetry",
        description="Lesion shape symmetry analysis, evaluation and one-vs-one SVM tooling",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="More logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="Errors only")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("classify", help="Classify every mask of a directory")
    _add_gsaa_options(p)
    p.add_argument("--out", help="Predictions CSV (default: stdout)")
    p.set_defaults(handler=cmd_classify)

    p = commands.add_parser("label", help="Write GSAA labels as an image_id,label table")
    _add_gsaa_options(p)
    p.add_argument("--out", required=True, help="Labels CSV")
    p.set_defaults(handler=cmd_label)

    p = commands.add_parser("eval", help="Metric report of predictions against ground truth")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--cm", help="Confusion matrix CSV (rows = predicted)")
    source.add_argument("--pred", help="Predictions CSV with image_id,label columns")
    p.add_argument("--truth", help="Ground-truth CSV with image_id,label columns")
    p.add_argument("--classes", help="Comma-separated class names of --cm rows")
    p.add_argument("--out", required=True, help="Report JSON")
    p.add_argument("--plot", help="Also save a confusion matrix heatmap")
    p.set_defaults(handler=cmd_eval)

    p = commands.add_parser("augment", help="Add horizontal and vertical mirrors")
    p.add_argument("--masks", required=True, help="Directory of masks")
    p.add_argument("--labels", required=True, help="Labels CSV")
    p.add_argument("--out", required=True, help="Output directory")
    p.add_argument("--format", choices=SAVE_FORMATS, default="png", help="Mask file format")
    p.add_argument("--workers", type=_positive_int, default=1, help="Worker threads")
    p.set_defaults(handler=cmd_augment)

    p = commands.add_parser("split", help="Seeded train/val/test split of a label table")
    p.add_argument("--labels", required=True, help="Labels CSV")
    p.add_argument(
        "--fractions",
        type=_fractions,
        default=list(DEFAULT_FRACTIONS),
        help="train,val,test fractions (default: 0.75,0.20,0.05)",
    )
    p.add_argument("--test-count", type=int, help="Exact test size, overriding its fraction")
    p.add_argument("--seed", type=int, required=True, help="Shuffle seed")
    p.add_argument("--out", required=True, help="Manifest JSON")
    p.set_defaults(handler=cmd_split)

    svm = commands.add_parser("svm", help="One-vs-one linear SVM on external features")
    svm_commands = svm.add_subparsers(dest="svm_command", required=True)

    p = svm_commands.add_parser("train", help="Train an ensemble")
    p.add_argument("--features", required=True, help="Features CSV")
    p.add_argument("--manifest", help="Split manifest; trains on its train ids")
    p.add_argument("--seed", type=int, required=True, help="Master seed")
    p.add_argument("--out", required=True, help="Model JSON")
    p.add_argument("--lambda", dest="lam", type=float, default=1e-4, help="L2 strength")
    p.add_argument("--epochs", type=_positive_int, default=20, help="Passes over the data")
    p.add_argument("--no-standardize", action="store_true", help="Train on raw features")
    p.add_argument("--workers", type=_positive_int, default=1, help="Worker threads")
    p.set_defaults(handler=cmd_svm_train)

    p = svm_commands.add_parser("predict", help="Predict labels")
    p.add_argument("--model", required=True, help="Model JSON")
    p.add_argument("--features", required=True, help="Features CSV")
    p.add_argument("--out", required=True, help="Predictions CSV")
    _add_subset_options(p)
    p.set_defaults(handler=cmd_svm_predict)

    p = svm_commands.add_parser("evaluate", help="Metric report on labeled features")
    p.add_argument("--model", required=True, help="Model JSON")
    p.add_argument("--features", required=True, help="Features CSV")
    p.add_argument("--out", required=True, help="Report JSON")
    p.add_argument("--plot", help="Also save a confusion matrix heatmap")
    _add_subset_options(p)
    p.set_defaults(handler=cmd_svm_evaluate)

    p = commands.add_parser("synth", help="Generate labeled synthetic masks")
    p.add_argument(
        "--kind", choices=[k.value for k in ShapeKind] + ["mixed"], required=True, help="Shape"
    )
    p.add_argument("--count", type=int, required=True, help="Number of masks")
    p.add_argument("--seed", type=int, required=True, help="Master seed")
    p.add_argument("--size", type=int, default=64, help="Canvas edge in pixels")
    p.add_argument("--out", required=True, help="Output directory")
    p.add_argument("--format", choices=SAVE_FORMATS, default="png", help="Mask file format")
    p.set_defaults(handler=cmd_synth)

    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv``, run the command and return the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "eval" and args.pred and not args.truth:
            parser.error("--pred requires --truth")
    except SystemExit as exc:
        return int(exc.code or 0)

    configure_logging(args.verbose, args.quiet)
    try:
        return args.handler(args)
    except ValueError as exc:
        code = exc.code if isinstance(exc, LesionSymmetryError) else type(exc).__name__
        print(f"error: {code}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main(argv: Optional[Sequence[str]] = None) -> None:
    sys.exit(run(sys.argv[1:] if argv is None else argv))


if __name__ == "__main__":
    main()
