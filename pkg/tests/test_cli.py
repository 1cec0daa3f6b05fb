"""
End-to-end tests of the lesion-symmetry command line.
"""

import csv
import io
import json
import os
import tempfile
import unittest
from contextlib import redirect_stderr, redirect_stdout

import numpy as np

from lesion_symmetry import __version__
from lesion_symmetry.cli import run
from lesion_symmetry.svm import FeatureSet, save_features


def cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = run([str(a) for a in argv])
    return code, out.getvalue(), err.getvalue()


def read_text(path):
    with open(path, encoding="utf-8") as f:
        return f.read()


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


class CliTestCase(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = self._tmp.name

    def tearDown(self):
        self._tmp.cleanup()

    def path(self, *parts):
        return os.path.join(self.tmp, *parts)

    def write(self, name, text):
        with open(self.path(name), "w", encoding="utf-8") as f:
            f.write(text)
        return self.path(name)


class TestUsage(CliTestCase):
    def test_version(self):
        """Test the version flag."""
        code, out, _ = cli("--version")
        self.assertEqual(code, 0)
        self.assertIn(__version__, out)

    def test_usage_errors_exit_two(self):
        """Test usage errors exit two."""
        for argv in (
            [],
            ["classify"],
            ["eval", "--pred", "p.csv", "--out", "r.json"],
            ["eval", "--cm", "cm.csv", "--pred", "p.csv", "--out", "r.json"],
            ["split", "--labels", "l.csv", "--out", "m.json"],
            ["synth", "--kind", "square", "--count", "1", "--seed", "0", "--out", "x"],
        ):
            with self.subTest(argv=argv):
                code, _, err = cli(*argv)
                self.assertEqual(code, 2)
                self.assertIn("usage:", err)

    def test_data_error_exits_one(self):
        """Test data error exits one."""
        cm = self.write("cm.csv", "1,2,3\n4,5,6\n")
        code, _, err = cli("eval", "--cm", cm, "--out", self.path("r.json"))
        self.assertEqual(code, 1)
        self.assertTrue(err.startswith("error: RaggedRow:"), err)
        self.assertEqual(len(err.strip().splitlines()), 1)

    def test_invalid_value_exits_one(self):
        """Test invalid value exits one."""
        code, _, err = cli(
            "synth", "--kind", "disk", "--count", 1, "--seed", 0, "--size", 4, "--out", self.tmp
        )
        self.assertEqual(code, 1)
        self.assertTrue(err.startswith("error: ValueError:"), err)

    def test_missing_file_exits_one(self):
        """Test missing file exits one."""
        code, _, err = cli("eval", "--cm", self.path("nope.csv"), "--out", self.path("r.json"))
        self.assertEqual(code, 1)
        self.assertTrue(err.startswith("error: FileNotFoundError:"), err)


class TestEval(CliTestCase):
    def test_confusion_matrix_file(self):
        """Test confusion matrix file."""
        cm = self.write("cm.csv", "52,0,0\n0,30,1\n0,1,116\n")
        report_path = self.path("report.json")
        code, out, _ = cli("eval", "--cm", cm, "--out", report_path, "--plot", self.path("cm.png"))
        self.assertEqual(code, 0)
        self.assertEqual(out.strip(), "n 200 accuracy 0.990 kappa 0.982")
        report = json.loads(read_text(report_path))
        self.assertEqual(report["accuracy"], 0.99)
        self.assertEqual(report["classes"], ["asymmetric", "half_symmetric", "symmetric"])
        self.assertTrue(os.path.exists(self.path("cm.png")))

    def test_named_classes(self):
        """Test named classes."""
        cm = self.write("cm.csv", "40,10\n5,45\n")
        code, _, _ = cli(
            "eval", "--cm", cm, "--classes", "benign,malignant", "--out", self.path("r.json")
        )
        self.assertEqual(code, 0)
        report = json.loads(read_text(self.path("r.json")))
        self.assertEqual(report["kappa"], 0.7)
        self.assertEqual(report["per_class"]["benign"]["precision"], 0.8)


class TestMaskCommands(CliTestCase):
    def test_synth_then_classify(self):
        """Test synth then classify."""
        masks = self.path("disks")
        code, _, _ = cli(
            "synth", "--kind", "disk", "--count", 4, "--seed", 1, "--size", 16, "--out", masks
        )
        self.assertEqual(code, 0)
        self.assertEqual(len([n for n in os.listdir(masks) if n.endswith(".png")]), 4)

        code, out, _ = cli("classify", "--masks", masks)
        self.assertEqual(code, 0)
        rows = list(csv.DictReader(io.StringIO(out)))
        self.assertEqual([r["image_id"] for r in rows], [f"synth_{i:04d}" for i in range(4)])
        self.assertEqual({r["label"] for r in rows}, {"symmetric"})
        self.assertEqual({r["a_p"] == r["d_p"] for r in rows}, {True})

    def test_label_then_eval_scores_perfectly(self):
        """Test label then eval scores perfectly."""
        masks = self.path("mixed")
        cli("synth", "--kind", "mixed", "--count", 9, "--seed", 5, "--size", 24, "--out", masks)
        labels = self.path("gsaa.csv")
        code, _, _ = cli("label", "--masks", masks, "--out", labels, "--json", self.path("r.json"))
        self.assertEqual(code, 0)
        self.assertEqual(len(json.loads(read_text(self.path("r.json")))["results"]), 9)

        report_path = self.path("report.json")
        code, out, _ = cli(
            "eval", "--pred", labels, "--truth", os.path.join(masks, "labels.csv"),
            "--out", report_path,
        )
        self.assertEqual(code, 0)
        self.assertIn("accuracy 1.000", out)
        report = json.loads(read_text(report_path))
        self.assertEqual(report["cm"], [[3, 0, 0], [0, 3, 0], [0, 0, 3]])

    def test_classify_modes_and_formats(self):
        """Test classify modes and formats."""
        masks = self.path("blobs")
        cli(
            "synth", "--kind", "free_blob", "--count", 3, "--seed", 2, "--size", 20,
            "--out", masks, "--format", "pbm",
        )
        out_path = self.path("pred.csv")
        code, out, _ = cli(
            "classify", "--masks", masks, "--pair-set", "table", "--mode", "literal",
            "--workers", 2, "--out", out_path,
        )
        self.assertEqual(code, 0)
        self.assertIn("classified 3 masks", out)
        self.assertEqual(len(read_rows(out_path)), 3)

    def test_augment(self):
        """Test augmenting masks on disk."""
        masks = self.path("src")
        cli("synth", "--kind", "mixed", "--count", 3, "--seed", 7, "--size", 16, "--out", masks)
        out = self.path("aug")
        code, _, _ = cli(
            "augment", "--masks", masks, "--labels", os.path.join(masks, "labels.csv"),
            "--out", out, "--format", "pgm",
        )
        self.assertEqual(code, 0)
        self.assertEqual(len([n for n in os.listdir(out) if n.endswith(".pgm")]), 9)
        rows = read_rows(os.path.join(out, "labels.csv"))
        self.assertEqual(len(rows), 9)
        by_id = {row["image_id"]: row["label"] for row in rows}
        self.assertEqual(by_id["synth_0001_h"], "half_symmetric")

        code, out_text, _ = cli("classify", "--masks", out)
        predicted = {r["image_id"]: r["label"] for r in csv.DictReader(io.StringIO(out_text))}
        self.assertEqual(predicted, by_id)


class TestSplitAndSvm(CliTestCase):
    def setUp(self):
        super().setUp()
        rng = np.random.default_rng(21)
        classes = ("asymmetric", "half_symmetric", "symmetric")
        means = ((0.0, 0.0, 0.0), (8.0, 0.0, 1.0), (0.0, 8.0, -1.0))
        X = np.vstack([rng.normal(m, 1.0, size=(60, 3)) for m in means])
        labels = [c for c in classes for _ in range(60)]
        ids = [f"IMG{i:04d}" for i in range(180)]
        self.features = self.write(
            "features.csv", save_features(FeatureSet.from_arrays(X, labels, ids))
        )
        self.labels = self.write(
            "labels.csv",
            "image_id,label\n" + "".join(f"{i},{c}\n" for i, c in zip(ids, labels)),
        )

    def test_split_is_reproducible(self):
        """Test split is reproducible."""
        first, second = self.path("m1.json"), self.path("m2.json")
        code, out, _ = cli("split", "--labels", self.labels, "--seed", 3, "--out", first)
        self.assertEqual(code, 0)
        self.assertEqual(out.strip(), "train 135 val 36 test 9")
        cli("split", "--labels", self.labels, "--seed", 3, "--out", second)
        self.assertEqual(read_text(first), read_text(second))

        code, out, _ = cli(
            "split", "--labels", self.labels, "--seed", 3, "--test-count", 10,
            "--fractions", "0.7,0.2,0.1", "--out", first,
        )
        self.assertEqual(code, 0)
        self.assertEqual(out.strip(), "train 134 val 36 test 10")

    def test_bad_fractions(self):
        """Test bad fractions."""
        code, _, err = cli(
            "split", "--labels", self.labels, "--seed", 0, "--fractions", "0.5,0.6,0.1",
            "--out", self.path("m.json"),
        )
        self.assertEqual(code, 1)
        self.assertTrue(err.startswith("error: BadFractions:"), err)

    def test_train_predict_evaluate(self):
        """Test train predict evaluate."""
        manifest = self.path("split.json")
        cli("split", "--labels", self.labels, "--seed", 4, "--out", manifest)
        models = [self.path("model1.json"), self.path("model2.json")]
        for model in models:
            code, out, _ = cli(
                "svm", "train", "--features", self.features, "--manifest", manifest,
                "--seed", 9, "--lambda", 0.01, "--epochs", 10, "--out", model,
            )
            self.assertEqual(code, 0)
            self.assertIn("trained 3 pair models on 135 records", out)
        self.assertEqual(read_text(models[0]), read_text(models[1]))

        predictions = self.path("pred.csv")
        code, _, _ = cli(
            "svm", "predict", "--model", models[0], "--features", self.features,
            "--manifest", manifest, "--subset", "test", "--out", predictions,
        )
        self.assertEqual(code, 0)
        rows = read_rows(predictions)
        test_ids = json.loads(read_text(manifest))["test"]
        self.assertEqual([r["image_id"] for r in rows], test_ids)

        report_path = self.path("report.json")
        code, _, _ = cli(
            "svm", "evaluate", "--model", models[0], "--features", self.features,
            "--manifest", manifest, "--out", report_path,
        )
        self.assertEqual(code, 0)
        report = json.loads(read_text(report_path))
        self.assertEqual(report["n"], 9)
        self.assertGreaterEqual(report["accuracy"], 0.85)

        # the test-subset predictions are scored against the full label table
        code, _, err = cli(
            "eval", "--pred", predictions, "--truth", self.labels, "--out", self.path("r2.json")
        )
        self.assertEqual(code, 0, err)
        self.assertEqual(json.loads(read_text(self.path("r2.json")))["n"], 9)

    def _pipeline(self, root):
        os.makedirs(root)
        steps = [
            ["synth", "--kind", "mixed", "--count", 6, "--seed", 3, "--size", 16,
             "--out", os.path.join(root, "masks")],
            ["classify", "--masks", os.path.join(root, "masks"),
             "--out", os.path.join(root, "pred.csv")],
            ["eval", "--pred", os.path.join(root, "pred.csv"),
             "--truth", os.path.join(root, "masks", "labels.csv"),
             "--out", os.path.join(root, "gsaa_report.json")],
            ["split", "--labels", self.labels, "--seed", 5,
             "--out", os.path.join(root, "split.json")],
            ["svm", "train", "--features", self.features,
             "--manifest", os.path.join(root, "split.json"), "--seed", 2, "--epochs", 5,
             "--out", os.path.join(root, "model.json")],
            ["svm", "predict", "--model", os.path.join(root, "model.json"),
             "--features", self.features, "--manifest", os.path.join(root, "split.json"),
             "--out", os.path.join(root, "svm_pred.csv")],
        ]
        for argv in steps:
            code, _, err = cli(*argv)
            self.assertEqual(code, 0, err)
        outputs = {}
        for directory, _, names in os.walk(root):
            for name in names:
                path = os.path.join(directory, name)
                with open(path, "rb") as f:
                    outputs[os.path.relpath(path, root)] = f.read()
        return outputs

    def test_full_pipeline_is_byte_identical(self):
        """Test full pipeline is byte identical."""
        first = self._pipeline(self.path("run1"))
        second = self._pipeline(self.path("run2"))
        self.assertEqual(len(first), 6 + 1 + 5)
        self.assertEqual(sorted(first), sorted(second))
        for name in first:
            self.assertEqual(first[name], second[name], name)

    def test_corrupt_model(self):
        """Test corrupt model."""
        model = self.write("model.json", "{broken")
        code, _, err = cli(
            "svm", "predict", "--model", model, "--features", self.features,
            "--out", self.path("p.csv"),
        )
        self.assertEqual(code, 1)
        self.assertTrue(err.startswith("error: HeaderMismatch:"), err)

    def test_model_with_unexpected_fields(self):
        """A model JSON of the wrong shape is a data error, not a crash."""
        manifest = self.path("split.json")
        cli("split", "--labels", self.labels, "--seed", 4, "--out", manifest)
        model = self.path("model.json")
        cli(
            "svm", "train", "--features", self.features, "--manifest", manifest,
            "--seed", 1, "--epochs", 2, "--out", model,
        )
        data = json.loads(read_text(model))
        data["hyper"]["momentum"] = 1
        for text in (json.dumps(data), "[1, 2]", '"model"'):
            with self.subTest(text=text[:20]):
                broken = self.write("broken.json", text)
                code, _, err = cli(
                    "svm", "predict", "--model", broken, "--features", self.features,
                    "--out", self.path("p.csv"),
                )
                self.assertEqual(code, 1)
                self.assertTrue(err.startswith("error: HeaderMismatch:"), err)
                self.assertEqual(len(err.strip().splitlines()), 1)


if __name__ == "__main__":
    unittest.main()
