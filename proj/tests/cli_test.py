"""End-to-end checks of the advgnn command-line tool.

Usage: cli_test.py PATH_TO_ADVGNN
"""
import json
import subprocess
import sys
import tempfile
import unittest
from pathlib import Path

BINARY = None


def run(*args, check=True):
    proc = subprocess.run([BINARY, *map(str, args)], capture_output=True, text=True)
    if check and proc.returncode != 0:
        raise AssertionError(f"{args} exited {proc.returncode}:\n{proc.stderr}")
    return proc


class CliTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.root = Path(cls.tmp.name)
        cls.config = cls.root / "config.json"
        cls.config.write_text(json.dumps({
            "generator": {"kind": "motif_graphs", "count": 60},
            "train": {"epochs": 15, "hidden": 8},
            "adversarial": {"epsilons": [0.05], "layers": ["X0"]},
            "explainers": ["VG"],
            "trials": 2, "sweep_trials": 1, "replicates": 1,
            "master_seed": 5, "dot_samples": 1,
        }))
        run("generate", "--config", cls.config, "--out", cls.root / "data", "--quiet")
        cls.dataset = cls.root / "data" / "dataset.json"
        run("train", "--config", cls.config, "--dataset", cls.dataset, "--out", cls.root / "model", "--quiet")
        cls.model = cls.root / "model" / "model.json"

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def test_generate_is_deterministic(self):
        again = self.root / "data2"
        run("generate", "--config", self.config, "--out", again, "--quiet")
        self.assertEqual(self.dataset.read_bytes(), (again / "dataset.json").read_bytes())
        other = self.root / "data3"
        run("generate", "--config", self.config, "--seed", "6", "--out", other, "--quiet")
        self.assertNotEqual(self.dataset.read_bytes(), (other / "dataset.json").read_bytes())

    def test_invalid_config_names_field(self):
        bad = self.root / "bad.json"
        bad.write_text(json.dumps({"generator": {"kind": "motif_graphs", "class_balance": 1.5}}))
        proc = run("generate", "--config", bad, "--out", self.root / "bad", check=False)
        self.assertEqual(proc.returncode, 1)
        self.assertIn("class_balance", proc.stderr)

    def test_missing_file_is_validation_error(self):
        proc = run("train", "--dataset", self.root / "nope.json", "--out", self.root / "x", check=False)
        self.assertEqual(proc.returncode, 1)

    def test_train_outputs(self):
        model = json.loads(self.model.read_text())
        self.assertIn("w1", json.dumps(model))
        log = (self.root / "model" / "train_log.csv").read_text().splitlines()
        self.assertEqual(log[0], "epoch,clean_loss,adv_loss,val_accuracy")
        self.assertEqual(len(log), 16)

    def test_adversarial_train(self):
        out = self.root / "adv"
        run("train", "--config", self.config, "--dataset", self.dataset, "--adversarial", "--epsilon", "0.1",
            "--layer", "penultimate", "--out", out, "--quiet")
        self.assertTrue((out / "model.json").exists())
        proc = run("train", "--dataset", self.dataset, "--adversarial", "--epsilon", "-1", "--out", out,
                   check=False)
        self.assertEqual(proc.returncode, 1)

    def test_explain_deterministic_and_dot_parses(self):
        a, b = self.root / "ex_a", self.root / "ex_b"
        for out in (a, b):
            run("explain", "--model", self.model, "--dataset", self.dataset, "--method", "VG",
                "--instances", "0,3", "--out", out, "--quiet")
        self.assertEqual((a / "attributions_VG.json").read_bytes(), (b / "attributions_VG.json").read_bytes())
        records = json.loads((a / "attributions_VG.json").read_text())
        self.assertEqual([r["graph_id"] for r in records], ["VG_graph0", "VG_graph3"])
        dots = sorted(a.glob("*.dot"))
        self.assertEqual(len(dots), 2)
        try:
            import pydot
        except ImportError:
            self.skipTest("pydot not installed")
        for dot in dots:
            graphs = pydot.graph_from_dot_data(dot.read_text())
            self.assertTrue(graphs)
            self.assertGreater(len(graphs[0].get_nodes()), 0)

    def test_explain_unknown_method(self):
        proc = run("explain", "--model", self.model, "--dataset", self.dataset, "--method", "Occlusion",
                   "--out", self.root / "ex_bad", check=False)
        self.assertEqual(proc.returncode, 1)
        for name in ("VG", "GC", "GNNX"):
            self.assertIn(name, proc.stderr)

    def test_sanity_check_and_evaluate(self):
        out = self.root / "sanity"
        proc = run("sanity-check", "--model", self.model, "--dataset", self.dataset, "--method", "GC",
                   "--trials", "2", "--out", out, "--quiet")
        summary = json.loads((out / "sanity_summary.json").read_text())
        self.assertEqual(summary["trials"], 2)
        self.assertEqual(summary, json.loads(proc.stdout))
        rows = (out / "sanity_samples.csv").read_text().splitlines()
        self.assertEqual(rows[0], "model_id,trial,instance_id,metric,value")
        self.assertEqual(len(rows) - 1, 2 * summary["samples"])

        ev = json.loads(run("evaluate", "--model", self.model, "--dataset", self.dataset,
                            "--method", "VG").stdout)
        self.assertGreaterEqual(ev["accuracy"], 0.0)
        self.assertLessEqual(ev["accuracy"], 1.0)
        self.assertIn("mean_precision", ev)

    def test_experiment_writes_report(self):
        out = self.root / "exp"
        run("experiment", "--config", self.config, "--out", out, "--quiet")
        summary = (out / "summary.csv").read_text().splitlines()
        self.assertEqual(len(summary), 3)
        self.assertTrue(summary[0].startswith("adversarial_training,perturbation_layer,explanation_type"))
        self.assertTrue((out / "report.json").exists())


if __name__ == "__main__":
    BINARY = sys.argv.pop(1)
    unittest.main(verbosity=2)
