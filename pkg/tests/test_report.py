import json
import os
import shutil
import tempfile
import unittest

import numpy as np

from lib import report as rp
from lib.errors import ValidationError


def sample_report():
    report = rp.Report("observables", rp.digest_inputs((), {"tau": 1.0}), seed=0, tolerances={"tol": 1e-10})
    report.add("W(e3)", complex(2 * np.cos(0.5), 0.0))
    report.check("maurer-cartan defect", 3e-17, 1e-10)
    report.add("flat", True)
    report.add("words", 3)
    report.add("separating word", "e1 e1")
    report.add("witness", np.eye(2))
    return report


class TestReportEntries(unittest.TestCase):
    def test_kinds(self):
        report = sample_report()
        kinds = [e.kind for e in report.results]
        self.assertEqual(kinds, ["complex", "real", "flag", "count", "text", "matrix"])

    def test_check(self):
        report = rp.Report("check", "0" * 64)
        self.assertTrue(report.check("ok", 1e-12, 1e-10).passed)
        self.assertFalse(report.check("bad", 1e-3, 1e-10).passed)
        self.assertEqual([e.label for e in report.failed], ["bad"])

    def test_unknown_kind(self):
        with self.assertRaises(ValidationError):
            rp.Report("check", "0").add("x", 1, kind="tensor")

    def test_digest_depends_on_inputs(self):
        self.assertEqual(rp.digest_inputs((), {"a": 1, "b": 2}), rp.digest_inputs((), {"b": 2, "a": 1}))
        self.assertNotEqual(rp.digest_inputs((), {"a": 1}), rp.digest_inputs((), {"a": 2}))


class TestRendering(unittest.TestCase):
    def test_human_table(self):
        """Test that complex values print real and imaginary parts separately"""
        text = rp.dumps_report(sample_report(), "human")
        self.assertIn("tolerance", text)
        self.assertIn("1.755165124", text)
        row = next(line for line in text.splitlines() if "W(e3)" in line)
        self.assertEqual(row.split()[1:3], ["1.755165124", "0"])
        check_row = next(line for line in text.splitlines() if "maurer-cartan" in line)
        self.assertIn("1.0e-10", check_row)
        self.assertIn("pass", check_row)

    def test_json_is_stable(self):
        first = rp.dumps_report(sample_report(), "json")
        second = rp.dumps_report(sample_report(), "json")
        self.assertEqual(first, second)
        self.assertLess(first.index('"command"'), first.index('"results"'))

    def test_non_finite_real_becomes_null(self):
        report = rp.Report("transport", "0" * 64)
        report.add("ratio", float("inf"))
        text = rp.dumps_report(report, "json")
        self.assertNotIn("Infinity", text)
        self.assertIsNone(json.loads(text)["results"][0]["value"])
        again = rp.report_from_dict(json.loads(text))
        self.assertTrue(np.isnan(again.entry("ratio").value))

    def test_unknown_format(self):
        with self.assertRaises(ValidationError):
            rp.dumps_report(sample_report(), "xml")


class TestSaveReport(unittest.TestCase):
    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_json_reload(self):
        """Test that a saved JSON report reloads with identical values"""
        report = sample_report()
        path = rp.save_report(report, os.path.join(self.temp_dir, "nested", "report.json"), "json")
        again = rp.load_report(path)
        self.assertEqual(again.command, report.command)
        self.assertEqual(again.inputs, report.inputs)
        for a, b in zip(report.results, again.results):
            self.assertEqual(a.label, b.label)
            self.assertEqual(a.kind, b.kind)
            self.assertEqual(a.tolerance, b.tolerance)
            self.assertEqual(a.passed, b.passed)
            if a.kind == "matrix":
                np.testing.assert_array_equal(a.value, b.value)
            else:
                self.assertEqual(a.value, b.value)

    def test_bare_name_goes_to_results_dir(self):
        self.assertEqual(rp.report_path("out.json"), os.path.join(rp.RESULTS_DIR, "out.json"))
        self.assertEqual(rp.report_path("some/dir/out.json"), "some/dir/out.json")


if __name__ == "__main__":
    unittest.main()
