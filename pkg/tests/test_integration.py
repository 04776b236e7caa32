import os
import shutil
import tempfile
import unittest

import numpy as np

from lib import fuzzy_sphere
from lib.derivation_calculus import DerivationVector
from lib.fuzzy_sphere import SpinLabel
from lib.linalg_core import haar_unitary, make_rng, random_antihermitian, random_matrix
from lib.module_connection import ModuleSpace, gauge_transform, make_connection, random_connection
from lib.scenario import load_scenario, save_scenario
from lib.transport_observables import (
    decide_gauge_equivalence,
    make_word,
    observable,
    ode_defect,
)


class TestFullPipeline(unittest.TestCase):
    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()
        self.basis = fuzzy_sphere.spin_basis(SpinLabel(1))

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_scenario_to_observables(self):
        """Test generate, save, reload and evaluate on the spin-1/2 preset"""
        scenario = fuzzy_sphere.build_scenario(SpinLabel(1), [SpinLabel(1)])
        path = os.path.join(self.temp_dir, "spin_half.json")
        save_scenario(scenario, path)
        loaded = load_scenario(path)
        values = [observable(loaded.connection, w) for w in loaded.word_objects()]
        self.assertAlmostEqual(values[0].real, 2 * np.cos(0.5), places=10)
        self.assertAlmostEqual(values[1].real, 2 * np.cos(1.0), places=10)

    def test_transport_ode_over_random_scenarios(self):
        """Test the transport ODE and its second-order convergence on 50 random connections"""
        for k in range(50):
            rng = make_rng(100 + k)
            m = int(rng.integers(1, 5))
            conn = random_connection(ModuleSpace(m, 2), self.basis, seed=200 + k, scale=2.0)
            X = DerivationVector(rng.uniform(-1, 1, 3))
            s = random_matrix(rng, m, 2)
            tau = float(rng.uniform(-1, 1))
            self.assertLessEqual(ode_defect(conn, X, tau, 1e-5, s), 1e-8 * np.linalg.norm(s))

    def test_gauge_invariance_over_haar_samples(self):
        rng = make_rng(7)
        for k in range(100):
            m = int(rng.integers(1, 7))
            conn = random_connection(ModuleSpace(m, 2), self.basis, seed=k)
            moved = gauge_transform(conn, haar_unitary(m, 1000 + k))
            length = int(rng.integers(1, 5))
            word = make_word(self.basis, [rng.uniform(-1, 1, 3) for _ in range(length)])
            self.assertLessEqual(abs(observable(moved, word) - observable(conn, word)), 1e-10 * m)

    def test_separation_at_desk_scale(self):
        """Test the decider on gauge copies and on perturbed pairs"""
        rng = make_rng(2024)
        with_witness = 0
        pairs = 100
        for k in range(pairs):
            m = int(rng.integers(1, 7))
            conn = random_connection(ModuleSpace(m, 2), self.basis, seed=300 + k)
            copy = gauge_transform(conn, haar_unitary(m, 400 + k))
            verdict = decide_gauge_equivalence(conn, copy, seed=k)
            self.assertTrue(verdict.equivalent)
            self.assertEqual(decide_gauge_equivalence(copy, conn, seed=k).equivalent, verdict.equivalent)
            if verdict.witness is not None:
                self.assertLessEqual(verdict.witness_residual, 1e-8)
                with_witness += 1
            else:
                self.assertTrue(verdict.trace_agreement_only)

            delta = random_antihermitian(rng, m, scale=1e-2)
            i = int(rng.integers(0, 3))
            potential = list(conn.potential)
            potential[i] = potential[i] + delta
            other = make_connection(conn.module, self.basis, potential)
            verdict = decide_gauge_equivalence(conn, other, seed=k)
            self.assertFalse(verdict.equivalent)
            self.assertFalse(decide_gauge_equivalence(other, conn, seed=k).equivalent)
            self.assertGreater(verdict.max_trace_gap, 1e-6)
        self.assertGreaterEqual(with_witness, 0.95 * pairs)

    def test_gauge_copy_demonstration(self):
        report = fuzzy_sphere.gauge_copy_report(SpinLabel(1), [[SpinLabel(0), SpinLabel(0)], [SpinLabel(1)]])
        self.assertTrue(all(s.max_curvature <= 1e-12 for s in report.summaries))
        w_trivial = report.summaries[0].observables[0]
        w_spin = report.summaries[1].observables[0]
        self.assertAlmostEqual(w_trivial.real, 2.0, places=12)
        self.assertAlmostEqual(w_spin.real, 1.75516512, places=8)
        self.assertGreater(abs(w_trivial - w_spin), 0.24)
        self.assertFalse(report.verdicts[(0, 1)].equivalent)


if __name__ == "__main__":
    unittest.main()
