import unittest

import numpy as np
from hypothesis import given, seed, settings
from hypothesis import strategies as st

from lib import transport_observables as to
from lib.derivation_calculus import DerivationVector, unit_derivation
from lib.errors import DimensionError, GuardError, NotHermitianError, ValidationError
from lib.fuzzy_sphere import SpinLabel, block_potential, spin_basis
from lib.linalg_core import haar_unitary, make_rng, random_antihermitian, random_matrix
from lib.module_connection import ModuleSpace, gauge_transform, make_connection, random_connection

SEEDS = st.integers(min_value=0, max_value=2**32 - 1)


def spin_half_connection(module_spins=(SpinLabel(1),)):
    basis = spin_basis(SpinLabel(1))
    potential = block_potential(list(module_spins))
    return make_connection(ModuleSpace(potential[0].shape[0], 2), basis, potential)


class TestTransports(unittest.TestCase):
    def setUp(self):
        self.basis = spin_basis(SpinLabel(2))
        self.conn = random_connection(ModuleSpace(3, 3), self.basis, seed=3, scale=2.0)
        self.rng = make_rng(4)
        self.s = random_matrix(self.rng, 3, 3)

    def random_real_derivation(self):
        return DerivationVector(self.rng.uniform(-1, 1, 3))

    def test_identity_at_zero(self):
        X = self.random_real_derivation()
        np.testing.assert_allclose(to.module_transport(self.conn, X, 0.0, self.s), self.s, atol=1e-15, rtol=0)

    @seed(21)
    @settings(max_examples=30, deadline=None)
    @given(SEEDS, st.floats(min_value=-2, max_value=2), st.floats(min_value=-2, max_value=2))
    def test_group_law(self, rng_seed, tau, sigma):
        """Test Phi_{tau+sigma} = Phi_tau o Phi_sigma"""
        rng = make_rng(rng_seed)
        X = DerivationVector(rng.uniform(-1, 1, 3))
        s = random_matrix(rng, 3, 3)
        combined = to.module_transport(self.conn, X, tau + sigma, s)
        stepped = to.module_transport(self.conn, X, tau, to.module_transport(self.conn, X, sigma, s))
        np.testing.assert_allclose(combined, stepped, atol=1e-11)

    def test_module_property(self):
        """Test Phi_tau(s a) = Phi_tau(s) phi_tau(a)"""
        X = self.random_real_derivation()
        a = random_matrix(self.rng, 3, 3)
        lhs = to.module_transport(self.conn, X, 0.7, self.s @ a)
        rhs = to.module_transport(self.conn, X, 0.7, self.s) @ to.automorphism_flow(self.basis, X, 0.7, a)
        np.testing.assert_allclose(lhs, rhs, atol=1e-11)

    def test_ode_defect(self):
        X = self.random_real_derivation()
        defect = to.ode_defect(self.conn, X, 0.4, 1e-5, self.s)
        self.assertLess(defect, 1e-8 * np.linalg.norm(self.s))

    def test_ode_defect_second_order(self):
        """Test that halving h divides the central-difference residual by about 4"""
        X = self.random_real_derivation()
        coarse = to.ode_defect(self.conn, X, 0.4, 1e-2, self.s)
        fine = to.ode_defect(self.conn, X, 0.4, 5e-3, self.s)
        self.assertGreater(coarse / fine, 3.2)
        self.assertLess(coarse / fine, 4.8)

    def test_ode_rejects_bad_step(self):
        with self.assertRaises(ValidationError):
            to.ode_defect(self.conn, self.random_real_derivation(), 0.0, 0.0, self.s)

    def test_recover_covariant_derivative(self):
        from lib.module_connection import covariant_derivative
        X = self.random_real_derivation()
        np.testing.assert_allclose(to.recover_covariant_derivative(self.conn, X, self.s),
                                   covariant_derivative(self.conn, X, self.s), atol=1e-8)

    def test_recover_gauge_potential(self):
        recovered = to.recover_gauge_potential(self.conn)
        for b, r in zip(self.conn.potential, recovered):
            np.testing.assert_allclose(r, b, atol=1e-8)

    def test_star_flow(self):
        X = self.random_real_derivation()
        a = random_matrix(self.rng, 3, 3)
        self.assertLess(to.star_flow_defect(self.basis, X, 1.3, a), 1e-12)
        self.assertGreater(to.star_flow_defect(self.basis, DerivationVector([1j, 0, 0]), 1.3, a), 1e-6)

    def test_guard(self):
        """Test that an oversized exponent raises with a remediation hint"""
        X = unit_derivation(self.basis, 0)
        with self.assertRaises(GuardError) as ctx:
            to.transport_endomorphism(self.conn, X, 100.0)
        self.assertIn("reduce tau", str(ctx.exception))


class TestObservables(unittest.TestCase):
    def setUp(self):
        self.conn = spin_half_connection()
        self.basis = self.conn.basis

    def test_golden_values(self):
        """Test W(e3) = 2 cos(1/2) and W(e3, e3) = 2 cos(1)"""
        w3 = to.observable(self.conn, to.index_word(self.basis, (2,)))
        w33 = to.observable(self.conn, to.index_word(self.basis, (2, 2)))
        self.assertAlmostEqual(w3.real, 2 * np.cos(0.5), places=10)
        self.assertAlmostEqual(w3.imag, 0.0, places=10)
        self.assertAlmostEqual(w3.real, 1.7551651, places=7)
        self.assertAlmostEqual(w33.real, 2 * np.cos(1.0), places=10)

    def test_trivial_connection(self):
        conn = spin_half_connection((SpinLabel(0), SpinLabel(0)))
        self.assertEqual(to.observable(conn, to.index_word(self.basis, (2,))), 2)

    def test_golden_trace_monomials(self):
        """Test Tr(theta_3^2) = -1/2 and Tr(theta_1 theta_2 theta_3) = -1/4"""
        traces = to.trace_monomials(self.conn, 3)
        self.assertAlmostEqual(traces[(2, 2)].real, -0.5, places=12)
        self.assertAlmostEqual(traces[(0, 1, 2)].real, -0.25, places=12)
        self.assertAlmostEqual(traces[(0, 1, 2)].imag, 0.0, places=12)
        self.assertNotIn((1, 2, 0), traces)
        self.assertTrue(all(to.canonical_rotation(k) == k for k in traces))

    def test_trace_monomials_degree(self):
        with self.assertRaises(ValidationError):
            to.trace_monomials(self.conn, 0)
        self.assertEqual(len(to.trace_monomials(self.conn, 1)), 3)

    def test_canonical_rotation(self):
        self.assertEqual(to.canonical_rotation((2, 0, 1)), (0, 1, 2))
        self.assertEqual(to.canonical_rotation((1, 0, 1, 0)), (0, 1, 0, 1))
        self.assertEqual(to.canonical_rotation(()), ())

    def test_cyclic_invariance(self):
        conn = random_connection(ModuleSpace(3, 2), self.basis, seed=9)
        w = to.observable(conn, to.index_word(self.basis, (0, 1, 2)))
        rotated = to.observable(conn, to.index_word(self.basis, (1, 2, 0)))
        self.assertAlmostEqual(abs(w - rotated), 0.0, places=12)

    def test_batch_keeps_order(self):
        conn = random_connection(ModuleSpace(4, 2), self.basis, seed=2)
        words = [to.index_word(self.basis, w) for w in ((0,), (1, 2), (2, 2, 0), (1,))]
        batch = to.observable_batch(conn, words, 0.5, max_workers=3)
        self.assertEqual(batch, [to.observable(conn, w, 0.5) for w in words])
        self.assertEqual(to.observable_batch(conn, []), [])

    def test_monomial_from_observables(self):
        conn = random_connection(ModuleSpace(3, 2), self.basis, seed=12)
        word = to.index_word(self.basis, (0, 2))
        expected = np.trace(conn.potential[0] @ conn.potential[2])
        self.assertAlmostEqual(abs(to.monomial_from_observables(conn, word) - expected), 0.0, places=4)

    def test_make_word_validation(self):
        with self.assertRaises(ValidationError):
            to.make_word(self.basis, [])
        with self.assertRaises(DimensionError):
            to.make_word(self.basis, [[1.0, 0.0]])
        self.assertTrue(to.make_word(self.basis, [[1, 0, 0], [0, 0.5, 0]]).restricted_to_real)
        self.assertFalse(to.make_word(self.basis, [[1j, 0, 0]]).restricted_to_real)

    @seed(22)
    @settings(max_examples=25, deadline=None)
    @given(SEEDS, st.integers(min_value=1, max_value=6))
    def test_gauge_invariance(self, rng_seed, m):
        rng = make_rng(rng_seed)
        conn = random_connection(ModuleSpace(m, 2), self.basis, seed=rng_seed)
        moved = gauge_transform(conn, haar_unitary(m, rng_seed + 1))
        length = int(rng.integers(1, 5))
        word = to.make_word(self.basis, [rng.uniform(-1, 1, 3) for _ in range(length)])
        self.assertLessEqual(abs(to.observable(moved, word) - to.observable(conn, word)), 1e-10 * m)


class TestGaugeEquivalence(unittest.TestCase):
    def setUp(self):
        self.basis = spin_basis(SpinLabel(1))

    def test_gauge_copy_inequivalent(self):
        """Test that spin sets {0,0} and {1/2} are separated by a short trace word"""
        trivial = spin_half_connection((SpinLabel(0), SpinLabel(0)))
        spin = spin_half_connection()
        verdict = to.decide_gauge_equivalence(trivial, spin)
        self.assertFalse(verdict.equivalent)
        self.assertIsNone(verdict.witness)
        self.assertLessEqual(len(verdict.separating_word), 3)
        self.assertAlmostEqual(verdict.max_trace_gap, 0.5, places=10)

    def test_reflexive_with_degenerate_spectrum(self):
        conn = spin_half_connection((SpinLabel(1), SpinLabel(1)))
        verdict = to.decide_gauge_equivalence(conn, conn)
        self.assertTrue(verdict.equivalent)
        self.assertEqual(verdict.trials_used, 1)
        np.testing.assert_allclose(verdict.witness, np.eye(4))

    def test_gauge_transform_found(self):
        """Test that a random gauge copy is recognized with a witness"""
        conn = random_connection(ModuleSpace(4, 2), self.basis, seed=31)
        u = haar_unitary(4, 32)
        verdict = to.decide_gauge_equivalence(conn, gauge_transform(conn, u), seed=5)
        self.assertTrue(verdict.equivalent)
        self.assertFalse(verdict.trace_agreement_only)
        self.assertLessEqual(verdict.witness_residual, 1e-8)
        w = verdict.witness
        np.testing.assert_allclose(w.conj().T @ w, np.eye(4), atol=1e-10)
        for b, bp in zip(conn.potential, gauge_transform(conn, u).potential):
            np.testing.assert_allclose(w @ b @ w.conj().T, bp, atol=1e-8)

    def test_perturbation_separated(self):
        conn = random_connection(ModuleSpace(3, 2), self.basis, seed=41)
        rng = make_rng(42)
        delta = random_antihermitian(rng, 3, scale=0.05)
        potential = (conn.potential[0] + delta,) + conn.potential[1:]
        other = make_connection(conn.module, self.basis, potential)
        verdict = to.decide_gauge_equivalence(conn, other)
        self.assertFalse(verdict.equivalent)
        self.assertGreater(verdict.max_trace_gap, 1e-6)

    def test_repeated_blocks_rest_on_traces(self):
        """Test that persistent degeneracy is reported as trace agreement only"""
        conn = spin_half_connection((SpinLabel(1), SpinLabel(1)))
        moved = gauge_transform(conn, haar_unitary(4, 3))
        verdict = to.decide_gauge_equivalence(conn, moved, trials=8)
        self.assertTrue(verdict.equivalent)
        self.assertTrue(verdict.trace_agreement_only)
        self.assertIsNone(verdict.witness)
        self.assertEqual(verdict.trials_used, 8)

    def test_symmetric_in_arguments(self):
        """Test that swapping the two connections never changes the verdict"""
        rng = make_rng(77)
        for k in range(10):
            m = int(rng.integers(1, 5))
            conn = random_connection(ModuleSpace(m, 2), self.basis, seed=500 + k)
            copy = gauge_transform(conn, haar_unitary(m, 600 + k))
            potential = (conn.potential[0] + random_antihermitian(rng, m, scale=1e-2),) + conn.potential[1:]
            other = make_connection(conn.module, self.basis, potential)
            for a, b in ((conn, copy), (conn, other)):
                forward = to.decide_gauge_equivalence(a, b, seed=k)
                backward = to.decide_gauge_equivalence(b, a, seed=k)
                self.assertEqual(forward.equivalent, backward.equivalent)

    def test_rejects_non_hermitian(self):
        conn = random_connection(ModuleSpace(2, 2), self.basis, seed=1, hermitian=False)
        with self.assertRaises(NotHermitianError):
            to.decide_gauge_equivalence(conn, conn)

    def test_hermiticity_follows_tolerance(self):
        """Test that a slightly non-antihermitian potential is accepted at a looser tol"""
        conn = random_connection(ModuleSpace(2, 2), self.basis, seed=2)
        potential = (conn.potential[0] + 1e-7 * np.eye(2),) + conn.potential[1:]
        noisy = make_connection(conn.module, self.basis, potential)
        with self.assertRaises(NotHermitianError):
            to.decide_gauge_equivalence(noisy, noisy)
        verdict = to.decide_gauge_equivalence(noisy, noisy, tol=1e-6)
        self.assertTrue(verdict.equivalent)
        self.assertEqual(verdict.trials_used, 1)

    def test_rejects_zero_trials(self):
        conn = spin_half_connection()
        with self.assertRaises(ValidationError) as ctx:
            to.decide_gauge_equivalence(conn, conn, trials=0)
        self.assertEqual(ctx.exception.field, "trials")

    def test_rejects_shape_mismatch(self):
        a = random_connection(ModuleSpace(2, 2), self.basis, seed=1)
        b = random_connection(ModuleSpace(3, 2), self.basis, seed=1)
        with self.assertRaises(DimensionError):
            to.decide_gauge_equivalence(a, b)


if __name__ == "__main__":
    unittest.main()
