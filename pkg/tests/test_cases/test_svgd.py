import unittest
import os
import sys

import numpy as np

# Add project root and src to path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..'))
sys.path.insert(0, os.path.join(project_root, 'src'))
sys.path.insert(0, project_root)

from swing_ident.console_logger import json_log_handler
from swing_ident.estimation import svgd
from swing_ident.estimation.optimizers import AdagradMomentum

TARGET_MEAN = np.array([1.0, -0.5])
TARGET_COV = np.array([[1.0, 0.3], [0.3, 0.5]])
TARGET_PRECISION = np.linalg.inv(TARGET_COV)


def gaussian_score(x):
    return -TARGET_PRECISION @ (x - TARGET_MEAN)


class TestKernel(unittest.TestCase):

    def test_symmetric_and_bounded(self):
        X = np.random.default_rng(0).normal(size=(12, 4))
        h = svgd.median_bandwidth(X)
        K = svgd.rbf_kernel(X, h)
        np.testing.assert_allclose(K, K.T)
        np.testing.assert_array_equal(np.diag(K), np.ones(12))
        self.assertTrue(np.all(K > 0.0))
        self.assertTrue(np.all(K <= 1.0))

    def test_median_heuristic(self):
        X = np.array([[0.0], [1.0], [3.0]])
        # pairwise distances 1, 2, 3 -> median 2
        self.assertAlmostEqual(svgd.median_bandwidth(X), 4.0 / np.log(4.0), places=12)

    def test_collapsed_ensemble_uses_floor(self):
        json_log_handler.clear()
        X = np.tile([0.2, -0.3], (3, 1))
        self.assertEqual(svgd.median_bandwidth(X, bandwidth_floor=1e-6), 1e-6)
        self.assertTrue(any('collapsed' in message for message in json_log_handler.messages(level='WARNING')))


class TestDirection(unittest.TestCase):

    def test_single_particle_is_gradient_ascent(self):
        x = np.array([[0.3, -1.2, 2.0]])
        g = np.array([[1.5, 0.25, -3.0]])
        updated = svgd.svgd_update(x, g, stepsize=0.01)
        np.testing.assert_allclose(updated, x + 0.01 * g, rtol=0, atol=1e-12)

    def test_identical_particles_share_drift(self):
        X = np.tile([0.5, 0.5], (2, 1))
        G = np.tile([1.0, -2.0], (2, 1))
        phi, _ = svgd.svgd_direction(X, G)
        np.testing.assert_array_equal(phi[0], phi[1])
        np.testing.assert_allclose(phi[0], [1.0, -2.0], atol=1e-15)

    def test_repulsion_pushes_apart_without_drive(self):
        X = np.array([[-0.1, 0.0], [0.1, 0.0]])
        phi, _ = svgd.svgd_direction(X, np.zeros_like(X))
        self.assertLess(phi[0, 0], 0.0)
        self.assertGreater(phi[1, 0], 0.0)

    def test_rejects_nonpositive_stepsize(self):
        with self.assertRaises(ValueError):
            svgd.svgd_update(np.zeros((2, 2)), np.zeros((2, 2)), stepsize=0.0)

    def test_preconditioner_scales_direction(self):
        X = np.random.default_rng(1).normal(size=(5, 3))
        G = np.random.default_rng(2).normal(size=(5, 3))
        phi, _ = svgd.svgd_direction(X, G)
        pre = AdagradMomentum(alpha=0.9, fudge=1e-6)
        updated = svgd.svgd_update(X, G, 0.1, preconditioner=pre)
        np.testing.assert_allclose(updated, X + 0.1 * phi / (1e-6 + np.abs(phi)))


class TestGaussianTarget(unittest.TestCase):

    def test_recovers_mean_and_covariance(self):
        X0 = np.random.default_rng(3).normal(size=(50, 2))
        X = svgd.run_svgd(gaussian_score, X0, iterations=2000, stepsize=0.05)
        np.testing.assert_allclose(X.mean(axis=0), TARGET_MEAN, atol=0.05)
        cov = np.cov(X.T)
        np.testing.assert_allclose(cov, TARGET_COV, rtol=0.15)


if __name__ == '__main__':
    unittest.main()
