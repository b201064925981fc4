import unittest
import os
import sys
import tempfile

import numpy as np

# Add project root, src and tests/lib to path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..'))
sys.path.insert(0, os.path.join(project_root, 'src'))
sys.path.insert(0, os.path.join(project_root, 'tests', 'lib'))
sys.path.insert(0, project_root)

from finite_difference import central_difference, central_difference_scalar, relative_error
from swing_ident.errors import GradientOverflowError, InvalidParamsError
from swing_ident.estimation import diffnet
from swing_ident.estimation.diffnet import NetParams

HIDDEN = 10
P = 0.1
T = 27.0
N_DRAWS = 100


def random_theta(rng, hidden=HIDDEN, scale=1.0):
    n = NetParams.zeros(hidden).size
    return NetParams.from_vector(rng.normal(0.0, scale, n), hidden)


class TestForward(unittest.TestCase):

    def test_zero_network_outputs_bias(self):
        theta = NetParams.zeros(HIDDEN)
        theta.b2 = np.array([0.3, -0.7])
        out = diffnet.forward(theta, np.linspace(0, 1, 5), P)
        np.testing.assert_array_equal(out, np.tile([0.3, -0.7], (5, 1)))
        np.testing.assert_array_equal(diffnet.time_derivative(theta, np.linspace(0, 1, 5), P, T), np.zeros((5, 2)))

    def test_constant_when_input_weights_vanish(self):
        rng = np.random.default_rng(1)
        theta = random_theta(rng)
        theta.W1 = np.zeros_like(theta.W1)
        out = diffnet.forward(theta, np.linspace(0, 1, 7), P)
        expected = theta.W2 @ np.tanh(theta.b1) + theta.b2
        np.testing.assert_allclose(out, np.tile(expected, (7, 1)), atol=1e-14)

    def test_linear_regime_derivative(self):
        rng = np.random.default_rng(2)
        theta = random_theta(rng, scale=1e-5)
        theta.b1 = np.zeros(HIDDEN)
        t_norm = np.array([0.0, 0.5, 1.0])
        dot = diffnet.time_derivative(theta, t_norm, P, T)
        linear = (theta.W2 @ theta.W1[:, 0]) / T
        np.testing.assert_allclose(dot, np.tile(linear, (3, 1)), atol=1e-6)

    def test_time_derivative_matches_finite_difference(self):
        rng = np.random.default_rng(3)
        for _ in range(N_DRAWS):
            theta = random_theta(rng)
            t = rng.uniform(0.05, 0.95)
            numeric = central_difference_scalar(lambda s: diffnet.forward(theta, s / T, P)[0], t * T, eps=1e-4)
            analytic = diffnet.time_derivative(theta, t, P, T)[0]
            self.assertLess(relative_error(analytic, numeric), 1e-4)

    def test_nonpositive_length_rejected(self):
        with self.assertRaises(InvalidParamsError):
            diffnet.time_derivative(NetParams.zeros(HIDDEN), 0.5, P, 0.0)


class TestGradient(unittest.TestCase):

    def test_gradient_of_output_and_derivative_functional(self):
        rng = np.random.default_rng(4)
        t_norm = np.linspace(0.0, 1.0, 6)
        for _ in range(N_DRAWS):
            theta = random_theta(rng)
            out_w = rng.normal(size=(6, 2))
            dot_w = rng.normal(size=(6, 2))

            def scalar(vec):
                th = NetParams.from_vector(vec, HIDDEN)
                out, dot, _ = diffnet.forward_with_derivative(th, t_norm, P, T)
                return float(np.sum(out_w * out) + np.sum(dot_w * dot))

            analytic = diffnet.grad_scalar(theta, t_norm, P, T, out_adjoint=out_w, dot_adjoint=dot_w).to_vector()
            numeric = central_difference(scalar, theta.to_vector())
            self.assertLess(relative_error(analytic, numeric), 1e-4)

    def test_independent_scalar_gives_zero_gradient(self):
        theta = random_theta(np.random.default_rng(5))
        grad = diffnet.grad_scalar(theta, np.linspace(0, 1, 4), P, T)
        np.testing.assert_array_equal(grad.to_vector(), np.zeros(theta.size))

    def test_overflow_raises(self):
        theta = random_theta(np.random.default_rng(6))
        with np.errstate(all='ignore'):
            with self.assertRaises(GradientOverflowError):
                diffnet.grad_scalar(theta, np.linspace(0, 1, 4), P, T, out_adjoint=np.full((4, 2), np.inf))


class TestEnsemblePasses(unittest.TestCase):

    def test_batch_matches_single_networks(self):
        rng = np.random.default_rng(8)
        thetas = [random_theta(rng, scale=0.8) for _ in range(4)]
        matrix = np.stack([theta.to_vector() for theta in thetas])
        t_norm = np.linspace(0.0, 1.0, 17)
        out_adj = rng.normal(size=(4, 17, 2))
        dot_adj = rng.normal(size=(4, 17, 2))

        out, dot, cache = diffnet.forward_batch(matrix, HIDDEN, t_norm, P, T)
        grads = diffnet.grad_batch(matrix, HIDDEN, out_adjoint=out_adj, dot_adjoint=dot_adj, cache=cache)
        for i, theta in enumerate(thetas):
            single_out, single_dot, single_cache = diffnet.forward_with_derivative(theta, t_norm, P, T)
            np.testing.assert_allclose(out[i], single_out, rtol=1e-12, atol=1e-14)
            np.testing.assert_allclose(dot[i], single_dot, rtol=1e-12, atol=1e-14)
            single = diffnet.grad_scalar(theta, t_norm, P, T, out_adjoint=out_adj[i], dot_adjoint=dot_adj[i],
                                         cache=single_cache)
            np.testing.assert_allclose(grads[i], single.to_vector(), rtol=1e-10, atol=1e-12)

    def test_batch_rejects_wrong_width(self):
        with self.assertRaises(InvalidParamsError):
            diffnet.unpack_batch(np.zeros((2, NetParams.zeros(HIDDEN).size)), HIDDEN + 1)


class TestParams(unittest.TestCase):

    def test_vector_layout(self):
        theta = diffnet.init_params(HIDDEN, seed=0)
        self.assertEqual(theta.size, 4 * HIDDEN + 2)
        vec = theta.to_vector()
        np.testing.assert_array_equal(vec[:2 * HIDDEN], theta.W1.ravel())
        np.testing.assert_array_equal(NetParams.from_vector(vec, HIDDEN).to_vector(), vec)

    def test_init_is_seeded(self):
        a = diffnet.init_params(HIDDEN, seed=9)
        b = diffnet.init_params(HIDDEN, seed=9)
        np.testing.assert_array_equal(a.to_vector(), b.to_vector())
        np.testing.assert_array_equal(a.b1, np.zeros(HIDDEN))

    def test_shape_validation(self):
        with self.assertRaises(InvalidParamsError):
            NetParams(W1=np.zeros((3, 2)), b1=np.zeros(4), W2=np.zeros((2, 4)), b2=np.zeros(2))
        with self.assertRaises(InvalidParamsError):
            NetParams.from_vector(np.zeros(10), HIDDEN)

    def test_checkpoint(self):
        theta = diffnet.init_params(HIDDEN, seed=3)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'theta.json')
            diffnet.save_params(theta, path)
            restored = diffnet.load_params(path)
        np.testing.assert_array_equal(restored.to_vector(), theta.to_vector())


if __name__ == '__main__':
    unittest.main()
