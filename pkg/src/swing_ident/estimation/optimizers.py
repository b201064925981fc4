# src/swing_ident/estimation/optimizers.py

import numpy as np


class Adam:
    """
    Adam on a flat parameter vector. `step` takes the gradient of the loss
    (descent direction is its negative) and returns the update to add.
    """
    def __init__(self, learning_rate=1e-2, beta1=0.9, beta2=0.999, eps=1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = None
        self.v = None
        self.t = 0

    def step(self, grad):
        if self.m is None:
            self.m = np.zeros_like(grad)
            self.v = np.zeros_like(grad)
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad ** 2
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        return -self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


class AdagradMomentum:
    """
    Element-wise AdaGrad with an exponentially decayed history (weight alpha)
    and a fudge term in the denominator. `scale` maps an ascent direction to
    its preconditioned version; the caller multiplies by the step size.
    """
    def __init__(self, alpha=0.9, fudge=1e-6):
        self.alpha = alpha
        self.fudge = fudge
        self.history = None

    def scale(self, direction):
        if self.history is None:
            self.history = direction ** 2
        else:
            self.history = self.alpha * self.history + (1.0 - self.alpha) * direction ** 2
        return direction / (self.fudge + np.sqrt(self.history))

    def copy(self):
        clone = AdagradMomentum(self.alpha, self.fudge)
        clone.history = None if self.history is None else self.history.copy()
        return clone
