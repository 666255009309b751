"""First-order optimizers over named parameter tensors.

Parameters are passed as a dict of name -> Tensor; moment accumulators are
keyed by the same names and always match the parameter shapes. ``step``
updates parameters in place and clears their gradients.
"""

import numpy as np


class Optimizer:
    kind = "base"

    def __init__(self, learning_rate):
        self.learning_rate = float(learning_rate)
        self.step_count = 0

    def step(self, params):
        missing = [name for name, p in params.items() if p.grad is None]
        if missing:
            raise ValueError(
                f"optimizer step with missing gradients for: {', '.join(sorted(missing))}"
            )
        self.step_count += 1
        for name in params:
            p = params[name]
            self._update(name, p)
            p.grad = None

    def _update(self, name, p):
        raise NotImplementedError


class SGD(Optimizer):
    kind = "sgd"

    def _update(self, name, p):
        p.data -= p.dtype.type(self.learning_rate) * p.grad


class Adam(Optimizer):
    kind = "adam"

    def __init__(self, learning_rate, beta1=0.9, beta2=0.999, eps=1e-8):
        super().__init__(learning_rate)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = {}
        self.v = {}

    def _update(self, name, p):
        g = p.grad
        m = self.m.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            self.m[name] = m
            self.v[name] = np.zeros_like(p.data)
        v = self.v[name]
        m *= self.beta1
        m += (1.0 - self.beta1) * g
        v *= self.beta2
        v += (1.0 - self.beta2) * (g * g)
        t = self.step_count
        mhat = m / (1.0 - self.beta1**t)
        vhat = v / (1.0 - self.beta2**t)
        p.data -= (self.learning_rate * mhat / (np.sqrt(vhat) + self.eps)).astype(
            p.dtype, copy=False
        )


def make_optimizer(kind, learning_rate):
    if kind == "sgd":
        return SGD(learning_rate)
    if kind == "adam":
        return Adam(learning_rate)
    raise ValueError(f"unknown optimizer kind {kind!r} (expected sgd or adam)")
