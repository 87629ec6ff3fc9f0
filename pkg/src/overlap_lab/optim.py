"""First-order optimizers over autodiff leaf tensors.

Parameters are `Tensor` leaves with `requires_grad=True`. A step reads
each accumulated `.grad_array` and rebinds the tensor's array to the
updated value (arrays themselves are never mutated, so anything an old
tape recorded stays valid).
"""
from __future__ import annotations

import numpy as np

from .autodiff import Tensor
from .exceptions import ParameterError


class Adam:
    """Adam with bias correction; deterministic given parameter order."""

    def __init__(self, params, lr: float = 1e-3, betas=(0.9, 0.999),
                 eps: float = 1e-8):
        self.params = list(params)
        if not self.params:
            raise ParameterError("Adam needs at least one parameter")
        for p in self.params:
            if not isinstance(p, Tensor) or not p.requires_grad:
                raise ParameterError("Adam parameters must be requires_grad tensors")
        if not lr > 0.0:
            raise ParameterError("lr must be positive")
        b1, b2 = betas
        if not (0.0 <= b1 < 1.0 and 0.0 <= b2 < 1.0):
            raise ParameterError("betas must lie in [0, 1)")
        self.lr = float(lr)
        self.b1 = float(b1)
        self.b2 = float(b2)
        self.eps = float(eps)
        self.t = 0
        self._m = [np.zeros_like(p.array) for p in self.params]
        self._v = [np.zeros_like(p.array) for p in self.params]

    def step(self) -> None:
        """Apply one update from the gradients accumulated so far."""
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for i, p in enumerate(self.params):
            g = p.grad_array
            if g is None:
                continue
            self._m[i] = self.b1 * self._m[i] + (1.0 - self.b1) * g
            self._v[i] = self.b2 * self._v[i] + (1.0 - self.b2) * g * g
            m_hat = self._m[i] / c1
            v_hat = self._v[i] / c2
            p.array = p.array - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()
