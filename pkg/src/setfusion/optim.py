"""Bias-corrected Adam on named parameter tensors."""

from __future__ import annotations

import math

import numpy as np

from .errors import ContractError
from .tensor import Tensor


class Adam:
    """Adam with the standard bias correction; clears grads after each step.

    Parameters must require gradients at construction time: building an
    optimizer over frozen tensors is a usage error, not a no-op.
    """

    def __init__(
        self,
        named_params: dict[str, Tensor],
        lr: float = 1e-4,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ):
        if lr <= 0:
            raise ValueError(f"lr must be positive, got {lr}")
        frozen = [name for name, p in named_params.items() if not p.requires_grad]
        if frozen:
            raise ContractError(f"optimizer over frozen parameters: {', '.join(sorted(frozen))}")
        self.named_params = dict(named_params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self._m = {name: np.zeros_like(p.data) for name, p in named_params.items()}
        self._v = {name: np.zeros_like(p.data) for name, p in named_params.items()}

    @property
    def params(self) -> list[Tensor]:
        return list(self.named_params.values())

    def step(self) -> None:
        for name, p in self.named_params.items():
            if not p.requires_grad:
                raise ContractError(f"adam step would update frozen parameter '{name}'")
            if p.grad is None:
                raise ContractError(f"parameter '{name}' has no gradient")
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        # lr (m / bc1) / (sqrt(v / bc2) + eps) rewritten with scalar
        # prefactors so each parameter costs one sqrt and one divide
        step_size = self.lr * math.sqrt(bc2) / bc1
        denom_eps = self.epsilon * math.sqrt(bc2)
        for name, p in self.named_params.items():
            g = p.grad
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            denom = np.sqrt(v)
            denom += denom_eps
            p.data -= step_size * (m / denom)
            p.grad = None

    def zero_grad(self) -> None:
        for p in self.named_params.values():
            p.grad = None
