"""Small dense-network building blocks on top of the autodiff engine."""

from __future__ import annotations

from .rng import SeededRng, glorot_uniform
from .tensor import Tensor, linear, relu

import numpy as np


class Dense:
    """A fully connected layer: y = W x + b with W of shape (out, in)."""

    def __init__(self, fan_in: int, fan_out: int, rng: SeededRng, name: str):
        self.name = name
        self.weight = Tensor(
            glorot_uniform(rng, fan_in, fan_out, (fan_out, fan_in)),
            requires_grad=True,
            name=f"{name}/w",
        )
        self.bias = Tensor(np.zeros(fan_out), requires_grad=True, name=f"{name}/b")

    def __call__(self, x: Tensor) -> Tensor:
        return linear(self.weight, x, self.bias)

    def named_parameters(self) -> dict[str, Tensor]:
        return {self.weight.name: self.weight, self.bias.name: self.bias}


class MLP:
    """Stacked dense layers with relu between them.

    `widths` lists every layer width including input and output, e.g.
    [32, 64, 16] builds two dense layers. With `final_relu` the output
    is rectified as well.
    """

    def __init__(self, widths: list[int], rng: SeededRng, name: str, final_relu: bool = False):
        if len(widths) < 2:
            raise ValueError(f"MLP needs at least two widths, got {widths}")
        self.name = name
        self.final_relu = final_relu
        self.layers = [
            Dense(widths[i], widths[i + 1], rng, f"{name}/{i}") for i in range(len(widths) - 1)
        ]

    def __call__(self, x: Tensor) -> Tensor:
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < last or self.final_relu:
                x = relu(x)
        return x

    def named_parameters(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for layer in self.layers:
            out.update(layer.named_parameters())
        return out
