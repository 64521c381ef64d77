"""Conditional weight generation for the encoder's final layer.

A small generator network maps a learned per-modality embedding to the
flattened weights and bias of a dense layer, so one shared parameter
set serves every modality while the emitted layer differs per modality.
The emitted weights are intermediate values of the graph, never
optimizer parameters; gradients flow through them into the embedding
table and the generator trunk.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ShapeError
from .nn import Dense
from .rng import SeededRng, glorot_uniform
from .tensor import Tensor, add, matmul, relu, reshape, row, slice1d


@dataclass(frozen=True)
class ModalityId:
    """Dense index of an acquisition channel plus a display name."""

    index: int
    name: str = ""

    def __post_init__(self):
        if self.index < 0:
            raise ValueError(f"modality index must be non-negative, got {self.index}")


def _index_of(m) -> int:
    return m.index if isinstance(m, ModalityId) else int(m)


class HyperNetwork:
    """Emits (weight, bias) of a d_z -> d_l dense layer per modality."""

    def __init__(
        self,
        num_modalities: int,
        d_z: int,
        d_l: int,
        rng: SeededRng,
        embed_dim: int = 8,
        hidden: int = 32,
        name: str = "hypernet",
    ):
        if num_modalities < 1:
            raise ValueError(f"need at least one modality, got {num_modalities}")
        self.num_modalities = num_modalities
        self.d_z = d_z
        self.d_l = d_l
        self.embedding = Tensor(
            glorot_uniform(rng, embed_dim, embed_dim, (num_modalities, embed_dim)),
            requires_grad=True,
            name=f"{name}/embedding",
        )
        self.trunk = Dense(embed_dim, hidden, rng, f"{name}/trunk")
        self.head = Dense(hidden, d_l * d_z + d_l, rng, f"{name}/head")

    def generate_weights(self, m) -> tuple[Tensor, Tensor]:
        """Weights and bias of the conditional layer for modality `m`.

        Pure in (parameters, modality index): repeated calls return
        identical values until a parameter update happens.
        """
        idx = _index_of(m)
        if not 0 <= idx < self.num_modalities:
            raise ValueError(f"modality index {idx} out of range [0, {self.num_modalities})")
        code = relu(self.trunk(row(self.embedding, idx)))
        flat = self.head(code)
        split = self.d_l * self.d_z
        weight = reshape(slice1d(flat, 0, split), (self.d_l, self.d_z))
        bias = slice1d(flat, split, split + self.d_l)
        return weight, bias

    def conditional_linear(self, z: Tensor, m) -> Tensor:
        """Apply the generated modality-specific layer: W_m z + b_m."""
        if z.data.ndim != 1 or z.shape[0] != self.d_z:
            raise ShapeError(f"conditional_linear: expected input width {self.d_z}, got shape {z.shape}")
        weight, bias = self.generate_weights(m)
        return add(matmul(weight, z), bias)

    def named_parameters(self) -> dict[str, Tensor]:
        out = {self.embedding.name: self.embedding}
        out.update(self.trunk.named_parameters())
        out.update(self.head.named_parameters())
        return out
