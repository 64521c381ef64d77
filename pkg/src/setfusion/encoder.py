"""Universal feature extractor: shared backbone + modality-conditioned head.

One encoder instance serves every modality. The backbone maps a raw
payload to intermediate features z; the hypernetwork-conditioned layer
maps z to the latent e used downstream. During the first training
stage two auxiliary heads make the latents informative: a decoder that
reconstructs z from e and a per-modality class predictor.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ShapeError
from .hypernet import HyperNetwork, _index_of
from .nn import MLP, Dense
from .rng import SeededRng
from .tensor import (
    Tensor,
    add,
    as_tensor,
    linear,
    mse,
    no_grad,
    reduce,
    scale,
    softmax_cross_entropy,
    stack,
)


@dataclass
class EncoderConfig:
    input_width: int
    num_classes: int
    num_modalities: int
    d_z: int = 32
    d_l: int = 16
    backbone_hidden: int = 64
    decoder_hidden: int = 32
    embed_dim: int = 8
    hyper_hidden: int = 32

    def __post_init__(self):
        for field in ("input_width", "d_z", "d_l", "backbone_hidden", "decoder_hidden",
                      "embed_dim", "hyper_hidden"):
            if getattr(self, field) < 1:
                raise ValueError(f"{field} must be >= 1, got {getattr(self, field)}")
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.num_modalities < 1:
            raise ValueError(f"num_modalities must be >= 1, got {self.num_modalities}")


class Phase1Output(NamedTuple):
    z: Tensor
    e: Tensor
    z_rec: Tensor
    y_pred: Tensor


class Encoder:
    """Backbone -> z -> conditional layer -> e, with stage-1 auxiliary heads."""

    def __init__(self, cfg: EncoderConfig, rng: SeededRng):
        self.cfg = cfg
        self.frozen = False
        self._head_cache: dict[int, tuple[Tensor, Tensor]] = {}
        self.backbone = MLP(
            [cfg.input_width, cfg.backbone_hidden, cfg.d_z],
            rng, "encoder/backbone", final_relu=True,
        )
        self.hypernet = HyperNetwork(
            cfg.num_modalities, cfg.d_z, cfg.d_l, rng,
            embed_dim=cfg.embed_dim, hidden=cfg.hyper_hidden,
        )
        self.decoder = MLP([cfg.d_l, cfg.decoder_hidden, cfg.d_z], rng, "encoder/decoder")
        self.uniclassifier = Dense(cfg.d_l, cfg.num_classes, rng, "encoder/uniclassifier")

    def _check_input(self, x: Tensor) -> Tensor:
        x = as_tensor(x)
        if x.data.ndim != 1 or x.shape[0] != self.cfg.input_width:
            raise ShapeError(
                f"encoder expects payload width {self.cfg.input_width}, got shape {x.shape}"
            )
        return x

    def _conditional_head(self, m) -> tuple[Tensor, Tensor]:
        """Per-modality (weight, bias); cached once the encoder is frozen."""
        idx = _index_of(m)
        cached = self._head_cache.get(idx)
        if cached is None:
            with no_grad():
                w, b = self.hypernet.generate_weights(idx)
            cached = (Tensor(w.data), Tensor(b.data))
            self._head_cache[idx] = cached
        return cached

    def phi_forward(self, x, m) -> Tensor:
        """Latent features e for one payload conditioned on its modality."""
        x = self._check_input(x)
        z = self.backbone(x)
        if self.frozen:
            w, b = self._conditional_head(m)
            return linear(w, z, b)
        return self.hypernet.conditional_linear(z, m)

    def phase1_forward(self, x, m) -> Phase1Output:
        x = self._check_input(x)
        z = self.backbone(x)
        e = self.hypernet.conditional_linear(z, m)
        return Phase1Output(z=z, e=e, z_rec=self.decoder(e), y_pred=self.uniclassifier(e))

    def pool_instances(self, xs, m) -> Tensor:
        """Elementwise max over the latent features of a bag of payloads."""
        if not xs:
            raise ValueError("pool_instances: empty instance bag")
        feats = [self.phi_forward(x, m) for x in xs]
        if len(feats) == 1:
            return feats[0]
        return reduce(stack(feats), axis=0, kind="max")

    def freeze(self) -> "Encoder":
        for p in self.named_parameters().values():
            p.requires_grad = False
        self.frozen = True
        self._head_cache.clear()
        return self

    def named_parameters(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        out.update(self.backbone.named_parameters())
        out.update(self.hypernet.named_parameters())
        out.update(self.decoder.named_parameters())
        out.update(self.uniclassifier.named_parameters())
        return out


def phase1_loss(
    out: Phase1Output,
    y: int,
    mse_weight: float = 1.0,
    detach_target: bool = True,
) -> Tensor:
    """Reconstruction + unimodal classification loss for stage 1.

    By default z enters the reconstruction term as a detached constant,
    so the gradient shapes the decoder output rather than dragging the
    backbone toward its own reconstruction.
    """
    target = out.z.detach() if detach_target else out.z
    rec = mse(target, out.z_rec)
    ce = softmax_cross_entropy(out.y_pred, y)
    if mse_weight == 1.0:
        return add(rec, ce)
    return add(scale(rec, mse_weight), ce)


def parameter_checksum(named_params: dict[str, Tensor]) -> str:
    """SHA-256 over name-sorted parameter bytes; detects any drift."""
    import hashlib

    h = hashlib.sha256()
    for name in sorted(named_params):
        h.update(name.encode("utf-8"))
        h.update(np.ascontiguousarray(named_params[name].data).tobytes())
    return h.hexdigest()
