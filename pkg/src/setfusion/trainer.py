"""Two-stage training: encoder on unpaired single-modality items, then
a frozen encoder feeding the set classifier.

Stage 1 consumes every observed payload (and every bag instance) as an
independent (payload, modality, label) item. Stage 2 freezes the
encoder and optimizes only the classifier on set observations. Both
stages share one loop: shuffled per-item Adam steps, per-epoch
validation, early stopping on the validation loss with best-weight
restore. A joint single-stage mode trains encoder and classifier
together for ablation comparisons.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .data import DatasetSchema, MaskedSample, split, to_set
from .encoder import Encoder, EncoderConfig, parameter_checksum, phase1_loss
from .errors import ContractError, NumericError
from .metrics import MetricSet, accuracy_only, compute_metrics
from .optim import Adam
from .rng import SeededRng
from .setnet import SetClassifier, SetObservation, f_forward, phase2_loss, predict_proba
from .setnet import mean_of_scalars
from .tensor import Tensor, no_grad


@dataclass
class TrainConfig:
    lr: float = 1e-4
    max_epochs_phase1: int = 100
    max_epochs_phase2: int = 100
    patience: int = 10
    batch_size: int = 1
    aggregator: str = "mean"
    seed: int = 0
    mse_weight: float = 1.0
    detach_recon_target: bool = True
    two_steps: bool = True
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    split_ratios: tuple[float, float, float] = (0.6, 0.1, 0.3)
    positive_class: int = 1
    d_z: int = 32
    d_l: int = 16
    backbone_hidden: int = 64
    decoder_hidden: int = 32
    embed_dim: int = 8
    hyper_hidden: int = 32
    rho_hidden: tuple[int, int] = (32, 16)

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")

    def encoder_config(self, schema: DatasetSchema) -> EncoderConfig:
        return EncoderConfig(
            input_width=schema.payload_width,
            num_classes=schema.num_classes,
            num_modalities=schema.num_modalities,
            d_z=self.d_z, d_l=self.d_l,
            backbone_hidden=self.backbone_hidden,
            decoder_hidden=self.decoder_hidden,
            embed_dim=self.embed_dim,
            hyper_hidden=self.hyper_hidden,
        )

    def with_seed(self, seed: int) -> "TrainConfig":
        return replace(self, seed=seed)


@dataclass
class PhaseReport:
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    best_epoch: int = 0
    stopped_epoch: int = 0

    def to_dict(self) -> dict:
        return {
            "train_losses": self.train_losses,
            "val_losses": self.val_losses,
            "best_epoch": self.best_epoch,
            "stopped_epoch": self.stopped_epoch,
        }


@dataclass
class TrainReport:
    phase1: PhaseReport | None
    phase2: PhaseReport
    checksum_before_phase2: str
    checksum_after_phase2: str
    metrics: MetricSet
    config: TrainConfig
    wall_time_s: float = 0.0  # informational only; never serialized

    def to_dict(self) -> dict:
        # deterministic content only: reruns must produce identical bytes
        return {
            "phase1": self.phase1.to_dict() if self.phase1 else None,
            "phase2": self.phase2.to_dict(),
            "checksum_before_phase2": self.checksum_before_phase2,
            "checksum_after_phase2": self.checksum_after_phase2,
            "metrics": self.metrics.to_dict(),
            "two_steps": self.config.two_steps,
            "seed": self.config.seed,
        }


class EarlyStopper:
    """Stop after `patience` epochs without a strict val-loss decrease."""

    def __init__(self, patience: int):
        if patience < 1:
            raise ValueError(f"patience must be >= 1, got {patience}")
        self.patience = patience
        self.best_val = np.inf
        self.best_epoch = 0
        self.epochs_since_best = 0

    def update(self, epoch: int, val_loss: float) -> bool:
        """Record an epoch; returns True when this is a new best."""
        if val_loss < self.best_val:
            self.best_val = val_loss
            self.best_epoch = epoch
            self.epochs_since_best = 0
            return True
        self.epochs_since_best += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.epochs_since_best >= self.patience


def collect_phase1_items(
    samples: list[MaskedSample], schema: DatasetSchema
) -> list[tuple[np.ndarray, int, int]]:
    """Every observed payload as an independent (x, modality, label) item."""
    items = []
    for s in samples:
        for i, slot in enumerate(s.slots):
            if s.mask[i]:
                continue
            if schema.is_bag(i):
                items.extend((inst, i, s.label) for inst in slot)
            else:
                items.append((slot, i, s.label))
    return items


def _snapshot(named_params: dict[str, Tensor]) -> dict[str, np.ndarray]:
    return {name: p.data.copy() for name, p in named_params.items()}


def _restore(named_params: dict[str, Tensor], snapshot: dict[str, np.ndarray]) -> None:
    for name, p in named_params.items():
        p.data[...] = snapshot[name]


def _train_loop(
    named_params: dict[str, Tensor],
    item_loss,
    train_items: list,
    val_items: list,
    cfg: TrainConfig,
    max_epochs: int,
    shuffle_rng: SeededRng,
    phase_name: str,
) -> PhaseReport:
    """Shared epoch loop: shuffle, batched Adam steps, early stop, restore."""
    if not train_items:
        raise ValueError(f"{phase_name}: empty training stream")
    opt = Adam(named_params, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, epsilon=cfg.epsilon)
    stopper = EarlyStopper(cfg.patience)
    report = PhaseReport()
    best = _snapshot(named_params)

    for epoch in range(1, max_epochs + 1):
        order = shuffle_rng.permutation(len(train_items))
        epoch_losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch = [train_items[i] for i in order[start : start + cfg.batch_size]]
            loss = mean_of_scalars([item_loss(item) for item in batch])
            loss.backward()
            opt.step()
            epoch_losses.append(loss.item())
        train_loss = float(np.mean(epoch_losses))
        with no_grad():
            val_loss = float(np.mean([item_loss(item).item() for item in val_items]))
        if not (np.isfinite(train_loss) and np.isfinite(val_loss)):
            raise NumericError(f"{phase_name}: non-finite loss at epoch {epoch}")
        report.train_losses.append(train_loss)
        report.val_losses.append(val_loss)
        if stopper.update(epoch, val_loss):
            best = _snapshot(named_params)
        report.stopped_epoch = epoch
        if stopper.should_stop:
            break

    _restore(named_params, best)
    report.best_epoch = stopper.best_epoch
    return report


def train_phase1(
    enc: Encoder,
    train_items: list[tuple[np.ndarray, int, int]],
    val_items: list[tuple[np.ndarray, int, int]],
    cfg: TrainConfig,
) -> PhaseReport:
    """Fit the universal encoder on unpaired single-modality items."""

    def item_loss(item):
        x, m, y = item
        return phase1_loss(
            enc.phase1_forward(x, m), y,
            mse_weight=cfg.mse_weight, detach_target=cfg.detach_recon_target,
        )

    return _train_loop(
        enc.named_parameters(), item_loss, train_items, val_items, cfg,
        cfg.max_epochs_phase1, SeededRng((cfg.seed, "shuffle_phase1")), "phase1",
    )


def freeze(enc: Encoder) -> Encoder:
    return enc.freeze()


def train_phase2(
    model: SetClassifier,
    enc: Encoder,
    train_sets: list[SetObservation],
    val_sets: list[SetObservation],
    cfg: TrainConfig,
) -> PhaseReport:
    """Fit the set classifier over a frozen encoder."""
    if not enc.frozen:
        raise ContractError("phase 2 requires a frozen encoder; call freeze(enc) first")

    def item_loss(obs):
        return phase2_loss(model, enc, [(obs, obs.label)])

    return _train_loop(
        model.named_parameters(), item_loss, train_sets, val_sets, cfg,
        cfg.max_epochs_phase2, SeededRng((cfg.seed, "shuffle_phase2")), "phase2",
    )


def train_joint(
    model: SetClassifier,
    enc: Encoder,
    train_sets: list[SetObservation],
    val_sets: list[SetObservation],
    cfg: TrainConfig,
) -> PhaseReport:
    """Single-stage ablation: encoder and classifier optimized together.

    Only the prediction path is trained; the stage-1 auxiliary heads
    (decoder, unimodal classifier) take no gradient from the set loss.
    """
    if enc.frozen:
        raise ContractError("joint training needs a trainable encoder")
    params = dict(enc.backbone.named_parameters())
    params.update(enc.hypernet.named_parameters())
    params.update(model.named_parameters())

    def item_loss(obs):
        return phase2_loss(model, enc, [(obs, obs.label)])

    return _train_loop(
        params, item_loss, train_sets, val_sets, cfg,
        cfg.max_epochs_phase2, SeededRng((cfg.seed, "shuffle_joint")), "joint",
    )


def evaluate_sets(
    model: SetClassifier,
    enc: Encoder,
    test_sets: list[SetObservation],
    positive_class: int = 1,
) -> MetricSet:
    """Test metrics; full binary metrics when the task is two-class."""
    if not test_sets:
        raise ValueError("evaluate_sets: empty test set")
    num_classes = model.num_classes
    if num_classes == 2:
        scores = [
            (float(predict_proba(model, enc, obs)[positive_class]), obs.label)
            for obs in test_sets
        ]
        return compute_metrics(scores, positive_class=positive_class)
    correct = sum(
        int(np.argmax(predict_proba(model, enc, obs)) == obs.label) for obs in test_sets
    )
    return accuracy_only(correct, len(test_sets), positive_class)


def run_full(
    cfg: TrainConfig,
    schema: DatasetSchema,
    samples: list[MaskedSample],
) -> tuple[TrainReport, Encoder, SetClassifier]:
    """Full pipeline: split, stage 1, freeze, stage 2, test metrics.

    With `cfg.two_steps` false, runs the joint single-stage ablation
    instead (no freeze; stage-2 checksums will differ).
    """
    started = time.perf_counter()
    train, val, test = split(samples, cfg.split_ratios, seed=(cfg.seed, "split"))
    if not train or not val or not test:
        raise ValueError(f"split of {len(samples)} samples left an empty part")

    enc = Encoder(cfg.encoder_config(schema), SeededRng((cfg.seed, "init_encoder")))
    model = SetClassifier(
        cfg.d_l, schema.num_classes, SeededRng((cfg.seed, "init_rho")),
        hidden=cfg.rho_hidden, aggregator=cfg.aggregator,
    )
    train_sets = [to_set(s, schema) for s in train]
    val_sets = [to_set(s, schema) for s in val]
    test_sets = [to_set(s, schema) for s in test]

    if cfg.two_steps:
        p1 = train_phase1(
            enc,
            collect_phase1_items(train, schema),
            collect_phase1_items(val, schema),
            cfg,
        )
        freeze(enc)
        checksum_before = parameter_checksum(enc.named_parameters())
        p2 = train_phase2(model, enc, train_sets, val_sets, cfg)
        checksum_after = parameter_checksum(enc.named_parameters())
    else:
        p1 = None
        checksum_before = parameter_checksum(enc.named_parameters())
        p2 = train_joint(model, enc, train_sets, val_sets, cfg)
        checksum_after = parameter_checksum(enc.named_parameters())

    metrics = evaluate_sets(model, enc, test_sets, cfg.positive_class)
    report = TrainReport(
        phase1=p1, phase2=p2,
        checksum_before_phase2=checksum_before,
        checksum_after_phase2=checksum_after,
        metrics=metrics, config=cfg,
        wall_time_s=time.perf_counter() - started,
    )
    if cfg.two_steps and checksum_before != checksum_after:
        raise ContractError("encoder parameters drifted during stage 2")
    return report, enc, model
