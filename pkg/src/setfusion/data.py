"""Synthetic multimodal datasets with controlled missingness.

Payloads of class y, modality i are noisy copies of a class/modality
centroid drawn once from a sphere of radius `class_sep`. Missingness
is applied per sample after generation; a sample is never left fully
missing (offending draws are redrawn). Datasets serialize to a small
binary container with a magic tag and format version.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError
from .hypernet import ModalityId
from .rng import SeededRng
from .setnet import SetObservation

MAGIC = b"SFDS"
FORMAT_VERSION = 1

MECHANISMS = ("mcar", "modality_k_only")


@dataclass
class DatasetSchema:
    num_modalities: int
    modality_names: list[str]
    payload_width: int
    num_classes: int
    bag_modalities: tuple[int, ...] = ()

    def __post_init__(self):
        if self.num_modalities < 1:
            raise ValueError(f"num_modalities must be >= 1, got {self.num_modalities}")
        if self.payload_width < 1:
            raise ValueError(f"payload_width must be >= 1, got {self.payload_width}")
        if len(self.modality_names) != self.num_modalities:
            raise ValueError(
                f"{len(self.modality_names)} names for {self.num_modalities} modalities"
            )
        if len(set(self.modality_names)) != self.num_modalities:
            raise ValueError(f"modality names must be unique, got {self.modality_names}")
        self.bag_modalities = tuple(sorted(self.bag_modalities))
        for i in self.bag_modalities:
            if not 0 <= i < self.num_modalities:
                raise ValueError(f"bag modality index {i} out of range")

    def modality(self, index: int) -> ModalityId:
        return ModalityId(index=index, name=self.modality_names[index])

    def is_bag(self, index: int) -> bool:
        return index in self.bag_modalities

    def to_dict(self) -> dict:
        return {
            "num_modalities": self.num_modalities,
            "modality_names": list(self.modality_names),
            "payload_width": self.payload_width,
            "num_classes": self.num_classes,
            "bag_modalities": list(self.bag_modalities),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSchema":
        return cls(
            num_modalities=int(d["num_modalities"]),
            modality_names=list(d["modality_names"]),
            payload_width=int(d["payload_width"]),
            num_classes=int(d["num_classes"]),
            bag_modalities=tuple(d.get("bag_modalities", ())),
        )


@dataclass
class MultimodalSample:
    """A complete d-modal observation: payload (or bag) per modality."""

    payloads: list
    label: int
    sample_id: str


@dataclass
class MaskedSample:
    """A d-modal observation with explicit missing slots.

    `slots[i]` is None exactly when `mask[i] == 1`; observed slots keep
    the original payload.
    """

    slots: list
    label: int
    mask: np.ndarray
    sample_id: str

    @property
    def q(self) -> int:
        return int(len(self.mask) - self.mask.sum())


def _noise_sigmas(noise_sigma, d: int) -> list[float]:
    if isinstance(noise_sigma, (int, float)):
        return [float(noise_sigma)] * d
    sigmas = [float(s) for s in noise_sigma]
    if len(sigmas) != d:
        raise ValueError(f"{len(sigmas)} noise sigmas for {d} modalities")
    return sigmas


def generate(
    schema: DatasetSchema,
    n: int,
    seed,
    class_sep: float = 10.0,
    noise_sigma=0.5,
    bag_size_range: tuple[int, int] = (2, 5),
) -> list[MultimodalSample]:
    """Class-balanced samples around per-(class, modality) centroids."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if class_sep <= 0:
        raise ValueError(f"class_sep must be positive, got {class_sep}")
    sigmas = _noise_sigmas(noise_sigma, schema.num_modalities)
    if any(s < 0 for s in sigmas):
        raise ValueError(f"noise sigma must be >= 0, got {sigmas}")
    lo, hi = bag_size_range
    if not 1 <= lo <= hi:
        raise ValueError(f"invalid bag size range {bag_size_range}")

    root = SeededRng(seed)
    crng = root.child("centroids")
    r = schema.payload_width
    centroids = np.empty((schema.num_classes, schema.num_modalities, r))
    for y in range(schema.num_classes):
        for i in range(schema.num_modalities):
            direction = crng.normal(r)
            centroids[y, i] = class_sep * direction / np.linalg.norm(direction)

    samples = []
    for idx in range(n):
        y = idx % schema.num_classes
        srng = root.child("sample", idx)
        payloads = []
        for i in range(schema.num_modalities):
            base = centroids[y, i] + sigmas[i] * srng.normal(r)
            if schema.is_bag(i):
                size = int(srng.integers(lo, hi + 1))
                payloads.append([base + sigmas[i] * srng.normal(r) for _ in range(size)])
            else:
                payloads.append(base)
        samples.append(MultimodalSample(payloads=payloads, label=y, sample_id=f"s{idx:06d}"))
    return samples


def apply_missingness(
    samples: list[MultimodalSample],
    rate: float,
    mechanism: str = "mcar",
    seed=0,
    k: int | None = None,
) -> list[MaskedSample]:
    """Mask modalities per sample; fully-missing draws are redrawn."""
    if not 0 <= rate < 1:
        raise ValueError(f"missing rate must be in [0, 1), got {rate}")
    if mechanism not in MECHANISMS:
        raise ValueError(f"unknown mechanism {mechanism!r}; expected one of {MECHANISMS}")
    if mechanism == "modality_k_only":
        if k is None:
            raise ValueError("mechanism 'modality_k_only' requires k")
        d = len(samples[0].payloads) if samples else 0
        if not 0 <= k < d:
            raise ValueError(f"k={k} out of range for {d} modalities")

    root = SeededRng(seed)
    masked = []
    for idx, s in enumerate(samples):
        d = len(s.payloads)
        rng = root.child("mask", idx)
        while True:
            if mechanism == "mcar":
                v = (rng.uniform(0.0, 1.0, d) < rate).astype(np.uint8)
            else:
                v = np.zeros(d, dtype=np.uint8)
                if rng.uniform(0.0, 1.0) < rate:
                    v[k] = 1
            if not v.all():
                break
        slots = [None if v[i] else s.payloads[i] for i in range(d)]
        masked.append(MaskedSample(slots=slots, label=s.label, mask=v, sample_id=s.sample_id))
    return masked


def complete(samples: list[MultimodalSample]) -> list[MaskedSample]:
    """View complete samples as masked samples with all-zero masks."""
    return apply_missingness(samples, rate=0.0, mechanism="mcar", seed=0)


def to_set(ms: MaskedSample, schema: DatasetSchema) -> SetObservation:
    """Observed (payload, modality) pairs in ascending modality order."""
    elements = [
        (ms.slots[i], schema.modality(i))
        for i in range(len(ms.slots))
        if ms.mask[i] == 0
    ]
    return SetObservation(elements=elements, label=ms.label, sample_id=ms.sample_id)


def split(samples: list, ratios, seed) -> tuple[list, list, list]:
    """Disjoint, exhaustive, seeded (train, val, test) partition.

    Sizes follow the largest-remainder rule so they always sum to n
    and match exact ratios when possible.
    """
    ratios = [float(x) for x in ratios]
    if len(ratios) != 3 or any(x <= 0 for x in ratios):
        raise ValueError(f"need three positive ratios, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    n = len(samples)
    raw = [x * n for x in ratios]
    sizes = [int(np.floor(x)) for x in raw]
    remainders = [x - s for x, s in zip(raw, sizes)]
    for _ in range(n - sum(sizes)):
        j = int(np.argmax(remainders))
        sizes[j] += 1
        remainders[j] = -1.0
    order = SeededRng(seed).permutation(n)
    a, b = sizes[0], sizes[0] + sizes[1]
    train = [samples[i] for i in order[:a]]
    val = [samples[i] for i in order[a:b]]
    test = [samples[i] for i in order[b:]]
    return train, val, test


def missing_fraction(samples: list[MaskedSample]) -> np.ndarray:
    """Observed missing rate per modality."""
    masks = np.stack([s.mask for s in samples])
    return masks.mean(axis=0)


# ---------------------------------------------------------------------------
# binary container


def _write_array(fh, arr: np.ndarray) -> None:
    fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_array(fh, r: int) -> np.ndarray:
    raw = fh.read(8 * r)
    if len(raw) != 8 * r:
        raise DataFormatError("truncated payload record")
    return np.frombuffer(raw, dtype="<f8").copy()


def save_dataset(path, schema: DatasetSchema, samples: list[MaskedSample]) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        blob = json.dumps(schema.to_dict(), sort_keys=True).encode("utf-8")
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<I", len(samples)))
        for s in samples:
            sid = s.sample_id.encode("utf-8")
            fh.write(struct.pack("<H", len(sid)))
            fh.write(sid)
            fh.write(struct.pack("<i", s.label))
            fh.write(np.asarray(s.mask, dtype=np.uint8).tobytes())
            for i, slot in enumerate(s.slots):
                if s.mask[i]:
                    continue
                if schema.is_bag(i):
                    fh.write(struct.pack("<I", len(slot)))
                    for inst in slot:
                        _write_array(fh, inst)
                else:
                    _write_array(fh, slot)


def load_dataset(path) -> tuple[DatasetSchema, list[MaskedSample]]:
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise DataFormatError(f"{path}: not a dataset container (bad magic)")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != FORMAT_VERSION:
            raise DataFormatError(f"{path}: unsupported dataset format version {version}")
        (blob_len,) = struct.unpack("<I", fh.read(4))
        schema = DatasetSchema.from_dict(json.loads(fh.read(blob_len).decode("utf-8")))
        (n,) = struct.unpack("<I", fh.read(4))
        d, r = schema.num_modalities, schema.payload_width
        samples = []
        for _ in range(n):
            (sid_len,) = struct.unpack("<H", fh.read(2))
            sid = fh.read(sid_len).decode("utf-8")
            (label,) = struct.unpack("<i", fh.read(4))
            mask = np.frombuffer(fh.read(d), dtype=np.uint8).copy()
            slots = []
            for i in range(d):
                if mask[i]:
                    slots.append(None)
                elif schema.is_bag(i):
                    (count,) = struct.unpack("<I", fh.read(4))
                    slots.append([_read_array(fh, r) for _ in range(count)])
                else:
                    slots.append(_read_array(fh, r))
            samples.append(MaskedSample(slots=slots, label=label, mask=mask, sample_id=sid))
    return schema, samples


def export_text(path, schema: DatasetSchema, samples: list[MaskedSample]) -> None:
    """One row per (sample, modality, instance) for eyeballing small sets."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["sample_id", "label", "modality", "missing", "instance"]
            + [f"x{j}" for j in range(schema.payload_width)]
        )
        for s in samples:
            for i, slot in enumerate(s.slots):
                if s.mask[i]:
                    writer.writerow([s.sample_id, s.label, i, 1, 0] + [""] * schema.payload_width)
                    continue
                instances = slot if schema.is_bag(i) else [slot]
                for j, inst in enumerate(instances):
                    writer.writerow(
                        [s.sample_id, s.label, i, 0, j] + [repr(v) for v in inst.tolist()]
                    )
