"""Imputation-free multimodal classification over sets of observed modalities.

Trains a hypernetwork-conditioned universal feature extractor in a
first stage, freezes it, then trains a permutation-invariant set
classifier over whatever modalities each sample actually has.
"""

from .checkpoint import load_checkpoint, save_checkpoint
from .data import (
    DatasetSchema,
    MaskedSample,
    MultimodalSample,
    apply_missingness,
    complete,
    generate,
    load_dataset,
    save_dataset,
    split,
    to_set,
)
from .encoder import Encoder, EncoderConfig, Phase1Output, parameter_checksum, phase1_loss
from .errors import ConfigError, ContractError, DataFormatError, NumericError, ShapeError
from .hypernet import HyperNetwork, ModalityId
from .optim import Adam
from .rng import SeededRng, glorot_uniform
from .setnet import (
    SetClassifier,
    SetObservation,
    aggregate,
    f_forward,
    phase2_loss,
    predict_proba,
)
from .tensor import (
    Tensor,
    add,
    backward,
    concat,
    matmul,
    mse,
    mul,
    no_grad,
    reduce,
    relu,
    reshape,
    row,
    scale,
    slice1d,
    softmax,
    softmax_cross_entropy,
    stack,
    sub,
)

__version__ = "0.1.0"
