"""Self-contained numerical core: autodiff tensors, GRU/attention layers,
the optimizer, gradient checking, deterministic RNG and model archives."""

from .adadelta import AdaDeltaState, adadelta_step
from .archive import ArchiveError, ArchiveVersionError, load_archive, save_archive
from .gradcheck import grad_check
from .layers import (
    AttentionParams,
    GruParams,
    OutputParams,
    attention,
    bigru_encode,
    cross_entropy,
    gru_run,
    gru_step,
    output_distribution,
)
from .rng import Rng, init_uniform
from .tensor import Tensor

__all__ = [
    "AdaDeltaState",
    "adadelta_step",
    "ArchiveError",
    "ArchiveVersionError",
    "load_archive",
    "save_archive",
    "grad_check",
    "AttentionParams",
    "GruParams",
    "OutputParams",
    "attention",
    "bigru_encode",
    "cross_entropy",
    "gru_run",
    "gru_step",
    "output_distribution",
    "Rng",
    "init_uniform",
    "Tensor",
]
