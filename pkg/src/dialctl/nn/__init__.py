from .model import (
    KINDS,
    ModelParams,
    ModelState,
    init_model,
    initial_state,
    forward_step,
    forward_sequence,
    backward_sequence,
    softmax,
    zero_grads,
)
from .adadelta import AdaDeltaState, init_adadelta, adadelta_apply
from .checkpoint import save_checkpoint, load_checkpoint, CheckpointError

__all__ = [
    "KINDS",
    "ModelParams",
    "ModelState",
    "init_model",
    "initial_state",
    "forward_step",
    "forward_sequence",
    "backward_sequence",
    "softmax",
    "zero_grads",
    "AdaDeltaState",
    "init_adadelta",
    "adadelta_apply",
    "save_checkpoint",
    "load_checkpoint",
    "CheckpointError",
]
