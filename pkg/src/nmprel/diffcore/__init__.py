"""Dense-network machinery: tape autodiff, ELU MLPs, RMSProp, gradient checks."""
from .checkpoint import (
    CheckpointError,
    CheckpointVersionError,
    load_checkpoint,
    loads_checkpoint,
    dumps_checkpoint,
    save_checkpoint,
)
from .functional import PROB_FLOOR, cross_entropy, elu, softmax
from .gradcheck import grad_check
from .mlp import glorot_uniform, init_mlp2, mlp2, mlp2_forward
from .optim import RmspropState, rmsprop_step
from .tensor import BackwardError, Tensor, as_tensor, backward, parameter

__all__ = [
    "BackwardError",
    "CheckpointError",
    "CheckpointVersionError",
    "PROB_FLOOR",
    "RmspropState",
    "Tensor",
    "as_tensor",
    "backward",
    "cross_entropy",
    "dumps_checkpoint",
    "elu",
    "glorot_uniform",
    "grad_check",
    "init_mlp2",
    "load_checkpoint",
    "loads_checkpoint",
    "mlp2",
    "mlp2_forward",
    "parameter",
    "rmsprop_step",
    "save_checkpoint",
    "softmax",
]
