from . import ops
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import grad_check, numerical_gradient, relative_error
from .optim import Adam, AdamState, NonFiniteGradientError, adam_step
from .tensor import Tensor, as_tensor, parameter, zero_grads

__all__ = [
    "Adam",
    "AdamState",
    "CheckpointError",
    "NonFiniteGradientError",
    "Tensor",
    "adam_step",
    "as_tensor",
    "grad_check",
    "load_checkpoint",
    "numerical_gradient",
    "ops",
    "parameter",
    "relative_error",
    "save_checkpoint",
    "zero_grads",
]
