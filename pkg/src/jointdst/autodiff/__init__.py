"""Dense tensors with reverse-mode differentiation, ADAM and gradient
checking.
"""

from .gradcheck import gradient_check
from .optim import Adam, AdamState
from .tensor import (
    Parameter,
    ParameterSet,
    Tape,
    TapeEntry,
    Tensor,
    backward,
    current_tape,
)

__all__ = [
    "Adam",
    "AdamState",
    "Parameter",
    "ParameterSet",
    "Tape",
    "TapeEntry",
    "Tensor",
    "backward",
    "current_tape",
    "gradient_check",
]
