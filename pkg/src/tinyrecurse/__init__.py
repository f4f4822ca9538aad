"""Training and inference engine for tiny recursive reasoning networks.

A 2-layer backbone refines a latent reasoning state z and an answer
state y over nested recursion schedules with deep supervision, learned
halting, and EMA-stabilized evaluation, on grid-puzzle tasks at desk
scale. Hot kernels run through numba with a pure-numpy fallback
(``TINYRECURSE_NUMBA=0``).
"""

from .model import NetConfig, ParamStore, param_count
from .recursion import CallCounters, LatentState, RecursionSchedule, effective_depth
from .tape import Tensor, backward, no_grad
from .training import TrainConfig, train_loop

__version__ = "0.1.0"

__all__ = [
    "NetConfig",
    "ParamStore",
    "param_count",
    "CallCounters",
    "LatentState",
    "RecursionSchedule",
    "effective_depth",
    "Tensor",
    "backward",
    "no_grad",
    "TrainConfig",
    "train_loop",
    "__version__",
]
