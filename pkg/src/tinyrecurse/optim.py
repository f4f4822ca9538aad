"""Optimizer and weight averaging.

AdamW with decoupled weight decay and linear learning-rate warmup. Norm
weights and embedding tables are exempt from decay; the puzzle-id
embedding can run at its own learning rate. The EMA keeps a shadow copy
of every parameter for evaluation; shadows never feed gradients.
"""

from __future__ import annotations

import logging

import numpy as np

from . import kernels
from .model import ParamStore

log = logging.getLogger(__name__)


def _no_decay(name: str) -> bool:
    return "norm" in name or name.startswith("embed_")


class AdamW:
    """Decoupled-weight-decay adaptive-moment optimizer over a ParamStore."""

    def __init__(
        self,
        store: ParamStore,
        lr: float = 1e-4,
        beta1: float = 0.9,
        beta2: float = 0.95,
        eps: float = 1e-8,
        weight_decay: float = 1.0,
        warmup_steps: int = 2000,
        embedding_lr: float | None = None,
    ):
        self.store = store
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.warmup_steps = warmup_steps
        self.embedding_lr = embedding_lr
        self.t = 0
        self.skipped = 0
        self.m = {n: np.zeros_like(p.data) for n, p in store.named()}
        self.v = {n: np.zeros_like(p.data) for n, p in store.named()}

    def warmup_factor(self, step: int) -> float:
        if self.warmup_steps <= 0:
            return 1.0
        return min(1.0, step / self.warmup_steps)

    def group_of(self, name: str) -> tuple[float, float]:
        """(base lr, weight decay) for one parameter."""
        lr = self.lr
        if name == "embed_puzzle" and self.embedding_lr is not None:
            lr = self.embedding_lr
        wd = 0.0 if _no_decay(name) else self.weight_decay
        return lr, wd

    def step(self) -> bool:
        """Apply one update; returns False (and logs) on non-finite grads."""
        grads = {}
        for name, p in self.store.named():
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            if not np.all(np.isfinite(g)):
                self.skipped += 1
                log.warning("step %d skipped: non-finite gradient in %s", self.t + 1, name)
                return False
            grads[name] = g
        self.t += 1
        warm = self.warmup_factor(self.t)
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        updated = 0
        for name, p in self.store.named():
            lr, wd = self.group_of(name)
            kernels.adamw_update(
                p.data, grads[name], self.m[name], self.v[name],
                lr * warm, self.beta1, self.beta2, self.eps, wd, bc1, bc2,
            )
            updated += p.size
        assert updated == self.store.n_elements
        return True

    def zero_grad(self):
        self.store.zero_grads()

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {f"opt.m.{n}": a for n, a in self.m.items()}
        out.update({f"opt.v.{n}": a for n, a in self.v.items()})
        return out

    def load_state(self, arrays: dict[str, np.ndarray], t: int):
        for n in self.m:
            self.m[n][...] = arrays[f"opt.m.{n}"]
            self.v[n][...] = arrays[f"opt.v.{n}"]
        self.t = t


class EMA:
    """Exponential moving average of the parameters, for evaluation."""

    def __init__(self, store: ParamStore, decay: float = 0.999):
        if not 0.0 <= decay < 1.0:
            raise ValueError("ema decay must be in [0, 1)")
        self.decay = decay
        self.shadow = {n: p.data.copy() for n, p in store.named()}

    def update(self, store: ParamStore):
        for n, p in store.named():
            kernels.ema_update(self.shadow[n], p.data, self.decay)

    def copy_into(self, store: ParamStore):
        """Overwrite the store's weights with the shadow (for eval stores)."""
        for n, p in store.named():
            p.data[...] = self.shadow[n]

    def load(self, arrays: dict[str, np.ndarray]):
        for n in self.shadow:
            self.shadow[n][...] = arrays[n]
