"""Deep-supervision training loop.

A persistent pool of batch_size slots each hold one sample plus its
carried latent state. Every optimization step re-embeds the inputs, runs
one full forward of the configured variant, adds the answer and halting
losses, back-propagates, and updates weights and their EMA. Slots whose
sample halted (or hit the supervision cap) are refilled with fresh
samples and their state reset, so easy samples stop hogging steps.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import losses, tape
from .model import ParamStore, decode
from .ops import add
from .optim import EMA, AdamW
from .recursion import (
    CallCounters,
    LatentState,
    RecursionSchedule,
    check_memory,
    init_state,
    run_schedule,
)
from .tape import Tensor


class TrainingDiverged(RuntimeError):
    """Raised when the loss goes non-finite; carries the live state."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


@dataclass
class TrainConfig:
    """Optimization hyperparameters (schedule lives on RecursionSchedule)."""

    batch_size: int = 768
    lr: float = 1e-4
    embedding_lr: float | None = None
    warmup_steps: int = 2000
    beta1: float = 0.9
    beta2: float = 0.95
    weight_decay: float = 1.0
    ema_decay: float = 0.999
    max_steps: int = 1000
    seed: int = 0
    dtype: str = "float32"
    halting: bool = True
    adam_eps: float = 1e-8
    mem_limit_gb: float = 8.0

    def __post_init__(self):
        if not 0.0 <= self.ema_decay < 1.0:
            raise ValueError("ema_decay must be in [0, 1)")
        if self.warmup_steps < 0:
            raise ValueError("warmup_steps must be >= 0")
        if self.batch_size < 1 or self.max_steps < 0:
            raise ValueError("batch_size and max_steps must be positive")


class DataStream:
    """Deterministic shuffled epochs over a tokenized dataset, with wrap."""

    def __init__(self, x: np.ndarray, y: np.ndarray, puzzle_id: np.ndarray, seed: int):
        if len(x) == 0:
            raise ValueError("empty dataset")
        self.x = x
        self.y = y
        self.puzzle_id = puzzle_id
        self.seed = seed
        self.epoch = 0
        self.pos = 0
        self._order = self._perm(0)

    def _perm(self, epoch: int) -> np.ndarray:
        return np.random.default_rng((self.seed, epoch)).permutation(len(self.x))

    def take(self, k: int):
        idx = np.empty(k, dtype=np.int64)
        got = 0
        while got < k:
            avail = len(self.x) - self.pos
            use = min(avail, k - got)
            idx[got : got + use] = self._order[self.pos : self.pos + use]
            self.pos += use
            got += use
            if self.pos >= len(self.x):
                self.epoch += 1
                self.pos = 0
                self._order = self._perm(self.epoch)
        return self.x[idx], self.y[idx], self.puzzle_id[idx]

    def state(self) -> dict:
        return {"epoch": self.epoch, "pos": self.pos}

    def restore(self, state: dict):
        self.epoch = int(state["epoch"])
        self.pos = int(state["pos"])
        self._order = self._perm(self.epoch)


class SamplePool:
    """batch_size slots of (sample, carried state, supervision counter)."""

    def __init__(self, stream: DataStream, store: ParamStore, sched: RecursionSchedule, batch_size: int):
        self.stream = stream
        self.store = store
        self.sched = sched
        self.batch_size = batch_size
        l = store.cfg.seq_len
        self.x = np.zeros((batch_size, l), dtype=np.int64)
        self.y_true = np.zeros((batch_size, l), dtype=np.int64)
        self.puzzle_id = np.zeros(batch_size, dtype=np.int64)
        self.steps = np.zeros(batch_size, dtype=np.int64)
        st = init_state(store, sched, batch_size)
        self.carry_y = st.y.data if st.y is not None else None
        if isinstance(st.z, list):
            self.carry_z = np.stack([t.data for t in st.z])
        else:
            self.carry_z = st.z.data
        self.retired_steps = 0
        self.retired_count = 0
        self.refill(np.ones(batch_size, dtype=bool))

    def state_tensors(self) -> LatentState:
        y = Tensor(self.carry_y) if self.carry_y is not None else None
        if self.carry_z.ndim == 4:
            return LatentState(y, [Tensor(self.carry_z[i]) for i in range(self.carry_z.shape[0])])
        return LatentState(y, Tensor(self.carry_z))

    def absorb_state(self, state: LatentState):
        """Copy the new carried state in (copies: refill mutates rows)."""
        if self.carry_y is not None:
            self.carry_y = state.y.data.copy()
        if isinstance(state.z, list):
            self.carry_z = np.stack([t.data for t in state.z])
        else:
            self.carry_z = state.z.data.copy()

    def refill(self, mask: np.ndarray):
        k = int(mask.sum())
        if k == 0:
            return
        x, y, pid = self.stream.take(k)
        rows = np.flatnonzero(mask)
        self.x[rows] = x
        self.y_true[rows] = y
        self.puzzle_id[rows] = pid
        self.steps[rows] = 0
        if self.carry_y is not None:
            self.carry_y[rows] = self.store.y_init
        if self.carry_z.ndim == 4:
            self.carry_z[:, rows] = self.store.z_init
        else:
            self.carry_z[rows] = self.store.z_init

    def mean_sup_steps(self) -> float:
        if self.retired_count == 0:
            return 0.0
        return self.retired_steps / self.retired_count

    def arrays(self) -> dict[str, np.ndarray]:
        out = {
            "pool.x": self.x,
            "pool.y_true": self.y_true,
            "pool.puzzle_id": self.puzzle_id,
            "pool.steps": self.steps,
            "pool.carry_z": self.carry_z,
            "pool.retired": np.array([self.retired_steps, self.retired_count], dtype=np.int64),
        }
        if self.carry_y is not None:
            out["pool.carry_y"] = self.carry_y
        return out

    def load(self, arrays: dict[str, np.ndarray]):
        self.x[...] = arrays["pool.x"]
        self.y_true[...] = arrays["pool.y_true"]
        self.puzzle_id[...] = arrays["pool.puzzle_id"]
        self.steps[...] = arrays["pool.steps"]
        self.carry_z = arrays["pool.carry_z"].copy()
        if self.carry_y is not None:
            self.carry_y = arrays["pool.carry_y"].copy()
        self.retired_steps, self.retired_count = (int(v) for v in arrays["pool.retired"])


@dataclass
class TrainState:
    """Everything a resumable run consists of."""

    store: ParamStore
    ema: EMA
    opt: AdamW
    pool: SamplePool
    stream: DataStream
    sched: RecursionSchedule
    cfg: TrainConfig
    step: int = 0
    counters: CallCounters = field(default_factory=CallCounters)


def make_train_state(
    data: tuple[np.ndarray, np.ndarray, np.ndarray],
    store: ParamStore,
    sched: RecursionSchedule,
    cfg: TrainConfig,
) -> TrainState:
    check_memory(store.cfg, sched, cfg.batch_size, cfg.mem_limit_gb, store.dtype.itemsize)
    x, y, pid = data
    stream = DataStream(x, y, pid, cfg.seed)
    pool = SamplePool(stream, store, sched, cfg.batch_size)
    opt = AdamW(
        store,
        lr=cfg.lr,
        beta1=cfg.beta1,
        beta2=cfg.beta2,
        eps=cfg.adam_eps,
        weight_decay=cfg.weight_decay,
        warmup_steps=cfg.warmup_steps,
        embedding_lr=cfg.embedding_lr,
    )
    ema = EMA(store, cfg.ema_decay)
    return TrainState(store, ema, opt, pool, stream, sched, cfg)


def train_step(state: TrainState) -> dict:
    """One optimization step over the pool; returns the metrics record."""
    t0 = time.perf_counter()
    store, sched, cfg, pool = state.store, state.sched, state.cfg, state.pool
    before = state.counters.snapshot()

    x = store.embed_inputs(pool.x, pool.puzzle_id)
    carried = pool.state_tensors()
    new_state, logits, halt = run_schedule(x, carried, sched, store, state.counters)
    y_hat = decode(logits.data)

    loss_answer = losses.stablemax_cross_entropy(logits, pool.y_true)
    if sched.variant == "hrm":
        with tape.no_grad():
            x_ng = x.detach()
            _, _, next_q = run_schedule(x_ng, new_state, sched, store, state.counters)
        last = pool.steps + 1 >= sched.n_sup
        loss_halt = losses.hrm_act_losses(halt, y_hat, pool.y_true, next_q.data, last)
    else:
        loss_halt = losses.trm_halt_loss(halt, y_hat, pool.y_true)
    loss = add(loss_answer, loss_halt)
    if not np.isfinite(loss.data):
        raise TrainingDiverged(f"non-finite loss at step {state.step + 1}", state)

    store.zero_grads()
    tape.backward(loss)
    stepped = state.opt.step()
    if stepped:
        state.ema.update(store)
    state.step += 1

    delta = state.counters.delta_since(before)
    expected_fp = 2 if sched.variant == "hrm" else 1
    assert delta["forward_passes"] == expected_fp, delta
    assert delta["net_calls_tracked"] == sched.tracked_calls, delta

    match = losses.exact_match_rows(y_hat, pool.y_true)
    if cfg.halting:
        halted = losses.halting_decision(halt.data, sched.halt_mode)
    else:
        halted = np.zeros(pool.batch_size, dtype=bool)
    pool.steps += 1
    retire = halted | (pool.steps >= sched.n_sup)
    pool.retired_steps += int(pool.steps[retire].sum())
    pool.retired_count += int(retire.sum())
    pool.absorb_state(new_state)
    pool.refill(retire)

    return {
        "step": state.step,
        "lr": state.opt.lr * state.opt.warmup_factor(state.opt.t),
        "loss_answer": float(loss_answer.data),
        "loss_halt": float(loss_halt.data),
        "loss": float(loss.data),
        "train_exact_match": float(match.mean()),
        "mean_sup_steps": pool.mean_sup_steps(),
        "net_calls": delta["net_calls_total"],
        "net_calls_tracked": delta["net_calls_tracked"],
        "forward_passes": delta["forward_passes"],
        "wall_ms": (time.perf_counter() - t0) * 1e3,
    }


def train_loop(
    data: tuple[np.ndarray, np.ndarray, np.ndarray],
    store: ParamStore,
    sched: RecursionSchedule,
    cfg: TrainConfig,
    on_metrics=None,
    state: TrainState | None = None,
) -> TrainState:
    """Run (or continue) a training run for cfg.max_steps total steps."""
    if state is None:
        state = make_train_state(data, store, sched, cfg)
    while state.step < cfg.max_steps:
        rec = train_step(state)
        if on_metrics is not None:
            on_metrics(rec, state)
    return state
