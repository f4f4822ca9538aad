"""Recursion schedules over the backbone network.

The main schedule ("trm") refines a latent reasoning state z and an answer
state y with a single network: n latent updates net(x,y,z) followed by one
answer update net(y,z) form a cycle; T-1 cycles run without gradient
recording and the final cycle is back-propagated in full. The "hrm"
baseline interleaves two networks at different frequencies and tracks only
the last two evaluations. "single_z" carries one feature, "multi_z" splits
z into n separately carried slots.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import tape
from .model import NetConfig, ParamStore, halt_head, net_forward, output_head
from .tape import Tensor

VARIANTS = ("trm", "hrm", "single_z", "multi_z")


@dataclass
class RecursionSchedule:
    """Which variant runs, and how much recursion per supervision step."""

    variant: str = "trm"
    n: int = 6
    T: int = 3
    n_sup: int = 16

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.n < 1 and self.variant != "single_z":
            raise ValueError("n must be >= 1")
        if self.n < 0 or self.T < 1 or self.n_sup < 1:
            raise ValueError("n, T, n_sup must be positive")

    @property
    def halt_mode(self) -> str:
        return "hrm" if self.variant == "hrm" else "trm"

    @property
    def net_names(self) -> tuple[str, ...]:
        return ("net_L", "net_H") if self.variant == "hrm" else ("net",)

    @property
    def tracked_calls(self) -> int:
        """Gradient-tracked net calls per supervision step."""
        return 2 if self.variant == "hrm" else self.n + 1

    @property
    def total_calls(self) -> int:
        """Net calls per full forward pass."""
        return self.T * (self.n + 1)


@dataclass
class LatentState:
    """Carried activations; detached at supervision-step boundaries."""

    y: Tensor | None
    z: Tensor | list[Tensor]

    def detached(self) -> "LatentState":
        y = self.y.detach() if self.y is not None else None
        if isinstance(self.z, list):
            return LatentState(y, [t.detach() for t in self.z])
        return LatentState(y, self.z.detach())


@dataclass
class CallCounters:
    """Instrumentation: network evaluations and full forward passes."""

    net_calls_total: int = 0
    net_calls_tracked: int = 0
    forward_passes: int = 0

    def snapshot(self) -> dict:
        return {
            "net_calls_total": self.net_calls_total,
            "net_calls_tracked": self.net_calls_tracked,
            "forward_passes": self.forward_passes,
        }

    def delta_since(self, before: dict) -> dict:
        return {k: getattr(self, k) - v for k, v in before.items()}


def effective_depth(T: int, n: int, n_layers: int) -> int:
    """Emulated layer count per supervision step: T * (n + 1) * n_layers."""
    if T < 1 or n < 1 or n_layers < 1:
        raise ValueError("effective_depth arguments must be positive")
    return T * (n + 1) * n_layers


def init_state(store: ParamStore, sched: RecursionSchedule, batch: int) -> LatentState:
    """Fresh carried state for a batch, built from the frozen init vectors."""
    y, z = store.init_state(batch)
    if sched.variant == "single_z":
        return LatentState(None, z)
    if sched.variant == "multi_z":
        slots = [Tensor(z.data.copy()) for _ in range(sched.n)]
        return LatentState(y, slots)
    return LatentState(y, z)


class _Net:
    """One block stack bound to its config/rope, with call counting."""

    def __init__(self, store: ParamStore, name: str, counters: CallCounters, max_inputs: int = 3):
        self.blocks, self.final_norm_w = store.net_blocks(name)
        self.cfg = store.cfg
        self.rope = (store.rope_cos, store.rope_sin) if store.cfg.variant == "attention" else None
        self.counters = counters
        self.max_inputs = max_inputs

    def __call__(self, *inputs: Tensor) -> Tensor:
        self.counters.net_calls_total += 1
        if tape.grad_enabled():
            self.counters.net_calls_tracked += 1
        return net_forward(
            inputs, self.blocks, self.cfg, self.rope, self.max_inputs, self.final_norm_w
        )


def latent_recursion(x: Tensor, y: Tensor, z: Tensor, n: int, net: _Net) -> tuple[Tensor, Tensor]:
    """n latent updates z <- net(x,y,z), then one answer update y <- net(y,z)."""
    for _ in range(n):
        z = net(x, y, z)
    y = net(y, z)
    return y, z


def deep_recursion(
    x: Tensor,
    state: LatentState,
    sched: RecursionSchedule,
    store: ParamStore,
    counters: CallCounters,
) -> tuple[LatentState, Tensor, Tensor]:
    """T-1 gradient-free cycles, one tracked cycle, heads on the tracked y.

    Returns the detached carry state, answer logits, and halting signal.
    """
    if sched.variant != "trm":
        raise ValueError("deep_recursion drives the 'trm' schedule")
    counters.forward_passes += 1
    net = _Net(store, "net", counters)
    y, z = state.y, state.z
    with tape.no_grad():
        for _ in range(sched.T - 1):
            y, z = latent_recursion(x, y, z, sched.n, net)
    y, z = latent_recursion(x, y, z, sched.n, net)
    return LatentState(y, z).detached(), output_head(y, store), halt_head(y, store)


def hrm_forward(
    x: Tensor,
    state: LatentState,
    sched: RecursionSchedule,
    store: ParamStore,
    counters: CallCounters,
) -> tuple[LatentState, Tensor, Tensor]:
    """Two-frequency baseline with the one-step gradient approximation.

    The low-frequency state zH is the carried answer (state.y), the
    high-frequency state zL is state.z. Of the T*(n+1) evaluations all but
    the final L- and H-step run without gradients: zL updates on every
    no-grad step and zH after every n-th, then both are detached and one
    tracked L-step plus one tracked H-step close the pass.
    """
    if sched.variant != "hrm":
        raise ValueError("hrm_forward drives the 'hrm' schedule")
    counters.forward_passes += 1
    net_l = _Net(store, "net_L", counters)
    net_h = _Net(store, "net_H", counters)
    zh, zl = state.y, state.z
    with tape.no_grad():
        for i in range(sched.n * sched.T - 1):
            zl = net_l(zl, zh, x)
            if (i + 1) % sched.n == 0:
                zh = net_h(zh, zl)
    zl, zh = zl.detach(), zh.detach()
    zl = net_l(zl, zh, x)
    zh = net_h(zh, zl)
    return LatentState(zh, zl).detached(), output_head(zh, store), halt_head(zh, store)


def single_z_forward(
    x: Tensor,
    state: LatentState,
    sched: RecursionSchedule,
    store: ParamStore,
    counters: CallCounters,
) -> tuple[LatentState, Tensor, Tensor]:
    """Single-feature ablation: n+1 updates z <- net(x,z) per cycle."""
    if sched.variant != "single_z":
        raise ValueError("single_z_forward drives the 'single_z' schedule")
    counters.forward_passes += 1
    net = _Net(store, "net", counters)
    z = state.z

    def cycle(z):
        for _ in range(sched.n + 1):
            z = net(x, z)
        return z

    with tape.no_grad():
        for _ in range(sched.T - 1):
            z = cycle(z)
    z = cycle(z)
    return LatentState(None, z.detach()), output_head(z, store), halt_head(z, store)


def multi_z_forward(
    x: Tensor,
    state: LatentState,
    sched: RecursionSchedule,
    store: ParamStore,
    counters: CallCounters,
) -> tuple[LatentState, Tensor, Tensor]:
    """Multi-slot ablation: slot i refreshed from all slots, then y."""
    if sched.variant != "multi_z":
        raise ValueError("multi_z_forward drives the 'multi_z' schedule")
    if not isinstance(state.z, list) or len(state.z) != sched.n:
        got = len(state.z) if isinstance(state.z, list) else 1
        raise ValueError(f"multi_z carries {sched.n} z slots, got {got}")
    counters.forward_passes += 1
    net = _Net(store, "net", counters, max_inputs=sched.n + 2)
    y, zs = state.y, list(state.z)

    def cycle(y, zs):
        for i in range(sched.n):
            zs[i] = net(x, y, *zs)
        y = net(y, *zs)
        return y, zs

    with tape.no_grad():
        for _ in range(sched.T - 1):
            y, zs = cycle(y, zs)
    y, zs = cycle(y, zs)
    return LatentState(y, zs).detached(), output_head(y, store), halt_head(y, store)


_FORWARDS = {
    "trm": deep_recursion,
    "hrm": hrm_forward,
    "single_z": single_z_forward,
    "multi_z": multi_z_forward,
}


def run_schedule(
    x: Tensor,
    state: LatentState,
    sched: RecursionSchedule,
    store: ParamStore,
    counters: CallCounters,
) -> tuple[LatentState, Tensor, Tensor]:
    """One full forward pass of the configured variant."""
    return _FORWARDS[sched.variant](x, state, sched, store, counters)


def estimate_tracked_bytes(cfg: NetConfig, sched: RecursionSchedule, batch: int, itemsize: int = 4) -> int:
    """Rough upper bound on live tape memory for one optimization step.

    Only the final cycle is recorded; per tracked net call the tape keeps
    the block intermediates alive (a handful of [B,L,D] arrays, the SwiGLU
    inner activations, and attention score matrices).
    """
    b, l, d, f = batch, cfg.seq_len, cfg.hidden_d, cfg.swiglu_inner
    per_block = 8 * b * l * d + 3 * b * l * f
    if cfg.variant == "attention":
        per_block += 3 * b * cfg.n_heads * l * l + 4 * b * l * d
    else:
        per_block += 2 * b * l * d
    per_call = per_block * cfg.n_layers + 2 * b * l * d
    slots = sched.n if sched.variant == "multi_z" else 1
    return (per_call * sched.tracked_calls + 4 * b * l * d * slots) * itemsize


def check_memory(cfg: NetConfig, sched: RecursionSchedule, batch: int, limit_gb: float, itemsize: int = 4) -> None:
    """Refuse configurations whose tracked tape would exceed the budget."""
    need = estimate_tracked_bytes(cfg, sched, batch, itemsize)
    limit = int(limit_gb * 2**30)
    if need > limit:
        raise MemoryError(
            f"schedule needs ~{need / 2**30:.2f} GiB of tape memory, over the {limit_gb:.2f} GiB budget"
        )
