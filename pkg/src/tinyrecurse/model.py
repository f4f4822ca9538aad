"""Backbone network: embeddings, bias-free transformer/mixer blocks, heads.

Two block variants share the same residual skeleton. ``attention`` is a
pre-norm multi-head self-attention block with rotary position encoding;
``mixer`` swaps the attention for a single bias-free linear map across the
sequence axis, which is cheaper whenever L <= D. Both are followed by a
pre-norm SwiGLU MLP. All linear maps are bias-free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import ops
from .tape import Tensor

VARIANTS = ("attention", "mixer")


@dataclass
class NetConfig:
    """Backbone hyperparameters."""

    vocab_size: int
    seq_len: int
    hidden_d: int = 512
    n_layers: int = 2
    n_heads: int = 8
    expansion: float = 4.0
    variant: str = "attention"
    rope_base: float = 10000.0
    norm_eps: float = 1e-6
    swiglu_multiple: int = 256

    def __post_init__(self):
        for name in ("vocab_size", "seq_len", "hidden_d", "n_layers", "n_heads", "swiglu_multiple"):
            if getattr(self, name) <= 0:
                raise ValueError(f"NetConfig.{name} must be positive")
        if self.expansion <= 0 or self.rope_base <= 0 or self.norm_eps <= 0:
            raise ValueError("NetConfig expansion/rope_base/norm_eps must be positive")
        if self.variant not in VARIANTS:
            raise ValueError(f"NetConfig.variant must be one of {VARIANTS}")
        if self.variant == "attention":
            if self.hidden_d % self.n_heads != 0:
                raise ValueError("hidden_d must be divisible by n_heads")
            if self.head_dim % 2 != 0:
                raise ValueError("head dimension must be even for rotary encoding")

    @property
    def head_dim(self) -> int:
        return self.hidden_d // self.n_heads

    @property
    def swiglu_inner(self) -> int:
        raw = round(self.expansion * self.hidden_d * 2 / 3)
        m = self.swiglu_multiple
        return max(m, -(-raw // m) * m)


@dataclass
class BlockParams:
    """Weights of one residual block."""

    norm1_w: Tensor
    norm2_w: Tensor
    w_gate: Tensor
    w_up: Tensor
    w_down: Tensor
    wq: Tensor | None = None
    wk: Tensor | None = None
    wv: Tensor | None = None
    wo: Tensor | None = None
    w_mix: Tensor | None = None


def trunc_normal(rng: np.random.Generator, shape, std: float, dtype) -> np.ndarray:
    """Normal samples truncated to two standard deviations, rescaled by std."""
    out = rng.standard_normal(shape)
    bad = np.abs(out) > 2.0
    while np.any(bad):
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > 2.0
    return (out * std).astype(dtype)


def build_rope_tables(cfg: NetConfig, dtype) -> tuple[np.ndarray, np.ndarray]:
    """cos/sin rotation tables of shape [L, head_dim//2]."""
    half = cfg.head_dim // 2
    freqs = cfg.rope_base ** (-np.arange(0, half, dtype=np.float64) * 2.0 / cfg.head_dim)
    angles = np.arange(cfg.seq_len, dtype=np.float64)[:, None] * freqs[None, :]
    return np.cos(angles).astype(dtype), np.sin(angles).astype(dtype)


class ParamStore:
    """Named learnable parameters plus frozen constants for one model.

    ``nets`` names the block stacks ("net" for the single-network variants,
    "net_L"/"net_H" for the two-network baseline). The halting head has one
    logit in "trm" mode and two Q-logits in "hrm" mode. y_init/z_init are
    drawn once and never updated.
    """

    def __init__(
        self,
        cfg: NetConfig,
        n_puzzle_ids: int = 1,
        halt_mode: str = "trm",
        nets: Sequence[str] = ("net",),
        seed: int = 0,
        dtype: str = "float32",
    ):
        if halt_mode not in ("trm", "hrm"):
            raise ValueError("halt_mode must be 'trm' or 'hrm'")
        self.cfg = cfg
        self.n_puzzle_ids = int(n_puzzle_ids)
        self.halt_mode = halt_mode
        self.halt_dim = 1 if halt_mode == "trm" else 2
        self.net_names = tuple(nets)
        self.dtype = np.dtype(dtype)
        self.seed = int(seed)
        self.params: dict[str, Tensor] = {}

        rng = np.random.default_rng(seed)
        d, v = cfg.hidden_d, cfg.vocab_size

        def lin(name, shape):
            self.params[name] = Tensor(trunc_normal(rng, shape, 0.02, self.dtype), requires_grad=True)

        def ones(name, shape):
            self.params[name] = Tensor(np.ones(shape, dtype=self.dtype), requires_grad=True)

        lin("embed_tokens", (v, d))
        lin("embed_puzzle", (self.n_puzzle_ids, d))
        for net in self.net_names:
            for i in range(cfg.n_layers):
                p = f"{net}.block{i}"
                ones(f"{p}.norm1_w", (d,))
                ones(f"{p}.norm2_w", (d,))
                if cfg.variant == "attention":
                    for w in ("wq", "wk", "wv", "wo"):
                        lin(f"{p}.{w}", (d, d))
                else:
                    lin(f"{p}.w_mix", (cfg.seq_len, cfg.seq_len))
                lin(f"{p}.w_gate", (d, cfg.swiglu_inner))
                lin(f"{p}.w_up", (d, cfg.swiglu_inner))
                lin(f"{p}.w_down", (cfg.swiglu_inner, d))
            # closing norm of the pre-norm stack; without it the recursion
            # re-adds its own output each call and the state diverges
            ones(f"{net}.final_norm_w", (d,))
        lin("head_out", (d, v))
        lin("head_halt", (d, self.halt_dim))

        # frozen constants; stored in checkpoints but never optimized
        self.y_init = trunc_normal(rng, (d,), 1.0, self.dtype)
        self.z_init = trunc_normal(rng, (d,), 1.0, self.dtype)
        if cfg.variant == "attention":
            self.rope_cos, self.rope_sin = build_rope_tables(cfg, self.dtype)
        else:
            self.rope_cos = self.rope_sin = None
        self._embed_scale = math.sqrt(d)

        expected = param_count(cfg, self.n_puzzle_ids, self.halt_dim, len(self.net_names))
        if self.n_elements != expected:
            raise AssertionError(
                f"parameter count mismatch: store has {self.n_elements}, formula says {expected}"
            )

    @property
    def n_elements(self) -> int:
        return sum(t.size for t in self.params.values())

    def named(self):
        return self.params.items()

    def net_blocks(self, net: str = "net") -> tuple[list[BlockParams], Tensor]:
        """Block stack plus the closing norm weight of one network."""
        blocks = []
        for i in range(self.cfg.n_layers):
            p = f"{net}.block{i}"
            get = self.params.get
            blocks.append(
                BlockParams(
                    norm1_w=self.params[f"{p}.norm1_w"],
                    norm2_w=self.params[f"{p}.norm2_w"],
                    w_gate=self.params[f"{p}.w_gate"],
                    w_up=self.params[f"{p}.w_up"],
                    w_down=self.params[f"{p}.w_down"],
                    wq=get(f"{p}.wq"),
                    wk=get(f"{p}.wk"),
                    wv=get(f"{p}.wv"),
                    wo=get(f"{p}.wo"),
                    w_mix=get(f"{p}.w_mix"),
                )
            )
        return blocks, self.params[f"{net}.final_norm_w"]

    def zero_grads(self):
        for t in self.params.values():
            t.grad = None

    def init_state(self, batch: int) -> tuple[Tensor, Tensor]:
        """Fresh (y, z) activations, the init vectors tiled to [B,L,D]."""
        shape = (batch, self.cfg.seq_len, self.cfg.hidden_d)
        y = np.broadcast_to(self.y_init, shape).copy()
        z = np.broadcast_to(self.z_init, shape).copy()
        return Tensor(y), Tensor(z)

    def embed_inputs(self, tokens: np.ndarray, puzzle_ids: np.ndarray) -> Tensor:
        """Token embedding plus per-puzzle embedding broadcast over positions."""
        tok = ops.embedding(self.params["embed_tokens"], tokens)
        puz = ops.embedding(self.params["embed_puzzle"], puzzle_ids)
        x = ops.add(tok, ops.reshape(puz, (puz.shape[0], 1, puz.shape[1])))
        return ops.scale(x, self._embed_scale)


def param_count(cfg: NetConfig, n_puzzle_ids: int = 1, halt_dim: int = 1, n_nets: int = 1) -> int:
    """Exact learnable-parameter total for a configuration."""
    d, v, f = cfg.hidden_d, cfg.vocab_size, cfg.swiglu_inner
    per_block = 2 * d + 3 * d * f
    if cfg.variant == "attention":
        per_block += 4 * d * d
    else:
        per_block += cfg.seq_len * cfg.seq_len
    total = v * d + n_puzzle_ids * d
    total += n_nets * (cfg.n_layers * per_block + d)  # blocks + closing norm
    total += d * v + d * halt_dim
    return total


def block_forward(h: Tensor, blk: BlockParams, cfg: NetConfig, rope=None) -> Tensor:
    """Pre-norm residual block: h + Mix(norm(h)); h + SwiGLU(norm(h))."""
    b, l, d = h.shape
    if (l, d) != (cfg.seq_len, cfg.hidden_d):
        raise ValueError(f"block_forward: got shape {h.shape}, config expects [B,{cfg.seq_len},{cfg.hidden_d}]")

    if cfg.variant == "attention":
        mixed = _attention(ops.rmsnorm(h, blk.norm1_w, cfg.norm_eps), blk, cfg, rope)
    else:
        mixed = _token_mix(ops.rmsnorm(h, blk.norm1_w, cfg.norm_eps), blk)
    h = ops.add(h, mixed)

    n2 = ops.rmsnorm(h, blk.norm2_w, cfg.norm_eps)
    flat = ops.reshape(n2, (b * l, d))
    gated = ops.silu_mul(ops.matmul(flat, blk.w_gate), ops.matmul(flat, blk.w_up))
    mlp = ops.reshape(ops.matmul(gated, blk.w_down), (b, l, d))
    return ops.add(h, mlp)


def _attention(x: Tensor, blk: BlockParams, cfg: NetConfig, rope) -> Tensor:
    b, l, d = x.shape
    nh, dh = cfg.n_heads, cfg.head_dim
    cos, sin = rope
    flat = ops.reshape(x, (b * l, d))

    def heads(w):
        return ops.transpose(ops.reshape(ops.matmul(flat, w), (b, l, nh, dh)), (0, 2, 1, 3))

    q = ops.rotary(heads(blk.wq), cos, sin)
    k = ops.rotary(heads(blk.wk), cos, sin)
    v = heads(blk.wv)
    scores = ops.scale(ops.matmul(q, ops.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(dh))
    ctx = ops.matmul(ops.softmax_last(scores), v)
    merged = ops.reshape(ops.transpose(ctx, (0, 2, 1, 3)), (b * l, d))
    return ops.reshape(ops.matmul(merged, blk.wo), (b, l, d))


def _token_mix(x: Tensor, blk: BlockParams) -> Tensor:
    b, l, d = x.shape
    # bias-free L->L linear across the sequence axis
    t = ops.reshape(ops.transpose(x, (0, 2, 1)), (b * d, l))
    mixed = ops.matmul(t, blk.w_mix)
    return ops.transpose(ops.reshape(mixed, (b, d, l)), (0, 2, 1))


def net_forward(
    inputs: Sequence[Tensor],
    blocks: list[BlockParams],
    cfg: NetConfig,
    rope=None,
    max_inputs: int = 3,
    final_norm_w: Tensor | None = None,
) -> Tensor:
    """Sum the input activations elementwise, run the block stack, and close
    with a final rmsnorm. The closing norm keeps every network output at
    unit scale; a raw pre-norm stack fed back into itself (z <- net(x,y,z))
    would otherwise re-accumulate its inputs and blow up within a few
    supervision steps."""
    inputs = tuple(inputs)
    if len(inputs) < 2 or len(inputs) > max_inputs:
        raise ValueError(f"net_forward expects between 2 and {max_inputs} inputs, got {len(inputs)}")
    h = ops.add_n(inputs)
    for blk in blocks:
        h = block_forward(h, blk, cfg, rope)
    if final_norm_w is not None:
        h = ops.rmsnorm(h, final_norm_w, cfg.norm_eps)
    return h


def output_head(y: Tensor, store: ParamStore) -> Tensor:
    """Bias-free projection of [B,L,D] to vocabulary logits [B,L,V]."""
    b, l, d = y.shape
    flat = ops.reshape(y, (b * l, d))
    return ops.reshape(ops.matmul(flat, store.params["head_out"]), (b, l, store.cfg.vocab_size))


def halt_head(y: Tensor, store: ParamStore) -> Tensor:
    """Mean-pool over the sequence, then project to halting logit(s) [B,1|2]."""
    return ops.matmul(ops.mean_axis1(y), store.params["head_halt"])


def decode(logits) -> np.ndarray:
    """Per-position argmax; ties resolve to the lowest token id."""
    data = logits.data if isinstance(logits, Tensor) else np.asarray(logits)
    return np.argmax(data, axis=-1)
