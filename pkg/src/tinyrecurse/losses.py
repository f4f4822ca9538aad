"""Training losses and the halting rule.

The answer loss is a cross-entropy over the stablemax transform
s(u) = u+1 for u >= 0, 1/(1-u) otherwise, normalized per position.
Halting is a plain sigmoid BCE on one logit in "trm" mode (target: the
prediction matches the target exactly) and a two-term Q-objective in
"hrm" mode, whose continue target is bootstrapped from an extra
forward pass and never back-propagated.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .tape import Tensor, record
from .ops import add, col, scale


def stablemax_cross_entropy(logits: Tensor, targets: np.ndarray, ignore_mask: np.ndarray | None = None) -> Tensor:
    """Mean stablemax cross-entropy over unmasked positions.

    logits [B,L,V], targets [B,L] integer tokens, ignore_mask [B,L] bool
    (True = position excluded). Raises when every position is masked.
    """
    v = logits.shape[-1]
    flat = np.ascontiguousarray(logits.data.reshape(-1, v))
    tgt = np.ascontiguousarray(targets.reshape(-1).astype(np.int64))
    if np.any(tgt < 0) or np.any(tgt >= v):
        raise ValueError("targets outside [0, vocab)")
    if ignore_mask is None:
        mask = np.ones(tgt.shape[0], dtype=np.bool_)
    else:
        mask = np.ascontiguousarray(~ignore_mask.reshape(-1))
    count = int(mask.sum())
    if count == 0:
        raise ValueError("stablemax_cross_entropy: all positions masked")

    loss_sum, s, ssum = kernels.stablemax_ce_fwd(flat, tgt, mask)
    out = np.asarray(loss_sum / flat.dtype.type(count))

    def vjp(g):
        gscale = flat.dtype.type(float(g) / count)
        gl = kernels.stablemax_ce_bwd(flat, s, ssum, tgt, mask, gscale)
        return (gl.reshape(logits.shape),)

    return record(out, (logits,), vjp)


def stablemax_probs(logits: np.ndarray) -> np.ndarray:
    """Normalized stablemax probabilities (diagnostics and property tests)."""
    with np.errstate(divide="ignore"):  # unselected where-branch at u == 1
        s = np.where(logits >= 0, logits + 1.0, 1.0 / (1.0 - logits))
    return s / np.sum(s, axis=-1, keepdims=True)


def bce_with_logits(q: Tensor, targets: np.ndarray) -> Tensor:
    """Mean sigmoid binary cross-entropy of logits q [B] against targets [B]."""
    qd = q.data
    t = targets.astype(qd.dtype)
    loss = np.maximum(qd, 0) - qd * t + np.log1p(np.exp(-np.abs(qd)))
    out = np.asarray(loss.mean(dtype=qd.dtype))

    def vjp(g):
        sig = np.where(qd >= 0, 1.0 / (1.0 + np.exp(-np.abs(qd))), np.exp(-np.abs(qd)) / (1.0 + np.exp(-np.abs(qd))))
        return ((sig - t) * (float(g) / qd.size),)

    return record(out, (q,), vjp)


def exact_match_rows(y_hat: np.ndarray, y_true: np.ndarray) -> np.ndarray:
    """Per-sample bool: every position matches (all-or-nothing)."""
    return np.all(y_hat == y_true, axis=tuple(range(1, y_hat.ndim)))


def trm_halt_loss(q_logit: Tensor, y_hat: np.ndarray, y_true: np.ndarray) -> Tensor:
    """BCE of the single halting logit against exact prediction match."""
    target = exact_match_rows(y_hat, y_true)
    return bce_with_logits(col(q_logit, 0), target)


def hrm_act_losses(
    q: Tensor,
    y_hat: np.ndarray,
    y_true: np.ndarray,
    next_q: np.ndarray,
    last_step: np.ndarray | bool,
) -> Tensor:
    """Two-term Q-objective: 0.5*BCE(q0, exact match) + 0.5*BCE(q1, bootstrap).

    next_q [B,2] comes from the extra forward pass on the carried state and
    only supplies targets: sigmoid(next_q0) on a sample's last supervision
    step, sigmoid(max(next_q0, next_q1)) otherwise.
    """

    def sigmoid(u):
        return np.where(u >= 0, 1.0 / (1.0 + np.exp(-np.abs(u))), np.exp(-np.abs(u)) / (1.0 + np.exp(-np.abs(u))))

    halt_target = exact_match_rows(y_hat, y_true)
    last = np.broadcast_to(np.asarray(last_step, dtype=bool), halt_target.shape)
    cont_target = sigmoid(np.where(last, next_q[:, 0], np.maximum(next_q[:, 0], next_q[:, 1])))
    halt_term = scale(bce_with_logits(col(q, 0), halt_target), 0.5)
    cont_term = scale(bce_with_logits(col(q, 1), cont_target), 0.5)
    return add(halt_term, cont_term)


def halting_decision(signal: np.ndarray, mode: str) -> np.ndarray:
    """Per-sample halting during training: q > 0 (trm) or q0 > q1 (hrm)."""
    if mode == "trm":
        return signal[:, 0] > 0
    if mode == "hrm":
        return signal[:, 0] > signal[:, 1]
    raise ValueError("mode must be 'trm' or 'hrm'")
