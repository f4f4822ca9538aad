"""Pure-numpy kernels.

Reference implementations of the fused inner loops. `numba_impl` mirrors
every signature; the active backend is chosen in ``kernels.__init__``.
All kernels are dtype-preserving (float32 or float64 in, same out).
"""

import numpy as np


def rmsnorm_fwd(x, w, eps):
    """x [N,D], w [D] -> (out [N,D], inv_rms [N])."""
    ms = np.mean(x * x, axis=1)
    inv = 1.0 / np.sqrt(ms + eps)
    out = x * inv[:, None] * w
    return out, inv


def rmsnorm_bwd(x, w, inv, g):
    """Gradients of rmsnorm_fwd: returns (gx [N,D], gw [D])."""
    d = x.shape[1]
    gw = np.sum(g * x * inv[:, None], axis=0)
    dot = np.sum(g * w * x, axis=1)
    gx = g * w * inv[:, None] - x * (dot * inv**3 / d)[:, None]
    return gx, gw


def silu_mul_fwd(a, b):
    """Gated activation silu(a) * b; returns (out, sigmoid(a)) so the
    backward pass needs no transcendental evaluations.

    exp(-a) may overflow to inf for very negative a; 1/(1+inf) = 0 is the
    correct limit, so the overflow is benign and silenced.
    """
    with np.errstate(over="ignore"):
        sig = 1.0 / (1.0 + np.exp(-a))
    return a * sig * b, sig


def silu_mul_bwd(a, b, sig, g):
    ga = g * b * sig * (1.0 + a * (1.0 - sig))
    gb = g * a * sig
    return ga, gb


def rotary_fwd(x, cos, sin):
    """Rotate adjacent feature pairs of x [B,H,L,dh] by per-position angles.

    cos/sin have shape [L, dh//2]; pair i at position p is rotated by the
    angle whose cosine/sine sit at [p, i].
    """
    x1 = x[..., 0::2]
    x2 = x[..., 1::2]
    out = np.empty_like(x)
    out[..., 0::2] = x1 * cos - x2 * sin
    out[..., 1::2] = x1 * sin + x2 * cos
    return out


def rotary_bwd(g, cos, sin):
    """Inverse rotation applied to the output gradient."""
    g1 = g[..., 0::2]
    g2 = g[..., 1::2]
    gx = np.empty_like(g)
    gx[..., 0::2] = g1 * cos + g2 * sin
    gx[..., 1::2] = -g1 * sin + g2 * cos
    return gx


def softmax_fwd(x):
    """Row softmax of x [N,K]."""
    m = np.max(x, axis=1, keepdims=True)
    e = np.exp(x - m)
    return e / np.sum(e, axis=1, keepdims=True)


def softmax_bwd(p, g):
    dot = np.sum(p * g, axis=1, keepdims=True)
    return p * (g - dot)


def stablemax_ce_fwd(logits, targets, mask):
    """Cross-entropy under the stablemax transform s(u)=u+1 (u>=0) else 1/(1-u).

    logits [N,V], targets [N] int64, mask [N] bool (True = position counts).
    Returns (loss_sum, s [N,V], ssum [N]); caller divides by the mask count.
    """
    with np.errstate(divide="ignore"):  # unselected where-branch at u == 1
        s = np.where(logits >= 0, logits + 1.0, 1.0 / (1.0 - logits))
    ssum = np.sum(s, axis=1)
    idx = np.arange(targets.shape[0])
    losses = np.log(ssum) - np.log(s[idx, targets])
    loss_sum = np.sum(losses[mask], dtype=logits.dtype)
    return loss_sum, s, ssum


def stablemax_ce_bwd(logits, s, ssum, targets, mask, gscale):
    """Gradient wrt logits; gscale folds in upstream grad / position count."""
    sprime = np.where(logits >= 0, np.ones_like(s), s * s)
    g = sprime / ssum[:, None]
    idx = np.arange(targets.shape[0])
    g[idx, targets] -= sprime[idx, targets] / s[idx, targets]
    g *= gscale
    g[~mask] = 0.0
    return g


def adamw_update(p, g, m, v, lr, beta1, beta2, eps, weight_decay, bc1, bc2):
    """Decoupled-weight-decay adaptive-moment step, in place on p, m, v.

    bc1/bc2 are the bias corrections 1-beta1^t and 1-beta2^t.
    """
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    if weight_decay != 0.0:
        p *= 1.0 - lr * weight_decay
    p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def ema_update(shadow, p, decay):
    """shadow <- decay*shadow + (1-decay)*p, in place on shadow."""
    shadow *= decay
    shadow += (1.0 - decay) * p
