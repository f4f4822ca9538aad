"""Numba-compiled kernels, mirroring ``numpy_impl`` signature for signature.

Loops accumulate in float64 regardless of input dtype, so float32 results
may differ from the numpy backend at the last few ulps; within one backend
everything is deterministic.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def rmsnorm_fwd(x, w, eps):
    n, d = x.shape
    out = np.empty_like(x)
    inv = np.empty(n, x.dtype)
    for i in range(n):
        ss = 0.0
        for j in range(d):
            ss += x[i, j] * x[i, j]
        r = 1.0 / math.sqrt(ss / d + eps)
        inv[i] = r
        for j in range(d):
            out[i, j] = x[i, j] * r * w[j]
    return out, inv


@njit(cache=True)
def rmsnorm_bwd(x, w, inv, g):
    n, d = x.shape
    gx = np.empty_like(x)
    gw = np.zeros(d, x.dtype)
    for i in range(n):
        dot = 0.0
        for j in range(d):
            gw[j] += g[i, j] * x[i, j] * inv[i]
            dot += g[i, j] * w[j] * x[i, j]
        coef = dot * inv[i] ** 3 / d
        for j in range(d):
            gx[i, j] = g[i, j] * w[j] * inv[i] - x[i, j] * coef
    return gx, gw


@njit(cache=True)
def silu_mul_fwd(a, b):
    out = np.empty_like(a)
    af = a.ravel()
    bf = b.ravel()
    of = out.ravel()
    for i in range(af.size):
        u = af[i]
        if u >= 0:
            sig = 1.0 / (1.0 + math.exp(-u))
        else:
            e = math.exp(u)
            sig = e / (1.0 + e)
        of[i] = u * sig * bf[i]
    return out


@njit(cache=True)
def silu_mul_bwd(a, b, g):
    ga = np.empty_like(a)
    gb = np.empty_like(b)
    af = a.ravel()
    bf = b.ravel()
    gf = g.ravel()
    gaf = ga.ravel()
    gbf = gb.ravel()
    for i in range(af.size):
        u = af[i]
        if u >= 0:
            sig = 1.0 / (1.0 + math.exp(-u))
        else:
            e = math.exp(u)
            sig = e / (1.0 + e)
        gaf[i] = gf[i] * bf[i] * sig * (1.0 + u * (1.0 - sig))
        gbf[i] = gf[i] * u * sig
    return ga, gb


@njit(cache=True)
def rotary_fwd(x, cos, sin):
    b, h, l, dh = x.shape
    out = np.empty_like(x)
    half = dh // 2
    for i in range(b):
        for j in range(h):
            for p in range(l):
                for k in range(half):
                    c = cos[p, k]
                    s = sin[p, k]
                    x1 = x[i, j, p, 2 * k]
                    x2 = x[i, j, p, 2 * k + 1]
                    out[i, j, p, 2 * k] = x1 * c - x2 * s
                    out[i, j, p, 2 * k + 1] = x1 * s + x2 * c
    return out


@njit(cache=True)
def rotary_bwd(g, cos, sin):
    b, h, l, dh = g.shape
    gx = np.empty_like(g)
    half = dh // 2
    for i in range(b):
        for j in range(h):
            for p in range(l):
                for k in range(half):
                    c = cos[p, k]
                    s = sin[p, k]
                    g1 = g[i, j, p, 2 * k]
                    g2 = g[i, j, p, 2 * k + 1]
                    gx[i, j, p, 2 * k] = g1 * c + g2 * s
                    gx[i, j, p, 2 * k + 1] = -g1 * s + g2 * c
    return gx


@njit(cache=True)
def softmax_fwd(x):
    n, k = x.shape
    out = np.empty_like(x)
    for i in range(n):
        m = x[i, 0]
        for j in range(1, k):
            if x[i, j] > m:
                m = x[i, j]
        tot = 0.0
        for j in range(k):
            e = math.exp(x[i, j] - m)
            out[i, j] = e
            tot += e
        for j in range(k):
            out[i, j] /= tot
    return out


@njit(cache=True)
def softmax_bwd(p, g):
    n, k = p.shape
    gx = np.empty_like(p)
    for i in range(n):
        dot = 0.0
        for j in range(k):
            dot += p[i, j] * g[i, j]
        for j in range(k):
            gx[i, j] = p[i, j] * (g[i, j] - dot)
    return gx


@njit(cache=True)
def stablemax_ce_fwd(logits, targets, mask):
    n, v = logits.shape
    s = np.empty_like(logits)
    ssum = np.empty(n, logits.dtype)
    loss_sum = 0.0
    for i in range(n):
        tot = 0.0
        for j in range(v):
            u = logits[i, j]
            si = u + 1.0 if u >= 0 else 1.0 / (1.0 - u)
            s[i, j] = si
            tot += si
        ssum[i] = tot
        if mask[i]:
            loss_sum += math.log(tot) - math.log(s[i, targets[i]])
    return logits.dtype.type(loss_sum), s, ssum


@njit(cache=True)
def stablemax_ce_bwd(logits, s, ssum, targets, mask, gscale):
    n, v = logits.shape
    g = np.zeros_like(logits)
    for i in range(n):
        if not mask[i]:
            continue
        for j in range(v):
            sp = 1.0 if logits[i, j] >= 0 else s[i, j] * s[i, j]
            g[i, j] = sp / ssum[i] * gscale
        t = targets[i]
        spt = 1.0 if logits[i, t] >= 0 else s[i, t] * s[i, t]
        g[i, t] -= spt / s[i, t] * gscale
    return g


@njit(cache=True)
def adamw_update(p, g, m, v, lr, beta1, beta2, eps, weight_decay, bc1, bc2):
    pf = p.ravel()
    gf = g.ravel()
    mf = m.ravel()
    vf = v.ravel()
    decay = 1.0 - lr * weight_decay
    for i in range(pf.size):
        mf[i] = beta1 * mf[i] + (1.0 - beta1) * gf[i]
        vf[i] = beta2 * vf[i] + (1.0 - beta2) * gf[i] * gf[i]
        pf[i] = pf[i] * decay - lr * (mf[i] / bc1) / (math.sqrt(vf[i] / bc2) + eps)


@njit(cache=True)
def ema_update(shadow, p, decay):
    sf = shadow.ravel()
    pf = p.ravel()
    for i in range(sf.size):
        sf[i] = decay * sf[i] + (1.0 - decay) * pf[i]
