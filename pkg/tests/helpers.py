"""Shared test oracles, independent of the library's gradient path."""

import numpy as np


def central_difference(f, arrays, h=1e-5):
    """Central finite-difference gradient of scalar f wrt each array.

    f is called with no arguments and reads the arrays in place; they are
    perturbed one element at a time. Returns one gradient array per input.
    """
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        flat = a.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = f()
            flat[i] = orig - h
            fm = f()
            flat[i] = orig
            gflat[i] = (fp - fm) / (2 * h)
        grads.append(g)
    return grads


def max_rel_err(approx, exact, floor=1e-8):
    """Max elementwise relative error with an absolute floor on the scale."""
    approx = np.asarray(approx, dtype=np.float64)
    exact = np.asarray(exact, dtype=np.float64)
    denom = np.maximum(np.abs(exact), floor)
    return float(np.max(np.abs(approx - exact) / denom))


def grad_check_floor(fd_grads):
    """Denominator floor for relative FD comparisons: 1e-5 of the overall
    gradient scale. Central differences carry ~eps*|f|/h of roundoff noise,
    so entries far below the gradient scale are judged on an absolute scale
    safely above that noise instead of a raw ratio."""
    scale = max(1.0, max(float(np.max(np.abs(g))) for g in fd_grads))
    return 1e-5 * scale
