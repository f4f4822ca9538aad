"""Kernel backend selection.

The hot inner loops (norms, gated activations, rotary rotation, softmax,
stablemax loss, optimizer/EMA updates) exist twice: a numba-jitted version
and a pure-numpy fallback. The env var ``TINYRECURSE_NUMBA`` picks the
backend at import time: unset or "1" prefers numba, "0" forces numpy.
"""

import os

from . import numpy_impl

_KERNEL_NAMES = [
    "rmsnorm_fwd",
    "rmsnorm_bwd",
    "silu_mul_fwd",
    "silu_mul_bwd",
    "rotary_fwd",
    "rotary_bwd",
    "softmax_fwd",
    "softmax_bwd",
    "stablemax_ce_fwd",
    "stablemax_ce_bwd",
    "adamw_update",
    "ema_update",
]


def _want_numba() -> bool:
    flag = os.environ.get("TINYRECURSE_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "off", "no")


if _want_numba():
    try:
        from . import numba_impl as _impl

        _BACKEND = "numba"
    except ImportError:
        _impl = numpy_impl
        _BACKEND = "numpy"
else:
    _impl = numpy_impl
    _BACKEND = "numpy"

for _name in _KERNEL_NAMES:
    globals()[_name] = getattr(_impl, _name)


def backend_name() -> str:
    """Name of the active kernel backend ("numba" or "numpy")."""
    return _BACKEND


def backends() -> dict:
    """All importable backends, for benchmarks and equivalence tests."""
    out = {"numpy": numpy_impl}
    try:
        from . import numba_impl

        out["numba"] = numba_impl
    except ImportError:
        pass
    return out


__all__ = _KERNEL_NAMES + ["backend_name", "backends"]
