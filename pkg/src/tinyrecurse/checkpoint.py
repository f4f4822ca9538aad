"""Self-describing checkpoint files.

A checkpoint is a zip of .npy payloads plus a meta.json, written with
fixed zip timestamps and sorted entries so identical state produces
byte-identical files. Arrays are stored little-endian. A full training
checkpoint carries parameters, EMA shadows, optimizer moments, the
sample pool, and the data-stream cursor, so a resumed run replays the
exact step sequence of an uninterrupted one.
"""

from __future__ import annotations

import io
import json
import zipfile

import numpy as np

from .model import NetConfig, ParamStore
from .recursion import RecursionSchedule

_FIXED_DATE = (1980, 1, 1, 0, 0, 0)
FORMAT = "tinyrecurse-checkpoint-v1"


def _le(a: np.ndarray) -> np.ndarray:
    dt = a.dtype.newbyteorder("<")
    return a.astype(dt, copy=False)


def save_arrays(path: str, arrays: dict[str, np.ndarray], meta: dict) -> None:
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        info = zipfile.ZipInfo("meta.json", date_time=_FIXED_DATE)
        zf.writestr(info, json.dumps(meta, indent=2, sort_keys=True) + "\n")
        for name in sorted(arrays):
            buf = io.BytesIO()
            np.lib.format.write_array(buf, _le(np.ascontiguousarray(arrays[name])))
            info = zipfile.ZipInfo(name + ".npy", date_time=_FIXED_DATE)
            zf.writestr(info, buf.getvalue())


def load_arrays(path: str) -> tuple[dict[str, np.ndarray], dict]:
    arrays = {}
    with zipfile.ZipFile(path) as zf:
        meta = json.loads(zf.read("meta.json"))
        for entry in zf.namelist():
            if entry.endswith(".npy"):
                arrays[entry[:-4]] = np.lib.format.read_array(io.BytesIO(zf.read(entry)))
    return arrays, meta


def save_train_state(path: str, state, run_meta: dict | None = None) -> None:
    """Write a resumable checkpoint for a TrainState."""
    store = state.store
    arrays: dict[str, np.ndarray] = {}
    for n, p in store.named():
        arrays[f"param.{n}"] = p.data
        arrays[f"ema.{n}"] = state.ema.shadow[n]
    arrays.update(state.opt.state_arrays())
    arrays.update(state.pool.arrays())
    arrays["const.y_init"] = store.y_init
    arrays["const.z_init"] = store.z_init
    meta = {
        "format": FORMAT,
        "step": state.step,
        "opt_t": state.opt.t,
        "seed": store.seed,
        "dtype": str(store.dtype),
        "halt_mode": store.halt_mode,
        "n_puzzle_ids": store.n_puzzle_ids,
        "net_names": list(store.net_names),
        "net_config": vars(store.cfg),
        "schedule": vars(state.sched),
        "train_config": vars(state.cfg),
        "stream": state.stream.state(),
        "counters": state.counters.snapshot(),
        "ema_decay": state.ema.decay,
    }
    if run_meta:
        meta.update(run_meta)
    save_arrays(path, arrays, meta)


def load_store(path: str, use_ema: bool = False) -> tuple[ParamStore, dict]:
    """Rebuild a ParamStore from a checkpoint (optionally the EMA weights)."""
    arrays, meta = load_arrays(path)
    cfg = NetConfig(**meta["net_config"])
    store = ParamStore(
        cfg,
        n_puzzle_ids=meta["n_puzzle_ids"],
        halt_mode=meta["halt_mode"],
        nets=tuple(meta["net_names"]),
        seed=meta["seed"],
        dtype=meta["dtype"],
    )
    prefix = "ema." if use_ema else "param."
    for n, p in store.named():
        p.data[...] = arrays[prefix + n]
    store.y_init[...] = arrays["const.y_init"]
    store.z_init[...] = arrays["const.z_init"]
    return store, meta


def resume_train_state(path: str, data: tuple[np.ndarray, np.ndarray, np.ndarray]):
    """Rebuild the full TrainState to continue a run bit-exactly."""
    from .training import TrainConfig, make_train_state

    arrays, meta = load_arrays(path)
    store, _ = load_store(path, use_ema=False)
    sched = RecursionSchedule(**meta["schedule"])
    cfg = TrainConfig(**meta["train_config"])
    state = make_train_state(data, store, sched, cfg)
    state.step = int(meta["step"])
    state.opt.load_state(arrays, int(meta["opt_t"]))
    state.ema.load({n: arrays[f"ema.{n}"] for n, _ in store.named()})
    state.pool.load(arrays)
    state.stream.restore(meta["stream"])
    for k, v in meta["counters"].items():
        setattr(state.counters, k, int(v))
    return state
