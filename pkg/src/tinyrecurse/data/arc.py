"""Ingestion and augmentation of color-grid puzzle tasks.

Reads the public JSON task schema (train/test lists of {input, output}
integer grids, colors 0-9, at most 30x30). An augmentation composes a
color permutation, a dihedral element, and a translation on the 30x30
canvas; the same composition is applied to every grid of the task, and
each (task, augmentation) pair receives its own puzzle id so the model
can key a learned embedding on it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .grids import ARC_CANVAS, dihedral_inverse, dihedral_transform_any


class ArcFormatError(ValueError):
    """Malformed task file or out-of-schema grid."""


@dataclass
class ArcTask:
    """Demonstration pairs plus test pairs, all as integer grids."""

    task_id: str
    train: list[tuple[np.ndarray, np.ndarray]]
    test: list[tuple[np.ndarray, np.ndarray]]


@dataclass
class Augmentation:
    """Invertible transform: color map, dihedral element, canvas offset."""

    color_perm: np.ndarray  # length 10, perm[c] = new color
    dihedral_k: int
    offset: tuple[int, int]

    def apply(self, grid: np.ndarray) -> np.ndarray:
        """Transformed grid content (offset applies at placement time)."""
        return self.color_perm[dihedral_transform_any(grid, self.dihedral_k)]

    def invert(self, grid: np.ndarray) -> np.ndarray:
        """Undo color and dihedral; the translation is removed earlier by
        the padded-canvas decode, which crops to the content region."""
        inv_perm = np.argsort(self.color_perm)
        return dihedral_transform_any(inv_perm[grid], dihedral_inverse(self.dihedral_k))

    def to_json(self) -> dict:
        return {
            "color_perm": self.color_perm.tolist(),
            "dihedral_k": self.dihedral_k,
            "offset": list(self.offset),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Augmentation":
        return cls(np.asarray(obj["color_perm"], dtype=np.int64), int(obj["dihedral_k"]), tuple(obj["offset"]))


def identity_augmentation() -> Augmentation:
    return Augmentation(np.arange(10, dtype=np.int64), 0, (0, 0))


def _check_grid(raw, where: str) -> np.ndarray:
    grid = np.asarray(raw)
    if grid.ndim != 2 or grid.size == 0:
        raise ArcFormatError(f"{where}: grid must be a non-empty 2-D array")
    if grid.shape[0] > ARC_CANVAS or grid.shape[1] > ARC_CANVAS:
        raise ArcFormatError(f"{where}: grid {grid.shape} exceeds {ARC_CANVAS}x{ARC_CANVAS}")
    if not np.issubdtype(grid.dtype, np.integer):
        raise ArcFormatError(f"{where}: grid values must be integers")
    if grid.min() < 0 or grid.max() > 9:
        raise ArcFormatError(f"{where}: colors must lie in 0..9")
    return grid.astype(np.int64)


def load_tasks(path) -> list[ArcTask]:
    """Parse a task file: either one task object or a mapping id -> task."""
    with open(path) as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as e:
            raise ArcFormatError(f"{path}: not valid JSON ({e})") from e
    if isinstance(raw, dict) and "train" in raw:
        raw = {"task": raw}
    if not isinstance(raw, dict):
        raise ArcFormatError(f"{path}: expected a task object or mapping of tasks")
    tasks = []
    for task_id, obj in raw.items():
        if not isinstance(obj, dict) or "train" not in obj or "test" not in obj:
            raise ArcFormatError(f"{path}:{task_id}: needs 'train' and 'test' lists")

        def pairs(split):
            out = []
            for i, pair in enumerate(obj[split]):
                where = f"{task_id}.{split}[{i}]"
                if "input" not in pair:
                    raise ArcFormatError(f"{where}: missing input")
                x = _check_grid(pair["input"], where + ".input")
                y = _check_grid(pair["output"], where + ".output") if "output" in pair else None
                out.append((x, y))
            return out

        tasks.append(ArcTask(task_id, pairs("train"), pairs("test")))
    return tasks


def serialize_tasks(tasks: list[ArcTask]) -> dict:
    """Back to the on-disk schema (round-trips with load_tasks)."""
    out = {}
    for t in tasks:
        def dump(pairs):
            res = []
            for x, y in pairs:
                rec = {"input": x.tolist()}
                if y is not None:
                    rec["output"] = y.tolist()
                res.append(rec)
            return res

        out[t.task_id] = {"train": dump(t.train), "test": dump(t.test)}
    return out


def sample_augmentations(
    task: ArcTask,
    count: int,
    seed: int,
    fix_background: bool = True,
    max_resample: int = 100,
) -> list[Augmentation]:
    """``count`` random invertible transforms valid for every grid of the task.

    The first augmentation is always the identity. Translations are
    sampled task-globally, bounded by the largest post-dihedral grid, and
    resampled when they would push any grid off the canvas.
    """
    rng = np.random.default_rng(seed)
    grids = [g for pair in task.train + task.test for g in pair if g is not None]
    augs = [identity_augmentation()]
    while len(augs) < count:
        perm = np.arange(10, dtype=np.int64)
        if fix_background:
            perm[1:] = rng.permutation(9) + 1
        else:
            perm = rng.permutation(10).astype(np.int64)
        k = int(rng.integers(8))
        for _ in range(max_resample):
            max_h = max(dihedral_transform_any(g, k).shape[0] for g in grids)
            max_w = max(dihedral_transform_any(g, k).shape[1] for g in grids)
            r = int(rng.integers(ARC_CANVAS - max_h + 1))
            c = int(rng.integers(ARC_CANVAS - max_w + 1))
            if r + max_h <= ARC_CANVAS and c + max_w <= ARC_CANVAS:
                augs.append(Augmentation(perm, k, (r, c)))
                break
        else:
            raise RuntimeError("could not place translation on canvas")
    return augs[:count]
