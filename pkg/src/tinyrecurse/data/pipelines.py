"""Dataset builders: generators + augmentation + tokenization -> records."""

from __future__ import annotations

import numpy as np

from . import arc as arc_mod
from . import maze as maze_mod
from . import sudoku as sudoku_mod
from .grids import dihedral_transform, encode, task_spec
from .io import Record, instance_keys


def build_sudoku(
    size: int,
    count: int,
    test_count: int,
    clue_range: tuple[int, int],
    augmentations: int,
    seed: int,
) -> tuple[dict[str, list[Record]], dict]:
    """Disjoint train/test puzzles; each replicated by rule-preserving shuffles.

    Augmentation 0 is the identity; ids stay at 0 (one shared task
    embedding), base_id tracks the underlying puzzle.
    """
    spec = task_spec(f"sudoku{size}")
    base = sudoku_mod.generate(size, count + test_count, clue_range, seed)
    splits: dict[str, list[Record]] = {"train": [], "test": []}
    seen: set[bytes] = set()
    for idx, inst in enumerate(base):
        split = "train" if idx < count else "test"
        for a in range(max(1, augmentations)):
            # shuffles of distinct bases can coincide on a small grid;
            # re-roll the augmentation until the instance is globally new
            for retry in range(64):
                if a == 0 and retry == 0:
                    shuffled = inst
                else:
                    aug_seed = (seed * 1_000_003 + idx * 1009 + a + retry * 9_999_991) & 0x7FFFFFFF
                    shuffled = sudoku_mod.augment(inst, seed=aug_seed)
                x = encode(shuffled.input_grid, spec)
                y = encode(shuffled.target_grid, spec)
                key = x.tobytes() + y.tobytes()
                if key not in seen:
                    break
            else:
                raise RuntimeError(f"could not find a fresh shuffle of puzzle {idx}")
            seen.add(key)
            splits[split].append(
                Record(
                    task=spec.name,
                    puzzle_id=0,
                    augmentation_id=a,
                    base_id=idx,
                    input=x,
                    target=y,
                )
            )
    if instance_keys(splits["train"]) & instance_keys(splits["test"]):
        raise RuntimeError("train/test instance overlap after augmentation")
    meta = {
        "task": spec.name,
        "seed": seed,
        "clue_range": list(clue_range),
        "augmentations": augmentations,
        "n_puzzle_ids": 1,
        "seq_height": spec.height,
        "seq_width": spec.width,
        "vocab_size": spec.vocab_size,
    }
    return splits, meta


def build_maze(
    height: int,
    width: int,
    min_path_len: int,
    count: int,
    test_count: int,
    augmentations: int,
    seed: int,
) -> tuple[dict[str, list[Record]], dict]:
    """Mazes with long shortest paths, replicated by dihedral transforms."""
    spec = task_spec("maze", height, width)
    base = maze_mod.generate(height, width, min_path_len, count + test_count, seed)
    augmentations = min(max(1, augmentations), 8)
    if height != width and augmentations > 1:
        raise ValueError("dihedral augmentation of non-square mazes would change the canvas")
    splits: dict[str, list[Record]] = {"train": [], "test": []}
    for idx, inst in enumerate(base):
        split = "train" if idx < count else "test"
        for k in range(augmentations):
            xg = dihedral_transform(inst.input_grid, k)
            yg = dihedral_transform(inst.target_grid, k)
            splits[split].append(
                Record(
                    task="maze",
                    puzzle_id=0,
                    augmentation_id=k,
                    base_id=idx,
                    input=encode(xg, spec),
                    target=encode(yg, spec),
                )
            )
    if instance_keys(splits["train"]) & instance_keys(splits["test"]):
        raise RuntimeError("train/test instance overlap after augmentation")
    meta = {
        "task": "maze",
        "seed": seed,
        "min_path_len": min_path_len,
        "augmentations": augmentations,
        "n_puzzle_ids": 1,
        "seq_height": height,
        "seq_width": width,
        "vocab_size": spec.vocab_size,
    }
    return splits, meta


def build_arc(
    tasks: list[arc_mod.ArcTask],
    augmentations: int,
    seed: int,
    fix_background: bool = True,
) -> tuple[dict[str, list[Record]], dict]:
    """Demonstration pairs become training records, test pairs eval records.

    Every (task, augmentation) gets a distinct puzzle id so each copy can
    learn its own embedding; eval records carry the transform parameters
    for inverse mapping and majority voting.
    """
    spec = task_spec("arc")
    splits: dict[str, list[Record]] = {"train": [], "test": []}
    next_pid = 0
    for t_idx, task in enumerate(tasks):
        augs = arc_mod.sample_augmentations(task, max(1, augmentations), seed + t_idx, fix_background)
        for a_idx, aug in enumerate(augs):
            pid = next_pid
            next_pid += 1
            aug_json = aug.to_json()

            def rec(x, y, pair):
                return Record(
                    task="arc",
                    puzzle_id=pid,
                    augmentation_id=a_idx,
                    base_id=t_idx,
                    input=encode(aug.apply(x), spec, aug.offset),
                    target=encode(aug.apply(y), spec, aug.offset),
                    aug=aug_json,
                    pair=pair,
                )

            for p_idx, (x, y) in enumerate(task.train):
                splits["train"].append(rec(x, y, f"train{p_idx}"))
            for p_idx, (x, y) in enumerate(task.test):
                if y is None:
                    continue
                splits["test"].append(rec(x, y, f"test{p_idx}"))
    meta = {
        "task": "arc",
        "seed": seed,
        "augmentations": augmentations,
        "fix_background": fix_background,
        "n_puzzle_ids": next_pid,
        "n_base_tasks": len(tasks),
        "seq_height": spec.height,
        "seq_width": spec.width,
        "vocab_size": spec.vocab_size,
    }
    return splits, meta
