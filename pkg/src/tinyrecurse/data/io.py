"""Dataset files: JSON-lines records plus a manifest.

Record schema (one JSON object per line, keys sorted):
  task            task family name (sudoku4, sudoku9, maze, arc)
  puzzle_id       embedding-table index of this (puzzle, augmentation)
  augmentation_id which augmentation of the base puzzle this is
  base_id         index of the underlying base puzzle
  input           flattened input tokens (length = task seq_len)
  target          flattened target tokens
  aug             optional transform parameters, for inverse mapping at
                  evaluation time (color_perm / dihedral_k / offset)
  pair            optional pair label for grouped tasks ("train0", "test1")

The manifest records counts, seed, per-split content hashes, and the
generating config hash, so reruns can be verified byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

from .grids import TaskSpec, task_spec


@dataclass
class Record:
    task: str
    puzzle_id: int
    augmentation_id: int
    base_id: int
    input: np.ndarray
    target: np.ndarray
    aug: dict | None = None
    pair: str | None = None

    def to_json(self) -> str:
        obj = {
            "task": self.task,
            "puzzle_id": int(self.puzzle_id),
            "augmentation_id": int(self.augmentation_id),
            "base_id": int(self.base_id),
            "input": [int(v) for v in self.input],
            "target": [int(v) for v in self.target],
        }
        if self.aug is not None:
            obj["aug"] = self.aug
        if self.pair is not None:
            obj["pair"] = self.pair
        return json.dumps(obj, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "Record":
        obj = json.loads(line)
        return cls(
            task=obj["task"],
            puzzle_id=obj["puzzle_id"],
            augmentation_id=obj["augmentation_id"],
            base_id=obj["base_id"],
            input=np.asarray(obj["input"], dtype=np.int64),
            target=np.asarray(obj["target"], dtype=np.int64),
            aug=obj.get("aug"),
            pair=obj.get("pair"),
        )


def write_records(path: str, records: list[Record]) -> str:
    """Write one split; returns the content hash."""
    digest = hashlib.sha256()
    with open(path, "w") as f:
        for rec in records:
            line = rec.to_json()
            digest.update(line.encode())
            f.write(line + "\n")
    return digest.hexdigest()


def read_records(path: str) -> list[Record]:
    with open(path) as f:
        return [Record.from_json(line) for line in f if line.strip()]


def split_hash(records: list[Record]) -> str:
    digest = hashlib.sha256()
    for rec in records:
        digest.update(rec.to_json().encode())
    return digest.hexdigest()


def instance_keys(records: list[Record]) -> set[bytes]:
    """Content identity of each record, for split-disjointness checks."""
    return {rec.input.tobytes() + rec.target.tobytes() for rec in records}


def write_dataset(out_dir: str, splits: dict[str, list[Record]], meta: dict, force: bool = False) -> dict:
    """Write split files plus manifest.json; refuses to overwrite without force."""
    manifest_path = os.path.join(out_dir, "manifest.json")
    if os.path.exists(manifest_path) and not force:
        raise FileExistsError(f"{out_dir} already holds a dataset (use force to overwrite)")
    os.makedirs(out_dir, exist_ok=True)
    manifest = dict(meta)
    manifest["splits"] = {}
    for name, records in splits.items():
        digest = write_records(os.path.join(out_dir, f"{name}.jsonl"), records)
        manifest["splits"][name] = {"count": len(records), "sha256": digest}
    with open(manifest_path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest


def load_split(data_dir: str, split: str) -> list[Record]:
    path = os.path.join(data_dir, f"{split}.jsonl")
    if not os.path.exists(path):
        raise FileNotFoundError(f"no '{split}' split under {data_dir}")
    return read_records(path)


def load_manifest(data_dir: str) -> dict:
    with open(os.path.join(data_dir, "manifest.json")) as f:
        return json.load(f)


def records_to_arrays(records: list[Record]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Token matrices (inputs, targets, puzzle ids) for the training loop."""
    if not records:
        raise ValueError("empty record list")
    x = np.stack([r.input for r in records])
    y = np.stack([r.target for r in records])
    pid = np.array([r.puzzle_id for r in records], dtype=np.int64)
    return x, y, pid


def dataset_spec(records: list[Record], height: int | None = None, width: int | None = None) -> TaskSpec:
    task = records[0].task
    if task == "maze":
        # maze canvases are square with seq_len = h*w; recover from length
        n = int(round(len(records[0].input) ** 0.5))
        return task_spec("maze", n, n) if height is None else task_spec("maze", height, width)
    return task_spec(task)
