"""Token vocabularies, grid encoding, and dihedral transforms.

Grids are small 2-D integer arrays in task-native values (sudoku digits,
maze cell kinds, puzzle colors). ``encode`` flattens them row-major onto a
fixed per-task canvas with PAD filling unused cells; ``decode`` inverts on
the unpadded region.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PAD = 0

# sudoku: PAD=0, BLANK=1, digits d -> d+1
SUDOKU_BLANK = 1
# maze cells
MAZE_WALL, MAZE_EMPTY, MAZE_START, MAZE_END, MAZE_PATH = 1, 2, 3, 4, 5
# arc colors c (0..9) -> c+1
ARC_CANVAS = 30


@dataclass(frozen=True)
class TaskSpec:
    """Shape and vocabulary of one task family."""

    name: str
    vocab_size: int
    height: int
    width: int

    @property
    def seq_len(self) -> int:
        return self.height * self.width


def task_spec(task: str, height: int | None = None, width: int | None = None) -> TaskSpec:
    if task == "sudoku4":
        return TaskSpec("sudoku4", 6, 4, 4)
    if task == "sudoku9":
        return TaskSpec("sudoku9", 11, 9, 9)
    if task == "maze":
        if height is None or width is None:
            raise ValueError("maze task needs explicit height/width")
        return TaskSpec("maze", 6, height, width)
    if task == "arc":
        return TaskSpec("arc", 11, ARC_CANVAS, ARC_CANVAS)
    raise ValueError(f"unknown task {task!r}")


def sudoku_tokens(grid: np.ndarray) -> np.ndarray:
    """Sudoku grid (0 = blank, 1..size digits) to tokens."""
    return np.where(grid == 0, SUDOKU_BLANK, grid + 1)


def sudoku_grid(tokens: np.ndarray) -> np.ndarray:
    return np.where(tokens == SUDOKU_BLANK, 0, tokens - 1)


def encode(grid: np.ndarray, spec: TaskSpec, offset: tuple[int, int] = (0, 0)) -> np.ndarray:
    """Row-major flatten onto the task canvas; PAD fills unused cells.

    Sudoku and maze grids fill their canvas exactly. Color grids may be
    smaller and are placed at ``offset`` (the translation part of an
    augmentation); since PAD marks every non-content cell, decode's crop
    to the content bounding box undoes the translation for free.
    """
    grid = np.asarray(grid)
    h, w = grid.shape
    r0, c0 = offset
    if r0 < 0 or c0 < 0 or r0 + h > spec.height or c0 + w > spec.width:
        raise ValueError(
            f"grid {h}x{w} at offset {offset} exceeds {spec.name} canvas {spec.height}x{spec.width}"
        )
    if spec.name.startswith("sudoku"):
        tokens = sudoku_tokens(grid)
    elif spec.name == "maze":
        tokens = grid.copy()
    else:
        tokens = grid + 1  # colors 0..9 -> 1..10
    if np.any(tokens < 0) or np.any(tokens >= spec.vocab_size):
        raise ValueError(f"token out of vocab for task {spec.name}")
    if np.any(tokens == PAD):
        raise ValueError("content cells must not encode to PAD")
    canvas = np.full((spec.height, spec.width), PAD, dtype=np.int64)
    canvas[r0 : r0 + h, c0 : c0 + w] = tokens
    return canvas.reshape(-1)


def decode(tokens: np.ndarray, spec: TaskSpec) -> np.ndarray:
    """Invert ``encode`` on the unpadded region."""
    canvas = np.asarray(tokens).reshape(spec.height, spec.width)
    content = canvas != PAD
    if not content.any():
        return np.zeros((0, 0), dtype=np.int64)
    rows = np.flatnonzero(content.any(axis=1))
    cols = np.flatnonzero(content.any(axis=0))
    sub = canvas[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1]
    if spec.name.startswith("sudoku"):
        return sudoku_grid(sub)
    if spec.name == "maze":
        return sub.copy()
    return sub - 1


def dihedral_transform(grid: np.ndarray, k: int) -> np.ndarray:
    """Element k (0..7) of the symmetry group of the square.

    k = r + 4*f: rotate 90 degrees counterclockwise r times, then flip
    horizontally if f. k=0 is the identity.
    """
    if not 0 <= k <= 7:
        raise ValueError("dihedral element index must be in 0..7")
    grid = np.asarray(grid)
    rot = k % 4
    if rot and grid.shape[0] != grid.shape[1]:
        # fixed-shape tasks cannot absorb an aspect change
        raise ValueError("rotation of a non-square grid on a fixed-shape task")
    out = np.rot90(grid, rot)
    if k >= 4:
        out = np.fliplr(out)
    return np.ascontiguousarray(out)


def dihedral_inverse(k: int) -> int:
    """Index of the inverse group element."""
    if k >= 4 or k == 0:
        return k  # reflections and identity are involutions
    return 4 - k


def dihedral_transform_any(grid: np.ndarray, k: int) -> np.ndarray:
    """Dihedral element for free-shape grids (rotations may swap h and w)."""
    if not 0 <= k <= 7:
        raise ValueError("dihedral element index must be in 0..7")
    out = np.rot90(np.asarray(grid), k % 4)
    if k >= 4:
        out = np.fliplr(out)
    return np.ascontiguousarray(out)
