"""Sudoku generation and rule-preserving augmentation (4x4 and 9x9).

Puzzles are produced by digging clues out of a random complete grid while
a counting backtracker certifies that exactly one solution remains. The
augmentation group is the classical validity-preserving one: digit
relabeling, row/column permutations within a band/stack, band and stack
permutations, and an optional transpose.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _box(size: int) -> int:
    return {4: 2, 9: 3}[size]


def is_valid_solution(grid: np.ndarray) -> bool:
    """Full grid satisfies row/column/box constraints."""
    grid = np.asarray(grid)
    size = grid.shape[0]
    b = _box(size)
    want = frozenset(range(1, size + 1))
    for i in range(size):
        if set(grid[i].tolist()) != want or set(grid[:, i].tolist()) != want:
            return False
    for r in range(0, size, b):
        for c in range(0, size, b):
            if set(grid[r : r + b, c : c + b].reshape(-1).tolist()) != want:
                return False
    return True


def extends(puzzle: np.ndarray, solution: np.ndarray) -> bool:
    """Every clue of the puzzle appears unchanged in the solution."""
    clues = puzzle != 0
    return bool(np.all(puzzle[clues] == solution[clues]))


def _candidates_ok(grid, r, c, v, size, b):
    if v in grid[r] or v in grid[:, c]:
        return False
    br, bc = (r // b) * b, (c // b) * b
    return v not in grid[br : br + b, bc : bc + b]


def count_solutions(puzzle: np.ndarray, limit: int = 2) -> int:
    """Backtracking solution counter, stopping early at ``limit``."""
    grid = np.asarray(puzzle).copy()
    size = grid.shape[0]
    b = _box(size)
    empties = [(r, c) for r in range(size) for c in range(size) if grid[r, c] == 0]

    def walk(i: int) -> int:
        if i == len(empties):
            return 1
        r, c = empties[i]
        found = 0
        for v in range(1, size + 1):
            if _candidates_ok(grid, r, c, v, size, b):
                grid[r, c] = v
                found += walk(i + 1)
                grid[r, c] = 0
                if found >= limit:
                    break
        return found

    return walk(0)


def solve(puzzle: np.ndarray) -> np.ndarray | None:
    """First solution by backtracking, or None."""
    grid = np.asarray(puzzle).copy()
    size = grid.shape[0]
    b = _box(size)

    def walk() -> bool:
        for r in range(size):
            for c in range(size):
                if grid[r, c] == 0:
                    for v in range(1, size + 1):
                        if _candidates_ok(grid, r, c, v, size, b):
                            grid[r, c] = v
                            if walk():
                                return True
                            grid[r, c] = 0
                    return False
        return True

    return grid if walk() else None


def random_solution(size: int, rng: np.random.Generator) -> np.ndarray:
    """Complete grid via backtracking with shuffled digit order."""
    b = _box(size)
    grid = np.zeros((size, size), dtype=np.int64)

    def walk() -> bool:
        for r in range(size):
            for c in range(size):
                if grid[r, c] == 0:
                    for v in rng.permutation(size) + 1:
                        if _candidates_ok(grid, r, c, v, size, b):
                            grid[r, c] = v
                            if walk():
                                return True
                            grid[r, c] = 0
                    return False
        return True

    assert walk()
    return grid


def singles_solvable(puzzle: np.ndarray) -> bool:
    """True when naked-singles propagation alone completes the grid."""
    grid = np.asarray(puzzle).copy()
    size = grid.shape[0]
    b = _box(size)
    progress = True
    while progress:
        progress = False
        for r in range(size):
            for c in range(size):
                if grid[r, c] != 0:
                    continue
                cand = [v for v in range(1, size + 1) if _candidates_ok(grid, r, c, v, size, b)]
                if len(cand) == 1:
                    grid[r, c] = cand[0]
                    progress = True
    return bool(np.all(grid != 0))


@dataclass
class PuzzleInstance:
    """One (input grid, target grid) pair with identity bookkeeping."""

    task: str
    input_grid: np.ndarray
    target_grid: np.ndarray
    puzzle_id: int = 0
    augmentation_id: int = 0


def generate(size: int, count: int, clue_range: tuple[int, int], seed: int) -> list[PuzzleInstance]:
    """Unique-solution puzzles with a clue count inside clue_range.

    Digs cells out of random complete grids in random order, keeping a dig
    only while the counting backtracker still certifies uniqueness. Emitted
    puzzles are distinct as (input, target) pairs.
    """
    if size not in (4, 9):
        raise ValueError("sudoku size must be 4 or 9")
    lo, hi = clue_range
    n_cells = size * size
    min_feasible = 4 if size == 4 else 17  # below this no unique puzzle exists
    if lo > hi or hi > n_cells or lo < min_feasible:
        raise ValueError(f"infeasible clue_range {clue_range} for size {size}")
    rng = np.random.default_rng(seed)
    out: list[PuzzleInstance] = []
    seen: set[bytes] = set()
    task = f"sudoku{size}"
    attempts_left = max(200, count * 200)
    while len(out) < count:
        if attempts_left == 0:
            raise RuntimeError(f"sudoku generation budget exhausted with clue_range {clue_range}")
        attempts_left -= 1
        solution = random_solution(size, rng)
        target_clues = int(rng.integers(lo, hi + 1))
        puzzle = solution.copy()
        clues = n_cells
        for r, c in (divmod(int(i), size) for i in rng.permutation(n_cells)):
            if clues <= target_clues:
                break
            saved = puzzle[r, c]
            puzzle[r, c] = 0
            if count_solutions(puzzle, limit=2) == 1:
                clues -= 1
            else:
                puzzle[r, c] = saved
        if clues < lo or clues > hi:
            continue
        key = puzzle.tobytes() + solution.tobytes()
        if key in seen:
            continue
        seen.add(key)
        out.append(PuzzleInstance(task, puzzle, solution, puzzle_id=0, augmentation_id=0))
    return out


def augment(inst: PuzzleInstance, seed: int) -> PuzzleInstance:
    """Random validity-preserving shuffle applied to input and target alike."""
    rng = np.random.default_rng(seed)
    size = inst.input_grid.shape[0]
    b = _box(size)
    n_bands = size // b

    relabel = np.concatenate([[0], rng.permutation(size) + 1])
    row_order = np.concatenate(
        [band * b + rng.permutation(b) for band in rng.permutation(n_bands)]
    )
    col_order = np.concatenate(
        [stack * b + rng.permutation(b) for stack in rng.permutation(n_bands)]
    )
    do_transpose = bool(rng.integers(0, 2))

    def apply(grid: np.ndarray) -> np.ndarray:
        g = relabel[grid][row_order][:, col_order]
        return g.T.copy() if do_transpose else g

    return PuzzleInstance(
        inst.task,
        apply(inst.input_grid),
        apply(inst.target_grid),
        puzzle_id=inst.puzzle_id,
        augmentation_id=inst.augmentation_id,
    )
