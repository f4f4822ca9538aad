"""Sudoku generation/augmentation against an independent enumerator."""

import itertools

import numpy as np
import pytest

from tinyrecurse.data import sudoku
from tinyrecurse.data.grids import decode, encode, task_spec


def brute_force_solutions(puzzle: np.ndarray, cap: int = 3) -> int:
    """Oracle: plain recursive enumeration, independent of the library's
    counting backtracker (no candidate helper reuse)."""
    size = puzzle.shape[0]
    box = 2 if size == 4 else 3
    grid = [list(map(int, row)) for row in puzzle]

    def ok(r, c, v):
        if any(grid[r][j] == v for j in range(size)):
            return False
        if any(grid[i][c] == v for i in range(size)):
            return False
        br, bc = (r // box) * box, (c // box) * box
        return all(grid[i][j] != v for i in range(br, br + box) for j in range(bc, bc + box))

    def walk(pos):
        if pos == size * size:
            return 1
        r, c = divmod(pos, size)
        if grid[r][c] != 0:
            return walk(pos + 1)
        total = 0
        for v in range(1, size + 1):
            if ok(r, c, v):
                grid[r][c] = v
                total += walk(pos + 1)
                grid[r][c] = 0
                if total >= cap:
                    break
        return total

    return walk(0)


class TestGenerate:
    def test_targets_satisfy_rules_and_extend_inputs(self):
        for inst in sudoku.generate(4, 20, (6, 12), seed=1):
            assert sudoku.is_valid_solution(inst.target_grid)
            assert sudoku.extends(inst.input_grid, inst.target_grid)

    def test_uniqueness_against_oracle_4x4(self):
        for inst in sudoku.generate(4, 40, (5, 12), seed=2):
            assert brute_force_solutions(inst.input_grid) == 1

    def test_uniqueness_against_oracle_9x9(self):
        for inst in sudoku.generate(9, 3, (30, 40), seed=3):
            assert brute_force_solutions(inst.input_grid) == 1

    def test_many_clues_often_forced(self):
        # 12 clues on a 4x4 grid: unique, and usually singles-solvable
        insts = sudoku.generate(4, 10, (12, 12), seed=4)
        assert all(brute_force_solutions(i.input_grid) == 1 for i in insts)
        assert sum(sudoku.singles_solvable(i.input_grid) for i in insts) >= 8

    def test_deterministic(self):
        a = sudoku.generate(4, 5, (6, 10), seed=9)
        b = sudoku.generate(4, 5, (6, 10), seed=9)
        for x, y in zip(a, b):
            assert np.array_equal(x.input_grid, y.input_grid)
            assert np.array_equal(x.target_grid, y.target_grid)

    def test_infeasible_clue_range_rejected(self):
        with pytest.raises(ValueError):
            sudoku.generate(4, 1, (1, 3), seed=0)
        with pytest.raises(ValueError):
            sudoku.generate(9, 1, (5, 10), seed=0)


class TestAugment:
    def test_identity_seedless_properties(self):
        inst = sudoku.generate(4, 1, (6, 10), seed=5)[0]
        out = sudoku.augment(inst, seed=123)
        assert sudoku.is_valid_solution(out.target_grid)
        assert sudoku.extends(out.input_grid, out.target_grid)

    def test_digit_swap_preserves_validity(self):
        inst = sudoku.generate(9, 1, (30, 40), seed=6)[0]
        swapped = inst.target_grid.copy()
        swapped[inst.target_grid == 1] = 2
        swapped[inst.target_grid == 2] = 1
        assert sudoku.is_valid_solution(swapped)

    def test_mass_augmentation_validity_9x9(self):
        # large sample of random shuffles of one solved grid stays valid
        inst = sudoku.generate(9, 1, (30, 40), seed=7)[0]
        for s in range(2000):
            out = sudoku.augment(inst, seed=s)
            assert sudoku.is_valid_solution(out.target_grid)
            assert sudoku.extends(out.input_grid, out.target_grid)

    def test_clue_count_preserved(self):
        inst = sudoku.generate(4, 1, (7, 10), seed=8)[0]
        for s in range(20):
            out = sudoku.augment(inst, seed=s)
            assert np.sum(out.input_grid != 0) == np.sum(inst.input_grid != 0)


class TestEncoding:
    def test_digit_token_map(self):
        spec = task_spec("sudoku9")
        grid = np.zeros((9, 9), dtype=np.int64)
        grid[0, 0] = 9
        tokens = encode(grid, spec)
        assert tokens[0] == 10  # digit 9 -> token 10
        assert tokens[1] == 1  # blank -> token 1

    def test_round_trip(self):
        spec = task_spec("sudoku4")
        for inst in sudoku.generate(4, 5, (6, 10), seed=10):
            assert np.array_equal(decode(encode(inst.input_grid, spec), spec), inst.input_grid)
            assert np.array_equal(decode(encode(inst.target_grid, spec), spec), inst.target_grid)
