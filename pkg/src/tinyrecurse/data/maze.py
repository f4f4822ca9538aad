"""Maze generation with a guaranteed-length shortest path.

Corridors are carved as a random spanning tree over the odd-coordinate
cell lattice (depth-first backtracker, which favors long winding
corridors). START and END go to a pair of far-apart corridor cells; the
instance is kept only when the BFS shortest path reaches min_path_len
grid cells, and the target marks that path.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .grids import MAZE_EMPTY, MAZE_END, MAZE_PATH, MAZE_START, MAZE_WALL
from .sudoku import PuzzleInstance


def _carve(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
    """Spanning-tree corridor layout: WALL/EMPTY grid of shape [h, w]."""
    rows = (h - 1) // 2
    cols = (w - 1) // 2
    if rows < 2 or cols < 2:
        raise ValueError(f"maze {h}x{w} too small to carve")
    grid = np.full((h, w), MAZE_WALL, dtype=np.int64)
    start = (int(rng.integers(rows)), int(rng.integers(cols)))
    seen = {start}
    stack = [start]
    grid[2 * start[0] + 1, 2 * start[1] + 1] = MAZE_EMPTY
    while stack:
        r, c = stack[-1]
        neighbors = [(r + dr, c + dc) for dr, dc in ((0, 1), (0, -1), (1, 0), (-1, 0))]
        neighbors = [n for n in neighbors if 0 <= n[0] < rows and 0 <= n[1] < cols and n not in seen]
        if not neighbors:
            stack.pop()
            continue
        nr, nc = neighbors[int(rng.integers(len(neighbors)))]
        seen.add((nr, nc))
        grid[2 * nr + 1, 2 * nc + 1] = MAZE_EMPTY
        grid[r + nr + 1, c + nc + 1] = MAZE_EMPTY  # wall cell between the two nodes
        stack.append((nr, nc))
    return grid


def bfs_path(grid: np.ndarray, start: tuple[int, int], end: tuple[int, int]) -> list[tuple[int, int]] | None:
    """Shortest open-cell path from start to end, inclusive, or None."""
    h, w = grid.shape
    prev = {start: None}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        if cur == end:
            path = []
            while cur is not None:
                path.append(cur)
                cur = prev[cur]
            return path[::-1]
        r, c = cur
        for dr, dc in ((0, 1), (0, -1), (1, 0), (-1, 0)):
            nxt = (r + dr, c + dc)
            if 0 <= nxt[0] < h and 0 <= nxt[1] < w and nxt not in prev and grid[nxt] != MAZE_WALL:
                prev[nxt] = cur
                queue.append(nxt)
    return None


def _far_pair(grid: np.ndarray, rng: np.random.Generator) -> tuple[tuple[int, int], tuple[int, int]]:
    """Approximate diameter endpoints: two BFS sweeps from a random cell."""
    open_cells = list(zip(*np.nonzero(grid != MAZE_WALL)))

    def farthest(src):
        dist = {src: 0}
        queue = deque([src])
        far = src
        while queue:
            cur = queue.popleft()
            if dist[cur] > dist[far]:
                far = cur
            r, c = cur
            for dr, dc in ((0, 1), (0, -1), (1, 0), (-1, 0)):
                nxt = (r + dr, c + dc)
                if (
                    0 <= nxt[0] < grid.shape[0]
                    and 0 <= nxt[1] < grid.shape[1]
                    and nxt not in dist
                    and grid[nxt] != MAZE_WALL
                ):
                    dist[nxt] = dist[cur] + 1
                    queue.append(nxt)
        return far

    seed_cell = open_cells[int(rng.integers(len(open_cells)))]
    a = farthest(seed_cell)
    b = farthest(a)
    return a, b


def generate(
    height: int,
    width: int,
    min_path_len: int,
    count: int,
    seed: int,
    reject_budget: int = 200,
) -> list[PuzzleInstance]:
    """Mazes whose shortest START-END path spans >= min_path_len cells."""
    max_cells = 2 * (((height - 1) // 2) * ((width - 1) // 2))
    if min_path_len > max_cells:
        raise ValueError(f"min_path_len {min_path_len} unreachable on a {height}x{width} maze")
    rng = np.random.default_rng(seed)
    out: list[PuzzleInstance] = []
    rejects = 0
    while len(out) < count:
        grid = _carve(height, width, rng)
        start, end = _far_pair(grid, rng)
        path = bfs_path(grid, start, end)
        if path is None or len(path) < min_path_len:
            rejects += 1
            if rejects > reject_budget * max(1, count):
                raise RuntimeError(
                    f"maze rejection budget exhausted: min_path_len {min_path_len} too strict for {height}x{width}"
                )
            continue
        puzzle = grid.copy()
        puzzle[start] = MAZE_START
        puzzle[end] = MAZE_END
        target = puzzle.copy()
        for cell in path[1:-1]:
            target[cell] = MAZE_PATH
        out.append(PuzzleInstance("maze", puzzle, target, puzzle_id=0, augmentation_id=0))
    return out


def path_length(target: np.ndarray) -> int:
    """Cells on the marked path, START and END included."""
    return int(np.sum((target == MAZE_PATH) | (target == MAZE_START) | (target == MAZE_END)))
