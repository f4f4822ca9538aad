"""Task generation, augmentation, tokenization, and dataset files."""

from . import arc, grids, io, maze, pipelines, sudoku

__all__ = ["arc", "grids", "io", "maze", "pipelines", "sudoku"]
